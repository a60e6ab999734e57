//! Linear scheme construction.
//!
//! The generator is `[V_W | I_N]`: shares are independent uniform symbols
//! and each message is a linear combination of the shares in its access
//! set. Decoding coefficients start out as distinct indeterminates on the
//! access-set rows. Perfect privacy for user `k` then reduces to the
//! nonsingularity of one square block `E_k` per user, whose rows come from
//! the match plan. A random assignment makes all blocks nonsingular with
//! high probability once `q > K`; failures are retried and, on small
//! instances, searched exhaustively.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::galois::{smallest_prime_greater_than, Element, Field, FieldMatrix, GaloisError};
use crate::matching::{self, MatchPlan, MatchingError};
use crate::topology::{self, AccessStructure, CheckMethod, RateTuple, TopologyError, Verdict, Violation};
use crate::verification::{self, VerificationReport};

pub const DEFAULT_RETRY_BUDGET: usize = 64;
pub const DEFAULT_EXHAUSTIVE_THRESHOLD: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthesisError {
    #[error("rate of user {} is not an integer", .0 + 1)]
    NonIntegralRate(usize),
    #[error("rate tuple is outside the capacity region: {0}")]
    CapacityViolation(Violation),
    #[error(
        "no nonsingular assignment over GF({q}) within {budget} draws \
         (last failing block: {})", .block + 1
    )]
    AssignmentExhausted { q: u32, budget: usize, block: usize },
    #[error("total rate {messages} exceeds node count {nodes}")]
    TooManyMessages { messages: usize, nodes: usize },
    #[error("synthesized scheme failed self-certification")]
    SelfCertification(Box<VerificationReport>),
    #[error("inconsistent scheme: {0}")]
    Shape(String),
    #[error(transparent)]
    Galois(#[from] GaloisError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Matching(#[from] MatchingError),
}

/// Indeterminate `d_{k,n}` in column `col` of `V_{W_k}` at node row `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId {
    pub user: usize,
    pub node: usize,
    pub col: usize,
}

impl VarId {
    pub fn new(user: usize, node: usize, col: usize) -> Self {
        VarId { user, node, col }
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.col == 0 {
            write!(f, "d_{{{},{}}}", self.user + 1, self.node + 1)
        } else {
            write!(f, "d_{{{},{}}}.{}", self.user + 1, self.node + 1, self.col + 1)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Entry {
    Zero,
    Var(VarId),
}

impl Entry {
    pub fn var(&self) -> Option<VarId> {
        match self {
            Entry::Zero => None,
            Entry::Var(v) => Some(*v),
        }
    }
}

pub type Assignment = BTreeMap<VarId, Element>;

/// The symbolic message block `V_W` (N x ΣR_k); the share block is the
/// implicit N x N identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolicGenerator {
    node_count: usize,
    rates: Vec<usize>,
    offsets: Vec<usize>,
    entries: Vec<Entry>,
}

impl SymbolicGenerator {
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn message_cols(&self) -> usize {
        self.rates.iter().sum()
    }

    pub fn rates(&self) -> &[usize] {
        &self.rates
    }

    pub fn entry(&self, row: usize, col: usize) -> Entry {
        self.entries[row * self.message_cols() + col]
    }

    /// Global message column of column `j` of `V_{W_k}`.
    pub fn column_of(&self, user: usize, j: usize) -> usize {
        self.offsets[user] + j
    }

    pub fn user_columns(&self, user: usize) -> std::ops::Range<usize> {
        self.offsets[user]..self.offsets[user] + self.rates[user]
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.entries.iter().filter_map(Entry::var)
    }

    /// Substitutes values; unassigned indeterminates become zero.
    pub fn instantiate(&self, field: Field, assignment: &Assignment) -> FieldMatrix {
        let m = self.message_cols();
        let mut out = FieldMatrix::zeros(field, self.node_count, m);
        for r in 0..self.node_count {
            for c in 0..m {
                if let Entry::Var(v) = self.entry(r, c) {
                    out.set(r, c, assignment.get(&v).copied().unwrap_or(0));
                }
            }
        }
        out
    }
}

impl fmt::Display for SymbolicGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells: Vec<Vec<String>> = (0..self.node_count)
            .map(|r| {
                (0..self.message_cols())
                    .map(|c| match self.entry(r, c) {
                        Entry::Zero => "0".to_string(),
                        Entry::Var(v) => v.to_string(),
                    })
                    .collect()
            })
            .collect();
        let width = cells.iter().flatten().map(String::len).max().unwrap_or(1);
        for (r, row) in cells.iter().enumerate() {
            let msg: Vec<String> = row.iter().map(|s| format!("{s:>width$}")).collect();
            let share: Vec<&str> = (0..self.node_count)
                .map(|c| if c == r { "1" } else { "0" })
                .collect();
            writeln!(f, "[{} | {}]", msg.join(" "), share.join(" "))?;
        }
        Ok(())
    }
}

/// Message block with an indeterminate at every access-set row of each
/// message column and zeros elsewhere.
pub fn init_symbolic_generator(a: &AccessStructure, rates: &[usize]) -> SymbolicGenerator {
    let n = a.node_count();
    let m: usize = rates.iter().sum();
    let mut offsets = Vec::with_capacity(rates.len());
    let mut acc = 0;
    for &r in rates {
        offsets.push(acc);
        acc += r;
    }
    let mut entries = vec![Entry::Zero; n * m];
    for (k, &rk) in rates.iter().enumerate() {
        for &node in a.set(k) {
            for j in 0..rk {
                entries[node * m + offsets[k] + j] = Entry::Var(VarId::new(k, node, j));
            }
        }
    }
    SymbolicGenerator {
        node_count: n,
        rates: rates.to_vec(),
        offsets,
        entries,
    }
}

/// A square symbolic sub-block whose nonsingularity the assignment must
/// ensure. `excluded_user` is `None` for the single-user decodability block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrivacyBlock {
    pub excluded_user: Option<usize>,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    entries: Vec<Entry>,
    /// `(row position, col position)` of one indeterminate per column, in
    /// pairwise distinct rows
    pub transversal: Vec<(usize, usize)>,
}

impl PrivacyBlock {
    fn new(
        g: &SymbolicGenerator,
        excluded_user: Option<usize>,
        rows: Vec<usize>,
        cols: Vec<usize>,
        transversal: Vec<(usize, usize)>,
    ) -> Self {
        let entries = rows
            .iter()
            .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
            .map(|(r, c)| g.entry(r, c))
            .collect();
        PrivacyBlock {
            excluded_user,
            rows,
            cols,
            entries,
            transversal,
        }
    }

    pub fn side(&self) -> usize {
        self.cols.len()
    }

    pub fn entry(&self, r: usize, c: usize) -> Entry {
        self.entries[r * self.side() + c]
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.entries.iter().filter_map(Entry::var)
    }

    /// Square, and the transversal hits a distinct indeterminate in every
    /// row and column.
    pub fn has_transversal(&self) -> bool {
        let side = self.side();
        if self.rows.len() != side || self.transversal.len() != side {
            return false;
        }
        let rows: BTreeSet<usize> = self.transversal.iter().map(|p| p.0).collect();
        let cols: BTreeSet<usize> = self.transversal.iter().map(|p| p.1).collect();
        rows.len() == side
            && cols.len() == side
            && self
                .transversal
                .iter()
                .all(|&(r, c)| matches!(self.entry(r, c), Entry::Var(_)))
    }

    pub fn instantiate(&self, field: Field, assignment: &Assignment) -> FieldMatrix {
        let side = self.side();
        let mut out = FieldMatrix::zeros(field, self.rows.len(), side);
        for r in 0..self.rows.len() {
            for c in 0..side {
                if let Entry::Var(v) = self.entry(r, c) {
                    out.set(r, c, assignment.get(&v).copied().unwrap_or(0));
                }
            }
        }
        out
    }
}

impl fmt::Display for PrivacyBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = self.side();
        let cells: Vec<String> = self
            .entries
            .iter()
            .map(|e| match e {
                Entry::Zero => "0".to_string(),
                Entry::Var(v) => v.to_string(),
            })
            .collect();
        let width = cells.iter().map(String::len).max().unwrap_or(1);
        for row in cells.chunks(side.max(1)) {
            let padded: Vec<String> = row.iter().map(|s| format!("{s:>width$}")).collect();
            writeln!(f, "[{}]", padded.join(" "))?;
        }
        Ok(())
    }
}

/// One block `E_k` per user: rows `∪_{i≠k} C_i^k` (ascending), columns of
/// `W_{[K]\{k}}` in user order. Empty for a single user.
pub fn extract_privacy_blocks(g: &SymbolicGenerator, plan: &MatchPlan) -> Vec<PrivacyBlock> {
    let kk = g.rates.len();
    if kk < 2 {
        return Vec::new();
    }
    (0..kk)
        .map(|k| {
            let rows = plan.rows_for(k);
            let mut cols = Vec::new();
            let mut transversal = Vec::new();
            for i in (0..kk).filter(|&i| i != k) {
                for (j, node) in plan.set(k, i).iter().enumerate() {
                    let row_pos = rows.binary_search(node).expect("row from plan");
                    transversal.push((row_pos, cols.len() + j));
                }
                cols.extend(g.user_columns(i));
            }
            PrivacyBlock::new(g, Some(k), rows, cols, transversal)
        })
        .collect()
}

/// With a single user no privacy block constrains `V_{W_1}`; this block
/// (the first `R_1` access-set rows) keeps it full column rank.
pub fn decodability_block(g: &SymbolicGenerator, a: &AccessStructure) -> Option<PrivacyBlock> {
    let r1 = *g.rates.first()?;
    if g.rates.len() != 1 || r1 == 0 || a.set(0).len() < r1 {
        return None;
    }
    let rows: Vec<usize> = a.set(0).iter().take(r1).copied().collect();
    let cols: Vec<usize> = g.user_columns(0).collect();
    let transversal = (0..r1).map(|j| (j, j)).collect();
    Some(PrivacyBlock::new(g, None, rows, cols, transversal))
}

/// Distinct indeterminates over all blocks, ascending.
pub fn block_vars(blocks: &[PrivacyBlock]) -> Vec<VarId> {
    let set: BTreeSet<VarId> = blocks.iter().flat_map(|b| b.vars()).collect();
    set.into_iter().collect()
}

/// Index of the first singular block, if any.
pub fn first_singular_block(blocks: &[PrivacyBlock], field: Field, assignment: &Assignment) -> Option<usize> {
    blocks.iter().position(|b| {
        b.instantiate(field, assignment)
            .determinant()
            .expect("blocks are square")
            == 0
    })
}

/// Draws every variable independently and uniformly, in ascending order.
pub fn draw_assignment<R: RngCore>(vars: &[VarId], field: Field, rng: &mut R) -> Assignment {
    vars.iter().map(|&v| (v, rng.gen_range(0..field.q()))).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentOutcome {
    pub assignment: Assignment,
    /// random draws consumed, counting the successful one
    pub attempts: usize,
    pub exhaustive: bool,
}

/// Randomized assignment with verification, then exhaustive search when
/// `q^v` is at most `exhaustive_threshold`.
///
/// Attempt `t` uses a ChaCha8 stream `t` keyed by `seed`, so the accepted
/// assignment is a pure function of the inputs.
pub fn assign_indeterminates(
    blocks: &[PrivacyBlock],
    field: Field,
    seed: u64,
    retry_budget: usize,
    exhaustive_threshold: u64,
) -> Result<AssignmentOutcome, SynthesisError> {
    let vars = block_vars(blocks);
    if blocks.is_empty() {
        return Ok(AssignmentOutcome {
            assignment: Assignment::new(),
            attempts: 0,
            exhaustive: false,
        });
    }
    let mut last_failure = 0;
    for attempt in 0..retry_budget {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt as u64);
        let assignment = draw_assignment(&vars, field, &mut rng);
        match first_singular_block(blocks, field, &assignment) {
            None => {
                return Ok(AssignmentOutcome {
                    assignment,
                    attempts: attempt + 1,
                    exhaustive: false,
                })
            }
            Some(b) => last_failure = b,
        }
    }
    if field.count(vars.len()).is_some_and(|n| n <= exhaustive_threshold) {
        let q = field.q();
        let mut digits = vec![0u32; vars.len()];
        loop {
            let assignment: Assignment = vars.iter().copied().zip(digits.iter().copied()).collect();
            match first_singular_block(blocks, field, &assignment) {
                None => {
                    return Ok(AssignmentOutcome {
                        assignment,
                        attempts: retry_budget,
                        exhaustive: true,
                    })
                }
                Some(b) => last_failure = b,
            }
            // odometer, last variable fastest
            let mut pos = digits.len();
            loop {
                if pos == 0 {
                    return Err(SynthesisError::AssignmentExhausted {
                        q,
                        budget: retry_budget,
                        block: last_failure,
                    });
                }
                pos -= 1;
                digits[pos] += 1;
                if digits[pos] < q {
                    break;
                }
                digits[pos] = 0;
            }
        }
    }
    Err(SynthesisError::AssignmentExhausted {
        q: field.q(),
        budget: retry_budget,
        block: last_failure,
    })
}

/// Row-reduces `[V_W | I_N]` onto the message columns and returns the share
/// block: rows `0..M` encode the messages, rows `M..N` the random keys.
pub fn derive_encoding(decoding_block: &FieldMatrix) -> Result<(FieldMatrix, usize), GaloisError> {
    let n = decoding_block.rows();
    let m = decoding_block.cols();
    if m > n {
        return Err(GaloisError::RankDeficientTarget((0..m).collect()));
    }
    let field = decoding_block.field();
    let generator = decoding_block.hstack(&FieldMatrix::identity(field, n))?;
    let targets: Vec<usize> = (0..m).collect();
    let reduced = generator.pivot_reduce(&targets)?;
    let share_cols: Vec<usize> = (m..m + n).collect();
    Ok((reduced.select_cols(&share_cols)?, n - m))
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Provenance {
    pub seed: u64,
    pub match_plan: Option<MatchPlan>,
    pub attempts: usize,
}

/// A finished linear scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DmussScheme {
    field: Field,
    access: AccessStructure,
    rates: Vec<usize>,
    decoding: Vec<FieldMatrix>,
    encoding: FieldMatrix,
    key_count: usize,
    pub provenance: Provenance,
}

impl DmussScheme {
    /// Assembles a scheme after shape checks only; use
    /// [`verification::certify_ranks`] to check that it works.
    pub fn new(
        field: Field,
        access: AccessStructure,
        rates: Vec<usize>,
        decoding: Vec<FieldMatrix>,
        encoding: FieldMatrix,
        provenance: Provenance,
    ) -> Result<Self, SynthesisError> {
        let n = access.node_count();
        let kk = access.user_count();
        if rates.len() != kk || decoding.len() != kk {
            return Err(SynthesisError::Shape(format!(
                "{kk} users but {} rates and {} decoding matrices",
                rates.len(),
                decoding.len()
            )));
        }
        for (k, d) in decoding.iter().enumerate() {
            if d.field() != field || d.rows() != n || d.cols() != rates[k] {
                return Err(SynthesisError::Shape(format!(
                    "decoding matrix {} must be {n}x{} over {field}",
                    k + 1,
                    rates[k]
                )));
            }
        }
        let m: usize = rates.iter().sum();
        if m > n {
            return Err(SynthesisError::TooManyMessages { messages: m, nodes: n });
        }
        if encoding.field() != field || encoding.rows() != n || encoding.cols() != n {
            return Err(SynthesisError::Shape(format!("encoding matrix must be {n}x{n} over {field}")));
        }
        Ok(DmussScheme {
            field,
            access,
            rates,
            decoding,
            encoding,
            key_count: n - m,
            provenance,
        })
    }

    /// Derives the encoding from the decoding matrices.
    pub fn from_decoding(
        field: Field,
        access: AccessStructure,
        rates: Vec<usize>,
        decoding: Vec<FieldMatrix>,
        provenance: Provenance,
    ) -> Result<Self, SynthesisError> {
        let n = access.node_count();
        let block = hstack_all(field, n, &decoding)?;
        let (encoding, _) = derive_encoding(&block)?;
        Self::new(field, access, rates, decoding, encoding, provenance)
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn access(&self) -> &AccessStructure {
        &self.access
    }

    pub fn rates(&self) -> &[usize] {
        &self.rates
    }

    pub fn user_count(&self) -> usize {
        self.rates.len()
    }

    pub fn node_count(&self) -> usize {
        self.access.node_count()
    }

    pub fn message_count(&self) -> usize {
        self.rates.iter().sum()
    }

    pub fn key_count(&self) -> usize {
        self.key_count
    }

    pub fn decoding(&self, k: usize) -> &FieldMatrix {
        &self.decoding[k]
    }

    pub fn decodings(&self) -> &[FieldMatrix] {
        &self.decoding
    }

    pub fn encoding(&self) -> &FieldMatrix {
        &self.encoding
    }

    /// First message coordinate of user `k`.
    pub fn message_offset(&self, k: usize) -> usize {
        self.rates[..k].iter().sum()
    }

    /// `V_{W_[K]}`, N x M.
    pub fn decoding_block(&self) -> FieldMatrix {
        hstack_all(self.field, self.node_count(), &self.decoding).expect("shapes checked at construction")
    }

    /// `V_{W_k}` restricted to the rows of `A_k`, ascending.
    pub fn access_decoder(&self, k: usize) -> FieldMatrix {
        let rows: Vec<usize> = self.access.set(k).iter().copied().collect();
        self.decoding[k].select_rows(&rows).expect("rows in range")
    }

    /// Copy with one decoding entry replaced, keeping the encoding.
    pub fn with_decoding_entry(&self, k: usize, row: usize, col: usize, value: Element) -> Self {
        let mut out = self.clone();
        out.decoding[k].set(row, col, value);
        out
    }

    /// Copy with the encoding re-derived from the current decoding.
    pub fn rederive_encoding(&self) -> Result<Self, GaloisError> {
        let (encoding, _) = derive_encoding(&self.decoding_block())?;
        let mut out = self.clone();
        out.encoding = encoding;
        Ok(out)
    }
}

fn hstack_all(field: Field, n: usize, blocks: &[FieldMatrix]) -> Result<FieldMatrix, GaloisError> {
    blocks
        .iter()
        .try_fold(FieldMatrix::zeros(field, n, 0), |acc, b| acc.hstack(b))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthesisOptions {
    /// Field size; defaults to the smallest prime above K.
    pub q: Option<u32>,
    pub seed: u64,
    pub retry_budget: usize,
    pub exhaustive_threshold: u64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            q: None,
            seed: 0,
            retry_budget: DEFAULT_RETRY_BUDGET,
            exhaustive_threshold: DEFAULT_EXHAUSTIVE_THRESHOLD,
        }
    }
}

pub fn default_field(user_count: usize) -> Field {
    let q = smallest_prime_greater_than(user_count as u64);
    Field::new(u32::try_from(q).expect("field size fits u32")).expect("prime by construction")
}

/// Everything the construction produced before the final scheme, for
/// inspection.
#[derive(Debug, Clone)]
pub struct SynthesisTrace {
    pub generator: SymbolicGenerator,
    pub plan: MatchPlan,
    pub blocks: Vec<PrivacyBlock>,
    pub outcome: AssignmentOutcome,
    pub scheme: DmussScheme,
}

/// Capacity check, match plan, symbolic generator, blocks, assignment,
/// encoding and self-certification.
pub fn synthesize(
    a: &AccessStructure,
    r: &RateTuple,
    opts: &SynthesisOptions,
) -> Result<DmussScheme, SynthesisError> {
    synthesize_traced(a, r, opts).map(|t| t.scheme)
}

pub fn synthesize_traced(
    a: &AccessStructure,
    r: &RateTuple,
    opts: &SynthesisOptions,
) -> Result<SynthesisTrace, SynthesisError> {
    r.check_len(a)?;
    let rates = r.to_integers().map_err(SynthesisError::NonIntegralRate)?;
    if let Verdict::Infeasible(v) = topology::check_perfect_capacity(a, r, CheckMethod::Matching)? {
        return Err(SynthesisError::CapacityViolation(v));
    }
    let m: usize = rates.iter().sum();
    if m > a.node_count() {
        return Err(SynthesisError::TooManyMessages {
            messages: m,
            nodes: a.node_count(),
        });
    }
    let field = match opts.q {
        Some(q) => Field::new(q)?,
        None => default_field(a.user_count()),
    };
    let plan = matching::find_match_plan(a, r)?;
    let generator = init_symbolic_generator(a, &rates);
    let mut blocks = extract_privacy_blocks(&generator, &plan);
    blocks.extend(decodability_block(&generator, a));
    let outcome = assign_indeterminates(
        &blocks,
        field,
        opts.seed,
        opts.retry_budget,
        opts.exhaustive_threshold,
    )?;
    let block = generator.instantiate(field, &outcome.assignment);
    let decoding = rates
        .iter()
        .enumerate()
        .map(|(k, _)| {
            let cols: Vec<usize> = generator.user_columns(k).collect();
            block.select_cols(&cols)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (encoding, _) = derive_encoding(&block)?;
    let scheme = DmussScheme::new(
        field,
        a.clone(),
        rates,
        decoding,
        encoding,
        Provenance {
            seed: opts.seed,
            match_plan: Some(plan.clone()),
            attempts: outcome.attempts,
        },
    )?;
    let report = verification::certify_ranks(&scheme);
    if !report.pass {
        return Err(SynthesisError::SelfCertification(Box::new(report)));
    }
    Ok(SynthesisTrace {
        generator,
        plan,
        blocks,
        outcome,
        scheme,
    })
}
