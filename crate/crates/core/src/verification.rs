//! Two independent certifications of a scheme.
//!
//! [`certify_ranks`] checks the rank conditions directly on the matrices.
//! [`entropy_oracle`] enumerates every share vector, tabulates the induced
//! joint distributions and compares entropies. Because every distribution
//! involved is the image of a uniform vector under a linear map, each
//! entropy is `log_q` of a support size; the oracle still confirms that
//! every table is uniform before reading an entropy off it.
//!
//! Each check carries a [`Condition`] tag shared by both routes, so the
//! two reports can be compared condition by condition.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::galois::Element;
use crate::synthesis::DmussScheme;

pub const DEFAULT_MAX_STATES: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("enumeration needs q^N = {q}^{n} states, above the cap of {max}")]
    TooLarge { q: u32, n: usize, max: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Ranks,
    Entropy,
}

/// What a check certifies, independent of how.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Condition {
    /// user k decodes W_k from its access set alone
    Correctness(usize),
    /// W_k carries R_k symbols
    MessageRate(usize),
    /// Y_{A_k} is independent of all other messages
    Privacy(usize),
    /// messages jointly carry ΣR_k symbols
    JointRate,
    /// messages are mutually independent
    Independence,
    /// share n is one uniform symbol
    ShareUniform(usize),
    /// the encoding is a bijection onto share vectors
    EncodingBijective,
    /// decoding recovers what the encoding embedded, keys cancel
    EncodingConsistency,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub name: String,
    #[serde(skip)]
    pub condition: Condition,
    pub expected: u64,
    pub observed: u64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub mode: Mode,
    pub pass: bool,
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    fn new(mode: Mode, checks: Vec<CheckResult>) -> Self {
        VerificationReport {
            mode,
            pass: checks.iter().all(|c| c.pass),
            checks,
        }
    }

    pub fn failing(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn failing_conditions(&self) -> BTreeSet<Condition> {
        self.failing().map(|c| c.condition).collect()
    }

    pub fn check(&self, condition: Condition) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.condition == condition)
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {:<40} expected {:>3} observed {:>3}",
                if c.pass { "ok  " } else { "FAIL" },
                c.name,
                c.expected,
                c.observed
            )?;
        }
        Ok(())
    }
}

fn check(name: String, condition: Condition, expected: u64, observed: u64) -> CheckResult {
    CheckResult {
        name,
        condition,
        expected,
        observed,
        pass: expected == observed,
        note: None,
    }
}

fn others(s: &DmussScheme, k: usize) -> Vec<usize> {
    (0..s.user_count()).filter(|&i| i != k).collect()
}

fn message_cols(s: &DmussScheme, users: &[usize]) -> Vec<usize> {
    users
        .iter()
        .flat_map(|&i| {
            let off = s.message_offset(i);
            off..off + s.rates()[i]
        })
        .collect()
}

/// Rank certification.
///
/// (a) decoding rows outside each `A_k` vanish, (b) `rk V_{W_k} = R_k`,
/// (c) the rows of `V_{W_{[K]\{k}}}` outside `A_k` have rank
/// `Σ_{i≠k} R_i`, (d) `rk V_{W_[K]} = ΣR_k` (and equals the sum of the
/// individual ranks), (e) the encoding is invertible and decoding it
/// returns the message coordinates of every unit vector while cancelling
/// every key.
pub fn certify_ranks(s: &DmussScheme) -> VerificationReport {
    let n = s.node_count();
    let kk = s.user_count();
    let m = s.message_count();
    let block = s.decoding_block();
    let mut checks = Vec::new();

    for k in 0..kk {
        let outside = s.access().complement(k);
        let d = s.decoding(k);
        let stray = outside
            .iter()
            .map(|&r| d.row(r).iter().filter(|&&v| v != 0).count() as u64)
            .sum();
        checks.push(check(
            format!("decoding_support[k={}]", k + 1),
            Condition::Correctness(k),
            0,
            stray,
        ));
    }
    for k in 0..kk {
        checks.push(check(
            format!("rank_decoding[k={}]", k + 1),
            Condition::MessageRate(k),
            s.rates()[k] as u64,
            s.decoding(k).rank() as u64,
        ));
    }
    for k in 0..kk {
        let users = others(s, k);
        let cols = message_cols(s, &users);
        let rows = s.access().complement(k);
        let restricted = block.submatrix(&rows, &cols).expect("indices in range");
        let expected: usize = users.iter().map(|&i| s.rates()[i]).sum();
        checks.push(check(
            format!("privacy_rank_outside_access[k={}]", k + 1),
            Condition::Privacy(k),
            expected as u64,
            restricted.rank() as u64,
        ));
    }
    let joint = block.rank() as u64;
    checks.push(check("rank_joint_decoding".into(), Condition::JointRate, m as u64, joint));
    let individual: u64 = s.decodings().iter().map(|d| d.rank() as u64).sum();
    checks.push(check(
        "rank_joint_equals_sum".into(),
        Condition::Independence,
        individual,
        joint,
    ));
    checks.push(check(
        "rank_encoding".into(),
        Condition::EncodingBijective,
        n as u64,
        s.encoding().rank() as u64,
    ));
    // row i of E·V_W is what unit coordinate i decodes to
    let composed = s.encoding().mul(&block).expect("N x N times N x M");
    let bad_units = (0..n)
        .filter(|&i| (0..m).any(|c| composed.get(i, c) != u32::from(i == c)))
        .count();
    checks.push(check(
        "encode_decode_unit_vectors".into(),
        Condition::EncodingConsistency,
        0,
        bad_units as u64,
    ));
    VerificationReport::new(Mode::Ranks, checks)
}

/// Support size of a projection, with a uniformity check.
struct Table {
    counts: HashMap<u64, u32>,
}

impl Table {
    fn new() -> Self {
        Table { counts: HashMap::new() }
    }

    fn add(&mut self, key: u64) {
        *self.counts.entry(key).or_insert(0) += 1;
    }

    /// `(log_q |support|, uniform)`; `None` when the support is not a power
    /// of `q` (impossible for a uniform image of a linear map).
    fn entropy(&self, q: u64) -> (Option<u64>, bool) {
        let mut values = self.counts.values();
        let first = values.next().copied().unwrap_or(0);
        let uniform = values.all(|&c| c == first);
        let mut support = self.counts.len() as u64;
        let mut exp = 0;
        while support > 1 && support % q == 0 {
            support /= q;
            exp += 1;
        }
        ((support == 1).then_some(exp), uniform)
    }
}

fn pack(q: u64, values: impl Iterator<Item = Element>) -> u64 {
    values.fold(0u64, |acc, v| acc * q + v as u64)
}

fn entropy_check(
    name: String,
    condition: Condition,
    expected: u64,
    observed: (Option<u64>, bool),
) -> CheckResult {
    let (value, uniform) = observed;
    let mut c = check(name, condition, expected, value.unwrap_or(u64::MAX));
    if !uniform || value.is_none() {
        c.pass = false;
        c.note = Some("distribution is not uniform on its support".into());
    }
    c
}

/// Conditional entropy `H(X|Y) = H(X,Y) - H(Y)` from two tables.
fn conditional(joint: (Option<u64>, bool), given: (Option<u64>, bool)) -> (Option<u64>, bool) {
    let value = match (joint.0, given.0) {
        (Some(j), Some(g)) if j >= g => Some(j - g),
        _ => None,
    };
    (value, joint.1 && given.1)
}

/// Enumerates the share distribution (and, for the encoding checks, the
/// message-and-key distribution) and checks correctness, perfect privacy,
/// rates, mutual independence and share uniformity by exact counting.
pub fn entropy_oracle(s: &DmussScheme, max_states: u64) -> Result<VerificationReport, VerifyError> {
    let q = s.field().q();
    let n = s.node_count();
    let states = s
        .field()
        .count(n)
        .filter(|&c| c <= max_states)
        .ok_or(VerifyError::TooLarge { q, n, max: max_states })?;
    let qq = q as u64;
    let kk = s.user_count();
    let m = s.message_count();
    let block = s.decoding_block();
    let access: Vec<Vec<usize>> = (0..kk).map(|k| s.access().set(k).iter().copied().collect()).collect();
    let own: Vec<Vec<usize>> = (0..kk).map(|k| message_cols(s, &[k])).collect();
    let rest: Vec<Vec<usize>> = (0..kk).map(|k| message_cols(s, &others(s, k))).collect();

    let mut y_a = (0..kk).map(|_| Table::new()).collect::<Vec<_>>();
    let mut w_own = (0..kk).map(|_| Table::new()).collect::<Vec<_>>();
    let mut own_given = (0..kk).map(|_| Table::new()).collect::<Vec<_>>();
    let mut rest_given = (0..kk).map(|_| Table::new()).collect::<Vec<_>>();
    let mut w_all = Table::new();
    let mut y_single = (0..n).map(|_| Table::new()).collect::<Vec<_>>();

    let mut y = vec![0 as Element; n];
    for _ in 0..states {
        let w = block.left_apply(&y).expect("length N");
        for k in 0..kk {
            let ya = pack(qq, access[k].iter().map(|&i| y[i]));
            let wk = pack(qq, own[k].iter().map(|&c| w[c]));
            let wr = pack(qq, rest[k].iter().map(|&c| w[c]));
            let shift_own = qq.pow(own[k].len() as u32);
            let shift_rest = qq.pow(rest[k].len() as u32);
            y_a[k].add(ya);
            w_own[k].add(wk);
            own_given[k].add(ya * shift_own + wk);
            rest_given[k].add(ya * shift_rest + wr);
        }
        w_all.add(pack(qq, w.iter().copied()));
        for (i, t) in y_single.iter_mut().enumerate() {
            t.add(y[i] as u64);
        }
        increment(&mut y, q);
    }

    let mut checks = Vec::new();
    for k in 0..kk {
        checks.push(entropy_check(
            format!("H(W_{}|Y_A{})", k + 1, k + 1),
            Condition::Correctness(k),
            0,
            conditional(own_given[k].entropy(qq), y_a[k].entropy(qq)),
        ));
    }
    let mut sum_individual = Some(0u64);
    for k in 0..kk {
        let h = w_own[k].entropy(qq);
        sum_individual = sum_individual.zip(h.0).map(|(a, b)| a + b);
        checks.push(entropy_check(
            format!("H(W_{})", k + 1),
            Condition::MessageRate(k),
            s.rates()[k] as u64,
            h,
        ));
    }
    for k in 0..kk {
        let expected: usize = others(s, k).iter().map(|&i| s.rates()[i]).sum();
        checks.push(entropy_check(
            format!("H(W_[K]\\{{{}}}|Y_A{})", k + 1, k + 1),
            Condition::Privacy(k),
            expected as u64,
            conditional(rest_given[k].entropy(qq), y_a[k].entropy(qq)),
        ));
    }
    let h_all = w_all.entropy(qq);
    checks.push(entropy_check("H(W_[K])".into(), Condition::JointRate, m as u64, h_all));
    checks.push(entropy_check(
        "H(W_[K]) = sum_k H(W_k)".into(),
        Condition::Independence,
        sum_individual.unwrap_or(u64::MAX),
        h_all,
    ));
    for (i, t) in y_single.iter().enumerate() {
        checks.push(entropy_check(
            format!("H(Y_{})", i + 1),
            Condition::ShareUniform(i),
            1,
            t.entropy(qq),
        ));
    }

    // encoding: enumerate message-and-key coordinates
    let mut images = Table::new();
    let mut mismatches = 0u64;
    let mut x = vec![0 as Element; n];
    for _ in 0..states {
        let shares = s.encoding().left_apply(&x).expect("length N");
        images.add(pack(qq, shares.iter().copied()));
        let decoded = block.left_apply(&shares).expect("length N");
        if decoded[..] != x[..m] {
            mismatches += 1;
        }
        increment(&mut x, q);
    }
    checks.push(entropy_check(
        "H(Y_[N]) under encoding".into(),
        Condition::EncodingBijective,
        n as u64,
        images.entropy(qq),
    ));
    checks.push(check(
        "decode(encode(x)) = messages(x)".into(),
        Condition::EncodingConsistency,
        0,
        mismatches,
    ));

    Ok(VerificationReport::new(Mode::Entropy, checks))
}

fn increment(v: &mut [Element], q: u32) {
    for d in v.iter_mut().rev() {
        *d += 1;
        if *d < q {
            return;
        }
        *d = 0;
    }
}

/// Both verifiers, in order.
pub fn verify_both(s: &DmussScheme, max_states: u64) -> Result<(VerificationReport, VerificationReport), VerifyError> {
    Ok((certify_ranks(s), entropy_oracle(s, max_states)?))
}

/// Conditions on which the two reports disagree; empty when they agree.
pub fn disagreements(ranks: &VerificationReport, entropy: &VerificationReport) -> BTreeSet<Condition> {
    let shared: BTreeSet<Condition> = ranks
        .checks
        .iter()
        .map(|c| c.condition)
        .filter(|c| entropy.check(*c).is_some())
        .collect();
    let a = ranks.failing_conditions();
    let b = entropy.failing_conditions();
    shared
        .into_iter()
        .filter(|c| a.contains(c) != b.contains(c))
        .chain(b.iter().filter(|c| ranks.check(**c).is_none()).copied())
        .collect()
}
