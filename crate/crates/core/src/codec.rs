//! Placement and retrieval.
//!
//! Payloads hold `L` independent columns; each column is encoded with the
//! one-symbol scheme on its own.

use rand::{Rng, RngCore};
use thiserror::Error;

use crate::galois::{Element, Field, FieldMatrix};
use crate::synthesis::DmussScheme;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

fn mismatch(msg: impl Into<String>) -> CodecError {
    CodecError::DimensionMismatch(msg.into())
}

/// Per-user message blocks, `R_k x L` each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Payload {
    blocks: Vec<FieldMatrix>,
    len: usize,
}

impl Payload {
    pub fn new(blocks: Vec<FieldMatrix>) -> Result<Self, CodecError> {
        let len = blocks.first().map_or(0, FieldMatrix::cols);
        if blocks.iter().any(|b| b.cols() != len) {
            return Err(mismatch("message blocks have different lengths"));
        }
        Ok(Payload { blocks, len })
    }

    /// Splits `M x L` stacked message coordinates by rate.
    pub fn from_stacked(stacked: &FieldMatrix, rates: &[usize]) -> Result<Self, CodecError> {
        if stacked.rows() != rates.iter().sum::<usize>() {
            return Err(mismatch(format!(
                "{} message rows for total rate {}",
                stacked.rows(),
                rates.iter().sum::<usize>()
            )));
        }
        let mut at = 0;
        let blocks = rates
            .iter()
            .map(|&r| {
                let rows: Vec<usize> = (at..at + r).collect();
                at += r;
                stacked.select_rows(&rows).expect("rows in range")
            })
            .collect();
        Payload::new(blocks)
    }

    pub fn block(&self, k: usize) -> &FieldMatrix {
        &self.blocks[k]
    }

    pub fn blocks(&self) -> &[FieldMatrix] {
        &self.blocks
    }

    /// Block length `L`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// All message coordinates of column `l`, user by user.
    pub fn column(&self, l: usize) -> Vec<Element> {
        self.blocks
            .iter()
            .flat_map(|b| (0..b.rows()).map(move |r| b.get(r, l)))
            .collect()
    }

    pub fn random<R: RngCore + ?Sized>(field: Field, rates: &[usize], len: usize, rng: &mut R) -> Self {
        let blocks = rates.iter().map(|&r| random_matrix(field, r, len, rng)).collect();
        Payload { blocks, len }
    }
}

pub fn random_matrix<R: RngCore + ?Sized>(field: Field, rows: usize, cols: usize, rng: &mut R) -> FieldMatrix {
    let mut m = FieldMatrix::zeros(field, rows, cols);
    // column order, so the stream is consumed column by column
    for c in 0..cols {
        for r in 0..rows {
            m.set(r, c, rng.gen_range(0..field.q()));
        }
    }
    m
}

/// Share streams, `N x L`; row `n` is stored at node `n`.
pub type ShareSet = FieldMatrix;

pub enum KeySource<'a> {
    /// `key_count x L`
    Explicit(&'a FieldMatrix),
    /// uniform keys, drawn column by column
    Random(&'a mut dyn RngCore),
}

/// Encodes every payload column with fresh keys: shares = (messages, keys)
/// times the encoding matrix.
pub fn place(s: &DmussScheme, p: &Payload, keys: KeySource<'_>) -> Result<ShareSet, CodecError> {
    let field = s.field();
    if p.blocks.len() != s.user_count() {
        return Err(mismatch(format!(
            "payload has {} users, scheme has {}",
            p.blocks.len(),
            s.user_count()
        )));
    }
    for (k, b) in p.blocks.iter().enumerate() {
        if b.rows() != s.rates()[k] || b.field() != field {
            return Err(mismatch(format!(
                "user {} block has {} rows over GF({}), expected {} over {field}",
                k + 1,
                b.rows(),
                b.field().q(),
                s.rates()[k]
            )));
        }
    }
    let len = p.len();
    let keys = match keys {
        KeySource::Explicit(k) => {
            if k.rows() != s.key_count() || k.cols() != len || k.field() != field {
                return Err(mismatch(format!(
                    "key block is {}x{}, expected {}x{len}",
                    k.rows(),
                    k.cols(),
                    s.key_count()
                )));
            }
            k.clone()
        }
        KeySource::Random(rng) => random_matrix(field, s.key_count(), len, rng),
    };
    let n = s.node_count();
    let mut shares = FieldMatrix::zeros(field, n, len);
    for l in 0..len {
        let mut x = p.column(l);
        x.extend((0..keys.rows()).map(|r| keys.get(r, l)));
        let y = s.encoding().left_apply(&x).expect("coordinate vector has length N");
        for (node, v) in y.into_iter().enumerate() {
            shares.set(node, l, v);
        }
    }
    Ok(shares)
}

/// Recovers user `k`'s block from the shares of its access set, given in
/// ascending node order.
pub fn retrieve(s: &DmussScheme, k: usize, shares_on_access_set: &FieldMatrix) -> Result<FieldMatrix, CodecError> {
    if k >= s.user_count() {
        return Err(mismatch(format!("no user {}", k + 1)));
    }
    let need = s.access().set(k).len();
    if shares_on_access_set.rows() != need || shares_on_access_set.field() != s.field() {
        return Err(mismatch(format!(
            "user {} reads {need} shares, got {}",
            k + 1,
            shares_on_access_set.rows()
        )));
    }
    let decoder = s.access_decoder(k);
    let len = shares_on_access_set.cols();
    let mut out = FieldMatrix::zeros(s.field(), s.rates()[k], len);
    for l in 0..len {
        let y: Vec<Element> = (0..need).map(|r| shares_on_access_set.get(r, l)).collect();
        let w = decoder.left_apply(&y).expect("length |A_k|");
        for (r, v) in w.into_iter().enumerate() {
            out.set(r, l, v);
        }
    }
    Ok(out)
}

/// Rows of `A_k`, ascending, from a full share set.
pub fn access_rows(s: &DmussScheme, k: usize, shares: &ShareSet) -> Result<FieldMatrix, CodecError> {
    if shares.rows() != s.node_count() {
        return Err(mismatch(format!(
            "{} share rows for {} nodes",
            shares.rows(),
            s.node_count()
        )));
    }
    let rows: Vec<usize> = s.access().set(k).iter().copied().collect();
    Ok(shares.select_rows(&rows).expect("rows in range"))
}
