//! Prime-field arithmetic and dense matrices over GF(q).
//!
//! Entries are stored as canonical residues in `[0, q)` and every operation
//! reduces eagerly, so two matrices with equal rows compare equal and
//! serialize identically.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A field element, always a canonical residue modulo the field's prime.
pub type Element = u32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GaloisError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("division by zero")]
    DivideByZero,
    #[error("matrix is {rows}x{cols}, not square")]
    NotSquare { rows: usize, cols: usize },
    #[error("target columns {0:?} do not have full column rank")]
    RankDeficientTarget(Vec<usize>),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("index {index} out of range (bound {bound})")]
    IndexOutOfRange { index: usize, bound: usize },
    #[error("entry {value} is not a residue modulo {q}")]
    EntryOutOfRange { value: u64, q: u32 },
    #[error("fields differ: GF({0}) vs GF({1})")]
    FieldMismatch(u32, u32),
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n % 2 == 0 {
        return false;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// Least prime strictly greater than `k`.
pub fn smallest_prime_greater_than(k: u64) -> u64 {
    let mut n = k + 1;
    while !is_prime(n) {
        n += 1;
    }
    n
}

/// The prime field GF(q).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Field {
    q: u32,
}

impl TryFrom<u32> for Field {
    type Error = GaloisError;

    fn try_from(q: u32) -> Result<Self, Self::Error> {
        Field::new(q)
    }
}

impl From<Field> for u32 {
    fn from(f: Field) -> u32 {
        f.q
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF({})", self.q)
    }
}

impl Field {
    pub fn new(q: u32) -> Result<Self, GaloisError> {
        if is_prime(q as u64) {
            Ok(Field { q })
        } else {
            Err(GaloisError::NotPrime(q as u64))
        }
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    /// Maps any integer onto its canonical residue.
    pub fn reduce(&self, v: i64) -> Element {
        v.rem_euclid(self.q as i64) as Element
    }

    /// Checks that `v` already is a canonical residue.
    pub fn element(&self, v: u64) -> Result<Element, GaloisError> {
        if v < self.q as u64 {
            Ok(v as Element)
        } else {
            Err(GaloisError::EntryOutOfRange { value: v, q: self.q })
        }
    }

    #[inline]
    pub fn add(&self, a: Element, b: Element) -> Element {
        ((a as u64 + b as u64) % self.q as u64) as Element
    }

    #[inline]
    pub fn sub(&self, a: Element, b: Element) -> Element {
        ((a as u64 + self.q as u64 - b as u64) % self.q as u64) as Element
    }

    #[inline]
    pub fn neg(&self, a: Element) -> Element {
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    #[inline]
    pub fn mul(&self, a: Element, b: Element) -> Element {
        ((a as u64 * b as u64) % self.q as u64) as Element
    }

    pub fn pow(&self, mut base: Element, mut exp: u64) -> Element {
        let mut acc: Element = 1 % self.q;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via Fermat's little theorem.
    pub fn inv(&self, a: Element) -> Result<Element, GaloisError> {
        if a % self.q == 0 {
            return Err(GaloisError::DivideByZero);
        }
        Ok(self.pow(a, self.q as u64 - 2))
    }

    /// Number of elements, `q^exp`, or `None` on overflow.
    pub fn count(&self, exp: usize) -> Option<u64> {
        (self.q as u64).checked_pow(u32::try_from(exp).ok()?)
    }
}

/// Dense row-major matrix over a prime field.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FieldMatrix {
    field: Field,
    rows: usize,
    cols: usize,
    data: Vec<Element>,
}

impl FieldMatrix {
    pub fn zeros(field: Field, rows: usize, cols: usize) -> Self {
        FieldMatrix {
            field,
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(field: Field, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m.data[i * n + i] = 1 % field.q;
        }
        m
    }

    /// Builds a matrix from rows of canonical residues; `cols` is needed to
    /// shape matrices with no rows.
    pub fn from_rows<R: AsRef<[u64]>>(
        field: Field,
        cols: usize,
        rows: &[R],
    ) -> Result<Self, GaloisError> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(GaloisError::ShapeMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            for &v in row {
                data.push(field.element(v)?);
            }
        }
        Ok(FieldMatrix {
            field,
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Like [`from_rows`](Self::from_rows) but reduces arbitrary integers.
    pub fn from_ints<R: AsRef<[i64]>>(
        field: Field,
        cols: usize,
        rows: &[R],
    ) -> Result<Self, GaloisError> {
        let reduced: Vec<Vec<u64>> = rows
            .iter()
            .map(|r| r.as_ref().iter().map(|&v| field.reduce(v) as u64).collect())
            .collect();
        Self::from_rows(field, cols, &reduced)
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Element {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Element) {
        self.data[r * self.cols + c] = v % self.field.q;
    }

    pub fn row(&self, r: usize) -> &[Element] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<u64>> {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|&v| v as u64).collect())
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    fn scale_row(&mut self, r: usize, s: Element) {
        let f = self.field;
        for v in &mut self.data[r * self.cols..(r + 1) * self.cols] {
            *v = f.mul(*v, s);
        }
    }

    /// row[dst] -= factor * row[src]
    fn sub_row_multiple(&mut self, dst: usize, src: usize, factor: Element) {
        if factor == 0 {
            return;
        }
        let f = self.field;
        for c in 0..self.cols {
            let s = f.mul(self.data[src * self.cols + c], factor);
            let d = &mut self.data[dst * self.cols + c];
            *d = f.sub(*d, s);
        }
    }

    /// Reduces `self` in place to reduced row echelon form over the given
    /// column order and returns the pivot columns.
    fn rref_over(&mut self, order: &[usize], first_row: usize) -> Vec<usize> {
        let f = self.field;
        let mut pivots = Vec::new();
        let mut next = first_row;
        for &c in order {
            if next == self.rows {
                break;
            }
            let Some(p) = (next..self.rows).find(|&r| self.get(r, c) != 0) else {
                continue;
            };
            self.swap_rows(next, p);
            let inv = f.inv(self.get(next, c)).expect("pivot is nonzero");
            self.scale_row(next, inv);
            for r in first_row..self.rows {
                if r != next {
                    let factor = self.get(r, c);
                    self.sub_row_multiple(r, next, factor);
                }
            }
            pivots.push(c);
            next += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        let order: Vec<usize> = (0..self.cols).collect();
        m.rref_over(&order, 0).len()
    }

    pub fn determinant(&self) -> Result<Element, GaloisError> {
        if !self.is_square() {
            return Err(GaloisError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let f = self.field;
        let n = self.rows;
        let mut m = self.clone();
        let mut det: Element = 1 % f.q;
        for c in 0..n {
            let Some(p) = (c..n).find(|&r| m.get(r, c) != 0) else {
                return Ok(0);
            };
            if p != c {
                m.swap_rows(p, c);
                det = f.neg(det);
            }
            let pivot = m.get(c, c);
            det = f.mul(det, pivot);
            let inv = f.inv(pivot)?;
            for r in c + 1..n {
                let factor = f.mul(m.get(r, c), inv);
                m.sub_row_multiple(r, c, factor);
            }
        }
        Ok(det)
    }

    /// Row-reduces so that the `target_cols` block becomes the identity
    /// stacked over zeros.
    ///
    /// Pivots are taken on the target columns in the given order, choosing
    /// the first nonzero row from the top. The remaining rows (zero on the
    /// target block) are then brought to reduced row echelon form among
    /// themselves, left to right; the target rows are not touched by that
    /// second pass. The row space is preserved.
    pub fn pivot_reduce(&self, target_cols: &[usize]) -> Result<FieldMatrix, GaloisError> {
        for &c in target_cols {
            if c >= self.cols {
                return Err(GaloisError::IndexOutOfRange {
                    index: c,
                    bound: self.cols,
                });
            }
        }
        let mut m = self.clone();
        let pivots = m.rref_over(target_cols, 0);
        if pivots.len() != target_cols.len() || pivots != target_cols {
            return Err(GaloisError::RankDeficientTarget(target_cols.to_vec()));
        }
        let t = target_cols.len();
        let rest: Vec<usize> = (0..self.cols).filter(|c| !target_cols.contains(c)).collect();
        m.rref_over(&rest, t);
        Ok(m)
    }

    pub fn mul(&self, other: &FieldMatrix) -> Result<FieldMatrix, GaloisError> {
        self.same_field(other)?;
        if self.cols != other.rows {
            return Err(GaloisError::ShapeMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let f = self.field;
        let q = f.q as u64;
        let mut out = FieldMatrix::zeros(f, self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = 0u64;
                for k in 0..self.cols {
                    acc = (acc + self.get(i, k) as u64 * other.get(k, j) as u64) % q;
                }
                out.data[i * other.cols + j] = acc as Element;
            }
        }
        Ok(out)
    }

    /// Row vector times matrix.
    pub fn left_apply(&self, x: &[Element]) -> Result<Vec<Element>, GaloisError> {
        if x.len() != self.rows {
            return Err(GaloisError::ShapeMismatch(format!(
                "vector of length {} against {} rows",
                x.len(),
                self.rows
            )));
        }
        let q = self.field.q as u64;
        let mut out = vec![0u64; self.cols];
        for (r, &xv) in x.iter().enumerate() {
            if xv == 0 {
                continue;
            }
            for (c, acc) in out.iter_mut().enumerate() {
                *acc = (*acc + xv as u64 * self.get(r, c) as u64) % q;
            }
        }
        Ok(out.into_iter().map(|v| v as Element).collect())
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Result<FieldMatrix, GaloisError> {
        for &r in rows {
            if r >= self.rows {
                return Err(GaloisError::IndexOutOfRange {
                    index: r,
                    bound: self.rows,
                });
            }
        }
        for &c in cols {
            if c >= self.cols {
                return Err(GaloisError::IndexOutOfRange {
                    index: c,
                    bound: self.cols,
                });
            }
        }
        let mut out = FieldMatrix::zeros(self.field, rows.len(), cols.len());
        for (i, &r) in rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                out.data[i * cols.len() + j] = self.get(r, c);
            }
        }
        Ok(out)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<FieldMatrix, GaloisError> {
        let cols: Vec<usize> = (0..self.cols).collect();
        self.submatrix(rows, &cols)
    }

    pub fn select_cols(&self, cols: &[usize]) -> Result<FieldMatrix, GaloisError> {
        let rows: Vec<usize> = (0..self.rows).collect();
        self.submatrix(&rows, cols)
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hstack(&self, other: &FieldMatrix) -> Result<FieldMatrix, GaloisError> {
        self.same_field(other)?;
        if self.rows != other.rows {
            return Err(GaloisError::ShapeMismatch(format!(
                "hstack of {} and {} rows",
                self.rows, other.rows
            )));
        }
        let cols = self.cols + other.cols;
        let mut out = FieldMatrix::zeros(self.field, self.rows, cols);
        for r in 0..self.rows {
            out.data[r * cols..r * cols + self.cols].copy_from_slice(self.row(r));
            out.data[r * cols + self.cols..(r + 1) * cols].copy_from_slice(other.row(r));
        }
        Ok(out)
    }

    /// Vertical concatenation.
    pub fn vstack(&self, other: &FieldMatrix) -> Result<FieldMatrix, GaloisError> {
        self.same_field(other)?;
        if self.cols != other.cols {
            return Err(GaloisError::ShapeMismatch(format!(
                "vstack of {} and {} columns",
                self.cols, other.cols
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(FieldMatrix {
            field: self.field,
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    /// True iff both matrices have the same row space.
    pub fn same_row_space(&self, other: &FieldMatrix) -> Result<bool, GaloisError> {
        let r = self.rank();
        Ok(r == other.rank() && self.vstack(other)?.rank() == r)
    }

    fn same_field(&self, other: &FieldMatrix) -> Result<(), GaloisError> {
        if self.field != other.field {
            Err(GaloisError::FieldMismatch(self.field.q, other.field.q))
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for FieldMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = (self.field.q - 1).to_string().len();
        for r in 0..self.rows {
            write!(f, "[")?;
            for (c, v) in self.row(r).iter().enumerate() {
                if c > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{v:>width$}")?;
            }
            writeln!(f, "]")?;
        }
        Ok(())
    }
}
