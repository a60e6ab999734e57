//! JSON file formats shared by the command-line tool and the browser demo.
//!
//! Users and nodes are 1-based in every file. Node labels are kept as
//! written; matrix rows follow ascending label order. Matrices are lists of
//! rows, payload, key and share blocks are lists of columns.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::Payload;
use crate::galois::{Element, Field, FieldMatrix, GaloisError};
use crate::matching::{MatchPlan, MatchingError};
use crate::synthesis::{DmussScheme, Provenance, SynthesisError};
use crate::topology::{AccessStructure, Rate, RateTuple, TopologyError, Violation};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Galois(#[from] GaloisError),
    #[error(transparent)]
    Matching(#[from] MatchingError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
}

fn invalid(msg: impl Into<String>) -> FormatError {
    FormatError::Invalid(msg.into())
}

/// A rate as written: an integer or a `"p/q"` string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateValue {
    Int(u64),
    Text(String),
}

impl RateValue {
    pub fn parse(&self) -> Result<Rate, FormatError> {
        match self {
            RateValue::Int(v) => Ok(Rate::from_integer(*v)),
            RateValue::Text(t) => {
                let t = t.trim();
                let (num, den) = match t.split_once('/') {
                    Some((n, d)) => (n.trim(), d.trim()),
                    None => (t, "1"),
                };
                let num: u64 = num.parse().map_err(|_| invalid(format!("bad rate {t:?}")))?;
                let den: u64 = den.parse().map_err(|_| invalid(format!("bad rate {t:?}")))?;
                if den == 0 {
                    return Err(invalid(format!("rate {t:?} has a zero denominator")));
                }
                Ok(Rate::new(num, den))
            }
        }
    }

    pub fn from_rate(r: Rate) -> Self {
        if r.is_integer() {
            RateValue::Int(r.to_integer())
        } else {
            RateValue::Text(format!("{}/{}", r.numer(), r.denom()))
        }
    }
}

fn label_sets(a: &AccessStructure) -> Vec<Vec<u64>> {
    a.sets()
        .iter()
        .map(|s| s.iter().map(|&n| a.labels()[n]).collect())
        .collect()
}

fn field_of(q: u64) -> Result<Field, FormatError> {
    let q = u32::try_from(q).map_err(|_| invalid(format!("field size {q} is too large")))?;
    Ok(Field::new(q)?)
}

fn matrix_from_columns(field: Field, rows: usize, columns: &[Vec<u64>]) -> Result<FieldMatrix, FormatError> {
    let mut m = FieldMatrix::zeros(field, rows, columns.len());
    for (l, col) in columns.iter().enumerate() {
        if col.len() != rows {
            return Err(invalid(format!(
                "column {} has {} entries, expected {rows}",
                l + 1,
                col.len()
            )));
        }
        for (r, &v) in col.iter().enumerate() {
            m.set(r, l, field.element(v)?);
        }
    }
    Ok(m)
}

fn matrix_columns(m: &FieldMatrix) -> Vec<Vec<u64>> {
    (0..m.cols())
        .map(|c| (0..m.rows()).map(|r| u64::from(m.get(r, c))).collect())
        .collect()
}

fn check_len(what: &str, declared: usize, actual: usize) -> Result<(), FormatError> {
    if declared != actual {
        return Err(invalid(format!("{what} declares L = {declared} but has {actual} columns")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyFile {
    pub access_sets: Vec<Vec<u64>>,
    pub rates: Vec<RateValue>,
}

impl TopologyFile {
    pub fn new(a: &AccessStructure, r: &RateTuple) -> Self {
        TopologyFile {
            access_sets: label_sets(a),
            rates: r.rates().iter().map(|&x| RateValue::from_rate(x)).collect(),
        }
    }

    pub fn parse(&self) -> Result<(AccessStructure, RateTuple), FormatError> {
        let a = AccessStructure::new(&self.access_sets)?;
        let rates = self.rates.iter().map(RateValue::parse).collect::<Result<Vec<_>, _>>()?;
        let r = RateTuple::new(rates);
        r.check_len(&a)?;
        Ok((a, r))
    }

    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeFile {
    pub q: u64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub rates: Vec<usize>,
    pub access_sets: Vec<Vec<u64>>,
    /// one `N x R_k` matrix per user
    pub decoding: Vec<Vec<Vec<u64>>>,
    pub encoding: Vec<Vec<u64>>,
    pub key_count: usize,
    pub seed: u64,
    #[serde(default)]
    pub attempts: usize,
    /// `match_plan[k][i]` lists the node labels of `C_i^k`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub match_plan: Option<Vec<Vec<Vec<u64>>>>,
}

impl SchemeFile {
    pub fn new(s: &DmussScheme) -> Self {
        let a = s.access();
        let match_plan = s.provenance.match_plan.as_ref().map(|p| {
            p.sets()
                .iter()
                .map(|per_user| {
                    per_user
                        .iter()
                        .map(|c| c.iter().map(|&n| a.labels()[n]).collect())
                        .collect()
                })
                .collect()
        });
        SchemeFile {
            q: u64::from(s.field().q()),
            n: s.node_count(),
            k: s.user_count(),
            rates: s.rates().to_vec(),
            access_sets: label_sets(a),
            decoding: s.decodings().iter().map(FieldMatrix::to_rows).collect(),
            encoding: s.encoding().to_rows(),
            key_count: s.key_count(),
            seed: s.provenance.seed,
            attempts: s.provenance.attempts,
            match_plan,
        }
    }

    /// Rebuilds the scheme after shape checks. Whether it works is a
    /// separate question for the verifiers.
    pub fn parse(&self) -> Result<DmussScheme, FormatError> {
        let field = field_of(self.q)?;
        let a = AccessStructure::new(&self.access_sets)?;
        if a.node_count() != self.n {
            return Err(invalid(format!(
                "N = {} but the access sets name {} nodes",
                self.n,
                a.node_count()
            )));
        }
        if a.user_count() != self.k {
            return Err(invalid(format!(
                "K = {} but there are {} access sets",
                self.k,
                a.user_count()
            )));
        }
        if self.rates.len() != self.k || self.decoding.len() != self.k {
            return Err(invalid(format!(
                "K = {} but there are {} rates and {} decoding matrices",
                self.k,
                self.rates.len(),
                self.decoding.len()
            )));
        }
        let decoding = self
            .decoding
            .iter()
            .zip(&self.rates)
            .enumerate()
            .map(|(k, (rows, &r))| {
                if rows.len() != self.n {
                    return Err(invalid(format!(
                        "decoding matrix {} has {} rows, expected N = {}",
                        k + 1,
                        rows.len(),
                        self.n
                    )));
                }
                Ok(FieldMatrix::from_rows(field, r, rows)?)
            })
            .collect::<Result<Vec<_>, FormatError>>()?;
        if self.encoding.len() != self.n {
            return Err(invalid(format!(
                "encoding has {} rows, expected N = {}",
                self.encoding.len(),
                self.n
            )));
        }
        let encoding = FieldMatrix::from_rows(field, self.n, &self.encoding)?;
        let match_plan = match &self.match_plan {
            None => None,
            Some(raw) => Some(self.parse_plan(&a, raw)?),
        };
        let s = DmussScheme::new(
            field,
            a,
            self.rates.clone(),
            decoding,
            encoding,
            Provenance {
                seed: self.seed,
                match_plan,
                attempts: self.attempts,
            },
        )?;
        if s.key_count() != self.key_count {
            return Err(invalid(format!(
                "key_count = {} but N - M = {}",
                self.key_count,
                s.key_count()
            )));
        }
        Ok(s)
    }

    fn parse_plan(&self, a: &AccessStructure, raw: &[Vec<Vec<u64>>]) -> Result<MatchPlan, FormatError> {
        let node_of = |label: u64| {
            a.labels()
                .binary_search(&label)
                .map_err(|_| invalid(format!("match plan names unknown node {label}")))
        };
        let sets = raw
            .iter()
            .map(|per_user| {
                per_user
                    .iter()
                    .map(|c| c.iter().map(|&l| node_of(l)).collect::<Result<BTreeSet<_>, _>>())
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(MatchPlan::from_sets(a, &self.rates, sets)?)
    }

    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayloadFile {
    pub q: u64,
    pub rates: Vec<usize>,
    #[serde(rename = "L")]
    pub len: usize,
    /// each column stacks `W_1..W_K`
    pub columns: Vec<Vec<u64>>,
}

impl PayloadFile {
    pub fn new(field: Field, rates: &[usize], p: &Payload) -> Self {
        let columns = (0..p.len())
            .map(|l| p.column(l).into_iter().map(u64::from).collect())
            .collect();
        PayloadFile {
            q: u64::from(field.q()),
            rates: rates.to_vec(),
            len: p.len(),
            columns,
        }
    }

    pub fn parse(&self) -> Result<(Field, Vec<usize>, Payload), FormatError> {
        let field = field_of(self.q)?;
        check_len("payload", self.len, self.columns.len())?;
        let m = self.rates.iter().sum();
        let stacked = matrix_from_columns(field, m, &self.columns)?;
        let p = Payload::from_stacked(&stacked, &self.rates).map_err(|e| invalid(e.to_string()))?;
        Ok((field, self.rates.clone(), p))
    }

    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeysFile {
    pub q: u64,
    pub key_count: usize,
    #[serde(rename = "L")]
    pub len: usize,
    pub columns: Vec<Vec<u64>>,
}

impl KeysFile {
    pub fn new(keys: &FieldMatrix) -> Self {
        KeysFile {
            q: u64::from(keys.field().q()),
            key_count: keys.rows(),
            len: keys.cols(),
            columns: matrix_columns(keys),
        }
    }

    pub fn parse(&self) -> Result<FieldMatrix, FormatError> {
        let field = field_of(self.q)?;
        check_len("key file", self.len, self.columns.len())?;
        matrix_from_columns(field, self.key_count, &self.columns)
    }

    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Shares for all nodes, or for the listed node labels only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SharesFile {
    pub q: u64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub len: usize,
    pub columns: Vec<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<u64>>,
}

impl SharesFile {
    pub fn new(shares: &FieldMatrix) -> Self {
        SharesFile {
            q: u64::from(shares.field().q()),
            n: shares.rows(),
            len: shares.cols(),
            columns: matrix_columns(shares),
            nodes: None,
        }
    }

    /// Only the rows of the given node labels, ascending.
    pub fn restricted(shares: &FieldMatrix, a: &AccessStructure, nodes: &BTreeSet<usize>) -> Self {
        let rows: Vec<usize> = nodes.iter().copied().collect();
        let sub = shares.select_rows(&rows).expect("nodes in range");
        SharesFile {
            nodes: Some(rows.iter().map(|&n| a.labels()[n]).collect()),
            ..SharesFile::new(&sub)
        }
        .with_n(shares.rows())
    }

    fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    /// Returns the share rows and the 0-based nodes they belong to.
    pub fn parse(&self, a: &AccessStructure) -> Result<(FieldMatrix, Vec<usize>), FormatError> {
        let field = field_of(self.q)?;
        check_len("share file", self.len, self.columns.len())?;
        if self.n != a.node_count() {
            return Err(invalid(format!(
                "share file is for N = {}, scheme has N = {}",
                self.n,
                a.node_count()
            )));
        }
        let nodes = match &self.nodes {
            None => (0..self.n).collect::<Vec<_>>(),
            Some(labels) => {
                let nodes = labels
                    .iter()
                    .map(|l| {
                        a.labels()
                            .binary_search(l)
                            .map_err(|_| invalid(format!("share file names unknown node {l}")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if nodes.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(invalid("share nodes must be listed in ascending order"));
                }
                nodes
            }
        };
        let m = matrix_from_columns(field, nodes.len(), &self.columns)?;
        Ok((m, nodes))
    }

    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// A recovered message block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageFile {
    pub q: u64,
    pub user: usize,
    #[serde(rename = "R")]
    pub rate: usize,
    #[serde(rename = "L")]
    pub len: usize,
    pub columns: Vec<Vec<u64>>,
}

impl MessageFile {
    /// `k` is 0-based.
    pub fn new(k: usize, block: &FieldMatrix) -> Self {
        MessageFile {
            q: u64::from(block.field().q()),
            user: k + 1,
            rate: block.rows(),
            len: block.cols(),
            columns: matrix_columns(block),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolationJson {
    pub constraint: String,
    pub k: Option<usize>,
    pub s: Vec<usize>,
    pub lhs: RateValue,
    pub rhs: u64,
    pub description: String,
}

impl From<&Violation> for ViolationJson {
    fn from(v: &Violation) -> Self {
        ViolationJson {
            constraint: v.constraint.name().to_string(),
            k: v.k.map(|k| k + 1),
            s: v.s.iter().map(|i| i + 1).collect(),
            lhs: RateValue::from_rate(v.lhs),
            rhs: v.rhs,
            description: v.to_string(),
        }
    }
}

/// Shares of one column as elements, for display.
pub fn share_vector(shares: &FieldMatrix, l: usize) -> Vec<Element> {
    (0..shares.rows()).map(|r| shares.get(r, l)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::topology::Constraint;

    #[test]
    fn topology_roundtrip_sorts_sets() {
        let t = TopologyFile::from_json(r#"{"access_sets": [[4,2,1],[2,3,6],[1,4,5],[6,5,3]], "rates": [1,"1",1,"2/2"]}"#)
            .unwrap();
        let (a, r) = t.parse().unwrap();
        assert_eq!(a, fixtures::example_access());
        assert_eq!(r, fixtures::example_rates());
        let back = TopologyFile::new(&a, &r);
        assert_eq!(back.access_sets[0], vec![1, 2, 4]);
        assert_eq!(back.access_sets[3], vec![3, 5, 6]);
        assert_eq!(back.rates, vec![RateValue::Int(1); 4]);
    }

    #[test]
    fn fractional_rates() {
        let t = TopologyFile::from_json(r#"{"access_sets": [[1,2],[2,3]], "rates": ["3/2", 0]}"#).unwrap();
        let (_, r) = t.parse().unwrap();
        assert_eq!(r.get(0), Rate::new(3, 2));
        assert_eq!(RateValue::from_rate(r.get(0)), RateValue::Text("3/2".into()));
    }

    #[test]
    fn topology_rejections() {
        for bad in [
            r#"{"access_sets": [[1,2]], "rates": ["1/0"]}"#,
            r#"{"access_sets": [[1,2]], "rates": [-1]}"#,
            r#"{"access_sets": [[0,2]], "rates": [1]}"#,
            r#"{"access_sets": [[1,2]], "rates": [1, 1]}"#,
            r#"{"access_sets": [], "rates": []}"#,
            r#"{"access_sets": [[1,2]], "rates": ["x"]}"#,
            r#"{"access_sets": [[1,2]]}"#,
            r#"[1,2]"#,
        ] {
            let parsed = TopologyFile::from_json(bad).and_then(|t| t.parse());
            assert!(parsed.is_err(), "{bad} should be rejected");
        }
    }

    #[test]
    fn scheme_roundtrip() {
        let s = fixtures::example_gf2_scheme();
        let file = SchemeFile::new(&s);
        assert_eq!(file.decoding[0], vec![vec![1], vec![1], vec![0], vec![0], vec![0], vec![0]]);
        let text = serde_json::to_string(&file).unwrap();
        let back = SchemeFile::from_json(&text).unwrap().parse().unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn scheme_with_sparse_labels() {
        let a = AccessStructure::new(&[[10u64, 30], [20, 30]]).unwrap();
        let s = crate::synthesis::synthesize(&a, &RateTuple::integral(&[1, 1]), &Default::default()).unwrap();
        let file = SchemeFile::new(&s);
        assert_eq!(file.access_sets, vec![vec![10, 30], vec![20, 30]]);
        assert_eq!(file.parse().unwrap(), s);
    }

    #[test]
    fn scheme_shape_errors() {
        let good = SchemeFile::new(&fixtures::example_gf2_scheme());
        let mut wrong_entry = good.clone();
        wrong_entry.encoding[0][0] = 2;
        let mut wrong_n = good.clone();
        wrong_n.n = 5;
        let mut wrong_keys = good.clone();
        wrong_keys.key_count = 3;
        let mut short_decoding = good.clone();
        short_decoding.decoding[1].pop();
        let mut not_prime = good.clone();
        not_prime.q = 4;
        for bad in [wrong_entry, wrong_n, wrong_keys, short_decoding, not_prime] {
            assert!(bad.parse().is_err());
        }
    }

    #[test]
    fn payload_keys_and_shares() {
        let s = fixtures::example_gf2_scheme();
        let p = PayloadFile::from_json(r#"{"q":2,"rates":[1,1,1,1],"L":1,"columns":[[1,0,1,1]]}"#).unwrap();
        let (field, rates, payload) = p.parse().unwrap();
        assert_eq!(PayloadFile::new(field, &rates, &payload), p);
        let keys = KeysFile::from_json(r#"{"q":2,"key_count":2,"L":1,"columns":[[0,1]]}"#)
            .unwrap()
            .parse()
            .unwrap();
        let shares = crate::codec::place(&s, &payload, crate::codec::KeySource::Explicit(&keys)).unwrap();
        let file = SharesFile::new(&shares);
        assert_eq!(file.columns, vec![vec![1, 0, 0, 0, 1, 0]]);

        let partial = SharesFile::restricted(&shares, s.access(), s.access().set(0));
        assert_eq!(partial.nodes, Some(vec![1, 2, 4]));
        let (rows, nodes) = partial.parse(s.access()).unwrap();
        assert_eq!(nodes, vec![0, 1, 3]);
        assert_eq!(rows.rows(), 3);

        assert!(PayloadFile::from_json(r#"{"q":2,"rates":[1,1,1,1],"L":2,"columns":[[1,0,1,1]]}"#)
            .unwrap()
            .parse()
            .is_err());
        assert!(PayloadFile::from_json(r#"{"q":2,"rates":[1,1,1,1],"L":1,"columns":[[1,0,1]]}"#)
            .unwrap()
            .parse()
            .is_err());
    }

    #[test]
    fn violation_is_one_based() {
        let v = Violation {
            constraint: Constraint::PerfectPrivacy,
            k: Some(2),
            s: vec![0],
            lhs: Rate::from_integer(2),
            rhs: 1,
        };
        let j = serde_json::to_value(ViolationJson::from(&v)).unwrap();
        assert_eq!(j["k"], 3);
        assert_eq!(j["s"], serde_json::json!([1]));
        assert_eq!(j["lhs"], 2);
        assert_eq!(j["constraint"], "perfect_privacy");
    }
}
