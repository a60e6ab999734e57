//! Worked examples used by the demo, the test suites and the browser page.
//!
//! The four-user, six-node structure `A_1={1,2,4}, A_2={2,3,6},
//! A_3={1,4,5}, A_4={3,5,6}` with unit rates, a GF(2) scheme for it, and a
//! three-node threshold scheme over GF(5).

use std::collections::{BTreeMap, BTreeSet};

use crate::galois::{Field, FieldMatrix};
use crate::matching::MatchPlan;
use crate::synthesis::{DmussScheme, Provenance, VarId};
use crate::topology::{AccessStructure, RateTuple};

pub const EXAMPLE_SETS: [[u64; 3]; 4] = [[1, 2, 4], [2, 3, 6], [1, 4, 5], [3, 5, 6]];
pub const EXAMPLE_RATES: [u64; 4] = [1, 1, 1, 1];

pub fn example_access() -> AccessStructure {
    AccessStructure::new(&EXAMPLE_SETS).expect("valid example")
}

pub fn example_rates() -> RateTuple {
    RateTuple::integral(&EXAMPLE_RATES)
}

/// `C_i^k` for the example, 0-based: `sets[k][i]`.
pub fn example_plan() -> MatchPlan {
    // 1-based (k, i, node)
    let entries = [
        (1, 2, 3),
        (1, 3, 5),
        (1, 4, 6),
        (2, 1, 1),
        (2, 3, 4),
        (2, 4, 5),
        (3, 1, 2),
        (3, 2, 3),
        (3, 4, 6),
        (4, 1, 1),
        (4, 2, 2),
        (4, 3, 4),
    ];
    let mut sets = vec![vec![BTreeSet::new(); 4]; 4];
    for (k, i, n) in entries {
        sets[k - 1][i - 1].insert(n - 1);
    }
    MatchPlan::from_sets(&example_access(), &[1, 1, 1, 1], sets).expect("valid example plan")
}

/// Indeterminate values of the GF(2) solution (all others zero).
pub fn example_gf2_assignment() -> BTreeMap<VarId, u32> {
    // (user, node), 1-based
    [(1, 1), (1, 2), (2, 2), (2, 3), (3, 4), (3, 5), (4, 5), (4, 6)]
        .into_iter()
        .map(|(k, n)| (VarId::new(k - 1, n - 1, 0), 1))
        .collect()
}

/// Decoding columns `V_{W_1}..V_{W_4}` of the GF(2) solution.
pub const EXAMPLE_GF2_DECODING: [[u64; 6]; 4] = [
    [1, 1, 0, 0, 0, 0],
    [0, 1, 1, 0, 0, 0],
    [0, 0, 0, 1, 1, 0],
    [0, 0, 0, 0, 1, 1],
];

/// Share block after elimination: rows are `W_1..W_4, K_1, K_2`, columns
/// `Y_1..Y_6`.
pub const EXAMPLE_GF2_ENCODING: [[u64; 6]; 6] = [
    [1, 0, 0, 0, 0, 0],
    [0, 0, 1, 0, 0, 0],
    [0, 0, 0, 1, 0, 0],
    [0, 0, 0, 0, 0, 1],
    [1, 1, 1, 0, 0, 0],
    [0, 0, 0, 1, 1, 1],
];

/// The full eliminated generator `[message block | share block]`.
pub fn example_gf2_reduced_generator() -> FieldMatrix {
    let f = Field::new(2).unwrap();
    let rows: Vec<Vec<u64>> = EXAMPLE_GF2_ENCODING
        .iter()
        .enumerate()
        .map(|(r, enc)| {
            let mut row: Vec<u64> = (0..4).map(|c| u64::from(r == c)).collect();
            row.extend_from_slice(enc);
            row
        })
        .collect();
    FieldMatrix::from_rows(f, 10, &rows).unwrap()
}

pub fn example_gf2_scheme() -> DmussScheme {
    let f = Field::new(2).unwrap();
    let decoding = EXAMPLE_GF2_DECODING
        .iter()
        .map(|col| {
            let rows: Vec<[u64; 1]> = col.iter().map(|&v| [v]).collect();
            FieldMatrix::from_rows(f, 1, &rows).unwrap()
        })
        .collect();
    let encoding = FieldMatrix::from_rows(f, 6, &EXAMPLE_GF2_ENCODING).unwrap();
    DmussScheme::new(
        f,
        example_access(),
        vec![1, 1, 1, 1],
        decoding,
        encoding,
        Provenance {
            seed: 0,
            match_plan: Some(example_plan()),
            attempts: 0,
        },
    )
    .expect("consistent example scheme")
}

/// Threshold scheme generator `[V_W | V_Y1 V_Y2 V_Y3]` over GF(5), shares
/// are evaluations at 1, 2, 3.
pub fn shamir_generator() -> FieldMatrix {
    FieldMatrix::from_rows(
        Field::new(5).unwrap(),
        4,
        &[[1, 1, 1, 1], [0, 1, 2, 3], [0, 1, 4, 4]],
    )
    .unwrap()
}

/// The same code with the share block eliminated to the identity.
pub fn shamir_decoding_form() -> FieldMatrix {
    FieldMatrix::from_rows(
        Field::new(5).unwrap(),
        4,
        &[[3, 1, 0, 0], [2, 0, 1, 0], [1, 0, 0, 1]],
    )
    .unwrap()
}
