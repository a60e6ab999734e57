//! Browser bindings for the demo page in `www/`.
//!
//! Every function takes and returns JSON text so the page needs no glue
//! beyond `JSON.parse`. Failures come back as `{"error": "..."}`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

use dmuss::codec::{self, KeySource, Payload};
use dmuss::formats::{share_vector, SchemeFile, TopologyFile, ViolationJson};
use dmuss::verification::{certify_ranks, entropy_oracle};
use dmuss::{FieldMatrix, SynthesisError, SynthesisOptions, Verdict};

/// Largest `q^N` the page will enumerate; keeps the tab responsive.
pub const PAGE_MAX_STATES: u64 = 200_000;

fn finish(result: Result<Value, String>) -> String {
    result.unwrap_or_else(|e| json!({ "error": e })).to_string()
}

fn verdict_json(v: &Verdict) -> Value {
    match v {
        Verdict::Feasible => json!({ "feasible": true }),
        Verdict::Infeasible(v) => json!({ "feasible": false, "violation": ViolationJson::from(v) }),
    }
}

/// `privacy` is `"perfect"` or `"weak"`.
#[wasm_bindgen]
pub fn check_capacity(topology_json: &str, privacy: &str) -> String {
    finish((|| {
        let (a, r) = TopologyFile::from_json(topology_json)
            .and_then(|t| t.parse())
            .map_err(|e| e.to_string())?;
        let verdict = match privacy {
            "perfect" => dmuss::check_perfect_capacity(&a, &r, dmuss::CheckMethod::Matching),
            "weak" => dmuss::check_weak_capacity(&a, &r),
            other => return Err(format!("unknown privacy condition {other:?}")),
        }
        .map_err(|e| e.to_string())?;
        Ok(verdict_json(&verdict))
    })())
}

/// Synthesizes at the default field size and runs both verifiers.
#[wasm_bindgen]
pub fn synthesize_and_verify(topology_json: &str, seed: u32) -> String {
    finish((|| {
        let (a, r) = TopologyFile::from_json(topology_json)
            .and_then(|t| t.parse())
            .map_err(|e| e.to_string())?;
        let opts = SynthesisOptions {
            seed: u64::from(seed),
            ..SynthesisOptions::default()
        };
        let s = match dmuss::synthesize(&a, &r, &opts) {
            Ok(s) => s,
            Err(SynthesisError::CapacityViolation(v)) => {
                return Ok(json!({ "feasible": false, "violation": ViolationJson::from(&v) }))
            }
            Err(e) => return Err(e.to_string()),
        };
        let ranks = certify_ranks(&s);
        let entropy = match entropy_oracle(&s, PAGE_MAX_STATES) {
            Ok(rep) => json!(rep),
            Err(e) => json!({ "skipped": e.to_string() }),
        };
        Ok(json!({
            "feasible": true,
            "scheme": SchemeFile::new(&s),
            "ranks": ranks,
            "entropy": entropy,
        }))
    })())
}

/// Encodes one column of messages (`[W_1.., W_2.., ...]`) with keys drawn
/// from `seed`, then lets every user decode from its own access set.
#[wasm_bindgen]
pub fn roundtrip(scheme_json: &str, messages_json: &str, seed: u32) -> String {
    finish((|| {
        let s = SchemeFile::from_json(scheme_json)
            .and_then(|f| f.parse())
            .map_err(|e| e.to_string())?;
        let messages: Vec<u64> = serde_json::from_str(messages_json).map_err(|e| e.to_string())?;
        let rows: Vec<[u64; 1]> = messages.iter().map(|&m| [m]).collect();
        let stacked = FieldMatrix::from_rows(s.field(), 1, &rows).map_err(|e| e.to_string())?;
        let payload = Payload::from_stacked(&stacked, s.rates()).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(u64::from(seed));
        let shares = codec::place(&s, &payload, KeySource::Random(&mut rng)).map_err(|e| e.to_string())?;
        let users = (0..s.user_count())
            .map(|k| {
                let view = codec::access_rows(&s, k, &shares)?;
                let got = codec::retrieve(&s, k, &view)?;
                let decoded: Vec<u32> = (0..got.rows()).map(|r| got.get(r, 0)).collect();
                Ok(json!({
                    "user": k + 1,
                    "reads": s.access().set(k).iter().map(|&n| s.access().labels()[n]).collect::<Vec<_>>(),
                    "decoded": decoded,
                    "correct": &got == payload.block(k),
                }))
            })
            .collect::<Result<Vec<_>, codec::CodecError>>()
            .map_err(|e| e.to_string())?;
        Ok(json!({
            "shares": share_vector(&shares, 0),
            "users": users,
        }))
    })())
}

/// The four-user example as a topology document, to seed the page.
#[wasm_bindgen]
pub fn example_topology() -> String {
    let t = TopologyFile::new(&dmuss::fixtures::example_access(), &dmuss::fixtures::example_rates());
    serde_json::to_string(&t).expect("serializable")
}
