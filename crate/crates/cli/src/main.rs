//! `dmuss`: capacity checks, scheme synthesis, verification, encoding and
//! decoding from the command line.
//!
//! Exit codes: 0 success, 1 usage/IO/parse/dimension errors, 2 infeasible
//! rates or a failing verification. Machine output is JSON on stdout,
//! diagnostics go to stderr.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use dmuss::codec::{self, KeySource};
use dmuss::formats::{
    FormatError, KeysFile, MessageFile, PayloadFile, SchemeFile, SharesFile, TopologyFile, ViolationJson,
};
use dmuss::synthesis::{self, default_field, SynthesisError};
use dmuss::verification::{self, VerificationReport, DEFAULT_MAX_STATES};
use dmuss::{fixtures, matching, CheckMethod, SynthesisOptions, Verdict};

/// Seeds tried by `synth` when `--q` is pinned at or below the user count.
const SEED_RETRIES: u64 = 16;

#[derive(Parser)]
#[command(name = "dmuss", version, about = "Distributed multi-user secret sharing over prime fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether a rate tuple is achievable.
    Check {
        /// Topology file: {"access_sets": [[1,2,4],...], "rates": [1,...]}
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Privacy::Perfect)]
        privacy: Privacy,
        #[arg(long, value_enum, default_value_t = Method::Matching)]
        method: Method,
    },
    /// Build a linear scheme for an achievable integral rate tuple.
    Synth {
        input: PathBuf,
        /// Field size, a prime. Defaults to the smallest prime above K.
        #[arg(long)]
        q: Option<u32>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the scheme here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a scheme file by ranks, by entropy enumeration, or both.
    Verify {
        scheme: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Both)]
        mode: Mode,
        /// Largest q^N the entropy enumeration will visit.
        #[arg(long, env = "DMUSS_MAX_STATES", default_value_t = DEFAULT_MAX_STATES)]
        max_states: u64,
    },
    /// Turn a payload into shares.
    Encode {
        scheme: PathBuf,
        payload: PathBuf,
        /// Key file; random keys are drawn from --seed otherwise.
        #[arg(long, conflicts_with = "seed")]
        keys: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recover one user's messages from the shares it can read.
    Decode {
        scheme: PathBuf,
        /// User index, 1-based.
        user: usize,
        shares: PathBuf,
    },
    /// Run the four-user, six-node example end to end.
    Demo,
}

#[derive(Clone, Copy, ValueEnum)]
enum Privacy {
    Perfect,
    Weak,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Matching,
    Enumerate,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Ranks,
    Entropy,
    Both,
}

/// How a command ended.
enum Failure {
    /// exit 1
    Usage(String),
    /// exit 2, with the JSON that explains it
    Rejected(Value),
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<codec::CodecError> for Failure {
    fn from(e: codec::CodecError) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CmdResult = Result<Value, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn write_or_return(out: Option<&Path>, doc: Value) -> CmdResult {
    match out {
        None => Ok(doc),
        Some(path) => {
            fs::write(path, pretty(&doc))
                .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
            Ok(json!({ "written": path.display().to_string() }))
        }
    }
}

fn violation_doc(v: &dmuss::Violation) -> Value {
    json!({ "feasible": false, "violation": ViolationJson::from(v) })
}

fn cmd_check(input: &Path, privacy: Privacy, method: Method) -> CmdResult {
    let (a, r) = TopologyFile::from_json(&read(input)?)?.parse()?;
    let verdict = match privacy {
        Privacy::Perfect => {
            let method = match method {
                Method::Matching => CheckMethod::Matching,
                Method::Enumerate => CheckMethod::Enumerate,
            };
            dmuss::check_perfect_capacity(&a, &r, method)
        }
        Privacy::Weak => dmuss::check_weak_capacity(&a, &r),
    }
    .map_err(|e| Failure::Usage(e.to_string()))?;
    match verdict {
        Verdict::Feasible => Ok(json!({ "feasible": true })),
        Verdict::Infeasible(v) => Err(Failure::Rejected(violation_doc(&v))),
    }
}

fn synthesis_failure(e: SynthesisError) -> Failure {
    match e {
        SynthesisError::CapacityViolation(v) => Failure::Rejected(violation_doc(&v)),
        SynthesisError::AssignmentExhausted { q, budget, block } => Failure::Rejected(json!({
            "error": "assignment_exhausted",
            "q": q,
            "budget": budget,
            "block": block + 1,
            "description": e.to_string(),
        })),
        SynthesisError::SelfCertification(report) => Failure::Rejected(to_value(&*report)),
        other => Failure::Usage(other.to_string()),
    }
}

fn cmd_synth(input: &Path, q: Option<u32>, seed: u64, out: Option<&Path>) -> CmdResult {
    let (a, r) = TopologyFile::from_json(&read(input)?)?.parse()?;
    let pinned_low = q.is_some_and(|q| q < default_field(a.user_count()).q());
    let tries = if pinned_low { SEED_RETRIES } else { 1 };
    let mut last = None;
    for t in 0..tries {
        let opts = SynthesisOptions {
            q,
            seed: seed.wrapping_add(t),
            ..SynthesisOptions::default()
        };
        match dmuss::synthesize(&a, &r, &opts) {
            Ok(s) => {
                if t > 0 {
                    eprintln!("synth: succeeded with seed {}", opts.seed);
                }
                return write_or_return(out, to_value(&SchemeFile::new(&s)));
            }
            Err(e @ (SynthesisError::AssignmentExhausted { .. } | SynthesisError::SelfCertification(_))) => {
                last = Some(e);
            }
            Err(e) => return Err(synthesis_failure(e)),
        }
    }
    Err(synthesis_failure(last.expect("at least one attempt")))
}

fn cmd_verify(path: &Path, mode: Mode, max_states: u64) -> CmdResult {
    let s = SchemeFile::from_json(&read(path)?)?.parse()?;
    let mut reports: Vec<VerificationReport> = Vec::new();
    if mode != Mode::Entropy {
        reports.push(verification::certify_ranks(&s));
    }
    if mode != Mode::Ranks {
        reports.push(verification::entropy_oracle(&s, max_states).map_err(|e| Failure::Usage(e.to_string()))?);
    }
    let pass = reports.iter().all(|r| r.pass);
    let doc = json!({ "pass": pass, "reports": reports });
    if pass {
        Ok(doc)
    } else {
        for r in &reports {
            for c in r.failing() {
                eprintln!("verify: {} expected {}, observed {}", c.name, c.expected, c.observed);
            }
        }
        Err(Failure::Rejected(doc))
    }
}

fn cmd_encode(scheme: &Path, payload: &Path, keys: Option<&Path>, seed: Option<u64>, out: Option<&Path>) -> CmdResult {
    let s = SchemeFile::from_json(&read(scheme)?)?.parse()?;
    let (field, rates, p) = PayloadFile::from_json(&read(payload)?)?.parse()?;
    if field != s.field() || rates != s.rates() {
        return Err(Failure::Usage(format!(
            "payload is for GF({}) with rates {rates:?}, scheme is over {} with rates {:?}",
            field.q(),
            s.field(),
            s.rates()
        )));
    }
    let shares = match keys {
        Some(path) => {
            let k = KeysFile::from_json(&read(path)?)?.parse()?;
            codec::place(&s, &p, KeySource::Explicit(&k))?
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
            codec::place(&s, &p, KeySource::Random(&mut rng))?
        }
    };
    write_or_return(out, to_value(&SharesFile::new(&shares)))
}

fn cmd_decode(scheme: &Path, user: usize, shares: &Path) -> CmdResult {
    let s = SchemeFile::from_json(&read(scheme)?)?.parse()?;
    if user == 0 || user > s.user_count() {
        return Err(Failure::Usage(format!("user must be in 1..={}", s.user_count())));
    }
    let k = user - 1;
    let (rows, nodes) = SharesFile::from_json(&read(shares)?)?.parse(s.access())?;
    let wanted: Vec<usize> = s.access().set(k).iter().copied().collect();
    let positions = wanted
        .iter()
        .map(|n| nodes.binary_search(n))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| {
            Failure::Usage(format!(
                "user {user} reads {} shares; the share file does not cover all of them",
                wanted.len()
            ))
        })?;
    let restricted = rows.select_rows(&positions).expect("positions in range");
    let block = codec::retrieve(&s, k, &restricted)?;
    Ok(to_value(&MessageFile::new(k, &block)))
}

fn cmd_demo() -> CmdResult {
    let a = fixtures::example_access();
    let r = fixtures::example_rates();
    let topology = TopologyFile::new(&a, &r);
    let verdict = dmuss::check_perfect_capacity(&a, &r, CheckMethod::Matching).expect("valid example");
    let found = matching::find_match_plan(&a, &r).expect("feasible example");
    let printed = fixtures::example_plan();
    let printed_valid = printed.validate(&a, &[1, 1, 1, 1]).is_ok();
    let plan_labels = |p: &matching::MatchPlan| -> Vec<Vec<Vec<usize>>> {
        p.sets()
            .iter()
            .map(|per| per.iter().map(|c| c.iter().map(|n| n + 1).collect()).collect())
            .collect()
    };

    let generator = synthesis::init_symbolic_generator(&a, &[1, 1, 1, 1]);
    let blocks = synthesis::extract_privacy_blocks(&generator, &printed);

    let gf2 = fixtures::example_gf2_scheme();
    let states = gf2.field().count(gf2.node_count()).expect("small");
    let (ranks, entropy) = verification::verify_both(&gf2, DEFAULT_MAX_STATES).expect("64 states");

    let synthesized = dmuss::synthesize(
        &a,
        &r,
        &SynthesisOptions {
            q: Some(5),
            ..SynthesisOptions::default()
        },
    )
    .map_err(synthesis_failure)?;
    let synthesized_ok = verification::certify_ranks(&synthesized).pass
        && verification::entropy_oracle(&synthesized, DEFAULT_MAX_STATES).is_ok_and(|rep| rep.pass);

    let f = gf2.field();
    let column = |v: &[u64]| {
        dmuss::FieldMatrix::from_rows(f, 1, &v.iter().map(|&x| [x]).collect::<Vec<_>>()).expect("binary")
    };
    let payload = codec::Payload::from_stacked(&column(&[1, 0, 1, 1]), gf2.rates()).expect("four messages");
    let keys = column(&[0, 1]);
    let shares = codec::place(&gf2, &payload, KeySource::Explicit(&keys))?;
    let decoded = (0..4)
        .map(|k| {
            let rows = codec::access_rows(&gf2, k, &shares)?;
            Ok(codec::retrieve(&gf2, k, &rows)?.get(0, 0))
        })
        .collect::<Result<Vec<_>, Failure>>()?;

    let pass = verdict.is_feasible() && printed_valid && ranks.pass && entropy.pass && synthesized_ok && decoded == [1, 0, 1, 1];
    let doc = json!({
        "N": a.node_count(),
        "K": a.user_count(),
        "topology": topology,
        "feasible": verdict.is_feasible(),
        "match_plan": plan_labels(&found),
        "printed_match_plan": { "sets": plan_labels(&printed), "valid": printed_valid },
        "symbolic_generator": generator.to_string(),
        "privacy_blocks": blocks.iter().map(|b| b.to_string()).collect::<Vec<_>>(),
        "gf2_scheme": SchemeFile::new(&gf2),
        "gf2_verification": { "states": states, "ranks": ranks, "entropy": entropy },
        "synthesized_q5": { "scheme": SchemeFile::new(&synthesized), "verified": synthesized_ok },
        "roundtrip": {
            "messages": [1, 0, 1, 1],
            "keys": [0, 1],
            "shares": dmuss::formats::share_vector(&shares, 0),
            "decoded": decoded,
        },
        "pass": pass,
    });
    if pass {
        Ok(doc)
    } else {
        Err(Failure::Rejected(doc))
    }
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Check { input, privacy, method } => cmd_check(&input, privacy, method),
        Command::Synth { input, q, seed, out } => cmd_synth(&input, q, seed, out.as_deref()),
        Command::Verify {
            scheme,
            mode,
            max_states,
        } => cmd_verify(&scheme, mode, max_states),
        Command::Encode {
            scheme,
            payload,
            keys,
            seed,
            out,
        } => cmd_encode(&scheme, &payload, keys.as_deref(), seed, out.as_deref()),
        Command::Decode { scheme, user, shares } => cmd_decode(&scheme, user, &shares),
        Command::Demo => cmd_demo(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(doc) => {
            print!("{}", pretty(&doc));
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Rejected(doc)) => {
            if let Some(v) = doc.get("violation") {
                eprintln!("infeasible: {}", v["description"].as_str().unwrap_or_default());
            }
            print!("{}", pretty(&doc));
            ExitCode::from(2)
        }
    }
}
