use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn dmuss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dmuss"))
        .args(args)
        .env_remove("DMUSS_MAX_STATES")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&o.stdout),
            String::from_utf8_lossy(&o.stderr)
        )
    })
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn check_examples() {
    let ok = dmuss(&["check", p(&fixture("example.json"))]);
    assert_eq!(code(&ok), 0);
    assert_eq!(stdout_json(&ok), json!({ "feasible": true }));

    for method in ["matching", "enumerate"] {
        let bad = dmuss(&["check", p(&fixture("example_overloaded.json")), "--method", method]);
        assert_eq!(code(&bad), 2);
        let v = &stdout_json(&bad)["violation"];
        assert_eq!(v["k"], 3);
        assert_eq!(v["s"], json!([1]));
        assert_eq!(v["lhs"], 2);
        assert_eq!(v["rhs"], 1);
    }

    let weak = dmuss(&["check", p(&fixture("weak_example.json")), "--privacy", "weak"]);
    assert_eq!(code(&weak), 0);
    // (2,1) fits inside the perfect-privacy region as well
    let perfect = dmuss(&["check", p(&fixture("weak_example.json"))]);
    assert_eq!(code(&perfect), 0);
}

#[test]
fn weak_rejection_names_the_inequality() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "t.json", r#"{"access_sets": [[1,2,3],[3,4]], "rates": [3, 1]}"#);
    let o = dmuss(&["check", p(&input), "--privacy", "weak"]);
    assert_eq!(code(&o), 2);
    let v = &stdout_json(&o)["violation"];
    assert_eq!(v["constraint"], "weak_per_user");
    assert_eq!(v["s"], json!([1]));
    assert_eq!(v["k"], 2);
}

#[test]
fn synth_verify_and_byte_identical_output() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let o = dmuss(&["synth", p(&fixture("example.json")), "--q", "5", "--seed", "7", "--out", p(out)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let scheme: Value = serde_json::from_slice(&fs::read(&a).unwrap()).unwrap();
    assert_eq!(scheme["q"], 5);
    assert_eq!(scheme["seed"], 7);
    assert_eq!(scheme["key_count"], 2);

    let v = dmuss(&["verify", p(&a), "--mode", "both"]);
    assert_eq!(code(&v), 0);
    assert_eq!(stdout_json(&v)["pass"], true);
}

#[test]
fn synth_small_field_and_infeasible() {
    let o = dmuss(&["synth", p(&fixture("example.json")), "--q", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout_json(&o)["q"], 2);

    let bad = dmuss(&["synth", p(&fixture("example_overloaded.json"))]);
    assert_eq!(code(&bad), 2);
    assert_eq!(stdout_json(&bad)["violation"]["k"], 3);

    let dir = TempDir::new().unwrap();
    let frac = write(&dir, "f.json", r#"{"access_sets": [[1,2],[2,3]], "rates": ["1/2", 1]}"#);
    assert_eq!(code(&dmuss(&["check", p(&frac)])), 0);
    assert_eq!(code(&dmuss(&["synth", p(&frac)])), 1);
}

#[test]
fn verify_fixture_and_tampered_fixture() {
    let o = dmuss(&["verify", p(&fixture("example_gf2_scheme.json"))]);
    assert_eq!(code(&o), 0);
    let reports = stdout_json(&o)["reports"].clone();
    assert_eq!(reports[0]["mode"], "ranks");
    assert_eq!(reports[1]["mode"], "entropy");

    let dir = TempDir::new().unwrap();
    let mut scheme: Value = serde_json::from_str(&fs::read_to_string(fixture("example_gf2_scheme.json")).unwrap()).unwrap();
    // zero the coefficient of node 2 in user 2's decoding column
    scheme["decoding"][1][1] = json!([0]);
    let tampered = write(&dir, "t.json", &scheme.to_string());
    for mode in ["ranks", "entropy", "both"] {
        let o = dmuss(&["verify", p(&tampered), "--mode", mode]);
        assert_eq!(code(&o), 2, "mode {mode}");
        let doc = stdout_json(&o);
        assert_eq!(doc["pass"], false);
        let failing: Vec<String> = doc["reports"]
            .as_array()
            .unwrap()
            .iter()
            .flat_map(|r| r["checks"].as_array().unwrap().clone())
            .filter(|c| c["pass"] == false)
            .map(|c| c["name"].as_str().unwrap().to_string())
            .collect();
        let privacy_4 = failing
            .iter()
            .any(|n| n == "privacy_rank_outside_access[k=4]" || n == "H(W_[K]\\{4}|Y_A4)");
        assert!(privacy_4, "mode {mode}: {failing:?}");
    }
}

#[test]
fn entropy_cap() {
    let dir = TempDir::new().unwrap();
    let input = write(
        &dir,
        "big.json",
        r#"{"access_sets": [[1,2,3,4,5],[6,7,8,9,10]], "rates": [1,1]}"#,
    );
    let scheme = dir.path().join("s.json");
    assert_eq!(code(&dmuss(&["synth", p(&input), "--q", "5", "--out", p(&scheme)])), 0);
    let o = dmuss(&["verify", p(&scheme), "--mode", "entropy"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("5^10"));
    assert_eq!(code(&dmuss(&["verify", p(&scheme), "--mode", "ranks"])), 0);

    let fixture_path = fixture("example_gf2_scheme.json");
    let capped = Command::new(env!("CARGO_BIN_EXE_dmuss"))
        .args(["verify", p(&fixture_path), "--mode", "entropy"])
        .env("DMUSS_MAX_STATES", "10")
        .output()
        .unwrap();
    assert_eq!(code(&capped), 1);
    let flag_wins = Command::new(env!("CARGO_BIN_EXE_dmuss"))
        .args(["verify", p(&fixture_path), "--mode", "entropy", "--max-states", "64"])
        .env("DMUSS_MAX_STATES", "10")
        .output()
        .unwrap();
    assert_eq!(code(&flag_wins), 0);
}

#[test]
fn encode_decode_worked_vector() {
    let dir = TempDir::new().unwrap();
    let scheme = fixture("example_gf2_scheme.json");
    let shares = dir.path().join("shares.json");
    let o = dmuss(&[
        "encode",
        p(&scheme),
        p(&fixture("example_payload.json")),
        "--keys",
        p(&fixture("example_keys.json")),
        "--out",
        p(&shares),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let written: Value = serde_json::from_slice(&fs::read(&shares).unwrap()).unwrap();
    assert_eq!(written["columns"], json!([[1, 0, 0, 0, 1, 0]]));

    for (user, expected) in [(1, 1), (2, 0), (3, 1), (4, 1)] {
        let d = dmuss(&["decode", p(&scheme), &user.to_string(), p(&shares)]);
        assert_eq!(code(&d), 0);
        let doc = stdout_json(&d);
        assert_eq!(doc["user"], user);
        assert_eq!(doc["columns"], json!([[expected]]));
    }

    let partial = write(&dir, "p.json", r#"{"q":2,"N":6,"L":1,"nodes":[3,5,6],"columns":[[0,1,0]]}"#);
    let d = dmuss(&["decode", p(&scheme), "4", p(&partial)]);
    assert_eq!(stdout_json(&d)["columns"], json!([[1]]));

    let two_rows = write(&dir, "two.json", r#"{"q":2,"N":6,"L":1,"nodes":[1,2],"columns":[[1,0]]}"#);
    let d = dmuss(&["decode", p(&scheme), "1", p(&two_rows)]);
    assert_eq!(code(&d), 1);
    assert!(!d.stderr.is_empty());
}

#[test]
fn seeded_encode_roundtrip_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let scheme = dir.path().join("s.json");
    assert_eq!(code(&dmuss(&["synth", p(&fixture("example.json")), "--seed", "3", "--out", p(&scheme)])), 0);
    let payload = write(
        &dir,
        "payload.json",
        r#"{"q":5,"rates":[1,1,1,1],"L":3,"columns":[[1,2,3,4],[0,0,0,0],[4,4,1,2]]}"#,
    );
    let outs: Vec<PathBuf> = (0..2).map(|i| dir.path().join(format!("y{i}.json"))).collect();
    for out in &outs {
        let o = dmuss(&["encode", p(&scheme), p(&payload), "--seed", "11", "--out", p(out)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(&outs[0]).unwrap(), fs::read(&outs[1]).unwrap());
    let other = dir.path().join("other.json");
    dmuss(&["encode", p(&scheme), p(&payload), "--seed", "12", "--out", p(&other)]);
    assert_ne!(fs::read(&outs[0]).unwrap(), fs::read(&other).unwrap());

    let expected = [[1, 0, 4], [2, 0, 4], [3, 0, 1], [4, 0, 2]];
    for shares in [&outs[0], &other] {
        for (k, row) in expected.iter().enumerate() {
            let d = dmuss(&["decode", p(&scheme), &(k + 1).to_string(), p(shares)]);
            assert_eq!(code(&d), 0);
            let cols: Vec<u64> = stdout_json(&d)["columns"]
                .as_array()
                .unwrap()
                .iter()
                .map(|c| c[0].as_u64().unwrap())
                .collect();
            assert_eq!(cols, row);
        }
    }
}

#[test]
fn demo_runs_the_example() {
    let o = dmuss(&["demo"]);
    assert_eq!(code(&o), 0);
    let doc = stdout_json(&o);
    assert_eq!(doc["N"], 6);
    assert_eq!(doc["K"], 4);
    assert_eq!(doc["topology"]["access_sets"], json!([[1, 2, 4], [2, 3, 6], [1, 4, 5], [3, 5, 6]]));
    assert_eq!(doc["printed_match_plan"]["valid"], true);
    assert_eq!(doc["gf2_verification"]["states"], 64);
    assert_eq!(doc["roundtrip"]["shares"], json!([1, 0, 0, 0, 1, 0]));
    assert_eq!(doc["pass"], true);
}

#[test]
fn malformed_inputs_exit_1_with_a_diagnostic() {
    let dir = TempDir::new().unwrap();
    let scheme = fixture("example_gf2_scheme.json");
    let payload = fixture("example_payload.json");
    let shares = write(&dir, "shares.json", r#"{"q":2,"N":6,"L":1,"columns":[[1,0,0,0,1,0]]}"#);

    let topology_corpus = [
        "",
        "not json",
        "{}",
        "[]",
        r#"{"access_sets": [[1,2]], "rates": [1, 2]}"#,
        r#"{"access_sets": [[0,1]], "rates": [1]}"#,
        r#"{"access_sets": [[1,2]], "rates": [-1]}"#,
        r#"{"access_sets": [[1,2]], "rates": ["1/0"]}"#,
        r#"{"access_sets": [[1,2]], "rates": [1.5]}"#,
        r#"{"access_sets": [], "rates": []}"#,
        r#"{"access_sets": [[1,2]], "rates": [1], "extra": 1}"#,
        r#"{"access_sets": "x", "rates": [1]}"#,
    ];
    let scheme_text = fs::read_to_string(&scheme).unwrap();
    let mut scheme_corpus: Vec<String> = vec!["".into(), "{".into(), "{}".into()];
    for (field, value) in [
        ("q", json!(4)),
        ("q", json!(0)),
        ("q", json!(-2)),
        ("N", json!(7)),
        ("K", json!(3)),
        ("key_count", json!(1)),
        ("rates", json!([1, 1, 1])),
        ("rates", json!([2, 1, 1, 1])),
        ("encoding", json!([[1, 0]])),
        ("encoding", json!([[2, 0, 0, 0, 0, 0], [0, 0, 1, 0, 0, 0], [0, 0, 0, 1, 0, 0], [0, 0, 0, 0, 0, 1], [1, 1, 1, 0, 0, 0], [0, 0, 0, 1, 1, 1]])),
        ("decoding", json!([])),
        ("access_sets", json!([[1, 2, 4], [2, 3, 6], [1, 4, 5], [3, 5, 7]])),
        ("match_plan", json!([[[9]]])),
    ] {
        let mut v: Value = serde_json::from_str(&scheme_text).unwrap();
        v[field] = value;
        scheme_corpus.push(v.to_string());
    }
    let payload_corpus = [
        r#"{"q":2,"rates":[1,1,1,1],"L":1,"columns":[[1,0,1]]}"#,
        r#"{"q":2,"rates":[1,1,1,1],"L":2,"columns":[[1,0,1,1]]}"#,
        r#"{"q":2,"rates":[1,1,1,1],"L":1,"columns":[[1,0,1,2]]}"#,
        r#"{"q":3,"rates":[1,1,1,1],"L":1,"columns":[[1,0,1,1]]}"#,
        r#"{"q":2,"rates":[2,1,1],"L":1,"columns":[[1,0,1,1]]}"#,
        r#"{"q":2}"#,
    ];
    let shares_corpus = [
        r#"{"q":2,"N":6,"L":1,"columns":[[1,0,0,0,1]]}"#,
        r#"{"q":2,"N":5,"L":1,"columns":[[1,0,0,0,1]]}"#,
        r#"{"q":2,"N":6,"L":1,"nodes":[4,2,1],"columns":[[1,0,0]]}"#,
        r#"{"q":2,"N":6,"L":1,"nodes":[1,2,9],"columns":[[1,0,0]]}"#,
        r#"{"q":2,"N":6,"L":1,"columns":[[1,0,0,0,1,5]]}"#,
        r#"{"q":2,"N":6,"L":3,"columns":[[1,0,0,0,1,0]]}"#,
    ];
    let keys_corpus = [
        r#"{"q":2,"key_count":1,"L":1,"columns":[[0]]}"#,
        r#"{"q":2,"key_count":2,"L":2,"columns":[[0,1]]}"#,
        r#"{"q":5,"key_count":2,"L":1,"columns":[[0,1]]}"#,
    ];

    let mut cases: Vec<Vec<String>> = Vec::new();
    let s = |x: &Path| x.to_str().unwrap().to_string();
    for (i, t) in topology_corpus.iter().enumerate() {
        let f = write(&dir, &format!("topo{i}.json"), t);
        cases.push(vec!["check".into(), s(&f)]);
        cases.push(vec!["synth".into(), s(&f)]);
    }
    for (i, t) in scheme_corpus.iter().enumerate() {
        let f = write(&dir, &format!("scheme{i}.json"), t);
        cases.push(vec!["verify".into(), s(&f)]);
        cases.push(vec!["encode".into(), s(&f), s(&payload)]);
        cases.push(vec!["decode".into(), s(&f), "1".into(), s(&shares)]);
    }
    for (i, t) in payload_corpus.iter().enumerate() {
        let f = write(&dir, &format!("payload{i}.json"), t);
        cases.push(vec!["encode".into(), s(&scheme), s(&f)]);
    }
    for (i, t) in shares_corpus.iter().enumerate() {
        let f = write(&dir, &format!("shares{i}.json"), t);
        cases.push(vec!["decode".into(), s(&scheme), "1".into(), s(&f)]);
    }
    for (i, t) in keys_corpus.iter().enumerate() {
        let f = write(&dir, &format!("keys{i}.json"), t);
        cases.push(vec!["encode".into(), s(&scheme), s(&payload), "--keys".into(), s(&f)]);
    }
    for args in [
        vec!["decode", p(&scheme), "0", p(&shares)],
        vec!["decode", p(&scheme), "5", p(&shares)],
        vec!["decode", p(&scheme), "one", p(&shares)],
        vec!["check", "/nonexistent/topology.json"],
        vec!["check", p(&fixture("example.json")), "--privacy", "strong"],
        vec!["synth", p(&fixture("example.json")), "--q", "4"],
        vec!["synth", p(&fixture("example.json")), "--out", "/nonexistent/dir/out.json"],
        vec!["encode", p(&scheme), p(&payload), "--keys", p(&fixture("example_keys.json")), "--seed", "1"],
        vec!["verify"],
        vec!["frobnicate"],
        vec![],
    ] {
        cases.push(args.into_iter().map(String::from).collect());
    }

    for args in &cases {
        let argv: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = dmuss(&argv);
        assert_eq!(code(&o), 1, "{argv:?} stdout: {}", String::from_utf8_lossy(&o.stdout));
        assert!(!o.stderr.is_empty(), "{argv:?} printed no diagnostic");
    }
}
