use std::path::PathBuf;
use std::process::{Command, Output};

fn piclab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_piclab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(args: &[&str]) -> serde_json::Value {
    let mut a = args.to_vec();
    a.extend(["--format", "json"]);
    let o = piclab(&a);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    serde_json::from_slice(&o.stdout).unwrap()
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .display()
        .to_string()
}

fn close(v: &serde_json::Value, want: f64) -> bool {
    (v.as_f64().unwrap() - want).abs() <= 1e-9
}

#[test]
fn measure_reports() {
    let r = json(&[
        "measure",
        "--protocol",
        "ring-parity",
        "--k",
        "3",
        "--n",
        "1",
    ]);
    assert!(close(&r["ic"], 1.0) && close(&r["pic"], 3.0));
    assert_eq!(r["cc"], 3);
    assert_eq!(r["acc"], "3");
    let r = json(&[
        "measure",
        "--protocol",
        "star-parity",
        "--k",
        "3",
        "--n",
        "1",
    ]);
    assert!(close(&r["pic"], 2.0));
}

#[test]
fn measure_and_at_its_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mu.json");
    // Ber(1/3) x Ber(1/2), inputs as binary and hex tokens.
    std::fs::write(
        &path,
        r#"[[["0","0"],1,6],[["0","1"],1,6],[["0x1","0"],1,3],[["1","1"],1,3]]"#,
    )
    .unwrap();
    let mu = format!("file:{}", path.display());
    let r = json(&["measure", "--protocol", "and-opt", "--mu", &mu]);
    assert!(close(&r["pic"], 3f64.log2()));

    let g = json(&["measure", "--protocol", "and-opt", "--mu", "grid:0.01"]);
    assert!((g["grid"]["alpha"].as_f64().unwrap() - 1.0 / 3.0).abs() < 0.01);
    assert!((g["measures"]["pic"].as_f64().unwrap() - 3f64.log2()).abs() < 1e-3);
}

#[test]
fn audit_verdicts() {
    let r = json(&["audit", "--protocol", "ring-parity"]);
    assert_eq!(r["verdict"], "private");
    let r = json(&["audit", "--protocol", "star-parity"]);
    assert_eq!(r["verdict"], "not private");
    assert!(r["leakage"].as_f64().unwrap() > 0.0);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bare.json");
    std::fs::write(
        &path,
        r#"{"k": 2, "input_bits": [1, 1], "tree": {"outputs": ["0", "0"]}}"#,
    )
    .unwrap();
    let o = piclab(&["audit", "--protocol", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(o.stdout.is_empty());
}

#[test]
fn compress_commands() {
    let r = json(&["compress", "--protocol", "star-parity"]);
    assert_eq!(r["measured_error"].as_f64(), Some(0.0));
    assert!(r["expected_stages"].as_f64().unwrap() <= 2.0);
    assert_eq!(r["profiles_exact"], true);

    let o = piclab(&["compress", "--protocol", "q-index"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--obliviousize"));
    let r = json(&["compress", "--protocol", "q-index", "--obliviousize", "0.5"]);
    assert_eq!(r["obliviousized"]["oblivious"], true);
    assert_eq!(r["compression"]["profiles_exact"], true);

    let r = json(&[
        "compress",
        "--protocol",
        "and-opt",
        "--lcp",
        "randomized",
        "--eps",
        "0.01",
        "--trials",
        "50",
    ]);
    assert_eq!(r["lcp"], "randomized");
    assert!(r["measured_error"].as_f64().unwrap() <= r["allowed_error"].as_f64().unwrap());
}

#[test]
fn fixed_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for n in 0..2 {
        let path = dir.path().join(format!("r{n}.csv"));
        let o = piclab(&[
            "compress",
            "--protocol",
            "star-parity",
            "--lcp",
            "randomized",
            "--eps",
            "0.2",
            "--trials",
            "40",
            "--seed",
            "9",
            "--format",
            "csv",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        assert!(o.stdout.is_empty());
        outputs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn exit_codes() {
    let budget = piclab(&[
        "measure",
        "--protocol",
        "ring-parity",
        "--k",
        "6",
        "--n",
        "3",
        "--budget",
        "10",
    ]);
    assert_eq!(budget.status.code(), Some(2));
    assert!(budget.stdout.is_empty());
    assert_eq!(
        piclab(&["measure", "--protocol", "order-leak"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        piclab(&["measure", "--protocol", "no-such"]).status.code(),
        Some(1)
    );
    assert_eq!(
        piclab(&["measure", "--protocol", "and-opt", "--tolerance", "0"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        piclab(&["measure", "--protocol", "and-opt", "--mu", "weird"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        piclab(&["measure", "--protocol", "ring-parity", "--k", "2"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(piclab(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn tree_files_are_accepted() {
    let r = json(&["measure", "--protocol", &fixture("and_second_bit.json")]);
    assert_eq!(r["acc"], "3/2");
    let o = piclab(&[
        "measure",
        "--protocol",
        &fixture("masked_xor.json"),
        "--k",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn demo_and_list() {
    let r = json(&["demo"]);
    assert_eq!(r["identical_contents"], true);
    assert_eq!(r["outputs_differ"], true);
    assert_eq!(r["runs"][0]["b_read_from"][0], "C");
    assert_eq!(r["runs"][1]["b_read_from"][0], "D");
    let text = stdout(&piclab(&["list"]));
    for name in [
        "ring-parity",
        "star-parity",
        "and-opt",
        "q-index",
        "order-leak",
    ] {
        assert!(text.contains(name));
    }
    let csv = stdout(&piclab(&["list", "--format", "csv"]));
    assert!(csv.starts_with("name,parameters,mode,description\n"));
}

#[test]
fn formats_agree() {
    let args = ["measure", "--protocol", "and-opt"];
    let text = stdout(&piclab(&[&args[..], &["--format", "text"]].concat()));
    let csv = stdout(&piclab(&[&args[..], &["--format", "csv"]].concat()));
    assert!(text.contains("pic                  1.500000000"));
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().contains("1.5"));
}
