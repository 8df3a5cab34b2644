use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lkh-rekey"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_tree(dir: &TempDir) -> std::path::PathBuf {
    let file = dir.path().join("tree.json");
    ok(&[
        "gen-tree",
        "--height",
        "4",
        "--balance",
        "2",
        "--seed",
        "3",
        "--out",
        path(&file),
    ]);
    file
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn gen_tree_is_seeded() {
    let a = ok(&["gen-tree", "--height", "6", "--balance", "3", "--seed", "9"]);
    let b = ok(&["gen-tree", "--height", "6", "--balance", "3", "--seed", "9"]);
    assert_eq!(a, b);
    assert!(json(&a)["nodes"].as_array().unwrap().contains(&1.into()));
}

#[test]
fn solve_every_algorithm() {
    let dir = TempDir::new().unwrap();
    let tree = small_tree(&dir);
    let nodes: Vec<u64> =
        serde_json::from_value(json(&fs::read_to_string(&tree).unwrap())["nodes"].clone()).unwrap();
    let leaf = nodes
        .iter()
        .copied()
        .filter(|t| !nodes.contains(&(2 * t)))
        .max()
        .unwrap()
        .to_string();
    for algo in ["dcaep+", "dcaep", "marking", "merging", "rotation"] {
        let report = json(&ok(&[
            "solve",
            "--tree",
            path(&tree),
            "--departing",
            &leaf,
            "--joins",
            "3",
            "--algo",
            algo,
        ]));
        assert_eq!(report["algorithm"], algo);
        assert!(report["exact_cost"].as_i64().unwrap() <= report["approx_cost"].as_i64().unwrap());
    }
}

#[test]
fn solve_writes_a_trace() {
    let dir = TempDir::new().unwrap();
    let tree = small_tree(&dir);
    let trace = dir.path().join("trace.jsonl");
    ok(&[
        "solve",
        "--tree",
        path(&tree),
        "--joins",
        "4",
        "--starts",
        "2",
        "--trace",
        path(&trace),
    ]);
    let lines = fs::read_to_string(&trace).unwrap();
    assert!(!lines.is_empty());
    for line in lines.lines() {
        let row = json(line);
        assert!(row["f"].is_number() && row["t"].is_number() && row["is_binary"].is_boolean());
    }
}

#[test]
fn oracle_matches_a_hand_count() {
    let dir = TempDir::new().unwrap();
    let tree = dir.path().join("tree.json");
    fs::write(&tree, r#"{"nodes":[1,2,3]}"#).unwrap();
    // one joiner replacing leaf 3 scores -1 plus the spread of {2, 3}
    let out = json(&ok(&[
        "oracle",
        "--tree",
        path(&tree),
        "--departing",
        "3",
        "--joins",
        "1",
        "--lambda",
        "0.1",
    ]));
    assert!((out["objective"].as_f64().unwrap() - (-1.0 + 0.1 * 1.0)).abs() < 1e-12);
    assert_eq!(out["placement"]["joiners"][0]["replace"], 3);
}

#[test]
fn bench_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("bench.toml");
    fs::write(
        &config,
        "[solver]\nstarts = 3\n\n[[sweep]]\nheight = 6\nbalance = 2\ndeparting = 8\njoins = [4, 16]\nseeds = [1, 2]\n",
    )
    .unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let json_out = dir.path().join("a.json");
    ok(&[
        "bench",
        "--config",
        path(&config),
        "--out-csv",
        path(&a),
        "--out-json",
        path(&json_out),
    ]);
    ok(&["bench", "--config", path(&config), "--out-csv", path(&b)]);
    let first = fs::read(&a).unwrap();
    assert_eq!(first, fs::read(&b).unwrap());
    assert_eq!(String::from_utf8(first).unwrap().lines().count(), 1 + 4 * 5);
    assert_eq!(
        json(&fs::read_to_string(&json_out).unwrap())["rows"]
            .as_array()
            .unwrap()
            .len(),
        20
    );
}

#[test]
fn errors_exit_nonzero() {
    let dir = TempDir::new().unwrap();
    let tree = small_tree(&dir);
    let missing = dir.path().join("missing.json");
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[[sweep]]\nheight = 6\nunknown = 1\n").unwrap();
    for args in [
        vec!["solve", "--tree", path(&missing), "--joins", "1"],
        vec![
            "solve",
            "--tree",
            path(&tree),
            "--joins",
            "1",
            "--algo",
            "nope",
        ],
        vec![
            "solve",
            "--tree",
            path(&tree),
            "--joins",
            "1",
            "--departing",
            "1",
        ],
        vec![
            "solve",
            "--tree",
            path(&tree),
            "--joins",
            "1",
            "--algo",
            "marking",
            "--trace",
            "t.jsonl",
        ],
        vec!["gen-tree", "--height", "3", "--balance", "5"],
        vec!["bench", "--config", path(&bad)],
    ] {
        let out = run(&args);
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(!out.stderr.is_empty());
    }
}
