//! End-to-end runs of the `teda` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn root() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

fn config(name: &str) -> PathBuf {
    root().join("configs").join(name)
}

fn teda(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_teda"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = teda(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn metrics(cfg: &str, mode: &str) -> serde_json::Value {
    let text = ok(&[
        "simulate",
        "--config",
        config(cfg).to_str().unwrap(),
        "--mode",
        mode,
    ]);
    serde_json::from_str(&text).unwrap()
}

#[test]
fn per_step_times_from_configs() {
    let cases = [
        ("x5.json", "teda", 0.041),
        ("x5.json", "per_step_te", 0.161),
        ("pc.json", "per_step_te", 0.066),
        ("zero_latency.json", "teda", 0.041),
    ];
    for (cfg, mode, want) in cases {
        let m = metrics(cfg, mode);
        assert!(
            (m["per_step_s"].as_f64().unwrap() - want).abs() < 1e-9,
            "{cfg} {mode}"
        );
    }
    let m = metrics("x5.json", "open_loop");
    assert!((m["max_inter_action_gap_s"].as_f64().unwrap() - 0.161).abs() < 1e-9);
}

#[test]
fn compare_prints_all_modes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("cmp.json");
    let table = ok(&[
        "compare",
        "--config",
        config("x5.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    for mode in ["teda", "per_step_te", "open_loop"] {
        assert!(table.contains(mode));
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    let speedup = report["vs_per_step_te"]["speedup"].as_f64().unwrap();
    assert!((speedup - 0.161 / 0.041).abs() < 1e-9);
}

#[test]
fn exit_codes() {
    let missing = teda(&["simulate", "--config", "/nonexistent/x.json"]);
    assert_eq!(missing.status.code(), Some(1));

    let infeasible = teda(&[
        "simulate",
        "--config",
        config("x5_noisu.json").to_str().unwrap(),
    ]);
    assert_eq!(infeasible.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&infeasible.stderr);
    assert!(msg.contains("D*(t3+t4) >= t1+t2"), "{msg}");

    // the baselines have no chunk-coverage constraint
    let pst = teda(&[
        "simulate",
        "--config",
        config("x5_noisu.json").to_str().unwrap(),
        "--mode",
        "per_step_te",
    ]);
    assert_eq!(pst.status.code(), Some(0));
}

#[test]
fn quantize_inspect_and_round_trip() {
    let dir = TempDir::new().unwrap();
    let model = root().join("fixtures/reference_mlp.tdac");
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();

    ok(&[
        "quantize",
        "--in",
        model.to_str().unwrap(),
        "--out",
        &p("q1.tdac"),
    ]);
    let inspect = ok(&["inspect", "--in", &p("q1.tdac")]);
    let weights: Vec<&str> = inspect.lines().filter(|l| l.contains(".weight")).collect();
    assert_eq!(weights.len(), 2);
    for line in weights {
        assert!(line.contains("dtype int16"), "{line}");
        let scale: f64 = line
            .split(" scale ")
            .nth(1)
            .unwrap()
            .split(' ')
            .next()
            .unwrap()
            .parse()
            .unwrap();
        assert!(scale > 0.0);
    }

    ok(&["dequantize", "--in", &p("q1.tdac"), "--out", &p("f.tdac")]);
    ok(&["quantize", "--in", &p("f.tdac"), "--out", &p("q2.tdac")]);
    assert_eq!(
        std::fs::read(p("q1.tdac")).unwrap(),
        std::fs::read(p("q2.tdac")).unwrap()
    );

    let bytes = std::fs::read(p("q1.tdac")).unwrap();
    std::fs::write(p("cut.tdac"), &bytes[..bytes.len() - 3]).unwrap();
    assert_eq!(
        teda(&["inspect", "--in", &p("cut.tdac")]).status.code(),
        Some(1)
    );
    assert_eq!(
        teda(&["dequantize", "--in", &p("cut.tdac"), "--out", &p("x")])
            .status
            .code(),
        Some(1)
    );
}

fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn oracle_csv_matches_simulated_trace() {
    let dir = TempDir::new().unwrap();
    let trace = dir.path().join("trace.csv");
    let oracle = dir.path().join("oracle.csv");
    for cfg in ["x5.json", "x5_mlp.json"] {
        let c = config(cfg);
        ok(&[
            "simulate",
            "--config",
            c.to_str().unwrap(),
            "--trace",
            trace.to_str().unwrap(),
            "--metrics",
            dir.path().join("m.json").to_str().unwrap(),
        ]);
        ok(&[
            "oracle",
            "--config",
            c.to_str().unwrap(),
            "--out",
            oracle.to_str().unwrap(),
        ]);
        let (th, trows) = parse_csv(&std::fs::read_to_string(&trace).unwrap());
        let (oh, orows) = parse_csv(&std::fs::read_to_string(&oracle).unwrap());
        assert_eq!(trows.len(), 120);
        assert_eq!(orows.len(), 120);
        let col = |h: &[String], name: &str| h.iter().position(|x| x == name).unwrap();
        for name in ["step", "ensemble_size", "a0", "a1"] {
            let (i, j) = (col(&th, name), col(&oh, name));
            for (t, o) in trows.iter().zip(&orows) {
                assert!(
                    (t[i] - o[j]).abs() <= 1e-12,
                    "{cfg} {name}: {} vs {}",
                    t[i],
                    o[j]
                );
            }
        }
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let run = |tag: &str| {
        let trace = dir.path().join(format!("t{tag}.csv"));
        let metrics = dir.path().join(format!("m{tag}.json"));
        ok(&[
            "simulate",
            "--config",
            config("x5_mlp.json").to_str().unwrap(),
            "--trace",
            trace.to_str().unwrap(),
            "--metrics",
            metrics.to_str().unwrap(),
        ]);
        (
            std::fs::read(trace).unwrap(),
            std::fs::read(metrics).unwrap(),
        )
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn fixtures_command_reproduces_committed_files() {
    let dir = TempDir::new().unwrap();
    ok(&["fixtures", "--out", dir.path().to_str().unwrap()]);
    for name in ["reference_mlp.tdac", "inputs.json", "ground_truth.json"] {
        assert_eq!(
            std::fs::read(dir.path().join(name)).unwrap(),
            std::fs::read(root().join("fixtures").join(name)).unwrap(),
            "{name}"
        );
    }
}
