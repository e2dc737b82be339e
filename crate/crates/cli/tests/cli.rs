//! End-to-end tests of the `martcert` binary: exit codes, output formats,
//! and determinism of the benchmark CSV.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_martcert"));
    // Rows must take the deterministic "skipped" path regardless of the host.
    c.env_remove("MARTCERT_SDP_SOLVER");
    c
}

fn bench(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks").join(file)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn martcert")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn synth_then_check_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("d1.cert.json");
    let input = bench("d1_walk.json");
    let o = run(&["synth", input.to_str().unwrap(), "--out", cert.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "synth failed: {}", stderr(&o));
    assert!(stderr(&o).contains("kind="), "missing summary line: {}", stderr(&o));
    assert!(cert.is_file());

    let o = run(&["check", input.to_str().unwrap(), cert.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "check failed: {}\n{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("PASS"), "no PASS line: {}", stdout(&o));
}

#[test]
fn check_rejects_certificate_for_other_program() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("d1.cert.json");
    let o = run(&["synth", bench("d1_walk.json").to_str().unwrap(), "--out", cert.to_str().unwrap()]);
    assert_eq!(code(&o), 0);

    // Same variables, different transition probabilities: fingerprint mismatch.
    let o = run(&["check", bench("d1_walk_alt.json").to_str().unwrap(), cert.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "expected input error: {}", stderr(&o));
    assert!(stderr(&o).contains("fingerprint"), "stderr: {}", stderr(&o));
}

#[test]
fn synth_without_certificate_exits_two() {
    let o = run(&["synth", bench("d3_scaling_walk.json").to_str().unwrap(), "--cert", "eps-rep"]);
    assert_eq!(code(&o), 2, "stderr: {}", stderr(&o));
    assert!(stderr(&o).contains("no certificate"), "stderr: {}", stderr(&o));
}

#[test]
fn input_errors_exit_three() {
    let o = run(&["synth", "benchmarks/does_not_exist.json"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).starts_with("error:"), "stderr: {}", stderr(&o));

    let dir = tempfile::tempdir().unwrap();
    let odd = dir.path().join("program.txt");
    std::fs::write(&odd, "while x > 0 do x := x - 1 od").unwrap();
    let o = run(&["synth", odd.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("unsupported input extension"), "stderr: {}", stderr(&o));
}

#[test]
fn usage_errors_exit_sixty_four() {
    let o = run(&["synth", bench("d1_walk.json").to_str().unwrap(), "--no-such-flag"]);
    assert_eq!(code(&o), 64);

    let o = run(&["bench", "--suite", "table9"]);
    assert_eq!(code(&o), 64);
    assert!(stderr(&o).contains("unknown suite"), "stderr: {}", stderr(&o));

    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
}

#[test]
fn oracle_matches_closed_form_ruin_probability() {
    let o = run(&["oracle", bench("d1_walk.json").to_str().unwrap(), "--lo", "-5", "--hi", "15"]);
    assert_eq!(code(&o), 0, "stderr: {}", stderr(&o));
    let line = stdout(&o);
    for field in ["states=", "discretized=", "iterations=", "residual=", "value="] {
        assert!(line.contains(field), "missing {} in: {}", field, line);
    }
    let value: f64 = line
        .split_whitespace()
        .find_map(|tok| tok.strip_prefix("value="))
        .expect("value field")
        .parse()
        .expect("numeric value");
    // Gambler's ruin from 5 on [0,10] with down-probability 0.1:
    // (r^5 - r^10) / (1 - r^10) where r = 1/9.
    let r = 0.1f64 / 0.9;
    let want = (r.powi(5) - r.powi(10)) / (1.0 - r.powi(10));
    assert!((value - want).abs() < 1e-6, "value {} vs closed form {}", value, want);
}

/// CSV with the wall-clock column blanked out; timings are reported, never
/// compared.
fn strip_wall(csv: &str) -> String {
    csv.lines()
        .map(|l| {
            let Some(cut) = l.rfind(',') else { return l.to_string() };
            l[..cut].to_string()
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn bench_table3_is_deterministic() {
    let root = bench("");
    let run_once = || {
        let o = bin()
            .current_dir(root.parent().unwrap())
            .args(["bench", "--suite", "table3", "--jobs", "2"])
            .output()
            .expect("spawn martcert");
        assert_eq!(code(&o), 0, "stderr: {}", stderr(&o));
        stdout(&o)
    };
    let a = run_once();
    let b = run_once();
    assert_eq!(strip_wall(&a), strip_wall(&b), "bench output is not deterministic");

    let mut lines = a.lines();
    assert_eq!(
        lines.next(),
        Some("benchmark,params,kind,bound,trivial,oracle_value,status,wall_ms")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 8, "csv: {}", a);
    // Params may themselves contain commas, so index columns from the right.
    for row in &rows {
        let status = row.rsplit(',').nth(1).unwrap();
        assert!(
            matches!(status, "ok" | "refutation-only" | "none"),
            "unexpected status in row: {}",
            row
        );
    }
    // The scaled walk admits no linear repulsing supermartingale.
    let c3_eps = rows
        .iter()
        .find(|r| r.starts_with("c-3") && r.rsplit(',').nth(5) == Some("eps-rep"))
        .expect("c-3 eps-rep row");
    assert_eq!(c3_eps.rsplit(',').nth(1), Some("none"), "row: {}", c3_eps);
}

#[test]
fn bench_table4_rows_all_verify() {
    let root = bench("");
    let o = bin()
        .current_dir(root.parent().unwrap())
        .args(["bench", "--suite", "table4", "--jobs", "2"])
        .output()
        .expect("spawn martcert");
    assert_eq!(code(&o), 0, "stderr: {}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 8, "csv: {}", out);
    for row in &rows {
        assert_eq!(row.rsplit(',').nth(1), Some("ok"), "row not verified: {}", row);
    }
}
