//! Every shipped benchmark must load, lower, and validate cleanly, and the
//! hand-written certificates must pass the independent checker.

use std::path::PathBuf;

use martcert_core::cert::{check_certificate, Certificate};
use martcert_core::lower::lower_to_pcfg;
use martcert_core::parse::{parse, Mode};
use martcert_core::pcfg::{pcfg_from_json, validate_pcfg, Pcfg};

fn bench_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks")
}

fn load_json(name: &str) -> Pcfg {
    let text = std::fs::read_to_string(bench_dir().join(name)).unwrap();
    pcfg_from_json(&text).unwrap_or_else(|e| panic!("{}: {}", name, e))
}

#[test]
fn app_programs_parse_lower_and_validate() {
    let mut seen = 0;
    for entry in std::fs::read_dir(bench_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().map_or(true, |e| e != "app") {
            continue;
        }
        seen += 1;
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let text = std::fs::read_to_string(&path).unwrap();
        let prog = parse(&text, Mode::App).unwrap_or_else(|e| panic!("{}: {}", name, e));
        let g = lower_to_pcfg(&prog).unwrap_or_else(|e| panic!("{}: {}", name, e));
        let problems = validate_pcfg(&g);
        assert!(problems.is_empty(), "{}: {:?}", name, problems);
    }
    assert_eq!(seen, 8, "expected 8 .app benchmarks");
}

#[test]
fn json_pcfgs_load_and_validate() {
    let mut seen = 0;
    for entry in std::fs::read_dir(bench_dir()).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if !name.ends_with(".json") || name.ends_with(".cert.json") {
            continue;
        }
        seen += 1;
        let g = load_json(&name);
        let problems = validate_pcfg(&g);
        assert!(problems.is_empty(), "{}: {:?}", name, problems);
    }
    assert_eq!(seen, 7, "expected 7 pCFG descriptions");
}

#[test]
fn hand_certificates_pass_the_checker() {
    for (pcfg, cert) in [
        ("d2_coin_race.json", "d2_coin_race.cert.json"),
        ("d3_scaling_walk.json", "d3_scaling_walk.cert.json"),
    ] {
        let g = load_json(pcfg);
        let text = std::fs::read_to_string(bench_dir().join(cert)).unwrap();
        let c = Certificate::from_json(&text, &g).unwrap_or_else(|e| panic!("{}: {}", cert, e));
        let report = check_certificate(&g, &c, 200, 7).unwrap();
        assert!(report.ok, "{}: {:?}", cert, report.failures);
    }
}
