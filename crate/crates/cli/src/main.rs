//! `martcert`: synthesize, check, and cross-validate martingale certificates
//! for probabilistic programs.
//!
//! Exit codes: 0 success, 1 check failure / failed bench row, 2 no
//! certificate, 3 input or environment error, 64 usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use martcert_core::cert::{check_certificate, Bound, CertError, Certificate, Provenance};
use martcert_core::lower::lower_to_pcfg;
use martcert_core::oracle::{
    expand, value_iterate_esteps, value_iterate_gamma, value_iterate_reach, value_table_csv,
    Direction, ExpandOptions,
};
use martcert_core::parse::{parse, Mode};
use martcert_core::pcfg::{pcfg_from_json, validate_pcfg, Pcfg};
use martcert_core::scalar::{rat_from_str, rat_to_f64};
use martcert_core::sdpa::{render_sdpa, run_external_sdp, SolverRun};
use martcert_core::sos::{default_sos_degree, schmudgen_transform};
use martcert_core::synth::{synthesize, SynthResult};
use martcert_core::template::{gen_implications, CertKind, Template};
use martcert_core::{rint, Rat};

#[derive(Parser)]
#[command(name = "martcert", version, about = "Martingale-certificate synthesis and checking")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesize a certificate for a program or pCFG.
    Synth(SynthArgs),
    /// Re-check a certificate JSON against its pCFG.
    Check(CheckArgs),
    /// Finite-state ground-truth values via value iteration.
    Oracle(OracleArgs),
    /// Reproduce a benchmark table as CSV.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum KindArg {
    Nnrep,
    Sclsub,
    Arnk,
    EpsRep,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum TemplateArg {
    Linear,
    Poly,
}

#[derive(Args)]
struct SynthArgs {
    /// Input program (.app/.ppp) or pCFG description (.json).
    input: PathBuf,
    #[arg(long, value_enum, default_value = "nnrep")]
    cert: KindArg,
    #[arg(long, value_enum, default_value = "linear")]
    template: TemplateArg,
    /// Template degree (1 for linear; >= 2 with --template poly).
    #[arg(long, default_value_t = 1)]
    degree: u32,
    /// Degree of the SOS multipliers (poly template; default derived).
    #[arg(long)]
    sos_degree: Option<u32>,
    /// Scaling factor for sclsub, in (0,1); exact rational or decimal text.
    #[arg(long, default_value = "999/1000")]
    gamma: String,
    /// Expected decrease for eps-rep.
    #[arg(long, default_value = "1")]
    eps: String,
    /// Target level for nnrep.
    #[arg(long, default_value = "1")]
    level: String,
    /// External SDP solver command (default: $MARTCERT_SDP_SOLVER).
    #[arg(long)]
    solver: Option<String>,
    /// Write the certificate JSON (poly template without a solver: the SDPA
    /// export) here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CheckArgs {
    /// Input program (.app/.ppp) or pCFG description (.json).
    input: PathBuf,
    /// Certificate JSON produced by `synth` or written by hand.
    certificate: PathBuf,
    /// Sample points per nonlinear condition.
    #[arg(long, default_value_t = 256)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum OracleMode {
    Reach,
    Esteps,
    Gamma,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum DirArg {
    Upper,
    Lower,
}

#[derive(Args)]
struct OracleArgs {
    input: PathBuf,
    #[arg(long, value_enum, default_value = "reach")]
    mode: OracleMode,
    #[arg(long, value_enum, default_value = "upper")]
    direction: DirArg,
    /// Discount factor for --mode gamma.
    #[arg(long, default_value = "999/1000")]
    gamma: String,
    /// Inclusive per-variable box bounds for the expansion.
    #[arg(long, default_value_t = -50, allow_hyphen_values = true)]
    lo: i64,
    #[arg(long, default_value_t = 150, allow_hyphen_values = true)]
    hi: i64,
    /// Round stored values to multiples of this quantum (exact rational).
    #[arg(long)]
    quantum: Option<String>,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Write the full per-state value table CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Benchmark suite: table2, table3 or table4.
    #[arg(long)]
    suite: String,
    /// Write the CSV report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Concurrent rows.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    solver: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind::*;
            let code = match e.kind() {
                DisplayHelp | DisplayVersion => 0,
                _ => 64,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let code = match cli.cmd {
        Cmd::Synth(a) => cmd_synth(&a),
        Cmd::Check(a) => cmd_check(&a),
        Cmd::Oracle(a) => cmd_oracle(&a),
        Cmd::Bench(a) => cmd_bench(&a),
    };
    ExitCode::from(code)
}

fn fail(msg: impl std::fmt::Display) -> u8 {
    eprintln!("error: {}", msg);
    3
}

fn load_pcfg(path: &Path) -> Result<Pcfg, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("{}: {}", path.display(), e))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let g = match ext {
        "json" => pcfg_from_json(&text).map_err(|e| e.to_string())?,
        "app" | "ppp" => {
            let mode = if ext == "ppp" { Mode::Ppp } else { Mode::App };
            let prog = parse(&text, mode).map_err(|e| e.to_string())?;
            lower_to_pcfg(&prog).map_err(|e| e.to_string())?
        }
        other => return Err(format!("unsupported input extension `{}`", other)),
    };
    let problems = validate_pcfg(&g);
    if !problems.is_empty() {
        return Err(format!("invalid pCFG: {}", problems.join("; ")));
    }
    Ok(g)
}

fn parse_kind(kind: KindArg, gamma: &str, eps: &str, level: &str) -> Result<CertKind, String> {
    let r = |s: &str, what: &str| -> Result<Rat, String> {
        rat_from_str(s).ok_or_else(|| format!("bad rational `{}` for {}", s, what))
    };
    Ok(match kind {
        KindArg::Nnrep => CertKind::NNRep { level: r(level, "--level")? },
        KindArg::Sclsub => CertKind::SclSub { gamma: r(gamma, "--gamma")? },
        KindArg::Arnk => CertKind::ARnk,
        KindArg::EpsRep => CertKind::EpsRep { eps: r(eps, "--eps")? },
    })
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), String> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("{}: {}", p.display(), e)),
        None => {
            println!("{}", text);
            Ok(())
        }
    }
}

fn describe(c: &Certificate) -> String {
    let mut s = format!(
        "kind={} bound={:.6} trivial={} provenance={}",
        c.kind.name(),
        c.bound.to_f64(),
        c.trivial,
        c.provenance.as_str()
    );
    if c.refutation_only {
        s.push_str(" refutation-only");
    }
    s
}

fn cmd_synth(a: &SynthArgs) -> u8 {
    let g = match load_pcfg(&a.input) {
        Ok(g) => g,
        Err(e) => return fail(e),
    };
    let kind = match parse_kind(a.cert, &a.gamma, &a.eps, &a.level) {
        Ok(k) => k,
        Err(e) => return fail(e),
    };
    match a.template {
        TemplateArg::Linear => synth_linear(a, &g, &kind),
        TemplateArg::Poly => synth_poly(a, &g, &kind),
    }
}

fn synth_linear(a: &SynthArgs, g: &Pcfg, kind: &CertKind) -> u8 {
    let t0 = Instant::now();
    let s = match synthesize(g, kind, a.degree) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    for w in &s.warnings {
        eprintln!("warning: {}", w);
    }
    match s.result {
        SynthResult::Found(c) => {
            eprintln!(
                "{} ({} LP rows, {} pivots, {} ms)",
                describe(&c),
                s.lp_rows,
                s.pivots,
                t0.elapsed().as_millis()
            );
            match emit(&a.out, &c.to_json(g)) {
                Ok(()) => 0,
                Err(e) => fail(e),
            }
        }
        SynthResult::NoCertificate { reason } => {
            eprintln!("no certificate: {}", reason);
            2
        }
    }
}

fn synth_poly(a: &SynthArgs, g: &Pcfg, kind: &CertKind) -> u8 {
    let degree = a.degree.max(2);
    let t = Template::new(g, degree);
    let imps = gen_implications(g, &t, kind);
    let sos_degree = a.sos_degree.unwrap_or_else(|| default_sos_degree(&imps));
    let objective = t.at_init(g);
    let maximize = matches!(kind, CertKind::SclSub { .. });
    let nvars = g.vars.len() + 1;
    let sdp = match schmudgen_transform(&imps, t.n_unknowns(), nvars, sos_degree, 12, &objective, maximize) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    let file = sdp.to_sdpa();
    let solver = a
        .solver
        .clone()
        .or_else(|| std::env::var("MARTCERT_SDP_SOLVER").ok());
    let Some(solver) = solver else {
        eprintln!(
            "skipped: no SDP solver configured (--solver or MARTCERT_SDP_SOLVER); emitting SDPA export"
        );
        return match emit(&a.out, &render_sdpa(&file)) {
            Ok(()) => 2,
            Err(e) => fail(e),
        };
    };
    let n_leading = 2 * sdp.n_unknowns;
    match run_external_sdp(&file, &solver, n_leading) {
        Err(e) => fail(e),
        Ok(SolverRun::SolverUnavailable { cmd, error }) => {
            eprintln!("skipped: solver `{}` unavailable: {}", cmd, error);
            2
        }
        Ok(SolverRun::ParseFailure { detail }) => fail(format!("solver output: {}", detail)),
        Ok(SolverRun::Solved { objective: obj, leading_diagonal }) => {
            let u_vals: Vec<Rat> = (0..sdp.n_unknowns)
                .map(|u| {
                    let plus = leading_diagonal[2 * u];
                    let minus = leading_diagonal[2 * u + 1];
                    Rat::from_float(plus - minus).unwrap_or_else(|| rint(0))
                })
                .collect();
            let eta = t.instantiate(&u_vals);
            let eta_init = objective.eval(&u_vals);
            let raw = if sdp.negated_objective { -obj } else { obj } + rat_to_f64(&sdp.obj_const);
            let bound = match kind {
                CertKind::NNRep { .. } | CertKind::SclSub { .. } => raw.clamp(0.0, 1.0),
                _ => raw,
            };
            let c = Certificate {
                kind: kind.clone(),
                eta,
                kappa: None,
                eta_init,
                bound: Bound::Approx(bound),
                refutation_only: false,
                provenance: Provenance::SynthesizedApproximate,
                fingerprint: g.fingerprint(),
                trivial: false,
            };
            eprintln!("{} (SDP objective {:.6}, SOS degree {})", describe(&c), raw, sos_degree);
            match check_certificate(g, &c, 64, a.seed) {
                Ok(rep) if !rep.ok => eprintln!(
                    "warning: approximate certificate violates {} condition(s) at floating precision",
                    rep.failures.len()
                ),
                Ok(_) => {}
                Err(e) => eprintln!("warning: could not re-check: {}", e),
            }
            match emit(&a.out, &c.to_json(g)) {
                Ok(()) => 0,
                Err(e) => fail(e),
            }
        }
    }
}

fn cmd_check(a: &CheckArgs) -> u8 {
    let g = match load_pcfg(&a.input) {
        Ok(g) => g,
        Err(e) => return fail(e),
    };
    let text = match std::fs::read_to_string(&a.certificate) {
        Ok(t) => t,
        Err(e) => return fail(format!("{}: {}", a.certificate.display(), e)),
    };
    let c = match Certificate::from_json(&text, &g) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    match check_certificate(&g, &c, a.points, a.seed) {
        Err(CertError::Fingerprint { .. }) => fail("certificate fingerprint does not match this pCFG"),
        Err(e) => fail(e),
        Ok(rep) => {
            for (note, status) in &rep.results {
                println!("ok: {} [{:?}]", note, status);
            }
            for w in &rep.warnings {
                println!("warning: {}", w);
            }
            if rep.ok {
                println!("PASS ({} conditions)", rep.results.len());
                0
            } else {
                for (note, witness, slack) in &rep.failures {
                    let pt: Vec<String> =
                        witness.iter().map(martcert_core::scalar::rat_to_str).collect();
                    println!(
                        "FAIL: {} at ({}) by {}",
                        note,
                        pt.join(", "),
                        martcert_core::scalar::rat_to_str(slack)
                    );
                }
                1
            }
        }
    }
}

fn cmd_oracle(a: &OracleArgs) -> u8 {
    let g = match load_pcfg(&a.input) {
        Ok(g) => g,
        Err(e) => return fail(e),
    };
    let mut opts = ExpandOptions::integer_box(a.lo, a.hi, g.vars.len());
    if let Some(q) = &a.quantum {
        match rat_from_str(q) {
            Some(r) => opts.value_quantum = Some(r),
            None => return fail(format!("bad --quantum `{}`", q)),
        }
    }
    let m = match expand(&g, &opts) {
        Ok(m) => m,
        Err(e) => return fail(e),
    };
    let dir = match a.direction {
        DirArg::Upper => Direction::Upper,
        DirArg::Lower => Direction::Lower,
    };
    let t = match a.mode {
        OracleMode::Reach => value_iterate_reach(&m, dir, a.tol, 1_000_000),
        OracleMode::Esteps => value_iterate_esteps(&m, dir, a.tol, 1_000_000, 1e9),
        OracleMode::Gamma => {
            let gm = match rat_from_str(&a.gamma) {
                Some(r) => rat_to_f64(&r),
                None => return fail(format!("bad --gamma `{}`", a.gamma)),
            };
            value_iterate_gamma(&m, gm, dir, a.tol, 1_000_000)
        }
    };
    println!(
        "states={} discretized={} iterations={} residual={:.3e} value={}",
        m.states.len(),
        m.discretized,
        t.iterations,
        t.residual,
        t.values[m.init]
    );
    if !t.converged {
        eprintln!("warning: value iteration did not reach tolerance");
    }
    if let Some(out) = &a.out {
        if let Err(e) = std::fs::write(out, value_table_csv(&g, &m, &t)) {
            return fail(format!("{}: {}", out.display(), e));
        }
    }
    0
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct RowSpec {
    benchmark: &'static str,
    params: &'static str,
    kind: &'static str,
    task: Task,
}

enum Task {
    Linear { file: &'static str, kind: CertKind },
    Poly { file: &'static str, kind: CertKind, degree: u32 },
}

struct RowOut {
    bound: String,
    trivial: String,
    status: String,
    wall_ms: u128,
}

fn bench_root() -> PathBuf {
    // Resolve relative to the executable's workspace when run via cargo,
    // falling back to the current directory.
    let here = PathBuf::from("benchmarks");
    if here.is_dir() {
        return here;
    }
    let mut p = std::env::current_exe().unwrap_or_default();
    while p.pop() {
        let cand = p.join("benchmarks");
        if cand.is_dir() {
            return cand;
        }
    }
    PathBuf::from("benchmarks")
}

fn gamma999() -> CertKind {
    CertKind::SclSub { gamma: martcert_core::rat(999, 1000) }
}

fn nnrep1() -> CertKind {
    CertKind::NNRep { level: rint(1) }
}

fn suite_rows(suite: &str) -> Option<Vec<RowSpec>> {
    let rows = match suite {
        "table2" => vec![
            RowSpec { benchmark: "a-1", params: "p1=0.2 p2=0.4", kind: "nnrep-linear", task: Task::Linear { file: "a1_queue_p02_p04.app", kind: nnrep1() } },
            RowSpec { benchmark: "a-1", params: "p1=0.8 p2=0.1", kind: "nnrep-linear", task: Task::Linear { file: "a1_queue_p08_p01.app", kind: nnrep1() } },
            RowSpec { benchmark: "a-1", params: "p1=0.2 p2=0.4", kind: "nnrep-poly2", task: Task::Poly { file: "a1_queue_p02_p04.app", kind: nnrep1(), degree: 2 } },
            RowSpec { benchmark: "a-1", params: "p1=0.2 p2=0.4", kind: "nnrep-poly3", task: Task::Poly { file: "a1_queue_p02_p04.app", kind: nnrep1(), degree: 3 } },
        ],
        "table3" => vec![
            RowSpec { benchmark: "c-1", params: "walk [0,10]", kind: "nnrep-linear", task: Task::Linear { file: "d1_walk.json", kind: nnrep1() } },
            RowSpec { benchmark: "c-2", params: "geometric branching", kind: "nnrep-linear", task: Task::Linear { file: "d2_coin_race.json", kind: nnrep1() } },
            RowSpec { benchmark: "c-3", params: "walk [0,1]", kind: "nnrep-linear", task: Task::Linear { file: "d3_scaling_walk.json", kind: nnrep1() } },
            RowSpec { benchmark: "c-4", params: "unbounded walk", kind: "nnrep-linear", task: Task::Linear { file: "d4_free_walk.json", kind: nnrep1() } },
            RowSpec { benchmark: "c-1", params: "walk [0,10]", kind: "eps-rep", task: Task::Linear { file: "d1_walk.json", kind: CertKind::EpsRep { eps: rint(1) } } },
            RowSpec { benchmark: "c-2", params: "geometric branching", kind: "eps-rep", task: Task::Linear { file: "d2_coin_race.json", kind: CertKind::EpsRep { eps: rint(1) } } },
            RowSpec { benchmark: "c-3", params: "walk [0,1]", kind: "eps-rep", task: Task::Linear { file: "d3_scaling_walk.json", kind: CertKind::EpsRep { eps: rint(1) } } },
            RowSpec { benchmark: "c-4", params: "unbounded walk", kind: "eps-rep", task: Task::Linear { file: "d4_free_walk.json", kind: CertKind::EpsRep { eps: rint(1) } } },
        ],
        "table4" => vec![
            RowSpec { benchmark: "a-1", params: "p1=0.2 p2=0.4", kind: "sclsub-linear", task: Task::Linear { file: "a1_queue_p02_p04.app", kind: gamma999() } },
            RowSpec { benchmark: "a-1", params: "p1=0.8 p2=0.1", kind: "sclsub-linear", task: Task::Linear { file: "a1_queue_p08_p01.app", kind: gamma999() } },
            RowSpec { benchmark: "a-2", params: "M1=-1 M2=2", kind: "sclsub-linear", task: Task::Linear { file: "a2_walk_m1_2.app", kind: gamma999() } },
            RowSpec { benchmark: "a-2", params: "M1=-2 M2=1", kind: "sclsub-linear", task: Task::Linear { file: "a2_walk_m2_1.app", kind: gamma999() } },
            RowSpec { benchmark: "a-3", params: "M1=-1 M2=2", kind: "sclsub-linear", task: Task::Linear { file: "a3_walk_m1_2.app", kind: gamma999() } },
            RowSpec { benchmark: "a-3", params: "M1=-2 M2=1", kind: "sclsub-linear", task: Task::Linear { file: "a3_walk_m2_1.app", kind: gamma999() } },
            RowSpec { benchmark: "b", params: "c=0.1 p=0.5", kind: "sclsub-linear", task: Task::Linear { file: "b_rooms_c01_p05.app", kind: gamma999() } },
            RowSpec { benchmark: "b", params: "c=0.1 p=0.1", kind: "sclsub-linear", task: Task::Linear { file: "b_rooms_c01_p01.app", kind: gamma999() } },
        ],
        _ => return None,
    };
    Some(rows)
}

/// Oracle cross-check value for the finite benchmarks; empty elsewhere.
fn oracle_value(file: &str, upper: bool) -> String {
    let root = bench_root();
    let finite = matches!(
        file,
        "d1_walk.json" | "d2_coin_race.json" | "d3_scaling_walk.json" | "d4_free_walk.json"
            | "a1_queue_p02_p04.app" | "a1_queue_p08_p01.app"
    );
    if !finite {
        return String::new();
    }
    let Ok(g) = load_pcfg(&root.join(file)) else {
        return String::new();
    };
    let mut opts = ExpandOptions::integer_box(-5, 80, g.vars.len());
    if file == "d3_scaling_walk.json" {
        opts.value_quantum = Some(martcert_core::rat(1, 1 << 12));
    }
    let Ok(m) = expand(&g, &opts) else {
        return String::new();
    };
    let dir = if upper { Direction::Upper } else { Direction::Lower };
    let t = value_iterate_reach(&m, dir, 1e-12, 1_000_000);
    format!("{:.6}", t.values[m.init])
}

fn run_row(spec: &RowSpec, solver: &Option<String>, seed: u64) -> RowOut {
    let root = bench_root();
    let t0 = Instant::now();
    let out = match &spec.task {
        Task::Linear { file, kind } => match load_pcfg(&root.join(file)) {
            Err(e) => RowOut { bound: String::new(), trivial: String::new(), status: format!("error: {}", e), wall_ms: 0 },
            Ok(g) => match synthesize(&g, kind, 1) {
                Err(e) => RowOut { bound: String::new(), trivial: String::new(), status: format!("error: {}", e), wall_ms: 0 },
                Ok(s) => match s.result {
                    SynthResult::Found(c) => {
                        let status = if c.refutation_only {
                            "refutation-only".to_string()
                        } else {
                            let rep = check_certificate(&g, &c, 64, seed);
                            match rep {
                                Ok(r) if r.ok => "ok".to_string(),
                                Ok(_) => "check-failed".to_string(),
                                Err(e) => format!("error: {}", e),
                            }
                        };
                        RowOut {
                            bound: format!("{:.6}", c.bound.to_f64()),
                            trivial: c.trivial.to_string(),
                            status,
                            wall_ms: 0,
                        }
                    }
                    SynthResult::NoCertificate { .. } => RowOut {
                        bound: String::new(),
                        trivial: String::new(),
                        status: "none".to_string(),
                        wall_ms: 0,
                    },
                },
            },
        },
        Task::Poly { file, kind, degree } => run_poly_row(&root.join(file), kind, *degree, solver),
    };
    RowOut { wall_ms: t0.elapsed().as_millis(), ..out }
}

fn run_poly_row(path: &Path, kind: &CertKind, degree: u32, solver: &Option<String>) -> RowOut {
    let err = |e: String| RowOut { bound: String::new(), trivial: String::new(), status: format!("error: {}", e), wall_ms: 0 };
    let g = match load_pcfg(path) {
        Ok(g) => g,
        Err(e) => return err(e),
    };
    let t = Template::new(&g, degree);
    let imps = gen_implications(&g, &t, kind);
    let sos_degree = default_sos_degree(&imps);
    let objective = t.at_init(&g);
    let sdp = match schmudgen_transform(&imps, t.n_unknowns(), g.vars.len() + 1, sos_degree, 12, &objective, false) {
        Ok(p) => p,
        Err(e) => return err(e.to_string()),
    };
    let file = sdp.to_sdpa();
    let Some(cmd) = solver.clone().or_else(|| std::env::var("MARTCERT_SDP_SOLVER").ok()) else {
        return RowOut {
            bound: String::new(),
            trivial: String::new(),
            status: "skipped (solver unavailable)".to_string(),
            wall_ms: 0,
        };
    };
    match run_external_sdp(&file, &cmd, 0) {
        Err(e) => err(e.to_string()),
        Ok(SolverRun::SolverUnavailable { .. }) => RowOut {
            bound: String::new(),
            trivial: String::new(),
            status: "skipped (solver unavailable)".to_string(),
            wall_ms: 0,
        },
        Ok(SolverRun::ParseFailure { detail }) => err(format!("solver output: {}", detail)),
        Ok(SolverRun::Solved { objective: obj, .. }) => {
            let raw = if sdp.negated_objective { -obj } else { obj } + rat_to_f64(&sdp.obj_const);
            RowOut {
                bound: format!("{:.6}", raw.clamp(0.0, 1.0)),
                trivial: "false".to_string(),
                status: "ok".to_string(),
                wall_ms: 0,
            }
        }
    }
}

fn cmd_bench(a: &BenchArgs) -> u8 {
    if a.suite.is_empty() {
        eprintln!("error: --suite must be one of table2, table3, table4");
        return 64;
    }
    let Some(rows) = suite_rows(&a.suite) else {
        eprintln!("error: unknown suite `{}` (expected table2, table3 or table4)", a.suite);
        return 64;
    };
    let jobs = a.jobs.max(1);
    let n = rows.len();
    let mut outs: Vec<Option<RowOut>> = Vec::with_capacity(n);
    outs.resize_with(n, || None);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let outs_m = std::sync::Mutex::new(&mut outs);
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(n) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let r = run_row(&rows[i], &a.solver, a.seed);
                outs_m.lock().unwrap()[i] = Some(r);
            });
        }
    });
    let mut csv = String::from("benchmark,params,kind,bound,trivial,oracle_value,status,wall_ms\n");
    let mut failed = false;
    for (spec, out) in rows.iter().zip(outs.into_iter()) {
        let out = out.expect("all rows ran");
        if out.status.starts_with("error") || out.status == "check-failed" {
            failed = true;
        }
        let upper = spec.kind.starts_with("nnrep") || spec.kind.starts_with("eps");
        let file = match &spec.task {
            Task::Linear { file, .. } | Task::Poly { file, .. } => *file,
        };
        let ov = oracle_value(file, upper);
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            spec.benchmark, spec.params, spec.kind, out.bound, out.trivial, ov, out.status, out.wall_ms
        ));
    }
    match &a.out {
        Some(p) => {
            if let Err(e) = std::fs::write(p, &csv) {
                return fail(format!("{}: {}", p.display(), e));
            }
        }
        None => print!("{}", csv),
    }
    if failed {
        1
    } else {
        0
    }
}
