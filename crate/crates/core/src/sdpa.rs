//! Sparse SDPA (`.dat-s`) writing, parsing, and external solver invocation.
//!
//! The file carries a problem of the form: find block-diagonal `X >= 0` (psd)
//! with `<A_r, X> = b_r` minimizing `<C, X>`; the constant matrix entries use
//! constraint index 0 for `C`. Values are decimal floats with 17 significant
//! digits so that writing, parsing and re-writing is byte-identical.

use std::io::Write as _;
use std::process::Command;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SdpaError {
    #[error("bad SDPA input at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// In-memory image of a sparse SDPA file.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpaFile {
    /// Number of constraints (the length of `bvec`).
    pub m: usize,
    /// Block sizes; negative means a diagonal block.
    pub blocks: Vec<i64>,
    pub bvec: Vec<f64>,
    /// `(constraint, block, i, j, value)`, 1-based indices, `i <= j`,
    /// constraint 0 denotes the constant matrix.
    pub entries: Vec<(usize, usize, usize, usize, f64)>,
}

/// 17 significant digits: round-trips every f64 exactly.
pub fn fmt17(v: f64) -> String {
    let s = format!("{:.16e}", v);
    // Rust renders exponents without a fixed width ("1e0"); keep as-is, the
    // reader accepts any float syntax.
    s
}

pub fn render_sdpa(f: &SdpaFile) -> String {
    let mut out = String::new();
    out.push_str(&format!("{}\n", f.m));
    out.push_str(&format!("{}\n", f.blocks.len()));
    let sizes: Vec<String> = f.blocks.iter().map(|b| b.to_string()).collect();
    out.push_str(&format!("{}\n", sizes.join(" ")));
    let bs: Vec<String> = f.bvec.iter().map(|&v| fmt17(v)).collect();
    out.push_str(&format!("{}\n", bs.join(" ")));
    for &(c, b, i, j, v) in &f.entries {
        out.push_str(&format!("{} {} {} {} {}\n", c, b, i, j, fmt17(v)));
    }
    out
}

pub fn parse_sdpa(text: &str) -> Result<SdpaFile, SdpaError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('"') && !l.starts_with('*'));
    let mut next = |what: &str| -> Result<(usize, &str), SdpaError> {
        lines.next().ok_or(SdpaError::Parse {
            line: 0,
            msg: format!("missing {}", what),
        })
    };
    let (ln, l) = next("constraint count")?;
    let m: usize = l.split_whitespace().next().unwrap_or("").parse().map_err(|_| {
        SdpaError::Parse { line: ln, msg: "bad constraint count".into() }
    })?;
    let (ln, l) = next("block count")?;
    let nblocks: usize = l.split_whitespace().next().unwrap_or("").parse().map_err(|_| {
        SdpaError::Parse { line: ln, msg: "bad block count".into() }
    })?;
    let (ln, l) = next("block sizes")?;
    let blocks: Vec<i64> = l
        .split(|c: char| c.is_whitespace() || c == ',' || c == '(' || c == ')' || c == '{' || c == '}')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<i64>())
        .collect::<Result<_, _>>()
        .map_err(|_| SdpaError::Parse { line: ln, msg: "bad block sizes".into() })?;
    if blocks.len() != nblocks {
        return Err(SdpaError::Parse {
            line: ln,
            msg: format!("expected {} block sizes, got {}", nblocks, blocks.len()),
        });
    }
    let (ln, l) = next("objective vector")?;
    let bvec: Vec<f64> = l
        .split(|c: char| c.is_whitespace() || c == ',' || c == '{' || c == '}')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| SdpaError::Parse { line: ln, msg: "bad objective vector".into() })?;
    if bvec.len() != m {
        return Err(SdpaError::Parse {
            line: ln,
            msg: format!("expected {} objective values, got {}", m, bvec.len()),
        });
    }
    let mut entries = Vec::new();
    for (ln, l) in lines {
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 5 {
            return Err(SdpaError::Parse {
                line: ln,
                msg: format!("expected 5 fields, got {}", toks.len()),
            });
        }
        let c: usize = toks[0].parse().map_err(|_| SdpaError::Parse { line: ln, msg: "bad constraint index".into() })?;
        let b: usize = toks[1].parse().map_err(|_| SdpaError::Parse { line: ln, msg: "bad block index".into() })?;
        let i: usize = toks[2].parse().map_err(|_| SdpaError::Parse { line: ln, msg: "bad row index".into() })?;
        let j: usize = toks[3].parse().map_err(|_| SdpaError::Parse { line: ln, msg: "bad column index".into() })?;
        let v: f64 = toks[4].parse().map_err(|_| SdpaError::Parse { line: ln, msg: "bad value".into() })?;
        if c > m || b == 0 || b > nblocks || i > j {
            return Err(SdpaError::Parse {
                line: ln,
                msg: "entry indices out of range (need constraint <= m, valid block, i <= j)".into(),
            });
        }
        entries.push((c, b, i, j, v));
    }
    Ok(SdpaFile { m, blocks, bvec, entries })
}

/// Result of handing the problem to an external SDPA-reading solver.
#[derive(Debug, Clone)]
pub enum SolverRun {
    /// The configured command could not be spawned.
    SolverUnavailable { cmd: String, error: String },
    /// Parsed primal objective and the diagonal values of the leading 1x1
    /// blocks of the matrix variable (our embedded scalar unknowns).
    Solved {
        objective: f64,
        leading_diagonal: Vec<f64>,
    },
    /// The solver ran but its output did not match the expected layout.
    ParseFailure { detail: String },
}

/// Runs `solver_cmd <input.dat-s> <output>` in a scratch directory and parses
/// an `objValPrimal = <v>` line plus the leading `yMat` diagonal. Intended
/// for SDPA-family solvers; the caller re-validates any solution it uses.
pub fn run_external_sdp(
    file: &SdpaFile,
    solver_cmd: &str,
    n_leading: usize,
) -> Result<SolverRun, SdpaError> {
    let dir = std::env::temp_dir().join(format!("martcert-sdp-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let inp = dir.join("problem.dat-s");
    let outp = dir.join("problem.out");
    let mut fh = std::fs::File::create(&inp)?;
    fh.write_all(render_sdpa(file).as_bytes())?;
    drop(fh);
    let mut parts = solver_cmd.split_whitespace();
    let prog = match parts.next() {
        Some(p) => p,
        None => {
            return Ok(SolverRun::SolverUnavailable {
                cmd: solver_cmd.into(),
                error: "empty command".into(),
            })
        }
    };
    let status = Command::new(prog)
        .args(parts)
        .arg(&inp)
        .arg(&outp)
        .output();
    let output = match status {
        Err(e) => {
            return Ok(SolverRun::SolverUnavailable {
                cmd: solver_cmd.into(),
                error: e.to_string(),
            })
        }
        Ok(o) => o,
    };
    let mut text = std::fs::read_to_string(&outp).unwrap_or_default();
    if text.is_empty() {
        text = String::from_utf8_lossy(&output.stdout).into_owned();
    }
    parse_solver_output(&text, n_leading)
}

/// Extracts `objValPrimal` and the first `n_leading` diagonal entries of the
/// matrix variable from solver output text.
pub fn parse_solver_output(text: &str, n_leading: usize) -> Result<SolverRun, SdpaError> {
    let obj = text.lines().find_map(|l| {
        let l = l.trim();
        let rest = l.strip_prefix("objValPrimal")?;
        let rest = rest.trim_start_matches(|c: char| c == '=' || c.is_whitespace());
        rest.split_whitespace().next()?.parse::<f64>().ok()
    });
    let objective = match obj {
        Some(v) => v,
        None => {
            return Ok(SolverRun::ParseFailure {
                detail: "no objValPrimal line found".into(),
            })
        }
    };
    // yMat is printed as nested braces of floats; the leading 1x1 blocks come
    // first, so the first n_leading numbers after the marker are what we need.
    let diag: Vec<f64> = match text.find("yMat") {
        None => Vec::new(),
        Some(pos) => text[pos..]
            .split(|c: char| !(c.is_ascii_digit() || c == '.' || c == '-' || c == '+' || c == 'e' || c == 'E'))
            .filter(|t| !t.is_empty() && t.parse::<f64>().is_ok())
            .take(n_leading)
            .map(|t| t.parse::<f64>().unwrap())
            .collect(),
    };
    if diag.len() < n_leading {
        return Ok(SolverRun::ParseFailure {
            detail: format!(
                "expected {} leading diagonal values, found {}",
                n_leading,
                diag.len()
            ),
        });
    }
    Ok(SolverRun::Solved {
        objective,
        leading_diagonal: diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> SdpaFile {
        SdpaFile {
            m: 2,
            blocks: vec![2, -2],
            bvec: vec![1.0, 0.5],
            entries: vec![
                (0, 1, 1, 1, 1.0),
                (1, 1, 1, 2, 0.5),
                (2, 2, 1, 1, -1.0),
                (2, 2, 2, 2, 0.3333333333333333),
            ],
        }
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let f = toy();
        let text = render_sdpa(&f);
        let g = parse_sdpa(&text).unwrap();
        assert_eq!(f, g);
        assert_eq!(render_sdpa(&g), text);
    }

    #[test]
    fn rejects_malformed_entries() {
        let text = "1\n1\n2\n1.0\n1 1 2 1 5.0\n"; // i > j
        assert!(parse_sdpa(text).is_err());
    }

    #[test]
    fn missing_solver_reports_unavailable() {
        let f = toy();
        let r = run_external_sdp(&f, "definitely-not-a-solver-binary-xyz", 0).unwrap();
        assert!(matches!(r, SolverRun::SolverUnavailable { .. }));
    }

    #[test]
    fn parses_solver_style_output() {
        let text = "phase.value = pdOPT\nobjValPrimal = 1.25e0\nobjValDual = 1.24\nyMat = \n{ {0.5}, {0.25}, { {1.0, 0.0}, {0.0, 2.0} } }\n";
        match parse_solver_output(text, 2).unwrap() {
            SolverRun::Solved { objective, leading_diagonal } => {
                assert_eq!(objective, 1.25);
                assert_eq!(leading_diagonal, vec![0.5, 0.25]);
            }
            other => panic!("unexpected {:?}", other),
        }
    }
}
