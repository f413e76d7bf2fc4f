//! External SMT solver driver: writes a script file, launches the solver as
//! a subprocess with a wall-clock timeout, classifies the verdict, and
//! decodes counterexample models to exact rationals.
//!
//! The solver is configured by a command template with `{file}`,
//! `{timeout_ms}` and `{timeout_s}` placeholders, so anything that speaks
//! SMT-LIB2 over QF_LRA works. The default resolution order: the
//! `FNOVERIFY_SOLVER_CMD` environment variable, a native `z3` on PATH, then
//! the bundled z3 WebAssembly wrapper under `tools/z3smt2.js`.
//!
//! A solver that self-reports `unknown` after consuming at least 90% of its
//! budget is classified as a timeout: Z3's internal timeout surfaces as
//! `unknown` in some builds and as `timeout` in others.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::field::{Field, Grid};
use crate::rational::{rat_from_decimal, rat_to_f64, Rat};
use crate::smt::SmtScript;

/// Solver invocation template.
#[derive(Debug, Clone)]
pub struct SolverCmd {
    argv: Vec<String>,
}

impl SolverCmd {
    /// Parse a whitespace-separated template; it must mention `{file}`.
    pub fn parse(template: &str) -> Result<Self> {
        let argv: Vec<String> = template.split_whitespace().map(|s| s.to_string()).collect();
        if argv.is_empty() {
            return Err(Error::Config("empty solver command".into()));
        }
        if !argv.iter().any(|a| a.contains("{file}")) {
            return Err(Error::Config(format!(
                "solver command {template:?} has no {{file}} placeholder"
            )));
        }
        Ok(SolverCmd { argv })
    }

    /// Resolve a config value: an explicit template, or "auto" detection.
    pub fn resolve(spec: &str) -> Result<Self> {
        if spec != "auto" {
            return Self::parse(spec);
        }
        if let Ok(tpl) = std::env::var("FNOVERIFY_SOLVER_CMD") {
            return Self::parse(&tpl);
        }
        if binary_works("z3", &["-version"]) {
            return Self::parse("z3 -smt2 -T:{timeout_s} {file}");
        }
        if let Some(wrapper) = find_wasm_wrapper() {
            if binary_works("node", &["--version"]) {
                return Self::parse(&format!("node {} {{file}} {{timeout_ms}}", wrapper.display()));
            }
        }
        Err(Error::Config(
            "no SMT solver found: install z3 on PATH, or run `npm install` in tools/ \
             to set up the bundled z3 WebAssembly build, or set FNOVERIFY_SOLVER_CMD \
             (e.g. \"z3 -smt2 {file}\")"
                .into(),
        ))
    }

    fn has_internal_timeout(&self) -> bool {
        self.argv.iter().any(|a| a.contains("{timeout_ms}") || a.contains("{timeout_s}"))
    }

    fn materialize(&self, file: &Path, timeout: Duration) -> Vec<String> {
        let ms = timeout.as_millis().max(1).to_string();
        let s = timeout.as_secs_f64().ceil().max(1.0) as u64;
        self.argv
            .iter()
            .map(|a| {
                a.replace("{file}", &file.display().to_string())
                    .replace("{timeout_ms}", &ms)
                    .replace("{timeout_s}", &s.to_string())
            })
            .collect()
    }
}

fn binary_works(name: &str, args: &[&str]) -> bool {
    Command::new(name)
        .args(args)
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

/// Look for tools/z3smt2.js next to the current dir, its ancestors, or the
/// executable's ancestors.
fn find_wasm_wrapper() -> Option<PathBuf> {
    let mut roots: Vec<PathBuf> = Vec::new();
    if let Ok(cwd) = std::env::current_dir() {
        roots.push(cwd);
    }
    if let Ok(exe) = std::env::current_exe() {
        roots.push(exe);
    }
    for root in roots {
        let mut dir: Option<&Path> = Some(root.as_path());
        while let Some(d) = dir {
            let candidate = d.join("tools").join("z3smt2.js");
            if candidate.is_file() {
                return Some(candidate);
            }
            dir = d.parent();
        }
    }
    None
}

/// Raw classification of one solver run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Sat,
    Unsat,
    Unknown,
    Timeout,
    Error,
}

/// Everything captured from one solver invocation.
#[derive(Debug, Clone)]
pub struct SolverOutcome {
    pub status: SolverStatus,
    /// Present exactly when status is Sat.
    pub model: Option<BTreeMap<String, Rat>>,
    pub wall_time: Duration,
    pub raw: String,
}

/// Write the script beside-run and execute the solver on it.
pub fn run_solver(
    script: &SmtScript,
    cmd: &SolverCmd,
    timeout: Duration,
    smt2_path: &Path,
) -> Result<SolverOutcome> {
    std::fs::write(smt2_path, &script.text)?;
    let argv = cmd.materialize(smt2_path, timeout);
    let start = Instant::now();
    let mut child = Command::new(&argv[0])
        .args(&argv[1..])
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::Solver(format!("failed to spawn {:?}: {e}", argv[0])))?;

    let stdout = spawn_reader(child.stdout.take());
    let stderr = spawn_reader(child.stderr.take());

    // Let a solver with an internal timeout finish printing its own verdict
    // before the hard kill.
    let grace = if cmd.has_internal_timeout() { Duration::from_secs(10) } else { Duration::ZERO };
    let deadline = start + timeout + grace;
    let mut killed = false;
    let exit = loop {
        match child.try_wait()? {
            Some(status) => break status,
            None => {
                if Instant::now() >= deadline {
                    kill_and_reap(&mut child)?;
                    killed = true;
                    break child.wait()?;
                }
                std::thread::sleep(Duration::from_millis(5));
            }
        }
    };
    let wall_time = start.elapsed();
    let out_text = stdout.join().unwrap_or_default();
    let err_text = stderr.join().unwrap_or_default();
    let raw = if err_text.is_empty() {
        out_text.clone()
    } else {
        format!("{out_text}\n--- stderr ---\n{err_text}")
    };

    let mut status = match first_status_token(&out_text) {
        Some("sat") => SolverStatus::Sat,
        Some("unsat") => SolverStatus::Unsat,
        Some("unknown") => SolverStatus::Unknown,
        Some("timeout") => SolverStatus::Timeout,
        _ if killed => SolverStatus::Timeout,
        _ => SolverStatus::Error,
    };
    if killed && status == SolverStatus::Unknown {
        status = SolverStatus::Timeout;
    }
    // An internal solver timeout often surfaces as a fast `unknown`.
    if status == SolverStatus::Unknown && wall_time.as_secs_f64() >= 0.9 * timeout.as_secs_f64() {
        status = SolverStatus::Timeout;
    }
    if status == SolverStatus::Error && !exit.success() {
        return Ok(SolverOutcome { status, model: None, wall_time, raw });
    }

    let model = if status == SolverStatus::Sat {
        Some(parse_model(&out_text).map_err(|e| Error::SolverProtocol {
            reason: format!("sat without a parseable model: {e}"),
            raw: raw.clone(),
        })?)
    } else {
        None
    };
    Ok(SolverOutcome { status, model, wall_time, raw })
}

fn spawn_reader<R: Read + Send + 'static>(
    src: Option<R>,
) -> std::thread::JoinHandle<String> {
    std::thread::spawn(move || {
        let mut buf = String::new();
        if let Some(mut r) = src {
            let _ = r.read_to_string(&mut buf);
        }
        buf
    })
}

fn kill_and_reap(child: &mut Child) -> Result<()> {
    // kill() on an already-dead child is fine; wait() reaps either way.
    let _ = child.kill();
    Ok(())
}

/// First line that is exactly a status token; chatter lines are skipped.
fn first_status_token(text: &str) -> Option<&str> {
    text.lines()
        .map(str::trim)
        .find(|l| matches!(*l, "sat" | "unsat" | "unknown" | "timeout"))
}

// ---------------------------------------------------------------------------
// S-expression model parsing.

#[derive(Debug, Clone, PartialEq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            ';' => {
                // Comment to end of line.
                for c2 in chars.by_ref() {
                    if c2 == '\n' {
                        break;
                    }
                }
            }
            '(' | ')' => {
                if !cur.is_empty() {
                    tokens.push(std::mem::take(&mut cur));
                }
                tokens.push(c.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    tokens.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

fn parse_sexp(tokens: &[String], pos: &mut usize) -> Result<Sexp> {
    if *pos >= tokens.len() {
        return Err(Error::Parse("unexpected end of solver output".into()));
    }
    let tok = &tokens[*pos];
    *pos += 1;
    match tok.as_str() {
        "(" => {
            let mut items = Vec::new();
            loop {
                if *pos >= tokens.len() {
                    return Err(Error::Parse("unbalanced parenthesis in solver output".into()));
                }
                if tokens[*pos] == ")" {
                    *pos += 1;
                    return Ok(Sexp::List(items));
                }
                items.push(parse_sexp(tokens, pos)?);
            }
        }
        ")" => Err(Error::Parse("unexpected ')'".into())),
        atom => Ok(Sexp::Atom(atom.to_string())),
    }
}

/// Parse one s-expression from text.
pub fn parse_sexp_text(text: &str) -> Result<Sexp> {
    let tokens = tokenize(text);
    let mut pos = 0;
    parse_sexp(&tokens, &mut pos)
}

/// Exact rational from an SMT-LIB value term: numerals, decimals,
/// `(/ p q)`, and `(- t)` in any nesting.
pub fn parse_rational(term: &Sexp) -> Result<Rat> {
    match term {
        Sexp::Atom(a) => {
            if let Ok(i) = a.parse::<BigInt>() {
                return Ok(Rat::from_integer(i));
            }
            rat_from_decimal(a)
        }
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(op), x] if op == "-" => Ok(-parse_rational(x)?),
            [Sexp::Atom(op), a, b] if op == "/" => {
                let num = parse_rational(a)?;
                let den = parse_rational(b)?;
                if den.is_zero() {
                    return Err(Error::Parse("division by zero in model value".into()));
                }
                Ok(num / den)
            }
            _ => Err(Error::Parse(format!("unsupported value term {term:?}"))),
        },
    }
}

/// Parse a get-value response: the first balanced s-expression after the
/// status line, a list of (name value) pairs.
fn parse_model(stdout: &str) -> Result<BTreeMap<String, Rat>> {
    let mut lines = stdout.lines();
    for line in lines.by_ref() {
        if line.trim() == "sat" {
            break;
        }
    }
    let rest: String = lines.collect::<Vec<_>>().join("\n");
    let start = rest
        .find('(')
        .ok_or_else(|| Error::Parse("no model s-expression after sat".into()))?;
    let sexp = parse_sexp_text(&rest[start..])?;
    let Sexp::List(pairs) = sexp else {
        return Err(Error::Parse("model is not a list".into()));
    };
    let mut model = BTreeMap::new();
    for pair in pairs {
        let Sexp::List(items) = &pair else {
            return Err(Error::Parse(format!("model entry is not a pair: {pair:?}")));
        };
        let [Sexp::Atom(name), value] = items.as_slice() else {
            return Err(Error::Parse(format!("model entry is not (name value): {pair:?}")));
        };
        model.insert(name.clone(), parse_rational(value)?);
    }
    Ok(model)
}

/// Order model values by the script's variable map into a field, keeping
/// the exact rationals alongside the binary64 rendering.
pub fn decode_counterexample(
    outcome: &SolverOutcome,
    var_map: &[String],
    grid: Grid,
) -> Result<(Field, Vec<Rat>)> {
    let model = outcome.model.as_ref().ok_or_else(|| Error::SolverProtocol {
        reason: "no model on a non-sat outcome".into(),
        raw: outcome.raw.clone(),
    })?;
    let mut rats = Vec::with_capacity(var_map.len());
    for name in var_map {
        let value = model.get(name).ok_or_else(|| Error::SolverProtocol {
            reason: format!("model is missing variable {name}"),
            raw: outcome.raw.clone(),
        })?;
        rats.push(value.clone());
    }
    let field = Field::new(grid, rats.iter().map(rat_to_f64).collect())?;
    Ok((field, rats))
}
