//! Command-line driver: `reduce`, `verify` and `bracket`.
//!
//! Exit codes: 0 pass, 2 parse or usage, 3 shape, 4 tolerance,
//! 5 non-generic parameters.

pub mod config;
pub mod input;
pub mod report;
pub mod suites;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::RunConfig;
pub use report::{Check, Report};
pub use suites::{run_suite, Suite, SuiteOptions};

use crate::error::{Error, Result};
use crate::loopfin::{companion_u, gauge, random_yn, reduce_finite, LoopMatrix};
use crate::poisson::{bracket_at, Preset, QuadOperatorSpec};
use crate::psido::FunctionalSpec;
use crate::reduction::{effective_reg, random_yq, reduce_universal, verify_gauge, YqElement};
use input::{OperatorInput, ReduceInput};
use report::{fmt_c64, fmt_f64, fmt_series, fmt_str};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_SHAPE: i32 = 3;
pub const EXIT_TOLERANCE: i32 = 4;
pub const EXIT_NON_GENERIC: i32 = 5;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) => EXIT_PARSE,
        Error::Shape(_) | Error::DegreeMismatch(_) | Error::EmptyWindow { .. } | Error::Truncation(_) => EXIT_SHAPE,
        Error::CutoffExceeded { .. } => EXIT_SHAPE,
        Error::Tolerance(_) | Error::Consistency { .. } => EXIT_TOLERANCE,
        Error::NonGenericParameter(_) | Error::ZeroLambda => EXIT_NON_GENERIC,
    }
}

#[derive(Debug, Parser)]
#[command(name = "qdsred", version, about = "q-deformed Drinfeld-Sokolov reduction and its checks")]
pub struct Cli {
    /// TOML run configuration (`format = 1`).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Writes the report here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Overrides one named tolerance; repeatable.
    #[arg(long = "tolerance", global = true, value_name = "NAME=VAL", value_parser = parse_tolerance)]
    pub tolerance: Vec<(String, f64)>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gauge an element of Y_n or Y_q into companion form.
    Reduce {
        /// Input file; see the `input` module for the schema.
        input: PathBuf,
    },
    /// Run a verification suite.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        /// Nonzero delta for the involutivity suite; its residual must then be seen.
        #[arg(long, value_name = "DELTA")]
        inject_delta: Option<f64>,
    },
    /// Evaluate {phi, psi} at an operator L.
    Bracket {
        /// `H<m>` or `zeta:<i>:<j>`.
        #[arg(long)]
        phi: String,
        #[arg(long)]
        psi: String,
        #[arg(long = "l-file", value_name = "PATH")]
        l_file: PathBuf,
        /// e, e161, f48 or raw.
        #[arg(long, default_value = "e")]
        preset: String,
    },
}

fn parse_tolerance(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected NAME=VAL, got {s:?}"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("{v:?}: {e}"))?;
    Ok((k.trim().to_string(), v))
}

/// `H<m>` or `zeta:<i>:<j>`.
pub fn parse_functional(s: &str) -> Result<FunctionalSpec> {
    let bad = || Error::Parse(format!("functional {s:?}; expected H<m> or zeta:<i>:<j>"));
    if let Some(m) = s.strip_prefix('H') {
        let m: u32 = m.parse().map_err(|_| bad())?;
        if m == 0 {
            return Err(bad());
        }
        return Ok(FunctionalSpec::Spectral { m });
    }
    let mut it = s.split(':');
    match (it.next(), it.next(), it.next(), it.next()) {
        (Some("zeta"), Some(i), Some(j), None) => Ok(FunctionalSpec::Elementary {
            i: i.parse().map_err(|_| bad())?,
            j: j.parse().map_err(|_| bad())?,
        }),
        _ => Err(bad()),
    }
}

/// Effective configuration: file, then `--seed` and `--tolerance`.
pub fn resolve_config(path: Option<&Path>, seed: Option<u64>, tols: &[(String, f64)]) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    for (k, v) in tols {
        cfg.set_tolerance(k, *v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn config_table(cfg: &RunConfig) -> Vec<(String, String)> {
    vec![
        ("q".into(), fmt_c64(cfg.q)),
        ("lambda".into(), fmt_c64(cfg.lambda)),
        ("z_window".into(), format!("[{}, {}]", cfg.z_window.0, cfg.z_window.1)),
        ("d_max".into(), cfg.d_max.to_string()),
        ("seed".into(), cfg.seed.to_string()),
        ("epsilon_generic".into(), fmt_f64(cfg.epsilon_generic)),
    ]
}

pub fn cmd_verify(suite: Suite, cfg: &RunConfig, opts: &SuiteOptions) -> Result<Report> {
    let mut r = Report::new("verify");
    r.set("suite", fmt_str(&suite.name()));
    if let Some(d) = opts.inject_delta {
        r.set("inject_delta", fmt_f64(d));
    }
    r.table("config", config_table(cfg));
    r.extend(run_suite(suite, cfg, opts)?);
    Ok(r)
}

fn finite_report(r: &mut Report, l: &LoopMatrix, cfg: &RunConfig) -> Result<()> {
    let (comp, t) = reduce_finite(l, cfg.q)?;
    let n = l.n();
    r.set("n", n.to_string());
    let u = companion_u(&comp);
    r.table("companion", u.iter().enumerate().map(|(i, s)| (format!("u{}", i + 1), fmt_series(s))).collect());
    let mut g = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            g.push((format!("t_{i}_{j}"), fmt_series(t.get(i, j))));
        }
    }
    r.table("gauge", g);
    let res = gauge(&t, l, cfg.q)?.max_diff(&comp);
    r.check(Check::below("reduce.gauge_residual", res, cfg.tol("reduce")));
    Ok(())
}

fn universal_report(r: &mut Report, l: &YqElement, cfg: &RunConfig) -> Result<()> {
    let (q, d) = (cfg.q, cfg.d_max);
    let red = reduce_universal(l, d, q, cfg.epsilon_generic)?;
    r.set("reg", l.reg().to_string());
    r.set("d_max", d.to_string());
    // u_i(t, z) as [z, a, b, re, im] for c t^a q^{bt} z^m
    let rows = red
        .companion
        .u
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let mut terms = Vec::new();
            for (m, c) in f.iter() {
                for ((a, b), v) in c.terms() {
                    terms.push(format!("[{m}, {a}, {b}, {}, {}]", fmt_f64(v.re), fmt_f64(v.im)));
                }
            }
            (format!("u{}", i + 1), format!("[{}]", terms.join(", ")))
        })
        .collect();
    r.table("companion", rows);
    let at = red.companion.eval_at(cfg.lambda, q);
    r.table("companion_at_lambda", at.iter().enumerate().map(|(i, s)| (format!("u{}", i + 1), fmt_series(s))).collect());
    let res = verify_gauge(&red.gauge, l, &red.companion, d, q)?;
    r.table("gauge_residual", res.iter().map(|(k, v)| (format!("diagonal_{}", k).replace('-', "m"), fmt_f64(*v))).collect());
    let tol = cfg.tol("reduce");
    r.table(
        "gauge",
        vec![
            ("effective_reg".into(), effective_reg(&red.gauge, q, tol).to_string()),
            ("consistency".into(), fmt_f64(red.consistency)),
        ],
    );
    r.check(Check::below("reduce.gauge_residual", res.values().fold(0.0, |a, b| a.max(*b)), tol));
    r.check(Check::below("reduce.consistency", red.consistency, cfg.tol("consistency")));
    Ok(())
}

pub fn cmd_reduce(input: &ReduceInput, cfg: &RunConfig) -> Result<Report> {
    let mut r = Report::new("reduce");
    r.table("config", config_table(cfg));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (zlo, zhi) = cfg.z_window;
    match input {
        ReduceInput::Finite(l) => {
            r.set("kind", fmt_str("finite"));
            finite_report(&mut r, l, cfg)?;
        }
        ReduceInput::RandomFinite { n } => {
            r.set("kind", fmt_str("random-finite"));
            let l = random_yn(&mut rng, *n, zlo.abs().max(zhi.abs()), 1.0);
            finite_report(&mut r, &l, cfg)?;
        }
        ReduceInput::Universal(m) => {
            r.set("kind", fmt_str("universal"));
            universal_report(&mut r, &YqElement::new(m.clone(), cfg.q)?, cfg)?;
        }
        ReduceInput::RandomUniversal { reg } => {
            r.set("kind", fmt_str("random-universal"));
            let l = random_yq(&mut rng, (*reg).max(1), cfg.d_max as i64 - 1, 0, zlo, zhi, 0.1, cfg.q)?;
            universal_report(&mut r, &l, cfg)?;
        }
    }
    Ok(r)
}

pub fn cmd_bracket(phi: &str, psi: &str, op: &OperatorInput, preset: &str, cfg: &RunConfig) -> Result<Report> {
    let (q, eps) = (cfg.q, cfg.epsilon_generic);
    let f = parse_functional(phi)?;
    let g = parse_functional(psi)?;
    let preset = Preset::parse(preset)?;
    let n = op.u.len();
    let lambda = match (op.lambda, preset) {
        (Some(l), _) => l,
        (None, Preset::F48) => cfg.lambda,
        (None, _) => crate::laurent::c64(n as f64, 0.0),
    };
    let spec = match preset {
        Preset::E => QuadOperatorSpec::e(n),
        Preset::E161 => QuadOperatorSpec::e161(n, op.delta.clone())?,
        Preset::F48 => QuadOperatorSpec::f48(lambda, op.delta.clone())?,
        Preset::Raw => QuadOperatorSpec::raw(op.raw.clone())?,
    };
    if matches!(preset, Preset::E | Preset::E161) && (lambda - crate::laurent::c64(n as f64, 0.0)).norm() != 0.0 {
        return Err(Error::Shape(format!("preset {} needs lambda = n = {n}", preset.name())));
    }
    let v = bracket_at(&op.u, lambda, &f, &g, &spec, q, eps)?;
    let w = bracket_at(&op.u, lambda, &g, &f, &spec, q, eps)?;
    let mut r = Report::new("bracket");
    r.set("preset", fmt_str(preset.name()));
    r.set("phi", fmt_str(phi));
    r.set("psi", fmt_str(psi));
    r.set("lambda", fmt_c64(lambda));
    r.set("value", fmt_c64(v));
    r.table("config", config_table(cfg));
    r.check(Check::below("bracket.skew", (v + w).norm(), cfg.tol("bracket_skew")));
    Ok(r)
}

fn execute(cli: &Cli) -> Result<Report> {
    let cfg = resolve_config(cli.config.as_deref(), cli.seed, &cli.tolerance)?;
    match &cli.command {
        Command::Reduce { input } => cmd_reduce(&ReduceInput::load(input, cfg.q)?, &cfg),
        Command::Verify { suite, inject_delta } => {
            cmd_verify(*suite, &cfg, &SuiteOptions { inject_delta: *inject_delta })
        }
        Command::Bracket { phi, psi, l_file, preset } => {
            cmd_bracket(phi, psi, &OperatorInput::load(l_file)?, preset, &cfg)
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_PARSE } else { EXIT_PASS };
        }
    };
    let report = match execute(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let text = report.render();
    match &cli.out {
        Some(p) => {
            if let Err(e) = std::fs::write(p, &text) {
                eprintln!("error: {}: {e}", p.display());
                return EXIT_PARSE;
            }
            for line in report.summary_lines() {
                println!("{line}");
            }
        }
        None => print!("{text}"),
    }
    if report.passed() { EXIT_PASS } else { EXIT_TOLERANCE }
}
