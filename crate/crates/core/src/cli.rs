//! Command-line front end.
//!
//! Exit codes: 0 success, 1 a verification contract failed, 2 invalid input.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::bubble::{eval_bubble, BubbleSpec};
use crate::config::{load_config, BRule, ConfigValues, Format, Suite};
use crate::cylfield::fmt17;
use crate::error::{Error, Result};
use crate::grid::{DEFAULT_COUNT, DEFAULT_R_MAX, DEFAULT_R_MIN};
use crate::params::{derive_params, ParamSet};
use crate::radial_ode::{match_bubble, shoot, BubbleMatch, Classification};
use crate::spectral::{fs_crossing, lowest_eigenvalue, path_point, Crossing, SectorOperator};
use crate::suites::{default_alpha_range, run_suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONTRACT: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ckn-lab", version, about = "Numerical laboratory for the CKN critical equation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    #[arg(long)]
    pub d: Option<u32>,
    /// Intrinsic dimension (spectrum and verify --suite spectrum).
    #[arg(long)]
    pub n: Option<f64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_parser = parse_format)]
    pub format: Option<Format>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Radial node count.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Angular node count for d = 2 fields.
    #[arg(long)]
    pub angular: Option<usize>,
    /// Refinement levels.
    #[arg(long)]
    pub refine: Option<u32>,
    /// `key = value` file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_format(s: &str) -> std::result::Result<Format, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_suite(s: &str) -> std::result::Result<Suite, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_b_rule(s: &str) -> std::result::Result<BRule, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derived quantities of an (a, b, d) triple as JSON.
    Params(Common),
    /// Regime table along a line in the (a, b) plane.
    Scan {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        a_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        a_max: Option<f64>,
        #[arg(long)]
        a_step: Option<f64>,
        /// `a+c`, `a-c`, `a` or a fixed number.
        #[arg(long, value_parser = parse_b_rule, allow_hyphen_values = true)]
        b_rule: Option<BRule>,
    },
    /// Samples of the explicit extremal, (r, u).
    Bubble {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Radial shooting from w(0) = w0.
    Shoot {
        #[command(flatten)]
        common: Common,
        /// Amplitude at the origin; the extremal's value when absent.
        #[arg(long)]
        w0: Option<f64>,
        #[arg(long)]
        s_max: Option<f64>,
    },
    /// Lowest sector eigenvalues along the fixed-(d, n) path, and the crossing.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        alpha_min: Option<f64>,
        #[arg(long)]
        alpha_max: Option<f64>,
        #[arg(long)]
        alpha_steps: Option<usize>,
        #[arg(long)]
        k_max: Option<u32>,
    },
    /// Runs a verification suite; exit 1 when a contract fails.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_suite)]
        suite: Option<Suite>,
        /// Random fields in the identity suite.
        #[arg(long)]
        fields: Option<usize>,
    },
}

impl Common {
    fn values(&self) -> ConfigValues {
        ConfigValues {
            a: self.a,
            b: self.b,
            d: self.d,
            n: self.n,
            out: self.out.clone(),
            format: self.format,
            seed: self.seed,
            grid: self.grid,
            angular: self.angular,
            refine: self.refine,
            ..Default::default()
        }
    }
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Params(c) => c,
            Command::Scan { common, .. }
            | Command::Bubble { common, .. }
            | Command::Shoot { common, .. }
            | Command::Spectrum { common, .. }
            | Command::Verify { common, .. } => common,
        }
    }

    /// Flag values only.
    fn flag_values(&self) -> ConfigValues {
        let mut v = self.common().values();
        match self {
            Command::Params(_) => {}
            Command::Scan { a_min, a_max, a_step, b_rule, .. } => {
                v.a_min = *a_min;
                v.a_max = *a_max;
                v.a_step = *a_step;
                v.b_rule = *b_rule;
            }
            Command::Bubble { lambda, .. } => v.lambda = *lambda,
            Command::Shoot { w0, s_max, .. } => {
                v.w0 = *w0;
                v.s_max = *s_max;
            }
            Command::Spectrum { alpha_min, alpha_max, alpha_steps, k_max, .. } => {
                v.alpha_min = *alpha_min;
                v.alpha_max = *alpha_max;
                v.alpha_steps = *alpha_steps;
                v.k_max = *k_max;
            }
            Command::Verify { suite, fields, .. } => {
                v.suite = *suite;
                v.fields = *fields;
            }
        }
        v
    }

    /// Config file values with flags layered on top.
    pub fn resolve(&self) -> Result<ConfigValues> {
        let flags = self.flag_values();
        match &self.common().config {
            Some(path) => Ok(load_config(path)?.overlay(flags)),
            None => Ok(flags),
        }
    }
}

/// What a command produced: the main payload, an optional JSON side record,
/// and whether every contract held.
struct Output {
    main: String,
    record: Option<String>,
    passed: bool,
}

fn triple(cfg: &ConfigValues) -> Result<ParamSet> {
    match (cfg.a, cfg.b, cfg.d) {
        (Some(a), Some(b), Some(d)) => derive_params(a, b, d),
        _ => Err(Error::InvalidInput("--a, --b and --d are required".into())),
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("outputs serialize");
    s.push('\n');
    s
}

fn cmd_params(cfg: &ConfigValues) -> Result<Output> {
    let ps = triple(cfg)?;
    Ok(Output {
        main: json(&ps),
        record: None,
        passed: true,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub a: f64,
    pub b: f64,
    pub p: Option<f64>,
    pub alpha: Option<f64>,
    pub n: Option<f64>,
    pub fs_threshold: Option<f64>,
    pub regime: String,
}

pub fn scan_rows(d: u32, a_min: f64, a_max: f64, a_step: f64, rule: BRule) -> Result<Vec<ScanRow>> {
    if !(a_min <= a_max) || (a_max > a_min && !(a_step > 0.0)) {
        return Err(Error::EmptyScan);
    }
    let count = if a_max > a_min { ((a_max - a_min) / a_step + 1e-9).floor() as usize + 1 } else { 1 };
    if count > 10_000_000 {
        return Err(Error::InvalidInput(format!("scan of {count} points is too large")));
    }
    let rows: Vec<ScanRow> = (0..count)
        .into_par_iter()
        .map(|k| {
            let a = a_min + k as f64 * a_step;
            let b = rule.apply(a);
            match derive_params(a, b, d) {
                Ok(ps) => ScanRow {
                    a,
                    b,
                    p: Some(ps.p_exp),
                    alpha: Some(ps.alpha),
                    n: Some(ps.n),
                    fs_threshold: Some(ps.fs_threshold),
                    regime: format!("{:?}", ps.regime),
                },
                Err(_) => ScanRow {
                    a,
                    b,
                    p: None,
                    alpha: None,
                    n: None,
                    fs_threshold: None,
                    regime: "excluded".into(),
                },
            }
        })
        .collect();
    if rows.is_empty() {
        return Err(Error::EmptyScan);
    }
    Ok(rows)
}

fn opt17(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

fn cmd_scan(cfg: &ConfigValues, format: Format) -> Result<Output> {
    let d = cfg.d.ok_or_else(|| Error::InvalidInput("--d is required".into()))?;
    let a_min = cfg.a_min.or(cfg.a).ok_or_else(|| Error::InvalidInput("--a-min (or --a) is required".into()))?;
    let a_max = cfg.a_max.unwrap_or(a_min);
    let step = cfg.a_step.unwrap_or(0.01);
    let rule = cfg.b_rule.or(cfg.b.map(BRule::Fixed)).unwrap_or(BRule::Offset(0.0));
    let rows = scan_rows(d, a_min, a_max, step, rule)?;
    let main = match format {
        Format::Json => json(&rows),
        Format::Csv => {
            let mut s = String::from("a,b,p,alpha,n,fs_threshold,regime\n");
            for r in &rows {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    fmt17(r.a),
                    fmt17(r.b),
                    opt17(r.p),
                    opt17(r.alpha),
                    opt17(r.n),
                    opt17(r.fs_threshold),
                    r.regime
                ));
            }
            s
        }
    };
    Ok(Output {
        main,
        record: None,
        passed: true,
    })
}

fn cmd_bubble(cfg: &ConfigValues, format: Format) -> Result<Output> {
    let ps = triple(cfg)?;
    let spec = BubbleSpec::new(&ps, cfg.lambda.unwrap_or(1.0))?;
    let count = cfg.grid.unwrap_or(DEFAULT_COUNT);
    let grid = crate::grid::RadialGrid::new(DEFAULT_R_MIN, DEFAULT_R_MAX, count)?;
    let samples: Vec<(f64, f64)> = grid.nodes().iter().map(|&r| (r, eval_bubble(&spec, r))).collect();
    let main = match format {
        Format::Json => {
            #[derive(Serialize)]
            struct Record<'a> {
                params: &'a ParamSet,
                c0: f64,
                lambda: f64,
                r: Vec<f64>,
                u: Vec<f64>,
            }
            json(&Record {
                params: &ps,
                c0: spec.c0,
                lambda: spec.lambda,
                r: samples.iter().map(|p| p.0).collect(),
                u: samples.iter().map(|p| p.1).collect(),
            })
        }
        Format::Csv => {
            let mut s = String::from("r,u\n");
            for (r, u) in samples {
                s.push_str(&format!("{},{}\n", fmt17(r), fmt17(u)));
            }
            s
        }
    };
    Ok(Output {
        main,
        record: None,
        passed: true,
    })
}

#[derive(Serialize)]
struct ShootRecord {
    params: ParamSet,
    w0: f64,
    s_max: f64,
    classification: Classification,
    energy_drift: f64,
    samples: usize,
    bubble_match: Option<BubbleMatch>,
}

fn cmd_shoot(cfg: &ConfigValues, format: Format) -> Result<Output> {
    let ps = triple(cfg)?;
    let w0 = match cfg.w0 {
        Some(w) => w,
        None => crate::bubble::bubble_prefactor(&ps),
    };
    let s_max = cfg.s_max.unwrap_or(1e3);
    let prof = shoot(&ps, w0, s_max)?;
    let record = ShootRecord {
        params: ps,
        w0,
        s_max,
        classification: prof.classification,
        energy_drift: prof.energy_drift,
        samples: prof.samples.len(),
        bubble_match: match_bubble(&prof).ok(),
    };
    Ok(match format {
        Format::Json => {
            #[derive(Serialize)]
            struct Full<'a> {
                record: &'a ShootRecord,
                samples: &'a [crate::radial_ode::ProfileSample],
            }
            Output {
                main: json(&Full {
                    record: &record,
                    samples: &prof.samples,
                }),
                record: None,
                passed: true,
            }
        }
        Format::Csv => {
            let mut buf = Vec::new();
            prof.write_csv(&mut buf)?;
            Output {
                main: String::from_utf8(buf).expect("csv is utf-8"),
                record: Some(json(&record)),
                passed: true,
            }
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub alpha: f64,
    pub k: u32,
    pub lowest_eigenvalue: f64,
}

#[derive(Serialize)]
struct SpectrumSummary {
    d: u32,
    n: f64,
    alpha_range: (f64, f64),
    crossing: Option<Crossing>,
    crossing_error: Option<String>,
}

fn cmd_spectrum(cfg: &ConfigValues, format: Format) -> Result<Output> {
    let d = cfg.d.ok_or_else(|| Error::InvalidInput("--d is required".into()))?;
    let n = cfg.n.ok_or_else(|| Error::InvalidInput("--n is required".into()))?;
    if !(n > 2.0 && n.is_finite()) {
        return Err(Error::InvalidInput(format!("n={n} must exceed 2")));
    }
    let (lo, hi) = default_alpha_range(d, n);
    let range = (cfg.alpha_min.unwrap_or(lo), cfg.alpha_max.unwrap_or(hi));
    let steps = cfg.alpha_steps.unwrap_or(9).max(1);
    let k_max = cfg.k_max.unwrap_or(2);
    let alphas: Vec<f64> = (0..steps)
        .map(|i| {
            if steps == 1 {
                range.0
            } else {
                range.0 + (range.1 - range.0) * i as f64 / (steps - 1) as f64
            }
        })
        .collect();
    let jobs: Vec<(f64, u32)> = alphas.iter().flat_map(|&a| (0..=k_max).map(move |k| (a, k))).collect();
    let rows: Vec<Result<SpectrumRow>> = jobs
        .par_iter()
        .map(|&(alpha, k)| {
            let ps = path_point(d, n, alpha)?;
            Ok(SpectrumRow {
                alpha,
                k,
                lowest_eigenvalue: lowest_eigenvalue(&SectorOperator::new(&ps, k)?)?.value,
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let crossing = fs_crossing(d, n, range);
    let summary = SpectrumSummary {
        d,
        n,
        alpha_range: range,
        crossing_error: crossing.as_ref().err().map(|e| e.to_string()),
        crossing: crossing.ok(),
    };
    Ok(match format {
        Format::Json => {
            #[derive(Serialize)]
            struct Full<'a> {
                summary: &'a SpectrumSummary,
                rows: &'a [SpectrumRow],
            }
            Output {
                main: json(&Full {
                    summary: &summary,
                    rows: &rows,
                }),
                record: None,
                passed: true,
            }
        }
        Format::Csv => {
            let mut s = String::from("alpha,k,lowest_eigenvalue\n");
            for r in &rows {
                s.push_str(&format!("{},{},{}\n", fmt17(r.alpha), r.k, fmt17(r.lowest_eigenvalue)));
            }
            Output {
                main: s,
                record: Some(json(&summary)),
                passed: true,
            }
        }
    })
}

fn cmd_verify(cfg: &ConfigValues, format: Option<Format>) -> Result<Output> {
    let suite = cfg.suite.ok_or_else(|| Error::InvalidInput("--suite is required".into()))?;
    let report = run_suite(suite, cfg)?;
    let main = match (format, suite) {
        (Some(Format::Csv), Suite::Estimates) => {
            let mut buf = Vec::new();
            report.write_estimates_csv(&mut buf)?;
            String::from_utf8(buf).expect("csv is utf-8")
        }
        (Some(Format::Csv), _) => {
            return Err(Error::InvalidInput(
                "CSV output exists only for the estimates suite".into(),
            ))
        }
        _ => {
            let mut s = report.to_json();
            s.push('\n');
            s
        }
    };
    Ok(Output {
        main,
        record: None,
        passed: report.passed,
    })
}

/// Sidecar path for the JSON record of a CSV-producing command.
fn record_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

fn execute(cmd: &Command) -> Result<Output> {
    let cfg = cmd.resolve()?;
    let format = cfg.format;
    match cmd {
        Command::Params(_) => cmd_params(&cfg),
        Command::Scan { .. } => cmd_scan(&cfg, format.unwrap_or(Format::Csv)),
        Command::Bubble { .. } => cmd_bubble(&cfg, format.unwrap_or(Format::Csv)),
        Command::Shoot { .. } => cmd_shoot(&cfg, format.unwrap_or(Format::Csv)),
        Command::Spectrum { .. } => cmd_spectrum(&cfg, format.unwrap_or(Format::Csv)),
        Command::Verify { .. } => cmd_verify(&cfg, format),
    }
}

fn emit(out: Option<&Path>, output: &Output) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, &output.main)?;
            if let Some(rec) = &output.record {
                std::fs::write(record_path(path), rec)?;
            }
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(output.main.as_bytes())?;
            if let Some(rec) = &output.record {
                eprint!("{rec}");
            }
        }
    }
    Ok(())
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let out = match cli.command.resolve() {
        Ok(cfg) => cfg.out,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    match execute(&cli.command).and_then(|o| emit(out.as_deref(), &o).map(|_| o.passed)) {
        Ok(true) => EXIT_OK,
        Ok(false) => {
            eprintln!("contract failure (see report)");
            EXIT_CONTRACT
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
    }
}

pub fn main_entry() -> i32 {
    run(&Cli::parse())
}
