//! Command-line front end.
//!
//! Every subcommand reads one JSON config file; scalar fields can be
//! overridden by flags.  Curves are written as CSV with a comment row
//! carrying the kernel hash and tool version, reports as JSON.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{GpsError, Result};
use crate::exact_dp::{enumerate_log_z, pair_model_log_z, FirstPair, PairModel, PartitionTable, Scaling, DEFAULT_MEMORY_BUDGET};
use crate::kernels::{BiophysicsConvention, BiophysicsParams, FreeEndKernel, Kernel, KernelSpec, PinningModel};
use crate::ldp::rate_and_free_energy;
use crate::phase::{scan_transitions, DEFAULT_GRID, DEFAULT_TOL_H};
use crate::sampler::{limit_law_report, sample_constrained, sample_free, write_paths_csv, RenewalPath, DEFAULT_BIN_CUTOFF};
use crate::tilt::{solve, DEFAULT_TOL};
use crate::validation::{default_suite, CheckReport, ToleranceKind};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "GPS_WORKERS";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_TOLERANCE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "gps", version, about = "Generalized Poland-Scheraga pinning model toolkit")]
pub struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, env = WORKERS_ENV, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Free energy, tilt, critical slope and decay rate on an h grid.
    FreeEnergy(CommonArgs),
    /// Locate the critical points of the strand-ratio slice.
    PhaseScan(PhaseScanArgs),
    /// Exact constrained and free partition functions.
    Exact(ExactArgs),
    /// Exact path samples, optionally with a limit-law report.
    Sample(SampleArgs),
    /// Sharp-estimate validation suite.
    Validate(ValidateArgs),
    /// Pair recursion against the renewal formulation.
    MatchBiophysics(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output file (standard output if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub count: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct PhaseScanArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Write the binary partition-table dump here.
    #[arg(long)]
    pub dump: Option<PathBuf>,
    /// Compare with brute-force enumeration (small boxes only).
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Write a JSON limit-law report here (free mode only).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Judge {
    /// Tolerances apply at the largest size.
    Largest,
    /// Tolerances apply to the extrapolated value where one exists.
    Extrapolated,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum)]
    pub judge: Option<Judge>,
}

/// Linear or logarithmic grid.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    #[serde(default)]
    pub log: bool,
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.points == 0 || (self.log && !(self.start > 0.0 && self.stop > 0.0)) {
            return Err(GpsError::Config(format!("invalid grid {self:?}")));
        }
        let (a, b) = if self.log { (self.start.ln(), self.stop.ln()) } else { (self.start, self.stop) };
        Ok((0..self.points)
            .map(|i| {
                let x = if self.points == 1 { a } else { a + (b - a) * i as f64 / (self.points - 1) as f64 };
                if self.log {
                    x.exp()
                } else {
                    x
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    Constrained,
    Free,
}

/// Pair-model parameters for `match-biophysics`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub c: f64,
    pub e_b: f64,
    pub e_l: f64,
    pub beta: f64,
    pub cbar: f64,
}

/// Contents of a config file.  Each subcommand uses the fields it needs.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kernel: Option<KernelSpec>,
    pub h: Option<f64>,
    pub h_grid: Option<Grid>,
    pub gamma: Option<f64>,
    /// Scan range for `phase-scan`.
    pub range: Option<(f64, f64)>,
    pub grid: Option<usize>,
    pub tol_h: Option<f64>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub free_end: Option<FreeEndKernel>,
    pub sizes: Option<Vec<usize>>,
    pub seed: Option<u64>,
    pub count: Option<usize>,
    pub mode: Option<SampleMode>,
    pub pair: Option<PairConfig>,
    pub judge: Option<Judge>,
    pub memory_budget: Option<u64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| GpsError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| GpsError::Config(format!("{}: {e}", path.display())))
    }

    fn apply(&mut self, a: &CommonArgs) {
        self.h = a.h.or(self.h);
        self.gamma = a.gamma.or(self.gamma);
        self.n = a.n.or(self.n);
        self.m = a.m.or(self.m);
        self.seed = a.seed.or(self.seed);
        self.count = a.count.or(self.count);
    }
}

fn need<T: Clone>(v: &Option<T>, field: &str, cmd: &str) -> Result<T> {
    v.clone().ok_or_else(|| GpsError::Config(format!("missing field `{field}` required by {cmd}")))
}

/// Comment row preceding every CSV header.
pub fn csv_comment(kernel_hash: &str) -> String {
    format!("# kernel_hash={kernel_hash} version={}", env!("CARGO_PKG_VERSION"))
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn write_csv(out: &Option<PathBuf>, hash: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = open_out(out)?;
    writeln!(w, "{}", csv_comment(hash))?;
    let mut c = csv::Writer::from_writer(w);
    c.write_record(header).map_err(csv_err)?;
    for r in rows {
        c.write_record(r).map_err(csv_err)?;
    }
    c.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> GpsError {
    GpsError::Io(io::Error::other(e))
}

fn write_json<T: Serialize>(out: &Option<PathBuf>, value: &T) -> Result<()> {
    let mut w = open_out(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn fmt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Exit code for an error: malformed input is a configuration error,
/// numerical failures count as tolerance failures.
pub fn exit_code(e: &GpsError) -> i32 {
    match e {
        GpsError::Config(_) | GpsError::Json(_) | GpsError::Io(_) | GpsError::Domain(_) | GpsError::Size { .. } => EXIT_CONFIG,
        GpsError::NoConvergence { .. } | GpsError::NoBracket { .. } => EXIT_TOLERANCE,
    }
}

/// Parses arguments, runs the subcommand and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    if let Some(w) = cli.workers {
        // A second initialization in the same process keeps the existing pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    match run(&cli.command) {
        Ok(pass) => {
            if pass {
                EXIT_PASS
            } else {
                EXIT_TOLERANCE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs one subcommand; `Ok(false)` signals a tolerance failure.
pub fn run(cmd: &Command) -> Result<bool> {
    match cmd {
        Command::FreeEnergy(a) => cmd_free_energy(a),
        Command::PhaseScan(a) => cmd_phase_scan(a),
        Command::Exact(a) => cmd_exact(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Validate(a) => cmd_validate(a),
        Command::MatchBiophysics(a) => cmd_match_biophysics(a),
    }
}

fn load(a: &CommonArgs) -> Result<RunConfig> {
    let mut c = RunConfig::load(&a.config)?;
    c.apply(a);
    Ok(c)
}

fn h_values(c: &RunConfig, cmd: &str) -> Result<Vec<f64>> {
    match (&c.h_grid, c.h) {
        (Some(g), _) => g.values(),
        (None, Some(h)) => Ok(vec![h]),
        (None, None) => Err(GpsError::Config(format!("{cmd} needs `h` or `h_grid`"))),
    }
}

pub const FREE_ENERGY_COLUMNS: [&str; 10] =
    ["h", "h_eff", "g", "lambda1_bar", "gamma_c", "D", "F", "plateau_minus_F", "regime", "status"];

fn free_energy_row(model: &PinningModel, h: f64, gamma: f64) -> Result<Vec<String>> {
    let (k, h_eff) = model.at(h)?;
    let t = solve(&k, h_eff, DEFAULT_TOL)?;
    let r = rate_and_free_energy(&t, gamma, DEFAULT_TOL)?;
    let s = t.state();
    Ok(vec![
        h.to_string(),
        h_eff.to_string(),
        s.g.to_string(),
        fmt(s.lambda1_bar),
        fmt(s.gamma_c),
        fmt(r.rate),
        r.free_energy.to_string(),
        fmt(r.plateau.map(|p| p - r.free_energy)),
        format!("{:?}", r.regime),
        "ok".into(),
    ])
}

fn cmd_free_energy(a: &CommonArgs) -> Result<bool> {
    let c = load(a)?;
    let spec = need(&c.kernel, "kernel", "free-energy")?;
    let model = PinningModel::from_spec(&spec)?;
    let gamma = need(&c.gamma, "gamma", "free-energy")?;
    if !(gamma > 0.0) {
        return Err(GpsError::Config(format!("gamma must be positive, got {gamma}")));
    }
    let hs = h_values(&c, "free-energy")?;
    let results: Vec<Result<Vec<String>>> = hs.par_iter().map(|&h| free_energy_row(&model, h, gamma)).collect();
    let mut ok = true;
    let rows: Vec<Vec<String>> = results
        .into_iter()
        .zip(&hs)
        .map(|(r, h)| match r {
            Ok(row) => row,
            Err(e) => {
                ok = false;
                let mut row = vec![h.to_string()];
                row.extend(std::iter::repeat_n(String::new(), 8));
                row.push(format!("error: {e}"));
                row
            }
        })
        .collect();
    write_csv(&a.out, &spec.hash(), &FREE_ENERGY_COLUMNS, &rows)?;
    Ok(ok)
}

pub const PHASE_COLUMNS: [&str; 10] =
    ["h_star", "kind", "bracket_lo", "bracket_hi", "gamma_c_slope", "gamma_c_slope_fd", "order", "jump", "jump_fd", "gamma"];

fn cmd_phase_scan(a: &PhaseScanArgs) -> Result<bool> {
    let c = load(&a.common)?;
    let spec = need(&c.kernel, "kernel", "phase-scan")?;
    let model = PinningModel::from_spec(&spec)?;
    let gamma = need(&c.gamma, "gamma", "phase-scan")?;
    let range = need(&c.range, "range", "phase-scan")?;
    let records = scan_transitions(&model, gamma, range, c.grid.unwrap_or(DEFAULT_GRID), c.tol_h.unwrap_or(DEFAULT_TOL_H))?;
    match a.format {
        Format::Json => write_json(&a.common.out, &json!({"kernel_hash": spec.hash(), "gamma": gamma, "range": range, "transitions": records}))?,
        Format::Csv => {
            let rows: Vec<Vec<String>> = records
                .iter()
                .map(|r| {
                    vec![
                        r.h_star.to_string(),
                        format!("{:?}", r.kind),
                        r.bracket.0.to_string(),
                        r.bracket.1.to_string(),
                        r.gamma_c_slope.to_string(),
                        r.gamma_c_slope_fd.to_string(),
                        format!("{:?}", r.order),
                        r.jump.to_string(),
                        fmt(r.jump_fd),
                        gamma.to_string(),
                    ]
                })
                .collect();
            write_csv(&a.common.out, &spec.hash(), &PHASE_COLUMNS, &rows)?
        }
    }
    Ok(true)
}

fn fixed_kernel(spec: &KernelSpec, cmd: &str) -> Result<Kernel> {
    match PinningModel::from_spec(spec)? {
        PinningModel::Fixed(k) => Ok(k),
        PinningModel::Temperature { .. } => {
            Err(GpsError::Config(format!("{cmd} needs a fixed kernel; use the `biophysics` family with an explicit beta")))
        }
    }
}

fn build_table(c: &RunConfig, k: &Kernel, n: usize, m: usize, h: f64) -> Result<PartitionTable> {
    PartitionTable::build_with(k, n, m, h, Scaling::Auto, c.memory_budget.unwrap_or(DEFAULT_MEMORY_BUDGET))
}

/// Relative log error used by the enumeration comparison.
pub const ORACLE_TOL: f64 = 1e-12;

fn cmd_exact(a: &ExactArgs) -> Result<bool> {
    let c = load(&a.common)?;
    let spec = need(&c.kernel, "kernel", "exact")?;
    let k = fixed_kernel(&spec, "exact")?;
    let (n, m, h) = (need(&c.n, "n", "exact")?, need(&c.m, "m", "exact")?, need(&c.h, "h", "exact")?);
    if n == 0 || m == 0 {
        return Err(GpsError::Config("exact needs N, M >= 1".into()));
    }
    let table = build_table(&c, &k, n, m, h)?;
    let mut report = json!({
        "kernel_hash": spec.hash(),
        "n": n,
        "m": m,
        "h": h,
        "log_zc": table.log_z(n, m),
    });
    if let Some(kf) = &c.free_end {
        report["log_zf"] = json!(table.log_free(kf, n, m));
    }
    let mut pass = true;
    if a.oracle {
        let brute = enumerate_log_z(&k, n, m, h)?;
        let err = (table.log_z(n, m) - brute).abs() / brute.abs().max(1.0);
        pass = err <= ORACLE_TOL;
        report["oracle"] = json!({"log_zc": brute, "relative_log_error": err, "tolerance": ORACLE_TOL, "pass": pass});
    }
    if let Some(p) = &a.dump {
        table.write_dump(BufWriter::new(File::create(p)?))?;
    }
    write_json(&a.common.out, &report)?;
    Ok(pass)
}

fn cmd_sample(a: &SampleArgs) -> Result<bool> {
    let c = load(&a.common)?;
    let spec = need(&c.kernel, "kernel", "sample")?;
    let k = fixed_kernel(&spec, "sample")?;
    let (n, m, h) = (need(&c.n, "n", "sample")?, need(&c.m, "m", "sample")?, need(&c.h, "h", "sample")?);
    let seed = need(&c.seed, "seed", "sample")?;
    let count = need(&c.count, "count", "sample")?;
    let table = build_table(&c, &k, n, m, h)?;
    let mode = c.mode.unwrap_or(SampleMode::Constrained);
    let mut pass = true;
    let paths: Vec<RenewalPath> = match mode {
        SampleMode::Constrained => {
            if a.report.is_some() {
                return Err(GpsError::Config("limit-law reports need `mode: free`".into()));
            }
            sample_constrained(&k, &table, n, m, seed, count)?
        }
        SampleMode::Free => {
            let kf = need(&c.free_end, "free_end", "sample")?;
            let samples = sample_free(&k, &kf, &table, n, m, seed, count)?;
            if let Some(p) = &a.report {
                let rep = limit_law_report(&k, &kf, &samples, n, m, h, DEFAULT_BIN_CUTOFF)?;
                let mut rows = vec![tv_row("limit_law_ends", &spec, h, n, m, count, rep.end_law.total_variation)];
                if let Some(s) = &rep.step_law {
                    rows.push(tv_row("limit_law_steps", &spec, h, n, m, count, s.total_variation));
                }
                pass = rows.iter().all(|r| r.pass);
                write_json(&Some(p.clone()), &json!({"checks": rows, "detail": rep}))?;
            }
            samples.into_iter().map(|s| s.path).collect()
        }
    };
    let mut w = open_out(&a.common.out)?;
    writeln!(w, "{}", csv_comment(&spec.hash()))?;
    write_paths_csv(&mut w, &paths)?;
    w.flush()?;
    Ok(pass)
}

/// Total-variation tolerance of limit-law comparisons.
pub const LIMIT_LAW_TV_TOL: f64 = 0.05;

fn tv_row(id: &str, spec: &KernelSpec, h: f64, n: usize, m: usize, count: usize, tv: f64) -> CheckReport {
    CheckReport {
        check_id: id.into(),
        params: json!({"kernel": spec.hash(), "h": h, "n": n, "m": m, "samples": count}),
        sizes: vec![n],
        measured: vec![tv],
        claimed: Some(0.0),
        tolerance: LIMIT_LAW_TV_TOL,
        tolerance_kind: ToleranceKind::Absolute,
        pass: tv <= LIMIT_LAW_TV_TOL,
        extrapolated: None,
        detail: Some("total-variation distance to the limit law".into()),
    }
}

fn cmd_validate(a: &ValidateArgs) -> Result<bool> {
    let c = load(&a.common)?;
    let k = match &c.kernel {
        Some(spec) => fixed_kernel(spec, "validate")?,
        None => Kernel::gamma_ratio(1.5)?,
    };
    let sizes = c.sizes.clone().unwrap_or_else(|| vec![100, 200, 300, 400]);
    let mut reports = default_suite(&k, &sizes)?;
    if a.judge.or(c.judge) == Some(Judge::Extrapolated) {
        reports.iter_mut().for_each(CheckReport::judge_by_extrapolation);
    }
    write_json(&a.common.out, &reports)?;
    Ok(reports.iter().all(|r| r.pass))
}

/// Tolerance on the log difference between the two formulations.
pub const MATCH_TOL: f64 = 1e-10;

fn cmd_match_biophysics(a: &CommonArgs) -> Result<bool> {
    let c = load(a)?;
    let p = need(&c.pair, "pair", "match-biophysics")?;
    let n = c.n.unwrap_or(8);
    let m = c.m.unwrap_or(n);
    let (k, h) = Kernel::biophysics(BiophysicsParams { c: p.c, e_b: p.e_b, e_l: p.e_l, beta: p.beta }, BiophysicsConvention::LoopLength)?;
    let kf = FreeEndKernel::power(p.cbar);
    let table = PartitionTable::build(&k, n, m, h)?;
    let mut reports = Vec::new();
    for first_pair in [FirstPair::Unit, FirstPair::Rewarded] {
        let model = PairModel { c: p.c, e_b: p.e_b, e_l: p.e_l, beta: p.beta, cbar: p.cbar, first_pair };
        // The rewarded first pair carries one extra binding factor.
        let offset = match first_pair {
            FirstPair::Unit => 0.0,
            FirstPair::Rewarded => p.beta * p.e_b,
        };
        let mut worst: f64 = 0.0;
        for nn in 0..=n {
            for mm in 0..=m {
                let pair = pair_model_log_z(&model, nn + 1, mm + 1)? - offset;
                worst = worst.max((pair - table.log_free(&kf, nn, mm)).abs());
            }
        }
        reports.push(CheckReport {
            check_id: format!("pair_recursion_{}", if first_pair == FirstPair::Unit { "unit" } else { "rewarded" }),
            params: json!({"kernel": k.hash(), "c": p.c, "e_b": p.e_b, "e_l": p.e_l, "beta": p.beta, "cbar": p.cbar, "h": h}),
            sizes: vec![n, m],
            measured: vec![worst],
            claimed: Some(0.0),
            tolerance: MATCH_TOL,
            tolerance_kind: ToleranceKind::Absolute,
            pass: worst <= MATCH_TOL,
            extrapolated: None,
            detail: Some("largest |ln Z_pair - ln Z_free| over all boxes".into()),
        });
    }
    write_json(&a.out, &reports)?;
    Ok(reports.iter().all(|r| r.pass))
}
