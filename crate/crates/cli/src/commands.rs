use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use winstat::baseline::{logrank_dataset, LogRankResult};
use winstat::estimate::{estimate_with_weight_provider, resolve_horizon};
use winstat::inference::{analyze_with, CovarianceEstimate, Statistic, TestResult};
use winstat::io::read_dataset;
use winstat::kernel::{enumerate_tie_terms, enumerate_win_terms, format_terms, Direction, KernelTerm};
use winstat::km::fit_censoring_survival;
use winstat::simulate::{run_replications, true_values_mc, Method, ScenarioSpec, TrueValues};
use winstat::{
    AnalysisConfig, Dataset, Group, HazardMode, TauSpec, WeightProvider, WinProbEstimate, WinStatistics,
};

use crate::error::{exit_code, CliError};
use crate::output::{cell, to_json, write_file, Run};

const SCHEMA_VERSION: u32 = 1;

/// Statistical options. A config file supplies defaults; flags override it.
#[derive(Debug, Args)]
pub struct AnalysisOpts {
    /// Analysis config file (`key = value` lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Horizon: a number, `auto`, or `auto(q)`.
    #[arg(long)]
    pub tau: Option<String>,
    /// Equivalence margins, one value or one per endpoint.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub margins: Option<Vec<f64>>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// `delta_method` or `null_variance` (log WR test only).
    #[arg(long)]
    pub variance: Option<String>,
    /// `neg_log_km` or `nelson_aalen`.
    #[arg(long)]
    pub hazard: Option<String>,
    /// Keep raw estimates even when pi_t + pi_c exceeds 1.
    #[arg(long)]
    pub no_renormalize: bool,
}

impl AnalysisOpts {
    fn resolve(&self, run: &mut Run, n_endpoints: usize) -> Result<AnalysisConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => AnalysisConfig::parse(&run.read_text(p)?)?,
            None => {
                if self.tau.is_none() {
                    return Err(CliError::config("give --tau or a --config file"));
                }
                AnalysisConfig::new(n_endpoints, 1.0)
            }
        };
        if cfg.n_endpoints != n_endpoints {
            return Err(CliError::config(format!(
                "config has {} endpoints, data have {n_endpoints}",
                cfg.n_endpoints
            )));
        }
        if let Some(t) = &self.tau {
            cfg.tau = t.parse::<TauSpec>()?;
        }
        if let Some(m) = &self.margins {
            cfg.margins = if m.len() == 1 { vec![m[0]; n_endpoints] } else { m.clone() };
        }
        if let Some(a) = self.alpha {
            cfg.alpha = a;
        }
        if let Some(v) = &self.variance {
            cfg.variance_mode = v.parse()?;
        }
        if let Some(h) = &self.hazard {
            cfg.hazard_mode = h.parse()?;
        }
        if self.no_renormalize {
            cfg.renormalize = false;
        }
        cfg.validate()?;
        run.set_config(cfg.to_text());
        Ok(cfg)
    }
}

fn load_dataset(run: &mut Run, path: &Path) -> Result<Dataset, CliError> {
    let bytes = run.read_input(path)?;
    Ok(read_dataset(bytes.as_slice())?)
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Input CSV: id, group, x1..xL, d1..dL.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub opts: AnalysisOpts,
    /// Repeat the analysis over a common margin grid `start:stop:step`.
    #[arg(long, value_name = "START:STOP:STEP")]
    pub sweep_zeta: Option<String>,
    /// CSV file for the sweep table.
    #[arg(long)]
    pub sweep_out: Option<PathBuf>,
    /// Add the naive (unweighted) comparison.
    #[arg(long)]
    pub naive: bool,
    /// Add the log-rank test on time to first event.
    #[arg(long)]
    pub logrank: bool,
    /// JSON output file (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct InferenceBlock {
    covariance: CovarianceEstimate,
    tests: Vec<TestResult>,
    truncated_subjects: usize,
}

#[derive(Debug, Serialize)]
struct AnalysisBlock {
    estimate: WinProbEstimate,
    statistics: WinStatistics,
    inference: Option<InferenceBlock>,
    inference_error: Option<String>,
    #[serde(skip)]
    inference_code: i32,
}

fn analysis_block(data: &Dataset, cfg: &AnalysisConfig, provider: &WeightProvider) -> Result<AnalysisBlock, CliError> {
    let estimate = estimate_with_weight_provider(data, cfg, provider)?;
    let statistics = estimate.statistics();
    let (inference, inference_error, inference_code) = match analyze_with(data, cfg, provider) {
        Ok(r) => (
            Some(InferenceBlock {
                covariance: r.covariance,
                tests: r.tests,
                truncated_subjects: r.truncated_subjects,
            }),
            None,
            0,
        ),
        Err(e) => (None, Some(e.to_string()), exit_code(&e)),
    };
    Ok(AnalysisBlock {
        estimate,
        statistics,
        inference,
        inference_error,
        inference_code,
    })
}

#[derive(Debug, Serialize)]
struct SweepRow {
    zeta: f64,
    pi_t: f64,
    pi_c: f64,
    pi_tie: f64,
    wr: Option<f64>,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
    p: Option<f64>,
}

#[derive(Debug, Serialize)]
struct LogRankBlock {
    tau: f64,
    #[serde(flatten)]
    result: LogRankResult,
}

#[derive(Debug, Serialize)]
struct AnalyzeOutput {
    schema_version: u32,
    kind: &'static str,
    tau: f64,
    n_t: usize,
    n_c: usize,
    config: AnalysisConfig,
    ipcw: AnalysisBlock,
    naive: Option<AnalysisBlock>,
    logrank: Option<LogRankBlock>,
    sweep: Option<Vec<SweepRow>>,
}

pub fn parse_grid(grid: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = grid.split(':').collect();
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::config(format!("--sweep-zeta '{grid}' must be start:stop:step")))?;
    let [start, stop, step] = nums[..] else {
        return Err(CliError::config(format!("--sweep-zeta '{grid}' must be start:stop:step")));
    };
    if !(step > 0.0) || !(start >= 0.0) || stop < start || !stop.is_finite() {
        return Err(CliError::config(format!("--sweep-zeta '{grid}' needs 0 <= start <= stop and step > 0")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    if n > 100_000 {
        return Err(CliError::config("--sweep-zeta grid is too long"));
    }
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}

fn sweep_rows(data: &Dataset, cfg: &AnalysisConfig, grid: &[f64]) -> Result<Vec<SweepRow>, CliError> {
    let mut rows = Vec::with_capacity(grid.len());
    for &zeta in grid {
        let c = cfg.clone().with_common_margin(zeta);
        let est = estimate_with_weight_provider(data, &c, &WeightProvider::KaplanMeier)?;
        let test = analyze_with(data, &c, &WeightProvider::KaplanMeier)
            .ok()
            .and_then(|r| r.test(Statistic::LogWr).copied());
        rows.push(SweepRow {
            zeta,
            pi_t: est.pi_t,
            pi_c: est.pi_c,
            pi_tie: est.pi_tie,
            wr: est.statistics().wr,
            ci_low: test.map(|t| t.ci_low),
            ci_high: test.map(|t| t.ci_high),
            p: test.map(|t| t.p_two_sided),
        });
    }
    Ok(rows)
}

fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("zeta,pi_t,pi_c,pi_tie,wr,ci_low,ci_high,p\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            cell(Some(r.zeta)),
            cell(Some(r.pi_t)),
            cell(Some(r.pi_c)),
            cell(Some(r.pi_tie)),
            cell(r.wr),
            cell(r.ci_low),
            cell(r.ci_high),
            cell(r.p)
        );
    }
    out
}

/// Returns the exit code: 0, or the code of a failed main inference.
pub fn analyze(args: &AnalyzeArgs, run: &mut Run) -> Result<i32, CliError> {
    let raw = load_dataset(run, &args.data)?;
    let cfg = args.opts.resolve(run, raw.n_endpoints())?;
    let data = resolve_horizon(&raw, &cfg)?.into_owned();
    let ipcw = analysis_block(&data, &cfg, &WeightProvider::KaplanMeier)?;
    let naive = if args.naive {
        Some(analysis_block(&data, &cfg, &WeightProvider::Naive)?)
    } else {
        None
    };
    let logrank = if args.logrank {
        Some(LogRankBlock {
            tau: data.tau(),
            result: logrank_dataset(&data)?,
        })
    } else {
        None
    };
    let sweep = match &args.sweep_zeta {
        Some(grid) => {
            let rows = sweep_rows(&data, &cfg, &parse_grid(grid)?)?;
            if let Some(p) = &args.sweep_out {
                write_file(p, &sweep_csv(&rows))?;
            }
            Some(rows)
        }
        None => None,
    };
    let code = ipcw.inference_code;
    if let Some(msg) = &ipcw.inference_error {
        eprintln!("winstat: inference failed: {msg}");
    }
    let out = AnalyzeOutput {
        schema_version: SCHEMA_VERSION,
        kind: "analyze",
        tau: data.tau(),
        n_t: data.group_size(Group::Treatment),
        n_c: data.group_size(Group::Control),
        config: cfg,
        ipcw,
        naive,
        logrank,
        sweep,
    };
    run.emit(&to_json(&out)?)?;
    Ok(code)
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file.
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    /// Comma-separated subset of ipcw, naive, logrank, true_common, true_joint.
    #[arg(long, value_delimiter = ',', default_value = "ipcw,naive,logrank")]
    pub methods: Vec<String>,
    /// Monte-Carlo pairs for the true values.
    #[arg(long, default_value_t = 1_000_000)]
    pub truth_samples: usize,
    /// Override the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Per-replicate CSV.
    #[arg(long)]
    pub replicates_out: Option<PathBuf>,
    /// Summary CSV (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn load_scenario(run: &mut Run, path: &Path, seed: Option<u64>) -> Result<ScenarioSpec, CliError> {
    let mut s = ScenarioSpec::parse(&run.read_text(path)?)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    run.set_config(s.to_text());
    run.add_seed(s.seed);
    Ok(s)
}

fn replicates_csv(table: &winstat::simulate::SummaryTable) -> String {
    let mut out = String::from("replicate,method,failed,pi_t,pi_c,wr,log_wr,se_log_wr,covered,reject,reject_wo,reject_nb\n");
    for r in &table.replicates {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.replicate,
            r.method.name(),
            u8::from(r.failed),
            cell(Some(r.pi_t)),
            cell(Some(r.pi_c)),
            cell(Some(r.wr)),
            cell(Some(r.log_wr)),
            cell(Some(r.se_log_wr)),
            u8::from(r.covered),
            u8::from(r.reject),
            u8::from(r.reject_wo),
            u8::from(r.reject_nb)
        );
    }
    out
}

pub fn simulate(args: &SimulateArgs, run: &mut Run) -> Result<i32, CliError> {
    let s = load_scenario(run, &args.scenario, args.seed)?;
    let methods = args
        .methods
        .iter()
        .map(|m| m.parse::<Method>())
        .collect::<Result<Vec<_>, _>>()?;
    if methods.is_empty() {
        return Err(CliError::config("--methods is empty"));
    }
    if args.reps < 2 {
        return Err(CliError::config(format!("--reps must be at least 2, got {}", args.reps)));
    }
    let truth = true_values_mc(&s, args.truth_samples)?;
    let table = run_replications(&s, args.reps, &methods, &truth)?;
    if let Some(p) = &args.replicates_out {
        write_file(p, &replicates_csv(&table))?;
    }
    run.emit(&table.to_csv())?;
    Ok(0)
}

#[derive(Debug, Args)]
pub struct TrueValuesArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Number of independent treatment-control pairs (at least 100000).
    #[arg(long, default_value_t = 5_000_000)]
    pub samples: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct TrueValuesOutput<'a> {
    schema_version: u32,
    kind: &'static str,
    scenario: &'a str,
    tau: f64,
    margins: &'a [f64],
    #[serde(flatten)]
    values: TrueValues,
}

pub fn true_values(args: &TrueValuesArgs, run: &mut Run) -> Result<i32, CliError> {
    let s = load_scenario(run, &args.scenario, args.seed)?;
    let values = true_values_mc(&s, args.samples)?;
    let out = TrueValuesOutput {
        schema_version: SCHEMA_VERSION,
        kind: "true_values",
        scenario: &s.name,
        tau: s.tau,
        margins: &s.margins,
        values,
    };
    run.emit(&to_json(&out)?)?;
    Ok(0)
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub opts: AnalysisOpts,
    /// CSV output file (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Censoring Kaplan-Meier curves of both groups on the analysis horizon.
pub fn censoring_curve(args: &CurveArgs, run: &mut Run) -> Result<i32, CliError> {
    let raw = load_dataset(run, &args.data)?;
    let cfg = args.opts.resolve(run, raw.n_endpoints())?;
    let data = resolve_horizon(&raw, &cfg)?;
    let mut out = String::from("group,time,survival,n_at_risk,n_events,hazard_neg_log_km,hazard_nelson_aalen\n");
    for g in [Group::Treatment, Group::Control] {
        let curve = fit_censoring_survival(&data.censoring_records(g));
        let h_km = curve.hazard_increments(HazardMode::NegLogKm);
        let h_na = curve.hazard_increments(HazardMode::NelsonAalen);
        for k in 0..curve.jump_times().len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                g.label(),
                cell(Some(curve.jump_times()[k])),
                cell(Some(curve.values()[k])),
                curve.n_at_risk()[k],
                curve.n_events()[k],
                cell(h_km.increments.get(k).copied()),
                cell(h_na.increments.get(k).copied())
            );
        }
    }
    run.emit(&out)?;
    Ok(0)
}

#[derive(Debug, Args)]
pub struct TermsArgs {
    #[arg(long)]
    pub endpoints: usize,
    /// Margins, one value or one per endpoint (zero by default).
    #[arg(long, value_delimiter = ',')]
    pub margins: Option<Vec<f64>>,
    /// `text` or `json`.
    #[arg(long, default_value = "text")]
    pub format: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct TermsOutput {
    schema_version: u32,
    kind: &'static str,
    endpoints: usize,
    margins: Vec<f64>,
    treatment_wins: Vec<KernelTerm>,
    control_wins: Vec<KernelTerm>,
    ties: Vec<KernelTerm>,
}

/// Kernel term table for an endpoint count and margin vector.
pub fn terms(args: &TermsArgs, run: &mut Run) -> Result<i32, CliError> {
    let l = args.endpoints;
    let margins = match &args.margins {
        None => vec![0.0; l],
        Some(m) if m.len() == 1 => vec![m[0]; l],
        Some(m) => m.clone(),
    };
    let tw = enumerate_win_terms(l, &margins, Direction::TreatmentWins)?;
    let cw = enumerate_win_terms(l, &margins, Direction::ControlWins)?;
    let ties = if margins.iter().all(|&m| m > 0.0) {
        enumerate_tie_terms(l, &margins)?
    } else {
        Vec::new()
    };
    run.set_config(format!("endpoints = {l}\nmargins = {margins:?}\n"));
    let text = match args.format.as_str() {
        "text" => {
            let mut all = tw.clone();
            all.extend(cw.iter().cloned());
            all.extend(ties.iter().cloned());
            format_terms(&all)
        }
        "json" => to_json(&TermsOutput {
            schema_version: SCHEMA_VERSION,
            kind: "terms",
            endpoints: l,
            margins,
            treatment_wins: tw,
            control_wins: cw,
            ties,
        })?,
        other => return Err(CliError::config(format!("unknown format '{other}' (text or json)"))),
    };
    run.emit(&text)?;
    Ok(0)
}

#[derive(Debug, Args)]
pub struct LogrankArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub opts: AnalysisOpts,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct LogrankOutput {
    schema_version: u32,
    kind: &'static str,
    n_t: usize,
    n_c: usize,
    #[serde(flatten)]
    block: LogRankBlock,
}

pub fn logrank(args: &LogrankArgs, run: &mut Run) -> Result<i32, CliError> {
    let raw = load_dataset(run, &args.data)?;
    let cfg = args.opts.resolve(run, raw.n_endpoints())?;
    let data = resolve_horizon(&raw, &cfg)?;
    let out = LogrankOutput {
        schema_version: SCHEMA_VERSION,
        kind: "logrank",
        n_t: data.group_size(Group::Treatment),
        n_c: data.group_size(Group::Control),
        block: LogRankBlock {
            tau: data.tau(),
            result: logrank_dataset(&data)?,
        },
    };
    run.emit(&to_json(&out)?)?;
    Ok(0)
}
