//! Data generation, Monte-Carlo truth and replicated studies.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dist::{true_censoring_survival, CensoringSpec, GaussianCopula, Marginal};
use super::{rng_for, ScenarioSpec, STREAM_TRIAL, STREAM_TRUTH};
use crate::baseline::logrank_dataset;
use crate::data::{apply_horizon, Dataset, Group, SubjectRecord};
use crate::error::{Result, WinError};
use crate::estimate::WeightProvider;
use crate::inference::{analyze_with, InferenceResult, Statistic};
use crate::normal;
use crate::parallel::map_indexed;

/// One simulated trial. `analysis` has a single censoring time per subject;
/// with endpoint-specific censoring it is the induced common-censoring view
/// of `per_endpoint`.
#[derive(Debug, Clone)]
pub struct SimulatedTrial {
    pub analysis: Dataset,
    pub per_endpoint: Option<Dataset>,
}

fn event_times<R: Rng>(rng: &mut R, cop: &GaussianCopula, margins: &[Marginal]) -> Vec<f64> {
    cop.sample_normals(rng)
        .into_iter()
        .zip(margins)
        .map(|(z, m)| m.inverse_survival(normal::sf(z)))
        .collect()
}

/// Trial for replicate `r`; any replicate can be regenerated on its own.
pub fn generate_replicate(scenario: &ScenarioSpec, r: u64) -> Result<SimulatedTrial> {
    let cop = GaussianCopula::new(&scenario.correlation, scenario.n_endpoints)?;
    let mut rng = rng_for(scenario.seed, STREAM_TRIAL, r);
    let tau = scenario.tau;
    let mut subjects = Vec::with_capacity(scenario.n_t + scenario.n_c);
    for (group, n, margins) in [
        (Group::Treatment, scenario.n_t, &scenario.treatment),
        (Group::Control, scenario.n_c, &scenario.control),
    ] {
        for i in 0..n {
            let t = event_times(&mut rng, &cop, margins);
            let id = format!("{}{}", group.label(), i + 1);
            let s = match &scenario.censoring {
                CensoringSpec::None => {
                    let (x, d) = apply_horizon(&t, f64::INFINITY, tau)?;
                    SubjectRecord::new(id, group, x, d)?
                }
                CensoringSpec::Common { dist } => {
                    let (x, d) = apply_horizon(&t, dist.sample(&mut rng), tau)?;
                    SubjectRecord::new(id, group, x, d)?
                }
                CensoringSpec::Bivariate { rho, first, second } => {
                    let e1: f64 = rng.sample(rand_distr::StandardNormal);
                    let e2: f64 = rng.sample(rand_distr::StandardNormal);
                    let z2 = rho * e1 + (1.0 - rho * rho).max(0.0).sqrt() * e2;
                    let c = [first.inverse_survival(normal::sf(e1)), second.inverse_survival(normal::sf(z2))];
                    let mut x = Vec::with_capacity(2);
                    let mut d = Vec::with_capacity(2);
                    for l in 0..2 {
                        let (xl, dl) = apply_horizon(&t[l..=l], c[l], tau)?;
                        x.push(xl[0]);
                        d.push(dl[0]);
                    }
                    let mut s = SubjectRecord::new(id, group, x, d)?;
                    s.censor_times = Some(c.iter().map(|&v| Some(v)).collect());
                    s
                }
            };
            subjects.push(s);
        }
    }
    let data = Dataset::with_tau(subjects, tau)?;
    Ok(match scenario.censoring {
        CensoringSpec::Bivariate { .. } => SimulatedTrial {
            analysis: data.induce_common_censoring()?,
            per_endpoint: Some(data),
        },
        _ => SimulatedTrial {
            analysis: data,
            per_endpoint: None,
        },
    })
}

pub fn generate_trial(scenario: &ScenarioSpec) -> Result<SimulatedTrial> {
    generate_replicate(scenario, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    TreatmentWins,
    ControlWins,
    Tie,
}

/// Prioritized comparison of two fully observed, horizon-truncated subjects.
pub fn compare_uncensored(t: &[f64], c: &[f64], tau: f64, margins: &[f64]) -> Outcome {
    for l in 0..t.len() {
        let z = margins[l];
        if z == 0.0 && t[l] == tau && c[l] == tau {
            continue;
        }
        if t[l] > c[l] + z {
            return Outcome::TreatmentWins;
        }
        if c[l] > t[l] + z {
            return Outcome::ControlWins;
        }
    }
    Outcome::Tie
}

pub const MIN_TRUE_SAMPLES: usize = 100_000;
const TRUTH_CHUNK: usize = 1 << 15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueValues {
    pub pi_t: f64,
    pub pi_c: f64,
    pub pi_tie: f64,
    pub wr: f64,
    pub wo: f64,
    pub nb: f64,
    pub se_pi_t: f64,
    pub se_pi_c: f64,
    pub se_pi_tie: f64,
    pub se_wr: f64,
    pub samples: usize,
}

/// Win, loss and tie fractions over `m` independent uncensored
/// treatment-control pairs.
pub fn true_values_mc(scenario: &ScenarioSpec, m: usize) -> Result<TrueValues> {
    if m < MIN_TRUE_SAMPLES {
        return Err(WinError::config(format!("true values need at least {MIN_TRUE_SAMPLES} samples, got {m}")));
    }
    scenario.validate()?;
    let cop = GaussianCopula::new(&scenario.correlation, scenario.n_endpoints)?;
    let tau = scenario.tau;
    let chunks = m.div_ceil(TRUTH_CHUNK);
    let counts = map_indexed(chunks, |k| {
        let mut rng = rng_for(scenario.seed, STREAM_TRUTH, k as u64);
        let len = TRUTH_CHUNK.min(m - k * TRUTH_CHUNK);
        let (mut wt, mut wc) = (0u64, 0u64);
        for _ in 0..len {
            let t: Vec<f64> = event_times(&mut rng, &cop, &scenario.treatment)
                .into_iter()
                .map(|x| x.min(tau))
                .collect();
            let c: Vec<f64> = event_times(&mut rng, &cop, &scenario.control)
                .into_iter()
                .map(|x| x.min(tau))
                .collect();
            match compare_uncensored(&t, &c, tau, &scenario.margins) {
                Outcome::TreatmentWins => wt += 1,
                Outcome::ControlWins => wc += 1,
                Outcome::Tie => {}
            }
        }
        (wt, wc)
    });
    let (wt, wc) = counts.iter().fold((0u64, 0u64), |a, b| (a.0 + b.0, a.1 + b.1));
    let mf = m as f64;
    let (pt, pc) = (wt as f64 / mf, wc as f64 / mf);
    let tie = (m as u64 - wt - wc) as f64 / mf;
    let se = |p: f64| (p * (1.0 - p) / mf).sqrt();
    let wr = pt / pc;
    // multinomial delta method for the ratio
    let rel = ((1.0 - pt) / (pt * mf) + (1.0 - pc) / (pc * mf) + 2.0 / mf).sqrt();
    Ok(TrueValues {
        pi_t: pt,
        pi_c: pc,
        pi_tie: tie,
        wr,
        wo: (pt + 0.5 * tie) / (pc + 0.5 * tie),
        nb: pt - pc,
        se_pi_t: se(pt),
        se_pi_c: se(pc),
        se_pi_tie: se(tie),
        se_wr: wr * rel,
        samples: m,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// KM-estimated censoring weights.
    Ipcw,
    /// Unweighted sequential comparison of the observed data.
    Naive,
    /// Two-sided log-rank test on time to first event.
    Logrank,
    /// Known common-censoring survival.
    TrueCommon,
    /// Known joint endpoint-specific censoring survival on per-endpoint data.
    TrueJoint,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Ipcw,
        Method::Naive,
        Method::Logrank,
        Method::TrueCommon,
        Method::TrueJoint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ipcw => "ipcw",
            Method::Naive => "naive",
            Method::Logrank => "logrank",
            Method::TrueCommon => "true_common",
            Method::TrueJoint => "true_joint",
        }
    }
}

impl FromStr for Method {
    type Err = WinError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| WinError::config(format!("unknown method '{s}'")))
    }
}

/// Per-replicate outcome of one method. Fields not produced by the method
/// (win quantities for the log-rank test) are NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub method: Method,
    pub failed: bool,
    pub pi_t: f64,
    pub pi_c: f64,
    pub wr: f64,
    pub log_wr: f64,
    pub se_log_wr: f64,
    pub covered: bool,
    pub reject: bool,
    pub reject_wo: bool,
    pub reject_nb: bool,
}

impl ReplicateRecord {
    fn failed(replicate: usize, method: Method) -> Self {
        ReplicateRecord {
            replicate,
            method,
            failed: true,
            pi_t: f64::NAN,
            pi_c: f64::NAN,
            wr: f64::NAN,
            log_wr: f64::NAN,
            se_log_wr: f64::NAN,
            covered: false,
            reject: false,
            reject_wo: false,
            reject_nb: false,
        }
    }

    fn from_inference(replicate: usize, method: Method, r: &InferenceResult, truth: &TrueValues, alpha: f64) -> Self {
        let lw = r.test(Statistic::LogWr).expect("analysis reports every statistic");
        let rej = |s| r.test(s).is_some_and(|t| t.p_one_sided < alpha);
        ReplicateRecord {
            replicate,
            method,
            failed: false,
            pi_t: r.estimate.pi_t,
            pi_c: r.estimate.pi_c,
            wr: lw.point,
            log_wr: lw.point.ln(),
            se_log_wr: lw.se,
            covered: lw.ci_low <= truth.wr && truth.wr <= lw.ci_high,
            reject: lw.p_one_sided < alpha,
            reject_wo: rej(Statistic::LogWo),
            reject_nb: rej(Statistic::Nb),
        }
    }
}

/// Aggregate operating characteristics of one method. `NaN` marks a
/// quantity the method does not produce.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub reps: usize,
    pub failed: usize,
    pub true_pi_t: f64,
    pub bias_pi_t: f64,
    pub true_pi_c: f64,
    pub bias_pi_c: f64,
    pub true_wr: f64,
    pub bias_wr: f64,
    /// Mean analytic standard error of log WR.
    pub ase: f64,
    /// Standard deviation of log WR across replicates.
    pub ese: f64,
    pub cp: f64,
    pub rejection: f64,
    pub var_wr: f64,
    pub mcse_bias_pi_t: f64,
    pub mcse_bias_pi_c: f64,
    pub mcse_bias_wr: f64,
    pub mcse_cp: f64,
    pub mcse_rejection: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub scenario: String,
    pub reps: usize,
    pub alpha: f64,
    pub truth: TrueValues,
    pub rows: Vec<SummaryRow>,
    pub replicates: Vec<ReplicateRecord>,
}

pub const SUMMARY_COLUMNS: [&str; 20] = [
    "method",
    "reps",
    "failed",
    "true_pi_t",
    "bias_pi_t",
    "true_pi_c",
    "bias_pi_c",
    "true_wr",
    "bias_wr",
    "ase",
    "ese",
    "cp",
    "rejection",
    "var_wr",
    "mcse_bias_pi_t",
    "mcse_bias_pi_c",
    "mcse_bias_wr",
    "mcse_cp",
    "mcse_rejection",
    "true_mc_se_wr",
];

fn num(x: f64) -> String {
    if x.is_nan() {
        "NA".to_string()
    } else {
        format!("{x:?}")
    }
}

impl SummaryTable {
    pub fn row(&self, m: Method) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.method == m)
    }

    pub fn to_csv(&self) -> String {
        let mut s = SUMMARY_COLUMNS.join(",");
        s.push('\n');
        for r in &self.rows {
            let vals = [
                r.true_pi_t,
                r.bias_pi_t,
                r.true_pi_c,
                r.bias_pi_c,
                r.true_wr,
                r.bias_wr,
                r.ase,
                r.ese,
                r.cp,
                r.rejection,
                r.var_wr,
                r.mcse_bias_pi_t,
                r.mcse_bias_pi_c,
                r.mcse_bias_wr,
                r.mcse_cp,
                r.mcse_rejection,
                self.truth.se_wr,
            ];
            let _ = write!(s, "{},{},{}", r.method.name(), r.reps, r.failed);
            for v in vals {
                s.push(',');
                s.push_str(&num(v));
            }
            s.push('\n');
        }
        s
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return f64::NAN;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn summarize(method: Method, recs: &[&ReplicateRecord], truth: &TrueValues) -> SummaryRow {
    let ok: Vec<&&ReplicateRecord> = recs.iter().filter(|r| !r.failed).collect();
    let n = ok.len();
    let col = |f: fn(&ReplicateRecord) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<f64>>();
    let frac = |f: fn(&ReplicateRecord) -> bool| ok.iter().filter(|r| f(r)).count() as f64 / n as f64;
    let rejection = frac(|r| r.reject);
    let mcse_p = |p: f64| (p * (1.0 - p) / n as f64).sqrt();
    let root_n = (n as f64).sqrt();
    if method == Method::Logrank {
        return SummaryRow {
            method,
            reps: n,
            failed: recs.len() - n,
            true_pi_t: f64::NAN,
            bias_pi_t: f64::NAN,
            true_pi_c: f64::NAN,
            bias_pi_c: f64::NAN,
            true_wr: f64::NAN,
            bias_wr: f64::NAN,
            ase: f64::NAN,
            ese: f64::NAN,
            cp: f64::NAN,
            rejection,
            var_wr: f64::NAN,
            mcse_bias_pi_t: f64::NAN,
            mcse_bias_pi_c: f64::NAN,
            mcse_bias_wr: f64::NAN,
            mcse_cp: f64::NAN,
            mcse_rejection: mcse_p(rejection),
        };
    }
    let (pt, pc, wr, lw) = (col(|r| r.pi_t), col(|r| r.pi_c), col(|r| r.wr), col(|r| r.log_wr));
    let cp = frac(|r| r.covered);
    let ese = sd(&lw);
    SummaryRow {
        method,
        reps: n,
        failed: recs.len() - n,
        true_pi_t: truth.pi_t,
        bias_pi_t: mean(&pt) - truth.pi_t,
        true_pi_c: truth.pi_c,
        bias_pi_c: mean(&pc) - truth.pi_c,
        true_wr: truth.wr,
        bias_wr: mean(&wr) - truth.wr,
        ase: mean(&col(|r| r.se_log_wr)),
        ese,
        cp,
        rejection,
        var_wr: sd(&wr).powi(2),
        mcse_bias_pi_t: sd(&pt) / root_n,
        mcse_bias_pi_c: sd(&pc) / root_n,
        mcse_bias_wr: sd(&wr) / root_n,
        mcse_cp: mcse_p(cp),
        mcse_rejection: mcse_p(rejection),
    }
}

/// Replicated study of `methods` against `truth`. Replicate `r` uses the
/// generator stream `(scenario.seed, r)`; results do not depend on the
/// number of worker threads.
pub fn run_replications(
    scenario: &ScenarioSpec,
    reps: usize,
    methods: &[Method],
    truth: &TrueValues,
) -> Result<SummaryTable> {
    if reps < 2 {
        return Err(WinError::config(format!("replications need at least 2 replicates, got {reps}")));
    }
    scenario.validate()?;
    let bivariate = matches!(scenario.censoring, CensoringSpec::Bivariate { .. });
    if methods.contains(&Method::TrueJoint) && !bivariate {
        return Err(WinError::config("true_joint needs bivariate censoring"));
    }
    let config = scenario.analysis_config();
    let tc = true_censoring_survival(&scenario.censoring);
    let common = WeightProvider::TrueCommon {
        treatment: tc.common.clone(),
        control: tc.common.clone(),
    };
    let joint = tc.joint.as_ref().map(|j| WeightProvider::TrueJoint {
        treatment: j.clone(),
        control: j.clone(),
    });

    let per_rep = map_indexed(reps, |r| -> Result<Vec<ReplicateRecord>> {
        let trial = generate_replicate(scenario, r as u64)?;
        Ok(methods
            .iter()
            .map(|&m| {
                let win = |data: &Dataset, provider: &WeightProvider| match analyze_with(data, &config, provider) {
                    Ok(res) => ReplicateRecord::from_inference(r, m, &res, truth, scenario.alpha),
                    Err(_) => ReplicateRecord::failed(r, m),
                };
                match m {
                    Method::Ipcw => win(&trial.analysis, &WeightProvider::KaplanMeier),
                    Method::Naive => win(&trial.analysis, &WeightProvider::Naive),
                    Method::TrueCommon => win(&trial.analysis, &common),
                    Method::TrueJoint => win(
                        trial.per_endpoint.as_ref().unwrap_or(&trial.analysis),
                        joint.as_ref().expect("checked above"),
                    ),
                    Method::Logrank => match logrank_dataset(&trial.analysis) {
                        // the benchmark is the usual two-sided chi-square log-rank test
                        Ok(lr) => ReplicateRecord {
                            reject: lr.p_two_sided < scenario.alpha,
                            failed: false,
                            ..ReplicateRecord::failed(r, m)
                        },
                        Err(_) => ReplicateRecord::failed(r, m),
                    },
                }
            })
            .collect())
    });
    let mut replicates = Vec::with_capacity(reps * methods.len());
    for recs in per_rep {
        replicates.extend(recs?);
    }
    let rows = methods
        .iter()
        .map(|&m| {
            let recs: Vec<&ReplicateRecord> = replicates.iter().filter(|r| r.method == m).collect();
            summarize(m, &recs, truth)
        })
        .collect();
    Ok(SummaryTable {
        scenario: scenario.name.clone(),
        reps,
        alpha: scenario.alpha,
        truth: *truth,
        rows,
        replicates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::Setting;
    use approx::assert_abs_diff_eq;

    #[test]
    fn comparison_rule() {
        assert_eq!(compare_uncensored(&[3.0], &[2.0], 10.0, &[0.0]), Outcome::TreatmentWins);
        assert_eq!(compare_uncensored(&[10.0, 4.0], &[10.0, 5.0], 10.0, &[0.0, 0.0]), Outcome::ControlWins);
        assert_eq!(compare_uncensored(&[3.0, 9.0], &[5.0, 2.0], 10.0, &[2.5, 2.5]), Outcome::TreatmentWins);
        assert_eq!(compare_uncensored(&[3.0], &[5.0], 10.0, &[2.0]), Outcome::Tie);
    }

    #[test]
    fn no_censoring_means_all_events() {
        let mut s = ScenarioSpec::exponential(Setting::II, 36.0, 50, 0.0);
        s.censoring = CensoringSpec::None;
        let t = generate_trial(&s).unwrap();
        assert!(t.analysis.subjects().iter().all(|x| x.events.iter().all(|&d| d)));
    }

    #[test]
    fn replicates_are_reproducible() {
        let s = ScenarioSpec::induced_censoring(Setting::I, 0.25, 20, 0.0);
        let a = generate_replicate(&s, 7).unwrap();
        let b = generate_replicate(&s, 7).unwrap();
        assert_eq!(a.analysis, b.analysis);
        assert_eq!(a.per_endpoint, b.per_endpoint);
        assert_ne!(generate_replicate(&s, 8).unwrap().analysis, a.analysis);
    }

    #[test]
    fn too_few_samples_or_reps() {
        let s = ScenarioSpec::exponential(Setting::I, 18.0, 20, 0.0);
        assert!(true_values_mc(&s, 1000).is_err());
        let truth = TrueValues {
            pi_t: 0.4,
            pi_c: 0.4,
            pi_tie: 0.2,
            wr: 1.0,
            wo: 1.0,
            nb: 0.0,
            se_pi_t: 0.0,
            se_pi_c: 0.0,
            se_pi_tie: 0.0,
            se_wr: 0.0,
            samples: 0,
        };
        assert!(run_replications(&s, 1, &[Method::Ipcw], &truth).is_err());
        assert!(run_replications(&s, 2, &[Method::TrueJoint], &truth).is_err());
    }

    #[test]
    fn exponential_single_endpoint_truth() {
        let s = ScenarioSpec {
            name: "l1".into(),
            n_endpoints: 1,
            treatment: vec![Marginal::Exponential { rate: 0.01 }],
            control: vec![Marginal::Exponential { rate: 0.03 }],
            correlation: vec![1.0],
            censoring: CensoringSpec::None,
            n_t: 10,
            n_c: 10,
            // far beyond any draw, so effectively untruncated
            tau: 1e6,
            margins: vec![0.0],
            alpha: 0.05,
            seed: 3,
            variance_mode: Default::default(),
        };
        let tv = true_values_mc(&s, 200_000).unwrap();
        assert_abs_diff_eq!(tv.pi_t, 0.75, epsilon = 4.0 * tv.se_pi_t);
        assert_eq!(tv.pi_tie, 0.0);
    }
}
