//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export returns a JSON (or CSV) string; the plain `*_json`
//! functions carry the logic and are what the native tests call.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use winstat::estimate::{estimate_with_weight_provider, resolve_horizon};
use winstat::inference::{analyze_with, Statistic};
use winstat::io::{read_dataset, write_subjects};
use winstat::km::fit_censoring_survival;
use winstat::simulate::{generate_replicate, run_replications, true_values_mc, Method, ScenarioSpec, Setting, SummaryRow, TrueValues, MIN_TRUE_SAMPLES};
use winstat::{AnalysisConfig, Dataset, Group, Side, WeightProvider, WinError};

/// Replications allowed per click; the page runs on one thread.
pub const MAX_REPS: usize = 2000;

fn setting(code: u8) -> Result<Setting, WinError> {
    match code {
        1 => Ok(Setting::I),
        2 => Ok(Setting::II),
        3 => Ok(Setting::III),
        _ => Err(WinError::Config(format!("setting must be 1, 2 or 3, got {code}"))),
    }
}

fn scenario(code: u8, n: usize, tau: f64, zeta: f64, seed: u32) -> Result<ScenarioSpec, WinError> {
    Ok(ScenarioSpec::exponential(setting(code)?, tau, n, zeta).with_seed(u64::from(seed)))
}

fn json<T: Serialize>(v: &T) -> Result<String, WinError> {
    serde_json::to_string(v).map_err(|e| WinError::Config(e.to_string()))
}

fn load(csv: &str, tau: f64) -> Result<(Dataset, AnalysisConfig), WinError> {
    let raw = read_dataset(csv.as_bytes())?;
    let cfg = AnalysisConfig::new(raw.n_endpoints(), tau);
    let data = resolve_horizon(&raw, &cfg)?.into_owned();
    Ok((data, cfg))
}

/// One simulated trial from the exponential family as CSV text.
pub fn generate_trial_csv(setting: u8, n: usize, tau: f64, seed: u32) -> Result<String, WinError> {
    let s = scenario(setting, n, tau, 0.0, seed)?;
    let trial = generate_replicate(&s, 0)?;
    let mut buf = Vec::new();
    write_subjects(&mut buf, trial.analysis.subjects())?;
    String::from_utf8(buf).map_err(|e| WinError::Config(e.to_string()))
}

#[derive(Serialize)]
struct TrialSummary {
    scenario: String,
    reps: usize,
    truth: TrueValues,
    rows: Vec<SummaryRow>,
}

/// Small simulation study: bias, coverage and rejection for IPCW, naive and
/// log-rank.
pub fn simulate_trial_summary_json(
    setting: u8,
    n: usize,
    tau: f64,
    zeta: f64,
    reps: usize,
    seed: u32,
) -> Result<String, WinError> {
    if !(2..=MAX_REPS).contains(&reps) {
        return Err(WinError::Config(format!("reps must be between 2 and {MAX_REPS}")));
    }
    let s = scenario(setting, n, tau, zeta, seed)?;
    let truth = true_values_mc(&s, MIN_TRUE_SAMPLES)?;
    let table = run_replications(&s, reps, &[Method::Ipcw, Method::Naive, Method::Logrank], &truth)?;
    json(&TrialSummary {
        scenario: table.scenario,
        reps,
        truth: table.truth,
        rows: table.rows,
    })
}

#[derive(Serialize)]
struct SweepPoint {
    zeta: f64,
    pi_t: f64,
    pi_c: f64,
    pi_tie: f64,
    wr: Option<f64>,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
}

/// Win probabilities and log WR interval over `steps + 1` common margins
/// from 0 to `zeta_max`.
pub fn margin_sweep_json(csv: &str, tau: f64, zeta_max: f64, steps: usize) -> Result<String, WinError> {
    if !(zeta_max >= 0.0) || steps == 0 || steps > 200 {
        return Err(WinError::Config("need zeta_max >= 0 and 1..=200 steps".into()));
    }
    let (data, cfg) = load(csv, tau)?;
    let mut out = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let zeta = zeta_max * k as f64 / steps as f64;
        let c = cfg.clone().with_common_margin(zeta);
        let est = estimate_with_weight_provider(&data, &c, &WeightProvider::KaplanMeier)?;
        let t = analyze_with(&data, &c, &WeightProvider::KaplanMeier)
            .ok()
            .and_then(|r| r.test(Statistic::LogWr).copied());
        out.push(SweepPoint {
            zeta,
            pi_t: est.pi_t,
            pi_c: est.pi_c,
            pi_tie: est.pi_tie,
            wr: est.statistics().wr,
            ci_low: t.map(|t| t.ci_low),
            ci_high: t.map(|t| t.ci_high),
        });
    }
    json(&out)
}

#[derive(Serialize)]
struct Curve {
    group: &'static str,
    times: Vec<f64>,
    survival: Vec<f64>,
    n_at_risk: Vec<usize>,
}

/// Censoring Kaplan-Meier step functions per group, starting at (0, 1).
pub fn censoring_curves_json(csv: &str, tau: f64) -> Result<String, WinError> {
    let (data, _) = load(csv, tau)?;
    let curves: Vec<Curve> = [Group::Treatment, Group::Control]
        .into_iter()
        .map(|g| {
            let recs = data.censoring_records(g);
            let km = fit_censoring_survival(&recs);
            let mut times = vec![0.0];
            let mut survival = vec![1.0];
            times.extend_from_slice(km.jump_times());
            survival.extend_from_slice(km.values());
            times.push(data.tau());
            survival.push(km.survival_at(data.tau(), Side::Right));
            Curve {
                group: g.label(),
                times,
                survival,
                n_at_risk: km.n_at_risk().to_vec(),
            }
        })
        .collect();
    json(&curves)
}

fn js<T>(r: Result<T, WinError>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn generate_trial(setting: u8, n: usize, tau: f64, seed: u32) -> Result<String, JsError> {
    js(generate_trial_csv(setting, n, tau, seed))
}

#[wasm_bindgen]
pub fn simulate_trial_summary(setting: u8, n: usize, tau: f64, zeta: f64, reps: usize, seed: u32) -> Result<String, JsError> {
    js(simulate_trial_summary_json(setting, n, tau, zeta, reps, seed))
}

#[wasm_bindgen]
pub fn margin_sweep(csv: &str, tau: f64, zeta_max: f64, steps: usize) -> Result<String, JsError> {
    js(margin_sweep_json(csv, tau, zeta_max, steps))
}

#[wasm_bindgen]
pub fn censoring_curves(csv: &str, tau: f64) -> Result<String, JsError> {
    js(censoring_curves_json(csv, tau))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn generated_trial_round_trips() {
        let csv = generate_trial_csv(2, 60, 36.0, 4).unwrap();
        assert!(csv.starts_with("id,group,x1,x2,x3,d1,d2,d3"));
        assert_eq!(csv.lines().count(), 121);
        assert_eq!(csv, generate_trial_csv(2, 60, 36.0, 4).unwrap());
    }

    #[test]
    fn sweep_has_one_point_per_step() {
        let csv = generate_trial_csv(1, 50, 36.0, 1).unwrap();
        let v: Value = serde_json::from_str(&margin_sweep_json(&csv, 36.0, 6.0, 3).unwrap()).unwrap();
        let pts = v.as_array().unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[3]["zeta"].as_f64(), Some(6.0));
        let mut tie = 0.0;
        for p in pts {
            let (t, c) = (p["pi_t"].as_f64().unwrap(), p["pi_c"].as_f64().unwrap());
            assert!(t >= 0.0 && c >= 0.0 && t + c <= 1.0 + 1e-12);
            let next = p["pi_tie"].as_f64().unwrap();
            assert!(next >= tie);
            tie = next;
        }
    }

    #[test]
    fn curves_start_at_one_and_decrease() {
        let csv = generate_trial_csv(3, 80, 36.0, 9).unwrap();
        let v: Value = serde_json::from_str(&censoring_curves_json(&csv, 36.0).unwrap()).unwrap();
        for c in v.as_array().unwrap() {
            let s: Vec<f64> = c["survival"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
            assert_eq!(s[0], 1.0);
            assert!(s.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn summary_rejects_bad_input() {
        assert!(simulate_trial_summary_json(4, 50, 36.0, 0.0, 10, 1).is_err());
        assert!(simulate_trial_summary_json(1, 50, 36.0, 0.0, 1, 1).is_err());
        let v: Value = serde_json::from_str(&simulate_trial_summary_json(2, 40, 36.0, 0.0, 5, 1).unwrap()).unwrap();
        assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    }
}
