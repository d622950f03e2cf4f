//! Acceptance criteria 1-11. Each test prints one `PASS`/`FAIL` line and
//! asserts the criterion at its stated tolerance. The Monte-Carlo criteria
//! use fixed seeds, so reruns reproduce the same numbers.

mod common;

use std::io::Write;
use std::time::Instant;

use common::*;
use rand::Rng;
use winstat::inference::{analyze, covariance, influence_components, test_and_ci, Statistic};
use winstat::km::{at_risk_fraction, fit_censoring_survival};
use winstat::normal;
use winstat::parallel::with_threads;
use winstat::simulate::{
    generate_replicate, run_replications, true_values_mc, CensoringSpec, Marginal, Method, ScenarioSpec, Setting,
    SummaryTable, TrueValues,
};
use winstat::{estimate_win_probabilities, AnalysisConfig, Dataset, Group, HazardMode, Side, SubjectRecord, VarianceMode};

const TRUTH_SAMPLES: usize = 2_000_000;

fn report(n: u32, ok: bool, detail: &str) {
    let line = format!("acceptance criterion {n:>2}: {} | {detail}\n", status(ok));
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn study(scenario: &ScenarioSpec, reps: usize, methods: &[Method]) -> (TrueValues, SummaryTable) {
    let truth = true_values_mc(scenario, TRUTH_SAMPLES).unwrap();
    let table = run_replications(scenario, reps, methods, &truth).unwrap();
    (truth, table)
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    x >= lo && x <= hi
}

#[test]
fn criterion_01_uncensored_pairwise_oracle() {
    let start = Instant::now();
    let mut r = rng(101);
    let mut worst: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    let mut regimes = [0usize; 2];
    for _ in 0..100 {
        let l = r.random_range(1..=3);
        let tau = 12.0;
        let (nt, nc) = (r.random_range(1..=50), r.random_range(1..=50));
        let data = random_dataset(&mut r, l, nt, nc, tau, 0.0, None);
        let margins = random_margins(&mut r, l, tau);
        regimes[usize::from(margins[0] > 0.0)] += 1;
        let cfg = AnalysisConfig::new(l, tau).with_margins(margins.clone());
        let est = estimate_win_probabilities(&data, &cfg).unwrap();
        let (w, lo, tie) = brute_probabilities(&data, &margins);
        worst = worst
            .max((est.pi_t - w).abs())
            .max((est.pi_c - lo).abs())
            .max((est.pi_tie - tie).abs());
        worst_sum = worst_sum.max((est.pi_t + est.pi_c + est.pi_tie - 1.0).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = worst < 1e-12 && worst_sum < 1e-12 && secs < 10.0 && regimes.iter().all(|&c| c > 0);
    report(
        1,
        ok,
        &format!(
            "100 datasets ({} zero-margin, {} positive-margin), max |diff| {worst:.1e}, max |sum-1| {worst_sum:.1e}, {secs:.2}s",
            regimes[0], regimes[1]
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_02_influence_covariance_oracle() {
    let start = Instant::now();
    let mut r = rng(202);
    let (mut worst_comp, mut worst_cov): (f64, f64) = (0.0, 0.0);
    let (mut compared, mut both_rejected, mut disagreements) = (0, 0, 0);
    for n in 0..200 {
        let l = r.random_range(1..=3);
        let tau = 8.0;
        let grid = (n % 2 == 0).then_some(0.5);
        let (nt, nc) = (r.random_range(2..=5), r.random_range(2..=5));
        let data = random_dataset(&mut r, l, nt, nc, tau, 0.06, grid);
        let mut cfg = AnalysisConfig::new(l, tau).with_margins(random_margins(&mut r, l, tau));
        if n % 4 == 1 {
            cfg.hazard_mode = HazardMode::NelsonAalen;
        }
        match (influence_components(&data, &cfg), literal_components(&data, &cfg)) {
            (Ok(c), Some((k, lm))) => {
                for i in 0..c.n_t {
                    for j in 0..c.n_c {
                        worst_comp = worst_comp.max((c.k(i, j) - k[i][j]).abs()).max((c.l(i, j) - lm[i][j]).abs());
                    }
                }
                let cov = covariance(&c).unwrap();
                let (a, b, ab) = triple_sum_covariance(&k, &lm);
                worst_cov = worst_cov
                    .max((cov.sigma_t2 - a).abs())
                    .max((cov.sigma_c2 - b).abs())
                    .max((cov.sigma_tc - ab).abs());
                compared += 1;
            }
            (Err(_), None) => both_rejected += 1,
            _ => disagreements += 1,
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = worst_comp < 1e-10 && worst_cov < 1e-10 && disagreements == 0 && compared >= 150 && secs < 30.0;
    report(
        2,
        ok,
        &format!(
            "{compared} compared, {both_rejected} rejected by both (zero weight), {disagreements} disagreements; max |dK|,|dL| {worst_comp:.1e}, max |dSigma| {worst_cov:.1e}, {secs:.2}s"
        ),
    );
    assert!(ok);
}

#[test]
fn criteria_03_04_unbiasedness_and_calibration() {
    let s = ScenarioSpec::exponential(Setting::I, 18.0, 200, 0.0).with_seed(3);
    let (truth, table) = study(&s, 1000, &[Method::Ipcw]);
    let row = table.row(Method::Ipcw).unwrap();
    let ratio = row.ase / row.ese;
    let ok3 = row.bias_pi_t.abs() < 0.01 && row.bias_pi_c.abs() < 0.01 && (truth.pi_t - 0.447).abs() < 0.001 + 3.0 * truth.se_pi_t;
    report(
        3,
        ok3,
        &format!(
            "true pi_t {:.4} pi_c {:.4} (reported 0.447); bias pi_t {:+.4}, pi_c {:+.4}; {} reps, {} failed",
            truth.pi_t, truth.pi_c, row.bias_pi_t, row.bias_pi_c, row.reps, row.failed
        ),
    );
    let ok4 = within(ratio, 0.90, 1.10) && within(row.cp, 0.93, 0.97);
    report(
        4,
        ok4,
        &format!("ASE {:.4}, ESE {:.4}, ratio {ratio:.3}; CP {:.3} (reported 0.144 / 0.142 / 0.946)", row.ase, row.ese, row.cp),
    );
    assert!(ok3 && ok4);
}

#[test]
fn criterion_05_positive_margin() {
    let s = ScenarioSpec::exponential(Setting::I, 18.0, 200, 6.0).with_seed(5);
    let (truth, table) = study(&s, 1000, &[Method::Ipcw]);
    let row = table.row(Method::Ipcw).unwrap();
    let ok = (truth.pi_t - 0.356).abs() <= 0.01 && within(row.cp, 0.93, 0.97);
    report(
        5,
        ok,
        &format!(
            "zeta = 6: true pi_t {:.4} (reported 0.356), CP {:.3} (reported 0.944), bias pi_t {:+.4}",
            truth.pi_t, row.cp, row.bias_pi_t
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_06_type_one_error_and_power() {
    let methods = [Method::Ipcw, Method::Logrank];
    let run = |setting, seed| {
        let s = ScenarioSpec::exponential(setting, 36.0, 400, 0.0).with_seed(seed);
        let (_, t) = study(&s, 500, &methods);
        (t.row(Method::Ipcw).unwrap().rejection, t.row(Method::Logrank).unwrap().rejection)
    };
    let (size, size_lr) = run(Setting::I, 61);
    let (pow2, lr2) = run(Setting::II, 62);
    let (pow3, lr3) = run(Setting::III, 63);
    let ok = within(size, 0.03, 0.07) && within(pow2, 0.90, 0.96) && within(lr2, 0.59, 0.69) && pow3 - lr3 >= 0.35;
    report(
        6,
        ok,
        &format!(
            "WR rejection I {size:.3} (0.047), II {pow2:.3} (0.931), III {pow3:.3} (0.794); log-rank I {size_lr:.3}, II {lr2:.3} (0.640), III {lr3:.3} (0.298); III gap {:.3}",
            pow3 - lr3
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_07_naive_bias() {
    let s = ScenarioSpec::exponential(Setting::III, 36.0, 400, 0.0).with_seed(7);
    let (_, t) = study(&s, 1000, &[Method::Ipcw, Method::Naive]);
    let naive = t.row(Method::Naive).unwrap();
    let ipcw = t.row(Method::Ipcw).unwrap();
    let ok = within(naive.bias_pi_t, -0.16, -0.11) && naive.cp < 0.92 && within(ipcw.cp, 0.93, 0.97);
    report(
        7,
        ok,
        &format!(
            "naive bias pi_t {:+.4} (-0.136), naive CP {:.3} (0.886); IPCW bias pi_t {:+.4}, CP {:.3}",
            naive.bias_pi_t, naive.cp, ipcw.bias_pi_t, ipcw.cp
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_08_weibull() {
    let s = ScenarioSpec::weibull(Setting::II, 36.0, 200, 0.0).unwrap().with_seed(8);
    let (truth, t) = study(&s, 1000, &[Method::Ipcw]);
    let row = t.row(Method::Ipcw).unwrap();
    let ok = within(row.bias_wr, 0.01, 0.06) && within(row.cp, 0.93, 0.98);
    report(
        8,
        ok,
        &format!(
            "true WR {:.4}; WR bias {:+.4} (0.032, MC SE {:.4}), CP {:.3} (0.956)",
            truth.wr, row.bias_wr, row.mcse_bias_wr, row.cp
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_09_induced_common_censoring() {
    let s = ScenarioSpec::induced_censoring(Setting::I, 0.25, 200, 0.0).with_seed(9);
    let (_, t) = study(&s, 500, &[Method::Ipcw, Method::TrueCommon, Method::TrueJoint]);
    let km = t.row(Method::Ipcw).unwrap();
    let tc = t.row(Method::TrueCommon).unwrap();
    let tj = t.row(Method::TrueJoint).unwrap();
    let var = |r: &winstat::simulate::SummaryRow| r.ese * r.ese;
    let ok = var(tj) <= var(km) && [km, tc, tj].iter().all(|r| r.bias_wr.abs() < 0.03);
    report(
        9,
        ok,
        &format!(
            "Var(log WR) KM {:.4}, true-common {:.4}, true-joint {:.4}; WR bias {:+.4} / {:+.4} / {:+.4}",
            var(km),
            var(tc),
            var(tj),
            km.bias_wr,
            tc.bias_wr,
            tj.bias_wr
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_10_interval_construction() {
    let se: f64 = 0.1485;
    let r = test_and_ci(Statistic::LogWr, 1.66, se * se, se * se, 0.05, VarianceMode::DeltaMethod).unwrap();
    let lo = format!("{:.2}", r.ci_low);
    let hi = format!("{:.2}", r.ci_high);
    let ok = lo == "1.24" && hi == "2.22" && within(r.p_two_sided, 0.0003, 0.0007);
    report(
        10,
        ok,
        &format!("WR 1.66, se 0.1485: CI [{lo}, {hi}], two-sided p {:.5}", r.p_two_sided),
    );
    assert!(ok);
}

fn swap_check(r: &mut rand_chacha::ChaCha8Rng) -> bool {
    for _ in 0..20 {
        let l = r.random_range(1..=3);
        let tau = 10.0;
        let (nt, nc) = (r.random_range(15..=40), r.random_range(15..=40));
        let data = random_dataset(r, l, nt, nc, tau, 0.05, None);
        let cfg = AnalysisConfig::new(l, tau).with_margins(random_margins(r, l, tau));
        let (Ok(a), Ok(b)) = (analyze(&data, &cfg), analyze(&data.swap_groups(), &cfg)) else {
            continue;
        };
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-10 * (1.0 + x.abs());
        if !(close(a.estimate.pi_t, b.estimate.pi_c) && close(a.estimate.pi_c, b.estimate.pi_t)) {
            return false;
        }
        for s in Statistic::ALL {
            let (ta, tb) = (a.test(s).unwrap(), b.test(s).unwrap());
            if !(close(ta.se, tb.se) && close(ta.z, -tb.z)) {
                return false;
            }
        }
    }
    true
}

fn scale_check(r: &mut rand_chacha::ChaCha8Rng) -> bool {
    for _ in 0..20 {
        let l = r.random_range(1..=3);
        let tau = 10.0;
        let (nt, nc) = (r.random_range(10..=30), r.random_range(10..=30));
        let data = random_dataset(r, l, nt, nc, tau, 0.05, None);
        let margins = random_margins(r, l, tau);
        let c = 3.7;
        let scaled: Vec<SubjectRecord> = data
            .subjects()
            .iter()
            .map(|s| {
                let t = s.times.iter().map(|&x| x * c).collect();
                SubjectRecord::new(s.id.clone(), s.group, t, s.events.clone()).unwrap()
            })
            .collect();
        let scaled = Dataset::with_tau(scaled, tau * c).unwrap();
        let cfg = AnalysisConfig::new(l, tau).with_margins(margins.clone());
        let cfg_s = AnalysisConfig::new(l, tau * c).with_margins(margins.iter().map(|m| m * c).collect());
        match (analyze(&data, &cfg), analyze(&scaled, &cfg_s)) {
            (Ok(a), Ok(b)) => {
                let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * (1.0 + x.abs());
                if !(close(a.estimate.pi_t, b.estimate.pi_t) && close(a.estimate.pi_c, b.estimate.pi_c)) {
                    return false;
                }
                if !close(a.covariance.sigma_t2, b.covariance.sigma_t2) {
                    return false;
                }
            }
            (Err(_), Err(_)) => {}
            _ => return false,
        }
    }
    true
}

fn thread_check() -> bool {
    let s = ScenarioSpec::exponential(Setting::II, 36.0, 120, 0.0).with_seed(11);
    let truth = true_values_mc(&s, 100_000).unwrap();
    let one = with_threads(1, || run_replications(&s, 12, &[Method::Ipcw, Method::Naive], &truth).unwrap());
    let four = with_threads(4, || run_replications(&s, 12, &[Method::Ipcw, Method::Naive], &truth).unwrap());
    let trial1 = with_threads(1, || generate_replicate(&s, 3).unwrap().analysis);
    let trial4 = with_threads(4, || generate_replicate(&s, 3).unwrap().analysis);
    let cfg = s.analysis_config();
    let a1 = with_threads(1, || analyze(&trial1, &cfg).unwrap());
    let a4 = with_threads(4, || analyze(&trial1, &cfg).unwrap());
    let bits = |t: &SummaryTable| t.replicates.iter().map(|r| r.log_wr.to_bits()).collect::<Vec<_>>();
    bits(&one) == bits(&four) && trial1 == trial4 && a1 == a4
}

fn km_check(r: &mut rand_chacha::ChaCha8Rng) -> bool {
    for _ in 0..50 {
        let data = random_dataset(r, 2, 40, 40, 10.0, 0.08, Some(0.5));
        for g in [Group::Treatment, Group::Control] {
            let recs = data.censoring_records(g);
            let curve = fit_censoring_survival(&recs);
            let h = curve.hazard_increments(HazardMode::NegLogKm);
            let mut cum = 0.0;
            for (k, &s) in h.times.iter().enumerate() {
                cum += h.increments[k];
                let km = curve.survival_at(s, Side::Right);
                if km > 0.0 && ((-cum).exp() - km).abs() > 1e-12 {
                    return false;
                }
                if curve.survival_at(s, Side::Left) < km {
                    return false;
                }
            }
            let n = recs.len() as f64;
            let mut prev = 1.0;
            for s in (0..30).map(|k| k as f64 * 0.4) {
                let f = at_risk_fraction(&recs, s);
                if f > prev || ((f * n).round() - f * n).abs() > 1e-9 {
                    return false;
                }
                prev = f;
            }
        }
    }
    let uncensored = random_dataset(r, 2, 30, 30, 10.0, 0.0, None);
    let g = fit_censoring_survival(&uncensored.censoring_records(Group::Treatment));
    g.jump_times().is_empty() && g.survival_at(5.0, Side::Left) == 1.0
}

/// KS distances of the marginals and normal-score correlations, n = 1e5.
fn copula_check() -> (bool, String) {
    let mut s = ScenarioSpec::exponential(Setting::III, 1e12, 100_000, 0.0).with_seed(13);
    s.n_c = 1;
    s.censoring = CensoringSpec::None;
    let data = generate_replicate(&s, 0).unwrap().analysis;
    let treat: Vec<&SubjectRecord> = data.group(Group::Treatment).collect();
    let n = treat.len() as f64;
    let crit = 1.628 / n.sqrt();
    let mut ok = true;
    let mut detail = Vec::new();
    for (l, m) in s.treatment.iter().enumerate() {
        let mut x: Vec<f64> = treat.iter().map(|t| t.times[l]).collect();
        x.sort_by(f64::total_cmp);
        let mut d: f64 = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            let f = m.cdf(xi);
            d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
        }
        ok &= d < crit;
        detail.push(format!("KS{} {d:.4}", l + 1));
    }
    if let Marginal::Exponential { rate } = s.treatment[0] {
        let mean = treat.iter().map(|t| t.times[0]).sum::<f64>() / n;
        ok &= (mean * rate - 1.0).abs() < 0.02;
    }
    let scores: Vec<Vec<f64>> = (0..s.n_endpoints)
        .map(|l| treat.iter().map(|t| -normal::quantile(s.treatment[l].survival(t.times[l]))).collect())
        .collect();
    for a in 0..s.n_endpoints {
        for b in a + 1..s.n_endpoints {
            let r = pearson(&scores[a], &scores[b]);
            ok &= (r - s.correlation[a * s.n_endpoints + b]).abs() < 0.02;
            detail.push(format!("r{}{} {r:.3}", a + 1, b + 1));
        }
    }
    (ok, detail.join(", "))
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

#[test]
fn criterion_11_property_suites() {
    let mut r = rng(1111);
    let swap = swap_check(&mut r);
    let scale = scale_check(&mut r);
    let threads = thread_check();
    let km = km_check(&mut r);
    let (copula, copula_detail) = copula_check();
    let ok = swap && scale && threads && km && copula;
    report(
        11,
        ok,
        &format!(
            "group swap {}, scale {}, thread determinism {}, KM reconstruction {}, copula {} ({copula_detail})",
            status(swap),
            status(scale),
            status(threads),
            status(km),
            status(copula)
        ),
    );
    assert!(ok);
}
