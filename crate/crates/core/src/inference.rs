//! Influence functions, the two-sample U-statistic covariance of
//! `(pi_t, pi_c)`, delta-method variances, tests and confidence intervals.

use serde::{Deserialize, Serialize};

use crate::config::{AnalysisConfig, VarianceMode};
use crate::data::{derive_censoring_record, CensoringRecord, Dataset, SubjectRecord};
use crate::error::{Result, WinError};
use crate::estimate::{
    estimate_resolved, naive_pairs, resolve_horizon, Groups, WeightProvider, Weights, WinProbEstimate, WinStatistics,
};
use crate::kernel::{enumerate_win_terms, Direction, KernelTerm};
use crate::km::{HazardIncrements, HazardMode, StepSurvival};
use crate::normal;
use crate::parallel::map_indexed;

/// `K[i][j]` (treatment-win) and `L[i][j]` (control-win) influence values,
/// stored row-major with treatment subjects as rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceComponents {
    pub n_t: usize,
    pub n_c: usize,
    pub k_matrix: Vec<f64>,
    pub l_matrix: Vec<f64>,
    pub k_row_sums: Vec<f64>,
    pub k_col_sums: Vec<f64>,
    pub l_row_sums: Vec<f64>,
    pub l_col_sums: Vec<f64>,
    /// Subjects whose follow-up reaches a dropped terminal censoring jump.
    pub truncated_subjects: usize,
}

impl InfluenceComponents {
    fn from_matrices(n_t: usize, n_c: usize, k: Vec<f64>, l: Vec<f64>, truncated: usize) -> Self {
        let rows = |m: &[f64]| (0..n_t).map(|i| m[i * n_c..(i + 1) * n_c].iter().sum()).collect();
        let cols = |m: &[f64]| {
            let mut out = vec![0.0; n_c];
            for i in 0..n_t {
                for j in 0..n_c {
                    out[j] += m[i * n_c + j];
                }
            }
            out
        };
        InfluenceComponents {
            n_t,
            n_c,
            k_row_sums: rows(&k),
            k_col_sums: cols(&k),
            l_row_sums: rows(&l),
            l_col_sums: cols(&l),
            k_matrix: k,
            l_matrix: l,
            truncated_subjects: truncated,
        }
    }

    pub fn k(&self, i: usize, j: usize) -> f64 {
        self.k_matrix[i * self.n_c + j]
    }

    pub fn l(&self, i: usize, j: usize) -> f64 {
        self.l_matrix[i * self.n_c + j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    pub sigma_t2: f64,
    pub sigma_c2: f64,
    pub sigma_tc: f64,
    /// Set when a diagonal entry came out negative.
    pub warning: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    LogWr,
    LogWo,
    Nb,
}

impl Statistic {
    pub const ALL: [Statistic; 3] = [Statistic::LogWr, Statistic::LogWo, Statistic::Nb];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::LogWr => "log_wr",
            Statistic::LogWo => "log_wo",
            Statistic::Nb => "nb",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: Statistic,
    /// Estimate on the natural scale (WR, WO or NB).
    pub point: f64,
    /// Standard error on the tested scale, used for the interval.
    pub se: f64,
    /// Standard error used in `z`; differs from `se` under the null variance.
    pub se_test: f64,
    pub z: f64,
    pub p_two_sided: f64,
    /// Against the alternative that treatment is better.
    pub p_one_sided: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub variance_mode: VarianceMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub estimate: WinProbEstimate,
    pub statistics: WinStatistics,
    pub covariance: CovarianceEstimate,
    pub tests: Vec<TestResult>,
    pub truncated_subjects: usize,
}

impl InferenceResult {
    pub fn test(&self, s: Statistic) -> Option<&TestResult> {
        self.tests.iter().find(|t| t.statistic == s)
    }
}

/// Per-group censoring martingale ingredients on the hazard jump grid.
pub(crate) struct GroupHazard {
    pub times: Vec<f64>,
    pub incr: Vec<f64>,
    /// `N / Y_k = 1 / y_hat(s_k)`
    pub inv_y: Vec<f64>,
    /// `cum[n] = sum_{k<n} incr_k / y_hat(s_k)`
    pub cum: Vec<f64>,
    /// Jump index of the subject's own censoring event, if it is on the grid.
    pub jump: Vec<Option<usize>>,
    /// Number of grid times `<= X~`.
    pub n_le: Vec<usize>,
    pub truncated: usize,
}

impl GroupHazard {
    pub fn new(subjects: &[&SubjectRecord], curve: &StepSurvival, mode: HazardMode) -> Self {
        let h = curve.hazard_increments(mode);
        let n = subjects.len() as f64;
        let inv_y: Vec<f64> = h.n_at_risk.iter().map(|&y| n / y as f64).collect();
        let mut cum = Vec::with_capacity(h.len() + 1);
        cum.push(0.0);
        for k in 0..h.len() {
            cum.push(cum[k] + h.increments[k] * inv_y[k]);
        }
        let recs: Vec<CensoringRecord> = subjects.iter().map(|s| derive_censoring_record(s)).collect();
        let jump = recs
            .iter()
            .map(|r| {
                if !r.delta_c {
                    return None;
                }
                let k = h.times.partition_point(|&s| s < r.x_tilde);
                (k < h.len() && h.times[k] == r.x_tilde).then_some(k)
            })
            .collect();
        let n_le = recs
            .iter()
            .map(|r| h.times.partition_point(|&s| s <= r.x_tilde))
            .collect();
        let truncated = match h.truncated_at {
            Some(t) => recs.iter().filter(|r| r.x_tilde >= t).count(),
            None => 0,
        };
        GroupHazard {
            times: h.times,
            incr: h.increments,
            inv_y,
            cum,
            jump,
            n_le,
            truncated,
        }
    }

    fn idx_lt(&self, u: f64) -> usize {
        self.times.partition_point(|&s| s < u)
    }

    /// `int_0^u dM_a(s) / y_hat(s)` over `s < u`.
    fn h_integral(&self, a: usize, n_lt: usize) -> f64 {
        let jump = match self.jump[a] {
            Some(k) if k < n_lt => self.inv_y[k],
            _ => 0.0,
        };
        jump - self.cum[n_lt.min(self.n_le[a])]
    }
}

/// Martingale increments `dM_i(s_k)` for each record on the grid of `h`.
pub fn martingale_jumps(records: &[CensoringRecord], h: &HazardIncrements) -> Vec<Vec<f64>> {
    records
        .iter()
        .map(|r| {
            h.times
                .iter()
                .zip(&h.increments)
                .map(|(&s, &incr)| {
                    let dn = if r.delta_c && r.x_tilde == s { 1.0 } else { 0.0 };
                    let at_risk = if r.x_tilde >= s { 1.0 } else { 0.0 };
                    dn - at_risk * incr
                })
                .collect()
        })
        .collect()
}

struct TermPrep {
    sc: f64,
    /// `val[w * n_o + a]`
    val: Vec<f64>,
    count: Vec<f64>,
    den: Vec<f64>,
    opp_idx: Vec<usize>,
    own_idx: Vec<usize>,
}

/// Influence values of one direction, indexed `[a * n_w + w]`.
fn direction_influence(
    terms: &[KernelTerm],
    groups: &Groups<'_>,
    weights: &Weights<'_>,
    hazards: Option<(&GroupHazard, &GroupHazard)>,
    tau: f64,
    floor: f64,
) -> Result<Vec<f64>> {
    let (winners, weighted) = groups.roles(&terms[0]);
    let (n_o, n_w) = (winners.len(), weighted.len());

    let mut preps = Vec::with_capacity(terms.len());
    for (q, term) in terms.iter().enumerate() {
        let sc = term.signed_coefficient();
        let cols = map_indexed(n_w, |wi| -> Result<(Vec<f64>, f64, f64, usize, usize)> {
            let w = weighted[wi];
            let mut col = vec![0.0; n_o];
            if !term.delta_ok(w) {
                return Ok((col, 0.0, 1.0, 0, 0));
            }
            let mut count = 0usize;
            let mut partner = 0;
            for (ai, a) in winners.iter().enumerate() {
                if term.compares(&a.times, &w.times, tau) {
                    if count == 0 {
                        partner = ai;
                    }
                    count += 1;
                }
            }
            if count == 0 {
                return Ok((col, 0.0, 1.0, 0, 0));
            }
            let den = weights.denominator(term, &w.times, tau);
            if !(den > floor) {
                return Err(WinError::DegenerateWeight {
                    term: q + 1,
                    group: term.weighted.to_string(),
                    subject: wi + 1,
                    partner: partner + 1,
                    weight: den,
                });
            }
            let v = sc / den;
            for (ai, a) in winners.iter().enumerate() {
                if term.compares(&a.times, &w.times, tau) {
                    col[ai] = v;
                }
            }
            let (opp_idx, own_idx) = match hazards {
                Some((h_o, h_w)) => (
                    h_o.idx_lt(term.opposite_argument(&w.times, tau)),
                    h_w.idx_lt(term.own_argument(&w.times, tau)),
                ),
                None => (0, 0),
            };
            Ok((col, count as f64, den, opp_idx, own_idx))
        });
        let mut prep = TermPrep {
            sc,
            val: Vec::with_capacity(n_o * n_w),
            count: Vec::with_capacity(n_w),
            den: Vec::with_capacity(n_w),
            opp_idx: Vec::with_capacity(n_w),
            own_idx: Vec::with_capacity(n_w),
        };
        for c in cols {
            let (col, count, den, opp, own) = c?;
            prep.val.extend_from_slice(&col);
            prep.count.push(count);
            prep.den.push(den);
            prep.opp_idx.push(opp);
            prep.own_idx.push(own);
        }
        preps.push(prep);
    }

    // P_aw summed over terms, and its grand mean
    let pair = |a: usize, w: usize| preps.iter().map(|p| p.val[w * n_o + a]).sum::<f64>();
    let mut p0 = 0.0;
    for a in 0..n_o {
        for w in 0..n_w {
            p0 += pair(a, w);
        }
    }
    p0 /= (n_o * n_w) as f64;

    let rows = map_indexed(n_o, |a| -> Vec<f64> {
        let mut row: Vec<f64> = (0..n_w).map(|w| pair(a, w) - p0).collect();
        let Some((h_o, h_w)) = hazards else {
            return row;
        };
        // D_a(s_k) = (1/N_W) sum_{q,m} val_q(a,m) I[own_arg_q(m) > s_k]
        let k_w = h_w.times.len();
        let mut bucket = vec![0.0; k_w + 1];
        for p in &preps {
            for m in 0..n_w {
                let v = p.val[m * n_o + a];
                if v != 0.0 {
                    bucket[p.own_idx[m]] += v;
                }
            }
        }
        let mut d = vec![0.0; k_w];
        let mut acc = 0.0;
        for k in (0..k_w).rev() {
            acc += bucket[k + 1];
            d[k] = acc / n_w as f64;
        }
        let mut e = Vec::with_capacity(k_w + 1);
        e.push(0.0);
        for k in 0..k_w {
            e.push(e[k] + d[k] * h_w.incr[k] * h_w.inv_y[k]);
        }
        for (w, r) in row.iter_mut().enumerate() {
            let mut b_part = 0.0;
            for p in &preps {
                if p.count[w] != 0.0 {
                    let b = p.sc * p.count[w] / (n_o as f64 * p.den[w]);
                    b_part += b * h_o.h_integral(a, p.opp_idx[w]);
                }
            }
            let jump = match h_w.jump[w] {
                Some(k) => d[k] * h_w.inv_y[k],
                None => 0.0,
            };
            *r += b_part + jump - e[h_w.n_le[w]];
        }
        row
    });
    Ok(rows.concat())
}

/// Influence components with KM weights (full martingale correction).
pub fn influence_components(dataset: &Dataset, config: &AnalysisConfig) -> Result<InfluenceComponents> {
    influence_components_with(dataset, config, &WeightProvider::KaplanMeier)
}

/// Influence components for any weight provider. Only estimated (KM) weights
/// carry censoring-martingale terms; known or unit weights give the
/// kernel-only U-statistic projection `P_ij - P_0`.
pub fn influence_components_with(
    dataset: &Dataset,
    config: &AnalysisConfig,
    provider: &WeightProvider,
) -> Result<InfluenceComponents> {
    let data = resolve_horizon(dataset, config)?;
    let weights = Weights::resolve(provider, &data)?;
    components_resolved(&data, config, &weights)
}

fn components_resolved(data: &Dataset, config: &AnalysisConfig, weights: &Weights<'_>) -> Result<InfluenceComponents> {
    let groups = Groups::new(data);
    let (n_t, n_c) = (groups.treat.len(), groups.ctrl.len());
    if let Weights::Naive = weights {
        let out = naive_pairs(&groups, &config.margins);
        let n = (n_t * n_c) as f64;
        let ind = |v: i8| -> Vec<f64> { out.iter().map(|&o| if o == v { 1.0 } else { 0.0 }).collect() };
        let center = |mut m: Vec<f64>| {
            let mean = m.iter().sum::<f64>() / n;
            m.iter_mut().for_each(|x| *x -= mean);
            m
        };
        return Ok(InfluenceComponents::from_matrices(n_t, n_c, center(ind(1)), center(ind(-1)), 0));
    }
    let tau = data.tau();
    let hz = weights.km_curves().map(|(g_t, g_c)| {
        (
            GroupHazard::new(&groups.treat, g_t, config.hazard_mode),
            GroupHazard::new(&groups.ctrl, g_c, config.hazard_mode),
        )
    });
    let l = data.n_endpoints();
    let t_terms = enumerate_win_terms(l, &config.margins, Direction::TreatmentWins)?;
    let c_terms = enumerate_win_terms(l, &config.margins, Direction::ControlWins)?;
    // treatment wins: a = treatment (O), w = control (W)
    let k = direction_influence(
        &t_terms,
        &groups,
        weights,
        hz.as_ref().map(|(t, c)| (t, c)),
        tau,
        config.weight_floor,
    )?;
    // control wins: a = control, w = treatment; stored as [j * n_t + i]
    let lt = direction_influence(
        &c_terms,
        &groups,
        weights,
        hz.as_ref().map(|(t, c)| (c, t)),
        tau,
        config.weight_floor,
    )?;
    let mut l_mat = vec![0.0; n_t * n_c];
    for j in 0..n_c {
        for i in 0..n_t {
            l_mat[i * n_c + j] = lt[j * n_t + i];
        }
    }
    let truncated = hz.as_ref().map_or(0, |(t, c)| t.truncated + c.truncated);
    Ok(InfluenceComponents::from_matrices(n_t, n_c, k, l_mat, truncated))
}

/// Two-sample U-statistic covariance of `(pi_t, pi_c)` scaled by `N_t + N_c`.
pub fn covariance(c: &InfluenceComponents) -> Result<CovarianceEstimate> {
    let (n_t, n_c) = (c.n_t, c.n_c);
    if n_t < 2 || n_c < 2 {
        return Err(WinError::InsufficientSample(format!(
            "covariance needs at least 2 subjects per group, got ({n_t}, {n_c})"
        )));
    }
    let (nt, nc) = (n_t as f64, n_c as f64);
    let c1 = (nt + nc) / (nt * nt * nc * (nc - 1.0));
    let c2 = (nt + nc) / (nt * (nt - 1.0) * nc * nc);
    // sum of squares over all pairs, shared by both parts
    let (mut skk, mut sll, mut skl) = (0.0, 0.0, 0.0);
    for (k, l) in c.k_matrix.iter().zip(&c.l_matrix) {
        skk += k * k;
        sll += l * l;
        skl += k * l;
    }
    let outer = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let row = (
        outer(&c.k_row_sums, &c.k_row_sums) - skk,
        outer(&c.l_row_sums, &c.l_row_sums) - sll,
        outer(&c.k_row_sums, &c.l_row_sums) - skl,
    );
    let col = (
        outer(&c.k_col_sums, &c.k_col_sums) - skk,
        outer(&c.l_col_sums, &c.l_col_sums) - sll,
        outer(&c.k_col_sums, &c.l_col_sums) - skl,
    );
    let sigma_t2 = c1 * row.0 + c2 * col.0;
    let sigma_c2 = c1 * row.1 + c2 * col.1;
    let sigma_tc = c1 * row.2 + c2 * col.2;
    Ok(CovarianceEstimate {
        sigma_t2,
        sigma_c2,
        sigma_tc,
        warning: sigma_t2 < 0.0 || sigma_c2 < 0.0,
    })
}

fn positive(statistic: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(WinError::NonPositiveVariance {
            statistic: statistic.to_string(),
            value: v,
        })
    }
}

/// Delta-method variance of the statistic on its tested scale.
pub fn statistic_variance(
    cov: &CovarianceEstimate,
    pi_t: f64,
    pi_c: f64,
    statistic: Statistic,
    n_total: usize,
) -> Result<f64> {
    let n = n_total as f64;
    let contrast = cov.sigma_t2 + cov.sigma_c2 - 2.0 * cov.sigma_tc;
    let v = match statistic {
        Statistic::LogWr => {
            if !(pi_t > 0.0 && pi_c > 0.0) {
                return Err(WinError::UndefinedRatio);
            }
            (cov.sigma_t2 / (pi_t * pi_t) + cov.sigma_c2 / (pi_c * pi_c) - 2.0 * cov.sigma_tc / (pi_t * pi_c)) / n
        }
        Statistic::LogWo => {
            let d = pi_t - pi_c;
            4.0 * contrast / (1.0 - d * d).powi(2) / n
        }
        Statistic::Nb => contrast / n,
    };
    positive(statistic.name(), v)
}

/// Variance of the log win ratio under `pi_t = pi_c`.
pub fn null_variance_log_wr(cov: &CovarianceEstimate, pi_tie: f64, n_total: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&pi_tie) {
        return Err(WinError::Undefined(format!("null variance needs tie probability below 1, got {pi_tie}")));
    }
    let v = 4.0 * (cov.sigma_t2 + cov.sigma_c2 - 2.0 * cov.sigma_tc) / (n_total as f64 * (1.0 - pi_tie).powi(2));
    positive("log_wr (null)", v)
}

/// z-test and `100(1 - alpha)%` interval. `variance` builds the interval;
/// `test_variance` builds `z`.
pub fn test_and_ci(
    statistic: Statistic,
    point: f64,
    variance: f64,
    test_variance: f64,
    alpha: f64,
    variance_mode: VarianceMode,
) -> Result<TestResult> {
    let se = positive(statistic.name(), variance)?.sqrt();
    let se_test = positive(statistic.name(), test_variance)?.sqrt();
    let scaled = match statistic {
        Statistic::LogWr | Statistic::LogWo => {
            if !(point > 0.0) {
                return Err(WinError::Undefined(format!("{} needs a positive estimate", statistic.name())));
            }
            point.ln()
        }
        Statistic::Nb => point,
    };
    let z = scaled / se_test;
    let q = normal::quantile(1.0 - alpha / 2.0);
    let (lo, hi) = (scaled - q * se, scaled + q * se);
    let (ci_low, ci_high) = match statistic {
        Statistic::Nb => (lo, hi),
        _ => (lo.exp(), hi.exp()),
    };
    Ok(TestResult {
        statistic,
        point,
        se,
        se_test,
        z,
        p_two_sided: (2.0 * normal::sf(z.abs())).min(1.0),
        p_one_sided: normal::sf(z),
        ci_low,
        ci_high,
        variance_mode,
    })
}

/// Point estimates, covariance and tests for all three statistics with KM
/// weights.
pub fn analyze(dataset: &Dataset, config: &AnalysisConfig) -> Result<InferenceResult> {
    analyze_with(dataset, config, &WeightProvider::KaplanMeier)
}

pub fn analyze_with(dataset: &Dataset, config: &AnalysisConfig, provider: &WeightProvider) -> Result<InferenceResult> {
    let data = resolve_horizon(dataset, config)?;
    let weights = Weights::resolve(provider, &data)?;
    let estimate = estimate_resolved(&data, config, &weights, provider.provenance())?;
    let statistics = estimate.statistics();
    statistics.wr()?;
    let comps = components_resolved(&data, config, &weights)?;
    let cov = covariance(&comps)?;
    let n = estimate.n_t + estimate.n_c;
    let (pt, pc) = (estimate.pi_t, estimate.pi_c);
    let mut tests = Vec::with_capacity(3);
    for s in Statistic::ALL {
        let v = statistic_variance(&cov, pt, pc, s, n)?;
        let (point, v_test, mode) = match s {
            Statistic::LogWr => {
                let v_test = match config.variance_mode {
                    VarianceMode::DeltaMethod => v,
                    VarianceMode::NullVariance => null_variance_log_wr(&cov, estimate.pi_tie, n)?,
                };
                (statistics.wr()?, v_test, config.variance_mode)
            }
            Statistic::LogWo => (statistics.wo()?, v, VarianceMode::DeltaMethod),
            Statistic::Nb => (statistics.nb, v, VarianceMode::DeltaMethod),
        };
        tests.push(test_and_ci(s, point, v, v_test, config.alpha, mode)?);
    }
    Ok(InferenceResult {
        estimate,
        statistics,
        covariance: cov,
        tests,
        truncated_subjects: comps.truncated_subjects,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Group;
    use approx::assert_abs_diff_eq;

    fn cov(t2: f64, c2: f64, tc: f64) -> CovarianceEstimate {
        CovarianceEstimate {
            sigma_t2: t2,
            sigma_c2: c2,
            sigma_tc: tc,
            warning: false,
        }
    }

    #[test]
    fn variance_examples() {
        assert!(statistic_variance(&cov(1.0, 1.0, 1.0), 0.4, 0.4, Statistic::LogWr, 100).is_err());
        let v = statistic_variance(&cov(4.0, 3.0, 1.0), 0.5, 0.4, Statistic::LogWr, 400).unwrap();
        assert_abs_diff_eq!(v, 0.061875, epsilon = 1e-15);
        let v = statistic_variance(&cov(1.0, 1.0, 0.0), 0.5, 0.3, Statistic::Nb, 200).unwrap();
        assert_abs_diff_eq!(v, 0.01, epsilon = 1e-15);
        let v = statistic_variance(&cov(1.0, 1.0, 0.0), 0.5, 0.5, Statistic::LogWo, 200).unwrap();
        assert_abs_diff_eq!(v, 0.04, epsilon = 1e-15);
    }

    #[test]
    fn null_variance_examples() {
        let c = cov(1.0, 1.0, 0.0);
        assert_abs_diff_eq!(null_variance_log_wr(&c, 0.0, 400).unwrap(), 0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(null_variance_log_wr(&c, 0.5, 400).unwrap(), 0.08, epsilon = 1e-15);
        assert!(null_variance_log_wr(&cov(1.0, 1.0, 1.0), 0.2, 400).is_err());
        assert!(null_variance_log_wr(&c, 1.0, 400).is_err());
    }

    #[test]
    fn interval_example() {
        let se: f64 = 0.1485;
        let r = test_and_ci(Statistic::LogWr, 1.66, se * se, se * se, 0.05, VarianceMode::DeltaMethod).unwrap();
        assert_eq!(format!("{:.2}", r.ci_low), "1.24");
        assert_eq!(format!("{:.2}", r.ci_high), "2.22");
        assert!(r.p_two_sided > 0.0003 && r.p_two_sided < 0.0007);

        let r = test_and_ci(Statistic::LogWr, 1.0, 0.01, 0.01, 0.05, VarianceMode::DeltaMethod).unwrap();
        assert_eq!((r.z, r.p_two_sided, r.p_one_sided), (0.0, 1.0, 0.5));

        let r = test_and_ci(Statistic::Nb, 1.959964, 1.0, 1.0, 0.05, VarianceMode::DeltaMethod).unwrap();
        assert_abs_diff_eq!(r.p_two_sided, 0.05, epsilon = 1e-6);
        assert!(test_and_ci(Statistic::Nb, 0.1, -1.0, 1.0, 0.05, VarianceMode::DeltaMethod).is_err());
    }

    #[test]
    fn zero_components_give_zero_covariance() {
        let c = InfluenceComponents::from_matrices(2, 3, vec![0.0; 6], vec![0.0; 6], 0);
        let s = covariance(&c).unwrap();
        assert_eq!((s.sigma_t2, s.sigma_c2, s.sigma_tc), (0.0, 0.0, 0.0));
        let c = InfluenceComponents::from_matrices(1, 3, vec![0.0; 3], vec![0.0; 3], 0);
        assert!(matches!(covariance(&c), Err(WinError::InsufficientSample(_))));
    }

    #[test]
    fn uncensored_components_are_centered_kernels() {
        let s = vec![
            SubjectRecord::new("t1", Group::Treatment, vec![2.0], vec![true]).unwrap(),
            SubjectRecord::new("t2", Group::Treatment, vec![4.0], vec![true]).unwrap(),
            SubjectRecord::new("c1", Group::Control, vec![1.0], vec![true]).unwrap(),
            SubjectRecord::new("c2", Group::Control, vec![3.0], vec![true]).unwrap(),
        ];
        let d = Dataset::with_tau(s, 10.0).unwrap();
        let c = influence_components(&d, &AnalysisConfig::new(1, 10.0)).unwrap();
        // P = [[1, 0], [1, 1]], P0 = 0.75
        assert_eq!(c.k_matrix, vec![0.25, -0.75, 0.25, 0.25]);
        assert_eq!(c.l_matrix, vec![-0.25, 0.75, -0.25, -0.25]);
    }

    #[test]
    fn nelson_aalen_martingales_sum_to_zero() {
        let recs: Vec<CensoringRecord> = [(1.0, true), (2.0, false), (2.0, true), (3.0, true), (5.0, false)]
            .iter()
            .map(|&(x_tilde, delta_c)| CensoringRecord { x_tilde, delta_c })
            .collect();
        let g = crate::km::fit_censoring_survival(&recs);
        let h = g.hazard_increments(HazardMode::NelsonAalen);
        let m = martingale_jumps(&recs, &h);
        for k in 0..h.len() {
            let total: f64 = m.iter().map(|r| r[k]).sum();
            assert_abs_diff_eq!(total, 0.0, epsilon = 1e-15);
        }
    }
}
