#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use winstat::data::apply_horizon;
use winstat::kernel::{enumerate_win_terms, Direction, KernelTerm};
use winstat::km::fit_censoring_survival;
use winstat::{AnalysisConfig, Dataset, Group, HazardMode, Side, StepSurvival, SubjectRecord};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random two-group dataset. `censor_rate = 0` gives uncensored data;
/// `grid` rounds raw times up to a multiple of it to create ties.
pub fn random_dataset(
    rng: &mut ChaCha8Rng,
    l: usize,
    n_t: usize,
    n_c: usize,
    tau: f64,
    censor_rate: f64,
    grid: Option<f64>,
) -> Dataset {
    let round = |x: f64| match grid {
        Some(g) => (x / g).ceil() * g,
        None => x,
    };
    let mut subjects = Vec::new();
    for (g, n, scale) in [(Group::Treatment, n_t, 1.2), (Group::Control, n_c, 1.0)] {
        for i in 0..n {
            let times: Vec<f64> = (0..l)
                .map(|k| round(-(1.0 - rng.random::<f64>()).ln() * tau * scale / (1.0 + k as f64 * 0.3)))
                .collect();
            let c = if censor_rate > 0.0 {
                round(-(1.0 - rng.random::<f64>()).ln() / censor_rate)
            } else {
                f64::INFINITY
            };
            let (x, d) = apply_horizon(&times, c, tau).unwrap();
            subjects.push(SubjectRecord::new(format!("{}{i}", g.label()), g, x, d).unwrap());
        }
    }
    Dataset::with_tau(subjects, tau).unwrap()
}

pub fn random_margins(rng: &mut ChaCha8Rng, l: usize, tau: f64) -> Vec<f64> {
    if rng.random::<bool>() {
        vec![0.0; l]
    } else {
        (0..l).map(|_| rng.random_range(0.02..0.3) * tau).collect()
    }
}

/// Pairwise outcome on uncensored truncated times: compare endpoint by
/// endpoint, moving on when the difference is within the margin (or both
/// reach the horizon when the margin is zero).
pub fn brute_outcome(t: &[f64], c: &[f64], margins: &[f64]) -> i8 {
    for l in 0..t.len() {
        let z = margins[l];
        if t[l] > c[l] + z {
            return 1;
        }
        if c[l] > t[l] + z {
            return -1;
        }
    }
    0
}

pub fn brute_probabilities(data: &Dataset, margins: &[f64]) -> (f64, f64, f64) {
    let t: Vec<_> = data.group(Group::Treatment).collect();
    let c: Vec<_> = data.group(Group::Control).collect();
    let (mut w, mut lo, mut tie) = (0usize, 0usize, 0usize);
    for a in &t {
        for b in &c {
            match brute_outcome(&a.times, &b.times, margins) {
                1 => w += 1,
                -1 => lo += 1,
                _ => tie += 1,
            }
        }
    }
    let n = (t.len() * c.len()) as f64;
    (w as f64 / n, lo as f64 / n, tie as f64 / n)
}

/// Censoring martingale ingredients written out from their definitions.
struct Mart {
    x: Vec<f64>,
    dc: Vec<bool>,
    grid: Vec<f64>,
    dlambda: Vec<f64>,
    curve: StepSurvival,
}

impl Mart {
    fn new(subjects: &[&SubjectRecord], mode: HazardMode) -> Self {
        let x: Vec<f64> = subjects.iter().map(|s| s.times.iter().copied().fold(0.0, f64::max)).collect();
        let dc: Vec<bool> = subjects.iter().map(|s| s.events.iter().any(|e| !e)).collect();
        let recs: Vec<_> = subjects.iter().map(|s| winstat::data::derive_censoring_record(s)).collect();
        let curve = fit_censoring_survival(&recs);
        let mut grid: Vec<f64> = x.iter().zip(&dc).filter(|(_, &d)| d).map(|(&x, _)| x).collect();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let mut kept = Vec::new();
        let mut dlambda = Vec::new();
        for &s in &grid {
            let after = curve.survival_at(s, Side::Right);
            if after <= 0.0 {
                break;
            }
            let before = curve.survival_at(s, Side::Left);
            let d = x.iter().zip(&dc).filter(|(&xi, &di)| di && xi == s).count() as f64;
            let y = x.iter().filter(|&&xi| xi >= s).count() as f64;
            dlambda.push(match mode {
                HazardMode::NegLogKm => -(after / before).ln(),
                HazardMode::NelsonAalen => d / y,
            });
            kept.push(s);
        }
        Mart {
            x,
            dc,
            grid: kept,
            dlambda,
            curve,
        }
    }

    fn dm(&self, i: usize, k: usize) -> f64 {
        let s = self.grid[k];
        let dn = if self.dc[i] && self.x[i] == s { 1.0 } else { 0.0 };
        let at_risk = if self.x[i] >= s { 1.0 } else { 0.0 };
        dn - at_risk * self.dlambda[k]
    }

    fn y(&self, k: usize) -> f64 {
        let s = self.grid[k];
        self.x.iter().filter(|&&xi| xi >= s).count() as f64 / self.x.len() as f64
    }
}

/// Influence values of one direction as `[a][w]`, evaluated term by term
/// with every integral as an explicit sum over jump times. `None` when a
/// contributing weight is at or below the floor.
fn literal_direction(
    terms: &[KernelTerm],
    winners: &[&SubjectRecord],
    weighted: &[&SubjectRecord],
    m_o: &Mart,
    m_w: &Mart,
    tau: f64,
    floor: f64,
) -> Option<Vec<Vec<f64>>> {
    let (n_o, n_w) = (winners.len(), weighted.len());
    let mut xi = vec![vec![0.0; n_w]; n_o];
    for term in terms {
        let sc = term.signed_coefficient();
        let g1 = |w: usize| term.opposite_argument(&weighted[w].times, tau);
        let g2 = |w: usize| term.own_argument(&weighted[w].times, tau);
        let den =
            |w: usize| m_o.curve.survival_at(g1(w), Side::Right) * m_w.curve.survival_at(g2(w), Side::Left);
        let f = |a: usize, w: usize| if term.indicator(winners[a], weighted[w], tau) { sc } else { 0.0 };
        let mut p = vec![vec![0.0; n_w]; n_o];
        for a in 0..n_o {
            for w in 0..n_w {
                let fv = f(a, w);
                if fv != 0.0 {
                    let d = den(w);
                    if !(d > floor) {
                        return None;
                    }
                    p[a][w] = fv / d;
                }
            }
        }
        let p0 = p.iter().flatten().sum::<f64>() / (n_o * n_w) as f64;
        for a in 0..n_o {
            for w in 0..n_w {
                let mut v = p[a][w] - p0;
                for k in 0..m_o.grid.len() {
                    let s = m_o.grid[k];
                    let mut avg = 0.0;
                    for kk in 0..n_o {
                        if g1(w) > s && f(kk, w) != 0.0 {
                            avg += f(kk, w) / den(w);
                        }
                    }
                    avg /= n_o as f64;
                    v += avg * m_o.dm(a, k) / m_o.y(k);
                }
                for k in 0..m_w.grid.len() {
                    let s = m_w.grid[k];
                    let mut avg = 0.0;
                    for m in 0..n_w {
                        if g2(m) > s && f(a, m) != 0.0 {
                            avg += f(a, m) / den(m);
                        }
                    }
                    avg /= n_w as f64;
                    v += avg * m_w.dm(w, k) / m_w.y(k);
                }
                xi[a][w] += v;
            }
        }
    }
    Some(xi)
}

/// `(K, L)` as `[i][j]` with treatment rows.
pub fn literal_components(data: &Dataset, config: &AnalysisConfig) -> Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let t: Vec<_> = data.group(Group::Treatment).collect();
    let c: Vec<_> = data.group(Group::Control).collect();
    let m_t = Mart::new(&t, config.hazard_mode);
    let m_c = Mart::new(&c, config.hazard_mode);
    let l = data.n_endpoints();
    let tau = data.tau();
    let tt = enumerate_win_terms(l, &config.margins, Direction::TreatmentWins).unwrap();
    let ct = enumerate_win_terms(l, &config.margins, Direction::ControlWins).unwrap();
    let k = literal_direction(&tt, &t, &c, &m_t, &m_c, tau, config.weight_floor)?;
    let lt = literal_direction(&ct, &c, &t, &m_c, &m_t, tau, config.weight_floor)?;
    let l_mat = (0..t.len()).map(|i| (0..c.len()).map(|j| lt[j][i]).collect()).collect();
    Some((k, l_mat))
}

/// Covariance as the double sums over distinct column pairs and distinct
/// row pairs. Returns `(sigma_t2, sigma_c2, sigma_tc)`.
pub fn triple_sum_covariance(k: &[Vec<f64>], l: &[Vec<f64>]) -> (f64, f64, f64) {
    let (n_t, n_c) = (k.len(), k[0].len());
    let (nt, nc) = (n_t as f64, n_c as f64);
    let c1 = (nt + nc) / (nt * nt * nc * (nc - 1.0));
    let c2 = (nt + nc) / (nt * (nt - 1.0) * nc * nc);
    let (mut a, mut b, mut ab) = (0.0, 0.0, 0.0);
    for i in 0..n_t {
        for j in 0..n_c {
            for jp in 0..n_c {
                if jp != j {
                    a += c1 * k[i][j] * k[i][jp];
                    b += c1 * l[i][j] * l[i][jp];
                    ab += c1 * k[i][j] * l[i][jp];
                }
            }
        }
    }
    for i in 0..n_t {
        for ip in 0..n_t {
            if ip == i {
                continue;
            }
            for j in 0..n_c {
                a += c2 * k[i][j] * k[ip][j];
                b += c2 * l[i][j] * l[ip][j];
                ab += c2 * k[i][j] * l[ip][j];
            }
        }
    }
    (a, b, ab)
}

pub fn status(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}
