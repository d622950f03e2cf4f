//! Marginal event-time distributions, censoring mechanisms and the Gaussian
//! copula used to correlate endpoints.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WinError};
use crate::estimate::{JointSurvivalFn, SurvivalFn};
use crate::normal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Marginal {
    Exponential { rate: f64 },
    /// `S(t) = exp(-(t / scale)^shape)`
    Weibull { shape: f64, scale: f64 },
    /// Hazard `rates[k]` on `[starts[k], starts[k + 1])`, with `starts[0] = 0`.
    PiecewiseExponential { starts: Vec<f64>, rates: Vec<f64> },
}

impl Marginal {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(WinError::config(m));
        match self {
            Marginal::Exponential { rate } if !(*rate > 0.0 && rate.is_finite()) => {
                bad(format!("exponential rate must be positive, got {rate}"))
            }
            Marginal::Weibull { shape, scale } if !(*shape > 0.0 && *scale > 0.0) => {
                bad(format!("weibull shape and scale must be positive, got ({shape}, {scale})"))
            }
            Marginal::PiecewiseExponential { starts, rates } => {
                if starts.is_empty() || starts.len() != rates.len() || starts[0] != 0.0 {
                    return bad("piecewise exponential needs matching starts and rates with first start 0".into());
                }
                if starts.windows(2).any(|w| !(w[1] > w[0])) {
                    return bad("piecewise exponential breakpoints must increase".into());
                }
                if rates.iter().any(|r| !(*r >= 0.0 && r.is_finite())) || !(rates[rates.len() - 1] > 0.0) {
                    return bad("piecewise exponential rates must be nonnegative with a positive last rate".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn cum_hazard(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            Marginal::Exponential { rate } => rate * t,
            Marginal::Weibull { shape, scale } => (t / scale).powf(*shape),
            Marginal::PiecewiseExponential { starts, rates } => {
                let mut h = 0.0;
                for k in 0..starts.len() {
                    let end = starts.get(k + 1).copied().unwrap_or(f64::INFINITY);
                    if t <= starts[k] {
                        break;
                    }
                    h += rates[k] * (t.min(end) - starts[k]);
                }
                h
            }
        }
    }

    pub fn survival(&self, t: f64) -> f64 {
        (-self.cum_hazard(t)).exp()
    }

    pub fn cdf(&self, t: f64) -> f64 {
        -(-self.cum_hazard(t)).exp_m1()
    }

    /// Time at which the cumulative hazard reaches `h >= 0`.
    pub fn inverse_cum_hazard(&self, h: f64) -> f64 {
        match self {
            Marginal::Exponential { rate } => h / rate,
            Marginal::Weibull { shape, scale } => scale * h.powf(1.0 / shape),
            Marginal::PiecewiseExponential { starts, rates } => {
                let mut acc = 0.0;
                for k in 0..starts.len() {
                    let end = starts.get(k + 1).copied().unwrap_or(f64::INFINITY);
                    let seg = rates[k] * (end - starts[k]);
                    if acc + seg >= h {
                        return starts[k] + (h - acc) / rates[k];
                    }
                    acc += seg;
                }
                f64::INFINITY
            }
        }
    }

    /// `F^{-1}(u)` for `u` in `(0, 1)`.
    pub fn inverse_cdf(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(WinError::Domain(format!("inverse cdf needs u in (0, 1), got {u}")));
        }
        Ok(self.inverse_cum_hazard(-(-u).ln_1p()))
    }

    /// `S^{-1}(v)` for `v` in `(0, 1]`; avoids forming `1 - v` for draws in
    /// the upper tail.
    pub fn inverse_survival(&self, v: f64) -> f64 {
        self.inverse_cum_hazard(-v.max(f64::MIN_POSITIVE).ln())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.inverse_survival(1.0 - u)
    }
}

impl fmt::Display for Marginal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Marginal::Exponential { rate } => write!(f, "exp({rate})"),
            Marginal::Weibull { shape, scale } => write!(f, "weibull({shape}, {scale})"),
            Marginal::PiecewiseExponential { starts, rates } => {
                let parts: Vec<String> = starts.iter().zip(rates).map(|(s, r)| format!("{s}:{r}")).collect();
                write!(f, "pwexp({})", parts.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CensoringSpec {
    None,
    /// One censoring time shared by all endpoints.
    Common { dist: Marginal },
    /// Endpoint-specific censoring for two endpoints joined by a Gaussian
    /// copula with correlation `rho`.
    Bivariate { rho: f64, first: Marginal, second: Marginal },
}

impl CensoringSpec {
    pub fn validate(&self, n_endpoints: usize) -> Result<()> {
        match self {
            CensoringSpec::None => Ok(()),
            CensoringSpec::Common { dist } => dist.validate(),
            CensoringSpec::Bivariate { rho, first, second } => {
                if n_endpoints != 2 {
                    return Err(WinError::config("bivariate censoring needs exactly 2 endpoints"));
                }
                if !(-1.0..=1.0).contains(rho) {
                    return Err(WinError::config(format!("censoring correlation must lie in [-1, 1], got {rho}")));
                }
                first.validate()?;
                second.validate()
            }
        }
    }
}

impl fmt::Display for CensoringSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CensoringSpec::None => f.write_str("none"),
            CensoringSpec::Common { dist } => write!(f, "{dist}"),
            CensoringSpec::Bivariate { rho, first, second } => write!(f, "bivariate({rho}, {first}, {second})"),
        }
    }
}

/// True censoring survival functions: the common curve `P(C > s)` (for
/// bivariate censoring, `P(C1 > s, C2 > s)`) and, for bivariate censoring,
/// the joint survival `S12(a, b) = P(C1 > a, C2 > b)`.
pub struct TrueCensoring {
    pub common: SurvivalFn,
    pub joint: Option<JointSurvivalFn>,
}

const BIVARIATE_TOL: f64 = 1e-10;

pub fn true_censoring_survival(censoring: &CensoringSpec) -> TrueCensoring {
    match censoring {
        CensoringSpec::None => TrueCensoring {
            common: Arc::new(|_| 1.0),
            joint: None,
        },
        CensoringSpec::Common { dist } => {
            let d = dist.clone();
            TrueCensoring {
                common: Arc::new(move |s| d.survival(s)),
                joint: None,
            }
        }
        CensoringSpec::Bivariate { rho, first, second } => {
            let (rho, f1, f2) = (*rho, first.clone(), second.clone());
            let joint: JointSurvivalFn = Arc::new(move |a: f64, b: f64| {
                if a <= 0.0 {
                    return f2.survival(b);
                }
                if b <= 0.0 {
                    return f1.survival(a);
                }
                // upper orthant in normal scores; quantile(F) = -quantile(S)
                let za = -normal::quantile(f1.survival(a));
                let zb = -normal::quantile(f2.survival(b));
                normal::bivariate_upper(za, zb, rho, BIVARIATE_TOL)
            });
            let j = joint.clone();
            TrueCensoring {
                common: Arc::new(move |s| j(s, s)),
                joint: Some(joint),
            }
        }
    }
}

/// Lower Cholesky factor of a correlation matrix, used to draw `N(0, R)`.
#[derive(Debug, Clone)]
pub struct GaussianCopula {
    dim: usize,
    factor: Vec<f64>,
}

impl GaussianCopula {
    /// `r` is row-major `dim x dim`, symmetric with unit diagonal.
    pub fn new(r: &[f64], dim: usize) -> Result<Self> {
        if r.len() != dim * dim || dim == 0 {
            return Err(WinError::config(format!("correlation matrix needs {} entries", dim * dim)));
        }
        for i in 0..dim {
            if r[i * dim + i] != 1.0 {
                return Err(WinError::config("correlation matrix needs a unit diagonal"));
            }
            for j in 0..i {
                if r[i * dim + j] != r[j * dim + i] || r[i * dim + j].abs() > 1.0 {
                    return Err(WinError::config("correlation matrix must be symmetric with entries in [-1, 1]"));
                }
            }
        }
        let m = DMatrix::from_row_slice(dim, dim, r);
        let chol = m
            .cholesky()
            .ok_or_else(|| WinError::config("correlation matrix is not positive definite"))?;
        let l = chol.l();
        let factor = (0..dim * dim).map(|k| l[(k / dim, k % dim)]).collect();
        Ok(GaussianCopula { dim, factor })
    }

    /// Equicorrelation matrix with off-diagonal `rho`.
    pub fn equicorrelated(dim: usize, rho: f64) -> Result<Self> {
        GaussianCopula::new(&equicorrelation(dim, rho), dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// One draw of `Z ~ N(0, R)`.
    pub fn sample_normals<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let eps: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
        (0..self.dim)
            .map(|i| (0..=i).map(|j| self.factor[i * self.dim + j] * eps[j]).sum())
            .collect()
    }
}

pub fn equicorrelation(dim: usize, rho: f64) -> Vec<f64> {
    (0..dim * dim)
        .map(|k| if k / dim == k % dim { 1.0 } else { rho })
        .collect()
}

/// `n` draws of `Phi(Z)` with `Z ~ N(0, R)`, deterministic in `seed`.
pub fn gaussian_copula_uniforms(r: &[f64], dim: usize, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let cop = GaussianCopula::new(r, dim)?;
    let mut rng = super::rng_for(seed, super::STREAM_COPULA, 0);
    Ok((0..n)
        .map(|_| cop.sample_normals(&mut rng).into_iter().map(normal::cdf).collect())
        .collect())
}
