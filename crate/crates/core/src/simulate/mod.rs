//! Trial simulation: scenario definitions, data generation, Monte-Carlo true
//! values and replicated operating-characteristic studies.
//!
//! Scenario files use the `key = value` grammar of [`crate::config`]:
//!
//! ```text
//! name        = setting2_tau36
//! endpoints   = 3
//! treatment   = exp(0.015), exp(0.02), exp(0.05)
//! control     = exp(0.021), exp(0.029), exp(0.057)
//! correlation = 0.5                # equicorrelation, or L*L row-major values
//! censoring   = exp(0.02)          # none | <dist> | bivariate(rho, <dist>, <dist>)
//! n           = 200                # or n_t / n_c
//! tau         = 36
//! margins     = 0
//! alpha       = 0.05
//! seed        = 20240611
//! variance    = delta_method
//! ```
//!
//! Distributions: `exp(rate)`, `weibull(shape, scale)` and
//! `pwexp(start:rate, start:rate, ...)` with the first start at 0.

mod dist;
mod study;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use dist::{
    equicorrelation, gaussian_copula_uniforms, true_censoring_survival, CensoringSpec, GaussianCopula, Marginal,
    TrueCensoring,
};
pub use study::{
    compare_uncensored, generate_replicate, generate_trial, run_replications, true_values_mc, Method, Outcome,
    ReplicateRecord, SimulatedTrial, SummaryRow, SummaryTable, TrueValues, MIN_TRUE_SAMPLES,
};

use crate::config::{parse_f64, parse_f64_list, parse_key_values, AnalysisConfig, TauSpec, VarianceMode};
use crate::error::{Result, WinError};

pub(crate) const STREAM_TRIAL: u64 = 0x7472_6961_6c00_0000;
pub(crate) const STREAM_TRUTH: u64 = 0x7472_7574_6800_0000;
pub(crate) const STREAM_COPULA: u64 = 0x636f_7075_6c61_0000;

/// Independent generator for `(seed, domain, index)`.
pub(crate) fn rng_for(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ domain);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Setting {
    /// No treatment effect.
    I,
    /// Proportional hazards alternative.
    II,
    /// Delayed effect: control hazards step up at time 5.
    III,
}

const TREATMENT_RATES: [f64; 3] = [0.015, 0.02, 0.05];
const CONTROL_RATES_II: [f64; 3] = [0.021, 0.029, 0.057];
const CONTROL_STEP_III: [f64; 3] = [0.006, 0.009, 0.007];
const CONTROL_STEP_TIME: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub n_endpoints: usize,
    pub treatment: Vec<Marginal>,
    pub control: Vec<Marginal>,
    /// Row-major `L x L` endpoint copula correlation.
    pub correlation: Vec<f64>,
    pub censoring: CensoringSpec,
    pub n_t: usize,
    pub n_c: usize,
    pub tau: f64,
    pub margins: Vec<f64>,
    pub alpha: f64,
    pub seed: u64,
    pub variance_mode: VarianceMode,
}

fn control_marginals(setting: Setting, l: usize, exp_like: impl Fn(f64) -> Marginal) -> Vec<Marginal> {
    (0..l)
        .map(|k| match setting {
            Setting::I => exp_like(TREATMENT_RATES[k]),
            Setting::II => exp_like(CONTROL_RATES_II[k]),
            Setting::III => Marginal::PiecewiseExponential {
                starts: vec![0.0, CONTROL_STEP_TIME],
                rates: vec![TREATMENT_RATES[k], TREATMENT_RATES[k] + CONTROL_STEP_III[k]],
            },
        })
        .collect()
}

fn exp(rate: f64) -> Marginal {
    Marginal::Exponential { rate }
}

impl ScenarioSpec {
    fn base(name: String, l: usize, tau: f64, n: usize, zeta: f64) -> ScenarioSpec {
        ScenarioSpec {
            name,
            n_endpoints: l,
            treatment: TREATMENT_RATES[..l].iter().map(|&r| exp(r)).collect(),
            control: Vec::new(),
            correlation: equicorrelation(l, 0.5),
            censoring: CensoringSpec::Common { dist: exp(0.02) },
            n_t: n,
            n_c: n,
            tau,
            margins: vec![zeta; l],
            alpha: 0.05,
            seed: 20_240_611,
            variance_mode: VarianceMode::DeltaMethod,
        }
    }

    /// Three exponential endpoints with common exponential censoring.
    pub fn exponential(setting: Setting, tau: f64, n: usize, zeta: f64) -> ScenarioSpec {
        let mut s = Self::base(format!("exponential_{setting:?}_tau{tau}_n{n}_zeta{zeta}"), 3, tau, n, zeta);
        s.control = control_marginals(setting, 3, exp);
        s
    }

    /// Weibull (shape 2, scale `1 / rate`) versions of settings I and II.
    pub fn weibull(setting: Setting, tau: f64, n: usize, zeta: f64) -> Result<ScenarioSpec> {
        if setting == Setting::III {
            return Err(WinError::config("the Weibull family covers settings I and II only"));
        }
        let wb = |rate: f64| Marginal::Weibull {
            shape: 2.0,
            scale: 1.0 / rate,
        };
        let mut s = Self::base(format!("weibull_{setting:?}_tau{tau}_n{n}_zeta{zeta}"), 3, tau, n, zeta);
        s.treatment = TREATMENT_RATES.iter().map(|&r| wb(r)).collect();
        s.control = control_marginals(setting, 3, wb);
        s.censoring = CensoringSpec::Common { dist: wb(0.02) };
        Ok(s)
    }

    /// Two endpoints with endpoint-specific censoring times joined by a
    /// Gaussian copula with correlation `rho`; horizon 36.
    pub fn induced_censoring(setting: Setting, rho: f64, n: usize, zeta: f64) -> ScenarioSpec {
        let mut s = Self::base(format!("induced_{setting:?}_rho{rho}_n{n}_zeta{zeta}"), 2, 36.0, n, zeta);
        s.control = control_marginals(setting, 2, exp);
        s.censoring = CensoringSpec::Bivariate {
            rho,
            first: exp(0.015),
            second: exp(0.02),
        };
        s
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.n_endpoints;
        if l == 0 {
            return Err(WinError::config("endpoints must be at least 1"));
        }
        if self.treatment.len() != l || self.control.len() != l {
            return Err(WinError::config(format!("need {l} marginals per group")));
        }
        for m in self.treatment.iter().chain(&self.control) {
            m.validate()?;
        }
        GaussianCopula::new(&self.correlation, l)?;
        self.censoring.validate(l)?;
        if self.n_t == 0 || self.n_c == 0 {
            return Err(WinError::config("group sizes must be positive"));
        }
        if !(self.tau > 0.0) {
            return Err(WinError::config(format!("tau must be positive, got {}", self.tau)));
        }
        self.analysis_config().validate()
    }

    pub fn analysis_config(&self) -> AnalysisConfig {
        let mut c = AnalysisConfig::new(self.n_endpoints, self.tau);
        c.margins = self.margins.clone();
        c.alpha = self.alpha;
        c.variance_mode = self.variance_mode;
        c.tau = TauSpec::Fixed(self.tau);
        c
    }

    pub fn parse(text: &str) -> Result<ScenarioSpec> {
        let kv = parse_key_values(text)?;
        let get = |k: &str| kv.get(k).map(String::as_str);
        let need = |k: &str| get(k).ok_or_else(|| WinError::config(format!("scenario is missing '{k}'")));
        for k in kv.keys() {
            if !matches!(
                k.as_str(),
                "name"
                    | "endpoints"
                    | "treatment"
                    | "control"
                    | "correlation"
                    | "censoring"
                    | "n"
                    | "n_t"
                    | "n_c"
                    | "tau"
                    | "margins"
                    | "alpha"
                    | "seed"
                    | "variance"
            ) {
                return Err(WinError::config(format!("unknown scenario key '{k}'")));
            }
        }
        let l: usize = parse_usize("endpoints", need("endpoints")?)?;
        let marginals = |k: &str| -> Result<Vec<Marginal>> {
            split_top(need(k)?).into_iter().map(|p| parse_marginal(&p)).collect()
        };
        let correlation = match get("correlation") {
            None => equicorrelation(l, 0.0),
            Some(v) => {
                let vals = parse_f64_list("correlation", v)?;
                if vals.len() == 1 {
                    equicorrelation(l, vals[0])
                } else {
                    vals
                }
            }
        };
        let censoring = parse_censoring(get("censoring").unwrap_or("none"))?;
        let n = get("n").map(|v| parse_usize("n", v)).transpose()?;
        let size = |k: &str| -> Result<usize> {
            match (get(k), n) {
                (Some(v), None) => parse_usize(k, v),
                (None, Some(n)) => Ok(n),
                (Some(_), Some(_)) => Err(WinError::config(format!("give either n or {k}, not both"))),
                (None, None) => Err(WinError::config(format!("scenario is missing '{k}' or 'n'"))),
            }
        };
        let margins = match get("margins") {
            None => vec![0.0; l],
            Some(v) => {
                let m = parse_f64_list("margins", v)?;
                if m.len() == 1 {
                    vec![m[0]; l]
                } else {
                    m
                }
            }
        };
        let scenario = ScenarioSpec {
            name: get("name").unwrap_or("scenario").to_string(),
            n_endpoints: l,
            treatment: marginals("treatment")?,
            control: marginals("control")?,
            correlation,
            censoring,
            n_t: size("n_t")?,
            n_c: size("n_c")?,
            tau: parse_f64("tau", need("tau")?)?,
            margins,
            alpha: get("alpha").map(|v| parse_f64("alpha", v)).transpose()?.unwrap_or(0.05),
            seed: get("seed")
                .map(|v| v.trim().parse::<u64>().map_err(|_| WinError::config("seed must be an unsigned integer")))
                .transpose()?
                .unwrap_or(0),
            variance_mode: get("variance").map(str::parse).transpose()?.unwrap_or_default(),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_text(&self) -> String {
        let list = |v: &[Marginal]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ");
        let nums = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let variance = match self.variance_mode {
            VarianceMode::DeltaMethod => "delta_method",
            VarianceMode::NullVariance => "null_variance",
        };
        format!(
            "name = {}\nendpoints = {}\ntreatment = {}\ncontrol = {}\ncorrelation = {}\ncensoring = {}\n\
             n_t = {}\nn_c = {}\ntau = {:?}\nmargins = {}\nalpha = {:?}\nseed = {}\nvariance = {}\n",
            self.name,
            self.n_endpoints,
            list(&self.treatment),
            list(&self.control),
            nums(&self.correlation),
            self.censoring,
            self.n_t,
            self.n_c,
            self.tau,
            nums(&self.margins),
            self.alpha,
            self.seed,
            variance,
        )
    }
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim()
        .parse()
        .map_err(|_| WinError::config(format!("{key}: '{}' is not a nonnegative integer", v.trim())))
}

/// Splits on commas outside parentheses.
fn split_top(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(cur.trim().to_string());
                cur.clear();
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

fn call(s: &str) -> Result<(&str, &str)> {
    let s = s.trim();
    let open = s
        .find('(')
        .ok_or_else(|| WinError::config(format!("expected name(args), got '{s}'")))?;
    let args = s[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| WinError::config(format!("unbalanced parentheses in '{s}'")))?;
    Ok((s[..open].trim(), args))
}

pub fn parse_marginal(s: &str) -> Result<Marginal> {
    let (name, args) = call(s)?;
    let m = match name {
        "exp" => Marginal::Exponential {
            rate: parse_f64("exp", args)?,
        },
        "weibull" => {
            let v = parse_f64_list("weibull", args)?;
            if v.len() != 2 {
                return Err(WinError::config("weibull takes (shape, scale)"));
            }
            Marginal::Weibull {
                shape: v[0],
                scale: v[1],
            }
        }
        "pwexp" => {
            let mut starts = Vec::new();
            let mut rates = Vec::new();
            for piece in args.split(',') {
                let (a, b) = piece
                    .split_once(':')
                    .ok_or_else(|| WinError::config("pwexp pieces are start:rate"))?;
                starts.push(parse_f64("pwexp", a)?);
                rates.push(parse_f64("pwexp", b)?);
            }
            Marginal::PiecewiseExponential { starts, rates }
        }
        other => return Err(WinError::config(format!("unknown distribution '{other}'"))),
    };
    m.validate()?;
    Ok(m)
}

pub fn parse_censoring(s: &str) -> Result<CensoringSpec> {
    let s = s.trim();
    if s == "none" {
        return Ok(CensoringSpec::None);
    }
    if s.starts_with("bivariate") {
        let (_, args) = call(s)?;
        let parts = split_top(args);
        if parts.len() != 3 {
            return Err(WinError::config("bivariate takes (rho, dist, dist)"));
        }
        return Ok(CensoringSpec::Bivariate {
            rho: parse_f64("bivariate", &parts[0])?,
            first: parse_marginal(&parts[1])?,
            second: parse_marginal(&parts[2])?,
        });
    }
    Ok(CensoringSpec::Common {
        dist: parse_marginal(s)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for st in [Setting::I, Setting::II, Setting::III] {
            ScenarioSpec::exponential(st, 36.0, 200, 0.0).validate().unwrap();
            ScenarioSpec::induced_censoring(st, 0.25, 200, 6.0).validate().unwrap();
        }
        ScenarioSpec::weibull(Setting::II, 36.0, 200, 0.0).unwrap().validate().unwrap();
        assert!(ScenarioSpec::weibull(Setting::III, 36.0, 200, 0.0).is_err());
    }

    #[test]
    fn text_round_trip() {
        for s in [
            ScenarioSpec::exponential(Setting::III, 18.0, 100, 6.0),
            ScenarioSpec::weibull(Setting::II, 36.0, 200, 0.0).unwrap(),
            ScenarioSpec::induced_censoring(Setting::I, 0.25, 200, 0.0),
        ] {
            assert_eq!(ScenarioSpec::parse(&s.to_text()).unwrap(), s);
        }
    }

    #[test]
    fn parse_shorthand() {
        let s = ScenarioSpec::parse(
            "endpoints = 2\ntreatment = exp(0.1), pwexp(0:0.1, 5:0.2)\ncontrol = weibull(2, 10), exp(1)\n\
             correlation = 0.3\ncensoring = exp(0.02)\nn = 50\ntau = 12\n",
        )
        .unwrap();
        assert_eq!((s.n_t, s.n_c), (50, 50));
        assert_eq!(s.correlation, vec![1.0, 0.3, 0.3, 1.0]);
        assert_eq!(s.margins, vec![0.0, 0.0]);
        assert!(ScenarioSpec::parse("endpoints = 1\ntreatment = exp(1)\ncontrol = exp(1)\nn = 5\ntau = 1\nfoo = 2\n").is_err());
        assert!(ScenarioSpec::parse("endpoints = 1\ntreatment = gamma(1)\ncontrol = exp(1)\nn = 5\ntau = 1\n").is_err());
    }
}
