//! Analysis configuration and the flat `key = value` text format shared with
//! scenario files.
//!
//! Grammar: one `key = value` pair per line; blank lines and lines starting
//! with `#` are ignored; a trailing `# comment` is stripped. Keys are
//! case-sensitive and may appear once.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WinError};
use crate::km::HazardMode;

pub const DEFAULT_WEIGHT_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum TauSpec {
    Fixed(f64),
    /// Minimum over groups of the `alpha_q` quantile of the censoring curve.
    Auto(f64),
}

impl fmt::Display for TauSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TauSpec::Fixed(t) => write!(f, "{t}"),
            TauSpec::Auto(a) => write!(f, "auto({a})"),
        }
    }
}

impl FromStr for TauSpec {
    type Err = WinError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "auto" {
            return Ok(TauSpec::Auto(0.05));
        }
        if let Some(inner) = s.strip_prefix("auto(").and_then(|r| r.strip_suffix(')')) {
            return Ok(TauSpec::Auto(parse_f64("tau", inner)?));
        }
        Ok(TauSpec::Fixed(parse_f64("tau", s)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    #[default]
    DeltaMethod,
    /// Null variance for the log win ratio test statistic.
    NullVariance,
}

impl FromStr for VarianceMode {
    type Err = WinError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "delta_method" => Ok(VarianceMode::DeltaMethod),
            "null_variance" => Ok(VarianceMode::NullVariance),
            other => Err(WinError::config(format!("unknown variance mode '{other}'"))),
        }
    }
}

impl FromStr for HazardMode {
    type Err = WinError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "neg_log_km" => Ok(HazardMode::NegLogKm),
            "nelson_aalen" => Ok(HazardMode::NelsonAalen),
            other => Err(WinError::config(format!("unknown hazard mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginMode {
    Zero,
    Positive,
}

/// Classify a margin vector; mixed zero and positive margins are rejected.
pub fn margin_mode(margins: &[f64]) -> Result<MarginMode> {
    if margins.is_empty() {
        return Err(WinError::config("no margins given"));
    }
    if margins.iter().any(|m| !m.is_finite() || *m < 0.0) {
        return Err(WinError::config("margins must be finite and nonnegative"));
    }
    if margins.iter().all(|&m| m == 0.0) {
        Ok(MarginMode::Zero)
    } else if margins.iter().all(|&m| m > 0.0) {
        Ok(MarginMode::Positive)
    } else {
        Err(WinError::config(format!(
            "mixed zero and positive margins {margins:?} are not supported"
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub n_endpoints: usize,
    pub tau: TauSpec,
    pub margins: Vec<f64>,
    pub alpha: f64,
    pub variance_mode: VarianceMode,
    pub hazard_mode: HazardMode,
    pub renormalize: bool,
    pub weight_floor: f64,
}

impl AnalysisConfig {
    /// Zero margins, fixed horizon, default options.
    pub fn new(n_endpoints: usize, tau: f64) -> Self {
        AnalysisConfig {
            n_endpoints,
            tau: TauSpec::Fixed(tau),
            margins: vec![0.0; n_endpoints],
            alpha: 0.05,
            variance_mode: VarianceMode::DeltaMethod,
            hazard_mode: HazardMode::NegLogKm,
            renormalize: true,
            weight_floor: DEFAULT_WEIGHT_FLOOR,
        }
    }

    pub fn with_margins(mut self, margins: Vec<f64>) -> Self {
        self.margins = margins;
        self
    }

    /// Apply the same margin to every endpoint.
    pub fn with_common_margin(mut self, zeta: f64) -> Self {
        self.margins = vec![zeta; self.n_endpoints];
        self
    }

    pub fn margin_mode(&self) -> Result<MarginMode> {
        margin_mode(&self.margins)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_endpoints == 0 {
            return Err(WinError::config("at least one endpoint is required"));
        }
        if self.margins.len() != self.n_endpoints {
            return Err(WinError::config(format!(
                "{} margins given for {} endpoints",
                self.margins.len(),
                self.n_endpoints
            )));
        }
        self.margin_mode()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(WinError::config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        match self.tau {
            TauSpec::Fixed(t) if !(t > 0.0 && t.is_finite()) => {
                return Err(WinError::config(format!("tau must be positive, got {t}")))
            }
            TauSpec::Auto(a) if !(a > 0.0 && a < 1.0) => {
                return Err(WinError::config(format!("auto tau level must lie in (0, 1), got {a}")))
            }
            _ => {}
        }
        if !(self.weight_floor >= 0.0) {
            return Err(WinError::config("weight floor must be nonnegative"));
        }
        Ok(())
    }

    /// Parse the `key = value` format. Recognized keys: `endpoints`, `tau`,
    /// `margins` (one value broadcast, or one per endpoint), `alpha`,
    /// `variance`, `hazard`, `renormalize`, `weight_floor`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = parse_key_values(text)?;
        let n_endpoints: usize = match kv.remove("endpoints") {
            Some(v) => v
                .trim()
                .parse()
                .map_err(|_| WinError::config(format!("endpoints: '{v}' is not a positive integer")))?,
            None => return Err(WinError::config("missing key 'endpoints'")),
        };
        let tau: TauSpec = kv
            .remove("tau")
            .ok_or_else(|| WinError::config("missing key 'tau'"))?
            .parse()?;
        let mut cfg = AnalysisConfig {
            tau,
            ..AnalysisConfig::new(n_endpoints, 1.0)
        };
        if let Some(v) = kv.remove("margins") {
            let m = parse_f64_list("margins", &v)?;
            cfg.margins = if m.len() == 1 { vec![m[0]; n_endpoints] } else { m };
        }
        if let Some(v) = kv.remove("alpha") {
            cfg.alpha = parse_f64("alpha", &v)?;
        }
        if let Some(v) = kv.remove("variance") {
            cfg.variance_mode = v.parse()?;
        }
        if let Some(v) = kv.remove("hazard") {
            cfg.hazard_mode = v.parse()?;
        }
        if let Some(v) = kv.remove("renormalize") {
            cfg.renormalize = parse_bool("renormalize", &v)?;
        }
        if let Some(v) = kv.remove("weight_floor") {
            cfg.weight_floor = parse_f64("weight_floor", &v)?;
        }
        if let Some(k) = kv.keys().next() {
            return Err(WinError::config(format!("unknown key '{k}'")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Render in the same format [`AnalysisConfig::parse`] reads.
    pub fn to_text(&self) -> String {
        let margins: Vec<String> = self.margins.iter().map(|m| m.to_string()).collect();
        format!(
            "endpoints = {}\ntau = {}\nmargins = {}\nalpha = {}\nvariance = {}\nhazard = {}\nrenormalize = {}\nweight_floor = {:e}\n",
            self.n_endpoints,
            self.tau,
            margins.join(", "),
            self.alpha,
            match self.variance_mode {
                VarianceMode::DeltaMethod => "delta_method",
                VarianceMode::NullVariance => "null_variance",
            },
            match self.hazard_mode {
                HazardMode::NegLogKm => "neg_log_km",
                HazardMode::NelsonAalen => "nelson_aalen",
            },
            self.renormalize,
            self.weight_floor
        )
    }
}

/// Split `key = value` text into a map, rejecting duplicates.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| WinError::config(format!("line {}: expected 'key = value'", n + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(WinError::config(format!("line {}: empty key", n + 1)));
        }
        if out.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(WinError::config(format!("line {}: duplicate key '{k}'", n + 1)));
        }
    }
    Ok(out)
}

pub(crate) fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| WinError::config(format!("{key}: '{}' is not a number", v.trim())))
}

pub(crate) fn parse_f64_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|p| parse_f64(key, p)).collect()
}

pub(crate) fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(WinError::config(format!("{key}: '{other}' is not a boolean"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margin_modes() {
        assert_eq!(margin_mode(&[0.0, 0.0]).unwrap(), MarginMode::Zero);
        assert_eq!(margin_mode(&[1.0, 2.0]).unwrap(), MarginMode::Positive);
        assert!(margin_mode(&[0.0, 2.0]).is_err());
        assert!(margin_mode(&[-1.0]).is_err());
    }

    #[test]
    fn parse_round_trip() {
        let text = "# analysis\nendpoints = 3\ntau = 36  # months\nmargins = 6\nalpha = 0.1\nvariance = null_variance\nhazard = nelson_aalen\nrenormalize = false\n";
        let cfg = AnalysisConfig::parse(text).unwrap();
        assert_eq!(cfg.margins, vec![6.0; 3]);
        assert_eq!(cfg.tau, TauSpec::Fixed(36.0));
        assert_eq!(cfg.variance_mode, VarianceMode::NullVariance);
        assert_eq!(cfg.hazard_mode, HazardMode::NelsonAalen);
        assert!(!cfg.renormalize);
        assert_eq!(AnalysisConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn parse_auto_tau() {
        let cfg = AnalysisConfig::parse("endpoints = 1\ntau = auto(0.1)").unwrap();
        assert_eq!(cfg.tau, TauSpec::Auto(0.1));
        let cfg = AnalysisConfig::parse("endpoints = 1\ntau = auto").unwrap();
        assert_eq!(cfg.tau, TauSpec::Auto(0.05));
    }

    #[test]
    fn parse_errors() {
        assert!(AnalysisConfig::parse("endpoints = 2\ntau = 10\nmargins = 0, 3").is_err());
        assert!(AnalysisConfig::parse("endpoints = 2\ntau = 10\nmargins = 1, 2, 3").is_err());
        assert!(AnalysisConfig::parse("endpoints = 1\ntau = -1").is_err());
        assert!(AnalysisConfig::parse("endpoints = 1\ntau = 1\nbogus = 2").is_err());
        assert!(AnalysisConfig::parse("endpoints = 1\ntau = 1\ntau = 2").is_err());
        assert!(AnalysisConfig::parse("endpoints = 1\ntau = 1\nalpha = 1.5").is_err());
        assert!(AnalysisConfig::parse("tau = 1").is_err());
    }
}
