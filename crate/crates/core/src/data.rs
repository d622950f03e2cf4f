//! Subject records, horizon truncation and censoring-record derivation.
//!
//! Observed data for subject `i` on endpoint `l` are `X = min(T, tau, C)` and
//! `delta = 1{min(T, tau) <= C}`. A time truncated at the horizon is stored as
//! exactly `tau`, so "beyond the horizon" tests use exact equality.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WinError};
use crate::km::{fit_censoring_survival, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Treatment,
    Control,
}

impl Group {
    pub fn other(self) -> Group {
        match self {
            Group::Treatment => Group::Control,
            Group::Control => Group::Treatment,
        }
    }

    /// Single-letter CSV label.
    pub fn label(self) -> &'static str {
        match self {
            Group::Treatment => "t",
            Group::Control => "c",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Group::Treatment => write!(f, "treatment"),
            Group::Control => write!(f, "control"),
        }
    }
}

/// One patient: per-endpoint observed times and event indicators, in
/// priority order (index 0 is the most important endpoint).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub id: String,
    pub group: Group,
    pub times: Vec<f64>,
    pub events: Vec<bool>,
    /// Per-endpoint censoring times, when the source records them. `None`
    /// entries mark an unknown censoring time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub censor_times: Option<Vec<Option<f64>>>,
}

impl SubjectRecord {
    pub fn new(id: impl Into<String>, group: Group, times: Vec<f64>, events: Vec<bool>) -> Result<Self> {
        let rec = SubjectRecord {
            id: id.into(),
            group,
            times,
            events,
            censor_times: None,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn n_endpoints(&self) -> usize {
        self.times.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.is_empty() {
            return Err(WinError::validation(format!("subject {}: no endpoints", self.id)));
        }
        if self.times.len() != self.events.len() {
            return Err(WinError::validation(format!(
                "subject {}: {} times but {} indicators",
                self.id,
                self.times.len(),
                self.events.len()
            )));
        }
        if let Some(t) = self.times.iter().find(|t| !t.is_finite() || **t < 0.0) {
            return Err(WinError::validation(format!(
                "subject {}: time {t} must be finite and nonnegative",
                self.id
            )));
        }
        if let Some(c) = &self.censor_times {
            if c.len() != self.times.len() {
                return Err(WinError::validation(format!(
                    "subject {}: {} censoring times for {} endpoints",
                    self.id,
                    c.len(),
                    self.times.len()
                )));
            }
            if c.iter().flatten().any(|v| v.is_nan() || *v < 0.0) {
                return Err(WinError::validation(format!(
                    "subject {}: censoring times must be nonnegative",
                    self.id
                )));
            }
        }
        Ok(())
    }

    /// Largest observed time, the subject's last follow-up.
    pub fn max_time(&self) -> f64 {
        self.times.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `(X~, delta~_C)` for the censoring Kaplan-Meier fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CensoringRecord {
    pub x_tilde: f64,
    pub delta_c: bool,
}

/// Truncate event times at `tau` and censor at `censor_time`.
///
/// A time cut at the horizon counts as observed: `delta = 1` whenever
/// `min(T, tau) <= C`.
pub fn apply_horizon(event_times: &[f64], censor_time: f64, tau: f64) -> Result<(Vec<f64>, Vec<bool>)> {
    if !(tau > 0.0) {
        return Err(WinError::validation(format!("horizon must be positive, got {tau}")));
    }
    if censor_time.is_nan() || censor_time < 0.0 {
        return Err(WinError::validation(format!("censoring time {censor_time} must be nonnegative")));
    }
    let mut times = Vec::with_capacity(event_times.len());
    let mut events = Vec::with_capacity(event_times.len());
    for &t in event_times {
        if t.is_nan() || t < 0.0 {
            return Err(WinError::validation(format!("event time {t} must be nonnegative")));
        }
        let truncated = t.min(tau);
        times.push(truncated.min(censor_time));
        events.push(truncated <= censor_time);
    }
    Ok((times, events))
}

/// `X~ = max_l X_l`; `delta~_C = 1` iff some endpoint is censored.
///
/// A censored endpoint has `X_l = C`, and `C >= X_k` for every other
/// endpoint, so the censoring time is the maximum.
pub fn derive_censoring_record(subject: &SubjectRecord) -> CensoringRecord {
    CensoringRecord {
        x_tilde: subject.max_time(),
        delta_c: subject.events.iter().any(|e| !e),
    }
}

/// Re-censor every endpoint at `C* = min_l C_l`.
///
/// `censor_times` entries that are `None` are unknown and make the
/// conversion infeasible.
pub fn induce_common_censoring(
    event_times: &[f64],
    censor_times: &[Option<f64>],
    tau: f64,
) -> Result<(Vec<f64>, Vec<bool>)> {
    if censor_times.len() != event_times.len() {
        return Err(WinError::validation(format!(
            "{} censoring times for {} endpoints",
            censor_times.len(),
            event_times.len()
        )));
    }
    let mut common = f64::INFINITY;
    for (l, c) in censor_times.iter().enumerate() {
        match c {
            Some(c) => common = common.min(*c),
            None => {
                return Err(WinError::CensoringUnavailable {
                    subject: String::from("<anonymous>"),
                    endpoint: l + 1,
                })
            }
        }
    }
    apply_horizon(event_times, common, tau)
}

/// A validated two-group dataset truncated at a horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    subjects: Vec<SubjectRecord>,
    n_endpoints: usize,
    tau: f64,
}

impl Dataset {
    /// Build a dataset without a horizon (`tau = +inf`). Use
    /// [`Dataset::with_horizon`] before estimation.
    pub fn new(subjects: Vec<SubjectRecord>) -> Result<Self> {
        Self::with_tau(subjects, f64::INFINITY)
    }

    /// Build a dataset whose times are already truncated at `tau`.
    pub fn with_tau(subjects: Vec<SubjectRecord>, tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(WinError::validation(format!("horizon must be positive, got {tau}")));
        }
        let first = subjects
            .first()
            .ok_or_else(|| WinError::validation("dataset has no subjects"))?;
        let n_endpoints = first.n_endpoints();
        for s in &subjects {
            s.validate()?;
            if s.n_endpoints() != n_endpoints {
                return Err(WinError::validation(format!(
                    "subject {} has {} endpoints, expected {n_endpoints}",
                    s.id,
                    s.n_endpoints()
                )));
            }
            if s.times.iter().any(|&t| t > tau) {
                return Err(WinError::validation(format!(
                    "subject {} has a time beyond the horizon {tau}",
                    s.id
                )));
            }
        }
        for g in [Group::Treatment, Group::Control] {
            if !subjects.iter().any(|s| s.group == g) {
                return Err(WinError::validation(format!("{g} group is empty")));
            }
        }
        Ok(Dataset {
            subjects,
            n_endpoints,
            tau,
        })
    }

    pub fn subjects(&self) -> &[SubjectRecord] {
        &self.subjects
    }

    pub fn into_subjects(self) -> Vec<SubjectRecord> {
        self.subjects
    }

    pub fn n_endpoints(&self) -> usize {
        self.n_endpoints
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn group(&self, g: Group) -> impl Iterator<Item = &SubjectRecord> {
        self.subjects.iter().filter(move |s| s.group == g)
    }

    pub fn group_size(&self, g: Group) -> usize {
        self.group(g).count()
    }

    pub fn censoring_records(&self, g: Group) -> Vec<CensoringRecord> {
        self.group(g).map(derive_censoring_record).collect()
    }

    /// Truncate observed data at a (smaller) horizon.
    ///
    /// An observation beyond `tau` becomes `X = tau, delta = 1` whatever its
    /// original indicator: the truncated event time is `tau <= C`.
    pub fn with_horizon(&self, tau: f64) -> Result<Dataset> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(WinError::config(format!("horizon must be positive and finite, got {tau}")));
        }
        let subjects = self
            .subjects
            .iter()
            .map(|s| {
                let mut s = s.clone();
                for (x, d) in s.times.iter_mut().zip(s.events.iter_mut()) {
                    if *x >= tau {
                        *x = tau;
                        *d = true;
                    }
                }
                s
            })
            .collect();
        Dataset::with_tau(subjects, tau)
    }

    /// Re-censor every subject at the minimum of its per-endpoint censoring
    /// times, using the observed-data form `X' = min(X, C*)`,
    /// `delta' = delta and X <= C*`.
    pub fn induce_common_censoring(&self) -> Result<Dataset> {
        let subjects = self
            .subjects
            .iter()
            .map(|s| {
                let cens = s.censor_times.as_ref().ok_or_else(|| WinError::CensoringUnavailable {
                    subject: s.id.clone(),
                    endpoint: 1,
                })?;
                let mut common = f64::INFINITY;
                for (l, c) in cens.iter().enumerate() {
                    match c {
                        Some(c) => common = common.min(*c),
                        None => {
                            return Err(WinError::CensoringUnavailable {
                                subject: s.id.clone(),
                                endpoint: l + 1,
                            })
                        }
                    }
                }
                let mut out = s.clone();
                for (x, d) in out.times.iter_mut().zip(out.events.iter_mut()) {
                    *d = *d && *x <= common;
                    *x = x.min(common);
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::with_tau(subjects, self.tau)
    }

    /// Swap the treatment and control labels.
    pub fn swap_groups(&self) -> Dataset {
        let subjects = self
            .subjects
            .iter()
            .map(|s| SubjectRecord {
                group: s.group.other(),
                ..s.clone()
            })
            .collect();
        Dataset {
            subjects,
            n_endpoints: self.n_endpoints,
            tau: self.tau,
        }
    }
}

/// Smallest `t` with `G_hat(t) <= alpha_q`, minimized over both groups.
///
/// The censoring survival curve is evaluated right-continuously.
pub fn select_tau_auto(dataset: &Dataset, alpha_q: f64) -> Result<f64> {
    if !(alpha_q > 0.0 && alpha_q < 1.0) {
        return Err(WinError::config(format!("quantile level must lie in (0, 1), got {alpha_q}")));
    }
    let mut best = f64::INFINITY;
    for g in [Group::Treatment, Group::Control] {
        let curve = fit_censoring_survival(&dataset.censoring_records(g));
        let q = curve
            .quantile(alpha_q)
            .ok_or_else(|| WinError::QuantileUndefined {
                group: g.to_string(),
                alpha_q,
            })?;
        debug_assert!(curve.survival_at(q, Side::Right) <= alpha_q);
        best = best.min(q);
    }
    Ok(best)
}
