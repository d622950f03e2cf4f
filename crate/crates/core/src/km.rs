//! Reverse Kaplan-Meier fit of the censoring survival curve.

use serde::{Deserialize, Serialize};

use crate::data::CensoringRecord;

/// Which one-sided value of a step function to read at a jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `P(C > s)`, the right-continuous value.
    Right,
    /// `P(C >= s)`, the limit from below.
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HazardMode {
    /// `-log(G_k / G_{k-1})`
    #[default]
    NegLogKm,
    /// `d_k / Y_k`
    NelsonAalen,
}

/// Right-continuous nonincreasing step function starting at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSurvival {
    jump_times: Vec<f64>,
    values: Vec<f64>,
    n_at_risk: Vec<usize>,
    n_events: Vec<usize>,
}

/// Censoring hazard increments on the jump grid of a fitted curve.
///
/// Jumps where the curve reaches 0 are dropped: integration stops at the last
/// time the curve is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardIncrements {
    pub times: Vec<f64>,
    pub increments: Vec<f64>,
    pub n_at_risk: Vec<usize>,
    pub n_events: Vec<usize>,
    /// Time of the dropped terminal jump, if any.
    pub truncated_at: Option<f64>,
}

impl HazardIncrements {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

impl StepSurvival {
    /// The constant function 1.
    pub fn one() -> Self {
        StepSurvival {
            jump_times: Vec::new(),
            values: Vec::new(),
            n_at_risk: Vec::new(),
            n_events: Vec::new(),
        }
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    /// Value on `[t_k, t_{k+1})`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_at_risk(&self) -> &[usize] {
        &self.n_at_risk
    }

    pub fn n_events(&self) -> &[usize] {
        &self.n_events
    }

    pub fn survival_at(&self, s: f64, side: Side) -> f64 {
        let k = match side {
            Side::Right => self.jump_times.partition_point(|&t| t <= s),
            Side::Left => self.jump_times.partition_point(|&t| t < s),
        };
        if k == 0 {
            1.0
        } else {
            self.values[k - 1]
        }
    }

    /// Smallest `t` with `G(t) <= level`, if the curve gets that low.
    pub fn quantile(&self, level: f64) -> Option<f64> {
        self.values
            .iter()
            .position(|&v| v <= level)
            .map(|k| self.jump_times[k])
    }

    pub fn hazard_increments(&self, mode: HazardMode) -> HazardIncrements {
        let mut out = HazardIncrements {
            times: Vec::with_capacity(self.jump_times.len()),
            increments: Vec::with_capacity(self.jump_times.len()),
            n_at_risk: Vec::with_capacity(self.jump_times.len()),
            n_events: Vec::with_capacity(self.jump_times.len()),
            truncated_at: None,
        };
        let mut prev = 1.0;
        for k in 0..self.jump_times.len() {
            let value = self.values[k];
            if value <= 0.0 {
                out.truncated_at = Some(self.jump_times[k]);
                break;
            }
            let incr = match mode {
                HazardMode::NegLogKm => -(value / prev).ln(),
                HazardMode::NelsonAalen => self.n_events[k] as f64 / self.n_at_risk[k] as f64,
            };
            out.times.push(self.jump_times[k]);
            out.increments.push(incr);
            out.n_at_risk.push(self.n_at_risk[k]);
            out.n_events.push(self.n_events[k]);
            prev = value;
        }
        out
    }
}

/// Product-limit estimate of `P(C > s)` treating `delta_c = 1` as the event.
///
/// Subjects whose follow-up ends at a censoring-event time are still at risk
/// for that time, so `Y_k = #{X~ >= s_k}`.
pub fn fit_censoring_survival(records: &[CensoringRecord]) -> StepSurvival {
    let mut sorted: Vec<(f64, bool)> = records.iter().map(|r| (r.x_tilde, r.delta_c)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = sorted.len();
    let mut curve = StepSurvival::one();
    let mut value = 1.0;
    let mut i = 0;
    while i < n {
        let t = sorted[i].0;
        let at_risk = n - i;
        let mut j = i;
        let mut d = 0;
        while j < n && sorted[j].0 == t {
            d += usize::from(sorted[j].1);
            j += 1;
        }
        if d > 0 {
            value *= 1.0 - d as f64 / at_risk as f64;
            if d == at_risk {
                value = 0.0;
            }
            curve.jump_times.push(t);
            curve.values.push(value);
            curve.n_at_risk.push(at_risk);
            curve.n_events.push(d);
        }
        i = j;
    }
    curve
}

/// Fraction of records with `X~ >= s`.
pub fn at_risk_fraction(records: &[CensoringRecord], s: f64) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().filter(|r| r.x_tilde >= s).count() as f64 / records.len() as f64
}
