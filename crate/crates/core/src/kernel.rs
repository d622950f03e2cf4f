//! Signed pairwise-comparison terms whose sums give the win, loss and tie
//! probabilities.
//!
//! Each term is evaluated on a pair `(a, w)`: `a` is the subject whose win is
//! counted and `w` is the *weighted* subject, whose event indicators enter the
//! numerator and whose times determine the censoring-weight arguments. For
//! treatment-win terms `a` is the treatment subject and `w` the control one;
//! control-win terms swap the roles.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::config::{margin_mode, MarginMode};
use crate::data::{Group, SubjectRecord};
use crate::error::{Result, WinError};
use crate::km::{Side, StepSurvival};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    TreatmentWins,
    ControlWins,
    Tie,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonKind {
    /// `X_k(a) > X_k(w) + shift`
    StrictGreater,
    /// `X_k(a) = tau` and `X_k(w) = tau`
    EqualsTau,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub endpoint: usize,
    pub shift: f64,
    pub kind: ComparisonKind,
}

/// How a censoring-weight argument is formed from the weighted subject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightArg {
    /// `max_k (X_k + shift_k)` over the strict comparisons.
    ShiftedMax,
    /// `max_k X_k` over the strict comparisons.
    UnshiftedMax,
    Tau,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTerm {
    pub sign: f64,
    pub coefficient: f64,
    pub comparisons: Vec<Comparison>,
    /// Endpoints whose indicator must be 1 on the weighted subject.
    pub delta_mask: Vec<usize>,
    /// Argument of the curve of the group *not* being weighted.
    pub opposite_arg: WeightArg,
    /// Argument of the weighted subject's own-group curve.
    pub own_arg: WeightArg,
    pub direction: Direction,
    pub weighted: Group,
}

impl KernelTerm {
    /// Group of the subject whose win is counted.
    pub fn winner(&self) -> Group {
        self.weighted.other()
    }

    pub fn signed_coefficient(&self) -> f64 {
        self.sign * self.coefficient
    }

    pub fn delta_ok(&self, w: &SubjectRecord) -> bool {
        self.delta_mask.iter().all(|&k| w.events[k])
    }

    pub fn compares(&self, a: &[f64], w: &[f64], tau: f64) -> bool {
        self.comparisons.iter().all(|c| match c.kind {
            ComparisonKind::StrictGreater => a[c.endpoint] > w[c.endpoint] + c.shift,
            ComparisonKind::EqualsTau => a[c.endpoint] == tau && w[c.endpoint] == tau,
        })
    }

    /// Numerator indicator (without sign).
    pub fn indicator(&self, a: &SubjectRecord, w: &SubjectRecord, tau: f64) -> bool {
        self.delta_ok(w) && self.compares(&a.times, &w.times, tau)
    }

    fn argument(&self, arg: WeightArg, w: &[f64], tau: f64) -> f64 {
        let strict = self
            .comparisons
            .iter()
            .filter(|c| c.kind == ComparisonKind::StrictGreater);
        match arg {
            WeightArg::Tau => tau,
            WeightArg::ShiftedMax => strict.map(|c| w[c.endpoint] + c.shift).fold(f64::NEG_INFINITY, f64::max),
            WeightArg::UnshiftedMax => strict.map(|c| w[c.endpoint]).fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn opposite_argument(&self, w: &[f64], tau: f64) -> f64 {
        self.argument(self.opposite_arg, w, tau)
    }

    pub fn own_argument(&self, w: &[f64], tau: f64) -> f64 {
        self.argument(self.own_arg, w, tau)
    }

    /// Per-endpoint arguments for a bivariate censoring survival: the
    /// (optionally shifted) time for strictly compared endpoints, `tau` for
    /// endpoints required to exceed the horizon, and 0 otherwise.
    pub fn endpoint_arguments(&self, w: &[f64], tau: f64, shifted: bool) -> Vec<f64> {
        let mut out = vec![0.0; w.len()];
        for c in &self.comparisons {
            out[c.endpoint] = match c.kind {
                ComparisonKind::EqualsTau => tau,
                ComparisonKind::StrictGreater if shifted => (w[c.endpoint] + c.shift).max(0.0),
                ComparisonKind::StrictGreater => w[c.endpoint],
            };
        }
        out
    }
}

impl fmt::Display for KernelTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = self.winner().label();
        let w = self.weighted.label();
        let sign = if self.sign > 0.0 { '+' } else { '-' };
        write!(f, "{sign}")?;
        if self.coefficient != 1.0 {
            write!(f, "{}*", self.coefficient)?;
        }
        let mut ind = Vec::new();
        for c in &self.comparisons {
            let k = c.endpoint + 1;
            ind.push(match c.kind {
                ComparisonKind::EqualsTau => format!("X{k}[{a}]=X{k}[{w}]=tau"),
                ComparisonKind::StrictGreater if c.shift == 0.0 => format!("X{k}[{a}]>X{k}[{w}]"),
                ComparisonKind::StrictGreater if c.shift > 0.0 => format!("X{k}[{a}]>X{k}[{w}]+{}", c.shift),
                ComparisonKind::StrictGreater => format!("X{k}[{a}]>X{k}[{w}]-{}", -c.shift),
            });
        }
        let deltas: String = self.delta_mask.iter().map(|k| format!(" d{}[{w}]", k + 1)).collect();
        let arg = |arg: WeightArg, shifted: bool| -> String {
            match arg {
                WeightArg::Tau => "tau".to_string(),
                _ => {
                    let mut parts = Vec::new();
                    for c in self.comparisons.iter().filter(|c| c.kind == ComparisonKind::StrictGreater) {
                        let k = c.endpoint + 1;
                        let mut s = format!("X{k}[{w}]");
                        if shifted && c.shift != 0.0 {
                            let _ = write!(s, "{:+}", c.shift);
                        }
                        parts.push(s);
                    }
                    if parts.len() == 1 {
                        parts.pop().unwrap()
                    } else {
                        format!("max({})", parts.join(", "))
                    }
                }
            }
        };
        write!(
            f,
            "I({}){} / [G{a}({}) G{w}({}-)]",
            ind.join(", "),
            deltas,
            arg(self.opposite_arg, self.opposite_arg == WeightArg::ShiftedMax),
            arg(self.own_arg, false)
        )
    }
}

fn weighted_group(direction: Direction) -> Result<Group> {
    match direction {
        Direction::TreatmentWins => Ok(Group::Control),
        Direction::ControlWins => Ok(Group::Treatment),
        Direction::Tie => Err(WinError::config("use enumerate_tie_terms for tie terms")),
    }
}

fn check_margins(n_endpoints: usize, margins: &[f64]) -> Result<MarginMode> {
    if n_endpoints == 0 {
        return Err(WinError::config("at least one endpoint is required"));
    }
    if margins.len() != n_endpoints {
        return Err(WinError::config(format!(
            "{} margins given for {n_endpoints} endpoints",
            margins.len()
        )));
    }
    margin_mode(margins)
}

/// Terms whose sum estimates the win probability of `direction`'s winner.
///
/// Zero margins give `L` terms: endpoint `l` decides after all earlier
/// endpoints exceeded the horizon on both subjects. Positive margins give
/// `2^L - 1` inclusion-exclusion terms: for priority `l` and tie signs
/// `s_1..s_{l-1}` (endpoint 1 in the lowest bit of the enumeration index)
/// the sign is `(-1)^{l+1} prod s_k`.
pub fn enumerate_win_terms(n_endpoints: usize, margins: &[f64], direction: Direction) -> Result<Vec<KernelTerm>> {
    let mode = check_margins(n_endpoints, margins)?;
    let weighted = weighted_group(direction)?;
    let mut terms = Vec::new();
    match mode {
        MarginMode::Zero => {
            for l in 0..n_endpoints {
                let mut comparisons: Vec<Comparison> = (0..l)
                    .map(|k| Comparison {
                        endpoint: k,
                        shift: 0.0,
                        kind: ComparisonKind::EqualsTau,
                    })
                    .collect();
                comparisons.insert(
                    0,
                    Comparison {
                        endpoint: l,
                        shift: 0.0,
                        kind: ComparisonKind::StrictGreater,
                    },
                );
                let arg = if l == 0 { WeightArg::UnshiftedMax } else { WeightArg::Tau };
                terms.push(KernelTerm {
                    sign: 1.0,
                    coefficient: 1.0,
                    comparisons,
                    delta_mask: vec![l],
                    opposite_arg: if l == 0 { WeightArg::ShiftedMax } else { arg },
                    own_arg: arg,
                    direction,
                    weighted,
                });
            }
        }
        MarginMode::Positive => {
            for l in 0..n_endpoints {
                for bits in 0u64..(1u64 << l) {
                    let mut comparisons = vec![Comparison {
                        endpoint: l,
                        shift: margins[l],
                        kind: ComparisonKind::StrictGreater,
                    }];
                    let mut sign = if l % 2 == 0 { 1.0 } else { -1.0 };
                    for k in (0..l).rev() {
                        let s = if bits >> k & 1 == 1 { 1.0 } else { -1.0 };
                        sign *= s;
                        comparisons.push(Comparison {
                            endpoint: k,
                            shift: s * margins[k],
                            kind: ComparisonKind::StrictGreater,
                        });
                    }
                    terms.push(KernelTerm {
                        sign,
                        coefficient: 1.0,
                        comparisons,
                        delta_mask: (0..=l).collect(),
                        opposite_arg: WeightArg::ShiftedMax,
                        own_arg: WeightArg::UnshiftedMax,
                        direction,
                        weighted,
                    });
                }
            }
        }
    }
    Ok(terms)
}

/// Tie-probability terms for positive margins: each direction (control
/// weighted, then treatment weighted) contributes `2^L` terms with
/// coefficient 1/2 and sign `(-1)^{#{k: s_k = +1}}`.
pub fn enumerate_tie_terms(n_endpoints: usize, margins: &[f64]) -> Result<Vec<KernelTerm>> {
    if check_margins(n_endpoints, margins)? == MarginMode::Zero {
        return Err(WinError::Unsupported(
            "tie terms need positive margins; with zero margins the tie probability is the complement".into(),
        ));
    }
    let mut terms = Vec::with_capacity(2 << n_endpoints);
    for weighted in [Group::Control, Group::Treatment] {
        for bits in 0u64..(1u64 << n_endpoints) {
            let mut sign = 1.0;
            let comparisons = (0..n_endpoints)
                .rev()
                .map(|k| {
                    let s = if bits >> k & 1 == 1 { 1.0 } else { -1.0 };
                    if s > 0.0 {
                        sign = -sign;
                    }
                    Comparison {
                        endpoint: k,
                        shift: s * margins[k],
                        kind: ComparisonKind::StrictGreater,
                    }
                })
                .collect();
            terms.push(KernelTerm {
                sign,
                coefficient: 0.5,
                comparisons,
                delta_mask: (0..n_endpoints).collect(),
                opposite_arg: WeightArg::ShiftedMax,
                own_arg: WeightArg::UnshiftedMax,
                direction: Direction::Tie,
                weighted,
            });
        }
    }
    Ok(terms)
}

/// Value of one term on a (treatment, control) pair with KM weights.
///
/// Weights are only looked up when the indicator is nonzero. The weighted
/// subject's own-group curve is read as a left limit, the other group's curve
/// right-continuously.
#[allow(clippy::too_many_arguments)]
pub fn eval_term(
    term: &KernelTerm,
    treat: &SubjectRecord,
    ctrl: &SubjectRecord,
    g_t: &StepSurvival,
    g_c: &StepSurvival,
    tau: f64,
    weight_floor: f64,
) -> Result<f64> {
    let (a, w, g_opp, g_own) = match term.weighted {
        Group::Control => (treat, ctrl, g_t, g_c),
        Group::Treatment => (ctrl, treat, g_c, g_t),
    };
    if !term.indicator(a, w, tau) {
        return Ok(0.0);
    }
    let weight = g_opp.survival_at(term.opposite_argument(&w.times, tau), Side::Right)
        * g_own.survival_at(term.own_argument(&w.times, tau), Side::Left);
    if weight <= weight_floor {
        return Err(WinError::DegenerateWeight {
            term: 0,
            group: term.weighted.to_string(),
            subject: 0,
            partner: 0,
            weight,
        });
    }
    Ok(term.signed_coefficient() / weight)
}

/// Human-readable term table.
pub fn format_terms(terms: &[KernelTerm]) -> String {
    let mut out = String::new();
    for (q, t) in terms.iter().enumerate() {
        let dir = match t.direction {
            Direction::TreatmentWins => "t_wins",
            Direction::ControlWins => "c_wins",
            Direction::Tie => "tie",
        };
        let _ = writeln!(out, "{:>3}  {:<6}  {t}", q + 1, dir);
    }
    out
}
