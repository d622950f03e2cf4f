//! Win, loss and tie probability estimators and the derived win statistics.

use std::borrow::Cow;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::{AnalysisConfig, MarginMode, TauSpec};
use crate::data::{select_tau_auto, Dataset, Group, SubjectRecord};
use crate::error::{Result, WinError};
use crate::kernel::{enumerate_tie_terms, enumerate_win_terms, Direction, KernelTerm};
use crate::km::{fit_censoring_survival, Side, StepSurvival};
use crate::parallel::map_indexed;

pub type SurvivalFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type JointSurvivalFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightProvenance {
    Km,
    TrueCommon,
    TrueJoint,
    Unit,
    Naive,
}

/// Source of the censoring survival values in the IPCW denominators.
#[derive(Clone)]
pub enum WeightProvider {
    /// Per-group reverse Kaplan-Meier curves fitted on the data.
    KaplanMeier,
    /// All weights 1 in the same kernels.
    Unit,
    /// No weighting: each pair is compared endpoint by endpoint on the
    /// observed data, moving on whenever the current endpoint is undecided.
    Naive,
    /// Known common-censoring survival functions per group.
    TrueCommon { treatment: SurvivalFn, control: SurvivalFn },
    /// Known bivariate censoring survivals `P(C1 > a, C2 > b)` per group.
    TrueJoint {
        treatment: JointSurvivalFn,
        control: JointSurvivalFn,
    },
}

impl fmt::Debug for WeightProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightProvider::KaplanMeier => "KaplanMeier",
            WeightProvider::Unit => "Unit",
            WeightProvider::Naive => "Naive",
            WeightProvider::TrueCommon { .. } => "TrueCommon",
            WeightProvider::TrueJoint { .. } => "TrueJoint",
        })
    }
}

impl WeightProvider {
    pub fn provenance(&self) -> WeightProvenance {
        match self {
            WeightProvider::KaplanMeier => WeightProvenance::Km,
            WeightProvider::Unit => WeightProvenance::Unit,
            WeightProvider::Naive => WeightProvenance::Naive,
            WeightProvider::TrueCommon { .. } => WeightProvenance::TrueCommon,
            WeightProvider::TrueJoint { .. } => WeightProvenance::TrueJoint,
        }
    }
}

/// Provider resolved against a dataset.
pub(crate) enum Weights<'a> {
    Km { g_t: StepSurvival, g_c: StepSurvival },
    Unit,
    Naive,
    Common { g_t: &'a SurvivalFn, g_c: &'a SurvivalFn },
    Joint { s_t: &'a JointSurvivalFn, s_c: &'a JointSurvivalFn },
}

impl<'a> Weights<'a> {
    pub(crate) fn resolve(provider: &'a WeightProvider, data: &Dataset) -> Result<Self> {
        Ok(match provider {
            WeightProvider::KaplanMeier => Weights::Km {
                g_t: fit_censoring_survival(&data.censoring_records(Group::Treatment)),
                g_c: fit_censoring_survival(&data.censoring_records(Group::Control)),
            },
            WeightProvider::Unit => Weights::Unit,
            WeightProvider::Naive => Weights::Naive,
            WeightProvider::TrueCommon { treatment, control } => Weights::Common {
                g_t: treatment,
                g_c: control,
            },
            WeightProvider::TrueJoint { treatment, control } => {
                if data.n_endpoints() != 2 {
                    return Err(WinError::Unsupported(format!(
                        "joint censoring weights need exactly 2 endpoints, got {}",
                        data.n_endpoints()
                    )));
                }
                Weights::Joint {
                    s_t: treatment,
                    s_c: control,
                }
            }
        })
    }

    /// Denominator of `term` for weighted subject times `w`.
    pub(crate) fn denominator(&self, term: &KernelTerm, w: &[f64], tau: f64) -> f64 {
        let own = term.weighted;
        match self {
            Weights::Unit | Weights::Naive => 1.0,
            Weights::Km { g_t, g_c } => {
                let (opp_curve, own_curve) = match own {
                    Group::Control => (g_t, g_c),
                    Group::Treatment => (g_c, g_t),
                };
                opp_curve.survival_at(term.opposite_argument(w, tau), Side::Right)
                    * own_curve.survival_at(term.own_argument(w, tau), Side::Left)
            }
            Weights::Common { g_t, g_c } => {
                let (opp, own_f) = match own {
                    Group::Control => (g_t, g_c),
                    Group::Treatment => (g_c, g_t),
                };
                opp(term.opposite_argument(w, tau).max(0.0)) * own_f(term.own_argument(w, tau).max(0.0))
            }
            Weights::Joint { s_t, s_c } => {
                let (opp, own_f) = match own {
                    Group::Control => (s_t, s_c),
                    Group::Treatment => (s_c, s_t),
                };
                let a = term.endpoint_arguments(w, tau, true);
                let b = term.endpoint_arguments(w, tau, false);
                opp(a[0], a[1]) * own_f(b[0], b[1])
            }
        }
    }

    pub(crate) fn km_curves(&self) -> Option<(&StepSurvival, &StepSurvival)> {
        match self {
            Weights::Km { g_t, g_c } => Some((g_t, g_c)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSum {
    pub direction: Direction,
    /// 1-based position within its direction's term list.
    pub term: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinProbEstimate {
    pub pi_t: f64,
    pub pi_c: f64,
    pub pi_tie: f64,
    /// Values before clamping and renormalization.
    pub raw: [f64; 3],
    pub per_term_sums: Vec<TermSum>,
    pub n_t: usize,
    pub n_c: usize,
    pub tau: f64,
    pub margin_mode: MarginMode,
    pub renormalized: bool,
    pub weight_provenance: WeightProvenance,
}

impl WinProbEstimate {
    pub fn statistics(&self) -> WinStatistics {
        win_statistics(self.pi_t, self.pi_c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WinStatistics {
    /// `None` when the control win probability is 0.
    pub wr: Option<f64>,
    pub wo: Option<f64>,
    pub nb: f64,
}

impl WinStatistics {
    pub fn wr(&self) -> Result<f64> {
        self.wr.ok_or(WinError::UndefinedRatio)
    }

    pub fn wo(&self) -> Result<f64> {
        self.wo
            .ok_or_else(|| WinError::Undefined("win odds: control odds are zero".into()))
    }
}

/// Rescale to a proper probability triple when `pi_t + pi_c > 1`.
pub fn renormalize(pi_t: f64, pi_c: f64, pi_tie: f64) -> Result<(f64, f64, f64)> {
    if [pi_t, pi_c, pi_tie].iter().any(|p| p.is_nan() || *p < 0.0) {
        return Err(WinError::validation(format!(
            "probabilities must be nonnegative, got ({pi_t}, {pi_c}, {pi_tie})"
        )));
    }
    if pi_t + pi_c <= 1.0 {
        return Ok((pi_t, pi_c, pi_tie));
    }
    let total = pi_t + pi_c + pi_tie;
    if total == 0.0 {
        return Err(WinError::Undefined("all three probabilities are zero".into()));
    }
    Ok((pi_t / total, pi_c / total, pi_tie / total))
}

pub fn win_statistics(pi_t: f64, pi_c: f64) -> WinStatistics {
    let tie_half = 0.5 * (1.0 - pi_t - pi_c);
    let wo_den = pi_c + tie_half;
    WinStatistics {
        wr: (pi_c > 0.0).then(|| pi_t / pi_c),
        wo: (wo_den > 0.0).then(|| (pi_t + tie_half) / wo_den),
        nb: pi_t - pi_c,
    }
}

/// Dataset truncated at the configured horizon.
pub fn resolve_horizon<'d>(dataset: &'d Dataset, config: &AnalysisConfig) -> Result<Cow<'d, Dataset>> {
    config.validate()?;
    if dataset.n_endpoints() != config.n_endpoints {
        return Err(WinError::config(format!(
            "configuration has {} endpoints, data have {}",
            config.n_endpoints,
            dataset.n_endpoints()
        )));
    }
    let tau = match config.tau {
        TauSpec::Fixed(t) => t,
        TauSpec::Auto(a) => select_tau_auto(dataset, a)?,
    };
    if tau == dataset.tau() {
        Ok(Cow::Borrowed(dataset))
    } else if tau < dataset.tau() {
        Ok(Cow::Owned(dataset.with_horizon(tau)?))
    } else {
        Err(WinError::config(format!(
            "horizon {tau} exceeds the horizon {} the data were truncated at",
            dataset.tau()
        )))
    }
}

/// Subjects of both groups in dataset order.
pub(crate) struct Groups<'a> {
    pub treat: Vec<&'a SubjectRecord>,
    pub ctrl: Vec<&'a SubjectRecord>,
}

impl<'a> Groups<'a> {
    pub fn new(data: &'a Dataset) -> Self {
        Groups {
            treat: data.group(Group::Treatment).collect(),
            ctrl: data.group(Group::Control).collect(),
        }
    }

    /// `(winner candidates, weighted subjects)` for a term.
    pub fn roles(&self, term: &KernelTerm) -> (&[&'a SubjectRecord], &[&'a SubjectRecord]) {
        match term.weighted {
            Group::Control => (&self.treat, &self.ctrl),
            Group::Treatment => (&self.ctrl, &self.treat),
        }
    }
}

/// Sum over pairs of one term's values, factoring the weight out of the
/// inner loop over winner candidates.
fn term_total(
    q: usize,
    term: &KernelTerm,
    groups: &Groups<'_>,
    weights: &Weights<'_>,
    tau: f64,
    floor: f64,
) -> Result<f64> {
    let (winners, weighted) = groups.roles(term);
    let per_w = map_indexed(weighted.len(), |wi| -> Result<f64> {
        let w = weighted[wi];
        if !term.delta_ok(w) {
            return Ok(0.0);
        }
        let mut count = 0usize;
        let mut partner = None;
        for (ai, a) in winners.iter().enumerate() {
            if term.compares(&a.times, &w.times, tau) {
                count += 1;
                partner.get_or_insert(ai);
            }
        }
        if count == 0 {
            return Ok(0.0);
        }
        let den = weights.denominator(term, &w.times, tau);
        if !(den > floor) {
            return Err(WinError::DegenerateWeight {
                term: q + 1,
                group: term.weighted.to_string(),
                subject: wi + 1,
                partner: partner.unwrap_or(0) + 1,
                weight: den,
            });
        }
        Ok(term.signed_coefficient() * count as f64 / den)
    });
    let mut total = 0.0;
    for v in per_w {
        total += v?;
    }
    Ok(total)
}

pub fn estimate_win_probabilities(dataset: &Dataset, config: &AnalysisConfig) -> Result<WinProbEstimate> {
    estimate_with_weight_provider(dataset, config, &WeightProvider::KaplanMeier)
}

/// Unweighted sequential comparison of the observed data; see
/// [`WeightProvider::Naive`].
pub fn naive_win_probabilities(dataset: &Dataset, config: &AnalysisConfig) -> Result<WinProbEstimate> {
    estimate_with_weight_provider(dataset, config, &WeightProvider::Naive)
}

/// Outcome of the naive rule for one pair: `1` treatment wins, `-1` control
/// wins, `0` undecided on every endpoint. A subject wins endpoint `l` when
/// the other's event there is observed and it exceeds that time by more than
/// the margin.
pub fn naive_pair_outcome(t: &SubjectRecord, c: &SubjectRecord, margins: &[f64]) -> i8 {
    for l in 0..t.times.len() {
        if c.events[l] && t.times[l] > c.times[l] + margins[l] {
            return 1;
        }
        if t.events[l] && c.times[l] > t.times[l] + margins[l] {
            return -1;
        }
    }
    0
}

/// Naive outcomes for all pairs, row-major with treatment rows.
pub(crate) fn naive_pairs(groups: &Groups<'_>, margins: &[f64]) -> Vec<i8> {
    map_indexed(groups.treat.len(), |i| {
        groups
            .ctrl
            .iter()
            .map(|c| naive_pair_outcome(groups.treat[i], c, margins))
            .collect::<Vec<i8>>()
    })
    .concat()
}

pub fn estimate_with_weight_provider(
    dataset: &Dataset,
    config: &AnalysisConfig,
    provider: &WeightProvider,
) -> Result<WinProbEstimate> {
    let data = resolve_horizon(dataset, config)?;
    let weights = Weights::resolve(provider, &data)?;
    estimate_resolved(&data, config, &weights, provider.provenance())
}

pub(crate) fn estimate_resolved(
    data: &Dataset,
    config: &AnalysisConfig,
    weights: &Weights<'_>,
    provenance: WeightProvenance,
) -> Result<WinProbEstimate> {
    let tau = data.tau();
    let l = data.n_endpoints();
    let mode = config.margin_mode()?;
    let groups = Groups::new(data);
    let n_pairs = (groups.treat.len() * groups.ctrl.len()) as f64;
    let mut per_term_sums = Vec::new();

    if let Weights::Naive = weights {
        let out = naive_pairs(&groups, &config.margins);
        let pi_t = out.iter().filter(|&&o| o == 1).count() as f64 / n_pairs;
        let pi_c = out.iter().filter(|&&o| o == -1).count() as f64 / n_pairs;
        let pi_tie = out.iter().filter(|&&o| o == 0).count() as f64 / n_pairs;
        return Ok(WinProbEstimate {
            pi_t,
            pi_c,
            pi_tie,
            raw: [pi_t, pi_c, pi_tie],
            per_term_sums,
            n_t: groups.treat.len(),
            n_c: groups.ctrl.len(),
            tau,
            margin_mode: mode,
            renormalized: false,
            weight_provenance: provenance,
        });
    }

    let mut direction_total = |terms: &[KernelTerm]| -> Result<f64> {
        let mut total = 0.0;
        for (q, term) in terms.iter().enumerate() {
            let v = term_total(q, term, &groups, weights, tau, config.weight_floor)? / n_pairs;
            per_term_sums.push(TermSum {
                direction: term.direction,
                term: q + 1,
                value: v,
            });
            total += v;
        }
        Ok(total)
    };

    let pi_t = direction_total(&enumerate_win_terms(l, &config.margins, Direction::TreatmentWins)?)?;
    let pi_c = direction_total(&enumerate_win_terms(l, &config.margins, Direction::ControlWins)?)?;
    let pi_tie = match mode {
        MarginMode::Zero => 1.0 - pi_t - pi_c,
        MarginMode::Positive => {
            let terms = enumerate_tie_terms(l, &config.margins)?;
            let half = terms.len() / 2;
            // one sum per direction keeps the result exactly symmetric under a group swap
            let weighted_c = direction_total(&terms[..half])?;
            let weighted_t = direction_total(&terms[half..])?;
            weighted_c + weighted_t
        }
    };
    let raw = [pi_t, pi_c, pi_tie];
    let (mut t, mut c, mut tie) = (pi_t.max(0.0), pi_c.max(0.0), pi_tie.max(0.0));
    let mut renormalized = false;
    if config.renormalize && t + c > 1.0 {
        (t, c, tie) = renormalize(t, c, tie)?;
        renormalized = true;
    }
    Ok(WinProbEstimate {
        pi_t: t,
        pi_c: c,
        pi_tie: tie,
        raw,
        per_term_sums,
        n_t: groups.treat.len(),
        n_c: groups.ctrl.len(),
        tau,
        margin_mode: mode,
        renormalized,
        weight_provenance: provenance,
    })
}
