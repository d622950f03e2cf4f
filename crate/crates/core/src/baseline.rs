//! Time-to-first-event reduction and the two-sample log-rank test.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Group, SubjectRecord};
use crate::error::{Result, WinError};
use crate::normal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnivariateSurvRecord {
    pub time: f64,
    pub event: bool,
    pub group: Group,
}

/// Earliest observed time; an event at the minimum beats a censoring there.
pub fn time_to_first_event(subject: &SubjectRecord) -> UnivariateSurvRecord {
    let time = subject.times.iter().copied().fold(f64::INFINITY, f64::min);
    let event = subject
        .times
        .iter()
        .zip(&subject.events)
        .any(|(&x, &d)| d && x == time);
    UnivariateSurvRecord {
        time,
        event,
        group: subject.group,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRankResult {
    pub chi2: f64,
    /// Positive when treatment has fewer events than expected.
    pub z: f64,
    pub p_one_sided: f64,
    pub p_two_sided: f64,
    /// Treatment observed minus expected events.
    pub observed_minus_expected: f64,
    pub variance: f64,
}

pub fn logrank_test(records: &[UnivariateSurvRecord]) -> Result<LogRankResult> {
    let n_t = records.iter().filter(|r| r.group == Group::Treatment).count();
    if n_t == 0 || n_t == records.len() {
        return Err(WinError::validation("log-rank test needs both groups"));
    }
    let mut sorted: Vec<&UnivariateSurvRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.time.total_cmp(&b.time));

    let (mut at_risk, mut at_risk_t) = (records.len() as f64, n_t as f64);
    let (mut o_minus_e, mut var) = (0.0, 0.0);
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].time;
        let (mut d, mut d_t, mut leave, mut leave_t) = (0.0, 0.0, 0.0, 0.0);
        while i < sorted.len() && sorted[i].time == t {
            let r = sorted[i];
            let is_t = r.group == Group::Treatment;
            if r.event {
                d += 1.0;
                if is_t {
                    d_t += 1.0;
                }
            }
            leave += 1.0;
            if is_t {
                leave_t += 1.0;
            }
            i += 1;
        }
        if d > 0.0 {
            let p = at_risk_t / at_risk;
            o_minus_e += d_t - d * p;
            if at_risk > 1.0 {
                var += d * p * (1.0 - p) * (at_risk - d) / (at_risk - 1.0);
            }
        }
        at_risk -= leave;
        at_risk_t -= leave_t;
    }
    if !(var > 0.0) {
        return Err(WinError::DegenerateTest("log-rank variance is zero".into()));
    }
    let z = -o_minus_e / var.sqrt();
    Ok(LogRankResult {
        chi2: o_minus_e * o_minus_e / var,
        z,
        p_one_sided: normal::sf(z),
        p_two_sided: (2.0 * normal::sf(z.abs())).min(1.0),
        observed_minus_expected: o_minus_e,
        variance: var,
    })
}

/// Log-rank test on the first-event reduction of an (already truncated)
/// dataset. Reaching the horizon is administrative censoring here, not an
/// event.
pub fn logrank_dataset(dataset: &Dataset) -> Result<LogRankResult> {
    let tau = dataset.tau();
    let recs: Vec<_> = dataset
        .subjects()
        .iter()
        .map(|s| {
            let mut r = time_to_first_event(s);
            if r.time >= tau {
                r.event = false;
            }
            r
        })
        .collect();
    logrank_test(&recs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn subj(times: Vec<f64>, events: Vec<bool>) -> SubjectRecord {
        SubjectRecord::new("s", Group::Treatment, times, events).unwrap()
    }

    fn rec(time: f64, event: bool, group: Group) -> UnivariateSurvRecord {
        UnivariateSurvRecord { time, event, group }
    }

    #[test]
    fn first_event_rules() {
        let r = time_to_first_event(&subj(vec![3.0, 5.0], vec![true, false]));
        assert_eq!((r.time, r.event), (3.0, true));
        let r = time_to_first_event(&subj(vec![4.0, 4.0], vec![false, false]));
        assert_eq!((r.time, r.event), (4.0, false));
        let r = time_to_first_event(&subj(vec![4.0, 4.0], vec![false, true]));
        assert_eq!((r.time, r.event), (4.0, true));
    }

    #[test]
    fn hand_tables() {
        use Group::*;
        let r = logrank_test(&[
            rec(1.0, false, Treatment),
            rec(3.0, true, Treatment),
            rec(2.0, true, Control),
            rec(4.0, true, Control),
        ])
        .unwrap();
        // time 2: O-E = -1/3, V = 2/9; time 3: O-E = 1/2, V = 1/4
        assert_abs_diff_eq!(r.observed_minus_expected, 1.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.variance, 17.0 / 36.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.z, -1.0 / 17f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn horizon_is_not_an_event() {
        let s = vec![
            SubjectRecord::new("a", Group::Treatment, vec![10.0], vec![true]).unwrap(),
            SubjectRecord::new("b", Group::Treatment, vec![4.0], vec![true]).unwrap(),
            SubjectRecord::new("c", Group::Control, vec![10.0], vec![true]).unwrap(),
            SubjectRecord::new("d", Group::Control, vec![2.0], vec![true]).unwrap(),
        ];
        let d = Dataset::with_tau(s, 10.0).unwrap();
        let r = logrank_dataset(&d).unwrap();
        // time 2: O-E = -1/2, V = 1/4; time 4: O-E = 1/3, V = 2/9
        assert_abs_diff_eq!(r.observed_minus_expected, -1.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.variance, 17.0 / 36.0, epsilon = 1e-12);
    }

    #[test]
    fn identical_groups_give_zero() {
        use Group::*;
        let times = [(1.0, true), (2.0, false), (3.0, true)];
        let mut recs = Vec::new();
        for &(t, e) in &times {
            recs.push(rec(t, e, Treatment));
            recs.push(rec(t, e, Control));
        }
        let r = logrank_test(&recs).unwrap();
        assert_abs_diff_eq!(r.chi2, 0.0, epsilon = 1e-15);
        assert!(logrank_test(&[rec(1.0, false, Treatment), rec(2.0, false, Control)]).is_err());
    }
}
