//! Calling-behaviour features: call counts and durations by direction and
//! time slice.

use std::collections::HashMap;

use chrono::{Datelike, NaiveTime, Weekday};
use serde::{Deserialize, Serialize};

use crate::calendar::DateWindow;
use crate::graph::EdgeMode;
use crate::ingest::CdrRecord;

const WEEKDAYS: [&str; 7] = ["Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"];
const SLICES: usize = 12;
const MEASURES: [&str; 2] = ["Count", "Duration"];

/// Number of calling-behaviour features per subject.
pub const N_CALLING: usize = 3 * MEASURES.len() * SLICES;

/// Daytime interval `[start, end)`; everything else is night.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayPeriod {
    pub start: NaiveTime,
    pub end: NaiveTime,
}

impl Default for DayPeriod {
    fn default() -> Self {
        DayPeriod {
            start: NaiveTime::from_hms_opt(8, 0, 0).unwrap(),
            end: NaiveTime::from_hms_opt(20, 0, 0).unwrap(),
        }
    }
}

impl DayPeriod {
    pub fn is_day(&self, t: NaiveTime) -> bool {
        if self.start <= self.end {
            t >= self.start && t < self.end
        } else {
            t >= self.start || t < self.end
        }
    }
}

fn slice_name(s: usize) -> Option<&'static str> {
    match s {
        0 => None,
        1 => Some("Day"),
        2 => Some("Night"),
        3 => Some("Weekday"),
        4 => Some("Weekend"),
        k => Some(WEEKDAYS[k - 5]),
    }
}

fn mode_slot(mode: EdgeMode) -> usize {
    match mode {
        EdgeMode::Incoming => 0,
        EdgeMode::Outgoing => 1,
        EdgeMode::Undirected => 2,
    }
}

/// Feature names, e.g. `Count IN`, `Weekend Duration OUT`, `Tuesday Duration UD`.
pub fn calling_behavior_names() -> Vec<String> {
    let mut names = Vec::with_capacity(N_CALLING);
    for mode in EdgeMode::ALL {
        for measure in MEASURES {
            for s in 0..SLICES {
                names.push(match slice_name(s) {
                    None => format!("{measure} {}", mode.tag()),
                    Some(slice) => format!("{slice} {measure} {}", mode.tag()),
                });
            }
        }
    }
    names
}

fn slices_of(r: &CdrRecord, day: &DayPeriod) -> [usize; 4] {
    let wd = r.start_date.weekday();
    let weekend = matches!(wd, Weekday::Sat | Weekday::Sun);
    [
        0,
        if day.is_day(r.start_time) { 1 } else { 2 },
        if weekend { 4 } else { 3 },
        5 + wd.num_days_from_monday() as usize,
    ]
}

/// Calling-behaviour vectors (row-major, `N_CALLING` per subject) for the
/// calls dated inside `window`.
pub fn calling_behavior_features(records: &[CdrRecord], window: DateWindow, subjects: &[&str], day: &DayPeriod) -> Vec<f64> {
    let index: HashMap<&str, usize> = subjects.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let mut out = vec![0.0; subjects.len() * N_CALLING];
    for r in records.iter().filter(|r| window.contains(r.start_date)) {
        let ends = [(r.from_id.as_str(), EdgeMode::Outgoing), (r.to_id.as_str(), EdgeMode::Incoming)];
        if !ends.iter().any(|(id, _)| index.contains_key(id)) {
            continue;
        }
        let slices = slices_of(r, day);
        for (id, mode) in ends {
            let Some(&row) = index.get(id) else { continue };
            let base = row * N_CALLING;
            for m in [mode, EdgeMode::Undirected] {
                let block = base + mode_slot(m) * MEASURES.len() * SLICES;
                for &s in &slices {
                    out[block + s] += 1.0;
                    out[block + SLICES + s] += f64::from(r.duration);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn call(date: (i32, u32, u32), time: (u32, u32), duration: u32, from: &str, to: &str) -> CdrRecord {
        CdrRecord {
            start_date: NaiveDate::from_ymd_opt(date.0, date.1, date.2).unwrap(),
            start_time: NaiveTime::from_hms_opt(time.0, time.1, 0).unwrap(),
            duration,
            from_id: from.into(),
            to_id: to.into(),
        }
    }

    fn window() -> DateWindow {
        DateWindow::new(
            NaiveDate::from_ymd_opt(2015, 1, 1).unwrap(),
            NaiveDate::from_ymd_opt(2015, 4, 1).unwrap(),
        )
    }

    fn value(v: &[f64], name: &str) -> f64 {
        let names = calling_behavior_names();
        v[names.iter().position(|n| n == name).unwrap_or_else(|| panic!("no feature {name}"))]
    }

    #[test]
    fn names_are_unique_and_complete() {
        let names = calling_behavior_names();
        assert_eq!(names.len(), 72);
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 72);
        assert!(names.contains(&"Weekend Duration OUT".to_string()));
        assert!(names.contains(&"Count IN".to_string()));
    }

    #[test]
    fn tuesday_afternoon_call_received() {
        // 2015-01-06 is a Tuesday
        let recs = [call((2015, 1, 6), (14, 0), 30, "x", "s")];
        let v = calling_behavior_features(&recs, window(), &["s"], &DayPeriod::default());
        assert_eq!(value(&v, "Count IN"), 1.0);
        assert_eq!(value(&v, "Tuesday Duration UD"), 30.0);
        assert_eq!(value(&v, "Weekend Duration OUT"), 0.0);
        assert_eq!(value(&v, "Day Count IN"), 1.0);
        assert_eq!(value(&v, "Night Count IN"), 0.0);
        assert_eq!(value(&v, "Count OUT"), 0.0);
        assert_eq!(v.iter().filter(|&&x| x != 0.0).count(), 16);
    }

    #[test]
    fn weekend_outgoing_durations_sum() {
        // 2015-01-10 is a Saturday
        let recs = [
            call((2015, 1, 10), (22, 0), 10, "s", "a"),
            call((2015, 1, 10), (7, 59), 20, "s", "b"),
        ];
        let v = calling_behavior_features(&recs, window(), &["s"], &DayPeriod::default());
        assert_eq!(value(&v, "Weekend Duration OUT"), 30.0);
        assert_eq!(value(&v, "Night Count OUT"), 2.0);
        assert_eq!(value(&v, "Saturday Count UD"), 2.0);
    }

    #[test]
    fn no_calls_and_out_of_window() {
        let recs = [call((2015, 4, 2), (10, 0), 50, "s", "a")];
        let v = calling_behavior_features(&recs, window(), &["s", "t"], &DayPeriod::default());
        assert!(v.iter().all(|&x| x == 0.0));
        assert_eq!(v.len(), 2 * N_CALLING);
    }

    #[test]
    fn overnight_day_period() {
        let p = DayPeriod {
            start: NaiveTime::from_hms_opt(22, 0, 0).unwrap(),
            end: NaiveTime::from_hms_opt(6, 0, 0).unwrap(),
        };
        assert!(p.is_day(NaiveTime::from_hms_opt(23, 0, 0).unwrap()));
        assert!(p.is_day(NaiveTime::from_hms_opt(1, 0, 0).unwrap()));
        assert!(!p.is_day(NaiveTime::from_hms_opt(12, 0, 0).unwrap()));
    }
}
