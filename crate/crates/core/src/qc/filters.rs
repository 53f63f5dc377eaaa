use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{QcError, StudyWindow};
use crate::geo::{DailySeries, MonthlySeries, YearMonth};

/// How the daily record-length rule combines "short record" and "ended
/// before the cutoff year".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthRule {
    /// Drop only records that are short *and* ended early.
    #[default]
    Conjunction,
    /// Drop records that are short or ended early.
    Either,
}

/// Retention thresholds. All comparisons are strict ("more than").
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QcThresholds {
    pub monthly_max_missing_frac: f64,
    pub monthly_max_gap_months: usize,
    pub daily_min_record_months: u32,
    pub daily_record_end_year: i32,
    pub daily_length_rule: LengthRule,
    pub daily_max_summer_missing_frac: f64,
    pub daily_max_gap_days: usize,
}

impl Default for QcThresholds {
    fn default() -> Self {
        QcThresholds {
            monthly_max_missing_frac: 0.10,
            monthly_max_gap_months: 12,
            daily_min_record_months: 719,
            daily_record_end_year: 2014,
            daily_length_rule: LengthRule::Conjunction,
            daily_max_summer_missing_frac: 0.20,
            daily_max_gap_days: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Kept,
    Dropped,
}

impl Verdict {
    pub fn code(self) -> &'static str {
        match self {
            Verdict::Kept => "kept",
            Verdict::Dropped => "dropped",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QcReason {
    Pass,
    MonthlyMissingFraction,
    MonthlyConsecutiveGap,
    DailyShortRecord,
    DailySummerMissing,
    DailyConsecutiveGap,
}

impl QcReason {
    pub fn code(self) -> &'static str {
        match self {
            QcReason::Pass => "pass",
            QcReason::MonthlyMissingFraction => "monthly_missing_fraction",
            QcReason::MonthlyConsecutiveGap => "monthly_consecutive_gap",
            QcReason::DailyShortRecord => "daily_short_record",
            QcReason::DailySummerMissing => "daily_summer_missing",
            QcReason::DailyConsecutiveGap => "daily_consecutive_gap",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        [
            QcReason::Pass,
            QcReason::MonthlyMissingFraction,
            QcReason::MonthlyConsecutiveGap,
            QcReason::DailyShortRecord,
            QcReason::DailySummerMissing,
            QcReason::DailyConsecutiveGap,
        ]
        .into_iter()
        .find(|r| r.code() == code)
    }
}

impl fmt::Display for QcReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Outcome of the retention rules for one station series. A dropped series
/// names the first rule that fired.
///
/// `missing_frac` is the window-wide missing fraction for monthly series and
/// the summer (JJA) missing fraction for daily ones; `longest_gap` is in
/// months or days respectively.
#[derive(Debug, Clone, PartialEq)]
pub struct QcReport {
    pub station: String,
    pub element: String,
    pub verdict: Verdict,
    pub reason: QcReason,
    pub missing_frac: f64,
    pub longest_gap: usize,
}

fn longest_run(missing: impl Iterator<Item = bool>) -> usize {
    let (mut best, mut run) = (0, 0);
    for m in missing {
        run = if m { run + 1 } else { 0 };
        best = best.max(run);
    }
    best
}

pub fn filter_monthly_stations(
    series: Vec<MonthlySeries>,
    window: StudyWindow,
    thresholds: &QcThresholds,
) -> Result<(Vec<MonthlySeries>, Vec<QcReport>), QcError> {
    if window.is_empty() {
        return Err(QcError::EmptyWindow(window));
    }
    let first = window.first_month();
    let total = window.months();
    let mut kept = Vec::new();
    let mut reports = Vec::with_capacity(series.len());
    for s in series {
        let missing = || (0..total as i64).map(|i| s.get(first.offset(i)).is_none());
        let n_missing = missing().filter(|&m| m).count();
        let frac = n_missing as f64 / total as f64;
        let gap = longest_run(missing());
        let reason = if frac > thresholds.monthly_max_missing_frac {
            QcReason::MonthlyMissingFraction
        } else if gap > thresholds.monthly_max_gap_months {
            QcReason::MonthlyConsecutiveGap
        } else {
            QcReason::Pass
        };
        reports.push(QcReport {
            station: s.station.clone(),
            element: s.element.code().to_owned(),
            verdict: if reason == QcReason::Pass {
                Verdict::Kept
            } else {
                Verdict::Dropped
            },
            reason,
            missing_frac: frac,
            longest_gap: gap,
        });
        if reason == QcReason::Pass {
            kept.push(s);
        }
    }
    Ok((kept, reports))
}

fn months_spanned(first: NaiveDate, last: NaiveDate) -> i64 {
    YearMonth::of(last).index() - YearMonth::of(first).index() + 1
}

fn summer_missing_fraction(s: &DailySeries, window: StudyWindow) -> f64 {
    let mut total = 0_usize;
    let mut missing = 0_usize;
    for year in window.years() {
        let start = NaiveDate::from_ymd_opt(year, 6, 1).unwrap();
        for day in start.iter_days().take(92) {
            total += 1;
            if s.get(day).is_none() {
                missing += 1;
            }
        }
    }
    missing as f64 / total as f64
}

/// Longest run of missing days inside the window, limited to the span the
/// series covers.
fn longest_daily_gap(s: &DailySeries, window: StudyWindow) -> usize {
    let lo = NaiveDate::from_ymd_opt(window.start_year, 1, 1).unwrap().max(s.start);
    let hi = NaiveDate::from_ymd_opt(window.end_year, 12, 31).unwrap().min(s.end());
    match (s.index_of(lo), s.index_of(hi)) {
        (Some(a), Some(b)) if a <= b => longest_run(s.values[a..=b].iter().map(Option::is_none)),
        _ => 0,
    }
}

pub fn filter_daily_stations(
    series: Vec<DailySeries>,
    window: StudyWindow,
    thresholds: &QcThresholds,
) -> (Vec<DailySeries>, Vec<QcReport>) {
    let cutoff = NaiveDate::from_ymd_opt(thresholds.daily_record_end_year, 1, 1).unwrap();
    let mut kept = Vec::new();
    let mut reports = Vec::with_capacity(series.len());
    for s in series {
        let summer = summer_missing_fraction(&s, window);
        let gap = longest_daily_gap(&s, window);
        let too_short = match (s.first_observed(), s.last_observed()) {
            (Some(first), Some(last)) => {
                let short = months_spanned(first, last) < thresholds.daily_min_record_months as i64;
                let early = last < cutoff;
                match thresholds.daily_length_rule {
                    LengthRule::Conjunction => short && early,
                    LengthRule::Either => short || early,
                }
            }
            _ => true,
        };
        let reason = if too_short {
            QcReason::DailyShortRecord
        } else if summer > thresholds.daily_max_summer_missing_frac {
            QcReason::DailySummerMissing
        } else if gap > thresholds.daily_max_gap_days {
            QcReason::DailyConsecutiveGap
        } else {
            QcReason::Pass
        };
        reports.push(QcReport {
            station: s.station.clone(),
            element: s.element.code().to_owned(),
            verdict: if reason == QcReason::Pass {
                Verdict::Kept
            } else {
                Verdict::Dropped
            },
            reason,
            missing_frac: summer,
            longest_gap: gap,
        });
        if reason == QcReason::Pass {
            kept.push(s);
        }
    }
    (kept, reports)
}
