//! Gap filling for daily series with linearly weighted moving averages.
//!
//! A run of `n` missing days is filled with the mean of two LWMAs: one over
//! the `2n` days before the gap and one over the `2n` days after it, each
//! weighted `1..=2n` increasing toward the gap. Flanks must be fully
//! observed in the original series; filled values never feed other gaps.

use super::SlotStatus;
use crate::DailySeries;

#[derive(Debug, Clone, PartialEq)]
pub struct FilledDaily {
    pub series: DailySeries,
    pub mask: Vec<SlotStatus>,
}

impl FilledDaily {
    pub fn unfilled(&self) -> usize {
        self.mask
            .iter()
            .filter(|&&m| m == SlotStatus::Unimputable)
            .count()
    }
}

pub fn lwma_fill(series: &DailySeries) -> FilledDaily {
    let x = &series.values;
    let len = x.len();
    // prefix[i] = observed days among x[..i]
    let mut prefix = Vec::with_capacity(len + 1);
    prefix.push(0usize);
    for v in x {
        prefix.push(prefix.last().unwrap() + v.is_some() as usize);
    }
    let clean = |a: usize, b: usize| prefix[b] - prefix[a] == b - a;

    let mut values = x.clone();
    let mut mask: Vec<SlotStatus> = x
        .iter()
        .map(|v| {
            if v.is_some() {
                SlotStatus::Observed
            } else {
                SlotStatus::Unimputable
            }
        })
        .collect();

    let mut i = 0;
    while i < len {
        if x[i].is_some() {
            i += 1;
            continue;
        }
        let start = i;
        while i < len && x[i].is_none() {
            i += 1;
        }
        let end = i;
        let n = end - start;
        let span = 2 * n;

        let before = (start > 0).then(|| {
            (start >= span && clean(start - span, start)).then(|| {
                let (num, den) = (0..span).fold((0.0, 0.0), |(num, den), j| {
                    let w = (j + 1) as f64;
                    (num + w * x[start - span + j].unwrap(), den + w)
                });
                num / den
            })
        });
        let after = (end < len).then(|| {
            (end + span <= len && clean(end, end + span)).then(|| {
                let (num, den) = (0..span).fold((0.0, 0.0), |(num, den), j| {
                    let w = (span - j) as f64;
                    (num + w * x[end + j].unwrap(), den + w)
                });
                num / den
            })
        });
        // Outer None: no data on that side at all (series edge).
        // Inner None: data exists but the flank is too short or gappy.
        let fill = match (before, after) {
            (Some(Some(b)), Some(Some(a))) => Some((b + a) / 2.0),
            (None, Some(Some(a))) => Some(a),
            (Some(Some(b)), None) => Some(b),
            _ => None,
        };
        if let Some(v) = fill {
            for k in start..end {
                values[k] = Some(v);
                mask[k] = SlotStatus::Imputed;
            }
        }
    }

    FilledDaily {
        series: DailySeries {
            values,
            ..series.clone()
        },
        mask,
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    use super::*;
    use crate::DailyElement;

    fn series(values: Vec<Option<f64>>) -> DailySeries {
        DailySeries {
            station: "USW00000001".into(),
            element: DailyElement::Tmax,
            start: NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(),
            values,
        }
    }

    #[test]
    fn single_day_gap_worked_example() {
        let s = series(vec![Some(10.0), Some(20.0), None, Some(30.0), Some(40.0)]);
        let f = lwma_fill(&s);
        // before: (1*10 + 2*20)/3, after: (2*30 + 1*40)/3
        assert_eq!(f.series.values[2], Some(25.0));
        assert_eq!(f.mask[2], SlotStatus::Imputed);
        assert_eq!(f.mask[0], SlotStatus::Observed);
    }

    #[test]
    fn constant_series_fills_the_constant() {
        let mut v = vec![Some(3.5); 40];
        for slot in &mut v[15..19] {
            *slot = None;
        }
        let f = lwma_fill(&series(v));
        assert!(f.series.values.iter().all(|v| *v == Some(3.5)));
        assert_eq!(f.unfilled(), 0);
    }

    #[test]
    fn short_flank_leaves_gap_unfilled() {
        let v = vec![
            Some(1.0),
            Some(2.0),
            Some(3.0),
            None,
            None,
            Some(4.0),
            Some(5.0),
            Some(6.0),
            Some(7.0),
        ];
        let f = lwma_fill(&series(v));
        assert_eq!(f.series.values[3], None);
        assert_eq!(f.mask[3], SlotStatus::Unimputable);
        assert_eq!(f.mask[4], SlotStatus::Unimputable);
    }

    #[test]
    fn nested_gap_in_flank_is_not_skipped() {
        // The 1-day gap at index 6 has a clean 2-day flank on each side, but
        // the 2-day gap at 2..4 needs 4 clean days after it and finds index 6.
        let v = vec![
            Some(1.0),
            Some(1.0),
            None,
            None,
            Some(2.0),
            Some(2.0),
            None,
            Some(2.0),
            Some(2.0),
        ];
        let f = lwma_fill(&series(v));
        assert_eq!(f.mask[2], SlotStatus::Unimputable);
        assert_eq!(f.mask[6], SlotStatus::Imputed);
    }

    #[test]
    fn edge_gaps_use_one_side() {
        let v = vec![None, Some(10.0), Some(20.0), Some(30.0), None];
        let f = lwma_fill(&series(v));
        // leading gap: after window [10, 20] weights (2, 1)
        assert_relative_eq!(f.series.values[0].unwrap(), 40.0 / 3.0, max_relative = 1e-15);
        // trailing gap: before window [20, 30] weights (1, 2)
        assert_relative_eq!(f.series.values[4].unwrap(), 80.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn all_missing_stays_missing() {
        let f = lwma_fill(&series(vec![None; 5]));
        assert_eq!(f.unfilled(), 5);
    }

    proptest! {
        #[test]
        fn fills_lie_within_flank_range(
            values in prop::collection::vec(prop::option::weighted(0.85, -30.0..45.0_f64), 1..200)
        ) {
            let s = series(values.clone());
            let f = lwma_fill(&s);
            for (i, (orig, m)) in values.iter().zip(&f.mask).enumerate() {
                match m {
                    SlotStatus::Observed => prop_assert_eq!(f.series.values[i].map(f64::to_bits), orig.map(f64::to_bits)),
                    SlotStatus::Unimputable => prop_assert!(f.series.values[i].is_none()),
                    SlotStatus::Imputed => {
                        let mut a = i;
                        while a > 0 && values[a - 1].is_none() { a -= 1; }
                        let mut b = i;
                        while b < values.len() && values[b].is_none() { b += 1; }
                        let n = b - a;
                        let lo_idx = a.saturating_sub(2 * n);
                        let hi_idx = (b + 2 * n).min(values.len());
                        let flank: Vec<f64> = values[lo_idx..a].iter().chain(&values[b..hi_idx]).flatten().copied().collect();
                        let lo = flank.iter().copied().fold(f64::INFINITY, f64::min);
                        let hi = flank.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        let v = f.series.values[i].unwrap();
                        prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
                    }
                }
            }
        }
    }
}
