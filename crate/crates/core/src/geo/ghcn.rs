//! Fixed-width GHCN-Daily and GHCN-Monthly record layouts.
//!
//! Daily, 269 bytes per element-month:
//!
//! ```text
//! 1-11 id | 12-15 year | 16-17 month | 18-21 element | 31 x (5-char value + 3 flags)
//! ```
//!
//! values in tenths of °C. Monthly, 115 bytes per element-year:
//!
//! ```text
//! 1-11 id | 12-15 year | 16-19 element | 12 x (5-char value + 3 flags)
//! ```
//!
//! values in hundredths of °C. `-9999` marks a missing value in both.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::Days;
use thiserror::Error;

use super::{days_in_month, DailyElement, DailySeries, MonthlyElement, MonthlySeries, YearMonth};

pub const GHCND_LINE_LEN: usize = 269;
pub const GHCNM_LINE_LEN: usize = 115;
pub const MISSING_VALUE: i32 = -9999;

const VALUE_GROUP: usize = 8;
const VALUE_WIDTH: usize = 5;
const DAILY_VALUES_AT: usize = 21;
const MONTHLY_VALUES_AT: usize = 19;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LineErrorKind {
    #[error("expected {expected} characters, found {found}")]
    Length { expected: usize, found: usize },
    #[error("bad {field} field `{text}`")]
    Field { field: &'static str, text: String },
    #[error("duplicate record for {0}")]
    Duplicate(String),
}

/// A rejected input line. `line` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct LineError {
    pub line: usize,
    pub kind: LineErrorKind,
}

/// Good records plus every rejected line.
#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub errors: Vec<LineError>,
}

fn lines(bytes: &[u8]) -> impl Iterator<Item = (usize, &[u8])> {
    bytes
        .split(|&b| b == b'\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix(b"\r").unwrap_or(l)))
        .filter(|(_, l)| !l.is_empty())
}

fn field_err(field: &'static str, raw: &[u8]) -> LineErrorKind {
    LineErrorKind::Field {
        field,
        text: String::from_utf8_lossy(raw).into_owned(),
    }
}

/// Right-aligned signed integer, leading blanks allowed.
fn parse_int(raw: &[u8]) -> Option<i32> {
    let mut rest = raw;
    while let [b' ', tail @ ..] = rest {
        rest = tail;
    }
    let (negative, digits) = match rest {
        [b'-', tail @ ..] => (true, tail),
        [b'+', tail @ ..] => (false, tail),
        _ => (false, rest),
    };
    if digits.is_empty() || digits.len() > 9 {
        return None;
    }
    let mut value = 0_i32;
    for &d in digits {
        if !d.is_ascii_digit() {
            return None;
        }
        value = value * 10 + (d - b'0') as i32;
    }
    Some(if negative { -value } else { value })
}

fn parse_id(raw: &[u8]) -> Result<String, LineErrorKind> {
    let id = std::str::from_utf8(raw)
        .map_err(|_| field_err("station id", raw))?
        .trim_end();
    if id.is_empty() || id.contains(char::is_whitespace) {
        return Err(field_err("station id", raw));
    }
    Ok(id.to_owned())
}

fn parse_year(raw: &[u8]) -> Result<i32, LineErrorKind> {
    match parse_int(raw) {
        Some(y) if raw.iter().all(u8::is_ascii_digit) => Ok(y),
        _ => Err(field_err("year", raw)),
    }
}

fn parse_values<const N: usize>(
    line: &[u8],
    at: usize,
) -> Result<[Option<i32>; N], LineErrorKind> {
    let mut out = [None; N];
    for (i, slot) in out.iter_mut().enumerate() {
        let start = at + i * VALUE_GROUP;
        let raw = &line[start..start + VALUE_WIDTH];
        match parse_int(raw) {
            Some(MISSING_VALUE) => {}
            Some(v) => *slot = Some(v),
            None => return Err(field_err("value", raw)),
        }
    }
    Ok(out)
}

struct DailyRecord {
    id: String,
    element: DailyElement,
    month: YearMonth,
    values: [Option<i32>; 31],
}

fn parse_daily_line(line: &[u8]) -> Result<Option<DailyRecord>, LineErrorKind> {
    if line.len() != GHCND_LINE_LEN {
        return Err(LineErrorKind::Length {
            expected: GHCND_LINE_LEN,
            found: line.len(),
        });
    }
    let Some(element) = std::str::from_utf8(&line[17..21])
        .ok()
        .and_then(DailyElement::from_code)
    else {
        return Ok(None);
    };
    let id = parse_id(&line[0..11])?;
    let year = parse_year(&line[11..15])?;
    let month = match parse_int(&line[15..17]) {
        Some(m @ 1..=12) => m as u32,
        _ => return Err(field_err("month", &line[15..17])),
    };
    let values = parse_values::<31>(line, DAILY_VALUES_AT)?;
    Ok(Some(DailyRecord {
        id,
        element,
        month: YearMonth::new(year, month),
        values,
    }))
}

/// Parses GHCN-Daily element-month lines into one series per (station,
/// element) for TMAX and TMIN. Other elements are skipped. Output is sorted
/// by station id then element.
pub fn parse_ghcnd(bytes: &[u8]) -> Parsed<DailySeries> {
    let mut errors = Vec::new();
    let mut months: BTreeMap<(String, DailyElement), Vec<(YearMonth, usize, [Option<i32>; 31])>> =
        BTreeMap::new();
    for (line_no, line) in lines(bytes) {
        match parse_daily_line(line) {
            Ok(Some(rec)) => months
                .entry((rec.id, rec.element))
                .or_default()
                .push((rec.month, line_no, rec.values)),
            Ok(None) => {}
            Err(kind) => errors.push(LineError {
                line: line_no,
                kind,
            }),
        }
    }

    let mut records = Vec::with_capacity(months.len());
    for ((station, element), mut recs) in months {
        recs.sort_by_key(|(ym, line, _)| (*ym, *line));
        recs.dedup_by(|later, kept| {
            let dup = later.0 == kept.0;
            if dup {
                errors.push(LineError {
                    line: later.1,
                    kind: LineErrorKind::Duplicate(format!("{station} {element} {}", later.0)),
                });
            }
            dup
        });
        let first = recs[0].0;
        let last = recs[recs.len() - 1].0;
        let start = first.first_day();
        let end = last.first_day() + Days::new(last.days() as u64);
        let mut values = vec![None; (end - start).num_days() as usize];
        for (ym, _, raw) in &recs {
            let base = (ym.first_day() - start).num_days() as usize;
            let n = days_in_month(ym.year, ym.month) as usize;
            for (day, v) in raw.iter().take(n).enumerate() {
                values[base + day] = v.map(|t| t as f64 / 10.0);
            }
        }
        records.push(DailySeries {
            station,
            element,
            start,
            values,
        });
    }
    errors.sort_by_key(|e| e.line);
    Parsed { records, errors }
}

pub fn parse_ghcnd_file(path: &Path) -> crate::Result<Parsed<DailySeries>> {
    let bytes = std::fs::read(path).map_err(|e| crate::Error::io(path, e))?;
    Ok(parse_ghcnd(&bytes))
}

struct MonthlyRecord {
    id: String,
    element: MonthlyElement,
    year: i32,
    values: [Option<i32>; 12],
}

fn parse_monthly_line(line: &[u8]) -> Result<Option<MonthlyRecord>, LineErrorKind> {
    if line.len() != GHCNM_LINE_LEN {
        return Err(LineErrorKind::Length {
            expected: GHCNM_LINE_LEN,
            found: line.len(),
        });
    }
    let Some(element) = std::str::from_utf8(&line[15..19])
        .ok()
        .and_then(MonthlyElement::from_code)
    else {
        return Ok(None);
    };
    let id = parse_id(&line[0..11])?;
    let year = parse_year(&line[11..15])?;
    let values = parse_values::<12>(line, MONTHLY_VALUES_AT)?;
    Ok(Some(MonthlyRecord {
        id,
        element,
        year,
        values,
    }))
}

/// Parses GHCN-Monthly year lines for TMIN, TAVG and TMAX. Series run from
/// the first to the last populated month.
pub fn parse_ghcnm(bytes: &[u8]) -> Parsed<MonthlySeries> {
    let mut errors = Vec::new();
    let mut years: BTreeMap<(String, MonthlyElement), Vec<(i32, usize, [Option<i32>; 12])>> =
        BTreeMap::new();
    for (line_no, line) in lines(bytes) {
        match parse_monthly_line(line) {
            Ok(Some(rec)) => years
                .entry((rec.id, rec.element))
                .or_default()
                .push((rec.year, line_no, rec.values)),
            Ok(None) => {}
            Err(kind) => errors.push(LineError {
                line: line_no,
                kind,
            }),
        }
    }

    let mut records = Vec::with_capacity(years.len());
    for ((station, element), mut recs) in years {
        recs.sort_by_key(|(y, line, _)| (*y, *line));
        recs.dedup_by(|later, kept| {
            let dup = later.0 == kept.0;
            if dup {
                errors.push(LineError {
                    line: later.1,
                    kind: LineErrorKind::Duplicate(format!("{station} {element} {}", later.0)),
                });
            }
            dup
        });
        let mut by_month: BTreeMap<YearMonth, f64> = BTreeMap::new();
        for (year, _, raw) in &recs {
            for (m, v) in raw.iter().enumerate() {
                if let Some(v) = v {
                    by_month.insert(YearMonth::new(*year, m as u32 + 1), *v as f64 / 100.0);
                }
            }
        }
        let (Some((&first, _)), Some((&last, _))) =
            (by_month.first_key_value(), by_month.last_key_value())
        else {
            continue;
        };
        let mut values = vec![None; (last.index() - first.index() + 1) as usize];
        for (ym, v) in by_month {
            values[(ym.index() - first.index()) as usize] = Some(v);
        }
        records.push(MonthlySeries {
            station,
            element,
            start: first,
            values,
        });
    }
    errors.sort_by_key(|e| e.line);
    Parsed { records, errors }
}

pub fn parse_ghcnm_file(path: &Path) -> crate::Result<Parsed<MonthlySeries>> {
    let bytes = std::fs::read(path).map_err(|e| crate::Error::io(path, e))?;
    Ok(parse_ghcnm(&bytes))
}

fn scaled(value: Option<f64>, scale: f64) -> i32 {
    match value {
        Some(v) => {
            let raw = (v * scale).round();
            assert!(
                (-9998.0..=99999.0).contains(&raw),
                "value {v} does not fit the fixed-width field"
            );
            raw as i32
        }
        None => MISSING_VALUE,
    }
}

/// Writes a daily series back in the element-month layout. Days outside the
/// series span are written as missing.
pub fn write_ghcnd<W: Write>(series: &DailySeries, out: &mut W) -> std::io::Result<()> {
    if series.values.is_empty() {
        return Ok(());
    }
    let first = YearMonth::of(series.start);
    let last = YearMonth::of(series.end());
    let mut line = String::with_capacity(GHCND_LINE_LEN + 1);
    for idx in first.index()..=last.index() {
        let ym = YearMonth::from_index(idx);
        line.clear();
        line.push_str(&format!(
            "{:<11}{:04}{:02}{}",
            series.station,
            ym.year,
            ym.month,
            series.element.code()
        ));
        let n = ym.days();
        for day in 1..=31 {
            let value = if day <= n {
                let date = chrono::NaiveDate::from_ymd_opt(ym.year, ym.month, day).unwrap();
                series.get(date)
            } else {
                None
            };
            line.push_str(&format!("{:>5}   ", scaled(value, 10.0)));
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Writes a monthly series back in the year-per-line layout.
pub fn write_ghcnm<W: Write>(series: &MonthlySeries, out: &mut W) -> std::io::Result<()> {
    if series.values.is_empty() {
        return Ok(());
    }
    let mut line = String::with_capacity(GHCNM_LINE_LEN + 1);
    for year in series.start.year..=series.end().year {
        line.clear();
        line.push_str(&format!(
            "{:<11}{:04}{}",
            series.station,
            year,
            series.element.code()
        ));
        for month in 1..=12 {
            let v = series.get(YearMonth::new(year, month));
            line.push_str(&format!("{:>5}   ", scaled(v, 100.0)));
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}
