//! Plain-CSV persistence for stage intermediates.
//!
//! Values are written with the shortest representation that parses back to
//! the same `f64`, so a stage restarted from stored files sees exactly the
//! data a fresh run would.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::geo::{days_in_month, Covariate, ExplanatoryVars, COVARIATE_HEADER};
use crate::qc::{QcReason, QcReport, SlotStatus, Verdict};
use crate::{DailyElement, DailySeries, Error, MonthlyElement, MonthlySeries, Result, StationMeta, YearMonth};

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn csv_reader(path: &Path, header: &[&str]) -> Result<csv::Reader<BufReader<File>>> {
    let mut r = csv::Reader::from_reader(open(path)?);
    let got = r.headers().map_err(|e| Error::csv(path, e))?;
    if got.iter().ne(header.iter().copied()) {
        return Err(Error::data(path, format!("expected header `{}`", header.join(","))));
    }
    Ok(r)
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn parse_opt(path: &Path, row: usize, cell: &str) -> Result<Option<f64>> {
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::data(path, format!("row {row}: bad number `{cell}`")))
}

fn parse_num<T: std::str::FromStr>(path: &Path, row: usize, what: &str, cell: &str) -> Result<T> {
    cell.parse()
        .map_err(|_| Error::data(path, format!("row {row}: bad {what} `{cell}`")))
}

fn finish<W: Write>(path: &Path, mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::csv(path, e)
}

// ---------------------------------------------------------------- stations

const STATION_HEADER: [&str; 6] = ["station", "lat", "lon", "elevation_m", "cr", "uc"];

/// Station metadata plus the climate region and UC each station falls in.
pub fn write_stations(path: &Path, rows: &[(StationMeta, Option<String>, Option<String>)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(STATION_HEADER).map_err(csv_err(path))?;
    for (s, cr, uc) in rows {
        w.write_record([
            s.id.clone(),
            fmt_f64(s.lat),
            fmt_f64(s.lon),
            fmt_opt(s.elevation_m),
            cr.clone().unwrap_or_default(),
            uc.clone().unwrap_or_default(),
        ])
        .map_err(csv_err(path))?;
    }
    finish(path, w)
}

pub fn read_stations(path: &Path) -> Result<Vec<StationMeta>> {
    let mut r = csv_reader(path, &STATION_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let row = i + 2;
        out.push(StationMeta {
            id: rec[0].to_owned(),
            lat: parse_num(path, row, "lat", &rec[1])?,
            lon: parse_num(path, row, "lon", &rec[2])?,
            elevation_m: parse_opt(path, row, &rec[3])?,
        });
    }
    Ok(out)
}

// ------------------------------------------------------------------- daily

fn daily_header() -> Vec<String> {
    let mut h: Vec<String> = ["station", "element", "year", "month"].map(String::from).to_vec();
    h.extend((1..=31).map(|d| format!("d{d}")));
    h
}

/// One row per station, element and calendar month of the series span.
pub fn write_daily(path: &Path, series: &[DailySeries]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(daily_header()).map_err(csv_err(path))?;
    let mut row: Vec<String> = Vec::with_capacity(35);
    for s in series {
        if s.values.is_empty() {
            continue;
        }
        for idx in YearMonth::of(s.start).index()..=YearMonth::of(s.end()).index() {
            let ym = YearMonth::from_index(idx);
            row.clear();
            row.push(s.station.clone());
            row.push(s.element.code().into());
            row.push(ym.year.to_string());
            row.push(ym.month.to_string());
            for d in 1..=31 {
                let v = NaiveDate::from_ymd_opt(ym.year, ym.month, d).and_then(|date| s.get(date));
                row.push(fmt_opt(v));
            }
            w.write_record(&row).map_err(csv_err(path))?;
        }
    }
    finish(path, w)
}

/// Reads series written by [`write_daily`]. Each series spans whole months
/// from its first to its last row.
pub fn read_daily(path: &Path) -> Result<Vec<DailySeries>> {
    let header = daily_header();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut r = csv_reader(path, &header)?;
    let mut out: Vec<DailySeries> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let row = i + 2;
        let element = DailyElement::from_code(&rec[1])
            .ok_or_else(|| Error::data(path, format!("row {row}: bad element")))?;
        let year: i32 = parse_num(path, row, "year", &rec[2])?;
        let month: u32 = parse_num(path, row, "month", &rec[3])?;
        if !(1..=12).contains(&month) {
            return Err(Error::data(path, format!("row {row}: bad month {month}")));
        }
        let ym = YearMonth::new(year, month);
        let fresh = !matches!(out.last(), Some(s) if s.station == rec[0] && s.element == element);
        if fresh {
            out.push(DailySeries {
                station: rec[0].to_owned(),
                element,
                start: ym.first_day(),
                values: Vec::new(),
            });
        }
        let s = out.last_mut().unwrap();
        let expected = ym.first_day();
        if s.date_at(s.values.len()) != expected {
            return Err(Error::data(path, format!("row {row}: months out of order")));
        }
        for d in 0..days_in_month(year, month) as usize {
            s.values.push(parse_opt(path, row, &rec[4 + d])?);
        }
    }
    Ok(out)
}

const DAILY_MASK_HEADER: [&str; 5] = ["station", "element", "year", "month", "codes"];

pub fn write_daily_masks(path: &Path, series: &[DailySeries], masks: &[Vec<SlotStatus>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(DAILY_MASK_HEADER).map_err(csv_err(path))?;
    for (s, mask) in series.iter().zip(masks) {
        if s.values.is_empty() {
            continue;
        }
        for idx in YearMonth::of(s.start).index()..=YearMonth::of(s.end()).index() {
            let ym = YearMonth::from_index(idx);
            let codes: String = (1..=ym.days())
                .map(|d| {
                    let date = NaiveDate::from_ymd_opt(ym.year, ym.month, d).unwrap();
                    s.index_of(date).map_or('U', |i| mask[i].code())
                })
                .collect();
            w.write_record([
                s.station.as_str(),
                s.element.code(),
                &ym.year.to_string(),
                &ym.month.to_string(),
                &codes,
            ])
            .map_err(csv_err(path))?;
        }
    }
    finish(path, w)
}

/// Masks in file order, one per (station, element).
pub fn read_daily_masks(path: &Path) -> Result<Vec<(String, DailyElement, Vec<SlotStatus>)>> {
    let mut r = csv_reader(path, &DAILY_MASK_HEADER)?;
    let mut out: Vec<(String, DailyElement, Vec<SlotStatus>)> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let row = i + 2;
        let element = DailyElement::from_code(&rec[1])
            .ok_or_else(|| Error::data(path, format!("row {row}: bad element")))?;
        if !matches!(out.last(), Some((s, e, _)) if s == &rec[0] && *e == element) {
            out.push((rec[0].to_owned(), element, Vec::new()));
        }
        let codes = out.last_mut().unwrap();
        for c in rec[4].chars() {
            codes.2.push(
                SlotStatus::from_code(c)
                    .ok_or_else(|| Error::data(path, format!("row {row}: bad code `{c}`")))?,
            );
        }
    }
    Ok(out)
}

// ----------------------------------------------------------------- monthly

fn monthly_header() -> Vec<String> {
    let mut h: Vec<String> = ["station", "element", "year"].map(String::from).to_vec();
    h.extend((1..=12).map(|m| format!("m{m}")));
    h
}

/// Pads a series with missing months so it covers whole calendar years.
pub fn whole_years(mut s: MonthlySeries) -> MonthlySeries {
    if s.values.is_empty() {
        return s;
    }
    let lead = (s.start.month - 1) as usize;
    let trail = 12 - s.end().month as usize;
    let mut values = vec![None; lead];
    values.extend(s.values);
    values.extend(std::iter::repeat_n(None, trail));
    s.start = YearMonth::new(s.start.year, 1);
    s.values = values;
    s
}

/// One row per station, element and year. Series must be year-aligned
/// (see [`whole_years`]).
pub fn write_monthly(path: &Path, series: &[MonthlySeries]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(monthly_header()).map_err(csv_err(path))?;
    for s in series {
        debug_assert!(s.values.len() % 12 == 0 && s.start.month == 1);
        for (k, year) in s.values.chunks(12).enumerate() {
            let mut row = vec![
                s.station.clone(),
                s.element.code().to_owned(),
                (s.start.year + k as i32).to_string(),
            ];
            row.extend(year.iter().map(|v| fmt_opt(*v)));
            w.write_record(&row).map_err(csv_err(path))?;
        }
    }
    finish(path, w)
}

pub fn read_monthly(path: &Path) -> Result<Vec<MonthlySeries>> {
    let header = monthly_header();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut r = csv_reader(path, &header)?;
    let mut out: Vec<MonthlySeries> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let row = i + 2;
        let element = MonthlyElement::from_code(&rec[1])
            .ok_or_else(|| Error::data(path, format!("row {row}: bad element")))?;
        let year: i32 = parse_num(path, row, "year", &rec[2])?;
        if !matches!(out.last(), Some(s) if s.station == rec[0] && s.element == element) {
            out.push(MonthlySeries {
                station: rec[0].to_owned(),
                element,
                start: YearMonth::new(year, 1),
                values: Vec::new(),
            });
        }
        let s = out.last_mut().unwrap();
        if s.start.year + (s.values.len() / 12) as i32 != year {
            return Err(Error::data(path, format!("row {row}: years out of order")));
        }
        for m in 0..12 {
            s.values.push(parse_opt(path, row, &rec[3 + m])?);
        }
    }
    Ok(out)
}

const MONTHLY_MASK_HEADER: [&str; 4] = ["station", "element", "year", "codes"];

pub fn write_monthly_masks(path: &Path, series: &[MonthlySeries], masks: &[Vec<SlotStatus>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(MONTHLY_MASK_HEADER).map_err(csv_err(path))?;
    for (s, mask) in series.iter().zip(masks) {
        for (k, codes) in mask.chunks(12).enumerate() {
            let codes: String = codes.iter().map(|c| c.code()).collect();
            w.write_record([
                s.station.as_str(),
                s.element.code(),
                &(s.start.year + k as i32).to_string(),
                &codes,
            ])
            .map_err(csv_err(path))?;
        }
    }
    finish(path, w)
}

// ---------------------------------------------------------------- QC report

pub const QC_HEADER: [&str; 5] = ["station", "verdict", "reason", "missing_frac", "longest_gap"];

pub fn write_qc_reports(path: &Path, reports: &[&QcReport]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(QC_HEADER).map_err(csv_err(path))?;
    for r in reports {
        w.write_record([
            r.station.as_str(),
            r.verdict.code(),
            r.reason.code(),
            &fmt_f64(r.missing_frac),
            &r.longest_gap.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    finish(path, w)
}

pub fn read_qc_reports(path: &Path, element: &str) -> Result<Vec<QcReport>> {
    let mut r = csv_reader(path, &QC_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let row = i + 2;
        let verdict = match &rec[1] {
            "kept" => Verdict::Kept,
            "dropped" => Verdict::Dropped,
            other => return Err(Error::data(path, format!("row {row}: bad verdict `{other}`"))),
        };
        out.push(QcReport {
            station: rec[0].to_owned(),
            element: element.to_owned(),
            verdict,
            reason: QcReason::from_code(&rec[2])
                .ok_or_else(|| Error::data(path, format!("row {row}: bad reason")))?,
            missing_frac: parse_num(path, row, "missing_frac", &rec[3])?,
            longest_gap: parse_num(path, row, "longest_gap", &rec[4])?,
        });
    }
    Ok(out)
}

// --------------------------------------------------------------- covariates

pub fn write_covariates<'a>(path: &Path, rows: impl IntoIterator<Item = &'a ExplanatoryVars>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(COVARIATE_HEADER).map_err(csv_err(path))?;
    for v in rows {
        let mut rec = vec![v.uc_id.clone(), v.cr_id.clone()];
        rec.extend(Covariate::ALL.iter().map(|&c| fmt_opt(v.get(c))));
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    finish(path, w)
}
