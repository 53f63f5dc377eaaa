//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Tolerances are pinned below.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use chrono::{Datelike, Days, NaiveDate};
use megaheat::geo::{parse_ghcnd, parse_ghcnm, parse_station_metadata, write_ghcnd, write_ghcnm};
use megaheat::indices::{annual_cdd, annual_cnm, annual_p95, CDD_BASE_C};
use megaheat::pipeline::{
    fill_daily, ingest, qc, run_synthetic, station_indices, synth_generate, Direction, RunConfig,
    SynthSpec,
};
use megaheat::qc::{
    filter_daily_stations, filter_monthly_stations, gwr_fit_predict,
    impute_monthly, lwma_fill, ordinary_krige, GwrConfig, ImputeConfig, ResidualSite, TargetSite,
    TrainSite, Variogram,
};
use megaheat::stats::{by_fdr_adjust, mann_kendall, spearman, wilcoxon_ranksum, RankSumMethod};
use megaheat::{
    DailyElement, DailySeries, MonthlyElement, MonthlySeries, QcThresholds, SlotStatus,
    StationMeta, StudyWindow, YearMonth,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

const MK_TOL: f64 = 1e-12;
const BY_TOL: f64 = 1e-4;
const ORACLE_TOL: f64 = 1e-12;
const STATS_BUDGET: Duration = Duration::from_secs(1);
const KRIGE_TOL: f64 = 1e-9;
const GWR_REL_TOL: f64 = 1e-6;
const AFFINE_TOL: f64 = 1e-9;
const POWER_SEEDS: u64 = 100;
const POWER_MIN_RATE: f64 = 0.95;
const NULL_MAX_RATE: f64 = 0.10;
const POWER_BUDGET: Duration = Duration::from_secs(600);
const PARSER_LINES: usize = 10_000;
const PERF_STATIONS: usize = 1000;
const PERF_THREADS: usize = 4;
const PERF_BUDGET: Duration = Duration::from_secs(60);

type Outcome = Result<String, String>;

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

// ---------------------------------------------------------------- 1

fn full_monthly(missing: impl Fn(usize) -> bool) -> MonthlySeries {
    MonthlySeries {
        station: "USW00000001".into(),
        element: MonthlyElement::Tavg,
        start: YearMonth::new(1956, 1),
        values: (0..720).map(|i| (!missing(i)).then_some(15.0)).collect(),
    }
}

fn daily_span(first: (i32, u32), last: (i32, u32), missing: impl Fn(NaiveDate) -> bool) -> DailySeries {
    let start = date(first.0, first.1, 1);
    let last = YearMonth::new(last.0, last.1);
    let end = date(last.year, last.month, last.days());
    let n = (end - start).num_days() as usize + 1;
    DailySeries {
        station: "USW00000001".into(),
        element: DailyElement::Tmax,
        start,
        values: (0..n)
            .map(|i| {
                let d = start + Days::new(i as u64);
                (!missing(d)).then_some(30.0)
            })
            .collect(),
    }
}

fn criterion_1() -> Outcome {
    let cfg = RunConfig::default();
    let q = QcThresholds::default();
    check(cfg.cdd_base_c == 23.89 && CDD_BASE_C == 23.89, || "CDD base".into())?;
    check(cfg.alpha == 0.05, || "alpha".into())?;
    check(cfg.window == StudyWindow { start_year: 1956, end_year: 2015 }, || "window".into())?;
    check(cfg.qc == q, || "config QC defaults".into())?;
    check(q.monthly_max_missing_frac == 0.10, || "monthly missing fraction".into())?;
    check(q.monthly_max_gap_months == 12, || "monthly gap".into())?;
    check(q.daily_max_summer_missing_frac == 0.20, || "summer missing fraction".into())?;
    check(q.daily_max_gap_days == 30, || "daily gap".into())?;
    check(q.daily_min_record_months == 719 && q.daily_record_end_year == 2014, || "record length".into())?;

    let w = cfg.window;
    let kept_monthly = |s: MonthlySeries| filter_monthly_stations(vec![s], w, &q).unwrap().0.len() == 1;
    let kept_daily = |s: DailySeries| filter_daily_stations(vec![s], w, &q).0.len() == 1;
    let cases = [
        ("12-month gap kept", kept_monthly(full_monthly(|i| (100..112).contains(&i)))),
        ("13-month gap dropped", !kept_monthly(full_monthly(|i| (100..113).contains(&i)))),
        // 72 of 720 months, in runs of two
        ("10% missing kept", kept_monthly(full_monthly(|i| i % 20 < 2))),
        ("10% + 1 month dropped", !kept_monthly(full_monthly(|i| i % 20 < 2 || i == 719))),
        (
            "30-day gap kept",
            kept_daily(daily_span((1956, 1), (2015, 12), |d| d >= date(1980, 1, 1) && d < date(1980, 1, 31))),
        ),
        (
            "31-day gap dropped",
            !kept_daily(daily_span((1956, 1), (2015, 12), |d| d >= date(1980, 1, 1) && d < date(1980, 2, 1))),
        ),
    ];
    // 1104 of 60 * 92 = 5520 summer days is exactly 20%
    let summer = |extra: bool| {
        move |d: NaiveDate| {
            let k = d.year() - 1956;
            let june = d.month() == 6 && d.day() <= if k < 24 { 19 } else { 18 };
            june || (extra && d == date(2015, 7, 1))
        }
    };
    let more = [
        ("20% summer missing kept", kept_daily(daily_span((1956, 1), (2015, 12), summer(false)))),
        ("20% + 1 day dropped", !kept_daily(daily_span((1956, 1), (2015, 12), summer(true)))),
        ("719 months ending 2013 kept", kept_daily(daily_span((1954, 2), (2013, 12), |_| false))),
        ("718 months ending 2013 dropped", !kept_daily(daily_span((1954, 3), (2013, 12), |_| false))),
        ("718 months ending 2014 kept", kept_daily(daily_span((1955, 3), (2014, 12), |_| false))),
    ];
    let failed: Vec<&str> = cases.iter().chain(&more).filter(|c| !c.1).map(|c| c.0).collect();
    check(failed.is_empty(), || format!("boundary cases failed: {failed:?}"))?;
    Ok(format!("constants exact; {} boundary cases", cases.len() + more.len()))
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Outcome {
    let t0 = Instant::now();
    let mk = mann_kendall(&[0.0, 1.0, 2.0, 3.0], &[1.0, 2.0, 2.0, 3.0]);
    check((mk.s - 5.0).abs() <= MK_TOL, || format!("MK S = {}", mk.s))?;
    check((mk.var_s - 23.0 / 3.0).abs() <= MK_TOL, || format!("MK Var = {}", mk.var_s))?;
    let by = by_fdr_adjust(&[0.01, 0.02, 0.04, 0.2]);
    let want = [0.0833, 0.0833, 0.1111, 0.4167];
    check(by.iter().zip(want).all(|(g, w)| (g - w).abs() <= BY_TOL), || format!("BY = {by:?}"))?;
    let w = wilcoxon_ranksum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], RankSumMethod::Auto).unwrap();
    check(w.exact && (w.p - 0.1).abs() <= ORACLE_TOL, || format!("Wilcoxon p = {}", w.p))?;
    let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0]).unwrap();
    check((r.rho - 0.6).abs() <= ORACLE_TOL, || format!("Spearman rho = {}", r.rho))?;
    let elapsed = t0.elapsed();
    check(elapsed < STATS_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("S=5, Var=23/3, BY, p=0.1, rho=0.6 in {elapsed:?}"))
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut site = || (35.0 + rng.random_range(-3.0..3.0), -100.0 + rng.random_range(-3.0..3.0));
    let locs: Vec<(f64, f64)> = (0..30).map(|_| site()).collect();

    // kriging reproduces observations at their own sites
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let sites: Vec<ResidualSite> = locs
        .iter()
        .map(|&(lat, lon)| ResidualSite { lat, lon, residual: rng.random_range(-2.0..2.0) })
        .collect();
    let v = Variogram { nugget: 0.0, sill: 1.5, range_km: 250.0 };
    let mut krige_err: f64 = 0.0;
    for s in &sites {
        let e = ordinary_krige(&sites, &v, s.lat, s.lon).unwrap().value;
        krige_err = krige_err.max((e - s.residual).abs());
    }
    check(krige_err <= KRIGE_TOL, || format!("kriging error at sites {krige_err:e}"))?;

    // GWR with every station in the kernel against OLS by normal equations
    let train: Vec<TrainSite> = locs
        .iter()
        .map(|&(lat, lon)| {
            let elevation = rng.random_range(0.0..2000.0);
            TrainSite { lat, lon, elevation, value: 20.0 - 0.0065 * elevation + rng.random_range(-1.0..1.0) }
        })
        .collect();
    let n = train.len() as f64;
    let (sx, sy) = train.iter().fold((0.0, 0.0), |a, s| (a.0 + s.elevation, a.1 + s.value));
    let (sxx, sxy) = train
        .iter()
        .fold((0.0, 0.0), |a, s| (a.0 + s.elevation * s.elevation, a.1 + s.elevation * s.value));
    let det = n * sxx - sx * sx;
    let (b0, b1) = ((sy * sxx - sx * sxy) / det, (n * sxy - sx * sy) / det);
    let targets: Vec<TargetSite> = (0..20)
        .map(|_| TargetSite {
            lat: 35.0 + rng.random_range(-3.0..3.0),
            lon: -100.0 + rng.random_range(-3.0..3.0),
            elevation: Some(rng.random_range(0.0..2000.0)),
        })
        .collect();
    let cfg = GwrConfig { neighbors: train.len(), ..GwrConfig::default() };
    let fit = gwr_fit_predict(&train, &targets, &cfg).unwrap();
    let mut gwr_rel: f64 = 0.0;
    for (t, p) in targets.iter().zip(&fit.predictions) {
        let want = b0 + b1 * t.elevation.unwrap();
        gwr_rel = gwr_rel.max(((p - want) / want).abs());
    }
    check(gwr_rel <= GWR_REL_TOL, || format!("GWR vs OLS relative error {gwr_rel:e}"))?;

    // LWMA worked example
    let s = DailySeries {
        station: "USW00000001".into(),
        element: DailyElement::Tmax,
        start: date(2000, 7, 1),
        values: vec![Some(10.0), Some(20.0), None, Some(30.0), Some(40.0)],
    };
    let f = lwma_fill(&s);
    check(f.series.values[2] == Some(25.0), || format!("LWMA fill {:?}", f.series.values[2]))?;

    // affine-in-elevation field through the monthly imputation
    let stations: Vec<StationMeta> = locs
        .iter()
        .enumerate()
        .map(|(i, &(lat, lon))| StationMeta {
            id: format!("USC{:08}", i + 1),
            lat,
            lon,
            elevation_m: Some(rng.random_range(0.0..2000.0)),
        })
        .collect();
    let truth = |t: usize, e: f64| 10.0 + (t as f64 * 0.5).sin() * 8.0 - (0.0065 + 1e-4 * t as f64) * e;
    let series: Vec<MonthlySeries> = stations
        .iter()
        .map(|s| MonthlySeries {
            station: s.id.clone(),
            element: MonthlyElement::Tmax,
            start: YearMonth::new(2000, 1),
            values: (0..24)
                .map(|t| (rng.random::<f64>() > 0.2).then(|| truth(t, s.elevation_m.unwrap())))
                .collect(),
        })
        .collect();
    let window = StudyWindow { start_year: 2000, end_year: 2001 };
    let out = impute_monthly(&series, &stations, window, &ImputeConfig::default()).unwrap();
    let (mut affine_err, mut imputed): (f64, usize) = (0.0, 0);
    for (s, mask) in out.series.iter().zip(&out.masks) {
        let e = stations.iter().find(|m| m.id == s.station).unwrap().elevation_m.unwrap();
        for t in 0..24 {
            let got = s.get(YearMonth::new(2000, 1).offset(t as i64)).unwrap();
            affine_err = affine_err.max((got - truth(t, e)).abs());
            imputed += (mask[t] == SlotStatus::Imputed) as usize;
        }
    }
    check(imputed > 0 && affine_err <= AFFINE_TOL, || format!("affine error {affine_err:e} over {imputed} slots"))?;
    Ok(format!(
        "krige {krige_err:.1e}, GWR rel {gwr_rel:.1e}, LWMA 25.0, affine {affine_err:.1e} ({imputed} imputed)"
    ))
}

// ---------------------------------------------------------------- 4

fn cnm_brute(x: &[f64]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for i in 0..x.len().saturating_sub(2) {
        let m = (x[i] + x[i + 1] + x[i + 2]) / 3.0;
        if best.is_none_or(|b| m > b) {
            best = Some(m);
        }
    }
    best
}

fn order_stat(x: &[f64], k: usize) -> f64 {
    *x.iter()
        .find(|&&v| {
            let below = x.iter().filter(|&&u| u < v).count();
            below <= k && k < below + x.iter().filter(|&&u| u == v).count()
        })
        .unwrap()
}

fn p95_brute(x: &[f64]) -> f64 {
    let h = 0.95 * (x.len() - 1) as f64;
    let lo = h.floor() as usize;
    let a = order_stat(x, lo);
    if lo + 1 < x.len() { a + (h - lo as f64) * (order_stat(x, lo + 1) - a) } else { a }
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let year = |rng: &mut ChaCha8Rng| {
        let n = if rng.random::<bool>() { 365 } else { 366 };
        let lo: Vec<f64> = (0..n).map(|_| (rng.random_range(-5.0..28.0_f64) * 10.0).round() / 10.0).collect();
        let hi: Vec<f64> = lo.iter().map(|v| v + (rng.random_range(1.0..15.0_f64) * 10.0).round() / 10.0).collect();
        (hi, lo)
    };
    let mut mismatches = 0;
    for _ in 0..1000 {
        let (hi, lo) = year(&mut rng);
        mismatches += (annual_cnm(&lo) != cnm_brute(&lo)) as usize;
        mismatches += (annual_p95(&hi) != Some(p95_brute(&hi))) as usize;
    }
    check(mismatches == 0, || format!("{mismatches} CNM/P95 mismatches"))?;
    let mut violations = 0;
    for _ in 0..1000 {
        let (hi, lo) = year(&mut rng);
        let (mut hi2, mut lo2) = (hi.clone(), lo.clone());
        for _ in 0..rng.random_range(1..40) {
            let d = rng.random_range(0..hi.len());
            hi2[d] += rng.random_range(0.0..4.0);
            lo2[d] += rng.random_range(0.0..4.0);
        }
        violations += (annual_cdd(&hi2, &lo2, CDD_BASE_C) < annual_cdd(&hi, &lo, CDD_BASE_C)) as usize;
    }
    check(violations == 0, || format!("{violations} CDD monotonicity violations"))?;
    Ok("1000 station-years exact; 1000 CDD perturbation pairs monotone".into())
}

// ---------------------------------------------------------------- 5

fn world_config(seed: u64, uc_trend: f64) -> RunConfig {
    RunConfig::from_json(&format!(
        r#"{{"seed": {seed}, "synth": {{"pairs": 1, "uc_stations": 30, "nonuc_stations": 30,
            "start_year": 1956, "end_year": 2015, "uc_trend_c_per_year": {uc_trend},
            "annual_noise_sd": 0.3}}}}"#
    ))
    .unwrap()
}

fn criterion_5() -> Outcome {
    let t0 = Instant::now();
    let mut per_cell: BTreeMap<String, usize> = BTreeMap::new();
    let mut all_cells_seeds = 0;
    for seed in 0..POWER_SEEDS {
        let a = run_synthetic(&world_config(seed, 0.05)).map_err(|e| e.to_string())?;
        let mut every = !a.trends.comparisons.is_empty();
        for c in &a.trends.comparisons {
            let hit = c.direction == Direction::UcHigher
                && c.prop_uc > c.prop_nonuc
                && c.prop_p.is_some_and(|p| p < 0.05);
            *per_cell.entry(format!("{}/{:?}", c.metric, c.season)).or_default() += hit as usize;
            every &= hit;
        }
        all_cells_seeds += every as usize;
    }
    let (mut null_cells, mut null_hits) = (0, 0);
    for seed in 0..POWER_SEEDS {
        let a = run_synthetic(&world_config(10_000 + seed, 0.0)).map_err(|e| e.to_string())?;
        for c in &a.trends.comparisons {
            null_cells += 1;
            null_hits += c.direction.is_significant() as usize;
        }
    }
    let elapsed = t0.elapsed();
    let worst = per_cell.values().copied().min().unwrap_or(0) as f64 / POWER_SEEDS as f64;
    let null_rate = null_hits as f64 / null_cells.max(1) as f64;
    let rate = all_cells_seeds as f64 / POWER_SEEDS as f64;
    check(per_cell.len() == 9, || format!("expected 9 cells, got {}", per_cell.len()))?;
    check(rate >= POWER_MIN_RATE, || format!("all-cell detection in {rate:.2} of seeds"))?;
    check(null_rate <= NULL_MAX_RATE, || format!("null directional rate {null_rate:.3}"))?;
    check(elapsed < POWER_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "detected in {:.0}% of seeds (worst cell {:.0}%), null rate {:.1}%, {:.0}s",
        100.0 * rate,
        100.0 * worst,
        100.0 * null_rate,
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------- 6

fn bundle(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

fn criterion_6() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut bundles = Vec::new();
    for threads in [1, 4] {
        let out = tmp.path().join(format!("t{threads}"));
        let status = Command::new(env!("CARGO_BIN_EXE_megaheat"))
            .args(["all", "--seed", "7", "--threads", &threads.to_string(), "--out"])
            .arg(&out)
            .env("RUST_LOG", "warn")
            .status()
            .map_err(|e| e.to_string())?;
        check(status.success(), || format!("--threads {threads} exited with {status}"))?;
        bundles.push(bundle(&out.join("report")));
    }
    check(bundles[0].len() >= 2, || format!("bundle has {} files", bundles[0].len()))?;
    let differing: Vec<&String> = bundles[0]
        .iter()
        .filter(|(k, v)| bundles[1].get(*k) != Some(v))
        .map(|(k, _)| k)
        .collect();
    check(
        differing.is_empty() && bundles[0].len() == bundles[1].len(),
        || format!("bundles differ: {differing:?}"),
    )?;
    let bytes: usize = bundles[0].values().map(Vec::len).sum();
    Ok(format!("{} files, {bytes} bytes identical at 1 and 4 threads", bundles[0].len()))
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut text, mut sentinels) = (String::new(), Vec::new());
    for i in 0..PARSER_LINES {
        let (year, month) = (rng.random_range(1800..2030), rng.random_range(1..=12u32));
        let element = if rng.random::<bool>() { "TMAX" } else { "TMIN" };
        text.push_str(&format!("USC{i:08}{year:04}{month:02}{element}"));
        let days = YearMonth::new(year, month).days() as usize;
        let mut missing = Vec::new();
        for day in 0..31 {
            let gone = day >= days || rng.random::<f64>() < 0.1;
            if gone {
                text.push_str("-9999   ");
            } else {
                text.push_str(&format!("{:>5}   ", rng.random_range(-999..=9999)));
            }
            if day < days {
                missing.push(gone);
            }
        }
        text.push('\n');
        sentinels.push(missing);
    }
    let parsed = parse_ghcnd(text.as_bytes());
    check(parsed.errors.is_empty() && parsed.records.len() == PARSER_LINES, || {
        format!("daily: {} errors, {} records", parsed.errors.len(), parsed.records.len())
    })?;
    let mut back = Vec::new();
    for s in &parsed.records {
        write_ghcnd(s, &mut back).unwrap();
    }
    check(back == text.as_bytes(), || "daily round trip differs".into())?;
    let (mut daily_sentinels, mut daily_mapped) = (0, 0);
    for (s, missing) in parsed.records.iter().zip(&sentinels) {
        for (v, &gone) in s.values.iter().zip(missing) {
            daily_sentinels += gone as usize;
            daily_mapped += (gone && v.is_none()) as usize;
        }
    }

    let (mut text, mut monthly_sentinels) = (String::new(), 0);
    let mut expected_missing = 0;
    for i in 0..PARSER_LINES {
        let element = ["TMIN", "TAVG", "TMAX"][rng.random_range(0..3)];
        text.push_str(&format!("USW{i:08}{:04}{element}", rng.random_range(1800..2030)));
        for month in 0..12 {
            // first and last months observed so the series spans the year
            if month % 11 != 0 && rng.random::<f64>() < 0.1 {
                text.push_str("-9999   ");
                monthly_sentinels += 1;
            } else {
                text.push_str(&format!("{:>5}   ", rng.random_range(-9998..=9999)));
            }
        }
        text.push('\n');
    }
    let parsed = parse_ghcnm(text.as_bytes());
    check(parsed.errors.is_empty() && parsed.records.len() == PARSER_LINES, || {
        format!("monthly: {} errors, {} records", parsed.errors.len(), parsed.records.len())
    })?;
    let mut back = Vec::new();
    for s in &parsed.records {
        write_ghcnm(s, &mut back).unwrap();
        expected_missing += s.values.iter().filter(|v| v.is_none()).count();
    }
    check(back == text.as_bytes(), || "monthly round trip differs".into())?;

    let mut inv = String::new();
    let mut elev_sentinels = 0;
    for i in 0..PARSER_LINES {
        let lat = rng.random_range(-900_000..=900_000) as f64 / 1e4;
        let lon = rng.random_range(-1_800_000..=1_800_000) as f64 / 1e4;
        let elev = if rng.random::<f64>() < 0.1 {
            elev_sentinels += 1;
            -999.9
        } else {
            rng.random_range(-4000..=60_000) as f64 / 10.0
        };
        inv.push_str(&format!("USC{i:08} {lat:>8.4} {lon:>9.4} {elev:>6.1}\n"));
    }
    let stations = parse_station_metadata(inv.as_bytes());
    let elev_mapped = stations.records.iter().filter(|s| s.elevation_m.is_none()).count();
    check(stations.errors.is_empty() && stations.records.len() == PARSER_LINES, || "inventory parse".into())?;

    check(
        daily_mapped == daily_sentinels
            && expected_missing == monthly_sentinels
            && elev_mapped == elev_sentinels,
        || {
            format!(
                "sentinels mapped: daily {daily_mapped}/{daily_sentinels}, monthly \
                 {expected_missing}/{monthly_sentinels}, elevation {elev_mapped}/{elev_sentinels}"
            )
        },
    )?;
    Ok(format!(
        "{PARSER_LINES} daily + {PARSER_LINES} monthly lines byte-identical; sentinels mapped \
         {daily_sentinels}/{monthly_sentinels}/{elev_sentinels} (100%)"
    ))
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = SynthSpec {
        pairs: 10,
        uc_stations: PERF_STATIONS / 20,
        nonuc_stations: PERF_STATIONS / 20,
        ..SynthSpec::default()
    };
    let inputs = {
        let world = synth_generate(8, &spec);
        world.write(&tmp.path().join("in")).map_err(|e| e.to_string())?
    };
    let cfg = RunConfig { synth: Some(spec), ..RunConfig::default() };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(PERF_THREADS)
        .build()
        .map_err(|e| e.to_string())?;
    let out = tmp.path().join("out");
    let t0 = Instant::now();
    let (values, series) = pool.install(|| -> Result<(usize, usize), String> {
        let ing = ingest(&inputs, &out).map_err(|e| e.to_string())?;
        let values: usize = ing.daily.iter().map(|s| s.values.len()).sum();
        let q = qc(ing.daily, ing.monthly, &cfg).map_err(|e| e.to_string())?;
        let (filled, _) = fill_daily(&q.daily);
        drop(q.daily);
        let series = station_indices(&filled, &q.monthly, &cfg);
        Ok((values, series.len()))
    })?;
    let elapsed = t0.elapsed();
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    check(values >= 40_000_000, || format!("only {values} day-values"))?;
    check(elapsed < PERF_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{PERF_STATIONS} stations, {:.1}M day-values, {series} index series in {:.1}s \
         ({PERF_THREADS} threads on {cores} cores)",
        values as f64 / 1e6,
        elapsed.as_secs_f64()
    ))
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("constants fidelity", criterion_1),
        ("statistical oracles", criterion_2),
        ("interpolation oracles", criterion_3),
        ("index oracles", criterion_4),
        ("synthetic power", criterion_5),
        ("determinism", criterion_6),
        ("parser fidelity", criterion_7),
        ("performance", criterion_8),
    ];
    if args.iter().any(|a| a == "--list") {
        for (i, (name, _)) in criteria.iter().enumerate() {
            println!("criterion_{}_{}: test", i + 1, name.replace(' ', "_"));
        }
        return;
    }
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} ({name}): PASS [{secs:.1}s] {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL [{secs:.1}s] {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
