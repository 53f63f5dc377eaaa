//! Station inventory lines: id (1-11), latitude (13-20), longitude (22-30),
//! elevation in metres (32-37, `-999.9` when unknown). Anything after
//! column 37 (station name and so on) is ignored.

use std::collections::BTreeMap;
use std::io::Write;

use super::ghcn::{LineError, LineErrorKind, Parsed};
use super::StationMeta;

pub const MISSING_ELEVATION: f64 = -999.9;
const MIN_LINE_LEN: usize = 37;

fn text(raw: &[u8]) -> Option<&str> {
    std::str::from_utf8(raw).ok().map(str::trim)
}

fn number(field: &'static str, raw: &[u8]) -> Result<f64, LineErrorKind> {
    text(raw)
        .and_then(|t| t.parse::<f64>().ok())
        .filter(|v| v.is_finite())
        .ok_or_else(|| LineErrorKind::Field {
            field,
            text: String::from_utf8_lossy(raw).into_owned(),
        })
}

fn parse_line(line: &[u8]) -> Result<StationMeta, LineErrorKind> {
    if line.len() < MIN_LINE_LEN {
        return Err(LineErrorKind::Length {
            expected: MIN_LINE_LEN,
            found: line.len(),
        });
    }
    let id = text(&line[0..11])
        .filter(|id| !id.is_empty() && !id.contains(char::is_whitespace))
        .ok_or_else(|| LineErrorKind::Field {
            field: "station id",
            text: String::from_utf8_lossy(&line[0..11]).into_owned(),
        })?
        .to_owned();
    let lat = number("latitude", &line[12..20])?;
    let lon = number("longitude", &line[21..30])?;
    let elevation = number("elevation", &line[31..37])?;
    if !(-90.0..=90.0).contains(&lat) {
        return Err(LineErrorKind::Field {
            field: "latitude",
            text: lat.to_string(),
        });
    }
    if !(-180.0..=180.0).contains(&lon) {
        return Err(LineErrorKind::Field {
            field: "longitude",
            text: lon.to_string(),
        });
    }
    Ok(StationMeta {
        id,
        lat,
        lon,
        elevation_m: (elevation != MISSING_ELEVATION).then_some(elevation),
    })
}

/// Parses inventory lines, sorted by station id. Out-of-range coordinates
/// and repeated ids are reported per line.
pub fn parse_station_metadata(bytes: &[u8]) -> Parsed<StationMeta> {
    let mut errors = Vec::new();
    let mut by_id: BTreeMap<String, StationMeta> = BTreeMap::new();
    for (i, line) in bytes.split(|&b| b == b'\n').enumerate() {
        let line = line.strip_suffix(b"\r").unwrap_or(line);
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        match parse_line(line) {
            Ok(meta) if by_id.contains_key(&meta.id) => errors.push(LineError {
                line: i + 1,
                kind: LineErrorKind::Duplicate(meta.id),
            }),
            Ok(meta) => {
                by_id.insert(meta.id.clone(), meta);
            }
            Err(kind) => errors.push(LineError { line: i + 1, kind }),
        }
    }
    Parsed {
        records: by_id.into_values().collect(),
        errors,
    }
}

pub fn write_station_metadata<W: Write>(stations: &[StationMeta], out: &mut W) -> std::io::Result<()> {
    for s in stations {
        writeln!(
            out,
            "{:<11} {:>8.4} {:>9.4} {:>6.1}",
            s.id,
            s.lat,
            s.lon,
            s.elevation_m.unwrap_or(MISSING_ELEVATION)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_layout() {
        let parsed = parse_station_metadata(b"USW00000001  42.3600  -71.0600   12.0 BOSTON");
        assert!(parsed.errors.is_empty(), "{:?}", parsed.errors);
        let s = &parsed.records[0];
        assert_eq!(s.id, "USW00000001");
        assert_eq!(s.lat, 42.36);
        assert_eq!(s.lon, -71.06);
        assert_eq!(s.elevation_m, Some(12.0));
    }

    #[test]
    fn missing_elevation() {
        let parsed = parse_station_metadata(b"USW00000001  42.3600  -71.0600 -999.9");
        assert_eq!(parsed.records[0].elevation_m, None);
    }

    #[test]
    fn latitude_out_of_range_is_rejected() {
        let parsed = parse_station_metadata(b"USW00000001  95.0000  -71.0600   12.0");
        assert!(parsed.records.is_empty());
        assert_eq!(parsed.errors.len(), 1);
        assert_eq!(parsed.errors[0].line, 1);
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let input = "USW00000001  42.3600  -71.0600   12.0\nUSW00000001  40.0000  -70.0000    1.0\n";
        let parsed = parse_station_metadata(input.as_bytes());
        assert_eq!(parsed.records.len(), 1);
        assert_eq!(parsed.records[0].lat, 42.36);
        assert!(matches!(parsed.errors[0].kind, LineErrorKind::Duplicate(_)));
    }

    #[test]
    fn writer_matches_layout() {
        let s = StationMeta {
            id: "USW00000001".into(),
            lat: 42.36,
            lon: -71.06,
            elevation_m: None,
        };
        let mut buf = Vec::new();
        write_station_metadata(&[s.clone()], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "USW00000001  42.3600  -71.0600 -999.9\n"
        );
        assert_eq!(parse_station_metadata(&buf).records, vec![s]);
    }
}
