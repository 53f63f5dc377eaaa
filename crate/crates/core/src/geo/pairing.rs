use serde::{Deserialize, Serialize};

use super::{GeoError, RegionPair, RegionSet, StationMeta};

/// Climate region and urban corridor containing a station. The first
/// matching region in document order wins.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    pub cr: Option<String>,
    pub uc: Option<String>,
}

pub fn assign_station_region(station: &StationMeta, regions: &RegionSet) -> Assignment {
    let (lon, lat) = (station.lon, station.lat);
    Assignment {
        cr: regions
            .climate_regions
            .iter()
            .find(|r| r.contains(lon, lat))
            .map(|r| r.name.clone()),
        uc: regions
            .ucs
            .iter()
            .find(|r| r.contains(lon, lat))
            .map(|r| r.name.clone()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairWarning {
    /// No station of the host climate region lies inside the UC; the host was
    /// chosen by the UC's polygon vertices instead.
    EmptyUc,
}

/// Groups stations into one UC/non-UC pair per urban corridor.
///
/// The host climate region of a UC is the one holding most of the UC's
/// stations (ties go to the region listed first). A UC without stations is
/// hosted by the region containing most of its vertices and flagged.
/// Non-UC stations are those of the host region that fall in no UC at all.
pub fn pair_uc_nonuc(
    regions: &RegionSet,
    stations: &[StationMeta],
) -> Result<Vec<RegionPair>, GeoError> {
    let mut sorted: Vec<&StationMeta> = stations.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let assigned: Vec<(&StationMeta, Assignment)> = sorted
        .into_iter()
        .map(|s| (s, assign_station_region(s, regions)))
        .collect();

    let cr_index = |name: &str| regions.climate_regions.iter().position(|r| r.name == name);

    let mut pairs = Vec::with_capacity(regions.ucs.len());
    for uc in &regions.ucs {
        let members: Vec<&(&StationMeta, Assignment)> = assigned
            .iter()
            .filter(|(_, a)| a.uc.as_deref() == Some(uc.name.as_str()))
            .collect();
        let mut counts = vec![0_usize; regions.climate_regions.len()];
        for (_, a) in &members {
            if let Some(i) = a.cr.as_deref().and_then(cr_index) {
                counts[i] += 1;
            }
        }
        let mut warning = None;
        let host = match argmax_first(&counts) {
            Some(i) => i,
            None => {
                warning = Some(PairWarning::EmptyUc);
                let mut by_vertex = vec![0_usize; regions.climate_regions.len()];
                for [lon, lat] in uc.vertices() {
                    if let Some(i) = regions
                        .climate_regions
                        .iter()
                        .position(|r| r.contains(lon, lat))
                    {
                        by_vertex[i] += 1;
                    }
                }
                argmax_first(&by_vertex).ok_or_else(|| GeoError::UcOutsideRegions(uc.name.clone()))?
            }
        };
        let host_name = &regions.climate_regions[host].name;
        let in_host = |a: &Assignment| a.cr.as_deref() == Some(host_name.as_str());
        let uc_stations = members
            .iter()
            .filter(|(_, a)| in_host(a))
            .map(|(s, _)| s.id.clone())
            .collect();
        let nonuc_stations = assigned
            .iter()
            .filter(|(_, a)| in_host(a) && a.uc.is_none())
            .map(|(s, _)| s.id.clone())
            .collect();
        pairs.push(RegionPair {
            uc_id: uc.name.clone(),
            cr_id: host_name.clone(),
            uc_stations,
            nonuc_stations,
            warning,
        });
    }
    Ok(pairs)
}

fn argmax_first(counts: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, usize)> = None;
    for (i, &c) in counts.iter().enumerate() {
        if c > 0 && best.is_none_or(|(_, b)| c > b) {
            best = Some((i, c));
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::super::regions::{Polygon, Region};
    use super::*;

    fn square(name: &str, x0: f64, y0: f64, x1: f64, y1: f64) -> Region {
        Region {
            name: name.into(),
            parts: vec![Polygon {
                rings: vec![vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]],
            }],
        }
    }

    fn station(id: &str, lon: f64, lat: f64) -> StationMeta {
        StationMeta {
            id: id.into(),
            lat,
            lon,
            elevation_m: Some(0.0),
        }
    }

    fn one_cr_one_uc() -> RegionSet {
        RegionSet {
            climate_regions: vec![square("CR", 0.0, 0.0, 10.0, 10.0)],
            ucs: vec![square("UC", 4.0, 4.0, 6.0, 6.0)],
        }
    }

    #[test]
    fn assignment_cases() {
        let regions = one_cr_one_uc();
        let a = assign_station_region(&station("a", 5.0, 5.0), &regions);
        assert_eq!((a.cr.as_deref(), a.uc.as_deref()), (Some("CR"), Some("UC")));
        let b = assign_station_region(&station("b", 1.0, 1.0), &regions);
        assert_eq!((b.cr.as_deref(), b.uc.as_deref()), (Some("CR"), None));
        let c = assign_station_region(&station("c", -50.0, 30.0), &regions);
        assert_eq!(c, Assignment::default());
    }

    #[test]
    fn two_in_two_out() {
        let stations = vec![
            station("s1", 4.5, 4.5),
            station("s2", 5.5, 5.5),
            station("s3", 1.0, 1.0),
            station("s4", 9.0, 9.0),
        ];
        let pairs = pair_uc_nonuc(&one_cr_one_uc(), &stations).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].cr_id, "CR");
        assert_eq!(pairs[0].uc_stations, ["s1", "s2"]);
        assert_eq!(pairs[0].nonuc_stations, ["s3", "s4"]);
        assert_eq!(pairs[0].warning, None);
    }

    #[test]
    fn straddling_uc_goes_to_majority_region() {
        let regions = RegionSet {
            climate_regions: vec![
                square("West", 0.0, 0.0, 10.0, 10.0),
                square("East", 10.0, 0.0, 20.0, 10.0),
            ],
            ucs: vec![square("UC", 7.0, 4.0, 12.0, 6.0)],
        };
        let stations = vec![
            station("a", 7.5, 5.0),
            station("b", 8.0, 5.0),
            station("c", 9.0, 5.0),
            station("d", 11.0, 5.0),
            station("e", 2.0, 2.0),
            station("f", 15.0, 2.0),
        ];
        let pairs = pair_uc_nonuc(&regions, &stations).unwrap();
        assert_eq!(pairs[0].cr_id, "West");
        assert_eq!(pairs[0].uc_stations, ["a", "b", "c"]);
        assert_eq!(pairs[0].nonuc_stations, ["e"]);
    }

    #[test]
    fn station_in_another_uc_is_not_nonuc() {
        let regions = RegionSet {
            climate_regions: vec![square("CR", 0.0, 0.0, 10.0, 10.0)],
            ucs: vec![square("A", 1.0, 1.0, 3.0, 3.0), square("B", 6.0, 6.0, 8.0, 8.0)],
        };
        let stations = vec![
            station("in_a", 2.0, 2.0),
            station("in_b", 7.0, 7.0),
            station("plain", 5.0, 5.0),
        ];
        let pairs = pair_uc_nonuc(&regions, &stations).unwrap();
        assert_eq!(pairs[0].nonuc_stations, ["plain"]);
        assert_eq!(pairs[1].uc_stations, ["in_b"]);
        assert_eq!(pairs[1].nonuc_stations, ["plain"]);
    }

    #[test]
    fn empty_uc_is_flagged() {
        let stations = vec![station("s3", 1.0, 1.0)];
        let pairs = pair_uc_nonuc(&one_cr_one_uc(), &stations).unwrap();
        assert!(pairs[0].uc_stations.is_empty());
        assert_eq!(pairs[0].cr_id, "CR");
        assert_eq!(pairs[0].warning, Some(PairWarning::EmptyUc));
    }

    #[test]
    fn uc_outside_every_region_is_an_error() {
        let regions = RegionSet {
            climate_regions: vec![square("CR", 0.0, 0.0, 10.0, 10.0)],
            ucs: vec![square("Far", 50.0, 50.0, 51.0, 51.0)],
        };
        assert!(matches!(
            pair_uc_nonuc(&regions, &[]),
            Err(GeoError::UcOutsideRegions(_))
        ));
    }
}
