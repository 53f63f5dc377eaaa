//! Climate-region and urban-corridor polygons read from a GeoJSON feature
//! collection. Each feature carries `name` and `kind` (`climate_region` or
//! `uc`) properties and a `Polygon` or `MultiPolygon` geometry.

use std::collections::BTreeSet;
use std::fmt;

use serde_json::{json, Value};

use super::GeoError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionKind {
    ClimateRegion,
    Uc,
}

impl RegionKind {
    pub fn code(self) -> &'static str {
        match self {
            RegionKind::ClimateRegion => "climate_region",
            RegionKind::Uc => "uc",
        }
    }
}

impl fmt::Display for RegionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Closed rings of `[lon, lat]` positions; the first ring is the outer
/// boundary and any further rings are holes.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub rings: Vec<Vec<[f64; 2]>>,
}

impl Polygon {
    /// Even-odd membership over all rings. Points on any ring edge are
    /// inside.
    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        let mut inside = false;
        for ring in &self.rings {
            for edge in ring.windows(2) {
                let [x1, y1] = edge[0];
                let [x2, y2] = edge[1];
                if on_segment(lon, lat, x1, y1, x2, y2) {
                    return true;
                }
                if (y1 > lat) != (y2 > lat) && lon < (x2 - x1) * (lat - y1) / (y2 - y1) + x1 {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

fn on_segment(px: f64, py: f64, x1: f64, y1: f64, x2: f64, y2: f64) -> bool {
    const EPS: f64 = 1e-9;
    if px < x1.min(x2) - EPS || px > x1.max(x2) + EPS || py < y1.min(y2) - EPS || py > y1.max(y2) + EPS {
        return false;
    }
    let len = (x2 - x1).hypot(y2 - y1);
    if len == 0.0 {
        return (px - x1).hypot(py - y1) <= EPS;
    }
    let cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1);
    (cross / len).abs() <= EPS
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub name: String,
    pub parts: Vec<Polygon>,
}

impl Region {
    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        self.parts.iter().any(|p| p.contains(lon, lat))
    }

    pub fn vertices(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        self.parts
            .iter()
            .flat_map(|p| p.rings.first())
            .flat_map(|ring| ring[..ring.len() - 1].iter().copied())
    }

    fn to_feature(&self, kind: RegionKind) -> Value {
        let parts: Vec<Vec<Vec<[f64; 2]>>> = self.parts.iter().map(|p| p.rings.clone()).collect();
        let geometry = if parts.len() == 1 {
            json!({ "type": "Polygon", "coordinates": parts[0] })
        } else {
            json!({ "type": "MultiPolygon", "coordinates": parts })
        };
        json!({
            "type": "Feature",
            "properties": { "name": self.name, "kind": kind.code() },
            "geometry": geometry,
        })
    }
}

/// Climate regions and urban corridors in document order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegionSet {
    pub climate_regions: Vec<Region>,
    pub ucs: Vec<Region>,
}

impl RegionSet {
    pub fn climate_region(&self, name: &str) -> Option<&Region> {
        self.climate_regions.iter().find(|r| r.name == name)
    }

    pub fn uc(&self, name: &str) -> Option<&Region> {
        self.ucs.iter().find(|r| r.name == name)
    }

    pub fn to_geojson(&self) -> Value {
        let features: Vec<Value> = self
            .climate_regions
            .iter()
            .map(|r| r.to_feature(RegionKind::ClimateRegion))
            .chain(self.ucs.iter().map(|r| r.to_feature(RegionKind::Uc)))
            .collect();
        json!({ "type": "FeatureCollection", "features": features })
    }
}

fn geometry_err(msg: impl Into<String>) -> GeoError {
    GeoError::Geometry(msg.into())
}

fn parse_position(v: &Value) -> Result<[f64; 2], GeoError> {
    let arr = v
        .as_array()
        .filter(|a| a.len() >= 2)
        .ok_or_else(|| geometry_err("position must be an array of at least two numbers"))?;
    let lon = arr[0].as_f64().ok_or_else(|| geometry_err("non-numeric longitude"))?;
    let lat = arr[1].as_f64().ok_or_else(|| geometry_err("non-numeric latitude"))?;
    Ok([lon, lat])
}

fn parse_polygon(name: &str, v: &Value) -> Result<Polygon, GeoError> {
    let rings = v
        .as_array()
        .filter(|a| !a.is_empty())
        .ok_or_else(|| geometry_err(format!("region `{name}`: polygon needs at least one ring")))?;
    let mut out = Vec::with_capacity(rings.len());
    for (i, ring) in rings.iter().enumerate() {
        let positions = ring
            .as_array()
            .ok_or_else(|| geometry_err(format!("region `{name}`: ring {i} is not an array")))?
            .iter()
            .map(parse_position)
            .collect::<Result<Vec<_>, _>>()?;
        if positions.len() < 4 {
            return Err(geometry_err(format!(
                "region `{name}`: ring {i} has fewer than 4 positions"
            )));
        }
        if positions.first() != positions.last() {
            return Err(GeoError::UnclosedRing {
                name: name.to_owned(),
                ring: i,
            });
        }
        out.push(positions);
    }
    Ok(Polygon { rings: out })
}

/// Parses and validates a region document.
pub fn load_regions(document: &str) -> Result<RegionSet, GeoError> {
    let doc: Value =
        serde_json::from_str(document).map_err(|e| geometry_err(format!("invalid JSON: {e}")))?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(geometry_err("expected a FeatureCollection"));
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| geometry_err("missing `features` array"))?;

    let mut set = RegionSet::default();
    let mut seen_cr = BTreeSet::new();
    let mut seen_uc = BTreeSet::new();
    for (i, feature) in features.iter().enumerate() {
        let props = feature
            .get("properties")
            .ok_or_else(|| geometry_err(format!("feature {i}: missing properties")))?;
        let name = props
            .get("name")
            .and_then(Value::as_str)
            .filter(|n| !n.is_empty())
            .ok_or_else(|| geometry_err(format!("feature {i}: missing `name`")))?
            .to_owned();
        let kind = match props.get("kind").and_then(Value::as_str) {
            Some("climate_region") => RegionKind::ClimateRegion,
            Some("uc") => RegionKind::Uc,
            Some(other) => return Err(GeoError::UnknownKind(other.to_owned())),
            None => return Err(geometry_err(format!("feature {i}: missing `kind`"))),
        };
        let geometry = feature
            .get("geometry")
            .ok_or_else(|| geometry_err(format!("region `{name}`: missing geometry")))?;
        let coords = geometry
            .get("coordinates")
            .ok_or_else(|| geometry_err(format!("region `{name}`: missing coordinates")))?;
        let parts = match geometry.get("type").and_then(Value::as_str) {
            Some("Polygon") => vec![parse_polygon(&name, coords)?],
            Some("MultiPolygon") => coords
                .as_array()
                .filter(|a| !a.is_empty())
                .ok_or_else(|| geometry_err(format!("region `{name}`: empty MultiPolygon")))?
                .iter()
                .map(|p| parse_polygon(&name, p))
                .collect::<Result<_, _>>()?,
            other => {
                return Err(geometry_err(format!(
                    "region `{name}`: unsupported geometry type {other:?}"
                )))
            }
        };
        let (seen, list) = match kind {
            RegionKind::ClimateRegion => (&mut seen_cr, &mut set.climate_regions),
            RegionKind::Uc => (&mut seen_uc, &mut set.ucs),
        };
        if !seen.insert(name.clone()) {
            return Err(GeoError::DuplicateRegion { kind, name });
        }
        list.push(Region { name, parts });
    }
    Ok(set)
}
