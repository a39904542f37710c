//! Vector ground truth: polygons (building footprints), polylines (roads)
//! and points, tagged with a class, in geographic lon/lat coordinates.
//! Read and written as GeoJSON FeatureCollections with a `class` property.

use std::path::Path;

use serde_json::{json, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pt {
    pub x: f64,
    pub y: f64,
}

impl Pt {
    pub fn new(x: f64, y: f64) -> Pt {
        Pt { x, y }
    }
}

/// A closed ring without the duplicated closing vertex.
pub type Ring = Vec<Pt>;

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    /// First ring is the exterior; any further rings are holes.
    Polygon(Vec<Ring>),
    Polyline(Vec<Pt>),
    Point(Pt),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub geometry: Geometry,
    pub class_tag: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VectorLayer {
    pub features: Vec<Feature>,
}

impl VectorLayer {
    pub fn new() -> VectorLayer {
        VectorLayer { features: Vec::new() }
    }

    pub fn push(&mut self, geometry: Geometry, class_tag: &str) -> Result<()> {
        validate_geometry(&geometry)?;
        self.features.push(Feature { geometry, class_tag: class_tag.to_string() });
        Ok(())
    }

    /// Features matching one class tag.
    pub fn with_class(&self, class_tag: &str) -> VectorLayer {
        VectorLayer {
            features: self
                .features
                .iter()
                .filter(|f| f.class_tag == class_tag)
                .cloned()
                .collect(),
        }
    }

    pub fn polygons(&self) -> impl Iterator<Item = &Vec<Ring>> {
        self.features.iter().filter_map(|f| match &f.geometry {
            Geometry::Polygon(rings) => Some(rings),
            _ => None,
        })
    }
}

fn validate_geometry(g: &Geometry) -> Result<()> {
    match g {
        Geometry::Polygon(rings) => {
            if rings.is_empty() {
                return Err(Error::InvalidGeometry("polygon with no rings".into()));
            }
            for ring in rings {
                if ring.len() < 3 {
                    return Err(Error::InvalidGeometry(format!(
                        "ring with {} vertices",
                        ring.len()
                    )));
                }
                if ring_self_intersects(ring) {
                    return Err(Error::InvalidGeometry("self-intersecting ring".into()));
                }
            }
            Ok(())
        }
        Geometry::Polyline(pts) => {
            if pts.len() < 2 {
                return Err(Error::InvalidGeometry("polyline with <2 vertices".into()));
            }
            Ok(())
        }
        Geometry::Point(_) => Ok(()),
    }
}

/// Proper-crossing test between non-adjacent edges. Shared endpoints between
/// neighbouring edges are fine; anything else crossing is rejected.
fn ring_self_intersects(ring: &[Pt]) -> bool {
    let n = ring.len();
    for i in 0..n {
        let a1 = ring[i];
        let a2 = ring[(i + 1) % n];
        for j in (i + 1)..n {
            // Skip adjacent edges (share a vertex), including the wrap pair.
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let b1 = ring[j];
            let b2 = ring[(j + 1) % n];
            if segments_properly_cross(a1, a2, b1, b2) {
                return true;
            }
        }
    }
    false
}

fn orient(a: Pt, b: Pt, c: Pt) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn segments_properly_cross(a1: Pt, a2: Pt, b1: Pt, b2: Pt) -> bool {
    let d1 = orient(a1, a2, b1);
    let d2 = orient(a1, a2, b2);
    let d3 = orient(b1, b2, a1);
    let d4 = orient(b1, b2, a2);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Signed area of a ring (positive for counter-clockwise).
pub fn ring_signed_area(ring: &[Pt]) -> f64 {
    let n = ring.len();
    let mut acc = 0.0;
    for i in 0..n {
        let p = ring[i];
        let q = ring[(i + 1) % n];
        acc += p.x * q.y - q.x * p.y;
    }
    acc / 2.0
}

/// Area centroid of a polygon's exterior ring. Falls back to the vertex mean
/// for degenerate (zero-area) rings.
pub fn polygon_centroid(rings: &[Ring]) -> Pt {
    let ring = &rings[0];
    let a = ring_signed_area(ring);
    if a.abs() < 1e-30 {
        let n = ring.len() as f64;
        let (sx, sy) = ring.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        return Pt::new(sx / n, sy / n);
    }
    let n = ring.len();
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let p = ring[i];
        let q = ring[(i + 1) % n];
        let cross = p.x * q.y - q.x * p.y;
        cx += (p.x + q.x) * cross;
        cy += (p.y + q.y) * cross;
    }
    Pt::new(cx / (6.0 * a), cy / (6.0 * a))
}

/// Even-odd ray-casting point-in-polygon over all rings, so holes subtract.
/// Points exactly on a horizontal edge resolve by the half-open vertex rule.
pub fn point_in_rings(p: Pt, rings: &[Ring]) -> bool {
    let mut inside = false;
    for ring in rings {
        let n = ring.len();
        let mut j = n - 1;
        for i in 0..n {
            let (pi, pj) = (ring[i], ring[j]);
            if (pi.y > p.y) != (pj.y > p.y) {
                let x_int = pi.x + (p.y - pi.y) * (pj.x - pi.x) / (pj.y - pi.y);
                if p.x < x_int {
                    inside = !inside;
                }
            }
            j = i;
        }
    }
    inside
}

// ---------------------------------------------------------------------------
// GeoJSON
// ---------------------------------------------------------------------------

pub fn read_geojson(path: &Path) -> Result<VectorLayer> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_geojson(&text).map_err(|e| match e {
        Error::BadFormat { reason, .. } => {
            Error::BadFormat { path: path.display().to_string(), reason }
        }
        other => other,
    })
}

pub fn parse_geojson(text: &str) -> Result<VectorLayer> {
    let bad = |reason: &str| Error::BadFormat { path: "<geojson>".into(), reason: reason.into() };
    let root: Value = serde_json::from_str(text).map_err(|e| bad(&e.to_string()))?;
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing `features` array"))?;

    let mut layer = VectorLayer::new();
    for feat in features {
        let class_tag = feat
            .pointer("/properties/class")
            .and_then(Value::as_str)
            .unwrap_or("unclassified")
            .to_string();
        let geom = feat.get("geometry").ok_or_else(|| bad("feature without geometry"))?;
        let gtype = geom
            .get("type")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("geometry without type"))?;
        let coords = geom.get("coordinates").ok_or_else(|| bad("geometry without coordinates"))?;
        match gtype {
            "Polygon" => {
                layer.push(Geometry::Polygon(parse_polygon(coords)?), &class_tag)?;
            }
            "MultiPolygon" => {
                for poly in coords.as_array().ok_or_else(|| bad("MultiPolygon coords"))? {
                    layer.push(Geometry::Polygon(parse_polygon(poly)?), &class_tag)?;
                }
            }
            "LineString" => {
                layer.push(Geometry::Polyline(parse_points(coords)?), &class_tag)?;
            }
            "MultiLineString" => {
                for line in coords.as_array().ok_or_else(|| bad("MultiLineString coords"))? {
                    layer.push(Geometry::Polyline(parse_points(line)?), &class_tag)?;
                }
            }
            "Point" => {
                layer.push(Geometry::Point(parse_point(coords)?), &class_tag)?;
            }
            "MultiPoint" => {
                for pt in coords.as_array().ok_or_else(|| bad("MultiPoint coords"))? {
                    layer.push(Geometry::Point(parse_point(pt)?), &class_tag)?;
                }
            }
            other => return Err(bad(&format!("unsupported geometry type `{other}`"))),
        }
    }
    Ok(layer)
}

fn parse_point(v: &Value) -> Result<Pt> {
    let arr = v.as_array().filter(|a| a.len() >= 2).ok_or_else(|| Error::BadFormat {
        path: "<geojson>".into(),
        reason: "position must be [lon, lat]".into(),
    })?;
    let x = arr[0].as_f64();
    let y = arr[1].as_f64();
    match (x, y) {
        (Some(x), Some(y)) => Ok(Pt::new(x, y)),
        _ => Err(Error::BadFormat {
            path: "<geojson>".into(),
            reason: "non-numeric position".into(),
        }),
    }
}

fn parse_points(v: &Value) -> Result<Vec<Pt>> {
    v.as_array()
        .ok_or_else(|| Error::BadFormat {
            path: "<geojson>".into(),
            reason: "expected position array".into(),
        })?
        .iter()
        .map(parse_point)
        .collect()
}

fn parse_polygon(v: &Value) -> Result<Vec<Ring>> {
    let rings_json = v.as_array().ok_or_else(|| Error::BadFormat {
        path: "<geojson>".into(),
        reason: "polygon coordinates must be ring array".into(),
    })?;
    let mut rings = Vec::with_capacity(rings_json.len());
    for ring_json in rings_json {
        let mut pts = parse_points(ring_json)?;
        // GeoJSON repeats the first vertex at the end; store open rings.
        if pts.len() >= 2 && pts.first() == pts.last() {
            pts.pop();
        }
        rings.push(pts);
    }
    Ok(rings)
}

pub fn write_geojson(path: &Path, layer: &VectorLayer) -> Result<()> {
    let features: Vec<Value> = layer
        .features
        .iter()
        .map(|f| {
            let (gtype, coords) = match &f.geometry {
                Geometry::Polygon(rings) => {
                    let rings_json: Vec<Value> = rings
                        .iter()
                        .map(|ring| {
                            let mut pts: Vec<Value> =
                                ring.iter().map(|p| json!([p.x, p.y])).collect();
                            if let Some(first) = ring.first() {
                                pts.push(json!([first.x, first.y]));
                            }
                            Value::Array(pts)
                        })
                        .collect();
                    ("Polygon", Value::Array(rings_json))
                }
                Geometry::Polyline(pts) => (
                    "LineString",
                    Value::Array(pts.iter().map(|p| json!([p.x, p.y])).collect()),
                ),
                Geometry::Point(p) => ("Point", json!([p.x, p.y])),
            };
            json!({
                "type": "Feature",
                "properties": { "class": f.class_tag },
                "geometry": { "type": gtype, "coordinates": coords },
            })
        })
        .collect();
    let doc = json!({ "type": "FeatureCollection", "features": features });
    let text = serde_json::to_string_pretty(&doc).expect("json serialization");
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}
