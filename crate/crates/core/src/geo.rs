//! Geographic primitives: an invertible affine pixel↔lon/lat transform, a
//! lon/lat bounding box, and great-circle distance.

use crate::error::{Error, Result};

/// Mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Kilometres per degree of latitude (and of longitude at the equator).
pub const KM_PER_DEG: f64 = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;

/// Affine map from continuous pixel coordinates to lon/lat:
///
/// ```text
/// lon = a·x + b·y + c
/// lat = d·x + e·y + f
/// ```
///
/// (x, y) = (0, 0) is the top-left corner of pixel (0, 0); pixel centers sit
/// at half-integer coordinates. The sidecar text format stores the six
/// coefficients one per line in the order a, b, c, d, e, f.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoTransform {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl GeoTransform {
    /// North-up transform: `origin` is the top-left corner (lon, lat),
    /// `deg_per_px` the pixel size in degrees (latitude decreases with y).
    pub fn north_up(origin_lon: f64, origin_lat: f64, deg_per_px: f64) -> GeoTransform {
        GeoTransform {
            a: deg_per_px,
            b: 0.0,
            c: origin_lon,
            d: 0.0,
            e: -deg_per_px,
            f: origin_lat,
        }
    }

    /// Identity transform: pixel coordinates are the geographic coordinates.
    /// Convenient for tests that work directly in pixel space.
    pub fn identity() -> GeoTransform {
        GeoTransform { a: 1.0, b: 0.0, c: 0.0, d: 0.0, e: 1.0, f: 0.0 }
    }

    pub fn pixel_to_geo(&self, x: f64, y: f64) -> (f64, f64) {
        (self.a * x + self.b * y + self.c, self.d * x + self.e * y + self.f)
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.e - self.b * self.d
    }

    pub fn geo_to_pixel(&self, lon: f64, lat: f64) -> Result<(f64, f64)> {
        let det = self.determinant();
        if det == 0.0 {
            return Err(Error::InvalidGeometry("geo transform is singular".into()));
        }
        let u = lon - self.c;
        let v = lat - self.f;
        Ok(((self.e * u - self.b * v) / det, (self.a * v - self.d * u) / det))
    }

    /// Ground resolution in metres per pixel at latitude `lat`, using the
    /// local equirectangular approximation.
    pub fn meters_per_pixel_at(&self, lat: f64) -> f64 {
        let px_deg_x = (self.a * self.a + self.d * self.d).sqrt();
        let px_deg_y = (self.b * self.b + self.e * self.e).sqrt();
        let mx = px_deg_x * KM_PER_DEG * 1000.0 * lat.to_radians().cos();
        let my = px_deg_y * KM_PER_DEG * 1000.0;
        0.5 * (mx + my)
    }

    pub fn coefficients(&self) -> [f64; 6] {
        [self.a, self.b, self.c, self.d, self.e, self.f]
    }

    pub fn from_coefficients(c: [f64; 6]) -> GeoTransform {
        GeoTransform { a: c[0], b: c[1], c: c[2], d: c[3], e: c[4], f: c[5] }
    }
}

/// Axis-aligned lon/lat box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl GeoBox {
    pub fn new(min_lon: f64, min_lat: f64, max_lon: f64, max_lat: f64) -> GeoBox {
        GeoBox { min_lon, min_lat, max_lon, max_lat }
    }

    pub fn width(&self) -> f64 {
        self.max_lon - self.min_lon
    }

    pub fn height(&self) -> f64 {
        self.max_lat - self.min_lat
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.min_lon + self.max_lon), 0.5 * (self.min_lat + self.max_lat))
    }

    /// Half-open containment: [min, max) on both axes, so adjacent cells do
    /// not double-claim shared edges.
    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        lon >= self.min_lon && lon < self.max_lon && lat >= self.min_lat && lat < self.max_lat
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.width() > 0.0 && self.height() > 0.0)
    }
}

/// Great-circle distance in kilometres on a spherical Earth.
pub fn haversine_km(lon1: f64, lat1: f64, lon2: f64, lat2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = (lat2 - lat1).to_radians();
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().asin()
}
