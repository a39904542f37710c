//! Gridding a region into square kilometre cells and the grid manifest CSV.

use std::path::Path;

use crate::csvio;
use crate::error::{Error, Result};
use crate::geo::{GeoBox, KM_PER_DEG};

pub const MANIFEST_HEADER: &str = "cell_id,country,min_lon,min_lat,max_lon,max_lat,partial";

/// One grid cell's footprint. `partial` marks edge cells clipped by the
/// region boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct TileBounds {
    pub cell_id: String,
    pub country: String,
    pub bounds: GeoBox,
    pub partial: bool,
}

impl TileBounds {
    pub fn center(&self) -> (f64, f64) {
        self.bounds.center()
    }
}

/// Build a region box `width_km` × `height_km` whose south-west corner is
/// (min_lon, min_lat), using the local equirectangular scale at the region's
/// central latitude.
pub fn region_from_km(min_lon: f64, min_lat: f64, width_km: f64, height_km: f64) -> GeoBox {
    let height_deg = height_km / KM_PER_DEG;
    let center_lat = min_lat + height_deg / 2.0;
    let width_deg = width_km / (KM_PER_DEG * center_lat.to_radians().cos());
    GeoBox::new(min_lon, min_lat, min_lon + width_deg, min_lat + height_deg)
}

/// Axis-aligned grid of `cell_km` cells covering `region`. Cells are indexed
/// row-major, northernmost row first, west to east; edge cells are clipped to
/// the region and flagged partial. Cell interiors are disjoint and their
/// union is exactly the region.
pub fn make_grid(region: &GeoBox, cell_km: f64, country: &str) -> Result<Vec<TileBounds>> {
    if region.is_degenerate() {
        return Err(Error::DegenerateRegion(format!("{region:?}")));
    }
    if cell_km <= 0.0 {
        return Err(Error::InvalidConfig(format!("cell_km must be positive, got {cell_km}")));
    }
    let (_, center_lat) = region.center();
    let dlat = cell_km / KM_PER_DEG;
    let dlon = cell_km / (KM_PER_DEG * center_lat.to_radians().cos());

    // Guard against counting an extra all-but-empty row from float noise.
    let ncols = ((region.width() / dlon) - 1e-9).ceil().max(1.0) as usize;
    let nrows = ((region.height() / dlat) - 1e-9).ceil().max(1.0) as usize;

    let mut tiles = Vec::with_capacity(nrows * ncols);
    for row in 0..nrows {
        // Row 0 is the northernmost band.
        let max_lat = region.max_lat - row as f64 * dlat;
        let min_lat = (max_lat - dlat).max(region.min_lat);
        for col in 0..ncols {
            let min_lon = region.min_lon + col as f64 * dlon;
            let max_lon = (min_lon + dlon).min(region.max_lon);
            let partial = (max_lon - min_lon) < dlon * (1.0 - 1e-9)
                || (max_lat - min_lat) < dlat * (1.0 - 1e-9);
            tiles.push(TileBounds {
                cell_id: format!("{country}_r{row:03}c{col:03}"),
                country: country.to_string(),
                bounds: GeoBox::new(min_lon, min_lat, max_lon, max_lat),
                partial,
            });
        }
    }
    Ok(tiles)
}

pub fn write_manifest(path: &Path, tiles: &[TileBounds], provenance: Option<&str>) -> Result<()> {
    let rows: Vec<String> = tiles
        .iter()
        .map(|t| {
            format!(
                "{},{},{},{},{},{},{}",
                t.cell_id,
                t.country,
                t.bounds.min_lon,
                t.bounds.min_lat,
                t.bounds.max_lon,
                t.bounds.max_lat,
                u8::from(t.partial)
            )
        })
        .collect();
    csvio::write_csv(path, provenance, MANIFEST_HEADER, &rows)
}

pub fn read_manifest(path: &Path) -> Result<Vec<TileBounds>> {
    let rows = csvio::read_csv(path, MANIFEST_HEADER)?;
    rows.iter()
        .map(|r| {
            Ok(TileBounds {
                cell_id: r[0].clone(),
                country: r[1].clone(),
                bounds: GeoBox::new(
                    csvio::parse_f64(path, "min_lon", &r[2])?,
                    csvio::parse_f64(path, "min_lat", &r[3])?,
                    csvio::parse_f64(path, "max_lon", &r[4])?,
                    csvio::parse_f64(path, "max_lat", &r[5])?,
                ),
                partial: r[6] == "1",
            })
        })
        .collect()
}
