//! Cluster-level feature construction: select the grid cells within a fixed
//! radius of each survey cluster and aggregate per-cell building counts,
//! road measures and nightlight into sum/mean/quantile feature vectors.

use std::collections::HashMap;
use std::path::Path;

use crate::csvio;
use crate::error::{Error, Result};
use crate::geo::{haversine_km, GeoBox};
use crate::grid::TileBounds;
use crate::raster::MaskRaster;

/// Default selection radius around a survey cluster, in kilometres,
/// absorbing the displacement applied to survey coordinates.
pub const DEFAULT_RADIUS_KM: f64 = 5.0;

/// Default quantile set for the aggregates.
pub const DEFAULT_QUANTILES: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

/// Minimum contributing cells for a cluster to survive.
pub const DEFAULT_MIN_CELLS: usize = 1;

pub const CLUSTER_HEADER: &str = "cluster_id,country,lon,lat,wealth,wealthpooled";
pub const TILE_RECORD_HEADER: &str = "cell_id,buildings,road_m,road_components,nightlight";

/// The per-cell variables that get aggregated, in canonical column order.
pub const VARIABLES: [&str; 4] = ["buildings", "road_m", "road_components", "nightlight"];

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSite {
    pub cluster_id: String,
    pub country: String,
    pub lon: f64,
    pub lat: f64,
    pub wealth: Option<f64>,
    pub wealthpooled: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelKind {
    Wealth,
    Wealthpooled,
}

impl LabelKind {
    pub fn parse(s: &str) -> Result<LabelKind> {
        match s {
            "wealth" => Ok(LabelKind::Wealth),
            "wealthpooled" => Ok(LabelKind::Wealthpooled),
            other => Err(Error::InvalidConfig(format!("unknown label `{other}`"))),
        }
    }

    pub fn of(&self, site: &ClusterSite) -> Option<f64> {
        match self {
            LabelKind::Wealth => site.wealth,
            LabelKind::Wealthpooled => site.wealthpooled,
        }
    }
}

pub fn read_clusters(path: &Path) -> Result<Vec<ClusterSite>> {
    let rows = csvio::read_csv(path, CLUSTER_HEADER)?;
    rows.iter()
        .map(|r| {
            let opt = |field: &str, col: &str| -> Result<Option<f64>> {
                if field.is_empty() {
                    Ok(None)
                } else {
                    csvio::parse_f64(path, col, field).map(Some)
                }
            };
            let site = ClusterSite {
                cluster_id: r[0].clone(),
                country: r[1].clone(),
                lon: csvio::parse_f64(path, "lon", &r[2])?,
                lat: csvio::parse_f64(path, "lat", &r[3])?,
                wealth: opt(&r[4], "wealth")?,
                wealthpooled: opt(&r[5], "wealthpooled")?,
            };
            if site.wealth.is_none() && site.wealthpooled.is_none() {
                return Err(Error::SchemaMismatch {
                    path: path.display().to_string(),
                    column: format!("wealth/wealthpooled (both empty for {})", site.cluster_id),
                });
            }
            Ok(site)
        })
        .collect()
}

pub fn write_clusters(path: &Path, sites: &[ClusterSite], provenance: Option<&str>) -> Result<()> {
    let fmt = |o: Option<f64>| o.map(|v| v.to_string()).unwrap_or_default();
    let rows: Vec<String> = sites
        .iter()
        .map(|s| {
            format!(
                "{},{},{},{},{},{}",
                s.cluster_id,
                s.country,
                s.lon,
                s.lat,
                fmt(s.wealth),
                fmt(s.wealthpooled)
            )
        })
        .collect();
    csvio::write_csv(path, provenance, CLUSTER_HEADER, &rows)
}

/// Indices of the cells whose centers lie within `radius_km` great-circle
/// distance of the site.
pub fn select_cells(site: &ClusterSite, cells: &[TileBounds], radius_km: f64) -> Vec<usize> {
    cells
        .iter()
        .enumerate()
        .filter(|(_, t)| {
            let (lon, lat) = t.center();
            haversine_km(site.lon, site.lat, lon, lat) <= radius_km
        })
        .map(|(i, _)| i)
        .collect()
}

/// Sum, arithmetic mean and linearly interpolated quantiles of a non-empty
/// value list.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub sum: f64,
    pub mean: f64,
    pub quantiles: Vec<f64>,
}

pub fn aggregate(values: &[f64], quantile_set: &[f64]) -> Result<Aggregate> {
    if values.is_empty() {
        return Err(Error::EmptyInput("aggregate values".into()));
    }
    let sum: f64 = values.iter().sum();
    let mean = sum / values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let quantiles = quantile_set.iter().map(|&q| quantile_linear(&sorted, q)).collect();
    Ok(Aggregate { sum, mean, quantiles })
}

/// Linear-interpolation quantile on a sorted slice (position q·(n−1)).
fn quantile_linear(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let t = pos - lo as f64;
    sorted[lo] * (1.0 - t) + sorted[hi] * t
}

/// Mean radiance of the raster pixels whose centers fall inside the cell;
/// the flag is false when no pixel center overlaps.
pub fn nightlight_stat(cell: &GeoBox, nl_raster: &MaskRaster) -> (f64, bool) {
    let mut sum = 0.0;
    let mut n = 0usize;
    for y in 0..nl_raster.height {
        for x in 0..nl_raster.width {
            let (lon, lat) = nl_raster.geo.pixel_to_geo(x as f64 + 0.5, y as f64 + 0.5);
            if cell.contains(lon, lat) {
                sum += nl_raster.at(x, y) as f64;
                n += 1;
            }
        }
    }
    if n == 0 {
        (0.0, false)
    } else {
        (sum / n as f64, true)
    }
}

/// Per-cell measurement record produced by the counting stage (nightlight
/// filled in by this module).
#[derive(Debug, Clone, PartialEq)]
pub struct TileRecord {
    pub cell_id: String,
    pub buildings: f64,
    pub road_m: f64,
    pub road_components: f64,
    pub nightlight: f64,
}

pub fn read_tile_records(path: &Path) -> Result<Vec<TileRecord>> {
    let rows = csvio::read_csv(path, TILE_RECORD_HEADER)?;
    rows.iter()
        .map(|r| {
            Ok(TileRecord {
                cell_id: r[0].clone(),
                buildings: csvio::parse_f64(path, "buildings", &r[1])?,
                road_m: csvio::parse_f64(path, "road_m", &r[2])?,
                road_components: csvio::parse_f64(path, "road_components", &r[3])?,
                nightlight: csvio::parse_f64(path, "nightlight", &r[4])?,
            })
        })
        .collect()
}

pub fn write_tile_records(path: &Path, records: &[TileRecord], provenance: Option<&str>) -> Result<()> {
    let rows: Vec<String> = records
        .iter()
        .map(|r| {
            format!("{},{},{},{},{}", r.cell_id, r.buildings, r.road_m, r.road_components, r.nightlight)
        })
        .collect();
    csvio::write_csv(path, provenance, TILE_RECORD_HEADER, &rows)
}

/// Aggregated feature vector for one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub cluster_id: String,
    pub country: String,
    pub n_cells: usize,
    /// One [`Aggregate`] per entry of [`VARIABLES`], in that order.
    pub aggregates: Vec<Aggregate>,
    pub wealth: Option<f64>,
    pub wealthpooled: Option<f64>,
}

/// A dropped site and why.
#[derive(Debug, Clone, PartialEq)]
pub struct DroppedSite {
    pub cluster_id: String,
    pub reason: String,
}

/// Build one feature row per cluster site; sites with fewer than `min_cells`
/// contributing cells are dropped with a logged reason.
pub fn build_feature_rows(
    sites: &[ClusterSite],
    cells: &[TileBounds],
    records: &[TileRecord],
    radius_km: f64,
    quantile_set: &[f64],
    min_cells: usize,
) -> Result<(Vec<FeatureRow>, Vec<DroppedSite>)> {
    let by_id: HashMap<&str, &TileRecord> =
        records.iter().map(|r| (r.cell_id.as_str(), r)).collect();
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    for site in sites {
        let selected = select_cells(site, cells, radius_km);
        let recs: Vec<&TileRecord> = selected
            .iter()
            .filter_map(|&i| by_id.get(cells[i].cell_id.as_str()).copied())
            .collect();
        if recs.len() < min_cells.max(1) {
            dropped.push(DroppedSite {
                cluster_id: site.cluster_id.clone(),
                reason: format!("{} usable cells within {radius_km} km", recs.len()),
            });
            continue;
        }
        let columns: [Vec<f64>; 4] = [
            recs.iter().map(|r| r.buildings).collect(),
            recs.iter().map(|r| r.road_m).collect(),
            recs.iter().map(|r| r.road_components).collect(),
            recs.iter().map(|r| r.nightlight).collect(),
        ];
        let aggregates = columns
            .iter()
            .map(|vals| aggregate(vals, quantile_set))
            .collect::<Result<Vec<_>>>()?;
        rows.push(FeatureRow {
            cluster_id: site.cluster_id.clone(),
            country: site.country.clone(),
            n_cells: recs.len(),
            aggregates,
            wealth: site.wealth,
            wealthpooled: site.wealthpooled,
        });
    }
    Ok((rows, dropped))
}

/// Which per-cell variables feed the model matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSet {
    Buildings,
    Roads,
    BuildingsRoads,
    Nightlight,
    All,
}

impl FeatureSet {
    pub const ALL_SETS: [FeatureSet; 5] = [
        FeatureSet::Buildings,
        FeatureSet::Roads,
        FeatureSet::BuildingsRoads,
        FeatureSet::Nightlight,
        FeatureSet::All,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FeatureSet::Buildings => "buildings",
            FeatureSet::Roads => "roads",
            FeatureSet::BuildingsRoads => "buildings_roads",
            FeatureSet::Nightlight => "nightlight",
            FeatureSet::All => "all",
        }
    }

    /// Indices into [`VARIABLES`]. The road measure is two-dimensional
    /// (length and component count); both belong to the Roads set.
    pub fn variable_indices(&self) -> &'static [usize] {
        match self {
            FeatureSet::Buildings => &[0],
            FeatureSet::Roads => &[1, 2],
            FeatureSet::BuildingsRoads => &[0, 1, 2],
            FeatureSet::Nightlight => &[3],
            FeatureSet::All => &[0, 1, 2, 3],
        }
    }
}

/// Deterministic per-variable stat names matching the aggregate layout.
pub fn stat_names(quantile_set: &[f64]) -> Vec<String> {
    let mut names = vec!["sum".to_string(), "mean".to_string()];
    for q in quantile_set {
        names.push(format!("q{:02}", (q * 100.0).round() as usize));
    }
    names
}

/// Feature matrix, label vector, per-row country tags and the dropped rows.
pub type MatrixParts = (Vec<Vec<f64>>, Vec<f64>, Vec<String>, Vec<DroppedSite>);

/// Feature matrix, label vector and country tags for the chosen feature set
/// and label. Rows whose label is missing are dropped and reported.
pub fn build_matrix(
    rows: &[FeatureRow],
    feature_set: FeatureSet,
    label: LabelKind,
) -> Result<MatrixParts> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut countries = Vec::new();
    let mut dropped = Vec::new();
    for row in rows {
        let label_opt = match label {
            LabelKind::Wealth => row.wealth,
            LabelKind::Wealthpooled => row.wealthpooled,
        };
        let Some(label_value) = label_opt else {
            dropped.push(DroppedSite {
                cluster_id: row.cluster_id.clone(),
                reason: "missing label".into(),
            });
            continue;
        };
        let mut features = Vec::new();
        for &vi in feature_set.variable_indices() {
            let agg = &row.aggregates[vi];
            features.push(agg.sum);
            features.push(agg.mean);
            features.extend_from_slice(&agg.quantiles);
        }
        if features.iter().any(|v| !v.is_finite()) {
            dropped.push(DroppedSite {
                cluster_id: row.cluster_id.clone(),
                reason: "non-finite feature".into(),
            });
            continue;
        }
        x.push(features);
        y.push(label_value);
        countries.push(row.country.clone());
    }
    if x.is_empty() {
        return Err(Error::EmptyInput(format!(
            "feature matrix for {} / {label:?}",
            feature_set.name()
        )));
    }
    Ok((x, y, countries, dropped))
}

/// Feature CSV header: `cluster_id,country,n_cells,wealth,wealthpooled`,
/// then `<var>_<stat>` per variable and stat.
pub fn feature_header(quantile_set: &[f64]) -> String {
    let mut cols = vec![
        "cluster_id".to_string(),
        "country".to_string(),
        "n_cells".to_string(),
        "wealth".to_string(),
        "wealthpooled".to_string(),
    ];
    for var in VARIABLES {
        for stat in stat_names(quantile_set) {
            cols.push(format!("{var}_{stat}"));
        }
    }
    cols.join(",")
}

pub fn write_feature_rows(
    path: &Path,
    rows: &[FeatureRow],
    quantile_set: &[f64],
    provenance: Option<&str>,
) -> Result<()> {
    let fmt_opt = |o: Option<f64>| o.map(|v| v.to_string()).unwrap_or_default();
    let lines: Vec<String> = rows
        .iter()
        .map(|r| {
            let mut fields = vec![
                r.cluster_id.clone(),
                r.country.clone(),
                r.n_cells.to_string(),
                fmt_opt(r.wealth),
                fmt_opt(r.wealthpooled),
            ];
            for agg in &r.aggregates {
                fields.push(agg.sum.to_string());
                fields.push(agg.mean.to_string());
                for q in &agg.quantiles {
                    fields.push(q.to_string());
                }
            }
            fields.join(",")
        })
        .collect();
    csvio::write_csv(path, provenance, &feature_header(quantile_set), &lines)
}

pub fn read_feature_rows(path: &Path, quantile_set: &[f64]) -> Result<Vec<FeatureRow>> {
    let rows = csvio::read_csv(path, &feature_header(quantile_set))?;
    let nq = quantile_set.len();
    let per_var = 2 + nq;
    rows.iter()
        .map(|r| {
            let opt = |field: &str, col: &str| -> Result<Option<f64>> {
                if field.is_empty() {
                    Ok(None)
                } else {
                    csvio::parse_f64(path, col, field).map(Some)
                }
            };
            let mut aggregates = Vec::with_capacity(VARIABLES.len());
            for vi in 0..VARIABLES.len() {
                let base = 5 + vi * per_var;
                let sum = csvio::parse_f64(path, "sum", &r[base])?;
                let mean = csvio::parse_f64(path, "mean", &r[base + 1])?;
                let quantiles = (0..nq)
                    .map(|qi| csvio::parse_f64(path, "quantile", &r[base + 2 + qi]))
                    .collect::<Result<Vec<_>>>()?;
                aggregates.push(Aggregate { sum, mean, quantiles });
            }
            Ok(FeatureRow {
                cluster_id: r[0].clone(),
                country: r[1].clone(),
                n_cells: csvio::parse_usize(path, "n_cells", &r[2])?,
                aggregates,
                wealth: opt(&r[3], "wealth")?,
                wealthpooled: opt(&r[4], "wealthpooled")?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoTransform;
    use crate::grid::{make_grid, region_from_km};
    use rand::Rng;

    fn site(lon: f64, lat: f64) -> ClusterSite {
        ClusterSite {
            cluster_id: "c1".into(),
            country: "AA".into(),
            lon,
            lat,
            wealth: Some(1.0),
            wealthpooled: Some(2.0),
        }
    }

    #[test]
    fn cell_under_site_is_selected() {
        let region = region_from_km(10.0, 0.0, 3.0, 3.0);
        let cells = make_grid(&region, 1.0, "AA").unwrap();
        let (lon, lat) = cells[4].center();
        let got = select_cells(&site(lon, lat), &cells, 5.0);
        assert!(got.contains(&4));
        // With a 5 km radius on a 3 km region every cell is within reach.
        assert_eq!(got.len(), 9);
    }

    #[test]
    fn mid_ocean_site_selects_nothing() {
        let region = region_from_km(10.0, 0.0, 3.0, 3.0);
        let cells = make_grid(&region, 1.0, "AA").unwrap();
        assert!(select_cells(&site(50.0, -30.0), &cells, 5.0).is_empty());
    }

    #[test]
    fn selection_matches_haversine_scan() {
        let region = region_from_km(-1.0, -1.0, 10.0, 10.0);
        let cells = make_grid(&region, 1.0, "AA").unwrap();
        let s = site(-0.97, -0.96);
        let got = select_cells(&s, &cells, 5.0);
        let want: Vec<usize> = cells
            .iter()
            .enumerate()
            .filter(|(_, t)| {
                let (lon, lat) = t.center();
                haversine_km(s.lon, s.lat, lon, lat) <= 5.0
            })
            .map(|(i, _)| i)
            .collect();
        assert_eq!(got, want);
        assert!(!got.is_empty() && got.len() < cells.len());
    }

    #[test]
    fn aggregate_basics() {
        let agg = aggregate(&[1.0, 2.0, 3.0, 4.0], &DEFAULT_QUANTILES).unwrap();
        assert_eq!(agg.sum, 10.0);
        assert_eq!(agg.mean, 2.5);
        assert_eq!(agg.quantiles[2], 2.5); // median
        assert!(aggregate(&[], &DEFAULT_QUANTILES).is_err());
    }

    #[test]
    fn constant_list_has_constant_quantiles() {
        let agg = aggregate(&[7.0; 10], &DEFAULT_QUANTILES).unwrap();
        assert!(agg.quantiles.iter().all(|&q| q == 7.0));
    }

    #[test]
    fn quantiles_match_sort_based_oracle() {
        let mut rng = crate::seed::rng_from_seed(13);
        let values: Vec<f64> = (0..1000).map(|_| rng.gen::<f64>() * 100.0).collect();
        let agg = aggregate(&values, &DEFAULT_QUANTILES).unwrap();
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (qi, &q) in DEFAULT_QUANTILES.iter().enumerate() {
            // Independent formulation of the same interpolation.
            let pos = q * 999.0;
            let lo = pos.floor() as usize;
            let frac = pos - lo as f64;
            let want = if lo + 1 < 1000 {
                sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
            } else {
                sorted[lo]
            };
            assert!((agg.quantiles[qi] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregates_are_permutation_invariant_and_homogeneous() {
        let values = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        let base = aggregate(&values, &DEFAULT_QUANTILES).unwrap();
        let mut rev = values.to_vec();
        rev.reverse();
        assert_eq!(aggregate(&rev, &DEFAULT_QUANTILES).unwrap(), base);
        let doubled: Vec<f64> = values.iter().map(|v| v * 2.0).collect();
        let agg2 = aggregate(&doubled, &DEFAULT_QUANTILES).unwrap();
        assert!((agg2.sum - 2.0 * base.sum).abs() < 1e-12);
        assert!((agg2.mean - 2.0 * base.mean).abs() < 1e-12);
        for (a, b) in agg2.quantiles.iter().zip(base.quantiles.iter()) {
            assert!((a - 2.0 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn nightlight_mean_over_cell() {
        // 2×2 raster exactly covering the cell, pixel values 1..4.
        let mut nl = MaskRaster::zeros(2, 2, GeoTransform::north_up(0.0, 2.0, 1.0), 1.0);
        nl.values = vec![1.0, 2.0, 3.0, 4.0];
        let cell = GeoBox::new(0.0, 0.0, 2.0, 2.0);
        let (mean, ok) = nightlight_stat(&cell, &nl);
        assert!(ok);
        assert_eq!(mean, 2.5);

        // Uniform raster → the constant.
        nl.values = vec![7.0; 4];
        assert_eq!(nightlight_stat(&cell, &nl).0, 7.0);

        // No overlap → 0 with flag false.
        let far = GeoBox::new(100.0, 100.0, 101.0, 101.0);
        assert_eq!(nightlight_stat(&far, &nl), (0.0, false));
    }

    #[test]
    fn nightlight_translation_equivariance() {
        let mut nl = MaskRaster::zeros(4, 4, GeoTransform::north_up(0.0, 4.0, 1.0), 1.0);
        for (i, v) in nl.values.iter_mut().enumerate() {
            *v = (i * i % 17) as f32;
        }
        let cell = GeoBox::new(1.0, 1.0, 3.0, 3.0);
        let (base, _) = nightlight_stat(&cell, &nl);
        // Shift raster origin and cell by one pixel (1 degree) together.
        let mut shifted = nl.clone();
        shifted.geo = GeoTransform::north_up(1.0, 5.0, 1.0);
        let cell2 = GeoBox::new(2.0, 2.0, 4.0, 4.0);
        let (moved, _) = nightlight_stat(&cell2, &shifted);
        assert_eq!(base, moved);
    }

    fn demo_rows() -> Vec<FeatureRow> {
        let mk = |id: &str, country: &str, v: f64, wealth: Option<f64>| FeatureRow {
            cluster_id: id.into(),
            country: country.into(),
            n_cells: 3,
            aggregates: (0..4)
                .map(|k| Aggregate {
                    sum: v + k as f64,
                    mean: v / 3.0,
                    quantiles: vec![v; DEFAULT_QUANTILES.len()],
                })
                .collect(),
            wealth,
            wealthpooled: Some(v * 2.0),
        };
        vec![
            mk("a", "AA", 1.0, Some(0.5)),
            mk("b", "AA", 2.0, None),
            mk("c", "BB", 3.0, Some(1.5)),
        ]
    }

    #[test]
    fn matrix_columns_follow_feature_set() {
        let rows = demo_rows();
        let per_var = 2 + DEFAULT_QUANTILES.len();
        let (x, y, countries, dropped) =
            build_matrix(&rows, FeatureSet::Nightlight, LabelKind::Wealth).unwrap();
        assert_eq!(x.len(), 2); // row "b" has no wealth label
        assert_eq!(x[0].len(), per_var);
        assert_eq!(y, vec![0.5, 1.5]);
        assert_eq!(countries, vec!["AA", "BB"]);
        assert_eq!(dropped.len(), 1);
        assert_eq!(dropped[0].cluster_id, "b");

        // Subset structure: All ⊇ BuildingsRoads ⊇ Buildings.
        let n_all = build_matrix(&rows, FeatureSet::All, LabelKind::Wealth).unwrap().0[0].len();
        let n_br =
            build_matrix(&rows, FeatureSet::BuildingsRoads, LabelKind::Wealth).unwrap().0[0].len();
        let n_b =
            build_matrix(&rows, FeatureSet::Buildings, LabelKind::Wealth).unwrap().0[0].len();
        assert_eq!(n_all, 4 * per_var);
        assert_eq!(n_br, 3 * per_var);
        assert_eq!(n_b, per_var);
        assert!(n_all > n_br && n_br > n_b);

        // With the pooled label no row is dropped.
        let (x2, ..) = build_matrix(&rows, FeatureSet::All, LabelKind::Wealthpooled).unwrap();
        assert_eq!(x2.len(), 3);
    }

    #[test]
    fn feature_rows_csv_round_trip() {
        let rows = demo_rows();
        let dir = std::env::temp_dir().join("satpipe_features_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("features.csv");
        write_feature_rows(&path, &rows, &DEFAULT_QUANTILES, Some("config=z seed=3")).unwrap();
        let back = read_feature_rows(&path, &DEFAULT_QUANTILES).unwrap();
        assert_eq!(rows, back);
    }

    #[test]
    fn sites_without_cells_are_dropped_with_reason() {
        let region = region_from_km(0.0, 0.0, 2.0, 2.0);
        let cells = make_grid(&region, 1.0, "AA").unwrap();
        let records: Vec<TileRecord> = cells
            .iter()
            .map(|c| TileRecord {
                cell_id: c.cell_id.clone(),
                buildings: 2.0,
                road_m: 100.0,
                road_components: 1.0,
                nightlight: 5.0,
            })
            .collect();
        let sites = vec![site(0.005, 0.005), site(90.0, 45.0)];
        let (rows, dropped) =
            build_feature_rows(&sites, &cells, &records, 5.0, &DEFAULT_QUANTILES, 1).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(dropped.len(), 1);
        assert!(dropped[0].reason.contains("0 usable cells"));
        assert_eq!(rows[0].n_cells, 4);
        assert_eq!(rows[0].aggregates[0].sum, 8.0);
    }
}
