//! Pipeline configuration: a sectioned `key = value` text format with a
//! canonical serialization. Files emitted by [`PipelineConfig::canonical`]
//! parse back to the same configuration and re-serialize byte-identically;
//! parsing also tolerates comments, blank lines and reordered keys.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use satpipe_core::geo::GeoBox;
use satpipe_core::post::MatchMode;
use satpipe_core::seed::fnv1a64;

#[derive(Debug, Clone, PartialEq)]
pub struct RegionSpec {
    pub country: String,
    pub bounds: GeoBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub jobs: usize,

    // [paths]
    pub vectors: PathBuf,
    pub images: PathBuf,
    pub nightlight: PathBuf,
    pub clusters: PathBuf,
    pub out: PathBuf,

    // [grid]
    pub cell_km: f64,
    pub regions: Vec<RegionSpec>,

    // [tiles]
    pub tile_px: usize,
    pub pad: usize,
    pub rescale_colors: bool,

    // [unet]
    pub base_filters: usize,
    pub depth: usize,
    pub dropout: f64,

    // [train]
    pub classes: Vec<String>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub dice_weight: f64,
    pub augment: bool,
    pub ensemble_seeds: Vec<u64>,
    /// Optional kept-manifest from a judge round; when set, training uses
    /// only the listed cells.
    pub filter_manifest: Option<PathBuf>,

    // [judge]
    pub judge_class: String,
    pub alpha_max: f64,
    pub judge_rounds: usize,

    // [count]
    pub thresholds: Vec<u8>,
    pub min_blob_area: usize,
    pub centroid_radius_px: f64,
    pub road_width_px: f64,
    pub match_mode: MatchMode,

    // [features]
    pub radius_km: f64,
    pub min_cells: usize,
    pub quantiles: Vec<f64>,
    pub label: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            jobs: 1,
            vectors: "data/vectors.geojson".into(),
            images: "data/images".into(),
            nightlight: "data/nightlight.png".into(),
            clusters: "data/clusters.csv".into(),
            out: "out".into(),
            cell_km: 1.0,
            regions: Vec::new(),
            tile_px: 400,
            pad: 8,
            rescale_colors: true,
            base_filters: 32,
            depth: 5,
            dropout: 0.2,
            classes: vec!["building".into(), "road".into()],
            epochs: 10,
            batch_size: 4,
            learning_rate: 0.05,
            momentum: 0.0,
            dice_weight: 1.0,
            augment: false,
            ensemble_seeds: vec![1, 2, 3],
            filter_manifest: None,
            judge_class: "road".into(),
            alpha_max: satpipe_core::judge::DEFAULT_ALPHA_MAX,
            judge_rounds: 1,
            thresholds: vec![5, 10, 15, 25],
            min_blob_area: satpipe_core::post::DEFAULT_MIN_BLOB_AREA,
            centroid_radius_px: satpipe_core::rasterize::DEFAULT_CENTROID_RADIUS_PX,
            road_width_px: satpipe_core::rasterize::DEFAULT_ROAD_WIDTH_PX,
            match_mode: MatchMode::Strict,
            radius_km: satpipe_core::features::DEFAULT_RADIUS_KM,
            min_cells: satpipe_core::features::DEFAULT_MIN_CELLS,
            quantiles: satpipe_core::features::DEFAULT_QUANTILES.to_vec(),
            label: "wealth".into(),
        }
    }
}

impl PipelineConfig {
    /// Network input size: padded tile.
    pub fn input_size(&self) -> usize {
        self.tile_px + 2 * self.pad
    }

    pub fn unet_config(&self, seed: u64) -> satpipe_core::nn::UnetConfig {
        satpipe_core::nn::UnetConfig {
            input_size: self.input_size(),
            base_filters: self.base_filters,
            depth: self.depth,
            dropout_rate: self.dropout,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.regions.is_empty() {
            bail!("grid.regions must list at least one COUNTRY:min_lon:min_lat:max_lon:max_lat");
        }
        if self.classes.is_empty() {
            bail!("train.classes must not be empty");
        }
        if self.ensemble_seeds.is_empty() {
            bail!("train.ensemble_seeds must not be empty");
        }
        if !self.thresholds.windows(2).all(|w| w[0] < w[1]) {
            bail!("count.thresholds must be strictly ascending");
        }
        if self.label != "wealth" && self.label != "wealthpooled" {
            bail!("features.label must be `wealth` or `wealthpooled`");
        }
        let quantiles_ok = !self.quantiles.is_empty()
            && self.quantiles.iter().all(|q| (0.0..=1.0).contains(q))
            && self.quantiles.windows(2).all(|w| w[0] < w[1]);
        if !quantiles_ok {
            bail!("features.quantiles must be strictly ascending within [0, 1]");
        }
        if !self.classes.contains(&self.judge_class) {
            bail!("judge.class `{}` is not in train.classes", self.judge_class);
        }
        let div = 1usize << self.depth;
        if !self.input_size().is_multiple_of(div) {
            bail!(
                "tiles.pixels + 2*tiles.pad = {} is not divisible by 2^depth = {div}",
                self.input_size()
            );
        }
        Ok(())
    }

    /// Canonical serialization; the config hash is taken over these bytes.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let regions = self
            .regions
            .iter()
            .map(|r| {
                format!(
                    "{}:{}:{}:{}:{}",
                    r.country, r.bounds.min_lon, r.bounds.min_lat, r.bounds.max_lon, r.bounds.max_lat
                )
            })
            .collect::<Vec<_>>()
            .join(";");
        let join_f64 = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "jobs = {}", self.jobs);
        let _ = writeln!(s);
        let _ = writeln!(s, "[paths]");
        let _ = writeln!(s, "vectors = {}", self.vectors.display());
        let _ = writeln!(s, "images = {}", self.images.display());
        let _ = writeln!(s, "nightlight = {}", self.nightlight.display());
        let _ = writeln!(s, "clusters = {}", self.clusters.display());
        let _ = writeln!(s, "out = {}", self.out.display());
        let _ = writeln!(s);
        let _ = writeln!(s, "[grid]");
        let _ = writeln!(s, "cell_km = {}", self.cell_km);
        let _ = writeln!(s, "regions = {regions}");
        let _ = writeln!(s);
        let _ = writeln!(s, "[tiles]");
        let _ = writeln!(s, "pixels = {}", self.tile_px);
        let _ = writeln!(s, "pad = {}", self.pad);
        let _ = writeln!(s, "rescale_colors = {}", self.rescale_colors);
        let _ = writeln!(s);
        let _ = writeln!(s, "[unet]");
        let _ = writeln!(s, "base_filters = {}", self.base_filters);
        let _ = writeln!(s, "depth = {}", self.depth);
        let _ = writeln!(s, "dropout = {}", self.dropout);
        let _ = writeln!(s);
        let _ = writeln!(s, "[train]");
        let _ = writeln!(s, "classes = {}", self.classes.join(","));
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "learning_rate = {}", self.learning_rate);
        let _ = writeln!(s, "momentum = {}", self.momentum);
        let _ = writeln!(s, "dice_weight = {}", self.dice_weight);
        let _ = writeln!(s, "augment = {}", self.augment);
        let _ = writeln!(
            s,
            "ensemble_seeds = {}",
            self.ensemble_seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
        );
        let _ = writeln!(
            s,
            "filter_manifest = {}",
            self.filter_manifest.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
        );
        let _ = writeln!(s);
        let _ = writeln!(s, "[judge]");
        let _ = writeln!(s, "class = {}", self.judge_class);
        let _ = writeln!(s, "alpha_max = {}", self.alpha_max);
        let _ = writeln!(s, "rounds = {}", self.judge_rounds);
        let _ = writeln!(s);
        let _ = writeln!(s, "[count]");
        let _ = writeln!(
            s,
            "thresholds = {}",
            self.thresholds.iter().map(u8::to_string).collect::<Vec<_>>().join(",")
        );
        let _ = writeln!(s, "min_blob_area = {}", self.min_blob_area);
        let _ = writeln!(s, "centroid_radius_px = {}", self.centroid_radius_px);
        let _ = writeln!(s, "road_width_px = {}", self.road_width_px);
        let _ = writeln!(
            s,
            "match_mode = {}",
            match self.match_mode {
                MatchMode::Strict => "strict",
                MatchMode::CountAll => "count_all",
            }
        );
        let _ = writeln!(s);
        let _ = writeln!(s, "[features]");
        let _ = writeln!(s, "radius_km = {}", self.radius_km);
        let _ = writeln!(s, "min_cells = {}", self.min_cells);
        let _ = writeln!(s, "quantiles = {}", join_f64(&self.quantiles));
        let _ = writeln!(s, "label = {}", self.label);
        s
    }

    pub fn hash(&self) -> u64 {
        fnv1a64(self.canonical().as_bytes())
    }

    /// `config=<hash> seed=<seed> stage=<stage>` stamped into every output.
    pub fn provenance(&self, stage: &str) -> String {
        format!("config={:016x} seed={} stage={stage}", self.hash(), self.seed)
    }

    pub fn parse(text: &str) -> Result<PipelineConfig> {
        let mut section = String::new();
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = line[1..line.len() - 1].trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`, got `{raw}`", lineno + 1))?;
            let full_key = if section.is_empty() {
                key.trim().to_string()
            } else {
                format!("{section}.{}", key.trim())
            };
            map.insert(full_key, value.trim().to_string());
        }

        let mut cfg = PipelineConfig::default();
        let get = |map: &BTreeMap<String, String>, key: &str| -> Option<String> {
            map.get(key).cloned()
        };
        macro_rules! set {
            ($field:expr, $key:literal, $parse:expr) => {
                if let Some(v) = get(&map, $key) {
                    $field = $parse(&v).with_context(|| format!("config key `{}`", $key))?;
                }
            };
        }
        let p_u64 = |v: &str| v.parse::<u64>().map_err(anyhow::Error::from);
        let p_usize = |v: &str| v.parse::<usize>().map_err(anyhow::Error::from);
        let p_f64 = |v: &str| v.parse::<f64>().map_err(anyhow::Error::from);
        let p_bool = |v: &str| v.parse::<bool>().map_err(anyhow::Error::from);
        let p_path = |v: &str| Ok::<PathBuf, anyhow::Error>(PathBuf::from(v));
        let p_str = |v: &str| Ok::<String, anyhow::Error>(v.to_string());

        set!(cfg.seed, "seed", p_u64);
        set!(cfg.jobs, "jobs", p_usize);
        set!(cfg.vectors, "paths.vectors", p_path);
        set!(cfg.images, "paths.images", p_path);
        set!(cfg.nightlight, "paths.nightlight", p_path);
        set!(cfg.clusters, "paths.clusters", p_path);
        set!(cfg.out, "paths.out", p_path);
        set!(cfg.cell_km, "grid.cell_km", p_f64);
        set!(cfg.regions, "grid.regions", parse_regions);
        set!(cfg.tile_px, "tiles.pixels", p_usize);
        set!(cfg.pad, "tiles.pad", p_usize);
        set!(cfg.rescale_colors, "tiles.rescale_colors", p_bool);
        set!(cfg.base_filters, "unet.base_filters", p_usize);
        set!(cfg.depth, "unet.depth", p_usize);
        set!(cfg.dropout, "unet.dropout", p_f64);
        set!(cfg.classes, "train.classes", |v: &str| Ok::<_, anyhow::Error>(
            v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
        ));
        set!(cfg.epochs, "train.epochs", p_usize);
        set!(cfg.batch_size, "train.batch_size", p_usize);
        set!(cfg.learning_rate, "train.learning_rate", p_f64);
        set!(cfg.momentum, "train.momentum", p_f64);
        set!(cfg.dice_weight, "train.dice_weight", p_f64);
        set!(cfg.augment, "train.augment", p_bool);
        set!(cfg.ensemble_seeds, "train.ensemble_seeds", |v: &str| {
            v.split(',')
                .map(|s| s.trim().parse::<u64>().map_err(anyhow::Error::from))
                .collect::<Result<Vec<_>>>()
        });
        set!(cfg.filter_manifest, "train.filter_manifest", |v: &str| {
            Ok::<_, anyhow::Error>(if v.is_empty() { None } else { Some(PathBuf::from(v)) })
        });
        set!(cfg.judge_class, "judge.class", p_str);
        set!(cfg.alpha_max, "judge.alpha_max", p_f64);
        set!(cfg.judge_rounds, "judge.rounds", p_usize);
        set!(cfg.thresholds, "count.thresholds", |v: &str| {
            v.split(',')
                .map(|s| s.trim().parse::<u8>().map_err(anyhow::Error::from))
                .collect::<Result<Vec<_>>>()
        });
        set!(cfg.min_blob_area, "count.min_blob_area", p_usize);
        set!(cfg.centroid_radius_px, "count.centroid_radius_px", p_f64);
        set!(cfg.road_width_px, "count.road_width_px", p_f64);
        set!(cfg.match_mode, "count.match_mode", |v: &str| match v {
            "strict" => Ok(MatchMode::Strict),
            "count_all" => Ok(MatchMode::CountAll),
            other => Err(anyhow!("unknown match_mode `{other}`")),
        });
        set!(cfg.radius_km, "features.radius_km", p_f64);
        set!(cfg.min_cells, "features.min_cells", p_usize);
        set!(cfg.quantiles, "features.quantiles", |v: &str| {
            v.split(',')
                .map(|s| s.trim().parse::<f64>().map_err(anyhow::Error::from))
                .collect::<Result<Vec<_>>>()
        });
        set!(cfg.label, "features.label", p_str);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg =
            Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }
}

fn parse_regions(v: &str) -> Result<Vec<RegionSpec>> {
    v.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|spec| {
            let parts: Vec<&str> = spec.split(':').collect();
            if parts.len() != 5 {
                bail!("region `{spec}` must be COUNTRY:min_lon:min_lat:max_lon:max_lat");
            }
            Ok(RegionSpec {
                country: parts[0].trim().to_string(),
                bounds: GeoBox::new(
                    parts[1].trim().parse()?,
                    parts[2].trim().parse()?,
                    parts[3].trim().parse()?,
                    parts[4].trim().parse()?,
                ),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PipelineConfig {
        let mut cfg = PipelineConfig {
            seed: 42,
            jobs: 2,
            tile_px: 24,
            pad: 4,
            base_filters: 4,
            depth: 2,
            dropout: 0.1,
            epochs: 3,
            ..Default::default()
        };
        cfg.regions = parse_regions("AA:10:-2:10.1:-1.9;BB:10.1:-2:10.2:-1.9").unwrap();
        cfg
    }

    #[test]
    fn canonical_round_trips_byte_identically() {
        let cfg = sample();
        let text = cfg.canonical();
        let parsed = PipelineConfig::parse(&text).unwrap();
        assert_eq!(parsed, cfg);
        assert_eq!(parsed.canonical(), text);
        assert_eq!(parsed.hash(), cfg.hash());
    }

    #[test]
    fn parser_tolerates_comments_and_reordering() {
        let cfg = sample();
        let mut lines: Vec<String> =
            cfg.canonical().lines().map(str::to_string).collect();
        lines.insert(0, "# a comment".into());
        lines.insert(3, "".into());
        let text = lines.join("\n");
        let parsed = PipelineConfig::parse(&text).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn validation_catches_bad_shapes() {
        let mut cfg = sample();
        cfg.thresholds = vec![10, 5];
        assert!(cfg.validate().is_err());

        let mut cfg = sample();
        cfg.tile_px = 25; // 25 + 8 = 33, not divisible by 4
        assert!(cfg.validate().is_err());

        let mut cfg = sample();
        cfg.label = "income".into();
        assert!(cfg.validate().is_err());

        let mut cfg = sample();
        cfg.judge_class = "water".into();
        assert!(cfg.validate().is_err());

        let mut cfg = sample();
        cfg.quantiles = vec![0.5, 0.25];
        assert!(cfg.validate().is_err());

        assert!(sample().validate().is_ok());
    }

    #[test]
    fn hash_changes_with_any_field() {
        let base = sample();
        let mut other = sample();
        other.learning_rate = 0.123;
        assert_ne!(base.hash(), other.hash());
        let mut other = sample();
        other.seed = 43;
        assert_ne!(base.hash(), other.hash());
    }
}
