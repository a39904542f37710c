//! Wealth-prediction benchmarking: ridge and the regression-tree family at
//! frozen default settings, evaluated with leave-one-country-out
//! cross-validation and pooled out-of-sample R².

pub mod ridge;
pub mod tree;

use std::path::Path;

use crate::csvio;
use crate::error::{Error, Result};
use crate::features::{build_matrix, FeatureRow, FeatureSet, LabelKind};
use crate::seed::derive_seed;

pub use ridge::{ridge_fit, RidgeModel};
pub use tree::{
    bagged_fit, boosted_fit, tree_fit, BagOptions, BaggedTrees, BoostOptions, BoostedTrees,
    RegressionTree, TreeOptions,
};

/// Frozen default hyperparameters ("default settings"; no tuning anywhere).
pub const RIDGE_LAMBDA: f64 = 1.0;
pub const TREE_DEFAULTS: TreeOptions = TreeOptions { max_depth: 8, min_leaf: 5 };
pub const BOOST_DEFAULTS: BoostOptions = BoostOptions {
    rounds: 100,
    shrinkage: 0.1,
    tree: TreeOptions { max_depth: 3, min_leaf: 5 },
};
pub const BAG_DEFAULTS: BagOptions =
    BagOptions { rounds: 100, bootstrap: true, tree: TreeOptions { max_depth: 8, min_leaf: 5 } };

/// A one-line record of the frozen defaults, stamped into result files.
pub fn defaults_summary() -> String {
    format!(
        "defaults: ridge_lambda={RIDGE_LAMBDA} tree_depth={} tree_min_leaf={} boost_rounds={} boost_shrinkage={} boost_depth={} bag_rounds={}",
        TREE_DEFAULTS.max_depth,
        TREE_DEFAULTS.min_leaf,
        BOOST_DEFAULTS.rounds,
        BOOST_DEFAULTS.shrinkage,
        BOOST_DEFAULTS.tree.max_depth,
        BAG_DEFAULTS.rounds,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Ridge,
    RTree,
    RTreeBoosted,
    RTreeBagged,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] =
        [ModelKind::Ridge, ModelKind::RTree, ModelKind::RTreeBoosted, ModelKind::RTreeBagged];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Ridge => "ridge",
            ModelKind::RTree => "r-tree",
            ModelKind::RTreeBoosted => "r-tree (bs)",
            ModelKind::RTreeBagged => "r-tree (bg)",
        }
    }
}

pub enum FittedModel {
    Ridge(RidgeModel),
    Tree(RegressionTree),
    Boosted(BoostedTrees),
    Bagged(BaggedTrees),
}

impl FittedModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        match self {
            FittedModel::Ridge(m) => m.predict(row),
            FittedModel::Tree(m) => m.predict(row),
            FittedModel::Boosted(m) => m.predict(row),
            FittedModel::Bagged(m) => m.predict(row),
        }
    }
}

/// Fit one model kind at the frozen defaults.
pub fn fit_model(kind: ModelKind, x: &[Vec<f64>], y: &[f64], seed: u64) -> Result<FittedModel> {
    Ok(match kind {
        ModelKind::Ridge => FittedModel::Ridge(ridge_fit(x, y, RIDGE_LAMBDA)?),
        ModelKind::RTree => FittedModel::Tree(tree_fit(x, y, TREE_DEFAULTS)?),
        ModelKind::RTreeBoosted => FittedModel::Boosted(boosted_fit(x, y, BOOST_DEFAULTS)?),
        ModelKind::RTreeBagged => FittedModel::Bagged(bagged_fit(x, y, BAG_DEFAULTS, seed)?),
    })
}

/// 1 − Σ(y−ŷ)² / Σ(y−ȳ)²; may be negative.
pub fn r_squared(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() || y_true.len() < 2 {
        return Err(Error::EmptyInput(format!(
            "r-squared needs two equal-length vectors of >= 2 (got {} / {})",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let sst: f64 = y_true.iter().map(|&v| (v - mean).powi(2)).sum();
    if sst == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let sse: f64 = y_true.iter().zip(y_pred.iter()).map(|(&t, &p)| (t - p).powi(2)).sum();
    Ok(1.0 - sse / sst)
}

/// One cross-validation fold's provenance, proving the held-out country
/// never reached its own model.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldAudit {
    pub held_out: String,
    pub train_countries: Vec<String>,
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountryR2 {
    pub country: String,
    /// Undefined for countries with < 2 rows or zero label variance.
    pub r2: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone)]
pub struct CvResult {
    /// R² over the concatenated held-out predictions (the headline number).
    pub pooled_r2: f64,
    pub per_country: Vec<CountryR2>,
    pub audit: Vec<FoldAudit>,
}

impl CvResult {
    /// No fold may list its held-out country among its training countries.
    pub fn audit_is_clean(&self) -> bool {
        self.audit.iter().all(|f| !f.train_countries.contains(&f.held_out))
    }
}

/// Leave-one-country-out: each country is predicted by a model trained on
/// all the others; the pooled R² scores the concatenated held-out
/// predictions.
pub fn loocv_by_country(
    x: &[Vec<f64>],
    y: &[f64],
    countries: &[String],
    kind: ModelKind,
    seed: u64,
) -> Result<CvResult> {
    if x.len() != y.len() || x.len() != countries.len() {
        return Err(Error::EmptyInput("loocv inputs must have matching lengths".into()));
    }
    let mut distinct: Vec<String> = Vec::new();
    for c in countries {
        if !distinct.contains(c) {
            distinct.push(c.clone());
        }
    }
    if distinct.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "loocv needs at least 2 countries, found {}",
            distinct.len()
        )));
    }

    let mut predictions = vec![f64::NAN; y.len()];
    let mut per_country = Vec::with_capacity(distinct.len());
    let mut audit = Vec::with_capacity(distinct.len());

    for held in &distinct {
        let train_idx: Vec<usize> =
            (0..x.len()).filter(|&i| &countries[i] != held).collect();
        let test_idx: Vec<usize> = (0..x.len()).filter(|&i| &countries[i] == held).collect();
        if train_idx.is_empty() {
            return Err(Error::EmptyCountry(format!("training set empty when holding out {held}")));
        }
        if test_idx.is_empty() {
            return Err(Error::EmptyCountry(held.clone()));
        }
        let xt: Vec<Vec<f64>> = train_idx.iter().map(|&i| x[i].clone()).collect();
        let yt: Vec<f64> = train_idx.iter().map(|&i| y[i]).collect();
        let model = fit_model(kind, &xt, &yt, derive_seed(seed, held))?;

        let mut train_countries: Vec<String> = Vec::new();
        for &i in &train_idx {
            if !train_countries.contains(&countries[i]) {
                train_countries.push(countries[i].clone());
            }
        }
        audit.push(FoldAudit {
            held_out: held.clone(),
            train_countries,
            n_train: train_idx.len(),
            n_test: test_idx.len(),
        });

        for &i in &test_idx {
            predictions[i] = model.predict(&x[i]);
        }
        let yt_test: Vec<f64> = test_idx.iter().map(|&i| y[i]).collect();
        let yp_test: Vec<f64> = test_idx.iter().map(|&i| predictions[i]).collect();
        per_country.push(CountryR2 {
            country: held.clone(),
            r2: r_squared(&yt_test, &yp_test).ok(),
            n: test_idx.len(),
        });
    }

    let pooled_r2 = r_squared(y, &predictions)?;
    Ok(CvResult { pooled_r2, per_country, audit })
}

/// One row of the models × feature-sets table.
#[derive(Debug, Clone)]
pub struct TableRow {
    pub model: ModelKind,
    pub feature_set: FeatureSet,
    pub cv: CvResult,
}

/// The full benchmark: every model kind × every feature set.
pub fn benchmark_table(
    rows: &[FeatureRow],
    label: LabelKind,
    seed: u64,
) -> Result<Vec<TableRow>> {
    let mut out = Vec::new();
    for feature_set in FeatureSet::ALL_SETS {
        let (x, y, countries, _) = build_matrix(rows, feature_set, label)?;
        for kind in ModelKind::ALL {
            let cv = loocv_by_country(&x, &y, &countries, kind, seed)?;
            out.push(TableRow { model: kind, feature_set, cv });
        }
    }
    Ok(out)
}

pub const TABLE_HEADER: &str = "model,feature_set,r2_pooled";
pub const PER_COUNTRY_HEADER: &str = "model,feature_set,country,r2,n";
pub const AUDIT_HEADER: &str = "model,feature_set,held_out,n_train,n_test,train_countries";

pub fn write_table(path: &Path, table: &[TableRow], provenance: Option<&str>) -> Result<()> {
    let mut rows: Vec<String> = table
        .iter()
        .map(|r| format!("{},{},{}", r.model.name(), r.feature_set.name(), r.cv.pooled_r2))
        .collect();
    rows.push(format!("# {}", defaults_summary()));
    csvio::write_csv(path, provenance, TABLE_HEADER, &rows)
}

pub fn write_per_country(path: &Path, table: &[TableRow], provenance: Option<&str>) -> Result<()> {
    let mut rows = Vec::new();
    for r in table {
        for c in &r.cv.per_country {
            rows.push(format!(
                "{},{},{},{},{}",
                r.model.name(),
                r.feature_set.name(),
                c.country,
                c.r2.map(|v| v.to_string()).unwrap_or_else(|| "undefined".into()),
                c.n
            ));
        }
    }
    csvio::write_csv(path, provenance, PER_COUNTRY_HEADER, &rows)
}

pub fn write_audit(path: &Path, table: &[TableRow], provenance: Option<&str>) -> Result<()> {
    let mut rows = Vec::new();
    for r in table {
        for f in &r.cv.audit {
            rows.push(format!(
                "{},{},{},{},{},{}",
                r.model.name(),
                r.feature_set.name(),
                f.held_out,
                f.n_train,
                f.n_test,
                f.train_countries.join(";")
            ));
        }
    }
    csvio::write_csv(path, provenance, AUDIT_HEADER, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn r_squared_reference_points() {
        let y = [1.0, 2.0, 3.0];
        assert_eq!(r_squared(&y, &y).unwrap(), 1.0);
        let mean = [2.0, 2.0, 2.0];
        assert_eq!(r_squared(&y, &mean).unwrap(), 0.0);
        // y = [1,2,3], ŷ = [1,2,4] → 1 − 1/2 = 0.5
        let off = [1.0, 2.0, 4.0];
        assert_eq!(r_squared(&y, &off).unwrap(), 0.5);
        assert!(matches!(r_squared(&[5.0, 5.0], &[1.0, 2.0]), Err(Error::ZeroVariance)));
        assert!(r_squared(&[1.0], &[1.0]).is_err());
    }

    fn linear_two_countries(n_per: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>, Vec<String>) {
        let mut rng = crate::seed::rng_from_seed(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut countries = Vec::new();
        for country in ["AA", "BB"] {
            for _ in 0..n_per {
                let v = rng.gen::<f64>() * 10.0;
                x.push(vec![v]);
                y.push(v);
                countries.push(country.to_string());
            }
        }
        (x, y, countries)
    }

    #[test]
    fn identical_linear_data_across_countries_scores_near_one() {
        let (x, y, countries) = linear_two_countries(50, 61);
        let cv = loocv_by_country(&x, &y, &countries, ModelKind::Ridge, 0).unwrap();
        assert!(cv.pooled_r2 > 0.99, "{}", cv.pooled_r2);
        assert!(cv.audit_is_clean());
        assert_eq!(cv.per_country.len(), 2);
    }

    #[test]
    fn permuted_labels_score_near_zero() {
        let (x, mut y, countries) = linear_two_countries(100, 67);
        // Deterministic permutation detaches labels from features.
        let mut rng = crate::seed::rng_from_seed(68);
        for i in (1..y.len()).rev() {
            let j = rng.gen_range(0..=i);
            y.swap(i, j);
        }
        let cv = loocv_by_country(&x, &y, &countries, ModelKind::Ridge, 0).unwrap();
        assert!(cv.pooled_r2 <= 0.1, "{}", cv.pooled_r2);
    }

    #[test]
    fn single_country_is_rejected() {
        let x = vec![vec![1.0], vec![2.0]];
        let y = vec![1.0, 2.0];
        let countries = vec!["AA".to_string(), "AA".to_string()];
        assert!(loocv_by_country(&x, &y, &countries, ModelKind::Ridge, 0).is_err());
    }

    #[test]
    fn audit_covers_every_country_without_leaks() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut countries = Vec::new();
        let mut rng = crate::seed::rng_from_seed(71);
        for country in ["AA", "BB", "CC", "DD"] {
            for _ in 0..20 {
                let v = rng.gen::<f64>();
                let w = rng.gen::<f64>();
                x.push(vec![v, w]);
                y.push(2.0 * v - w + 0.05 * rng.gen::<f64>());
                countries.push(country.to_string());
            }
        }
        let cv = loocv_by_country(&x, &y, &countries, ModelKind::RTree, 5).unwrap();
        assert!(cv.audit_is_clean());
        assert_eq!(cv.audit.len(), 4);
        for fold in &cv.audit {
            assert_eq!(fold.n_train, 60);
            assert_eq!(fold.n_test, 20);
            assert_eq!(fold.train_countries.len(), 3);
        }
    }

    #[test]
    fn loocv_is_deterministic_given_seed() {
        let (x, y, countries) = linear_two_countries(40, 73);
        let a = loocv_by_country(&x, &y, &countries, ModelKind::RTreeBagged, 11).unwrap();
        let b = loocv_by_country(&x, &y, &countries, ModelKind::RTreeBagged, 11).unwrap();
        assert_eq!(a.pooled_r2, b.pooled_r2);
    }
}
