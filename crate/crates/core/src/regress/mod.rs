//! Regression models shared by the nuisance and effect stages.

mod tree;

pub use tree::{Node, Tree};

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, stream_rng, streams};

pub const MODEL_FORMAT: &str = "uplift-regressor";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Fraction of features tried at each split (rounded up, at least one).
    pub feature_subsample: f64,
    /// Rows drawn per tree as a fraction of the training rows.
    pub row_subsample: f64,
    /// Draw rows with replacement.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 8,
            min_samples_leaf: 50,
            feature_subsample: 1.0 / 3.0,
            row_subsample: 1.0,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return invalid("n_trees must be at least 1");
        }
        if self.min_samples_leaf == 0 {
            return invalid("min_samples_leaf must be at least 1");
        }
        for (name, v) in [("feature_subsample", self.feature_subsample), ("row_subsample", self.row_subsample)] {
            if !(v > 0.0 && v <= 1.0) {
                return invalid(format!("{name} must lie in (0, 1], got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantSpec {
    /// Predict the training mean.
    Mean,
    /// Predict a fixed value regardless of the data.
    Value(f64),
}

/// How to fit a [`Regressor`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressorSpec {
    Forest(ForestConfig),
    Constant(ConstantSpec),
}

impl RegressorSpec {
    pub fn zero() -> Self {
        Self::Constant(ConstantSpec::Value(0.0))
    }

    /// Same spec with its seed mixed with `stream`, for sibling models that
    /// must not share bootstrap draws.
    pub fn reseeded(&self, stream: u64) -> Self {
        match self {
            Self::Forest(cfg) => Self::Forest(ForestConfig { seed: derive_seed(cfg.seed, stream), ..cfg.clone() }),
            other => other.clone(),
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        match self {
            Self::Forest(cfg) => Self::Forest(ForestConfig { seed, ..cfg.clone() }),
            other => other.clone(),
        }
    }
}

impl From<ForestConfig> for RegressorSpec {
    fn from(cfg: ForestConfig) -> Self {
        Self::Forest(cfg)
    }
}

/// Bagged regression trees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    config: ForestConfig,
    n_features: usize,
    trees: Vec<Tree>,
}

impl Forest {
    pub fn fit(config: &ForestConfig, x: &Matrix, y: &[f64]) -> Result<Self> {
        config.validate()?;
        check_training_data(x, y)?;
        if x.n_rows() < config.min_samples_leaf {
            return invalid(format!(
                "{} rows is fewer than min_samples_leaf = {}",
                x.n_rows(),
                config.min_samples_leaf
            ));
        }
        let presorted = tree::presort(x);
        let trees = (0..config.n_trees)
            .into_par_iter()
            .map(|t| {
                let rng = stream_rng(config.seed, streams::TREE_BASE + t as u64);
                tree::fit_tree(x, y, &presorted, config, rng)
            })
            .collect();
        Ok(Self { config: config.clone(), n_features: x.n_cols(), trees })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    /// Mean of the per-tree leaf values, accumulated as a running mean so a
    /// forest of identical trees returns their value exactly.
    fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let (mut mean, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
        for (k, t) in self.trees.iter().enumerate() {
            let v = t.predict_row(x);
            mean += (v - mean) / (k + 1) as f64;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        mean.clamp(lo, hi)
    }
}

fn check_training_data(x: &Matrix, y: &[f64]) -> Result<()> {
    if x.n_rows() == 0 {
        return invalid("cannot fit on empty data");
    }
    if y.len() != x.n_rows() {
        return invalid(format!("{} targets for {} rows", y.len(), x.n_rows()));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return invalid(format!("non-finite target at row {i}"));
    }
    if let Some(i) = x.as_slice().iter().position(|v| !v.is_finite()) {
        return invalid(format!("non-finite feature at row {}", i / x.n_cols().max(1)));
    }
    Ok(())
}

/// A fitted outcome or effect regressor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regressor {
    Forest(Forest),
    Constant { value: f64, n_features: usize },
}

pub fn fit_regressor(spec: &RegressorSpec, x: &Matrix, y: &[f64]) -> Result<Regressor> {
    match spec {
        RegressorSpec::Forest(cfg) => Ok(Regressor::Forest(Forest::fit(cfg, x, y)?)),
        RegressorSpec::Constant(c) => {
            check_training_data(x, y)?;
            let value = match c {
                ConstantSpec::Value(v) => *v,
                ConstantSpec::Mean => {
                    let mut m = 0.0;
                    for (k, v) in y.iter().enumerate() {
                        m += (v - m) / (k + 1) as f64;
                    }
                    m
                }
            };
            Ok(Regressor::Constant { value, n_features: x.n_cols() })
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    model: T,
}

impl Regressor {
    pub fn n_features(&self) -> usize {
        match self {
            Self::Forest(f) => f.n_features,
            Self::Constant { n_features, .. } => *n_features,
        }
    }

    pub fn predict_row(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(crate::UpliftError::DimensionMismatch { expected: self.n_features(), got: x.len() });
        }
        Ok(self.predict_row_unchecked(x))
    }

    fn predict_row_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            Self::Forest(f) => f.predict_unchecked(x),
            Self::Constant { value, .. } => *value,
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.check_cols(self.n_features())?;
        Ok(match self {
            Self::Constant { value, .. } => vec![*value; x.n_rows()],
            Self::Forest(_) => (0..x.n_rows())
                .into_par_iter()
                .with_min_len(256)
                .map(|i| self.predict_row_unchecked(x.row(i)))
                .collect(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&Envelope {
            format: MODEL_FORMAT.into(),
            version: MODEL_FORMAT_VERSION,
            model: self,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let env: Envelope<Self> = serde_json::from_str(text)?;
        if env.format != MODEL_FORMAT || env.version != MODEL_FORMAT_VERSION {
            return invalid(format!("unsupported model format {} v{}", env.format, env.version));
        }
        Ok(env.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_synthetic_rct;
    use crate::UpliftError;

    fn small_cfg() -> ForestConfig {
        ForestConfig { n_trees: 10, min_samples_leaf: 5, seed: 3, ..Default::default() }
    }

    #[test]
    fn constant_value_spec_predicts_value() {
        let x = Matrix::zeros(4, 2);
        let m = fit_regressor(&RegressorSpec::zero(), &x, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.predict(&Matrix::zeros(3, 2)).unwrap(), vec![0.0; 3]);
        let m = fit_regressor(&RegressorSpec::Constant(ConstantSpec::Mean), &x, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.predict_row(&[9.0, 9.0]).unwrap(), 2.5);
    }

    #[test]
    fn rejects_empty_nan_and_wrong_dimension() {
        let spec = RegressorSpec::Forest(small_cfg());
        assert!(fit_regressor(&spec, &Matrix::zeros(0, 2), &[]).is_err());
        assert!(fit_regressor(&spec, &Matrix::zeros(10, 1), &[f64::NAN; 10]).is_err());
        let m = fit_regressor(&spec, &Matrix::zeros(10, 1), &[1.0; 10]).unwrap();
        let err = m.predict(&Matrix::zeros(2, 3)).unwrap_err();
        assert!(matches!(err, UpliftError::DimensionMismatch { expected: 1, got: 3 }));
        assert!(m.predict_row(&[1.0, 2.0]).is_err());
        assert!(fit_regressor(&spec, &Matrix::zeros(3, 1), &[1.0; 3]).is_err());
    }

    #[test]
    fn invalid_config_rejected() {
        let x = Matrix::zeros(10, 1);
        for cfg in [
            ForestConfig { n_trees: 0, ..small_cfg() },
            ForestConfig { min_samples_leaf: 0, ..small_cfg() },
            ForestConfig { feature_subsample: 0.0, ..small_cfg() },
            ForestConfig { row_subsample: 1.5, ..small_cfg() },
        ] {
            assert!(Forest::fit(&cfg, &x, &[0.0; 10]).is_err());
        }
    }

    #[test]
    fn constant_target_predicted_exactly() {
        let (ds, _) = generate_synthetic_rct(300, 4, 0.5, 1.0, 2).unwrap();
        let y = vec![0.1; ds.n()];
        let m = fit_regressor(&small_cfg().into(), ds.features(), &y).unwrap();
        assert!(m.predict(ds.features()).unwrap().iter().all(|&v| v == 0.1));
    }

    #[test]
    fn deterministic_and_serialization_round_trip() {
        let (ds, _) = generate_synthetic_rct(400, 4, 0.5, 1.0, 2).unwrap();
        let y = ds.outcome("revenue").unwrap();
        let a = fit_regressor(&small_cfg().into(), ds.features(), y).unwrap();
        let b = fit_regressor(&small_cfg().into(), ds.features(), y).unwrap();
        assert_eq!(a, b);
        let back = Regressor::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(back.predict(ds.features()).unwrap(), a.predict(ds.features()).unwrap());
        assert!(Regressor::from_json("{\"format\":\"x\",\"version\":1,\"model\":{\"kind\":\"constant\",\"value\":0.0,\"n_features\":1}}").is_err());
    }

    #[test]
    fn reseeded_specs_differ() {
        let s = RegressorSpec::Forest(small_cfg());
        assert_ne!(s.reseeded(1), s.reseeded(2));
        assert_eq!(RegressorSpec::zero().reseeded(1), RegressorSpec::zero());
    }
}
