//! Trial datasets and the transformations applied to them before learning.

mod cluster;
mod io;
mod synthetic;

pub use cluster::{
    apply_cluster_featureizer, fit_cluster_featureizer, fit_cluster_featureizer_on,
    ClusterFeatureizer, CLUSTER_ID_COLUMN,
};
pub(crate) use cluster::kmeans;
pub use io::{
    load_criteo_csv, load_criteo_csv_with, read_dataset_csv, write_dataset_csv,
    write_ground_truth_csv, CriteoLoadOptions, CRITEO_FEATURES, CRITEO_OUTCOMES,
};
pub use synthetic::{
    dgp, generate_synthetic_binary_rct, generate_synthetic_rct, SyntheticGroundTruth,
};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Result, UpliftError};
use crate::matrix::Matrix;
use crate::rng::{stream_rng, streams};

/// Tolerance between the recorded propensity and the treated fraction of a
/// trial-collected dataset.
pub const PROPENSITY_TOLERANCE: f64 = 0.02;

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub name: String,
    pub values: Vec<f64>,
}

impl Outcome {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self { name: name.into(), values }
    }
}

/// Features, binary treatment, one or more outcomes and the known treatment
/// probability of a randomized trial.
///
/// Immutable after construction; every transformation returns a new value.
#[derive(Clone, Debug, PartialEq)]
pub struct RctDataset {
    features: Matrix,
    feature_names: Vec<String>,
    treatment: Vec<u8>,
    outcomes: Vec<Outcome>,
    propensity: f64,
}

impl RctDataset {
    pub fn new(
        features: Matrix,
        feature_names: Vec<String>,
        treatment: Vec<u8>,
        outcomes: Vec<Outcome>,
        propensity: f64,
    ) -> Result<Self> {
        let n = features.n_rows();
        if feature_names.len() != features.n_cols() {
            return invalid(format!(
                "{} feature names for {} feature columns",
                feature_names.len(),
                features.n_cols()
            ));
        }
        if treatment.len() != n {
            return invalid(format!("treatment has {} entries, features have {n} rows", treatment.len()));
        }
        if let Some(row) = treatment.iter().position(|&w| w > 1) {
            return Err(UpliftError::Row {
                row,
                message: format!("treatment must be 0 or 1, got {}", treatment[row]),
            });
        }
        if outcomes.is_empty() {
            return invalid("dataset needs at least one outcome");
        }
        for (k, o) in outcomes.iter().enumerate() {
            if o.values.len() != n {
                return invalid(format!(
                    "outcome '{}' has {} values, expected {n}",
                    o.name,
                    o.values.len()
                ));
            }
            if outcomes[..k].iter().any(|p| p.name == o.name) {
                return invalid(format!("duplicate outcome name '{}'", o.name));
            }
        }
        if !(propensity > 0.0 && propensity < 1.0) {
            return invalid(format!("propensity must lie in (0, 1), got {propensity}"));
        }
        Ok(Self { features, feature_names, treatment, outcomes, propensity })
    }

    /// Builds a dataset whose propensity is the observed treated fraction.
    pub fn from_trial(
        features: Matrix,
        feature_names: Vec<String>,
        treatment: Vec<u8>,
        outcomes: Vec<Outcome>,
    ) -> Result<Self> {
        if treatment.is_empty() {
            return invalid("empty dataset");
        }
        let p = treated_fraction(&treatment);
        Self::new(features, feature_names, treatment, outcomes, p)
    }

    pub fn n(&self) -> usize {
        self.treatment.len()
    }

    pub fn d(&self) -> usize {
        self.features.n_cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn treatment(&self) -> &[u8] {
        &self.treatment
    }

    pub fn propensity(&self) -> f64 {
        self.propensity
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn outcome_names(&self) -> Vec<&str> {
        self.outcomes.iter().map(|o| o.name.as_str()).collect()
    }

    pub fn outcome(&self, name: &str) -> Result<&[f64]> {
        self.outcomes
            .iter()
            .find(|o| o.name == name)
            .map(|o| o.values.as_slice())
            .ok_or_else(|| UpliftError::Validation(format!("no outcome named '{name}'")))
    }

    pub fn n_treated(&self) -> usize {
        self.treatment.iter().filter(|&&w| w == 1).count()
    }

    pub fn treated_fraction(&self) -> f64 {
        treated_fraction(&self.treatment)
    }

    /// Checks that the recorded propensity matches the treated fraction.
    pub fn check_rct_propensity(&self) -> Result<()> {
        let frac = self.treated_fraction();
        if (frac - self.propensity).abs() > PROPENSITY_TOLERANCE {
            return invalid(format!(
                "propensity {} differs from treated fraction {frac:.4} by more than {PROPENSITY_TOLERANCE}",
                self.propensity
            ));
        }
        Ok(())
    }

    /// Row subset; the parent's propensity is retained.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(idx),
            feature_names: self.feature_names.clone(),
            treatment: idx.iter().map(|&i| self.treatment[i]).collect(),
            outcomes: self
                .outcomes
                .iter()
                .map(|o| Outcome::new(o.name.clone(), idx.iter().map(|&i| o.values[i]).collect()))
                .collect(),
            propensity: self.propensity,
        }
    }

    /// Copy with the named outcome's values replaced.
    pub fn with_outcome_values(&self, name: &str, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.n() {
            return invalid(format!("outcome '{name}' needs {} values", self.n()));
        }
        let mut out = self.clone();
        match out.outcomes.iter_mut().find(|o| o.name == name) {
            Some(o) => o.values = values,
            None => return invalid(format!("no outcome named '{name}'")),
        }
        Ok(out)
    }

    /// Copy with a different feature block; treatment and outcomes untouched.
    pub fn with_features(&self, features: Matrix, feature_names: Vec<String>) -> Result<Self> {
        if features.n_rows() != self.n() {
            return invalid(format!(
                "replacement features have {} rows, dataset has {}",
                features.n_rows(),
                self.n()
            ));
        }
        Self::new(
            features,
            feature_names,
            self.treatment.clone(),
            self.outcomes.clone(),
            self.propensity,
        )
    }

    /// Copy with the recorded propensity replaced.
    pub fn with_propensity(&self, propensity: f64) -> Result<Self> {
        Self::new(
            self.features.clone(),
            self.feature_names.clone(),
            self.treatment.clone(),
            self.outcomes.clone(),
            propensity,
        )
    }

    pub fn arm_indices(&self, arm: u8) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.treatment[i] == arm).collect()
    }
}

fn treated_fraction(treatment: &[u8]) -> f64 {
    if treatment.is_empty() {
        return 0.0;
    }
    treatment.iter().filter(|&&w| w == 1).count() as f64 / treatment.len() as f64
}

/// Seeded disjoint row partition. Both halves keep the parent propensity and
/// preserve the parent's relative row order.
pub fn split_train_test(
    dataset: &RctDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(RctDataset, RctDataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return invalid(format!("train fraction must lie in (0, 1), got {train_fraction}"));
    }
    let n = dataset.n();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stream_rng(seed, streams::SPLIT));
    let n_train = (train_fraction * n as f64).round() as usize;
    let (train, test) = perm.split_at_mut(n_train.min(n));
    train.sort_unstable();
    test.sort_unstable();
    Ok((dataset.select_rows(train), dataset.select_rows(test)))
}

/// Label-bias injection over the subset `f0(x) = w·x < alpha`.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasInjectionSpec {
    pub f0_weights: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub target_outcome: String,
    pub seed: u64,
}

impl BiasInjectionSpec {
    /// Weight 1 on `feature`, zero elsewhere.
    pub fn unit_weights(d: usize, feature: usize) -> Vec<f64> {
        let mut w = vec![0.0; d];
        if feature < d {
            w[feature] = 1.0;
        }
        w
    }

    pub fn scalarize(&self, row: &[f64]) -> f64 {
        self.f0_weights.iter().zip(row).map(|(w, x)| w * x).sum()
    }

    pub fn in_subset(&self, row: &[f64]) -> bool {
        self.scalarize(row) < self.alpha
    }

    /// Median of `w·x` over the dataset rows, the default threshold.
    pub fn median_alpha(dataset: &RctDataset, weights: &[f64]) -> f64 {
        let mut v: Vec<f64> = dataset
            .features()
            .rows()
            .map(|r| weights.iter().zip(r).map(|(w, x)| w * x).sum())
            .collect();
        if v.is_empty() {
            return 0.0;
        }
        v.sort_by(f64::total_cmp);
        let m = v.len() / 2;
        if v.len() % 2 == 1 {
            v[m]
        } else {
            0.5 * (v[m - 1] + v[m])
        }
    }
}

/// Copy of `dataset` where positive labels of the target outcome inside the
/// subset are switched to 0 independently with probability `beta`.
pub fn inject_label_bias(dataset: &RctDataset, spec: &BiasInjectionSpec) -> Result<RctDataset> {
    if !(0.0..=1.0).contains(&spec.beta) {
        return invalid(format!("beta must lie in [0, 1], got {}", spec.beta));
    }
    if spec.f0_weights.len() != dataset.d() {
        return invalid(format!(
            "f0 has {} weights, dataset has {} features",
            spec.f0_weights.len(),
            dataset.d()
        ));
    }
    let labels = dataset.outcome(&spec.target_outcome)?;
    if let Some(row) = labels.iter().position(|&y| y != 0.0 && y != 1.0) {
        return Err(UpliftError::Row {
            row,
            message: format!("outcome '{}' is not binary (value {})", spec.target_outcome, labels[row]),
        });
    }
    let mut rng = stream_rng(spec.seed, streams::BIAS);
    let mut biased = labels.to_vec();
    for (i, y) in biased.iter_mut().enumerate() {
        if *y == 1.0 && spec.in_subset(dataset.features().row(i)) {
            let u: f64 = rng.random();
            if u < spec.beta {
                *y = 0.0;
            }
        }
    }
    dataset.with_outcome_values(&spec.target_outcome, biased)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> RctDataset {
        let x = Matrix::new(n, 2, (0..2 * n).map(|v| v as f64).collect()).unwrap();
        let w = (0..n).map(|i| (i % 2) as u8).collect();
        let y = (0..n).map(|i| (i % 3 == 0) as u8 as f64).collect();
        RctDataset::from_trial(x, vec!["a".into(), "b".into()], w, vec![Outcome::new("y", y)])
            .unwrap()
    }

    #[test]
    fn rejects_bad_treatment() {
        let x = Matrix::zeros(3, 1);
        let err = RctDataset::from_trial(x, vec!["a".into()], vec![0, 2, 1], vec![Outcome::new("y", vec![0.0; 3])])
            .unwrap_err();
        assert!(matches!(err, UpliftError::Row { row: 1, .. }));
    }

    #[test]
    fn rejects_mismatched_outcome_length() {
        let x = Matrix::zeros(3, 1);
        assert!(RctDataset::from_trial(x, vec!["a".into()], vec![0, 1, 1], vec![Outcome::new("y", vec![0.0; 2])])
            .is_err());
    }

    #[test]
    fn split_counts_and_determinism() {
        let ds = toy(10);
        let (tr, te) = split_train_test(&ds, 0.8, 3).unwrap();
        assert_eq!((tr.n(), te.n()), (8, 2));
        let mut firsts: Vec<f64> = tr.features().column(0);
        firsts.extend(te.features().column(0));
        firsts.sort_by(f64::total_cmp);
        assert_eq!(firsts, ds.features().column(0));
        assert_eq!(tr.propensity(), ds.propensity());
        let (tr2, te2) = split_train_test(&ds, 0.8, 3).unwrap();
        assert_eq!(tr, tr2);
        assert_eq!(te, te2);
        assert!(split_train_test(&ds, 1.0, 3).is_err());
        assert!(split_train_test(&ds, 0.0, 3).is_err());
    }

    #[test]
    fn bias_rejects_non_binary_target() {
        let ds = toy(6).with_outcome_values("y", vec![0.5; 6]).unwrap();
        let spec = BiasInjectionSpec {
            f0_weights: vec![1.0, 0.0],
            alpha: 100.0,
            beta: 0.5,
            target_outcome: "y".into(),
            seed: 1,
        };
        assert!(inject_label_bias(&ds, &spec).is_err());
    }

    #[test]
    fn bias_beta_zero_is_identity_and_beta_one_clears_subset() {
        let ds = toy(60);
        let alpha = BiasInjectionSpec::median_alpha(&ds, &[1.0, 0.0]);
        let mut spec = BiasInjectionSpec {
            f0_weights: vec![1.0, 0.0],
            alpha,
            beta: 0.0,
            target_outcome: "y".into(),
            seed: 9,
        };
        assert_eq!(inject_label_bias(&ds, &spec).unwrap(), ds);
        spec.beta = 1.0;
        let biased = inject_label_bias(&ds, &spec).unwrap();
        let y0 = ds.outcome("y").unwrap();
        let y1 = biased.outcome("y").unwrap();
        for i in 0..ds.n() {
            if spec.in_subset(ds.features().row(i)) {
                assert_eq!(y1[i], 0.0);
            } else {
                assert_eq!(y1[i], y0[i]);
            }
        }
        // the source dataset is untouched
        assert_eq!(ds, toy(60));
    }

    #[test]
    fn median_alpha_even_and_odd() {
        let ds = toy(4);
        // column 0 values: 0, 2, 4, 6
        assert_eq!(BiasInjectionSpec::median_alpha(&ds, &[1.0, 0.0]), 3.0);
        let ds = toy(3);
        assert_eq!(BiasInjectionSpec::median_alpha(&ds, &[1.0, 0.0]), 2.0);
    }
}
