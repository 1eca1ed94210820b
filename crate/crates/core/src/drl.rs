//! Doubly robust learner for randomized trials.
//!
//! The training rows are split into two folds. Per-arm outcome regressions
//! fit on one fold supply the nuisance predictions `mu0(x)`, `mu1(x)` for the
//! other, and with the known treatment probability `p` every row gets the
//! pseudo-outcome
//!
//! ```text
//! phi = (w - p) / (p (1 - p)) * (y - mu_w(x)) + mu1(x) - mu0(x)
//! ```
//!
//! whose conditional mean is the true effect whatever the nuisance models
//! predict. A second-stage regressor of `phi` on `x` is the served model; the
//! nuisance models are only needed during training.

use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::RctDataset;
use crate::error::{invalid, Result};
use crate::learners::CateEstimator;
use crate::matrix::Matrix;
use crate::regress::{fit_regressor, Regressor, RegressorSpec};
use crate::rng::{derive_seed, stream_rng, streams};

pub const MIN_PROPENSITY: f64 = 0.01;
pub const MAX_PROPENSITY: f64 = 0.99;
pub const DRL_MODEL_FORMAT: &str = "uplift-drl-model";
pub const DRL_MODEL_FORMAT_VERSION: u32 = 1;

pub fn check_propensity(p: f64) -> Result<()> {
    if !(MIN_PROPENSITY..=MAX_PROPENSITY).contains(&p) {
        return invalid(format!(
            "propensity {p} outside the supported range [{MIN_PROPENSITY}, {MAX_PROPENSITY}]"
        ));
    }
    Ok(())
}

/// Two-fold partition of the training rows.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossFitPlan {
    folds: Vec<u8>,
    seed: u64,
}

impl CrossFitPlan {
    pub fn n(&self) -> usize {
        self.folds.len()
    }

    /// Fold of row `i`, 0 or 1.
    pub fn fold(&self, i: usize) -> usize {
        self.folds[i] as usize
    }

    pub fn folds(&self) -> &[u8] {
        &self.folds
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold(i) == fold).collect()
    }

    pub fn fold_sizes(&self) -> [usize; 2] {
        let ones = self.folds.iter().filter(|&&f| f == 1).count();
        [self.n() - ones, ones]
    }
}

/// Seeded near-even split; fold 0 gets `floor(n / 2)` rows.
pub fn make_crossfit_plan(n: usize, seed: u64) -> Result<CrossFitPlan> {
    if n < 4 {
        return invalid(format!("cross-fitting needs at least 4 rows, got {n}"));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stream_rng(seed, streams::CROSSFIT));
    let mut folds = vec![0u8; n];
    for &i in &perm[n / 2..] {
        folds[i] = 1;
    }
    Ok(CrossFitPlan { folds, seed })
}

/// Per-fold arm regressors. `model(f, arm)` predicts rows of fold `f` and was
/// trained on the other fold's rows of that arm.
#[derive(Clone, Debug, PartialEq)]
pub struct NuisanceModels {
    models: [[Regressor; 2]; 2],
}

/// Cross-fitted `mu0(x_i)`, `mu1(x_i)` for every training row.
#[derive(Clone, Debug, PartialEq)]
pub struct NuisancePredictions {
    pub mu0: Vec<f64>,
    pub mu1: Vec<f64>,
}

impl NuisancePredictions {
    /// Direct (plug-in) effect estimate `mu1 - mu0` per row.
    pub fn direct_effects(&self) -> Vec<f64> {
        self.mu1.iter().zip(&self.mu0).map(|(a, b)| a - b).collect()
    }
}

impl NuisanceModels {
    pub fn model(&self, fold: usize, arm: usize) -> &Regressor {
        &self.models[fold][arm]
    }

    /// Predictions for the rows the plan was built for; each row is scored
    /// only by models that never saw it.
    pub fn predict_cross_fitted(&self, x: &Matrix, plan: &CrossFitPlan) -> Result<NuisancePredictions> {
        if x.n_rows() != plan.n() {
            return invalid(format!("plan covers {} rows, features have {}", plan.n(), x.n_rows()));
        }
        let mut mu0 = vec![0.0; plan.n()];
        let mut mu1 = vec![0.0; plan.n()];
        for fold in 0..2 {
            let idx = plan.indices(fold);
            let xf = x.select_rows(&idx);
            let p0 = self.models[fold][0].predict(&xf)?;
            let p1 = self.models[fold][1].predict(&xf)?;
            for (k, &i) in idx.iter().enumerate() {
                mu0[i] = p0[k];
                mu1[i] = p1[k];
            }
        }
        Ok(NuisancePredictions { mu0, mu1 })
    }
}

/// Fits the four (fold, arm) nuisance regressors.
pub fn fit_nuisance(
    dataset: &RctDataset,
    outcome: &str,
    plan: &CrossFitPlan,
    spec: &RegressorSpec,
) -> Result<NuisanceModels> {
    if plan.n() != dataset.n() {
        return invalid(format!("plan covers {} rows, dataset has {}", plan.n(), dataset.n()));
    }
    let y = dataset.outcome(outcome)?;
    let w = dataset.treatment();
    // training cell for (fold f, arm a): rows of the other fold in arm a
    let cells: Vec<(usize, usize, Vec<usize>)> = (0..2)
        .flat_map(|f| (0..2).map(move |a| (f, a)))
        .map(|(f, a)| {
            let rows = (0..dataset.n())
                .filter(|&i| plan.fold(i) != f && w[i] as usize == a)
                .collect::<Vec<_>>();
            (f, a, rows)
        })
        .collect();
    for (f, a, rows) in &cells {
        if rows.is_empty() {
            let arm = if *a == 1 { "treated" } else { "control" };
            return invalid(format!(
                "no {arm} rows in fold {} to train the nuisance model for fold {}",
                2 - f,
                f + 1
            ));
        }
    }
    let fitted: Vec<Result<Regressor>> = cells
        .par_iter()
        .map(|(f, a, rows)| {
            let x = dataset.features().select_rows(rows);
            let yy: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
            fit_regressor(&spec.reseeded(10 + 2 * *f as u64 + *a as u64), &x, &yy)
        })
        .collect();
    let mut it = fitted.into_iter();
    let mut next = || it.next().unwrap();
    let (m00, m01, m10, m11) = (next()?, next()?, next()?, next()?);
    Ok(NuisanceModels { models: [[m00, m01], [m10, m11]] })
}

/// Per-row pseudo-outcomes and the conditions they were computed under.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoOutcomeVector {
    pub values: Vec<f64>,
    pub propensity: f64,
    pub outcome: String,
}

impl PseudoOutcomeVector {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

fn check_lengths(dataset: &RctDataset, preds: &NuisancePredictions) -> Result<()> {
    if preds.mu0.len() != dataset.n() || preds.mu1.len() != dataset.n() {
        return invalid(format!(
            "nuisance predictions cover {}/{} rows, dataset has {}",
            preds.mu0.len(),
            preds.mu1.len(),
            dataset.n()
        ));
    }
    Ok(())
}

pub fn compute_pseudo_outcomes(
    dataset: &RctDataset,
    outcome: &str,
    preds: &NuisancePredictions,
    p: f64,
) -> Result<PseudoOutcomeVector> {
    if !(p > 0.0 && p < 1.0) {
        return invalid(format!("propensity must lie in (0, 1), got {p}"));
    }
    check_lengths(dataset, preds)?;
    let y = dataset.outcome(outcome)?;
    let scale = p * (1.0 - p);
    let values = dataset
        .treatment()
        .par_iter()
        .enumerate()
        .map(|(i, &w)| {
            let wf = w as f64;
            let mu_w = if w == 1 { preds.mu1[i] } else { preds.mu0[i] };
            (wf - p) / scale * (y[i] - mu_w) + preds.mu1[i] - preds.mu0[i]
        })
        .collect();
    Ok(PseudoOutcomeVector { values, propensity: p, outcome: outcome.to_string() })
}

/// Doubly robust potential outcomes `(Y_dr(x, 1), Y_dr(x, 0))` per row, with
/// arm probabilities `e_1 = p` and `e_0 = 1 - p`.
pub fn dr_potential_outcomes(
    dataset: &RctDataset,
    outcome: &str,
    preds: &NuisancePredictions,
    p: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(p > 0.0 && p < 1.0) {
        return invalid(format!("propensity must lie in (0, 1), got {p}"));
    }
    check_lengths(dataset, preds)?;
    let y = dataset.outcome(outcome)?;
    let mut y1 = Vec::with_capacity(dataset.n());
    let mut y0 = Vec::with_capacity(dataset.n());
    for (i, &w) in dataset.treatment().iter().enumerate() {
        let (ind1, ind0) = if w == 1 { (1.0, 0.0) } else { (0.0, 1.0) };
        y1.push(preds.mu1[i] + (y[i] - preds.mu1[i]) / p * ind1);
        y0.push(preds.mu0[i] + (y[i] - preds.mu0[i]) / (1.0 - p) * ind0);
    }
    Ok((y1, y0))
}

/// Average effect from the doubly robust potential outcomes.
pub fn dr_ate(dataset: &RctDataset, outcome: &str, preds: &NuisancePredictions, p: f64) -> Result<f64> {
    let (y1, y0) = dr_potential_outcomes(dataset, outcome, preds, p)?;
    if y1.is_empty() {
        return invalid("empty dataset");
    }
    Ok(y1.iter().zip(&y0).map(|(a, b)| a - b).sum::<f64>() / y1.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrlConfig {
    pub nuisance: RegressorSpec,
    pub cate: RegressorSpec,
    /// Overrides the dataset's propensity when set.
    pub propensity: Option<f64>,
    pub seed: u64,
}

/// Served DRL model: the second-stage regressor and its provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrlModel {
    second_stage: Regressor,
    propensity: f64,
    outcome: String,
    nuisance_spec: RegressorSpec,
    cate_spec: RegressorSpec,
    seed: u64,
}

/// Everything produced while fitting, for diagnostics and tests.
#[derive(Clone, Debug)]
pub struct DrlFit {
    pub model: DrlModel,
    pub plan: CrossFitPlan,
    pub nuisance: NuisanceModels,
    pub predictions: NuisancePredictions,
    pub pseudo_outcomes: PseudoOutcomeVector,
}

pub fn fit_drl(dataset: &RctDataset, outcome: &str, cfg: &DrlConfig) -> Result<DrlFit> {
    fit_drl_with_nuisance_data(dataset, dataset, outcome, cfg)
}

/// DRL where the nuisance regressions read their labels from
/// `nuisance_data` (same rows as `dataset`, possibly corrupted labels) while
/// the pseudo-outcomes use the labels in `dataset`.
pub fn fit_drl_with_nuisance_data(
    dataset: &RctDataset,
    nuisance_data: &RctDataset,
    outcome: &str,
    cfg: &DrlConfig,
) -> Result<DrlFit> {
    let p = cfg.propensity.unwrap_or(dataset.propensity());
    check_propensity(p)?;
    if nuisance_data.n() != dataset.n() || nuisance_data.treatment() != dataset.treatment() {
        return invalid("nuisance data must share rows and treatment with the training data");
    }
    let plan = make_crossfit_plan(dataset.n(), derive_seed(cfg.seed, streams::CROSSFIT))?;
    let nuisance_spec = cfg.nuisance.reseeded(derive_seed(cfg.seed, 100));
    let nuisance = fit_nuisance(nuisance_data, outcome, &plan, &nuisance_spec)?;
    let predictions = nuisance.predict_cross_fitted(dataset.features(), &plan)?;
    let pseudo = compute_pseudo_outcomes(dataset, outcome, &predictions, p)?;
    let second_stage =
        fit_regressor(&cfg.cate.reseeded(derive_seed(cfg.seed, 200)), dataset.features(), &pseudo.values)?;
    Ok(DrlFit {
        model: DrlModel {
            second_stage,
            propensity: p,
            outcome: outcome.to_string(),
            nuisance_spec: cfg.nuisance.clone(),
            cate_spec: cfg.cate.clone(),
            seed: cfg.seed,
        },
        plan,
        nuisance,
        predictions,
        pseudo_outcomes: pseudo,
    })
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    model: T,
}

impl DrlModel {
    pub fn second_stage(&self) -> &Regressor {
        &self.second_stage
    }

    pub fn propensity(&self) -> f64 {
        self.propensity
    }

    pub fn outcome(&self) -> &str {
        &self.outcome
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&Envelope {
            format: DRL_MODEL_FORMAT.into(),
            version: DRL_MODEL_FORMAT_VERSION,
            model: self,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let env: Envelope<Self> = serde_json::from_str(text)?;
        if env.format != DRL_MODEL_FORMAT || env.version != DRL_MODEL_FORMAT_VERSION {
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

impl CateEstimator for DrlModel {
    fn n_features(&self) -> usize {
        self.second_stage.n_features()
    }

    fn estimate_cate(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.second_stage.predict(x)
    }
}
