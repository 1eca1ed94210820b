//! Meta-learner baselines built on outcome regressions.

use serde::{Deserialize, Serialize};

use crate::data::RctDataset;
use crate::drl::{fit_drl, DrlConfig, DrlModel};
use crate::error::{invalid, Result, UpliftError};
use crate::matrix::Matrix;
use crate::regress::{fit_regressor, Regressor, RegressorSpec};

/// Anything that maps feature rows to estimated treatment effects.
pub trait CateEstimator {
    fn n_features(&self) -> usize;
    fn estimate_cate(&self, x: &Matrix) -> Result<Vec<f64>>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    S,
    T,
    X,
    Drl,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::S, Method::T, Method::X, Method::Drl];

    pub fn name(self) -> &'static str {
        match self {
            Method::S => "s",
            Method::T => "t",
            Method::X => "x",
            Method::Drl => "drl",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = UpliftError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "s" | "s-learner" => Ok(Method::S),
            "t" | "t-learner" => Ok(Method::T),
            "x" | "x-learner" => Ok(Method::X),
            "drl" | "dr" => Ok(Method::Drl),
            other => invalid(format!("unknown method '{other}' (expected s, t, x or drl)")),
        }
    }
}

/// One regressor on `[x, w]`; the effect is the prediction gap between the
/// treated and untreated copies of each row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SLearner {
    model: Regressor,
    n_features: usize,
}

/// Separate regressors for the treated and control arms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TLearner {
    treated: Regressor,
    control: Regressor,
}

/// Two-stage learner: arm regressors impute individual effects, which are
/// regressed again per arm and blended with the known propensity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XLearner {
    mu_treated: Regressor,
    mu_control: Regressor,
    tau_treated: Regressor,
    tau_control: Regressor,
    propensity: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CateModel {
    S(SLearner),
    T(TLearner),
    X(XLearner),
    Drl(DrlModel),
}

/// Revenue-gain and engagement-cost models scoring the same users.
#[derive(Clone, Debug, PartialEq)]
pub struct CatePair {
    pub revenue_model: CateModel,
    pub engagement_model: CateModel,
}

impl CatePair {
    pub fn new(revenue_model: CateModel, engagement_model: CateModel) -> Result<Self> {
        if revenue_model.n_features() != engagement_model.n_features() {
            return invalid(format!(
                "revenue model takes {} features, engagement model {}",
                revenue_model.n_features(),
                engagement_model.n_features()
            ));
        }
        Ok(Self { revenue_model, engagement_model })
    }

    pub fn estimate(&self, x: &Matrix) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((self.revenue_model.estimate_cate(x)?, self.engagement_model.estimate_cate(x)?))
    }
}

fn arm_data(dataset: &RctDataset, y: &[f64], arm: u8) -> Result<(Matrix, Vec<f64>)> {
    let idx = dataset.arm_indices(arm);
    if idx.is_empty() {
        let name = if arm == 1 { "treated" } else { "control" };
        return invalid(format!("the {name} arm has no rows"));
    }
    let yy = idx.iter().map(|&i| y[i]).collect();
    Ok((dataset.features().select_rows(&idx), yy))
}

pub fn fit_s_learner(dataset: &RctDataset, outcome: &str, spec: &RegressorSpec) -> Result<CateModel> {
    let y = dataset.outcome(outcome)?;
    if dataset.n() == 0 {
        return invalid("empty dataset");
    }
    let w: Vec<f64> = dataset.treatment().iter().map(|&t| t as f64).collect();
    let xw = dataset.features().with_column(&w)?;
    let model = fit_regressor(spec, &xw, y)?;
    Ok(CateModel::S(SLearner { model, n_features: dataset.d() }))
}

pub fn fit_t_learner(dataset: &RctDataset, outcome: &str, spec: &RegressorSpec) -> Result<CateModel> {
    let y = dataset.outcome(outcome)?;
    let (x1, y1) = arm_data(dataset, y, 1)?;
    let (x0, y0) = arm_data(dataset, y, 0)?;
    let (treated, control) = rayon::join(
        || fit_regressor(&spec.reseeded(1), &x1, &y1),
        || fit_regressor(&spec.reseeded(2), &x0, &y0),
    );
    Ok(CateModel::T(TLearner { treated: treated?, control: control? }))
}

pub fn fit_x_learner(dataset: &RctDataset, outcome: &str, spec: &RegressorSpec) -> Result<CateModel> {
    let p = dataset.propensity();
    let y = dataset.outcome(outcome)?;
    let (x1, y1) = arm_data(dataset, y, 1)?;
    let (x0, y0) = arm_data(dataset, y, 0)?;
    let (mu1, mu0) = rayon::join(
        || fit_regressor(&spec.reseeded(1), &x1, &y1),
        || fit_regressor(&spec.reseeded(2), &x0, &y0),
    );
    let (mu_treated, mu_control) = (mu1?, mu0?);
    let d1: Vec<f64> = y1.iter().zip(mu_control.predict(&x1)?).map(|(y, m)| y - m).collect();
    let d0: Vec<f64> = mu_treated.predict(&x0)?.iter().zip(&y0).map(|(m, y)| m - y).collect();
    let (t1, t0) = rayon::join(
        || fit_regressor(&spec.reseeded(3), &x1, &d1),
        || fit_regressor(&spec.reseeded(4), &x0, &d0),
    );
    Ok(CateModel::X(XLearner { mu_treated, mu_control, tau_treated: t1?, tau_control: t0?, propensity: p }))
}

/// Fits any method with one shared regressor spec (DRL uses it for both
/// stages).
pub fn fit_cate_model(
    method: Method,
    dataset: &RctDataset,
    outcome: &str,
    spec: &RegressorSpec,
    seed: u64,
) -> Result<CateModel> {
    match method {
        Method::S => fit_s_learner(dataset, outcome, &spec.reseeded(seed)),
        Method::T => fit_t_learner(dataset, outcome, &spec.reseeded(seed)),
        Method::X => fit_x_learner(dataset, outcome, &spec.reseeded(seed)),
        Method::Drl => {
            let cfg = DrlConfig { nuisance: spec.clone(), cate: spec.clone(), propensity: None, seed };
            Ok(CateModel::Drl(fit_drl(dataset, outcome, &cfg)?.model))
        }
    }
}

impl SLearner {
    pub fn regressor(&self) -> &Regressor {
        &self.model
    }
}

impl TLearner {
    pub fn arms(&self) -> (&Regressor, &Regressor) {
        (&self.treated, &self.control)
    }
}

impl XLearner {
    pub fn first_stage(&self) -> (&Regressor, &Regressor) {
        (&self.mu_treated, &self.mu_control)
    }

    pub fn second_stage(&self) -> (&Regressor, &Regressor) {
        (&self.tau_treated, &self.tau_control)
    }

    pub fn propensity(&self) -> f64 {
        self.propensity
    }
}

impl CateEstimator for CateModel {
    fn n_features(&self) -> usize {
        match self {
            CateModel::S(m) => m.n_features,
            CateModel::T(m) => m.treated.n_features(),
            CateModel::X(m) => m.tau_treated.n_features(),
            CateModel::Drl(m) => m.n_features(),
        }
    }

    fn estimate_cate(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.check_cols(self.n_features())?;
        match self {
            CateModel::S(m) => {
                let on = m.model.predict(&x.with_constant_column(1.0))?;
                let off = m.model.predict(&x.with_constant_column(0.0))?;
                Ok(on.iter().zip(&off).map(|(a, b)| a - b).collect())
            }
            CateModel::T(m) => {
                let a = m.treated.predict(x)?;
                let b = m.control.predict(x)?;
                Ok(a.iter().zip(&b).map(|(a, b)| a - b).collect())
            }
            CateModel::X(m) => {
                let t1 = m.tau_treated.predict(x)?;
                let t0 = m.tau_control.predict(x)?;
                let p = m.propensity;
                Ok(t1.iter().zip(&t0).map(|(a, b)| (1.0 - p) * a + p * b).collect())
            }
            CateModel::Drl(m) => m.estimate_cate(x),
        }
    }
}

impl CateModel {
    pub fn method(&self) -> Method {
        match self {
            CateModel::S(_) => Method::S,
            CateModel::T(_) => Method::T,
            CateModel::X(_) => Method::X,
            CateModel::Drl(_) => Method::Drl,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic_rct, Outcome};
    use crate::regress::ForestConfig;

    fn cfg(trees: usize) -> RegressorSpec {
        ForestConfig { n_trees: trees, min_samples_leaf: 20, seed: 1, ..Default::default() }.into()
    }

    #[test]
    fn method_parsing() {
        assert_eq!("DRL".parse::<Method>().unwrap(), Method::Drl);
        assert_eq!("t".parse::<Method>().unwrap(), Method::T);
        assert!("r".parse::<Method>().is_err());
    }

    #[test]
    fn missing_outcome_and_empty_arm_rejected() {
        let (ds, _) = generate_synthetic_rct(200, 3, 0.5, 1.0, 1).unwrap();
        assert!(fit_s_learner(&ds, "nope", &cfg(2)).is_err());
        let treated = ds.select_rows(&ds.arm_indices(1));
        assert!(fit_t_learner(&treated, "revenue", &cfg(2)).is_err());
        assert!(fit_x_learner(&treated, "revenue", &cfg(2)).is_err());
    }

    #[test]
    fn constant_regressor_gives_zero_effect() {
        let (ds, _) = generate_synthetic_rct(200, 3, 0.5, 1.0, 1).unwrap();
        for m in [
            fit_s_learner(&ds, "revenue", &RegressorSpec::zero()).unwrap(),
            fit_t_learner(&ds, "revenue", &RegressorSpec::zero()).unwrap(),
            fit_x_learner(&ds, "revenue", &RegressorSpec::zero()).unwrap(),
        ] {
            assert!(m.estimate_cate(ds.features()).unwrap().iter().all(|&t| t == 0.0));
        }
    }

    #[test]
    fn identical_arms_give_near_zero_effect() {
        // every treated row has an identical control twin
        let (base, _) = generate_synthetic_rct(1000, 3, 0.5, 1.0, 2).unwrap();
        let n = base.n();
        let mut rows = Vec::with_capacity(2 * n);
        let mut w = Vec::with_capacity(2 * n);
        let mut y = Vec::with_capacity(2 * n);
        let yb = base.outcome("revenue").unwrap();
        for arm in [0u8, 1] {
            for i in 0..n {
                rows.push(base.features().row(i).to_vec());
                w.push(arm);
                y.push(yb[i]);
            }
        }
        let ds = RctDataset::from_trial(
            Matrix::from_rows(&rows).unwrap(),
            base.feature_names().to_vec(),
            w,
            vec![Outcome::new("revenue", y)],
        )
        .unwrap();
        let spec: RegressorSpec =
            ForestConfig { n_trees: 5, min_samples_leaf: 20, bootstrap: false, feature_subsample: 1.0, ..Default::default() }
                .into();
        let t = fit_t_learner(&ds, "revenue", &spec).unwrap();
        let tau = t.estimate_cate(base.features()).unwrap();
        assert!(tau.iter().all(|v| v.abs() < 1e-9), "{:?}", &tau[..5]);
        let s = fit_s_learner(&ds, "revenue", &spec).unwrap();
        let tau = s.estimate_cate(base.features()).unwrap();
        assert!(tau.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn x_learner_symmetric_weighting_at_half() {
        let (ds, _) = generate_synthetic_rct(400, 3, 0.5, 1.0, 3).unwrap();
        let ds = ds.with_propensity(0.5).unwrap();
        let CateModel::X(m) = fit_x_learner(&ds, "revenue", &cfg(3)).unwrap() else { unreachable!() };
        let (t1, t0) = m.second_stage();
        let a = t1.predict(ds.features()).unwrap();
        let b = t0.predict(ds.features()).unwrap();
        let est = CateModel::X(m.clone()).estimate_cate(ds.features()).unwrap();
        for i in 0..ds.n() {
            assert_eq!(est[i], (a[i] + b[i]) / 2.0);
        }
    }

    #[test]
    fn empty_batch_and_duplicates() {
        let (ds, _) = generate_synthetic_rct(300, 3, 0.5, 1.0, 4).unwrap();
        let m = fit_t_learner(&ds, "revenue", &cfg(3)).unwrap();
        assert!(m.estimate_cate(&Matrix::zeros(0, 3)).unwrap().is_empty());
        let dup = ds.features().select_rows(&[5, 5, 7]);
        let t = m.estimate_cate(&dup).unwrap();
        assert_eq!(t[0], t[1]);
        assert!(m.estimate_cate(&Matrix::zeros(1, 4)).is_err());
    }
}
