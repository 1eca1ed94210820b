//! The studies behind each subcommand, as functions from a configuration to
//! result tables. Writing files is left to [`crate::commands`].

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use uplift_core::data::{
    dgp, generate_synthetic_binary_rct, generate_synthetic_rct, inject_label_bias, load_criteo_csv_with,
    split_train_test, BiasInjectionSpec, CriteoLoadOptions, RctDataset, SyntheticGroundTruth,
};
use uplift_core::drl::{fit_drl_with_nuisance_data, DrlConfig, DrlModel};
use uplift_core::eval::{cost_curve, rmse, uplift_curve, CurveReport};
use uplift_core::learners::{fit_cate_model, CateEstimator, CateModel, Method};
use uplift_core::policy::{
    breakpoint_lambda_grid, cluster_scores, default_lambda_grid, dual_objective_scores, greedy_ratio_allocate,
    lagrangian_scores, sweep_lambda_for_budget, AllocationProblem, AllocationResult, LambdaSweep,
    DEFAULT_GRID_POINTS,
};
use uplift_core::regress::RegressorSpec;
use uplift_core::rng::{derive_seed, stream_rng, streams};

use crate::config::{DataSource, ExperimentConfig, LambdaGrid};
use crate::error::{CliError, Result, StageExt};

/// Model seed streams, so that each outcome's models get their own draws.
const REVENUE_STREAM: u64 = 1;
const ENGAGEMENT_STREAM: u64 = 2;
const SINGLE_STREAM: u64 = 3;
const BIAS_STREAM: u64 = 4;
const CLUSTER_STREAM: u64 = 5;
const RANDOM_SCORE_STREAM: u64 = 6;

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation; 0 for fewer than two values.
pub fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

#[derive(Clone, Debug)]
pub struct Split {
    pub train: RctDataset,
    pub test: RctDataset,
}

/// Loads the CRITEO file once; synthetic sources are generated per replicate.
pub fn load_base(cfg: &ExperimentConfig) -> Result<Option<RctDataset>> {
    if cfg.data.source != DataSource::Criteo {
        return Ok(None);
    }
    let path = cfg.data.path.as_ref().ok_or_else(|| CliError::Config("[data] criteo source needs a path".into()))?;
    let opts = CriteoLoadOptions { max_rows: cfg.data.max_rows, seed: cfg.seed };
    load_criteo_csv_with(path, &cfg.data.outcome, opts).stage("load").map(Some)
}

/// Full dataset of `n` rows for one replicate seed.
pub fn generate(cfg: &ExperimentConfig, base: Option<&RctDataset>, n: usize, seed: u64) -> Result<RctDataset> {
    let d = &cfg.data;
    match d.source {
        DataSource::Synthetic => {
            let (mut ds, _) = generate_synthetic_rct(n, d.d, d.propensity, d.noise_scale, seed).stage("generate")?;
            if d.revenue != "revenue" || d.engagement != "engagement" {
                let r = ds.outcome("revenue").stage("generate")?.to_vec();
                let e = ds.outcome("engagement").stage("generate")?.to_vec();
                ds = RctDataset::new(
                    ds.features().clone(),
                    ds.feature_names().to_vec(),
                    ds.treatment().to_vec(),
                    vec![
                        uplift_core::data::Outcome::new(d.revenue.clone(), r),
                        uplift_core::data::Outcome::new(d.engagement.clone(), e),
                    ],
                    ds.propensity(),
                )
                .stage("generate")?;
            }
            Ok(ds)
        }
        DataSource::SyntheticBinary => {
            let (ds, _) = generate_synthetic_binary_rct(n, d.d, d.propensity, seed).stage("generate")?;
            if d.outcome == "visit" {
                Ok(ds)
            } else {
                let v = ds.outcome("visit").stage("generate")?.to_vec();
                RctDataset::new(
                    ds.features().clone(),
                    ds.feature_names().to_vec(),
                    ds.treatment().to_vec(),
                    vec![uplift_core::data::Outcome::new(d.outcome.clone(), v)],
                    ds.propensity(),
                )
                .stage("generate")
            }
        }
        DataSource::Criteo => {
            let base = base.ok_or_else(|| CliError::Config("criteo data not loaded".into()))?;
            Ok(base.clone())
        }
    }
}

/// Synthetic data with its ground truth, for `gen-data`.
pub fn generate_with_truth(cfg: &ExperimentConfig) -> Result<(RctDataset, SyntheticGroundTruth)> {
    let d = &cfg.data;
    match d.source {
        DataSource::Synthetic => {
            generate_synthetic_rct(d.n, d.d, d.propensity, d.noise_scale, cfg.seed).stage("generate")
        }
        DataSource::SyntheticBinary => generate_synthetic_binary_rct(d.n, d.d, d.propensity, cfg.seed).stage("generate"),
        DataSource::Criteo => Err(CliError::Config("gen-data needs a synthetic data source".into())),
    }
}

pub fn prepare(cfg: &ExperimentConfig, base: Option<&RctDataset>, seed: u64) -> Result<Split> {
    let full = generate(cfg, base, cfg.data.n, seed)?;
    let (train, test) = split_train_test(&full, cfg.train_fraction, seed).stage("split")?;
    Ok(Split { train, test })
}

fn drl_config(cfg: &ExperimentConfig, nuisance: RegressorSpec, propensity: Option<f64>, seed: u64) -> DrlConfig {
    DrlConfig { nuisance, cate: cfg.cate_spec(), propensity, seed }
}

/// Fits `method` on one outcome. DRL nuisances read their labels from
/// `nuisance_data` when given.
pub fn fit_method(
    cfg: &ExperimentConfig,
    method: Method,
    train: &RctDataset,
    nuisance_data: Option<&RctDataset>,
    outcome: &str,
    seed: u64,
) -> Result<CateModel> {
    match method {
        Method::Drl => {
            let dc = drl_config(cfg, cfg.nuisance_spec(), None, seed);
            let fit = fit_drl_with_nuisance_data(train, nuisance_data.unwrap_or(train), outcome, &dc).stage("train")?;
            Ok(CateModel::Drl(fit.model))
        }
        m => fit_cate_model(m, nuisance_data.unwrap_or(train), outcome, &cfg.forest_spec(), seed).stage("train"),
    }
}

/// Lagrangian scores, optionally collapsed to cluster means.
pub fn dual_scores(cfg: &ExperimentConfig, tau_r: &[f64], tau_e: &[f64], seed: u64) -> Result<Vec<f64>> {
    let s = dual_objective_scores(tau_r, tau_e, cfg.scoring.lambda).stage("score")?;
    match cfg.scoring.clusters {
        Some(k) => cluster_scores(&s, k, derive_seed(seed, CLUSTER_STREAM)).stage("score"),
        None => Ok(s),
    }
}

/// Test-set evaluation of one method: AUCC for dual-outcome data, AUUC
/// otherwise.
#[derive(Clone, Debug)]
pub struct MethodRun {
    pub metric: f64,
    pub curve: CurveReport,
    /// RMSE of the effect estimates against the known effects, per outcome.
    pub rmse: Vec<f64>,
}

fn true_effects(cfg: &ExperimentConfig, test: &RctDataset, outcome: &str) -> Option<Vec<f64>> {
    let f: fn(&[f64]) -> f64 = match cfg.data.source {
        DataSource::Synthetic if outcome == cfg.data.revenue => dgp::tau_revenue,
        DataSource::Synthetic if outcome == cfg.data.engagement => dgp::tau_engagement,
        DataSource::SyntheticBinary => dgp::tau_visit,
        _ => return None,
    };
    Some(test.features().rows().map(f).collect())
}

pub fn run_method(
    cfg: &ExperimentConfig,
    method: Method,
    split: &Split,
    nuisance_data: Option<&RctDataset>,
    seed: u64,
) -> Result<MethodRun> {
    let test = &split.test;
    let mut rmse_v = Vec::new();
    let mut estimate = |outcome: &str, stream: u64| -> Result<Vec<f64>> {
        let model = fit_method(cfg, method, &split.train, nuisance_data, outcome, derive_seed(seed, stream))?;
        let tau = model.estimate_cate(test.features()).stage("predict")?;
        if let Some(truth) = true_effects(cfg, test, outcome) {
            rmse_v.push(rmse(&tau, &truth).stage("evaluate")?);
        }
        Ok(tau)
    };
    if cfg.data.is_dual() {
        let tr = estimate(&cfg.data.revenue, REVENUE_STREAM)?;
        let te = estimate(&cfg.data.engagement, ENGAGEMENT_STREAM)?;
        let scores = dual_scores(cfg, &tr, &te, seed)?;
        let curve = cost_curve(&scores, test, &cfg.data.revenue, &cfg.data.engagement).stage("evaluate")?;
        Ok(MethodRun { metric: curve.area, curve, rmse: rmse_v })
    } else {
        let outcome = cfg.data.single_outcome().to_string();
        let tau = estimate(&outcome, SINGLE_STREAM)?;
        let curve = uplift_curve(&tau, test, &outcome).stage("evaluate")?;
        Ok(MethodRun { metric: curve.area, curve, rmse: rmse_v })
    }
}

pub fn metric_name(cfg: &ExperimentConfig) -> &'static str {
    if cfg.data.is_dual() {
        "aucc"
    } else {
        "auuc"
    }
}

fn replicate_seeds(cfg: &ExperimentConfig) -> Vec<u64> {
    (0..cfg.replicates).map(|r| cfg.replicate_seed(r)).collect()
}

#[derive(Clone, Debug)]
pub struct BenchmarkReport {
    pub metric: &'static str,
    pub seeds: Vec<u64>,
    /// Per method, one run per replicate.
    pub runs: Vec<(Method, Vec<MethodRun>)>,
}

impl BenchmarkReport {
    pub fn values(&self, method: Method) -> Option<Vec<f64>> {
        self.runs.iter().find(|(m, _)| *m == method).map(|(_, r)| r.iter().map(|x| x.metric).collect())
    }
}

pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<BenchmarkReport> {
    if cfg.methods.is_empty() {
        return Err(CliError::Config("method list is empty".into()));
    }
    let base = load_base(cfg)?;
    let seeds = replicate_seeds(cfg);
    let per_rep: Vec<Vec<MethodRun>> = seeds
        .par_iter()
        .map(|&seed| {
            let split = prepare(cfg, base.as_ref(), seed)?;
            cfg.methods.iter().map(|&m| run_method(cfg, m, &split, None, seed)).collect()
        })
        .collect::<Result<_>>()?;
    let runs = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(k, &m)| (m, per_rep.iter().map(|r| r[k].clone()).collect()))
        .collect();
    Ok(BenchmarkReport { metric: metric_name(cfg), seeds, runs })
}

/// Order-independent fingerprint of a dataset's labels and treatment.
pub fn label_checksum(ds: &RctDataset) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |v: u64| {
        h ^= v;
        h = h.wrapping_mul(0x0100_0000_01b3);
    };
    for &w in ds.treatment() {
        feed(w as u64);
    }
    for o in ds.outcomes() {
        for v in &o.values {
            feed(v.to_bits());
        }
    }
    h
}

fn bias_spec(cfg: &ExperimentConfig, train: &RctDataset, beta: f64, seed: u64) -> Result<BiasInjectionSpec> {
    if cfg.bias.feature >= train.d() {
        return Err(CliError::Config(format!(
            "[bias] feature {} out of range for {} features",
            cfg.bias.feature,
            train.d()
        )));
    }
    let w = BiasInjectionSpec::unit_weights(train.d(), cfg.bias.feature);
    let alpha = cfg.bias.alpha.unwrap_or_else(|| BiasInjectionSpec::median_alpha(train, &w));
    Ok(BiasInjectionSpec {
        f0_weights: w,
        alpha,
        beta,
        target_outcome: cfg.data.single_outcome().to_string(),
        seed: derive_seed(seed, BIAS_STREAM),
    })
}

fn biased_training(cfg: &ExperimentConfig, train: &RctDataset, beta: f64, seed: u64) -> Result<RctDataset> {
    inject_label_bias(train, &bias_spec(cfg, train, beta, seed)?).stage("bias")
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub key: f64,
    pub method: Method,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct BiasSweepReport {
    pub seeds: Vec<u64>,
    pub rows: Vec<SweepRow>,
    /// Test-label checksums before and after each replicate's sweep.
    pub test_checksums: Vec<(u64, u64)>,
}

pub fn run_bias_sweep(cfg: &ExperimentConfig) -> Result<BiasSweepReport> {
    if cfg.sweep_methods.is_empty() || cfg.bias.betas.is_empty() {
        return Err(CliError::Config("bias sweep needs methods and betas".into()));
    }
    let base = load_base(cfg)?;
    let seeds = replicate_seeds(cfg);
    let cells: Vec<(Vec<Vec<f64>>, (u64, u64))> = seeds
        .par_iter()
        .map(|&seed| {
            let split = prepare(cfg, base.as_ref(), seed)?;
            let before = label_checksum(&split.test);
            let per_beta: Vec<Vec<f64>> = cfg
                .bias
                .betas
                .par_iter()
                .map(|&beta| {
                    let biased = biased_training(cfg, &split.train, beta, seed)?;
                    cfg.sweep_methods
                        .iter()
                        .map(|&m| run_method(cfg, m, &split, Some(&biased), seed).map(|r| r.metric))
                        .collect()
                })
                .collect::<Result<_>>()?;
            let after = label_checksum(&split.test);
            if before != after {
                return Err(CliError::Check { stage: "evaluate", message: "test labels changed during the sweep".into() });
            }
            Ok((per_beta, (before, after)))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (b, &beta) in cfg.bias.betas.iter().enumerate() {
        for (k, &m) in cfg.sweep_methods.iter().enumerate() {
            rows.push(SweepRow { key: beta, method: m, values: cells.iter().map(|c| c.0[b][k]).collect() });
        }
    }
    Ok(BiasSweepReport { seeds, rows, test_checksums: cells.into_iter().map(|c| c.1).collect() })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropensityRow {
    pub nuisance_beta: f64,
    pub offset: f64,
    /// Propensity plugged in, per replicate.
    pub propensity: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct PropensitySweepReport {
    pub seeds: Vec<u64>,
    pub rows: Vec<PropensityRow>,
}

impl PropensitySweepReport {
    /// `(AUUC(0) - AUUC(offset)) / AUUC(0)` on replicate means, or `None`
    /// without a zero offset in the grid.
    pub fn relative_degradation(&self, nuisance_beta: f64, offset: f64) -> Option<f64> {
        let find = |o: f64| {
            self.rows.iter().find(|r| r.nuisance_beta == nuisance_beta && r.offset == o).map(|r| mean(&r.values))
        };
        let base = find(0.0)?;
        Some((base - find(offset)?) / base)
    }
}

pub fn run_propensity_sweep(cfg: &ExperimentConfig) -> Result<PropensitySweepReport> {
    let ps = &cfg.propensity_sweep;
    if ps.offsets.is_empty() || ps.nuisance_betas.is_empty() {
        return Err(CliError::Config("propensity sweep needs offsets and nuisance_betas".into()));
    }
    let base = load_base(cfg)?;
    let seeds = replicate_seeds(cfg);
    let outcome = cfg.data.single_outcome().to_string();
    let cells: Vec<Vec<(f64, f64)>> = seeds
        .par_iter()
        .map(|&seed| {
            let split = prepare(cfg, base.as_ref(), seed)?;
            let nuisance_sets: Vec<RctDataset> = ps
                .nuisance_betas
                .iter()
                .map(|&b| if b == 0.0 { Ok(split.train.clone()) } else { biased_training(cfg, &split.train, b, seed) })
                .collect::<Result<_>>()?;
            let grid: Vec<(usize, f64)> =
                (0..ps.nuisance_betas.len()).flat_map(|b| ps.offsets.iter().map(move |&o| (b, o))).collect();
            grid.par_iter()
                .map(|&(b, offset)| {
                    let p = (split.train.propensity() + offset).clamp(0.01, 0.99);
                    let dc = drl_config(cfg, cfg.nuisance_spec(), Some(p), derive_seed(seed, SINGLE_STREAM));
                    let model = fit_drl_with_nuisance_data(&split.train, &nuisance_sets[b], &outcome, &dc)
                        .stage("train")?
                        .model;
                    let tau = model.estimate_cate(split.test.features()).stage("predict")?;
                    let a = uplift_curve(&tau, &split.test, &outcome).stage("evaluate")?.area;
                    Ok((p, a))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut k = 0;
    for &nb in &ps.nuisance_betas {
        for &offset in &ps.offsets {
            rows.push(PropensityRow {
                nuisance_beta: nb,
                offset,
                propensity: cells.iter().map(|c| c[k].0).collect(),
                values: cells.iter().map(|c| c[k].1).collect(),
            });
            k += 1;
        }
    }
    Ok(PropensitySweepReport { seeds, rows })
}

#[derive(Clone, Debug)]
pub struct AblationReport {
    pub seeds: Vec<u64>,
    /// `(nuisance name, AUCC per replicate)`; the last row is the
    /// random-score baseline.
    pub rows: Vec<(String, Vec<f64>)>,
    /// Serialized revenue and engagement models of the first replicate.
    pub models: Vec<(String, DrlModel, DrlModel)>,
}

pub fn run_outcome_ablation(cfg: &ExperimentConfig) -> Result<AblationReport> {
    if !cfg.data.is_dual() {
        return Err(CliError::Config("outcome ablation needs the dual-outcome synthetic source".into()));
    }
    let variants: [(&str, RegressorSpec); 2] = [("constant", RegressorSpec::zero()), ("forest", cfg.nuisance_spec())];
    let seeds = replicate_seeds(cfg);
    type Cell = (Vec<f64>, Vec<(DrlModel, DrlModel)>, f64);
    let cells: Vec<Cell> = seeds
        .par_iter()
        .map(|&seed| {
            let split = prepare(cfg, None, seed)?;
            let (rev, eng) = (&cfg.data.revenue, &cfg.data.engagement);
            let mut aucc = Vec::new();
            let mut models = Vec::new();
            for (_, spec) in &variants {
                let fit = |outcome: &str, stream: u64| -> Result<DrlModel> {
                    let dc = drl_config(cfg, spec.clone(), None, derive_seed(seed, stream));
                    Ok(fit_drl_with_nuisance_data(&split.train, &split.train, outcome, &dc).stage("train")?.model)
                };
                let mr = fit(rev, REVENUE_STREAM)?;
                let me = fit(eng, ENGAGEMENT_STREAM)?;
                let tr = mr.estimate_cate(split.test.features()).stage("predict")?;
                let te = me.estimate_cate(split.test.features()).stage("predict")?;
                let scores = dual_scores(cfg, &tr, &te, seed)?;
                aucc.push(cost_curve(&scores, &split.test, rev, eng).stage("evaluate")?.area);
                models.push((mr, me));
            }
            let mut rng = stream_rng(derive_seed(seed, RANDOM_SCORE_STREAM), streams::SUBSAMPLE);
            let random: Vec<f64> = (0..split.test.n()).map(|_| rng.random::<f64>()).collect();
            let base = cost_curve(&random, &split.test, rev, eng).stage("evaluate")?.area;
            Ok((aucc, models, base))
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<(String, Vec<f64>)> = variants
        .iter()
        .enumerate()
        .map(|(k, (name, _))| (name.to_string(), cells.iter().map(|c| c.0[k]).collect()))
        .collect();
    rows.push(("random_scores".into(), cells.iter().map(|c| c.2).collect()));
    let models = variants
        .iter()
        .zip(cells[0].1.iter().cloned())
        .map(|((name, _), (a, b))| (name.to_string(), a, b))
        .collect();
    Ok(AblationReport { seeds, rows, models })
}

#[derive(Clone, Debug)]
pub struct ScalingReport {
    pub seeds: Vec<u64>,
    pub metric: &'static str,
    /// `key` is the training size.
    pub rows: Vec<SweepRow>,
}

/// Each replicate draws one pool, holds out a fixed test set and trains on
/// nested prefixes of the remaining rows.
pub fn run_scaling(cfg: &ExperimentConfig) -> Result<ScalingReport> {
    let sc = &cfg.scaling;
    if sc.sizes.is_empty() || cfg.sweep_methods.is_empty() {
        return Err(CliError::Config("scaling needs sizes and methods".into()));
    }
    if sc.sizes.iter().any(|&s| s < 10) || sc.test_size < 10 {
        return Err(CliError::Config("[scaling] sizes and test_size must be at least 10".into()));
    }
    let max = *sc.sizes.iter().max().unwrap();
    let base = load_base(cfg)?;
    let seeds = replicate_seeds(cfg);
    let cells: Vec<Vec<Vec<f64>>> = seeds
        .par_iter()
        .map(|&seed| {
            let full = generate(cfg, base.as_ref(), max + sc.test_size, seed)?;
            if full.n() < max + sc.test_size {
                return Err(CliError::Config(format!(
                    "[scaling] needs {} rows, data has {}",
                    max + sc.test_size,
                    full.n()
                )));
            }
            let mut perm: Vec<usize> = (0..full.n()).collect();
            perm.shuffle(&mut stream_rng(seed, streams::SPLIT));
            let mut test_idx = perm[..sc.test_size].to_vec();
            test_idx.sort_unstable();
            let test = full.select_rows(&test_idx);
            sc.sizes
                .par_iter()
                .map(|&size| {
                    let mut idx = perm[sc.test_size..sc.test_size + size].to_vec();
                    idx.sort_unstable();
                    let split = Split { train: full.select_rows(&idx), test: test.clone() };
                    cfg.sweep_methods.iter().map(|&m| run_method(cfg, m, &split, None, seed).map(|r| r.metric)).collect()
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (s, &size) in sc.sizes.iter().enumerate() {
        for (k, &m) in cfg.sweep_methods.iter().enumerate() {
            rows.push(SweepRow { key: size as f64, method: m, values: cells.iter().map(|c| c[s][k]).collect() });
        }
    }
    Ok(ScalingReport { seeds, metric: metric_name(cfg), rows })
}

#[derive(Clone, Debug)]
pub struct AllocationReport {
    pub problem: AllocationProblem,
    pub greedy: AllocationResult,
    pub sweep: LambdaSweep,
    /// Lagrangian scores at the chosen multiplier.
    pub scores: Vec<f64>,
    /// AUCC of the scores on the test set.
    pub aucc: f64,
}

pub fn run_allocate(cfg: &ExperimentConfig) -> Result<AllocationReport> {
    if !cfg.data.is_dual() {
        return Err(CliError::Config("allocate needs the dual-outcome synthetic source".into()));
    }
    let seed = cfg.seed;
    let split = prepare(cfg, None, seed)?;
    let m = cfg.allocate.method;
    let estimate = |outcome: &str, stream: u64| -> Result<Vec<f64>> {
        fit_method(cfg, m, &split.train, None, outcome, derive_seed(seed, stream))?
            .estimate_cate(split.test.features())
            .stage("predict")
    };
    let tr = estimate(&cfg.data.revenue, REVENUE_STREAM)?;
    let te = estimate(&cfg.data.engagement, ENGAGEMENT_STREAM)?;
    let unit = AllocationProblem::new(tr.clone(), te.clone(), 1.0).stage("allocate")?;
    let total_cost: f64 = (0..unit.n()).map(|i| unit.cost(i)).sum();
    if !(total_cost > 0.0) {
        return Err(CliError::Check { stage: "allocate", message: "estimated total cost is not positive".into() });
    }
    let problem = AllocationProblem::new(tr, te, cfg.allocate.budget_fraction * total_cost).stage("allocate")?;
    let greedy = greedy_ratio_allocate(&problem);
    let grid = match cfg.allocate.grid {
        LambdaGrid::Breakpoints => breakpoint_lambda_grid(&problem),
        LambdaGrid::LogSpaced => default_lambda_grid(&problem, DEFAULT_GRID_POINTS),
    };
    let sweep = sweep_lambda_for_budget(&problem, &grid).stage("allocate")?;
    let lambda = sweep.lambda.unwrap_or(*grid.last().unwrap());
    let scores = lagrangian_scores(problem.tau_r(), problem.tau_e(), lambda).stage("allocate")?;
    let aucc = cost_curve(&scores, &split.test, &cfg.data.revenue, &cfg.data.engagement).stage("evaluate")?.area;
    Ok(AllocationReport { problem, greedy, sweep, scores, aucc })
}
