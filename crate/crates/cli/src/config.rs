//! Experiment configuration, read from a TOML file.
//!
//! Every field has a default, so an empty file is a valid configuration for
//! the synthetic dual-outcome benchmark. See `configs/` for examples.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use uplift_core::learners::Method;
use uplift_core::regress::{ForestConfig, RegressorSpec};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// Continuous revenue and engagement-cost outcomes.
    Synthetic,
    /// One binary outcome, `visit`.
    SyntheticBinary,
    Criteo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    pub n: usize,
    pub d: usize,
    pub propensity: f64,
    pub noise_scale: f64,
    pub path: Option<PathBuf>,
    /// Outcome used by single-outcome commands.
    pub outcome: String,
    pub revenue: String,
    pub engagement: String,
    /// Reservoir subsample size for CRITEO files.
    pub max_rows: Option<usize>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic,
            n: 50_000,
            d: 6,
            propensity: 0.5,
            noise_scale: 3.0,
            path: None,
            outcome: "visit".into(),
            revenue: "revenue".into(),
            engagement: "engagement".into(),
            max_rows: Some(1_000_000),
        }
    }
}

impl DataConfig {
    pub fn is_dual(&self) -> bool {
        self.source == DataSource::Synthetic
    }

    /// Outcome ranked by single-outcome commands.
    pub fn single_outcome(&self) -> &str {
        if self.is_dual() {
            &self.revenue
        } else {
            &self.outcome
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiasConfig {
    pub betas: Vec<f64>,
    /// Feature with weight 1 in the scalarizer; all others get 0.
    pub feature: usize,
    /// Subset threshold; the training-set median of the feature when unset.
    pub alpha: Option<f64>,
}

impl Default for BiasConfig {
    fn default() -> Self {
        Self { betas: vec![0.0, 0.25, 0.5, 0.75, 1.0], feature: 0, alpha: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropensityConfig {
    pub offsets: Vec<f64>,
    /// Label-bias levels of the nuisance training data, one sweep each.
    pub nuisance_betas: Vec<f64>,
}

impl Default for PropensityConfig {
    fn default() -> Self {
        Self { offsets: vec![-0.1, -0.05, 0.0, 0.05, 0.1], nuisance_betas: vec![0.0, 1.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringConfig {
    /// Lagrange multiplier; `sum(tau_r) / sum(tau_e)` when unset.
    pub lambda: Option<f64>,
    /// Replace scores by their k-means cluster means when set.
    pub clusters: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingConfig {
    /// Training-set sizes.
    pub sizes: Vec<usize>,
    pub test_size: usize,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self { sizes: vec![5_000, 10_000, 20_000, 40_000], test_size: 20_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaGrid {
    /// 50 log-spaced points over the ratio quantile range, plus 0.
    LogSpaced,
    /// Every distinct breakpoint of the ratio ordering.
    Breakpoints,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AllocateConfig {
    pub method: Method,
    /// Budget as a fraction of the total estimated cost.
    pub budget_fraction: f64,
    pub grid: LambdaGrid,
}

impl Default for AllocateConfig {
    fn default() -> Self {
        Self { method: Method::Drl, budget_fraction: 0.3, grid: LambdaGrid::LogSpaced }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub replicates: usize,
    pub train_fraction: f64,
    /// Methods compared by `benchmark`.
    pub methods: Vec<Method>,
    /// Methods compared by `bias-sweep` and `scaling`.
    pub sweep_methods: Vec<Method>,
    pub data: DataConfig,
    pub forest: ForestConfig,
    /// DRL nuisance forest; `forest` when unset.
    pub nuisance: Option<ForestConfig>,
    /// DRL second-stage forest; `forest` when unset.
    pub cate: Option<ForestConfig>,
    pub bias: BiasConfig,
    pub propensity_sweep: PropensityConfig,
    pub scoring: ScoringConfig,
    pub scaling: ScalingConfig,
    pub allocate: AllocateConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("runs/default"),
            replicates: 1,
            train_fraction: 0.8,
            methods: Method::ALL.to_vec(),
            sweep_methods: vec![Method::T, Method::Drl],
            data: DataConfig::default(),
            forest: ForestConfig::default(),
            nuisance: None,
            cate: None,
            bias: BiasConfig::default(),
            propensity_sweep: PropensityConfig::default(),
            scoring: ScoringConfig::default(),
            scaling: ScalingConfig::default(),
            allocate: AllocateConfig::default(),
        }
    }
}

fn check(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Config(msg.into()))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn forest_spec(&self) -> RegressorSpec {
        self.forest.clone().into()
    }

    pub fn nuisance_spec(&self) -> RegressorSpec {
        self.nuisance.clone().unwrap_or_else(|| self.forest.clone()).into()
    }

    pub fn cate_spec(&self) -> RegressorSpec {
        self.cate.clone().unwrap_or_else(|| self.forest.clone()).into()
    }

    /// Seed of replicate `r`.
    pub fn replicate_seed(&self, r: usize) -> u64 {
        self.seed.wrapping_add(r as u64)
    }

    pub fn validate(&self) -> Result<()> {
        check(self.replicates >= 1, "replicates must be at least 1")?;
        check(
            self.train_fraction > 0.0 && self.train_fraction < 1.0,
            format!("train_fraction must lie in (0, 1), got {}", self.train_fraction),
        )?;
        self.forest.validate().map_err(|e| CliError::Config(format!("[forest] {e}")))?;
        for (name, f) in [("nuisance", &self.nuisance), ("cate", &self.cate)] {
            if let Some(f) = f {
                f.validate().map_err(|e| CliError::Config(format!("[{name}] {e}")))?;
            }
        }
        let d = &self.data;
        check(d.source != DataSource::Criteo || d.path.is_some(), "[data] criteo source needs a path")?;
        if d.source != DataSource::Criteo {
            check(d.n >= 10, "[data] n must be at least 10")?;
            check(d.d >= 2, "[data] d must be at least 2")?;
        }
        check(
            self.bias.betas.iter().all(|b| (0.0..=1.0).contains(b)),
            "[bias] betas must lie in [0, 1]",
        )?;
        check(
            self.propensity_sweep.nuisance_betas.iter().all(|b| (0.0..=1.0).contains(b)),
            "[propensity_sweep] nuisance_betas must lie in [0, 1]",
        )?;
        check(
            self.allocate.budget_fraction > 0.0 && self.allocate.budget_fraction <= 1.0,
            "[allocate] budget_fraction must lie in (0, 1]",
        )?;
        if let Some(k) = self.scoring.clusters {
            check(k >= 1, "[scoring] clusters must be at least 1")?;
        }
        if let Some(l) = self.scoring.lambda {
            check(l >= 0.0, "[scoring] lambda must be non-negative")?;
        }
        Ok(())
    }
}
