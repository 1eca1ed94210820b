//! Synthetic randomized trials with known effects.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Outcome, RctDataset};
use crate::error::{invalid, Result};
use crate::matrix::Matrix;
use crate::rng::{stream_rng, streams};

/// Response surfaces of the synthetic generators.
///
/// Coordinates are 1-based as `x1..x4`, stored in feature columns 0..3.
/// Columns beyond the fourth carry no signal, and coordinates missing for
/// small `d` read as 0.
pub mod dgp {
    use std::f64::consts::PI;

    #[inline]
    fn coord(x: &[f64], k: usize) -> f64 {
        x.get(k - 1).copied().unwrap_or(0.0)
    }

    pub fn baseline_revenue(x: &[f64]) -> f64 {
        let x2 = coord(x, 2);
        2.0 + (PI * coord(x, 1)).sin() + x2 * x2
    }

    pub fn tau_revenue(x: &[f64]) -> f64 {
        0.5 * (1.0 + (2.0 * coord(x, 1)).tanh()) * (1.0 + 0.3 * coord(x, 3))
    }

    pub fn baseline_engagement(x: &[f64]) -> f64 {
        5.0 + coord(x, 2)
    }

    /// Engagement cost of treatment (a loss, hence positive).
    pub fn tau_engagement(x: &[f64]) -> f64 {
        0.2 * (1.0 + (-2.0 * coord(x, 1)).tanh()) * (1.0 + 0.3 * coord(x, 4)) + 0.05
    }

    /// Standard deviation of the revenue baseline under `X ~ U(-1,1)^d`:
    /// `Var sin(pi U) = 1/2`, `Var U^2 = 4/45`.
    pub fn revenue_baseline_sd() -> f64 {
        (0.5_f64 + 4.0 / 45.0).sqrt()
    }

    /// Standard deviation of the engagement baseline, `sqrt(1/3)`.
    pub fn engagement_baseline_sd() -> f64 {
        (1.0_f64 / 3.0).sqrt()
    }

    /// Control-arm visit probability of the binary generator.
    pub fn visit_baseline(x: &[f64]) -> f64 {
        let x3 = coord(x, 3);
        0.2 + 0.08 * (PI * coord(x, 2)).sin() + 0.08 * x3 * x3
    }

    /// Visit uplift of the binary generator; concentrated on low `x1`.
    pub fn tau_visit(x: &[f64]) -> f64 {
        0.1 * (1.0 + (-2.0 * coord(x, 1)).tanh()) * (1.0 + 0.3 * coord(x, 4))
    }
}

/// True effects and potential outcomes behind a synthetic dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticGroundTruth {
    /// Per-outcome true CATE at each row.
    pub taus: Vec<(String, Vec<f64>)>,
    /// Per-outcome `(Y(0), Y(1))` at each row.
    pub potential_outcomes: Vec<(String, Vec<(f64, f64)>)>,
}

impl SyntheticGroundTruth {
    pub fn tau(&self, outcome: &str) -> Option<&[f64]> {
        self.taus.iter().find(|(n, _)| n == outcome).map(|(_, v)| v.as_slice())
    }

    pub fn tau_revenue(&self) -> Option<&[f64]> {
        self.tau("revenue")
    }

    pub fn tau_engagement(&self) -> Option<&[f64]> {
        self.tau("engagement")
    }

    pub fn potential(&self, outcome: &str) -> Option<&[(f64, f64)]> {
        self.potential_outcomes
            .iter()
            .find(|(n, _)| n == outcome)
            .map(|(_, v)| v.as_slice())
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            taus: self
                .taus
                .iter()
                .map(|(n, v)| (n.clone(), idx.iter().map(|&i| v[i]).collect()))
                .collect(),
            potential_outcomes: self
                .potential_outcomes
                .iter()
                .map(|(n, v)| (n.clone(), idx.iter().map(|&i| v[i]).collect()))
                .collect(),
        }
    }
}

fn check_params(n: usize, d: usize, p: f64) -> Result<()> {
    if n < 2 {
        return invalid(format!("need n >= 2, got {n}"));
    }
    if d < 2 {
        return invalid(format!("need d >= 2, got {d}"));
    }
    if !(p > 0.0 && p < 1.0) {
        return invalid(format!("propensity must lie in (0, 1), got {p}"));
    }
    Ok(())
}

fn draw_design(n: usize, d: usize, p: f64, seed: u64) -> Result<(Matrix, Vec<String>, Vec<u8>)> {
    let mut frng = stream_rng(seed, streams::FEATURES);
    let data: Vec<f64> = (0..n * d).map(|_| frng.random_range(-1.0..1.0)).collect();
    let x = Matrix::new(n, d, data)?;
    let mut wrng = stream_rng(seed, streams::TREATMENT);
    let w: Vec<u8> = (0..n).map(|_| wrng.random_bool(p) as u8).collect();
    let names = (0..d).map(|j| format!("x{j}")).collect();
    Ok((x, names, w))
}

/// Dual-outcome trial with `revenue` and `engagement` outcomes.
///
/// Features are i.i.d. `U(-1,1)`, treatment is `Bernoulli(p)` drawn from a
/// stream independent of the features, and each potential outcome gets its own
/// Gaussian noise with standard deviation `noise_scale` times the standard
/// deviation of that outcome's baseline over the feature distribution.
pub fn generate_synthetic_rct(
    n: usize,
    d: usize,
    p: f64,
    noise_scale: f64,
    seed: u64,
) -> Result<(RctDataset, SyntheticGroundTruth)> {
    check_params(n, d, p)?;
    if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
        return invalid(format!("noise scale must be finite and >= 0, got {noise_scale}"));
    }
    let (x, names, w) = draw_design(n, d, p, seed)?;
    let mut nrng = stream_rng(seed, streams::NOISE);
    let sd_rev = noise_scale * dgp::revenue_baseline_sd();
    let sd_eng = noise_scale * dgp::engagement_baseline_sd();

    let mut tau_r = Vec::with_capacity(n);
    let mut tau_e = Vec::with_capacity(n);
    let mut po_r = Vec::with_capacity(n);
    let mut po_e = Vec::with_capacity(n);
    let mut y_r = Vec::with_capacity(n);
    let mut y_e = Vec::with_capacity(n);
    for i in 0..n {
        let row = x.row(i);
        let (br, tr) = (dgp::baseline_revenue(row), dgp::tau_revenue(row));
        let (be, te) = (dgp::baseline_engagement(row), dgp::tau_engagement(row));
        let z: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut nrng));
        let r = (br + sd_rev * z[0], br + tr + sd_rev * z[1]);
        let e = (be + sd_eng * z[2], be + te + sd_eng * z[3]);
        let treated = w[i] == 1;
        y_r.push(if treated { r.1 } else { r.0 });
        y_e.push(if treated { e.1 } else { e.0 });
        tau_r.push(tr);
        tau_e.push(te);
        po_r.push(r);
        po_e.push(e);
    }
    let ds = RctDataset::new(
        x,
        names,
        w,
        vec![Outcome::new("revenue", y_r), Outcome::new("engagement", y_e)],
        p,
    )?;
    let truth = SyntheticGroundTruth {
        taus: vec![("revenue".into(), tau_r), ("engagement".into(), tau_e)],
        potential_outcomes: vec![("revenue".into(), po_r), ("engagement".into(), po_e)],
    };
    Ok((ds, truth))
}

/// Single binary-outcome trial (`visit`), a stand-in for click/visit logs.
///
/// Both potential outcomes share one uniform draw, so `Y(1) >= Y(0)` and
/// `E[Y(1) - Y(0) | x] = tau_visit(x)`.
pub fn generate_synthetic_binary_rct(
    n: usize,
    d: usize,
    p: f64,
    seed: u64,
) -> Result<(RctDataset, SyntheticGroundTruth)> {
    check_params(n, d, p)?;
    let (x, names, w) = draw_design(n, d, p, seed)?;
    let mut nrng = stream_rng(seed, streams::NOISE);
    let mut tau = Vec::with_capacity(n);
    let mut po = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let row = x.row(i);
        let b = dgp::visit_baseline(row);
        let t = dgp::tau_visit(row);
        let u: f64 = nrng.random();
        let pair = ((u < b) as u8 as f64, (u < b + t) as u8 as f64);
        y.push(if w[i] == 1 { pair.1 } else { pair.0 });
        tau.push(t);
        po.push(pair);
    }
    let ds = RctDataset::new(x, names, w, vec![Outcome::new("visit", y)], p)?;
    let truth = SyntheticGroundTruth {
        taus: vec![("visit".into(), tau)],
        potential_outcomes: vec![("visit".into(), po)],
    };
    Ok((ds, truth))
}
