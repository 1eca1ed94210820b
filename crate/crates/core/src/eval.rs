//! Ranking metrics for effect estimates: uplift curve / AUUC for one
//! outcome, cost curve / AUCC for a gain-versus-cost pair, and ground-truth
//! error on synthetic data.
//!
//! Rows are ranked by descending score (ties keep index order). For each
//! fraction `t = k / 100`, `k = 0..=100`, the top `ceil(k n / 100)` rows give
//! the cumulative gain `G(t) = (mean_T - mean_C) * count` with the arm means
//! taken inside the top set.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{RctDataset, SyntheticGroundTruth};
use crate::error::{invalid, Result, UpliftError};
use crate::learners::CateEstimator;
use crate::matrix::Matrix;

pub const GRID_STEPS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Uplift,
    Cost,
}

impl CurveKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Uplift => "uplift",
            Self::Cost => "cost",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    pub kind: CurveKind,
    /// Targeted fraction of each point.
    pub t: Vec<f64>,
    pub points: Vec<(f64, f64)>,
    pub area: f64,
    pub n_evaluated: usize,
    /// Grid indices whose top set lacked an arm and reused the previous
    /// estimate.
    pub flagged: Vec<usize>,
}

/// Trapezoidal area of a polyline, clamped to `[0, 1]`.
pub fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    let mut area = 0.0;
    for w in points.windows(2) {
        area += (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0;
    }
    area.clamp(0.0, 1.0)
}

impl CurveReport {
    pub fn recompute_area(&self) -> f64 {
        trapezoid_area(&self.points)
    }

    pub fn is_flagged(&self) -> bool {
        !self.flagged.is_empty()
    }
}

/// Row order by descending score, ties by index.
pub fn rank_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Number of top rows at grid step `k`.
pub fn grid_count(k: usize, n: usize) -> usize {
    (k * n).div_ceil(GRID_STEPS)
}

fn check_inputs(scores: &[f64], dataset: &RctDataset) -> Result<()> {
    if scores.len() != dataset.n() {
        return Err(UpliftError::DimensionMismatch { expected: dataset.n(), got: scores.len() });
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(UpliftError::Row { row: i, message: "score is NaN".into() });
    }
    let treated = dataset.n_treated();
    if treated == 0 || treated == dataset.n() {
        return invalid("evaluation needs both treated and control rows");
    }
    Ok(())
}

/// Cumulative gains on the grid for each outcome column, sharing one
/// ranking. Returns the gains per outcome and the flagged grid indices.
fn cumulative_gains(order: &[usize], w: &[u8], ys: &[&[f64]]) -> (Vec<Vec<f64>>, Vec<usize>) {
    let n = order.len();
    let m = ys.len();
    let mut sum_t = vec![0.0; m];
    let mut sum_c = vec![0.0; m];
    let (mut n_t, mut n_c) = (0usize, 0usize);
    let mut last_diff = vec![0.0; m];
    let mut gains = vec![Vec::with_capacity(GRID_STEPS + 1); m];
    let mut flagged = Vec::new();
    let mut pos = 0;
    for k in 0..=GRID_STEPS {
        let count = grid_count(k, n);
        while pos < count {
            let i = order[pos];
            if w[i] == 1 {
                n_t += 1;
                for j in 0..m {
                    sum_t[j] += ys[j][i];
                }
            } else {
                n_c += 1;
                for j in 0..m {
                    sum_c[j] += ys[j][i];
                }
            }
            pos += 1;
        }
        if count > 0 && (n_t == 0 || n_c == 0) {
            flagged.push(k);
        } else if count > 0 {
            for j in 0..m {
                last_diff[j] = sum_t[j] / n_t as f64 - sum_c[j] / n_c as f64;
            }
        }
        for j in 0..m {
            gains[j].push(last_diff[j] * count as f64);
        }
    }
    (gains, flagged)
}

fn grid_t() -> Vec<f64> {
    (0..=GRID_STEPS).map(|k| k as f64 / GRID_STEPS as f64).collect()
}

pub fn uplift_curve(scores: &[f64], dataset: &RctDataset, outcome: &str) -> Result<CurveReport> {
    check_inputs(scores, dataset)?;
    let y = dataset.outcome(outcome)?;
    let order = rank_order(scores);
    let (gains, flagged) = cumulative_gains(&order, dataset.treatment(), &[y]);
    let g = &gains[0];
    let total = g[GRID_STEPS];
    if total == 0.0 {
        return Err(UpliftError::UndefinedMetric(format!("overall gain on `{outcome}` is zero")));
    }
    let t = grid_t();
    let points: Vec<(f64, f64)> = t.iter().zip(g).map(|(&x, &v)| (x, v / total.abs())).collect();
    let area = trapezoid_area(&points);
    Ok(CurveReport { kind: CurveKind::Uplift, t, points, area, n_evaluated: dataset.n(), flagged })
}

pub fn auuc(scores: &[f64], dataset: &RctDataset, outcome: &str) -> Result<f64> {
    Ok(uplift_curve(scores, dataset, outcome)?.area)
}

/// Incremental revenue against incremental engagement cost, both
/// normalized by their full-population values. The cost axis is clamped to
/// `[0, 1]` and made non-decreasing with a running maximum.
pub fn cost_curve(
    scores: &[f64],
    dataset: &RctDataset,
    revenue_outcome: &str,
    engagement_outcome: &str,
) -> Result<CurveReport> {
    check_inputs(scores, dataset)?;
    let r = dataset.outcome(revenue_outcome)?;
    let e = dataset.outcome(engagement_outcome)?;
    let order = rank_order(scores);
    let (gains, flagged) = cumulative_gains(&order, dataset.treatment(), &[r, e]);
    let (dr, de) = (&gains[0], &gains[1]);
    let (r1, e1) = (dr[GRID_STEPS], de[GRID_STEPS]);
    if !(e1 > 0.0) {
        return Err(UpliftError::UndefinedMetric(format!(
            "aggregate cost on `{engagement_outcome}` is {e1}, must be positive"
        )));
    }
    if r1 == 0.0 {
        return Err(UpliftError::UndefinedMetric(format!("aggregate gain on `{revenue_outcome}` is zero")));
    }
    let mut x_max = 0.0f64;
    let points = dr
        .iter()
        .zip(de)
        .map(|(&vr, &ve)| {
            x_max = x_max.max((ve / e1).clamp(0.0, 1.0));
            (x_max, vr / r1.abs())
        })
        .collect::<Vec<_>>();
    let area = trapezoid_area(&points);
    Ok(CurveReport { kind: CurveKind::Cost, t: grid_t(), points, area, n_evaluated: dataset.n(), flagged })
}

pub fn aucc(scores: &[f64], dataset: &RctDataset, revenue_outcome: &str, engagement_outcome: &str) -> Result<f64> {
    Ok(cost_curve(scores, dataset, revenue_outcome, engagement_outcome)?.area)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureScreen {
    pub auuc: f64,
    /// Set when the feature is constant and no ranking exists.
    pub degenerate: bool,
}

/// Bin id per row by quantile of `values`; equal values share a bin.
fn quantile_bins(values: &[f64], n_bins: usize) -> Vec<usize> {
    let n = values.len();
    let order = {
        let mut o: Vec<usize> = (0..n).collect();
        o.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        o
    };
    let mut bins = vec![0; n];
    let mut first = 0;
    for (pos, &i) in order.iter().enumerate() {
        if pos > 0 && values[i] != values[order[pos - 1]] {
            first = pos;
        }
        bins[i] = (first * n_bins / n).min(n_bins - 1);
    }
    bins
}

/// AUUC of scoring every row by the empirical uplift of its quantile bin
/// of one feature.
pub fn single_feature_auuc(
    dataset: &RctDataset,
    outcome: &str,
    feature_index: usize,
    n_bins: usize,
) -> Result<FeatureScreen> {
    if n_bins < 2 {
        return invalid(format!("need at least 2 bins, got {n_bins}"));
    }
    if feature_index >= dataset.d() {
        return Err(UpliftError::DimensionMismatch { expected: dataset.d(), got: feature_index + 1 });
    }
    let col = dataset.features().column(feature_index);
    if col.iter().all(|&v| v == col[0]) {
        return Ok(FeatureScreen { auuc: 0.5, degenerate: true });
    }
    let y = dataset.outcome(outcome)?;
    let w = dataset.treatment();
    let bins = quantile_bins(&col, n_bins);
    let mut acc = vec![[0.0f64; 4]; n_bins];
    for i in 0..dataset.n() {
        let a = &mut acc[bins[i]];
        if w[i] == 1 {
            a[0] += y[i];
            a[1] += 1.0;
        } else {
            a[2] += y[i];
            a[3] += 1.0;
        }
    }
    let uplift: Vec<f64> = acc
        .iter()
        .map(|a| if a[1] > 0.0 && a[3] > 0.0 { a[0] / a[1] - a[2] / a[3] } else { 0.0 })
        .collect();
    let scores: Vec<f64> = bins.iter().map(|&b| uplift[b]).collect();
    Ok(FeatureScreen { auuc: auuc(&scores, dataset, outcome)?, degenerate: false })
}

pub fn rmse(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(UpliftError::DimensionMismatch { expected: truth.len(), got: estimate.len() });
    }
    if truth.is_empty() {
        return invalid("rmse of an empty vector");
    }
    let ss: f64 = estimate.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / truth.len() as f64).sqrt())
}

/// Root-mean-square error of a model's effect estimates on `x` against the
/// known effects for `outcome`.
pub fn cate_rmse(
    model: &dyn CateEstimator,
    truth: &SyntheticGroundTruth,
    outcome: &str,
    x: &Matrix,
) -> Result<f64> {
    let tau = truth
        .tau(outcome)
        .ok_or_else(|| UpliftError::Validation(format!("no ground truth for outcome `{outcome}`")))?;
    if tau.len() != x.n_rows() {
        return Err(UpliftError::DimensionMismatch { expected: tau.len(), got: x.n_rows() });
    }
    rmse(&model.estimate_cate(x)?, tau)
}

/// Writes `t,x,y` rows after `#` comment lines carrying kind, size, area and
/// flagged count.
pub fn write_curve_csv(path: impl AsRef<Path>, report: &CurveReport) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# kind={}", report.kind.name())?;
    writeln!(out, "# n={}", report.n_evaluated)?;
    writeln!(out, "# area={}", report.area)?;
    writeln!(out, "# flagged={}", report.flagged.len())?;
    writeln!(out, "t,x,y")?;
    for (t, (x, y)) in report.t.iter().zip(&report.points) {
        writeln!(out, "{t},{x},{y}")?;
    }
    out.flush()?;
    Ok(())
}
