//! Budgeted allocation of a treatment with a revenue gain `tau_r` and an
//! engagement cost `tau_e` per user.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::kmeans;
use crate::error::{invalid, Result, UpliftError};
use crate::matrix::Matrix;

/// Positive costs below this are raised to it before ratios are taken.
pub const COST_FLOOR: f64 = 1e-6;
pub const DEFAULT_GRID_POINTS: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationProblem {
    tau_r: Vec<f64>,
    tau_e: Vec<f64>,
    budget: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub z: Vec<u8>,
    pub total_value: f64,
    pub total_cost: f64,
}

impl AllocationProblem {
    pub fn new(tau_r: Vec<f64>, tau_e: Vec<f64>, budget: f64) -> Result<Self> {
        if tau_r.len() != tau_e.len() {
            return Err(UpliftError::DimensionMismatch { expected: tau_r.len(), got: tau_e.len() });
        }
        if !(budget > 0.0 && budget.is_finite()) {
            return invalid(format!("budget must be positive and finite, got {budget}"));
        }
        if let Some(i) = tau_r.iter().chain(&tau_e).position(|v| !v.is_finite()) {
            return Err(UpliftError::Row { row: i % tau_r.len().max(1), message: "non-finite effect estimate".into() });
        }
        Ok(Self { tau_r, tau_e, budget })
    }

    pub fn n(&self) -> usize {
        self.tau_r.len()
    }

    pub fn tau_r(&self) -> &[f64] {
        &self.tau_r
    }

    pub fn tau_e(&self) -> &[f64] {
        &self.tau_e
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    /// Cost charged for user `i`: zero when the estimated engagement cost is
    /// not positive, otherwise at least [`COST_FLOOR`].
    pub fn cost(&self, i: usize) -> f64 {
        let c = self.tau_e[i];
        if c <= 0.0 {
            0.0
        } else {
            c.max(COST_FLOOR)
        }
    }

    pub fn is_free(&self, i: usize) -> bool {
        self.tau_e[i] <= 0.0
    }

    pub fn ratio(&self, i: usize) -> f64 {
        self.tau_r[i] / self.cost(i)
    }

    /// Totals for a selection vector.
    pub fn evaluate(&self, z: &[u8]) -> Result<AllocationResult> {
        if z.len() != self.n() {
            return Err(UpliftError::DimensionMismatch { expected: self.n(), got: z.len() });
        }
        let mut total_value = 0.0;
        let mut total_cost = 0.0;
        for (i, &zi) in z.iter().enumerate() {
            match zi {
                0 => {}
                1 => {
                    total_value += self.tau_r[i];
                    total_cost += self.cost(i);
                }
                v => return Err(UpliftError::Row { row: i, message: format!("selection must be 0 or 1, got {v}") }),
            }
        }
        Ok(AllocationResult { z: z.to_vec(), total_value, total_cost })
    }
}

impl AllocationResult {
    pub fn n_selected(&self) -> usize {
        self.z.iter().filter(|&&v| v == 1).count()
    }
}

/// Greedy knapsack on `tau_r / tau_e`. Free users go first; then users are
/// taken in descending ratio order (ties to the lower index), skipping any
/// that no longer fit and any with a non-positive gain.
pub fn greedy_ratio_allocate(problem: &AllocationProblem) -> AllocationResult {
    let n = problem.n();
    let mut z = vec![0u8; n];
    let mut used = 0.0;
    let mut paid: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        if problem.is_free(i) {
            z[i] = 1;
        } else {
            paid.push(i);
        }
    }
    paid.sort_by(|&a, &b| problem.ratio(b).total_cmp(&problem.ratio(a)).then(a.cmp(&b)));
    for i in paid {
        if problem.tau_r[i] <= 0.0 {
            break;
        }
        let c = problem.cost(i);
        if used + c <= problem.budget {
            used += c;
            z[i] = 1;
        }
    }
    problem.evaluate(&z).expect("selection built from the problem")
}

/// `S_i = tau_r_i - lambda * tau_e_i`.
pub fn lagrangian_scores(tau_r: &[f64], tau_e: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if tau_r.len() != tau_e.len() {
        return Err(UpliftError::DimensionMismatch { expected: tau_r.len(), got: tau_e.len() });
    }
    if !(lambda >= 0.0) {
        return invalid(format!("lambda must be non-negative, got {lambda}"));
    }
    Ok(tau_r.iter().zip(tau_e).map(|(r, e)| r - lambda * e).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSweep {
    /// Chosen multiplier; `None` when no grid point met the budget.
    pub lambda: Option<f64>,
    pub result: AllocationResult,
    pub feasible: bool,
    /// `(lambda, value, cost)` for every grid point, in grid order.
    pub trace: Vec<(f64, f64, f64)>,
}

/// Selects `{i : S_i > 0}` for every grid point and keeps the feasible one
/// with the largest value (ties to the smaller lambda).
pub fn sweep_lambda_for_budget(problem: &AllocationProblem, grid: &[f64]) -> Result<LambdaSweep> {
    if grid.is_empty() {
        return invalid("lambda grid is empty");
    }
    if let Some(l) = grid.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return invalid(format!("lambda grid values must be finite and non-negative, got {l}"));
    }
    let results: Vec<AllocationResult> = grid
        .par_iter()
        .map(|&lambda| {
            let s = lagrangian_scores(&problem.tau_r, &problem.tau_e, lambda)?;
            problem.evaluate(&s.iter().map(|&v| u8::from(v > 0.0)).collect::<Vec<_>>())
        })
        .collect::<Result<_>>()?;
    let trace = grid.iter().zip(&results).map(|(&l, r)| (l, r.total_value, r.total_cost)).collect();
    let mut best: Option<usize> = None;
    for (k, r) in results.iter().enumerate() {
        if r.total_cost > problem.budget {
            continue;
        }
        best = match best {
            None => Some(k),
            Some(b) => {
                let (vb, vk) = (results[b].total_value, r.total_value);
                if vk > vb || (vk == vb && grid[k] < grid[b]) {
                    Some(k)
                } else {
                    Some(b)
                }
            }
        };
    }
    Ok(match best {
        Some(k) => LambdaSweep { lambda: Some(grid[k]), result: results[k].clone(), feasible: true, trace },
        None => LambdaSweep {
            lambda: None,
            result: problem.evaluate(&vec![0; problem.n()])?,
            feasible: false,
            trace,
        },
    })
}

fn positive_ratios(problem: &AllocationProblem) -> Vec<f64> {
    let mut r: Vec<f64> = (0..problem.n())
        .filter(|&i| !problem.is_free(i) && problem.tau_r[i] > 0.0)
        .map(|i| problem.ratio(i))
        .collect();
    r.sort_by(f64::total_cmp);
    r
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Log-spaced grid between the 1st and 99th percentiles of the positive
/// ratios, with 0 prepended.
pub fn default_lambda_grid(problem: &AllocationProblem, points: usize) -> Vec<f64> {
    let r = positive_ratios(problem);
    if r.is_empty() || points == 0 {
        return vec![0.0];
    }
    let lo = quantile_sorted(&r, 0.01);
    let hi = quantile_sorted(&r, 0.99);
    let mut grid = vec![0.0];
    if points == 1 || hi <= lo {
        grid.push(lo);
        return grid;
    }
    let (a, b) = (lo.ln(), hi.ln());
    grid.extend((0..points).map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp()));
    grid
}

/// Zero, the midpoints between consecutive distinct positive ratios, and
/// twice the largest ratio. Since selection is `S > 0`, the sweep over this
/// grid visits every prefix of the ratio ordering.
pub fn breakpoint_lambda_grid(problem: &AllocationProblem) -> Vec<f64> {
    let mut ratios = positive_ratios(problem);
    ratios.dedup();
    let mut grid = vec![0.0];
    grid.extend(ratios.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    if let Some(&hi) = ratios.last() {
        grid.push(2.0 * hi);
    }
    grid
}

/// Multiplier that balances the aggregate gain and cost estimates,
/// `sum(tau_r) / sum(tau_e)`, or 0 when that is not positive.
pub fn auto_lambda(tau_r: &[f64], tau_e: &[f64]) -> f64 {
    let r: f64 = tau_r.iter().sum();
    let e: f64 = tau_e.iter().sum();
    let l = r / e;
    if l.is_finite() && l > 0.0 {
        l
    } else {
        0.0
    }
}

/// Lagrangian scores with `lambda` or, when `None`, [`auto_lambda`].
pub fn dual_objective_scores(tau_r: &[f64], tau_e: &[f64], lambda: Option<f64>) -> Result<Vec<f64>> {
    let l = lambda.unwrap_or_else(|| auto_lambda(tau_r, tau_e));
    lagrangian_scores(tau_r, tau_e, l)
}

/// One-dimensional k-means on the scores; every score becomes the mean of
/// its cluster.
pub fn cluster_scores(scores: &[f64], k: usize, seed: u64) -> Result<Vec<f64>> {
    if k == 0 {
        return invalid("cluster count must be at least 1");
    }
    if k > scores.len() {
        return invalid(format!("cluster count {k} exceeds {} scores", scores.len()));
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return invalid("scores must be finite");
    }
    let fit = kmeans(&Matrix::column_vector(scores), k, seed)?;
    let mut sum = vec![0.0; k];
    let mut count = vec![0usize; k];
    for (s, &l) in scores.iter().zip(&fit.labels) {
        sum[l] += s;
        count[l] += 1;
    }
    Ok(fit.labels.iter().map(|&l| sum[l] / count[l] as f64).collect())
}

/// Writes `user_index,score,selected,tau_r_hat,tau_e_hat`.
pub fn write_allocation_csv(
    path: impl AsRef<Path>,
    scores: &[f64],
    result: &AllocationResult,
    tau_r: &[f64],
    tau_e: &[f64],
) -> Result<()> {
    let n = scores.len();
    for len in [result.z.len(), tau_r.len(), tau_e.len()] {
        if len != n {
            return Err(UpliftError::DimensionMismatch { expected: n, got: len });
        }
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "user_index,score,selected,tau_r_hat,tau_e_hat")?;
    for i in 0..n {
        writeln!(out, "{i},{},{},{},{}", scores[i], result.z[i], tau_r[i], tau_e[i])?;
    }
    out.flush()?;
    Ok(())
}
