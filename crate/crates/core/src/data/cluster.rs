//! k-means (k-means++ seeding, Lloyd iterations) and the cluster-ID feature.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::RctDataset;
use crate::error::{invalid, Result};
use crate::matrix::Matrix;
use crate::rng::{stream_rng, streams};

pub const CLUSTER_ID_COLUMN: &str = "cluster_id";
const MAX_ITER: usize = 100;
const REL_TOL: f64 = 1e-4;

#[derive(Clone, Debug)]
pub(crate) struct KMeansFit {
    pub centroids: Matrix,
    pub labels: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid, ties to the lowest index.
pub(crate) fn nearest(centroids: &Matrix, point: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, row) in centroids.rows().enumerate() {
        let dist = sq_dist(row, point);
        if dist < best.1 {
            best = (c, dist);
        }
    }
    best
}

fn plus_plus_seed(points: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = points.n_rows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut d2: Vec<f64> = points.rows().map(|r| sq_dist(r, points.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &v) in d2.iter().enumerate() {
                acc += v;
                if v > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave `acc` just short of `target`
            pick.unwrap_or_else(|| d2.iter().rposition(|&v| v > 0.0).unwrap())
        } else {
            // every point coincides with a chosen centre
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        let c = points.row(next);
        for (i, r) in points.rows().enumerate() {
            let dist = sq_dist(r, c);
            if dist < d2[i] {
                d2[i] = dist;
            }
        }
    }
    chosen
}

pub(crate) fn kmeans(points: &Matrix, k: usize, seed: u64) -> Result<KMeansFit> {
    let n = points.n_rows();
    let dim = points.n_cols();
    if k == 0 {
        return invalid("k must be at least 1");
    }
    if k > n {
        return invalid(format!("k = {k} exceeds the number of points {n}"));
    }
    let mut rng = stream_rng(seed, streams::CLUSTER);
    let seeds = plus_plus_seed(points, k, &mut rng);
    let mut centroids = points.select_rows(&seeds);
    let mut labels = vec![0usize; n];
    let mut prev_inertia = f64::INFINITY;
    let mut iterations = 0;
    for it in 0..MAX_ITER {
        iterations = it + 1;
        let mut inertia = 0.0;
        for (i, r) in points.rows().enumerate() {
            let (c, dist) = nearest(&centroids, r);
            labels[i] = c;
            inertia += dist;
        }
        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (i, r) in points.rows().enumerate() {
            let c = labels[i];
            counts[c] += 1;
            for (s, v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(r) {
                *s += v;
            }
        }
        for c in 0..k {
            // empty clusters keep their previous centre
            if counts[c] > 0 {
                for j in 0..dim {
                    centroids.set(c, j, sums[c * dim + j] / counts[c] as f64);
                }
            }
        }
        let converged = inertia == 0.0
            || (prev_inertia.is_finite() && (prev_inertia - inertia).abs() <= REL_TOL * prev_inertia);
        prev_inertia = inertia;
        if converged {
            break;
        }
    }
    let mut inertia = 0.0;
    for (i, r) in points.rows().enumerate() {
        let (c, dist) = nearest(&centroids, r);
        labels[i] = c;
        inertia += dist;
    }
    Ok(KMeansFit { centroids, labels, inertia, iterations })
}

/// Maps rows of a high-dimensional feature block to a cluster ID.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterFeatureizer {
    pub k: usize,
    /// Dataset columns forming the block the centroids live in.
    pub columns: Vec<usize>,
    pub centroids: Matrix,
    pub inertia: f64,
    pub iterations: usize,
}

impl ClusterFeatureizer {
    pub fn assign(&self, point: &[f64]) -> usize {
        nearest(&self.centroids, point).0
    }
}

/// Fits on a standalone block; the block is assumed to be the leading
/// `features.n_cols()` columns of any dataset it is later applied to.
pub fn fit_cluster_featureizer(features: &Matrix, k: usize, seed: u64) -> Result<ClusterFeatureizer> {
    if k < 2 {
        return invalid(format!("cluster featureizer needs k >= 2, got {k}"));
    }
    let fit = kmeans(features, k, seed)?;
    Ok(ClusterFeatureizer {
        k,
        columns: (0..features.n_cols()).collect(),
        centroids: fit.centroids,
        inertia: fit.inertia,
        iterations: fit.iterations,
    })
}

/// Fits on the given columns of a dataset.
pub fn fit_cluster_featureizer_on(
    dataset: &RctDataset,
    columns: &[usize],
    k: usize,
    seed: u64,
) -> Result<ClusterFeatureizer> {
    if let Some(&c) = columns.iter().find(|&&c| c >= dataset.d()) {
        return invalid(format!("column {c} out of range for {} features", dataset.d()));
    }
    let mut cf = fit_cluster_featureizer(&dataset.features().select_columns(columns), k, seed)?;
    cf.columns = columns.to_vec();
    Ok(cf)
}

/// Appends an integer cluster-ID column named [`CLUSTER_ID_COLUMN`].
pub fn apply_cluster_featureizer(cf: &ClusterFeatureizer, dataset: &RctDataset) -> Result<RctDataset> {
    if let Some(&c) = cf.columns.iter().find(|&&c| c >= dataset.d()) {
        return invalid(format!("column {c} out of range for {} features", dataset.d()));
    }
    let mut buf = vec![0.0; cf.columns.len()];
    let ids: Vec<f64> = dataset
        .features()
        .rows()
        .map(|r| {
            for (b, &c) in buf.iter_mut().zip(&cf.columns) {
                *b = r[c];
            }
            cf.assign(&buf) as f64
        })
        .collect();
    let mut names = dataset.feature_names().to_vec();
    names.push(CLUSTER_ID_COLUMN.to_string());
    dataset.with_features(dataset.features().with_column(&ids)?, names)
}
