//! Single regression tree grown with an exact squared-error split search.
//!
//! Rows are presorted once per forest; each tree keeps, per feature, the
//! in-bag rows in sorted order and stably partitions those lists as it
//! splits, so no node ever re-sorts.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ForestConfig;
use crate::matrix::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Threshold of the root split, if the root is not a leaf.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes.first()? {
            Node::Split { feature, threshold, .. } => Some((*feature, *threshold)),
            Node::Leaf { .. } => None,
        }
    }
}

/// Per-feature row order over the full training matrix (stable on ties).
pub(crate) fn presort(x: &Matrix) -> Vec<Vec<u32>> {
    (0..x.n_cols())
        .map(|j| {
            let col = x.column(j);
            let mut idx: Vec<u32> = (0..x.n_rows() as u32).collect();
            idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
            idx
        })
        .collect()
}

/// In-bag multiplicities for one tree.
pub(crate) fn draw_weights(n: usize, cfg: &ForestConfig, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let m = ((cfg.row_subsample * n as f64).round() as usize).clamp(1, n);
    let mut w = vec![0u32; n];
    if cfg.bootstrap {
        for _ in 0..m {
            w[rng.random_range(0..n)] += 1;
        }
    } else if m == n {
        w.iter_mut().for_each(|v| *v = 1);
    } else {
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..m {
            let j = rng.random_range(i..n);
            idx.swap(i, j);
            w[idx[i]] = 1;
        }
    }
    w
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    w: Vec<u32>,
    sorted: Vec<Vec<u32>>,
    goes_left: Vec<bool>,
    scratch: Vec<u32>,
    pool: Vec<usize>,
    n_try: usize,
    cfg: &'a ForestConfig,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    n_left: usize,
    gain: f64,
}

pub(crate) fn fit_tree(
    x: &Matrix,
    y: &[f64],
    presorted: &[Vec<u32>],
    cfg: &ForestConfig,
    mut rng: ChaCha8Rng,
) -> Tree {
    let n = x.n_rows();
    let d = x.n_cols();
    let w = draw_weights(n, cfg, &mut rng);
    let sorted: Vec<Vec<u32>> = presorted
        .iter()
        .map(|ord| ord.iter().copied().filter(|&r| w[r as usize] > 0).collect())
        .collect();
    let m = sorted.first().map_or(0, Vec::len);
    let n_try = ((cfg.feature_subsample * d as f64).ceil() as usize).clamp(1, d.max(1));
    let mut b = Builder {
        x,
        y,
        w,
        sorted,
        goes_left: vec![false; n],
        scratch: vec![0; m],
        pool: (0..d).collect(),
        n_try,
        cfg,
        rng,
        nodes: Vec::new(),
    };
    b.grow(0, m, 0);
    Tree { nodes: b.nodes }
}

impl Builder<'_> {
    fn grow(&mut self, start: usize, end: usize, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 });

        let (mut wsum, mut ysum) = (0.0, 0.0);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &r in &self.sorted[0][start..end] {
            let (wr, yr) = (self.w[r as usize] as f64, self.y[r as usize]);
            wsum += wr;
            ysum += wr * yr;
            lo = lo.min(yr);
            hi = hi.max(yr);
        }
        let value = if lo == hi { lo } else { (ysum / wsum).clamp(lo, hi) };

        let min_leaf = self.cfg.min_samples_leaf as f64;
        if depth >= self.cfg.max_depth || lo == hi || wsum < 2.0 * min_leaf {
            self.nodes[id] = Node::Leaf { value };
            return id;
        }
        let Some(best) = self.best_split(start, end, wsum, ysum) else {
            self.nodes[id] = Node::Leaf { value };
            return id;
        };
        self.partition(start, end, &best);
        let mid = start + best.n_left;
        let left = self.grow(start, mid, depth + 1);
        let right = self.grow(mid, end, depth + 1);
        self.nodes[id] = Node::Split { feature: best.feature, threshold: best.threshold, left, right };
        id
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.pool.len();
        if self.n_try >= d {
            return (0..d).collect();
        }
        for i in 0..self.n_try {
            let j = self.rng.random_range(i..d);
            self.pool.swap(i, j);
        }
        let mut c = self.pool[..self.n_try].to_vec();
        c.sort_unstable();
        c
    }

    /// Largest weighted variance reduction; ties keep the lowest feature and
    /// then the lowest threshold.
    fn best_split(&mut self, start: usize, end: usize, wsum: f64, ysum: f64) -> Option<BestSplit> {
        let min_leaf = self.cfg.min_samples_leaf as f64;
        let mut best: Option<BestSplit> = None;
        for f in self.candidate_features() {
            let rows = &self.sorted[f][start..end];
            let (mut wl, mut sl) = (0.0, 0.0);
            for p in 0..rows.len() - 1 {
                let r = rows[p] as usize;
                let wr = self.w[r] as f64;
                wl += wr;
                sl += wr * self.y[r];
                let xv = self.x.get(r, f);
                let xn = self.x.get(rows[p + 1] as usize, f);
                if xn <= xv {
                    continue;
                }
                let wrt = wsum - wl;
                if wl < min_leaf || wrt < min_leaf {
                    continue;
                }
                let diff = sl / wl - (ysum - sl) / wrt;
                let gain = wl * wrt / wsum * diff * diff;
                if gain > best.as_ref().map_or(0.0, |b| b.gain) {
                    let mut threshold = 0.5 * (xv + xn);
                    if threshold >= xn {
                        threshold = xv;
                    }
                    best = Some(BestSplit { feature: f, threshold, n_left: p + 1, gain });
                }
            }
        }
        best
    }

    fn partition(&mut self, start: usize, end: usize, best: &BestSplit) {
        let split_rows = &self.sorted[best.feature][start..end];
        for (p, &r) in split_rows.iter().enumerate() {
            self.goes_left[r as usize] = p < best.n_left;
        }
        for f in 0..self.sorted.len() {
            if f == best.feature {
                continue;
            }
            let rows = &mut self.sorted[f][start..end];
            let (mut li, mut ri) = (0, 0);
            for p in 0..rows.len() {
                let r = rows[p];
                if self.goes_left[r as usize] {
                    rows[li] = r;
                    li += 1;
                } else {
                    self.scratch[ri] = r;
                    ri += 1;
                }
            }
            debug_assert_eq!(li, best.n_left);
            rows[li..].copy_from_slice(&self.scratch[..ri]);
        }
    }
}
