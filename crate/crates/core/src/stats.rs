//! Ensemble statistics with an order-fixed reduction.
//!
//! Per-path observations are reduced in path-index order with pairwise
//! summation, so the result is the same whether the paths were produced
//! sequentially or in parallel.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::math::{pairwise_sum, sqrt};

/// Per saved time and observable: mean, unbiased variance and the standard
/// errors of both.
#[derive(Debug, Clone, PartialEq)]
pub struct StatTable {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    pub n_paths: usize,
    /// Row-major `times × names`.
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub se_mean: Vec<f64>,
    pub se_var: Vec<f64>,
}

impl StatTable {
    /// `paths[p]` holds the row-major `times × names` observations of path `p`.
    pub fn from_paths(times: Vec<f64>, names: Vec<String>, paths: &[Vec<f64>]) -> Result<Self> {
        let n = paths.len();
        if n < 2 {
            return Err(invalid("ensemble_size", "need at least 2 paths"));
        }
        let cells = times.len() * names.len();
        if paths.iter().any(|p| p.len() != cells) {
            return Err(invalid("observations", "path rows have inconsistent lengths"));
        }
        let nf = n as f64;
        let mut mean = Vec::with_capacity(cells);
        let mut var = Vec::with_capacity(cells);
        let mut se_mean = Vec::with_capacity(cells);
        let mut se_var = Vec::with_capacity(cells);
        let mut col = alloc::vec![0.0; n];
        for c in 0..cells {
            for (slot, p) in col.iter_mut().zip(paths) {
                *slot = p[c];
            }
            let m = pairwise_sum(&col) / nf;
            let dev2: Vec<f64> = col.iter().map(|x| (x - m) * (x - m)).collect();
            let m2 = pairwise_sum(&dev2) / nf;
            let dev4: Vec<f64> = dev2.iter().map(|d| d * d).collect();
            let m4 = pairwise_sum(&dev4) / nf;
            let v = m2 * nf / (nf - 1.0);
            // Var(s²) ≈ (μ4 - σ⁴ (n-3)/(n-1)) / n
            let vv = (m4 - v * v * (nf - 3.0) / (nf - 1.0)) / nf;
            mean.push(m);
            var.push(v);
            se_mean.push(sqrt(v / nf));
            se_var.push(sqrt(vv.max(0.0)));
        }
        Ok(Self { times, names, n_paths: n, mean, var, se_mean, se_var })
    }

    pub fn n_obs(&self) -> usize {
        self.names.len()
    }

    pub fn index(&self, time_idx: usize, obs: usize) -> usize {
        time_idx * self.names.len() + obs
    }

    /// Column of means for observable `obs`.
    pub fn mean_series(&self, obs: usize) -> Vec<f64> {
        (0..self.times.len()).map(|t| self.mean[self.index(t, obs)]).collect()
    }

    pub fn se_series(&self, obs: usize) -> Vec<f64> {
        (0..self.times.len()).map(|t| self.se_mean[self.index(t, obs)]).collect()
    }
}
