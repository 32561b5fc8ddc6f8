//! Diagonal Hilbert–Schmidt diffusion and Brownian increments.
//!
//! The noise space is spanned by the first `dim` sine modes and
//! `B(X) g_k = ρ(‖X‖_H) σ_k s_k`, so
//! `‖B(X)‖²_HS = ρ(‖X‖_H)² Σ_k σ_k² / λ_k`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::math::sqrt;
use crate::rng;
use crate::triple::{Field, SpectralDomain};

/// Scalar factor `ρ(‖X‖_H)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Multiplier {
    Constant(f64),
    /// `ρ(x) = ρ_min + (ρ_max - ρ_min) / (1 + κ x)`, Lipschitz constant
    /// `(ρ_max - ρ_min) κ`.
    Decay {
        rho_min: f64,
        rho_max: f64,
        kappa: f64,
    },
}

impl Multiplier {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Multiplier::Constant(r) => r,
            Multiplier::Decay { rho_min, rho_max, kappa } => rho_min + (rho_max - rho_min) / (1.0 + kappa * x),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            Multiplier::Constant(_) => 0.0,
            Multiplier::Decay { rho_min, rho_max, kappa } => (rho_max - rho_min) * kappa,
        }
    }

    pub fn sup(&self) -> f64 {
        match *self {
            Multiplier::Constant(r) => r.abs(),
            Multiplier::Decay { rho_min, rho_max, .. } => rho_min.abs().max(rho_max.abs()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    sigma: Vec<f64>,
    mult: Multiplier,
}

impl NoiseSpec {
    pub fn new(sigma: Vec<f64>, mult: Multiplier) -> Result<Self> {
        if sigma.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(invalid("noise.sigma", "amplitudes must be finite and nonnegative"));
        }
        match mult {
            Multiplier::Constant(r) if !r.is_finite() => {
                return Err(invalid("noise.mult", "ρ must be finite"));
            }
            Multiplier::Decay { rho_min, rho_max, kappa }
                if !(rho_min >= 0.0 && rho_max >= rho_min && kappa >= 0.0 && rho_max.is_finite() && kappa.is_finite()) =>
            {
                return Err(invalid("noise.mult", "need 0 ≤ ρ_min ≤ ρ_max and κ ≥ 0"));
            }
            _ => {}
        }
        Ok(Self { sigma, mult })
    }

    /// Additive noise `σ_k`.
    pub fn additive(sigma: Vec<f64>) -> Result<Self> {
        Self::new(sigma, Multiplier::Constant(1.0))
    }

    /// `σ_k = σ₀ k^{-β}` for `k = 1..=n`.
    pub fn power_decay(sigma0: f64, beta: f64, n: usize, mult: Multiplier) -> Result<Self> {
        Self::new((1..=n).map(|k| sigma0 * crate::math::powf(k as f64, -beta)).collect(), mult)
    }

    pub fn zero() -> Self {
        Self { sigma: Vec::new(), mult: Multiplier::Constant(0.0) }
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn multiplier(&self) -> Multiplier {
        self.mult
    }

    pub fn is_additive(&self) -> bool {
        matches!(self.mult, Multiplier::Constant(_))
    }

    pub fn is_zero(&self) -> bool {
        self.sigma.iter().all(|&s| s == 0.0) || self.mult == Multiplier::Constant(0.0)
    }

    /// Number of driven modes for a Galerkin system of `n_modes` modes.
    pub fn dim(&self, n_modes: usize) -> usize {
        self.sigma.len().min(n_modes)
    }

    /// `HS₀² = Σ σ_k² / λ_k` over the modes that exist on `dom`.
    pub fn hs0_sq(&self, dom: &SpectralDomain) -> f64 {
        self.sigma.iter().zip(dom.eigenvalues()).map(|(s, l)| s * s / l).sum()
    }

    /// `‖B(X)‖²_HS` given `‖X‖_H`.
    pub fn hs_norm_sq_at(&self, dom: &SpectralDomain, x_hnorm: f64) -> f64 {
        let rho = self.mult.eval(x_hnorm);
        rho * rho * self.hs0_sq(dom)
    }

    pub fn hs_norm_sq(&self, dom: &SpectralDomain, x: &Field) -> Result<f64> {
        Ok(self.hs_norm_sq_at(dom, dom.h_norm(x)?))
    }

    /// `(Lρ HS₀)²`, the Lipschitz constant of `B` squared.
    pub fn lipschitz_sq(&self, dom: &SpectralDomain) -> f64 {
        let l = self.mult.lipschitz();
        l * l * self.hs0_sq(dom)
    }

    /// Per-mode diffusion coefficients `ρ(‖X‖_H) σ_k`, `k ≤ dim`.
    pub fn coefficients(&self, x_hnorm: f64, dim: usize) -> Vec<f64> {
        let rho = self.mult.eval(x_hnorm);
        self.sigma.iter().take(dim).map(|s| rho * s).collect()
    }

    /// `B(X) dW` as a field on `dom`. `dw` must have one entry per noise mode
    /// that exists on `dom`.
    pub fn apply_b(&self, dom: &SpectralDomain, x: &Field, dw: &[f64]) -> Result<Field> {
        let dim = self.dim(dom.n_grid());
        if dw.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: dw.len() });
        }
        let z = self.coefficients(dom.h_norm(x)?, dim);
        let mut c = vec![0.0; dom.n_grid()];
        for ((slot, zk), w) in c.iter_mut().zip(&z).zip(dw) {
            *slot = zk * w;
        }
        Ok(Field::from_coeffs(c))
    }
}

/// Independent `N(0, dt)` draws, one per mode.
pub fn sample_increment<R: Rng + ?Sized>(dim: usize, dt: f64, rng: &mut R) -> Vec<f64> {
    let sd = sqrt(dt.max(0.0));
    (0..dim)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            sd * z
        })
        .collect()
}

/// Brownian increments on a dyadic refinement tree.
///
/// Coarse block `j` covers `[j·base_dt, (j+1)·base_dt)`. Its increment and
/// all bridge refinements are drawn from the stream
/// `(master_seed, path_idx, j)` in level → node → mode order, so the draws
/// for level `ℓ` are a prefix of those for level `ℓ + 1`. Consequently two
/// sources that differ only in `level` see the same Brownian path, and
/// adjacent fine increments sum to the coarser one.
#[derive(Debug, Clone)]
pub struct BrownianSource {
    master_seed: u64,
    path_idx: u64,
    dim: usize,
    base_dt: f64,
    level: u32,
    block: Option<u64>,
    /// `2^level × dim` increments of the cached block.
    cache: Vec<f64>,
}

impl BrownianSource {
    pub fn new(master_seed: u64, path_idx: u64, dim: usize, dt: f64, level: u32) -> Self {
        Self { master_seed, path_idx, dim, base_dt: dt * (1u64 << level) as f64, level, block: None, cache: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.base_dt / (1u64 << self.level) as f64
    }

    fn fill_block(&mut self, j: u64) {
        let mut rng: ChaCha8Rng = rng::stream(self.master_seed, self.path_idx, j);
        let d = self.dim;
        let mut cur: Vec<f64> = sample_increment(d, self.base_dt, &mut rng);
        let mut tau = self.base_dt;
        for _ in 0..self.level {
            let nodes = cur.len() / d.max(1);
            let mut next = vec![0.0; 2 * cur.len()];
            let half_sd = 0.5 * sqrt(tau);
            for node in 0..nodes {
                for m in 0..d {
                    let z: f64 = rng.sample(StandardNormal);
                    let total = cur[node * d + m];
                    let left = 0.5 * total + half_sd * z;
                    next[2 * node * d + m] = left;
                    next[(2 * node + 1) * d + m] = total - left;
                }
            }
            cur = next;
            tau *= 0.5;
        }
        self.cache = cur;
        self.block = Some(j);
    }

    /// Increment over `[step·dt, (step+1)·dt)`.
    pub fn increment(&mut self, step: u64) -> &[f64] {
        let j = step >> self.level;
        if self.block != Some(j) {
            self.fill_block(j);
        }
        let sub = (step & ((1u64 << self.level) - 1)) as usize;
        &self.cache[sub * self.dim..(sub + 1) * self.dim]
    }
}
