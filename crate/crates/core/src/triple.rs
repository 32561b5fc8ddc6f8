//! Discrete Gelfand triple `V ⊂ H ⊂ V*` on the unit interval.
//!
//! The interval `(0, 1)` carries `n` interior grid points `x_i = i h`,
//! `h = 1/(n+1)`, homogeneous Dirichlet boundary values and the quadrature
//! `m(f) = h Σ f_i`. The discrete sine vectors
//! `s_k(i) = √2 sin(kπ i h)` are orthonormal under `m` and diagonalise the
//! three-point Laplacian with eigenvalues `(4/h²) sin²(kπh/2)`. The operator
//! `L` is minus the `alpha`-th power of that matrix, so
//!
//! * `(L f)^_k = -λ_k f^_k`,
//! * `⟨u, v⟩_H = Σ_k u^_k v^_k / λ_k = m(u (-L)⁻¹ v)`.
//!
//! Spectral coefficients are `f^_k = m(f s_k)` and `f = Σ_k f^_k s_k`.

use alloc::vec;
use alloc::vec::Vec;
use core::cell::OnceCell;

use crate::error::{invalid, Error, Result};
use crate::math::{self, PI};
use crate::orlicz::{DiscreteMeasure, YoungLike};

/// Largest supported grid. Transforms are dense, so memory is `O(n²)`.
pub const MAX_GRID: usize = 4096;

#[derive(Debug, Clone)]
pub struct SpectralDomain {
    n: usize,
    h: f64,
    alpha: f64,
    eig: Vec<f64>,
    fd_eig: Vec<f64>,
    /// Row `k-1` holds `s_k` sampled at the grid.
    basis: Vec<f64>,
    measure: DiscreteMeasure,
}

impl SpectralDomain {
    pub fn new(n_grid: usize, alpha: f64) -> Result<Self> {
        if n_grid == 0 || n_grid > MAX_GRID {
            return Err(invalid("n_grid", alloc::format!("{n_grid} not in 1..={MAX_GRID}")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(invalid("alpha", alloc::format!("{alpha} not in (0, 1]")));
        }
        let n = n_grid;
        let np1 = n + 1;
        let h = 1.0 / np1 as f64;
        // sin(π j/(n+1)) for j in 0..2(n+1); k·i is reduced exactly before lookup
        let period = 2 * np1;
        let sines: Vec<f64> = (0..period).map(|j| math::sin(PI * j as f64 / np1 as f64)).collect();
        let root2 = math::sqrt(2.0);
        let mut basis = vec![0.0; n * n];
        for k in 1..=n {
            let row = &mut basis[(k - 1) * n..k * n];
            for (i, slot) in row.iter_mut().enumerate() {
                *slot = root2 * sines[(k * (i + 1)) % period];
            }
        }
        let fd_eig: Vec<f64> = (1..=n)
            .map(|k| {
                let s = math::sin(k as f64 * PI * h / 2.0);
                4.0 * s * s / (h * h)
            })
            .collect();
        let eig = fd_eig.iter().map(|&l| if alpha == 1.0 { l } else { math::powf(l, alpha) }).collect();
        Ok(Self { n, h, alpha, eig, fd_eig, basis, measure: DiscreteMeasure::uniform(n, h) })
    }

    pub fn n_grid(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn measure(&self) -> &DiscreteMeasure {
        &self.measure
    }

    /// `λ_1, ..., λ_n` (index 0 holds `λ_1`).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eig
    }

    /// Eigenvalue `λ_k`, `k` starting at 1.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        self.eig[k - 1]
    }

    /// Eigenvalues of the unpowered three-point Laplacian.
    pub fn fd_eigenvalues(&self) -> &[f64] {
        &self.fd_eig
    }

    /// `s_k` at the grid points, `k` starting at 1.
    pub fn basis_vector(&self, k: usize) -> &[f64] {
        &self.basis[(k - 1) * self.n..k * self.n]
    }

    pub fn grid_points(&self) -> Vec<f64> {
        (1..=self.n).map(|i| i as f64 * self.h).collect()
    }

    /// Sampled function `f(x_i)` as a field.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_values(self.grid_points().into_iter().map(f).collect())
    }

    /// First `n_modes` spectral coefficients of grid values.
    pub fn to_spectral_truncated(&self, values: &[f64], n_modes: usize) -> Vec<f64> {
        debug_assert_eq!(values.len(), self.n);
        (1..=n_modes.min(self.n))
            .map(|k| {
                let s = self.basis_vector(k);
                let mut acc = 0.0;
                for (v, b) in values.iter().zip(s) {
                    acc += v * b;
                }
                self.h * acc
            })
            .collect()
    }

    pub fn to_spectral(&self, values: &[f64]) -> Vec<f64> {
        self.to_spectral_truncated(values, self.n)
    }

    /// Grid values of `Σ_k c_k s_k`. `coeffs` may be shorter than `n`.
    pub fn from_spectral(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (k, &c) in coeffs.iter().enumerate().take(self.n) {
            if c == 0.0 {
                continue;
            }
            for (o, b) in out.iter_mut().zip(self.basis_vector(k + 1)) {
                *o += c * b;
            }
        }
        out
    }

    fn check_len(&self, f: &Field) -> Result<()> {
        if f.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: f.len() });
        }
        Ok(())
    }

    /// `L f`, the spectral multiplier `-λ_k`.
    pub fn apply_l(&self, f: &Field) -> Result<Field> {
        self.check_len(f)?;
        let c = f.coeffs(self);
        Ok(Field::from_coeffs(c.iter().zip(&self.eig).map(|(c, l)| -l * c).collect()))
    }

    /// `L⁻¹ f`, the spectral multiplier `-1/λ_k`.
    pub fn apply_linv(&self, f: &Field) -> Result<Field> {
        self.check_len(f)?;
        let c = f.coeffs(self);
        Ok(Field::from_coeffs(c.iter().zip(&self.eig).map(|(c, l)| -c / l).collect()))
    }

    /// `⟨u, v⟩_H` from (possibly truncated) coefficient vectors.
    pub fn h_inner_coeffs(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((a, b), l) in u.iter().zip(v).zip(&self.eig) {
            acc += a * b / l;
        }
        acc
    }

    pub fn h_norm_sq_coeffs(&self, u: &[f64]) -> f64 {
        self.h_inner_coeffs(u, u)
    }

    pub fn h_inner(&self, u: &Field, v: &Field) -> Result<f64> {
        self.check_len(u)?;
        self.check_len(v)?;
        Ok(self.h_inner_coeffs(u.coeffs(self), v.coeffs(self)))
    }

    pub fn h_norm(&self, u: &Field) -> Result<f64> {
        Ok(math::sqrt(self.h_inner(u, u)?))
    }

    /// `‖u‖_V = ‖u‖_{L_N} + ‖u‖_H`.
    pub fn v_norm<N: YoungLike + ?Sized>(&self, n: &N, u: &Field) -> Result<f64> {
        self.check_len(u)?;
        let lux = n.luxemburg_norm(u.values(self), &self.measure)?;
        Ok(lux + self.h_norm(u)?)
    }

    /// Orthogonal projection onto `span{s_1, ..., s_{n_modes}}`.
    pub fn project(&self, n_modes: usize, u: &Field) -> Result<Field> {
        self.check_modes(n_modes)?;
        self.check_len(u)?;
        let mut c = u.coeffs(self).to_vec();
        for x in c.iter_mut().skip(n_modes) {
            *x = 0.0;
        }
        Ok(Field::from_coeffs(c))
    }

    pub fn check_modes(&self, n_modes: usize) -> Result<()> {
        if n_modes == 0 || n_modes > self.n {
            return Err(Error::ModesOutOfRange { n_modes, n_grid: self.n });
        }
        Ok(())
    }

    /// `⟨L v, u⟩_{V*,V} = -m(v u)` evaluated by quadrature.
    pub fn pairing_vstar_v(&self, v: &Field, u: &Field) -> Result<f64> {
        self.check_len(v)?;
        self.check_len(u)?;
        let prod: Vec<f64> = v.values(self).iter().zip(u.values(self)).map(|(a, b)| a * b).collect();
        Ok(-self.measure.integrate(&prod))
    }

    /// The same pairing evaluated as `⟨L v, u⟩_H` in the spectral domain.
    pub fn pairing_via_h(&self, v: &Field, u: &Field) -> Result<f64> {
        let lv = self.apply_l(v)?;
        self.h_inner(&lv, u)
    }

    /// Three-point stencil `(f_{i-1} - 2 f_i + f_{i+1}) / h²` with zero
    /// boundary values.
    pub fn stencil_laplacian(&self, f: &[f64]) -> Vec<f64> {
        let n = f.len();
        let inv_h2 = 1.0 / (self.h * self.h);
        (0..n)
            .map(|i| {
                let left = if i > 0 { f[i - 1] } else { 0.0 };
                let right = if i + 1 < n { f[i + 1] } else { 0.0 };
                (left - 2.0 * f[i] + right) * inv_h2
            })
            .collect()
    }
}

/// A state as grid values and spectral coefficients, either of which is
/// computed from the other on first use.
#[derive(Debug, Clone)]
pub struct Field {
    len: usize,
    values: OnceCell<Vec<f64>>,
    coeffs: OnceCell<Vec<f64>>,
}

impl Field {
    pub fn from_values(values: Vec<f64>) -> Self {
        let len = values.len();
        Self { len, values: OnceCell::from(values), coeffs: OnceCell::new() }
    }

    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        let len = coeffs.len();
        Self { len, values: OnceCell::new(), coeffs: OnceCell::from(coeffs) }
    }

    /// Zero-padded coefficients of a Galerkin state with fewer modes.
    pub fn from_galerkin(dom: &SpectralDomain, coeffs: &[f64]) -> Self {
        let mut c = vec![0.0; dom.n_grid()];
        c[..coeffs.len()].copy_from_slice(coeffs);
        Self::from_coeffs(c)
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_values(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn values(&self, dom: &SpectralDomain) -> &[f64] {
        self.values.get_or_init(|| dom.from_spectral(self.coeffs.get().expect("field has a representation")))
    }

    pub fn coeffs(&self, dom: &SpectralDomain) -> &[f64] {
        self.coeffs.get_or_init(|| dom.to_spectral(self.values.get().expect("field has a representation")))
    }

    pub fn scaled(&self, dom: &SpectralDomain, a: f64) -> Field {
        Field::from_values(self.values(dom).iter().map(|x| a * x).collect())
    }

    /// `self + a·other`, on grid values.
    pub fn axpy(&self, dom: &SpectralDomain, a: f64, other: &Field) -> Field {
        Field::from_values(self.values(dom).iter().zip(other.values(dom)).map(|(x, y)| x + a * y).collect())
    }

    pub fn max_abs(&self, dom: &SpectralDomain) -> f64 {
        math::max_abs(self.values(dom))
    }
}
