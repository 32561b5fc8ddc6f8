//! Time stepping of the Galerkin system on `span{s_1, ..., s_n}` and
//! Monte Carlo ensembles.
//!
//! Two schemes are provided:
//!
//! * explicit Euler–Maruyama on the Galerkin coefficients,
//!   `X' = P_n(X + dt A(t, X) + B(X) dW)`, for every `alpha`;
//! * semi-implicit Euler–Maruyama for `alpha = 1`, which solves
//!   `u - dt L_h Ψ(t + dt, u) = X + dt (h_t X + Φ₀(X)) + B(X) dW` on the grid
//!   by damped Newton iteration with a tridiagonal Jacobian, then projects.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::drift::DriftSpec;
use crate::error::{invalid, Error, Result};
use crate::math::{self, abs, sqrt};
use crate::noise::{BrownianSource, NoiseSpec};
use crate::stats::StatTable;
use crate::triple::{Field, SpectralDomain};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ExplicitEm,
    SemiImplicitEm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    pub t_end: f64,
    pub n_modes: usize,
    pub scheme: Scheme,
    pub implicit_tol: f64,
    pub implicit_max_iter: usize,
    pub record_ito: bool,
    /// Save every `save_every`-th step (the final step is always saved).
    pub save_every: usize,
    /// Brownian increments are bridge refinements of increments over
    /// `dt · 2^refine_level`.
    pub refine_level: u32,
}

impl StepperConfig {
    pub fn new(dt: f64, t_end: f64, n_modes: usize, scheme: Scheme) -> Self {
        Self {
            dt,
            t_end,
            n_modes,
            scheme,
            implicit_tol: 1e-10,
            implicit_max_iter: 100,
            record_ito: false,
            save_every: 1,
            refine_level: 0,
        }
    }

    /// Number of steps `T / dt`, which must be an integer up to rounding.
    pub fn n_steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("stepper.dt", "must be positive"));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(invalid("stepper.t_end", "must be nonnegative"));
        }
        let ratio = self.t_end / self.dt;
        let n = math::round(ratio);
        if abs(ratio - n) > 1e-6 * n.max(1.0) {
            return Err(invalid("stepper.dt", format!("t_end / dt = {ratio} is not an integer")));
        }
        Ok(n as usize)
    }

    pub fn validate(&self, dom: &SpectralDomain) -> Result<usize> {
        dom.check_modes(self.n_modes)?;
        if self.save_every == 0 {
            return Err(invalid("run.save_every", "must be at least 1"));
        }
        if !(self.implicit_tol > 0.0) || self.implicit_max_iter == 0 {
            return Err(invalid("stepper.implicit_tol", "tolerance and iteration cap must be positive"));
        }
        if self.refine_level > 30 {
            return Err(invalid("stepper.refine_level", "at most 30"));
        }
        if self.scheme == Scheme::SemiImplicitEm && dom.alpha() != 1.0 {
            return Err(Error::Unsupported(format!(
                "semi-implicit scheme needs alpha = 1 (got {}); use the explicit scheme",
                dom.alpha()
            )));
        }
        self.n_steps()
    }

    /// Saved step indices.
    pub fn saved_steps(&self) -> Result<Vec<usize>> {
        let n = self.n_steps()?;
        let mut out: Vec<usize> = (0..=n).filter(|k| k % self.save_every.max(1) == 0).collect();
        if *out.last().unwrap() != n {
            out.push(n);
        }
        Ok(out)
    }

    pub fn saved_times(&self) -> Result<Vec<f64>> {
        Ok(self.saved_steps()?.into_iter().map(|k| k as f64 * self.dt).collect())
    }
}

/// One recorded step for the Itô ledger: the state `X_k`, the drift
/// `Y_k = A(t_k, X_k)`, the diffusion coefficients `Z_k` (per noise mode)
/// and the increment `dW_k`, all in Galerkin coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ItoStep {
    pub t: f64,
    pub dt: f64,
    pub x: Vec<f64>,
    pub drift: Vec<f64>,
    pub diffusion: Vec<f64>,
    pub dw: Vec<f64>,
}

/// Saved Galerkin coefficients (length `n_modes`) per saved time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub ito: Option<Vec<ItoStep>>,
    pub master_seed: u64,
    pub path_idx: u64,
}

impl Trajectory {
    pub fn state_field(&self, dom: &SpectralDomain, i: usize) -> Field {
        Field::from_galerkin(dom, &self.states[i])
    }
}

/// The Galerkin system of a drift and noise on a domain.
#[derive(Debug, Clone, Copy)]
pub struct Galerkin<'a> {
    pub dom: &'a SpectralDomain,
    pub drift: &'a DriftSpec,
    pub noise: &'a NoiseSpec,
}

fn check_finite(c: &[f64], step: usize, t: f64) -> Result<()> {
    if c.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::BlowUp { step, t })
    }
}

impl<'a> Galerkin<'a> {
    pub fn new(dom: &'a SpectralDomain, drift: &'a DriftSpec, noise: &'a NoiseSpec) -> Self {
        Self { dom, drift, noise }
    }

    /// Driven noise modes for `n_modes` Galerkin modes.
    pub fn noise_dim(&self, n_modes: usize) -> usize {
        self.noise.dim(n_modes)
    }

    /// `dt · λ_{n_modes} · sup|Ψ'|`, the quantity bounded by the explicit
    /// stability guard.
    pub fn stability_number(&self, t: f64, x: &Field, dt: f64, n_modes: usize) -> f64 {
        let slope = match self.drift.psi.linear_coefficient() {
            Some(d) => abs(d),
            None => self.drift.sup_slope(t, x.values(self.dom)),
        };
        dt * self.dom.eigenvalue(n_modes) * slope
    }

    /// Diffusion coefficients `Z = ρ(‖X‖_H) σ` for the driven modes.
    pub fn diffusion(&self, x: &Field, n_modes: usize) -> Vec<f64> {
        let dim = self.noise_dim(n_modes);
        if dim == 0 {
            return Vec::new();
        }
        let hn = sqrt(self.dom.h_norm_sq_coeffs(&x.coeffs(self.dom)[..n_modes]));
        self.noise.coefficients(hn, dim)
    }

    /// One explicit step. `x` must lie in the Galerkin space.
    #[allow(clippy::too_many_arguments)]
    pub fn step_explicit(&self, t: f64, x: &Field, dw: &[f64], dt: f64, n_modes: usize, step: usize) -> Result<Field> {
        let guard = self.stability_number(t, x, dt, n_modes);
        if !(guard <= 2.0) {
            return Err(Error::Stability { step, value: guard });
        }
        let a = self.drift.drift_coeffs(self.dom, t, x, n_modes);
        let z = self.diffusion(x, n_modes);
        let mut c: Vec<f64> = x.coeffs(self.dom)[..n_modes].iter().zip(&a).map(|(c, a)| c + dt * a).collect();
        for ((slot, zk), w) in c.iter_mut().zip(&z).zip(dw) {
            *slot += zk * w;
        }
        check_finite(&c, step, t)?;
        Ok(Field::from_galerkin(self.dom, &c))
    }

    /// One semi-implicit step (`alpha = 1` only).
    #[allow(clippy::too_many_arguments)]
    pub fn step_semi_implicit(
        &self,
        t: f64,
        x: &Field,
        dw: &[f64],
        dt: f64,
        n_modes: usize,
        step: usize,
        tol: f64,
        max_iter: usize,
    ) -> Result<Field> {
        let dom = self.dom;
        if dom.alpha() != 1.0 {
            return Err(Error::Unsupported("semi-implicit scheme needs alpha = 1".into()));
        }
        let xv = x.values(dom);
        let h = self.drift.phi.h.eval(t);
        let mut b: Vec<f64> = xv.iter().map(|&s| s + dt * (h * s + self.drift.phi.phi0_eval(s))).collect();
        let z = self.diffusion(x, n_modes);
        if !z.is_empty() {
            let noise: Vec<f64> = z.iter().zip(dw).map(|(zk, w)| zk * w).collect();
            for (bi, ni) in b.iter_mut().zip(dom.from_spectral(&noise)) {
                *bi += ni;
            }
        }
        let u = self.solve_implicit(t + dt, &b, dt, step, tol, max_iter)?;
        check_finite(&u, step, t)?;
        if n_modes == dom.n_grid() {
            Ok(Field::from_values(u))
        } else {
            Ok(Field::from_galerkin(dom, &dom.to_spectral_truncated(&u, n_modes)))
        }
    }

    /// Solves `u - dt a(t) L_h Ψ_0(u) = b` by damped Newton iteration.
    ///
    /// When `Ψ_0` is singular at zero the unknown is `w = Ψ_0(u)` instead,
    /// which keeps the Jacobian bounded; otherwise slopes are clamped at the
    /// slope cap.
    pub fn solve_implicit(&self, t: f64, b: &[f64], dt: f64, step: usize, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        let dom = self.dom;
        let a = self.drift.psi.modulation().eval(t);
        let k = dt * a / (dom.h() * dom.h());
        let psi = &self.drift.psi;
        if psi.singular_at_zero() {
            let inv_slope = |w: f64| {
                let d = psi.slope_base(psi.inverse_base(w));
                if d > 0.0 {
                    1.0 / d
                } else {
                    0.0
                }
            };
            let w0 = b.iter().map(|&s| psi.eval_base(s)).collect();
            let sys = ImplicitSystem { b, k, f: |w| psi.inverse_base(w), df: inv_slope, g: |w| w, dg: |_| 1.0 };
            let w = sys.solve(w0, step, tol, max_iter)?;
            Ok(w.iter().map(|&x| psi.inverse_base(x)).collect())
        } else {
            let sys = ImplicitSystem { b, k, f: |u| u, df: |_| 1.0, g: |u| psi.eval_base(u), dg: |u| psi.slope_base(u) };
            sys.solve(b.to_vec(), step, tol, max_iter)
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn step(&self, cfg: &StepperConfig, t: f64, x: &Field, dw: &[f64], step: usize) -> Result<Field> {
        match cfg.scheme {
            Scheme::ExplicitEm => self.step_explicit(t, x, dw, cfg.dt, cfg.n_modes, step),
            Scheme::SemiImplicitEm => {
                self.step_semi_implicit(t, x, dw, cfg.dt, cfg.n_modes, step, cfg.implicit_tol, cfg.implicit_max_iter)
            }
        }
    }

    /// Runs one path (or a pair on common noise), calling `visit` with the
    /// step index, time and state(s) at every saved step.
    pub fn run<F>(
        &self,
        cfg: &StepperConfig,
        x0: &Field,
        y0: Option<&Field>,
        master_seed: u64,
        path_idx: u64,
        mut visit: F,
    ) -> Result<()>
    where
        F: FnMut(Visit<'_>) -> Result<()>,
    {
        let n_steps = cfg.validate(self.dom)?;
        let dim = self.noise_dim(cfg.n_modes);
        let mut x = self.dom.project(cfg.n_modes, x0)?;
        let mut y = match y0 {
            Some(y) => Some(self.dom.project(cfg.n_modes, y)?),
            None => None,
        };
        let mut bm = BrownianSource::new(master_seed, path_idx, dim, cfg.dt, cfg.refine_level);
        visit(Visit { step: 0, t: 0.0, x: &x, y: y.as_ref(), ito: None })?;
        let zero = vec![0.0; dim];
        for k in 0..n_steps {
            let t = k as f64 * cfg.dt;
            let dw: Vec<f64> = if dim > 0 && !self.noise.is_zero() { bm.increment(k as u64).to_vec() } else { zero.clone() };
            let rec = if cfg.record_ito {
                Some(ItoStep {
                    t,
                    dt: cfg.dt,
                    x: x.coeffs(self.dom)[..cfg.n_modes].to_vec(),
                    drift: self.drift.drift_coeffs(self.dom, t, &x, cfg.n_modes),
                    diffusion: self.diffusion(&x, cfg.n_modes),
                    dw: dw.clone(),
                })
            } else {
                None
            };
            x = self.step(cfg, t, &x, &dw, k)?;
            if let Some(yy) = &y {
                y = Some(self.step(cfg, t, yy, &dw, k)?);
            }
            let saved = (k + 1) % cfg.save_every == 0 || k + 1 == n_steps;
            if saved || rec.is_some() {
                visit(Visit {
                    step: k + 1,
                    t: (k + 1) as f64 * cfg.dt,
                    x: &x,
                    y: y.as_ref(),
                    ito: rec.as_ref().map(|r| (r, saved)),
                })?;
            }
        }
        Ok(())
    }

    pub fn simulate(&self, cfg: &StepperConfig, x0: &Field, master_seed: u64, path_idx: u64) -> Result<Trajectory> {
        let mut traj = Trajectory {
            times: Vec::new(),
            states: Vec::new(),
            ito: if cfg.record_ito { Some(Vec::new()) } else { None },
            master_seed,
            path_idx,
        };
        let n = cfg.n_modes;
        self.run(cfg, x0, None, master_seed, path_idx, |v| {
            if let Some((rec, _)) = v.ito {
                traj.ito.as_mut().unwrap().push(rec.clone());
            }
            if v.is_saved() {
                traj.times.push(v.t);
                traj.states.push(v.x.coeffs(self.dom)[..n].to_vec());
            }
            Ok(())
        })?;
        Ok(traj)
    }

    /// Two paths from `x0` and `y0` driven by identical increments.
    pub fn simulate_pair(
        &self,
        cfg: &StepperConfig,
        x0: &Field,
        y0: &Field,
        master_seed: u64,
        path_idx: u64,
    ) -> Result<(Trajectory, Trajectory)> {
        let mk = || Trajectory { times: Vec::new(), states: Vec::new(), ito: None, master_seed, path_idx };
        let (mut tx, mut ty) = (mk(), mk());
        let n = cfg.n_modes;
        self.run(cfg, x0, Some(y0), master_seed, path_idx, |v| {
            if v.is_saved() {
                tx.times.push(v.t);
                tx.states.push(v.x.coeffs(self.dom)[..n].to_vec());
                ty.times.push(v.t);
                ty.states.push(v.y.unwrap().coeffs(self.dom)[..n].to_vec());
            }
            Ok(())
        })?;
        Ok((tx, ty))
    }

    pub fn observe(&self, obs: &Observable, t: f64, x: &Field, y: Option<&Field>) -> Result<f64> {
        let dom = self.dom;
        Ok(match *obs {
            Observable::HNormSq => dom.h_norm_sq_coeffs(x.coeffs(dom)),
            Observable::DiffHNormSq => {
                let y = y.ok_or_else(|| Error::Precondition("difference observable needs a paired path".into()))?;
                let d: Vec<f64> = x.coeffs(dom).iter().zip(y.coeffs(dom)).map(|(a, b)| a - b).collect();
                dom.h_norm_sq_coeffs(&d)
            }
            Observable::Mode(k) => x.coeffs(dom)[k - 1],
            Observable::HInnerWithMode(k) => x.coeffs(dom)[k - 1] / dom.eigenvalue(k),
            Observable::R => self.drift.r_value(dom, x)?,
            Observable::Modular => self.drift.modular(dom, x)?,
            Observable::MaxNorm => x.max_abs(dom),
            Observable::Time => t,
        })
    }
}

/// Callback payload of [`Galerkin::run`].
#[derive(Debug, Clone, Copy)]
pub struct Visit<'s> {
    pub step: usize,
    pub t: f64,
    pub x: &'s Field,
    pub y: Option<&'s Field>,
    /// The record of the step that produced this state, and whether the
    /// state is also a saved one.
    pub ito: Option<(&'s ItoStep, bool)>,
}

impl Visit<'_> {
    pub fn is_saved(&self) -> bool {
        self.ito.is_none_or(|(_, saved)| saved)
    }
}

/// Scalar functionals recorded at saved times.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    HNormSq,
    /// `‖X - Y‖²_H` for paired runs.
    DiffHNormSq,
    /// Coefficient `X^_k`.
    Mode(usize),
    /// `⟨X, s_k⟩_H = X^_k / λ_k`.
    HInnerWithMode(usize),
    /// `m(N(X)) + ‖X‖²_H`.
    R,
    /// `m(N(X))`.
    Modular,
    MaxNorm,
    Time,
}

impl Observable {
    pub fn name(&self) -> String {
        match self {
            Observable::HNormSq => "h_norm_sq".into(),
            Observable::DiffHNormSq => "diff_h_norm_sq".into(),
            Observable::Mode(k) => format!("mode_{k}"),
            Observable::HInnerWithMode(k) => format!("h_inner_mode_{k}"),
            Observable::R => "r".into(),
            Observable::Modular => "modular".into(),
            Observable::MaxNorm => "max_norm".into(),
            Observable::Time => "t".into(),
        }
    }

    /// Lipschitz constant with respect to `‖·‖_H`, where finite.
    pub fn lipschitz(&self, dom: &SpectralDomain) -> Option<f64> {
        match *self {
            Observable::HInnerWithMode(k) => Some(1.0 / sqrt(dom.eigenvalue(k))),
            Observable::Mode(k) => Some(sqrt(dom.eigenvalue(k))),
            _ => None,
        }
    }
}

/// Everything that defines an ensemble; paths are indexed `0..size`.
#[derive(Debug, Clone)]
pub struct Ensemble<'a> {
    pub system: Galerkin<'a>,
    pub config: StepperConfig,
    pub x0: Field,
    pub y0: Option<Field>,
    pub master_seed: u64,
}

impl Ensemble<'_> {
    /// Row-major `times × observables` for path `idx`.
    pub fn observe_path(&self, idx: usize, observables: &[Observable]) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        let sys = self.system;
        sys.run(&self.config, &self.x0, self.y0.as_ref(), self.master_seed, idx as u64, |v| {
            if v.is_saved() {
                for o in observables {
                    out.push(sys.observe(o, v.t, v.x, v.y)?);
                }
            }
            Ok(())
        })?;
        Ok(out)
    }

    pub fn saved_times(&self) -> Result<Vec<f64>> {
        self.config.saved_times()
    }
}

pub fn observable_names(observables: &[Observable]) -> Vec<String> {
    observables.iter().map(Observable::name).collect()
}

/// Sequential ensemble statistics.
pub fn monte_carlo(ens: &Ensemble<'_>, ensemble_size: usize, observables: &[Observable]) -> Result<StatTable> {
    if ensemble_size < 2 {
        return Err(invalid("run.ensemble_size", "must be at least 2"));
    }
    let paths = (0..ensemble_size).map(|i| ens.observe_path(i, observables)).collect::<Result<Vec<_>>>()?;
    StatTable::from_paths(ens.saved_times()?, observable_names(observables), &paths)
}

/// `f(y_i) - k (g(y_{i-1}) - 2 g(y_i) + g(y_{i+1})) = b_i` with zero
/// boundary values.
struct ImplicitSystem<'a, F, DF, G, DG> {
    b: &'a [f64],
    k: f64,
    f: F,
    df: DF,
    g: G,
    dg: DG,
}

impl<F, DF, G, DG> ImplicitSystem<'_, F, DF, G, DG>
where
    F: Fn(f64) -> f64,
    DF: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
    DG: Fn(f64) -> f64,
{
    fn residual(&self, y: &[f64], out: &mut Vec<f64>) -> f64 {
        let n = y.len();
        let gy: Vec<f64> = y.iter().map(|&s| (self.g)(s)).collect();
        out.clear();
        let mut m: f64 = 0.0;
        for i in 0..n {
            let left = if i > 0 { gy[i - 1] } else { 0.0 };
            let right = if i + 1 < n { gy[i + 1] } else { 0.0 };
            let r = (self.f)(y[i]) - self.k * (left - 2.0 * gy[i] + right) - self.b[i];
            m = m.max(abs(r));
            out.push(r);
        }
        m
    }

    fn solve(&self, mut y: Vec<f64>, step: usize, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        let n = y.len();
        let k = self.k;
        let mut res = Vec::with_capacity(n);
        let mut trial_res = Vec::with_capacity(n);
        let mut norm = self.residual(&y, &mut res);
        let (mut lower, mut diag, mut upper) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut iter = 0;
        while norm > tol {
            if iter == max_iter || !norm.is_finite() {
                return Err(Error::Convergence { step, iterations: iter, residual: norm });
            }
            let dg: Vec<f64> = y.iter().map(|&s| (self.dg)(s)).collect();
            for i in 0..n {
                diag[i] = (self.df)(y[i]) + 2.0 * k * dg[i];
                lower[i] = if i > 0 { -k * dg[i - 1] } else { 0.0 };
                upper[i] = if i + 1 < n { -k * dg[i + 1] } else { 0.0 };
            }
            let rhs: Vec<f64> = res.iter().map(|r| -r).collect();
            let delta = math::solve_tridiagonal(&lower, &diag, &upper, &rhs);
            let mut lam = 1.0;
            loop {
                let trial: Vec<f64> = y.iter().zip(&delta).map(|(x, d)| x + lam * d).collect();
                let tn = self.residual(&trial, &mut trial_res);
                if tn < norm || lam < 1e-12 {
                    y = trial;
                    core::mem::swap(&mut res, &mut trial_res);
                    norm = tn;
                    break;
                }
                lam *= 0.5;
            }
            iter += 1;
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_integer_horizon_is_rejected() {
        let c = StepperConfig::new(0.3, 1.0, 1, Scheme::ExplicitEm);
        assert!(c.n_steps().is_err());
        let c = StepperConfig::new(0.1, 1.0, 1, Scheme::ExplicitEm);
        assert_eq!(c.n_steps().unwrap(), 10);
    }

    #[test]
    fn saved_steps_include_the_last() {
        let mut c = StepperConfig::new(0.1, 1.0, 1, Scheme::ExplicitEm);
        c.save_every = 3;
        assert_eq!(c.saved_steps().unwrap(), vec![0, 3, 6, 9, 10]);
    }
}
