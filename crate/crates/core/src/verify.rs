//! Checks of the theory along simulated trajectories: the Itô formula for
//! `‖X‖²_H`, contraction, the energy estimate, extinction, the linear
//! (Ornstein–Uhlenbeck) oracle and exponential ergodicity.

use alloc::format;
use alloc::vec::Vec;

use crate::drift::DriftSpec;
use crate::error::{Error, Result};
use crate::galerkin::Trajectory;
use crate::math::{exp, ln, pairwise_sum, powf, sqrt, CompensatedSum};
use crate::noise::NoiseSpec;
use crate::triple::SpectralDomain;

/// Per-step terms of the Itô decomposition of `‖X_k‖²_H`.
#[derive(Debug, Clone, PartialEq)]
pub struct ItoLedger {
    /// `t_0, ..., t_n`.
    pub times: Vec<f64>,
    pub norm_sq: Vec<f64>,
    /// `2⟨Y_j, X_j⟩_{V*,V}` per step.
    pub pairing: Vec<f64>,
    /// `‖Z_j‖²_HS` per step.
    pub hs: Vec<f64>,
    /// `2⟨Z_j dW_j, X_j⟩_H` per step.
    pub martingale: Vec<f64>,
    /// `‖X_k‖² - [‖X_0‖² + Σ_{j<k} (2⟨Y_j,X_j⟩ + ‖Z_j‖²) dt + Σ_{j<k} 2⟨Z_j dW_j, X_j⟩]`.
    pub residual: Vec<f64>,
    /// `Σ_{j<k} dt² ‖Y_j‖²_H`, the remainder of the explicit scheme without noise.
    pub remainder: Vec<f64>,
}

impl ItoLedger {
    pub fn max_abs_residual(&self) -> f64 {
        self.residual.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Builds the ledger of a trajectory simulated with `record_ito`.
///
/// Norm differences are accumulated as `Σ_m (c'_m - c_m)(c'_m + c_m)/λ_m`
/// with compensated summation, so the residual is not swamped by the
/// rounding of `‖X‖²_H` itself.
pub fn ito_ledger(dom: &SpectralDomain, traj: &Trajectory) -> Result<ItoLedger> {
    let steps = traj.ito.as_ref().ok_or_else(|| Error::Precondition("trajectory was simulated without record_ito".into()))?;
    let last = traj.states.last().ok_or_else(|| Error::Precondition("empty trajectory".into()))?;
    let lam = dom.eigenvalues();
    let n = steps.len();
    let state = |k: usize| -> &[f64] {
        if k < n {
            &steps[k].x
        } else {
            last
        }
    };
    let x0 = state(0);
    let mut led = ItoLedger {
        times: Vec::with_capacity(n + 1),
        norm_sq: Vec::with_capacity(n + 1),
        pairing: Vec::with_capacity(n),
        hs: Vec::with_capacity(n),
        martingale: Vec::with_capacity(n),
        residual: Vec::with_capacity(n + 1),
        remainder: Vec::with_capacity(n + 1),
    };
    led.times.push(traj.times.first().copied().unwrap_or(0.0));
    led.norm_sq.push(dom.h_norm_sq_coeffs(x0));
    led.residual.push(0.0);
    led.remainder.push(0.0);
    let mut res = CompensatedSum::default();
    let mut rem = CompensatedSum::default();
    for (j, s) in steps.iter().enumerate() {
        let (c, c1) = (&s.x, state(j + 1));
        let mut dn = CompensatedSum::default();
        let mut pair = CompensatedSum::default();
        let mut a2 = CompensatedSum::default();
        for m in 0..c.len() {
            dn.add((c1[m] - c[m]) * (c1[m] + c[m]) / lam[m]);
            pair.add(2.0 * s.drift[m] * c[m] / lam[m]);
            a2.add(s.drift[m] * s.drift[m] / lam[m]);
        }
        let mut hs = 0.0;
        let mut mart = 0.0;
        for m in 0..s.diffusion.len() {
            hs += s.diffusion[m] * s.diffusion[m] / lam[m];
            mart += 2.0 * s.diffusion[m] * s.dw[m] * c[m] / lam[m];
        }
        res.add(dn.value());
        res.add(-(pair.value() + hs) * s.dt);
        res.add(-mart);
        rem.add(s.dt * s.dt * a2.value());
        led.times.push(s.t + s.dt);
        led.norm_sq.push(dom.h_norm_sq_coeffs(c1));
        led.pairing.push(pair.value());
        led.hs.push(hs);
        led.martingale.push(mart);
        led.residual.push(res.value());
        led.remainder.push(rem.value());
    }
    Ok(led)
}

/// `(max_k |residual_k|, residuals)`.
pub fn ito_residual(dom: &SpectralDomain, traj: &Trajectory) -> Result<(f64, Vec<f64>)> {
    let led = ito_ledger(dom, traj)?;
    Ok((led.max_abs_residual(), led.residual))
}

/// Minimum ensemble size accepted by [`contraction_test`].
pub const MIN_CONTRACTION_PATHS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    /// `sqrt(se_regression² + se_monte_carlo²)`.
    pub se: f64,
    pub se_regression: f64,
    pub se_monte_carlo: f64,
    pub n_points: usize,
}

/// Least-squares slope of `log E‖X_t - Y_t‖²_H` against `t`.
///
/// Times in the first 10% of the horizon and times where the mean is below
/// `1e-12` are excluded. The Monte Carlo part of the standard error uses
/// the per-path influence `Σ_i w_i (x_{p,i} - m_i)/m_i` of the fitted slope.
pub fn fit_log_slope(times: &[f64], per_path: &[Vec<f64>]) -> Result<SlopeFit> {
    let n = per_path.len();
    if n < 2 {
        return Err(Error::Precondition("need at least 2 paths".into()));
    }
    let horizon = times.last().copied().unwrap_or(0.0);
    let means: Vec<f64> =
        (0..times.len()).map(|i| pairwise_sum(&per_path.iter().map(|p| p[i]).collect::<Vec<_>>()) / n as f64).collect();
    let idx: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= 0.1 * horizon && means[i] >= 1e-12).collect();
    if idx.len() < 2 {
        return Err(Error::Precondition(
            "slope undefined: fewer than 2 usable times (identical starts or a collapsed difference)".into(),
        ));
    }
    let k = idx.len() as f64;
    let tbar = idx.iter().map(|&i| times[i]).sum::<f64>() / k;
    let ys: Vec<f64> = idx.iter().map(|&i| ln(means[i])).collect();
    let ybar = ys.iter().sum::<f64>() / k;
    let sxx: f64 = idx.iter().map(|&i| (times[i] - tbar) * (times[i] - tbar)).sum();
    let sxy: f64 = idx.iter().zip(&ys).map(|(&i, y)| (times[i] - tbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let se_reg = if idx.len() > 2 {
        let ss: f64 = idx
            .iter()
            .zip(&ys)
            .map(|(&i, y)| {
                let r = y - ybar - slope * (times[i] - tbar);
                r * r
            })
            .sum();
        sqrt(ss / (k - 2.0) / sxx)
    } else {
        0.0
    };
    let infl: Vec<f64> =
        per_path.iter().map(|p| idx.iter().map(|&i| (times[i] - tbar) / sxx * (p[i] - means[i]) / means[i]).sum()).collect();
    let im = pairwise_sum(&infl) / n as f64;
    let iv = pairwise_sum(&infl.iter().map(|x| (x - im) * (x - im)).collect::<Vec<_>>()) / (n as f64 - 1.0);
    let se_mc = sqrt(iv / n as f64);
    Ok(SlopeFit {
        slope,
        se: sqrt(se_reg * se_reg + se_mc * se_mc),
        se_regression: se_reg,
        se_monte_carlo: se_mc,
        n_points: idx.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionReport {
    pub fit: SlopeFit,
    pub declared_c: f64,
    pub n_paths: usize,
    pub pass: bool,
}

/// Passes iff the fitted slope is at most `declared_c + 3 SE`.
pub fn contraction_test(times: &[f64], per_path: &[Vec<f64>], declared_c: f64) -> Result<ContractionReport> {
    if per_path.len() < MIN_CONTRACTION_PATHS {
        return Err(Error::Precondition(format!(
            "contraction test needs at least {MIN_CONTRACTION_PATHS} paths, got {}",
            per_path.len()
        )));
    }
    let fit = fit_log_slope(times, per_path)?;
    Ok(ContractionReport { fit, declared_c, n_paths: per_path.len(), pass: fit.slope <= declared_c + 3.0 * fit.se })
}

/// Pathwise discrete energy defect
///
/// ```text
/// D_k = e^{-c1 t_k} ‖X_k‖² + c2 Σ_{j=1..k} e^{-c1 t_j} R_j Δt
///       - ‖X_0‖² - Σ_{j=0..k-1} e^{-c1 t_j} f Δt
/// ```
///
/// whose expectation is nonpositive under the coercivity bound. `times`
/// must contain every step.
pub fn energy_defect(times: &[f64], norm_sq: &[f64], r: &[f64], c1: f64, c2: f64, f: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc_r = CompensatedSum::default();
    let mut acc_f = CompensatedSum::default();
    out.push(0.0);
    for k in 1..times.len() {
        let dt = times[k] - times[k - 1];
        acc_r.add(exp(-c1 * times[k]) * r[k] * dt);
        acc_f.add(exp(-c1 * times[k - 1]) * f * dt);
        out.push(exp(-c1 * times[k]) * norm_sq[k] + c2 * acc_r.value() - norm_sq[0] - acc_f.value());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    /// First saved time where the mean defect exceeds 3 standard errors.
    pub first_violation: Option<f64>,
    /// `max_t mean(D_t) / SE(D_t)` over times with positive spread.
    pub max_z: f64,
    pub max_mean_defect: f64,
    /// `sup_t E‖X_t‖²_H`.
    pub sup_mean_norm_sq: f64,
    pub n_paths: usize,
}

impl EnergyReport {
    pub fn passed(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// Checks `E D_t ≤ 3 SE` at every saved time.
pub fn energy_estimate(times: &[f64], defects: &[Vec<f64>], norm_sq: &[Vec<f64>]) -> Result<EnergyReport> {
    let n = defects.len();
    if n < 2 || norm_sq.len() != n {
        return Err(Error::Precondition("need at least 2 paths with matching series".into()));
    }
    let nf = n as f64;
    let mut first = None;
    let mut max_z = f64::NEG_INFINITY;
    let mut max_mean = f64::NEG_INFINITY;
    let mut sup_norm: f64 = 0.0;
    for (i, &t) in times.iter().enumerate() {
        let col: Vec<f64> = defects.iter().map(|d| d[i]).collect();
        let m = pairwise_sum(&col) / nf;
        let v = pairwise_sum(&col.iter().map(|x| (x - m) * (x - m)).collect::<Vec<_>>()) / (nf - 1.0);
        let se = sqrt(v / nf);
        let scale = pairwise_sum(&norm_sq.iter().map(|x| x[0]).collect::<Vec<_>>()) / nf;
        if se > 0.0 {
            max_z = max_z.max(m / se);
        }
        max_mean = max_mean.max(m);
        if m > 3.0 * se + 1e-12 * (1.0 + scale) && first.is_none() {
            first = Some(t);
        }
        sup_norm = sup_norm.max(pairwise_sum(&norm_sq.iter().map(|x| x[i]).collect::<Vec<_>>()) / nf);
    }
    Ok(EnergyReport { first_violation: first, max_z, max_mean_defect: max_mean, sup_mean_norm_sq: sup_norm, n_paths: n })
}

/// First time with `max_norm < eps`.
pub fn extinction_time(times: &[f64], max_norms: &[f64], eps: f64) -> Result<Option<f64>> {
    if !(eps > 0.0) {
        return Err(Error::Precondition("eps must be positive".into()));
    }
    Ok(times.iter().zip(max_norms).find(|(_, &m)| m < eps).map(|(&t, _)| t))
}

/// [`extinction_time`] on a stored trajectory.
pub fn trajectory_extinction_time(dom: &SpectralDomain, traj: &Trajectory, eps: f64) -> Result<Option<f64>> {
    let norms: Vec<f64> = (0..traj.states.len()).map(|i| traj.state_field(dom, i).max_abs(dom)).collect();
    extinction_time(&traj.times, &norms, eps)
}

fn linear_rate(drift: &DriftSpec, noise: &NoiseSpec) -> Result<f64> {
    let delta = drift.linear_rate().ok_or_else(|| Error::Precondition("the linear oracle needs Ψ = δ s and Φ = 0".into()))?;
    if !noise.is_additive() {
        return Err(Error::Precondition("the linear oracle needs additive noise".into()));
    }
    Ok(delta)
}

fn noise_amp(noise: &NoiseSpec, k: usize) -> f64 {
    let rho = noise.multiplier().eval(0.0);
    noise.sigma().get(k).map(|s| rho * s).unwrap_or(0.0)
}

/// Per-mode `(mean, variance)` of the linear equation `dX = δ L X dt + B dW`
/// at time `t`: `e^{-δλ_k t} x_k` and `σ_k² (1 - e^{-2δλ_k t}) / (2δλ_k)`.
pub fn ou_oracle(dom: &SpectralDomain, drift: &DriftSpec, noise: &NoiseSpec, x0: &[f64], t: f64) -> Result<Vec<(f64, f64)>> {
    let delta = linear_rate(drift, noise)?;
    Ok(x0
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let a = delta * dom.eigenvalue(k + 1);
            let s = noise_amp(noise, k);
            (exp(-a * t) * x, s * s * (1.0 - exp(-2.0 * a * t)) / (2.0 * a))
        })
        .collect())
}

/// Exact moments of the explicit recursion `c' = (1 - δλ dt) c + σ dW` after
/// `steps` steps.
pub fn ou_oracle_discrete(
    dom: &SpectralDomain,
    drift: &DriftSpec,
    noise: &NoiseSpec,
    x0: &[f64],
    dt: f64,
    steps: usize,
) -> Result<Vec<(f64, f64)>> {
    let delta = linear_rate(drift, noise)?;
    Ok(x0
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let q = 1.0 - delta * dom.eigenvalue(k + 1) * dt;
            let s = noise_amp(noise, k);
            let q2 = q * q;
            let var =
                if q2 == 1.0 { s * s * dt * steps as f64 } else { s * s * dt * (1.0 - powf(q2, steps as f64)) / (1.0 - q2) };
            (powf(q, steps as f64) * x, var)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErgodicityReport {
    /// `max_t (|m1 - m2| - e^{ct/2} Lip ‖x - y‖_H - 3 SE)`; nonpositive on pass.
    pub max_excess: f64,
    pub bound_holds: bool,
    pub time_average_diff: f64,
    pub time_average_se: f64,
    pub averages_agree: bool,
}

impl ErgodicityReport {
    pub fn passed(&self) -> bool {
        self.bound_holds && self.averages_agree
    }
}

/// Compares two independent ensembles started at `x` and `y`.
///
/// `mean*`/`se*` are the ensemble means and standard errors of `F(X_t)` at
/// `times`; `avg*` are per-path long-run time averages of `F`.
#[allow(clippy::too_many_arguments)]
pub fn ergodicity_test(
    times: &[f64],
    mean1: &[f64],
    se1: &[f64],
    mean2: &[f64],
    se2: &[f64],
    c: f64,
    lip: f64,
    dist_h: f64,
    avg1: &[f64],
    avg2: &[f64],
) -> Result<ErgodicityReport> {
    if !(c < 0.0) {
        return Err(Error::Precondition(format!("declared constant c = {c} is not negative")));
    }
    let mut excess = f64::NEG_INFINITY;
    for i in 0..times.len() {
        let bound = exp(c * times[i] / 2.0) * lip * dist_h;
        let se = sqrt(se1[i] * se1[i] + se2[i] * se2[i]);
        let gap = (mean1[i] - mean2[i]).abs();
        // at t = 0 the gap equals the bound up to rounding
        excess = excess.max(gap - bound - 3.0 * se - 1e-12 * (gap + bound));
    }
    let stats = |a: &[f64]| -> (f64, f64) {
        let n = a.len() as f64;
        let m = pairwise_sum(a) / n;
        let v = pairwise_sum(&a.iter().map(|x| (x - m) * (x - m)).collect::<Vec<_>>()) / (n - 1.0);
        (m, sqrt(v / n))
    };
    if avg1.len() < 2 || avg2.len() < 2 {
        return Err(Error::Precondition("need at least 2 paths per ensemble".into()));
    }
    let (a1, s1) = stats(avg1);
    let (a2, s2) = stats(avg2);
    let se = sqrt(s1 * s1 + s2 * s2);
    Ok(ErgodicityReport {
        max_excess: excess,
        bound_holds: excess <= 0.0,
        time_average_diff: (a1 - a2).abs(),
        time_average_se: se,
        averages_agree: (a1 - a2).abs() <= 3.0 * se,
    })
}
