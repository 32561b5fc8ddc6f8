//! The drift `A(t, v) = L Ψ(t, v) + Φ̄(t, v)` and sample-based certificates
//! for its structural conditions.
//!
//! `Φ̄(t, v) = h_t v - m(Φ₀(t, v) L⁻¹ ·)`, which as an element of `H` is
//! `h_t v + Φ₀(t, v)`. In spectral coordinates
//!
//! ```text
//! A^_k = -λ_k Ψ(t, X)^_k + h_t X^_k + Φ₀(t, X)^_k
//! ```
//!
//! and `⟨A(v), u⟩_{V*,V} = Σ_k A^_k u^_k / λ_k`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::math::{self, abs, log1p, powf, signed_pow, PI};
use crate::noise::NoiseSpec;
use crate::orlicz::{check_young, YoungFunction, YoungLike};
use crate::report::ConditionReport;
use crate::rng;
use crate::triple::{Field, SpectralDomain};

/// Default cap `1/ζ` on `|Ψ'|`, used where `Ψ'` is singular.
pub const DEFAULT_SLOPE_CAP: f64 = 1e8;

/// A bounded function of time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Modulation {
    Constant(f64),
    /// `mean + amplitude · sin(2π t / period)`.
    Sine {
        mean: f64,
        amplitude: f64,
        period: f64,
    },
}

impl Modulation {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Modulation::Constant(c) => c,
            Modulation::Sine { mean, amplitude, period } => mean + amplitude * math::sin(2.0 * PI * t / period),
        }
    }

    pub fn min(&self) -> f64 {
        match *self {
            Modulation::Constant(c) => c,
            Modulation::Sine { mean, amplitude, .. } => mean - amplitude.abs(),
        }
    }

    pub fn max(&self) -> f64 {
        match *self {
            Modulation::Constant(c) => c,
            Modulation::Sine { mean, amplitude, .. } => mean + amplitude.abs(),
        }
    }

    pub fn sup_abs(&self) -> f64 {
        self.min().abs().max(self.max().abs())
    }

    fn validate(&self, what: &'static str) -> Result<()> {
        if let Modulation::Sine { period, .. } = *self {
            if !(period > 0.0 && period.is_finite()) {
                return Err(invalid(what, "period must be positive"));
            }
        }
        if !self.min().is_finite() || !self.max().is_finite() {
            return Err(invalid(what, "must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PsiKind {
    /// `sign(s) Σ δ_i |s|^{r_i}` from `(δ_i, r_i)`. Negative `δ_i` are
    /// accepted so that condition violations can be constructed.
    PowerSum(Vec<(f64, f64)>),
    /// `sign(s) |s|^{θ-1} (log(1 + |s|))^r`.
    LogPower { theta: f64, r: f64 },
}

/// `Ψ(t, s) = a(t) Ψ_0(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiSpec {
    kind: PsiKind,
    modulation: Modulation,
    young: Option<YoungFunction>,
    slope_cap: f64,
}

impl PsiSpec {
    pub fn power_sum(terms: Vec<(f64, f64)>) -> Self {
        Self { kind: PsiKind::PowerSum(terms), modulation: Modulation::Constant(1.0), young: None, slope_cap: DEFAULT_SLOPE_CAP }
    }

    /// `δ sign(s)|s|^r`.
    pub fn power(delta: f64, r: f64) -> Self {
        Self::power_sum(alloc::vec![(delta, r)])
    }

    pub fn linear(delta: f64) -> Self {
        Self::power(delta, 1.0)
    }

    pub fn zero() -> Self {
        Self::power_sum(Vec::new())
    }

    pub fn log_power(theta: f64, r: f64) -> Self {
        Self {
            kind: PsiKind::LogPower { theta, r },
            modulation: Modulation::Constant(1.0),
            young: None,
            slope_cap: DEFAULT_SLOPE_CAP,
        }
    }

    pub fn with_modulation(mut self, m: Modulation) -> Self {
        self.modulation = m;
        self
    }

    /// Replaces the associated Young function.
    pub fn with_young(mut self, n: YoungFunction) -> Self {
        self.young = Some(n);
        self
    }

    pub fn with_slope_cap(mut self, cap: f64) -> Self {
        self.slope_cap = cap;
        self
    }

    pub fn kind(&self) -> &PsiKind {
        &self.kind
    }

    pub fn modulation(&self) -> Modulation {
        self.modulation
    }

    pub fn slope_cap(&self) -> f64 {
        self.slope_cap
    }

    pub fn validate(&self) -> Result<()> {
        self.modulation.validate("psi.modulation")?;
        if !(self.modulation.min() > 0.0) {
            return Err(invalid("psi.modulation", "must be bounded below by a positive constant"));
        }
        if !(self.slope_cap > 0.0) {
            return Err(invalid("psi.slope_cap", "must be positive"));
        }
        match &self.kind {
            PsiKind::PowerSum(terms) => {
                for &(d, r) in terms {
                    if !d.is_finite() || !(r > 0.0 && r.is_finite()) {
                        return Err(invalid("psi.terms", format!("term ({d}, {r}) needs finite δ and r > 0")));
                    }
                }
            }
            PsiKind::LogPower { theta, r } => {
                if !(*theta > 1.0 && *r >= 1.0 && theta.is_finite() && r.is_finite()) {
                    return Err(invalid("psi", "log-power needs θ > 1 and r ≥ 1"));
                }
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        matches!(&self.kind, PsiKind::PowerSum(t) if t.iter().all(|&(d, _)| d == 0.0))
    }

    /// `δ` when `Ψ(t, s) = δ s` for all `t`.
    pub fn linear_coefficient(&self) -> Option<f64> {
        match (&self.kind, self.modulation) {
            (PsiKind::PowerSum(t), Modulation::Constant(a)) if t.len() == 1 && t[0].1 == 1.0 => Some(a * t[0].0),
            _ => None,
        }
    }

    #[inline]
    pub fn eval_base(&self, s: f64) -> f64 {
        match &self.kind {
            PsiKind::PowerSum(terms) => {
                let mut acc = 0.0;
                for &(d, r) in terms {
                    acc += d * if r == 1.0 { s } else { signed_pow(s, r) };
                }
                acc
            }
            PsiKind::LogPower { theta, r } => {
                let a = abs(s);
                if a == 0.0 {
                    0.0
                } else {
                    let v = powf(a, theta - 1.0) * powf(log1p(a), *r);
                    if s < 0.0 {
                        -v
                    } else {
                        v
                    }
                }
            }
        }
    }

    pub fn eval(&self, t: f64, s: f64) -> f64 {
        self.modulation.eval(t) * self.eval_base(s)
    }

    /// `Ψ_0'(s)`, capped in absolute value at the slope cap.
    pub fn slope_base(&self, s: f64) -> f64 {
        let a = abs(s);
        let d = match &self.kind {
            PsiKind::PowerSum(terms) => {
                let mut acc = 0.0;
                for &(d, r) in terms {
                    acc += if r == 1.0 {
                        d
                    } else if a == 0.0 {
                        if r < 1.0 {
                            d.signum() * f64::INFINITY
                        } else {
                            0.0
                        }
                    } else {
                        d * r * powf(a, r - 1.0)
                    };
                }
                acc
            }
            PsiKind::LogPower { theta, r } => {
                if a == 0.0 {
                    if *theta + *r < 2.0 {
                        f64::INFINITY
                    } else if *theta + *r == 2.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    let l = log1p(a);
                    (theta - 1.0) * powf(a, theta - 2.0) * powf(l, *r) + powf(a, theta - 1.0) * r * powf(l, r - 1.0) / (1.0 + a)
                }
            }
        };
        d.clamp(-self.slope_cap, self.slope_cap)
    }

    /// True when `Ψ_0` is strictly increasing with `Ψ_0'(0) = ∞`, as for
    /// fast diffusion. Such `Ψ_0` have a Lipschitz inverse near zero.
    pub fn singular_at_zero(&self) -> bool {
        match &self.kind {
            PsiKind::PowerSum(terms) => {
                !terms.is_empty() && terms.iter().all(|&(d, _)| d > 0.0) && terms.iter().any(|&(_, r)| r < 1.0)
            }
            PsiKind::LogPower { theta, r } => theta + r < 2.0,
        }
    }

    /// `Ψ_0^{-1}(w)` for strictly increasing `Ψ_0`.
    pub fn inverse_base(&self, w: f64) -> f64 {
        if w == 0.0 {
            return 0.0;
        }
        if let PsiKind::PowerSum(terms) = &self.kind {
            if let [(d, r)] = terms[..] {
                return signed_pow(w / d, 1.0 / r);
            }
        }
        let target = abs(w);
        let (mut lo, mut hi) = (0.0, 1.0);
        while self.eval_base(hi) < target {
            lo = hi;
            hi *= 2.0;
        }
        let mut s = 0.5 * (lo + hi);
        for _ in 0..200 {
            let g = self.eval_base(s) - target;
            if abs(g) <= 4.0 * f64::EPSILON * target || hi - lo <= f64::EPSILON * hi {
                break;
            }
            if g > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let newton = s - g / self.slope_base(s);
            s = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        }
        if w < 0.0 {
            -s
        } else {
            s
        }
    }

    /// `(δ_i, r_i)` for power sums.
    pub fn terms(&self) -> Option<&[(f64, f64)]> {
        match &self.kind {
            PsiKind::PowerSum(t) => Some(t),
            PsiKind::LogPower { .. } => None,
        }
    }

    /// The Young function `N` paired with `Ψ`: the override if present,
    /// else `a_min · s Ψ_0(s)` over the positive terms. `None` when `Ψ` has
    /// no positive part.
    pub fn associated_young(&self) -> Result<Option<YoungFunction>> {
        if let Some(n) = &self.young {
            return Ok(Some(n.clone()));
        }
        let amin = self.modulation.min();
        match &self.kind {
            PsiKind::PowerSum(terms) => {
                let pos: Vec<(f64, f64)> = terms.iter().filter(|t| t.0 > 0.0).map(|&(d, r)| (amin * d, r)).collect();
                if pos.is_empty() {
                    Ok(None)
                } else {
                    YoungFunction::power_sum(&pos).map(Some)
                }
            }
            PsiKind::LogPower { theta, r } => YoungFunction::scaled_log_power(amin, *theta, *r).map(Some),
        }
    }

    /// Sandwich constant `c = max(1, a_max / a_min)`.
    pub fn sandwich_constant(&self) -> f64 {
        (self.modulation.max() / self.modulation.min()).max(1.0)
    }
}

/// `Φ(t, s) = h_t s + Φ₀(s)`, `Φ₀(s) = Σ c_i sign(s)|s|^{r_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiSpec {
    pub h: Modulation,
    pub phi0: Vec<(f64, f64)>,
}

impl PhiSpec {
    pub fn zero() -> Self {
        Self { h: Modulation::Constant(0.0), phi0: Vec::new() }
    }

    pub fn linear(h: f64) -> Self {
        Self { h: Modulation::Constant(h), phi0: Vec::new() }
    }

    pub fn phi0_eval(&self, s: f64) -> f64 {
        let mut acc = 0.0;
        for &(c, r) in &self.phi0 {
            acc += c * signed_pow(s, r);
        }
        acc
    }

    pub fn eval(&self, t: f64, s: f64) -> f64 {
        self.h.eval(t) * s + self.phi0_eval(s)
    }

    pub fn has_phi0(&self) -> bool {
        self.phi0.iter().any(|t| t.0 != 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    A1,
    A2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftSpec {
    pub psi: PsiSpec,
    pub phi: PhiSpec,
    pub f_const: f64,
    pub g_const: f64,
    pub mode: Mode,
    young: Option<YoungFunction>,
}

impl DriftSpec {
    pub fn new(psi: PsiSpec, phi: PhiSpec, f_const: f64, g_const: f64, mode: Mode) -> Result<Self> {
        psi.validate()?;
        phi.h.validate("phi.h")?;
        if !(f_const >= 0.0 && f_const.is_finite()) {
            return Err(invalid("drift.f_const", "must be finite and nonnegative"));
        }
        if !(g_const >= 0.0 && g_const.is_finite()) {
            return Err(invalid("drift.g_const", "must be finite and nonnegative"));
        }
        for &(c, r) in &phi.phi0 {
            if !c.is_finite() || !(r > 0.0 && r.is_finite()) {
                return Err(invalid("phi.phi0", format!("term ({c}, {r}) needs finite coefficient and r > 0")));
            }
        }
        match mode {
            Mode::A1 => {
                if phi.has_phi0() {
                    return Err(invalid("phi.phi0", "mode A1 requires Φ(t, s) = h_t s"));
                }
            }
            Mode::A2 => {
                let terms = psi.terms().ok_or_else(|| invalid("drift.mode", "mode A2 requires a power-sum Ψ"))?;
                if terms.iter().any(|t| t.1 < 1.0) {
                    return Err(Error::Unsupported(
                        "mode A2 with an exponent r < 1 (fast diffusion is supported in mode A1 only)".into(),
                    ));
                }
            }
        }
        let young = psi.associated_young()?;
        Ok(Self { psi, phi, f_const, g_const, mode, young })
    }

    /// `Ψ = δ s`, `Φ = 0`, no source terms.
    pub fn linear(delta: f64) -> Result<Self> {
        Self::new(PsiSpec::linear(delta), PhiSpec::zero(), 0.0, 0.0, Mode::A1)
    }

    /// `Ψ(s) = δ sign(s)|s|^r`, `Φ = 0`.
    pub fn power(delta: f64, r: f64) -> Result<Self> {
        Self::new(PsiSpec::power(delta, r), PhiSpec::zero(), 0.0, 0.0, Mode::A1)
    }

    pub fn young(&self) -> Option<&YoungFunction> {
        self.young.as_ref()
    }

    /// `δ` when the drift is `δ L X`.
    pub fn linear_rate(&self) -> Option<f64> {
        if self.phi.has_phi0() || self.phi.h != Modulation::Constant(0.0) {
            return None;
        }
        self.psi.linear_coefficient()
    }

    pub fn psi_values(&self, t: f64, values: &[f64]) -> Vec<f64> {
        let a = self.psi.modulation.eval(t);
        values.iter().map(|&s| a * self.psi.eval_base(s)).collect()
    }

    /// `sup_i |Ψ'(t, x_i)|` over the given grid values, capped.
    pub fn sup_slope(&self, t: f64, values: &[f64]) -> f64 {
        let a = abs(self.psi.modulation.eval(t));
        values.iter().fold(0.0, |m, &s| m.max(a * abs(self.psi.slope_base(s))))
    }

    /// First `n_modes` drift coefficients `A^_k` at state `x`.
    pub fn drift_coeffs(&self, dom: &SpectralDomain, t: f64, x: &Field, n_modes: usize) -> Vec<f64> {
        let n_modes = n_modes.min(dom.n_grid());
        let h = self.phi.h.eval(t);
        let xc = &x.coeffs(dom)[..n_modes];
        let lam = &dom.eigenvalues()[..n_modes];
        if let Some(delta) = self.psi.linear_coefficient() {
            if !self.phi.has_phi0() {
                return xc.iter().zip(lam).map(|(c, l)| (h - delta * l) * c).collect();
            }
        }
        let values = x.values(dom);
        let psi = dom.to_spectral_truncated(&self.psi_values(t, values), n_modes);
        let mut out: Vec<f64> = psi.iter().zip(lam).zip(xc).map(|((p, l), c)| -l * p + h * c).collect();
        if self.phi.has_phi0() {
            let phi0: Vec<f64> = values.iter().map(|&s| self.phi.phi0_eval(s)).collect();
            for (o, p) in out.iter_mut().zip(dom.to_spectral_truncated(&phi0, n_modes)) {
                *o += p;
            }
        }
        out
    }

    /// `A(t, X)` as a field on the full grid.
    pub fn assemble_a(&self, dom: &SpectralDomain, t: f64, x: &Field) -> Field {
        Field::from_coeffs(self.drift_coeffs(dom, t, x, dom.n_grid()))
    }

    /// `⟨A(t, v), u⟩_{V*,V}`.
    pub fn pairing(&self, dom: &SpectralDomain, t: f64, v: &Field, u: &Field) -> f64 {
        let a = self.drift_coeffs(dom, t, v, dom.n_grid());
        dom.h_inner_coeffs(&a, u.coeffs(dom))
    }

    /// `m(N(v))`, zero when `Ψ` has no associated Young function.
    pub fn modular(&self, dom: &SpectralDomain, v: &Field) -> Result<f64> {
        match &self.young {
            Some(n) => n.modular(v.values(dom), dom.measure()),
            None => Ok(0.0),
        }
    }

    /// `R(v) = m(N(v)) + ‖v‖²_H`.
    pub fn r_value(&self, dom: &SpectralDomain, v: &Field) -> Result<f64> {
        Ok(self.modular(dom, v)? + dom.h_norm_sq_coeffs(v.coeffs(dom)))
    }

    /// Sum of `a_min δ_i` over positive linear terms of `Ψ`.
    fn linear_part(&self) -> f64 {
        let amin = self.psi.modulation.min();
        self.psi.terms().map(|t| t.iter().filter(|x| x.1 == 1.0 && x.0 > 0.0).map(|x| amin * x.0).sum()).unwrap_or(0.0)
    }

    /// `κ_i = 2^{1-r_i} a_min δ_i`, the strong-monotonicity constants used
    /// for the strengthened monotonicity condition of mode A2.
    pub fn kappas(&self) -> Vec<(f64, f64)> {
        let amin = self.psi.modulation.min();
        self.psi.terms().map(|t| t.iter().map(|&(d, r)| (powf(2.0, 1.0 - r) * amin * d, r)).collect()).unwrap_or_default()
    }
}

/// `‖L⁻¹‖` on `L^{r+1}(m)` for each exponent `r`, estimated by sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct LinvNorms {
    entries: Vec<(f64, f64)>,
}

/// Inflation applied to the sampled maximum.
pub const LINV_INFLATION: f64 = 1.5;

fn lp_norm(f: &[f64], p: f64, h: f64) -> f64 {
    let mut acc = 0.0;
    for x in f {
        acc += powf(abs(*x), p);
    }
    powf(h * acc, 1.0 / p)
}

/// Random field with Gaussian spectral coefficients `Z_k k^{-γ}`, rescaled
/// to max-norm `amp`.
pub fn random_field<R: Rng + ?Sized>(dom: &SpectralDomain, gamma: f64, amp: f64, rng: &mut R) -> Field {
    let c: Vec<f64> = (1..=dom.n_grid())
        .map(|k| {
            let z: f64 = rng.sample(StandardNormal);
            z * powf(k as f64, -gamma)
        })
        .collect();
    let v = dom.from_spectral(&c);
    let m = math::max_abs(&v);
    let scale = if m > 0.0 { amp / m } else { 0.0 };
    Field::from_values(v.into_iter().map(|x| x * scale).collect())
}

impl LinvNorms {
    /// Maximum of `‖L⁻¹u‖_p / ‖u‖_p`, `p = r + 1`, over `n_samples` random
    /// fields, `s_1` and the constant field, times [`LINV_INFLATION`].
    pub fn estimate(dom: &SpectralDomain, exponents: &[f64], n_samples: usize, seed: u64) -> Result<Self> {
        let mut rng = rng::stream(seed, u64::MAX, 0);
        let mut fields: Vec<Field> = Vec::with_capacity(n_samples + 2);
        fields.push(Field::from_values(dom.basis_vector(1).to_vec()));
        fields.push(Field::from_values(alloc::vec![1.0; dom.n_grid()]));
        for i in 0..n_samples {
            let gamma = [0.0, 0.5, 1.0, 2.0][i % 4];
            fields.push(random_field(dom, gamma, 1.0, &mut rng));
        }
        let mut entries = Vec::new();
        for &r in exponents {
            let p = r + 1.0;
            let mut best: f64 = 0.0;
            for u in &fields {
                let lu = dom.apply_linv(u)?;
                let den = lp_norm(u.values(dom), p, dom.h());
                if den > 0.0 {
                    best = best.max(lp_norm(lu.values(dom), p, dom.h()) / den);
                }
            }
            entries.push((r, LINV_INFLATION * best));
        }
        Ok(Self { entries })
    }

    pub fn from_entries(entries: Vec<(f64, f64)>) -> Self {
        Self { entries }
    }

    /// `‖L⁻¹‖_{op, r+1}`.
    pub fn get(&self, r: f64) -> Result<f64> {
        self.entries
            .iter()
            .find(|e| e.0 == r)
            .map(|e| e.1)
            .ok_or_else(|| Error::Precondition(format!("no operator-norm estimate for r = {r}")))
    }
}

/// Sample points for pointwise certificates.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid {
    pub s: Vec<f64>,
    pub t: Vec<f64>,
}

impl SampleGrid {
    /// `±` a log grid over `[1e-4, 1e4]` plus `0`, and 9 times on `[0, t_end]`.
    pub fn standard(t_end: f64) -> Self {
        let pos = math::log_grid(1e-4, 1e4, 41);
        let mut s: Vec<f64> = pos.iter().rev().map(|x| -x).collect();
        s.push(0.0);
        s.extend(pos);
        let t = (0..9).map(|i| t_end * i as f64 / 8.0).collect();
        Self { s, t }
    }

    fn positive(&self) -> Vec<f64> {
        self.s.iter().copied().filter(|&x| x > 0.0).collect()
    }
}

const REL_TOL: f64 = 1e-9;

/// Sampled `sup N*(2s) / (N*(s) + 1_fin)` over `[1e-3, 1e3]`, with a
/// violation when the doubling exponent keeps growing.
fn dual_delta2(n: &YoungFunction) -> Result<core::result::Result<f64, String>> {
    let dual = n.dual();
    let fin = if n.finite_measure() { 1.0 } else { 0.0 };
    let grid = math::log_grid(1e-3, 1e3, 25);
    let mut c: f64 = 0.0;
    for &s in &grid {
        c = c.max(dual.eval(2.0 * s)? / (dual.eval(s)? + fin));
    }
    let e = |s: f64| -> Result<f64> { Ok(math::ln(dual.eval(2.0 * s)? / dual.eval(s)?) / core::f64::consts::LN_2) };
    let (e_lo, e_hi) = (e(1e1)?, e(1e3)?);
    if e_hi > e_lo + 0.5 || !c.is_finite() {
        return Ok(Err(format!("dual doubling exponent grows from {e_lo:.3} to {e_hi:.3}")));
    }
    Ok(Ok(c))
}

fn check_young_and_delta2(n: &YoungFunction, grid: &SampleGrid, rep: &mut ConditionReport) -> Result<()> {
    if let Err(e) = check_young(n, &grid.positive()) {
        rep.violate("N", format!("{e}"));
    }
    match n.delta2() {
        Ok(d) => {
            rep.set("delta2_c", d.c);
            rep.set("delta2_q", d.q);
        }
        Err(e) => rep.violate("delta2", format!("{e}")),
    }
    match dual_delta2(n)? {
        Ok(c) => rep.set("dual_delta2_c", c),
        Err(msg) => rep.violate("delta2*", msg),
    }
    Ok(())
}

fn check_monotone(spec: &DriftSpec, grid: &SampleGrid, strong: &[(f64, f64)], name: &'static str, rep: &mut ConditionReport) {
    let mut worst = f64::INFINITY;
    let mut worst_pair = (0.0, 0.0, 0.0);
    for &t in &grid.t {
        let psi: Vec<f64> = grid.s.iter().map(|&s| spec.psi.eval(t, s)).collect();
        for (i, &s1) in grid.s.iter().enumerate() {
            for (j, &s2) in grid.s.iter().enumerate().skip(i + 1) {
                let d = s2 - s1;
                let lhs = d * (psi[j] - psi[i]);
                let rhs: f64 = strong.iter().map(|&(k, r)| k * powf(abs(d), r + 1.0)).sum();
                let scale = abs(d) * (abs(psi[j]) + abs(psi[i])) + rhs;
                let margin = (lhs - rhs) / if scale > 0.0 { scale } else { 1.0 };
                if margin < worst {
                    worst = margin;
                    worst_pair = (s1, s2, t);
                }
            }
        }
    }
    rep.set(format!("{name}_margin"), worst);
    if worst < -REL_TOL {
        rep.violate(
            name,
            format!(
                "monotonicity fails at s1 = {}, s2 = {}, t = {} (relative margin {worst:e})",
                worst_pair.0, worst_pair.1, worst_pair.2
            ),
        );
    }
}

fn check_sandwich(
    spec: &DriftSpec,
    n: &YoungFunction,
    grid: &SampleGrid,
    c: f64,
    lower: &'static str,
    upper: &'static str,
    rep: &mut ConditionReport,
) -> Result<()> {
    let fin = if n.finite_measure() { 1.0 } else { 0.0 };
    let f = spec.f_const * fin;
    let (mut lo_worst, mut hi_worst) = (f64::INFINITY, f64::INFINITY);
    let (mut lo_at, mut hi_at) = (0.0, 0.0);
    for &t in &grid.t {
        for &s in &grid.s {
            let sp = s * spec.psi.eval(t, s);
            let nv = n.eval(s)?;
            let scale = abs(sp) + nv + f;
            let scale = if scale > 0.0 { scale } else { 1.0 };
            let lo = (sp - nv + f) / scale;
            let hi = (c * (nv + f) - sp) / scale;
            if lo < lo_worst {
                lo_worst = lo;
                lo_at = s;
            }
            if hi < hi_worst {
                hi_worst = hi;
                hi_at = s;
            }
        }
    }
    rep.set(format!("{lower}_margin"), lo_worst);
    rep.set(format!("{upper}_margin"), hi_worst);
    if lo_worst < -REL_TOL {
        rep.violate(lower, format!("s Ψ(s) < N(s) - f at s = {lo_at}"));
    }
    if hi_worst < -REL_TOL {
        rep.violate(upper, format!("s Ψ(s) > c (N(s) + f) at s = {hi_at}"));
    }
    Ok(())
}

/// Certificate for mode A1: monotonicity of `Ψ`, the two-sided bound
/// `N - f ≤ sΨ ≤ c(N + f)`, integrability of `N*(Ψ(·, 0))`, and Δ₂
/// regularity of `N` and `N*`.
pub fn check_a1(spec: &DriftSpec, grid: &SampleGrid) -> Result<ConditionReport> {
    if spec.mode != Mode::A1 {
        return Err(Error::Precondition("check_a1 needs a mode A1 drift".into()));
    }
    let mut rep = ConditionReport::new("A1");
    let c = spec.psi.sandwich_constant();
    rep.set("c", c);
    rep.set("f", spec.f_const);
    check_monotone(spec, grid, &[], "psi1", &mut rep);
    let Some(n) = spec.young() else {
        rep.violate("N", "Ψ has no positive part, so no Young function is associated");
        return Ok(rep);
    };
    check_young_and_delta2(n, grid, &mut rep)?;
    check_sandwich(spec, n, grid, c, "psi2", "psi3", &mut rep)?;
    let mut psi4: f64 = 0.0;
    for &t in &grid.t {
        psi4 = psi4.max(n.dual_eval(spec.psi.eval(t, 0.0))?);
    }
    rep.set("psi4_value", psi4);
    if !psi4.is_finite() {
        rep.violate("psi4", "N*(Ψ(t, 0)) is not finite");
    }
    Ok(rep)
}

/// `sup_s |Φ₀(s)| / Σ_i ‖L⁻¹‖⁻¹_{r_i+1} ε_i |s|^{r_i}` over the grid: the
/// smallest `ε` for which the growth bound on `Φ₀` holds.
pub fn phi0_epsilon(spec: &DriftSpec, linv: &LinvNorms, grid: &SampleGrid) -> Result<f64> {
    let amin = spec.psi.modulation.min();
    let terms = spec.psi.terms().ok_or_else(|| Error::Precondition("power-sum Ψ required".into()))?;
    let weights: Vec<(f64, f64)> = terms.iter().map(|&(d, r)| Ok((amin * d / linv.get(r)?, r))).collect::<Result<_>>()?;
    let mut eps: f64 = 0.0;
    for &s in &grid.s {
        if s == 0.0 {
            continue;
        }
        let den: f64 = weights.iter().map(|&(w, r)| w * powf(abs(s), r)).sum();
        eps = eps.max(abs(spec.phi.phi0_eval(s)) / den);
    }
    Ok(eps)
}

/// Certificate for mode A2: strong monotonicity with `κ_i = 2^{1-r_i} a_min δ_i`,
/// the two-sided power-sum bound, and the Lipschitz and growth bounds on
/// `Φ₀` with sampled `‖L⁻¹‖` operator norms.
pub fn check_a2(spec: &DriftSpec, linv: &LinvNorms, grid: &SampleGrid) -> Result<ConditionReport> {
    if spec.mode != Mode::A2 {
        return Err(Error::Precondition("check_a2 needs a mode A2 drift".into()));
    }
    let mut rep = ConditionReport::new("A2");
    let c = spec.psi.sandwich_constant();
    rep.set("c", c);
    rep.set("f", spec.f_const);
    let kappas = spec.kappas();
    for (i, &(k, r)) in kappas.iter().enumerate() {
        rep.set(format!("kappa_{}", i + 1), k);
        rep.set(format!("linv_norm_{}", i + 1), linv.get(r)?);
    }
    check_monotone(spec, grid, &kappas, "psi1'", &mut rep);
    let Some(n) = spec.young() else {
        rep.violate("N", "Ψ has no positive part, so no Young function is associated");
        return Ok(rep);
    };
    check_young_and_delta2(n, grid, &mut rep)?;
    check_sandwich(spec, n, grid, c, "psi2'_lower", "psi2'_upper", &mut rep)?;

    // Lipschitz-type bound on Φ₀
    let lip: Vec<(f64, f64)> = kappas.iter().map(|&(k, r)| Ok((k / linv.get(r)?, r))).collect::<Result<_>>()?;
    let mut worst = f64::INFINITY;
    let mut at = (0.0, 0.0);
    for (i, &s1) in grid.s.iter().enumerate() {
        let p1 = spec.phi.phi0_eval(s1);
        for &s2 in grid.s.iter().skip(i + 1) {
            let d = abs(s2 - s1);
            let lhs = abs(spec.phi.phi0_eval(s2) - p1);
            let rhs: f64 = lip.iter().map(|&(w, r)| w * powf(d, r)).sum();
            let margin = (rhs - lhs) / rhs.max(1e-300);
            if margin < worst {
                worst = margin;
                at = (s1, s2);
            }
        }
    }
    rep.set("phi1_margin", worst);
    if worst < -REL_TOL {
        rep.violate("phi1", format!("|Φ₀(s2) - Φ₀(s1)| exceeds the bound at s1 = {}, s2 = {}", at.0, at.1));
    }

    let eps = phi0_epsilon(spec, linv, grid)?;
    rep.set("phi2_epsilon", eps);
    if !(eps < 1.0) {
        rep.violate("phi2", format!("|Φ₀| needs ε = {eps} ≥ 1 in the growth bound"));
    }
    Ok(rep)
}

/// Constants declared for the monotonicity, coercivity and growth
/// conditions, derived from the specs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeclaredConstants {
    /// Weak-monotonicity constant.
    pub c_mono: f64,
    pub c1: f64,
    pub c2: f64,
    pub f: f64,
    pub c3: f64,
    pub g: f64,
    /// `ε` of the `Φ₀` growth bound (0 without `Φ₀`).
    pub eps: f64,
}

/// Derives the declared constants:
///
/// * `c_mono = 2‖h‖_∞ - 2μλ_1 + (Lρ HS₀)²`, with `μ` the positive linear
///   part of `Ψ` (taken as 0 when `Φ₀` is present, since it is spent on
///   dominating `Φ₀`);
/// * `c2 = 2(1 - ε)`, `c1 = 2‖h‖_∞ + c2`, `f = 2 f m(E) + ρ_max² HS₀²`;
/// * `c3 = c + ‖h‖_∞/2 + ε`, `g = c (3f + N*(c⁻¹Ψ(0))) m(E) + g`.
pub fn declared_constants(
    dom: &SpectralDomain,
    spec: &DriftSpec,
    noise: &NoiseSpec,
    linv: Option<&LinvNorms>,
) -> Result<DeclaredConstants> {
    let eps = if spec.phi.has_phi0() {
        let linv = linv.ok_or_else(|| Error::Precondition("Φ₀ present: operator-norm estimates required".into()))?;
        phi0_epsilon(spec, linv, &SampleGrid::standard(1.0))?
    } else {
        0.0
    };
    let hsup = spec.phi.h.sup_abs();
    let mu = if spec.phi.has_phi0() { 0.0 } else { spec.linear_part() };
    let lam1 = dom.eigenvalue(1);
    let hs0 = noise.hs0_sq(dom);
    let rho = noise.multiplier().sup();
    let fin = spec.young().map(|n| n.finite_measure()).unwrap_or(true);
    let mass = if fin { dom.measure().total_mass() } else { 0.0 };
    let c2 = if spec.young().is_some() { 2.0 * (1.0 - eps) } else { 0.0 };
    let c = spec.psi.sandwich_constant();
    let psi0 = (0..=16).map(|i| spec.psi.eval(i as f64 / 16.0, 0.0).abs()).fold(0.0, f64::max);
    let dual0 = match spec.young() {
        Some(n) => n.dual_eval(psi0 / c)?,
        None => 0.0,
    };
    Ok(DeclaredConstants {
        c_mono: 2.0 * hsup - 2.0 * mu * lam1 + noise.lipschitz_sq(dom),
        c1: 2.0 * hsup + c2,
        c2,
        f: 2.0 * spec.f_const * mass + rho * rho * hs0,
        c3: c + 0.5 * hsup + eps,
        g: c * (3.0 * spec.f_const + dual0) * mass + spec.g_const,
        eps,
    })
}

/// Sample-based certificate of hemicontinuity, weak monotonicity,
/// coercivity and growth with the declared constants.
///
/// Fields are drawn with Gaussian spectral decay and max-norms spread
/// log-uniformly over `[1e-2, 10]`; times are spread over `[0, t_end]`.
pub fn check_h(
    dom: &SpectralDomain,
    spec: &DriftSpec,
    noise: &NoiseSpec,
    declared: &DeclaredConstants,
    n_samples: usize,
    t_end: f64,
    seed: u64,
) -> Result<ConditionReport> {
    let mut rep = ConditionReport::new("H");
    rep.set("c_mono_declared", declared.c_mono);
    rep.set("c1", declared.c1);
    rep.set("c2", declared.c2);
    rep.set("f", declared.f);
    rep.set("c3", declared.c3);
    rep.set("g", declared.g);
    let mut rng = rng::stream(seed, u64::MAX - 1, 0);
    let mut c_emp = f64::NEG_INFINITY;
    let mut h3_worst = f64::INFINITY;
    let mut h4_worst = f64::INFINITY;
    let mut h1_ratio: f64 = 0.0;
    let hs = |x: &Field| -> Result<f64> { noise.hs_norm_sq(dom, x) };
    for i in 0..n_samples {
        let gamma = [0.5, 1.0, 2.0][i % 3];
        let amp_u = powf(10.0, rng.random_range(-2.0..1.0));
        let amp_v = powf(10.0, rng.random_range(-2.0..1.0));
        let u = random_field(dom, gamma, amp_u, &mut rng);
        let v = random_field(dom, gamma, amp_v, &mut rng);
        let t = if t_end > 0.0 { rng.random_range(0.0..t_end) } else { 0.0 };
        let au = spec.drift_coeffs(dom, t, &u, dom.n_grid());
        let av = spec.drift_coeffs(dom, t, &v, dom.n_grid());
        let (uc, vc) = (u.coeffs(dom), v.coeffs(dom));
        let w: Vec<f64> = uc.iter().zip(vc).map(|(a, b)| a - b).collect();
        let dw2 = dom.h_norm_sq_coeffs(&w);

        // weak monotonicity
        if dw2 > 0.0 {
            let da: Vec<f64> = au.iter().zip(&av).map(|(a, b)| a - b).collect();
            let rho_u = noise.multiplier().eval(math::sqrt(dom.h_norm_sq_coeffs(uc)));
            let rho_v = noise.multiplier().eval(math::sqrt(dom.h_norm_sq_coeffs(vc)));
            let db = (rho_u - rho_v) * (rho_u - rho_v) * noise.hs0_sq(dom);
            let lhs = 2.0 * dom.h_inner_coeffs(&da, &w) + db;
            let ratio = lhs / dw2;
            let scale = 2.0 * (abs(dom.h_inner_coeffs(&au, &w)) + abs(dom.h_inner_coeffs(&av, &w))) / dw2;
            c_emp = c_emp.max(ratio);
            if ratio > declared.c_mono + REL_TOL * scale + 1e-12 {
                rep.violate("H2", format!("sample {i}: ratio {ratio:e} exceeds declared {}", declared.c_mono));
            }
        }

        // coercivity
        let ru = spec.r_value(dom, &u)?;
        let rv = spec.r_value(dom, &v)?;
        let vnorm2 = dom.h_norm_sq_coeffs(vc);
        let lhs = 2.0 * dom.h_inner_coeffs(&av, vc) + hs(&v)?;
        let rhs = declared.c1 * vnorm2 - declared.c2 * rv + declared.f;
        let scale = abs(lhs) + abs(declared.c1 * vnorm2) + abs(declared.c2 * rv) + declared.f + 1e-300;
        let margin = (rhs - lhs) / scale;
        h3_worst = h3_worst.min(margin);
        if margin < -REL_TOL {
            rep.violate("H3", format!("sample {i}: coercivity margin {margin:e}"));
        }

        // growth
        let lhs = abs(dom.h_inner_coeffs(&av, uc));
        let rhs = declared.g + declared.c3 * (rv + ru);
        let margin = (rhs - lhs) / (rhs + lhs + 1e-300);
        h4_worst = h4_worst.min(margin);
        if margin < -REL_TOL {
            rep.violate("H4", format!("sample {i}: growth margin {margin:e}"));
        }

        // hemicontinuity along λ ↦ ⟨A(u + λv), x⟩
        if i < 16 {
            let x = random_field(dom, 1.0, 1.0, &mut rng);
            let phi = |lam: f64| spec.pairing(dom, t, &u.axpy(dom, lam, &v), &x);
            let mut jump = [0.0f64; 2];
            let mut size: f64 = 0.0;
            for j in 0..=8 {
                let lam = -0.5 + j as f64 / 8.0;
                let base = phi(lam);
                size = size.max(abs(base));
                for (slot, d) in jump.iter_mut().zip([1e-3, 1e-6]) {
                    *slot = slot.max(abs(phi(lam + d) - base));
                }
            }
            let ratio = (jump[1] - 1e-12 * (1.0 + size)).max(0.0) / jump[0].max(1e-300);
            h1_ratio = h1_ratio.max(ratio);
            if ratio > 0.1 {
                rep.violate("H1", format!("sample {i}: jumps do not shrink with the step ({} vs {})", jump[1], jump[0]));
            }
        }
    }
    rep.set("c_mono_empirical", c_emp);
    rep.set("h3_margin", h3_worst);
    rep.set("h4_margin", h4_worst);
    rep.set("h1_jump_ratio", h1_ratio);
    Ok(rep)
}

/// Sample-based check of the convexity bound `R(x + y) ≤ (R(2x) + R(2y))/2`
/// on random pairs of fields.
pub fn check_k(dom: &SpectralDomain, spec: &DriftSpec, n_samples: usize, seed: u64) -> Result<ConditionReport> {
    let mut rep = ConditionReport::new("K");
    let mut rng = rng::stream(seed, u64::MAX - 3, 0);
    let mut worst = f64::INFINITY;
    for i in 0..n_samples {
        let gamma = [0.5, 1.0, 2.0][i % 3];
        let x = random_field(dom, gamma, powf(10.0, rng.random_range(-2.0..1.0)), &mut rng);
        let y = random_field(dom, gamma, powf(10.0, rng.random_range(-2.0..1.0)), &mut rng);
        let lhs = spec.r_value(dom, &x.axpy(dom, 1.0, &y))?;
        let rhs = 0.5 * (spec.r_value(dom, &x.scaled(dom, 2.0))? + spec.r_value(dom, &y.scaled(dom, 2.0))?);
        let margin = (rhs - lhs) / (rhs + lhs + 1e-300);
        worst = worst.min(margin);
        if margin < -REL_TOL {
            rep.violate("K", format!("sample {i}: R(x + y) exceeds (R(2x) + R(2y))/2 by relative {:e}", -margin));
        }
    }
    rep.set("k_margin", worst);
    Ok(rep)
}

/// Worst margin of `N*(c⁻¹Ψ(t,s)) ≤ N(s) + (3f + N*(c⁻¹Ψ(t,0))) 1_fin`.
pub fn dual_psi_margin(spec: &DriftSpec, grid: &SampleGrid) -> Result<f64> {
    let n = spec.young().ok_or_else(|| Error::Precondition("no Young function".into()))?;
    let c = spec.psi.sandwich_constant();
    let fin = if n.finite_measure() { 1.0 } else { 0.0 };
    let mut worst = f64::INFINITY;
    for &t in &grid.t {
        let at0 = n.dual_eval(spec.psi.eval(t, 0.0) / c)?;
        for &s in &grid.s {
            let lhs = n.dual_eval(spec.psi.eval(t, s) / c)?;
            let rhs = n.eval(s)? + (3.0 * spec.f_const + at0) * fin;
            worst = worst.min((rhs - lhs) / (rhs + lhs + 1e-300));
        }
    }
    Ok(worst)
}

/// `c̃ = max_i c_i (ε‖L⁻¹‖⁻¹_i)^{(r_i+1)/r_i}`, `c_i` the single-power
/// dual constant of `|s|^{r_i+1}`, with `N*(Φ₀(s)) ≤ c̃ N(s)` whenever
/// `|Φ₀(s)| ≤ Σ ε ‖L⁻¹‖⁻¹_i ε_i |s|^{r_i}`.
pub fn dual_phi0_constant(spec: &DriftSpec, linv: &LinvNorms, eps: f64) -> Result<f64> {
    let terms = spec.psi.terms().ok_or_else(|| Error::Precondition("power-sum Ψ required".into()))?;
    let mut ct: f64 = 0.0;
    for &(_, r) in terms {
        let ci = powf(1.0 / (r + 1.0), 1.0 / r) * r / (r + 1.0);
        ct = ct.max(ci * powf(eps / linv.get(r)?, (r + 1.0) / r));
    }
    Ok(ct)
}
