//! Young functions, Legendre duals, Δ₂ regularity and Luxemburg norms.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cell::Cell;

use crate::error::{invalid, Error, Result};
use crate::math::{self, abs, golden_max, ln, log1p, powf};

/// Quadrature weights `w_i > 0` on a finite grid, `m(f) = Σ w_i f_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    weights: Vec<f64>,
    finite: bool,
}

impl DiscreteMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(invalid("measure", "weights must be positive and finite"));
        }
        Ok(Self { weights, finite: true })
    }

    pub fn uniform(n: usize, w: f64) -> Self {
        Self { weights: alloc::vec![w; n], finite: true }
    }

    /// Whether the `1_{m(E) < ∞}` terms of the growth conditions are active.
    /// Always `true` for a grid unless set otherwise.
    pub fn with_finite_flag(mut self, finite: bool) -> Self {
        self.finite = finite;
        self
    }

    pub fn finite_flag(&self) -> bool {
        self.finite
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (w, x) in self.weights.iter().zip(f) {
            acc += w * x;
        }
        acc
    }
}

/// Anything that evaluates like an even Young function.
pub trait YoungLike {
    fn eval(&self, s: f64) -> Result<f64>;

    /// `m(N(f))`.
    fn modular(&self, f: &[f64], m: &DiscreteMeasure) -> Result<f64> {
        let mut acc = 0.0;
        for (w, x) in m.weights().iter().zip(f) {
            acc += w * self.eval(*x)?;
        }
        Ok(acc)
    }

    /// `inf{λ ≥ 0 : m(N(f/λ)) ≤ 1}` by bisection to relative `1e-13`. The
    /// upper end of the final bracket is returned, so the unit-ball
    /// criterion holds at the returned value.
    fn luxemburg_norm(&self, f: &[f64], m: &DiscreteMeasure) -> Result<f64> {
        let fmax = math::max_abs(f);
        if fmax == 0.0 {
            return Ok(0.0);
        }
        let scaled = |lam: f64| -> Result<f64> {
            let mut acc = 0.0;
            for (w, x) in m.weights().iter().zip(f) {
                acc += w * self.eval(x / lam)?;
            }
            Ok(acc)
        };
        let mut hi = fmax;
        let mut guard = 0;
        while scaled(hi)? > 1.0 {
            hi *= 2.0;
            guard += 1;
            if guard > 2000 {
                return Err(Error::Precondition("Luxemburg bracket did not close".into()));
            }
        }
        let mut lo = hi * 0.5;
        while scaled(lo)? <= 1.0 {
            hi = lo;
            lo *= 0.5;
            guard += 1;
            if guard > 4000 || lo == 0.0 {
                return Err(Error::Precondition("Luxemburg bracket did not close".into()));
            }
        }
        while hi - lo > 1e-13 * hi {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if scaled(mid)? <= 1.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

/// `sup_{r ≥ 0} (r|s| - f(r))` for convex `f` with `f(0) = 0`.
///
/// The maximiser is bracketed by doubling or halving until the concave
/// objective turns, then refined by golden-section search.
pub fn legendre(f: impl Fn(f64) -> Result<f64>, s: f64) -> Result<f64> {
    let s = abs(s);
    if s == 0.0 {
        return Ok(0.0);
    }
    let err: Cell<Option<Error>> = Cell::new(None);
    let g = |r: f64| -> f64 {
        match f(r) {
            Ok(v) => r * s - v,
            Err(e) => {
                err.set(Some(e));
                f64::NEG_INFINITY
            }
        }
    };
    let (lo, hi);
    if g(2.0) > g(1.0) {
        let mut x = 2.0;
        loop {
            if let Some(e) = err.take() {
                return Err(e);
            }
            if x > 1e250 {
                return Err(Error::DegenerateDual(format!("r|s| - N(r) still increasing at r = {x:e} for s = {s}")));
            }
            if g(2.0 * x) <= g(x) {
                break;
            }
            x *= 2.0;
        }
        lo = 0.5 * x;
        hi = 2.0 * x;
    } else {
        let mut x = 1.0;
        while g(0.5 * x) > g(x) && x > 1e-280 {
            x *= 0.5;
        }
        lo = 0.5 * x;
        hi = 2.0 * x;
    }
    if let Some(e) = err.take() {
        return Err(e);
    }
    let (_, best) = golden_max(g, lo, hi, 1e-12);
    if let Some(e) = err.take() {
        return Err(e);
    }
    // g(0) = 0 is always a candidate
    Ok(if best > 0.0 { best } else { 0.0 })
}

/// Δ₂ data: `N(2s) ≤ C (N(s) + 1_fin)` and `N(rs) ≤ r^q (N(s) + 2·1_fin)`
/// for `r ≥ 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delta2 {
    pub c: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum YoungKind {
    /// `Σ ε_i |s|^{p_i}`, `ε_i > 0`, `p_i > 1`.
    PowerSum { coeffs: Vec<f64>, exponents: Vec<f64> },
    /// `scale · |s|^θ (log(1 + |s|))^r`, `θ > 1`, `r ≥ 1`.
    LogPower { scale: f64, theta: f64, r: f64 },
    /// Monotone cubic (Fritsch–Carlson) interpolation of `(s_i, N(s_i))`,
    /// `s_0 = 0`. Evaluation outside the table is an error.
    NumericTable { s: Vec<f64>, n: Vec<f64>, tangents: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct YoungFunction {
    kind: YoungKind,
    finite_measure: bool,
    delta2: core::result::Result<Delta2, Error>,
}

impl YoungFunction {
    fn build(kind: YoungKind) -> Self {
        let mut out = Self { kind, finite_measure: true, delta2: Err(Error::Delta2Violation(String::new())) };
        out.delta2 = out.compute_delta2();
        out
    }

    /// `Σ ε_i |s|^{r_i + 1}` from `(ε_i, r_i)` pairs.
    pub fn power_sum(terms: &[(f64, f64)]) -> Result<Self> {
        if terms.is_empty() {
            return Err(invalid("young function", "power sum needs at least one term"));
        }
        let mut coeffs = Vec::with_capacity(terms.len());
        let mut exponents = Vec::with_capacity(terms.len());
        for &(eps, r) in terms {
            if !(eps > 0.0 && eps.is_finite()) || !(r > 0.0 && r.is_finite()) {
                return Err(invalid("young function", format!("term ({eps}, {r}) needs a positive coefficient and exponent")));
            }
            if exponents.contains(&(r + 1.0)) {
                return Err(invalid("young function", format!("repeated exponent r = {r}")));
            }
            coeffs.push(eps);
            exponents.push(r + 1.0);
        }
        Ok(Self::build(YoungKind::PowerSum { coeffs, exponents }))
    }

    /// `|s|^θ (log(1 + |s|))^r`.
    pub fn log_power(theta: f64, r: f64) -> Result<Self> {
        Self::scaled_log_power(1.0, theta, r)
    }

    pub fn scaled_log_power(scale: f64, theta: f64, r: f64) -> Result<Self> {
        if !(theta > 1.0 && theta.is_finite()) || !(r >= 1.0 && r.is_finite()) || !(scale > 0.0) {
            return Err(invalid(
                "young function",
                format!("log-power needs θ > 1, r ≥ 1, scale > 0 (got {theta}, {r}, {scale})"),
            ));
        }
        Ok(Self::build(YoungKind::LogPower { scale, theta, r }))
    }

    /// Tabulated `N` on `0 = s_0 < s_1 < ...` with increasing values.
    pub fn numeric_table(s: Vec<f64>, n: Vec<f64>) -> Result<Self> {
        if s.len() < 3 || s.len() != n.len() {
            return Err(invalid("young function", "table needs ≥ 3 matching samples"));
        }
        if s[0] != 0.0 || n[0] != 0.0 {
            return Err(invalid("young function", "table must start at (0, 0)"));
        }
        for w in s.windows(2) {
            if !(w[1] > w[0]) {
                return Err(invalid("young function", "table abscissae must increase"));
            }
        }
        for w in n.windows(2) {
            if !(w[1] > w[0]) {
                return Err(invalid("young function", "table values must increase"));
            }
        }
        let secants: Vec<f64> = s.windows(2).zip(n.windows(2)).map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0])).collect();
        for w in secants.windows(2) {
            if w[1] < w[0] * (1.0 - 1e-12) {
                return Err(invalid("young function", "table is not convex"));
            }
        }
        let tangents = fritsch_carlson(&secants);
        Ok(Self::build(YoungKind::NumericTable { s, n, tangents }))
    }

    /// Sets the `1_{m(E) < ∞}` flag used by the Δ₂ inequalities.
    pub fn with_finite_measure(mut self, finite: bool) -> Self {
        self.finite_measure = finite;
        self.delta2 = self.compute_delta2();
        self
    }

    pub fn finite_measure(&self) -> bool {
        self.finite_measure
    }

    pub fn kind(&self) -> &YoungKind {
        &self.kind
    }

    /// `(ε, p)` when `N(s) = ε|s|^p` has a single term.
    pub fn single_power(&self) -> Option<(f64, f64)> {
        match &self.kind {
            YoungKind::PowerSum { coeffs, exponents } if coeffs.len() == 1 => Some((coeffs[0], exponents[0])),
            _ => None,
        }
    }

    pub fn dual(&self) -> DualYoungFunction {
        DualYoungFunction {
            closed_form: self.single_power().map(|(eps, p)| {
                let q = p / (p - 1.0);
                ((p - 1.0) * eps * powf(eps * p, -q), q)
            }),
            base: self.clone(),
        }
    }

    /// `N*(s)`.
    pub fn dual_eval(&self, s: f64) -> Result<f64> {
        self.dual().eval(s)
    }

    /// The cached Δ₂ constant and exponent.
    pub fn delta2(&self) -> Result<Delta2> {
        self.delta2.clone()
    }

    /// Alias of [`Self::delta2`] returning only `q`.
    pub fn delta2_exponent(&self) -> Result<f64> {
        Ok(self.delta2()?.q)
    }

    /// For power sums, `θ^{r+1}` with `r = min r_i`, `θ = 2^{1/r}`: the
    /// dual's doubling factor `N*(2s) ≤ θ^{r+1} N*(s)`.
    pub fn dual_doubling_factor(&self) -> Option<f64> {
        match &self.kind {
            YoungKind::PowerSum { exponents, .. } => {
                let r = exponents.iter().fold(f64::INFINITY, |m, &p| m.min(p - 1.0));
                let theta = powf(2.0, 1.0 / r);
                Some(powf(theta, r + 1.0))
            }
            _ => None,
        }
    }

    fn table_max(&self) -> Option<f64> {
        match &self.kind {
            YoungKind::NumericTable { s, .. } => s.last().copied(),
            _ => None,
        }
    }

    fn compute_delta2(&self) -> core::result::Result<Delta2, Error> {
        let fin = if self.finite_measure { 1.0 } else { 0.0 };
        let c = match &self.kind {
            YoungKind::PowerSum { exponents, .. } => {
                let pmax = exponents.iter().fold(0.0f64, |m, &p| m.max(p));
                powf(2.0, pmax)
            }
            YoungKind::LogPower { theta, r, .. } => {
                let mut c = powf(2.0, theta + r);
                for s in math::log_grid(1e-8, 1e8, 321) {
                    let ratio = self.eval(2.0 * s)? / (self.eval(s)? + fin);
                    c = c.max(ratio);
                }
                c
            }
            YoungKind::NumericTable { s, .. } => {
                let smax = *s.last().unwrap();
                let smin = s[1];
                let exponent =
                    |x: f64| -> Result<f64> { Ok(math::ln(self.eval(2.0 * x)? / self.eval(x)?) / core::f64::consts::LN_2) };
                let (lo_top, hi_top) = (smax / 20.0, smax / 2.0);
                if lo_top > smin {
                    let e_lo = exponent(lo_top)?;
                    let e_hi = exponent(hi_top)?;
                    if e_hi > e_lo + 0.5 {
                        return Err(Error::Delta2Violation(format!(
                            "doubling exponent grows from {e_lo:.3} to {e_hi:.3} over the top decade of the table"
                        )));
                    }
                }
                let mut c: f64 = 2.0;
                for x in math::log_grid(smin, smax / 2.0, 200) {
                    c = c.max(self.eval(2.0 * x)? / (self.eval(x)? + fin));
                }
                c
            }
        };
        let q = 2.0 * ln(c) / core::f64::consts::LN_2;
        if !(q > 2.0) || !q.is_finite() {
            return Err(Error::Delta2Violation(format!("Δ₂ constant {c} gives q = {q} ≤ 2")));
        }
        // certificate on the sample grid
        let smax = self.table_max().unwrap_or(f64::INFINITY);
        for r in math::log_grid(2.0, 1024.0, 41) {
            for s in math::log_grid(1e-3, 1e3, 61) {
                if r * s > smax {
                    continue;
                }
                let lhs = self.eval(r * s)?;
                let rhs = powf(r, q) * (self.eval(s)? + 2.0 * fin);
                if lhs > rhs * (1.0 + 1e-12) {
                    return Err(Error::Delta2Violation(format!(
                        "N({r}·{s}) = {lhs:e} exceeds r^q (N(s) + 2) = {rhs:e} with q = {q}"
                    )));
                }
            }
        }
        Ok(Delta2 { c, q })
    }
}

fn fritsch_carlson(secants: &[f64]) -> Vec<f64> {
    let n = secants.len() + 1;
    let mut m = alloc::vec![0.0; n];
    m[0] = secants[0];
    m[n - 1] = secants[n - 2];
    for i in 1..n - 1 {
        let (a, b) = (secants[i - 1], secants[i]);
        m[i] = if a * b <= 0.0 { 0.0 } else { 0.5 * (a + b) };
    }
    for i in 0..n - 1 {
        let d = secants[i];
        if d == 0.0 {
            m[i] = 0.0;
            m[i + 1] = 0.0;
            continue;
        }
        let a = m[i] / d;
        let b = m[i + 1] / d;
        let t = a * a + b * b;
        if t > 9.0 {
            let tau = 3.0 / math::sqrt(t);
            m[i] = tau * a * d;
            m[i + 1] = tau * b * d;
        }
    }
    m
}

impl YoungLike for YoungFunction {
    fn eval(&self, s: f64) -> Result<f64> {
        let a = abs(s);
        Ok(match &self.kind {
            YoungKind::PowerSum { coeffs, exponents } => {
                let mut acc = 0.0;
                for (c, p) in coeffs.iter().zip(exponents) {
                    acc += c * powf(a, *p);
                }
                acc
            }
            YoungKind::LogPower { scale, theta, r } => {
                if a == 0.0 {
                    0.0
                } else {
                    scale * powf(a, *theta) * powf(log1p(a), *r)
                }
            }
            YoungKind::NumericTable { s: xs, n, tangents } => {
                let hi = *xs.last().unwrap();
                if a > hi {
                    return Err(Error::Range { value: s, lo: -hi, hi });
                }
                let i = match xs.binary_search_by(|x| x.partial_cmp(&a).unwrap()) {
                    Ok(i) => return Ok(n[i]),
                    Err(i) => i - 1,
                };
                let dx = xs[i + 1] - xs[i];
                let t = (a - xs[i]) / dx;
                let (t2, t3) = (t * t, t * t * t);
                let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
                let h10 = t3 - 2.0 * t2 + t;
                let h01 = -2.0 * t3 + 3.0 * t2;
                let h11 = t3 - t2;
                h00 * n[i] + h10 * dx * tangents[i] + h01 * n[i + 1] + h11 * dx * tangents[i + 1]
            }
        })
    }
}

/// `N*`, evaluated in closed form for a single power and by Legendre
/// maximisation otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct DualYoungFunction {
    base: YoungFunction,
    /// `(c, q)` with `N*(s) = c|s|^q`.
    closed_form: Option<(f64, f64)>,
}

impl DualYoungFunction {
    pub fn base(&self) -> &YoungFunction {
        &self.base
    }

    pub fn closed_form(&self) -> Option<(f64, f64)> {
        self.closed_form
    }

    /// Forces numerical maximisation even when a closed form exists.
    pub fn numeric(mut self) -> Self {
        self.closed_form = None;
        self
    }
}

impl YoungLike for DualYoungFunction {
    fn eval(&self, s: f64) -> Result<f64> {
        match self.closed_form {
            Some((c, q)) => Ok(if s == 0.0 { 0.0 } else { c * powf(abs(s), q) }),
            None => legendre(|r| self.base.eval(r), s),
        }
    }
}

/// Sample-grid certificate that `n` is an even Young function: `N(0) = 0`,
/// evenness, strict increase and convexity on `grid` (positive, sorted), and
/// `N(s)/s` small at the bottom and large at the top of the grid.
pub fn check_young<N: YoungLike + ?Sized>(n: &N, grid: &[f64]) -> Result<()> {
    let fail = |msg: String| Err(invalid("young function", msg));
    if n.eval(0.0)? != 0.0 {
        return fail("N(0) ≠ 0".into());
    }
    let vals: Vec<f64> = grid.iter().map(|&s| n.eval(s)).collect::<Result<_>>()?;
    for (&s, &v) in grid.iter().zip(&vals) {
        let neg = n.eval(-s)?;
        if abs(neg - v) > 1e-12 * v.max(1e-300) {
            return fail(format!("N(-{s}) ≠ N({s})"));
        }
    }
    let mut prev_slope = vals[0] / grid[0];
    for i in 0..grid.len() - 1 {
        if !(vals[i + 1] > vals[i]) {
            return fail(format!("not strictly increasing at s = {}", grid[i]));
        }
        let slope = (vals[i + 1] - vals[i]) / (grid[i + 1] - grid[i]);
        if slope < prev_slope * (1.0 - 1e-8) {
            return fail(format!("not convex near s = {}", grid[i]));
        }
        prev_slope = slope;
    }
    let ratio_lo = vals[0] / grid[0];
    let ratio_hi = vals[vals.len() - 1] / grid[grid.len() - 1];
    let one = n.eval(1.0)?;
    if !(ratio_lo < 0.1 * one && ratio_hi > 10.0 * one) {
        return fail(format!("N(s)/s does not vanish at 0 or blow up at ∞ on the grid ({ratio_lo:e}, {ratio_hi:e})"));
    }
    Ok(())
}

/// Both sides of the Orlicz–Hölder inequality `m(|fg|) ≤ 2‖f‖_N ‖g‖_{N*}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderCheck {
    pub lhs: f64,
    pub bound: f64,
}

pub fn orlicz_holder(f: &[f64], g: &[f64], n: &YoungFunction, m: &DiscreteMeasure) -> Result<HolderCheck> {
    let prod: Vec<f64> = f.iter().zip(g).map(|(a, b)| abs(a * b)).collect();
    let lhs = m.integrate(&prod);
    let nf = n.luxemburg_norm(f, m)?;
    let bound = if nf == 0.0 { 0.0 } else { 2.0 * nf * n.dual().luxemburg_norm(g, m)? };
    if lhs > bound * (1.0 + 1e-9) {
        return Err(Error::Precondition(format!("Hölder bound violated: {lhs:e} > {bound:e}")));
    }
    Ok(HolderCheck { lhs, bound })
}
