//! JSON experiment configuration.
//!
//! Unknown keys are rejected everywhere. Parsing errors carry the JSON path
//! of the offending key, and [`ExperimentConfig::build`] maps every
//! precondition of the numerical core back to a config key before any
//! simulation starts.

use serde::{Deserialize, Serialize};

use spme_core::drift::{DriftSpec, Modulation, PhiSpec, PsiSpec};
use spme_core::galerkin::{Observable, Scheme, StepperConfig};
use spme_core::noise::{Multiplier, NoiseSpec};
use spme_core::triple::{Field, SpectralDomain};
use spme_core::Error as CoreError;

use crate::error::ConfigError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainConfig,
    pub drift: DriftConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    pub stepper: StepperSection,
    #[serde(default)]
    pub run: RunConfig,
    pub initial: InitialCondition,
    /// Second start for `contraction` and `ergodicity`.
    #[serde(default)]
    pub initial_pair: Option<InitialCondition>,
    #[serde(default)]
    pub check: CheckConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub n_grid: usize,
    #[serde(default = "one")]
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ModeConfig {
    #[default]
    A1,
    A2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftConfig {
    #[serde(default)]
    pub mode: ModeConfig,
    pub psi: PsiConfig,
    #[serde(default)]
    pub phi: PhiConfig,
    #[serde(default)]
    pub f_const: f64,
    #[serde(default)]
    pub g_const: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PsiConfig {
    /// `sign(s) Σ δ_i |s|^{r_i}` from `[δ_i, r_i]` pairs.
    PowerSum {
        terms: Vec<[f64; 2]>,
        #[serde(default)]
        modulation: Option<ModulationConfig>,
        #[serde(default)]
        slope_cap: Option<f64>,
    },
    LogPower {
        theta: f64,
        r: f64,
        #[serde(default)]
        modulation: Option<ModulationConfig>,
    },
}

/// A number, or `{"mean", "amplitude", "period"}` for a sinusoid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModulationConfig {
    Constant(f64),
    Sine(SineConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SineConfig {
    pub mean: f64,
    pub amplitude: f64,
    pub period: f64,
}

impl From<ModulationConfig> for Modulation {
    fn from(m: ModulationConfig) -> Self {
        match m {
            ModulationConfig::Constant(c) => Modulation::Constant(c),
            ModulationConfig::Sine(s) => Modulation::Sine { mean: s.mean, amplitude: s.amplitude, period: s.period },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiConfig {
    #[serde(default = "zero_modulation")]
    pub h: ModulationConfig,
    /// `[c, r]` terms of `Φ₀(s) = Σ c sign(s)|s|^r`.
    #[serde(default)]
    pub phi0: Vec<[f64; 2]>,
}

impl Default for PhiConfig {
    fn default() -> Self {
        Self { h: zero_modulation(), phi0: Vec::new() }
    }
}

/// `σ_k = sigma0 · k^{-beta}` on `modes` modes (all Galerkin modes when
/// absent), scaled by `mult`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub sigma0: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub modes: Option<usize>,
    #[serde(default = "unit_mult")]
    pub mult: MultConfig,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { sigma0: 0.0, beta: 0.0, modes: None, mult: unit_mult() }
    }
}

/// A number (additive noise), or `{"rho_min", "rho_max", "kappa"}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MultConfig {
    Constant(f64),
    Decay(DecayConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    pub rho_min: f64,
    pub rho_max: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeConfig {
    Explicit,
    SemiImplicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperSection {
    pub dt: f64,
    pub t_end: f64,
    pub n_modes: usize,
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub record_ito: bool,
    #[serde(default = "default_tol")]
    pub implicit_tol: f64,
    #[serde(default = "default_max_iter")]
    pub implicit_max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_ensemble")]
    pub ensemble_size: usize,
    #[serde(default)]
    pub master_seed: Option<u64>,
    #[serde(default = "default_save_every")]
    pub save_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { ensemble_size: default_ensemble(), master_seed: None, save_every: default_save_every() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    Zero,
    /// `amplitude · (4x(1 - x))²`.
    Bump {
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `amplitude · s_k`.
    Eigenmode {
        k: usize,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Gaussian coefficients decaying like `k^{-gamma}`, rescaled to max-norm
    /// `amplitude`.
    Random {
        gamma: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Galerkin coefficients `X^_1, X^_2, ...`, zero-padded.
    Coefficients {
        values: Vec<f64>,
    },
}

/// Per-subcommand settings; each subcommand reads only its own keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    /// Overrides the derived weak-monotonicity constant.
    #[serde(default)]
    pub declared_c: Option<f64>,
    /// Multiplies the coercivity constant `c2` (a value > 1 is a
    /// falsification control).
    #[serde(default = "one")]
    pub c2_scale: f64,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default = "default_samples_linv")]
    pub linv_samples: usize,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "yes")]
    pub expect_extinction: bool,
    #[serde(default = "three")]
    pub z_max: f64,
    #[serde(default = "default_order")]
    pub min_order: f64,
    #[serde(default = "default_levels")]
    pub refine_levels: u32,
    #[serde(default = "default_observable")]
    pub observable: ObservableConfig,
    /// Saved times compared by `ou-oracle`; empty means the final time.
    #[serde(default)]
    pub oracle_times: Vec<f64>,
}

impl Default for CheckConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all check keys have defaults")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableConfig {
    /// `⟨X, s_k⟩_H`.
    HInnerMode { k: usize },
    /// The coefficient `X^_k`.
    Mode { k: usize },
}

impl From<ObservableConfig> for Observable {
    fn from(o: ObservableConfig) -> Self {
        match o {
            ObservableConfig::HInnerMode { k } => Observable::HInnerWithMode(k),
            ObservableConfig::Mode { k } => Observable::Mode(k),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn three() -> f64 {
    3.0
}
fn yes() -> bool {
    true
}
fn zero_modulation() -> ModulationConfig {
    ModulationConfig::Constant(0.0)
}
fn unit_mult() -> MultConfig {
    MultConfig::Constant(1.0)
}
fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    100
}
fn default_ensemble() -> usize {
    1
}
fn default_save_every() -> usize {
    1
}
fn default_samples() -> usize {
    1000
}
fn default_samples_linv() -> usize {
    200
}
fn default_eps() -> f64 {
    1e-6
}
fn default_order() -> f64 {
    0.8
}
fn default_levels() -> u32 {
    2
}
fn default_observable() -> ObservableConfig {
    ObservableConfig::HInnerMode { k: 1 }
}

/// The validated objects a config describes.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub dom: SpectralDomain,
    pub drift: DriftSpec,
    pub noise: NoiseSpec,
    pub stepper: StepperConfig,
    pub x0: Field,
    pub y0: Option<Field>,
    pub ensemble_size: usize,
    pub master_seed: u64,
}

/// Maps a core validation error to the config key that caused it.
fn core_key(default_key: &str, e: CoreError) -> ConfigError {
    match e {
        CoreError::Validation { what, reason } => ConfigError::new(what, reason),
        CoreError::ModesOutOfRange { .. } => ConfigError::new("stepper.n_modes", e.to_string()),
        other => ConfigError::new(default_key, other.to_string()),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let key = if path == "." { String::from("<root>") } else { path };
            ConfigError::new(key, e.into_inner().to_string())
        })
    }

    /// Validates every section. `seed` is the already-resolved master seed.
    pub fn build(&self, seed: u64) -> Result<Experiment, ConfigError> {
        let dom = SpectralDomain::new(self.domain.n_grid, self.domain.alpha).map_err(|e| match e {
            CoreError::Validation { what: "alpha", reason } => ConfigError::new("domain.alpha", reason),
            other => ConfigError::new("domain.n_grid", other.to_string()),
        })?;
        let drift = self.build_drift()?;
        let noise = self.build_noise()?;

        let s = &self.stepper;
        let mut stepper = StepperConfig::new(
            s.dt,
            s.t_end,
            s.n_modes,
            match s.scheme {
                SchemeConfig::Explicit => Scheme::ExplicitEm,
                SchemeConfig::SemiImplicit => Scheme::SemiImplicitEm,
            },
        );
        stepper.record_ito = s.record_ito;
        stepper.implicit_tol = s.implicit_tol;
        stepper.implicit_max_iter = s.implicit_max_iter;
        stepper.save_every = self.run.save_every;
        stepper.validate(&dom).map_err(|e| match e {
            CoreError::Unsupported(msg) => ConfigError::new("stepper.scheme", msg),
            other => core_key("stepper", other),
        })?;
        if self.run.ensemble_size == 0 {
            return Err(ConfigError::new("run.ensemble_size", "must be at least 1"));
        }

        let x0 = initial_field(&dom, &self.initial, "initial")?;
        let y0 = match &self.initial_pair {
            Some(ic) => Some(initial_field(&dom, ic, "initial_pair")?),
            None => None,
        };
        self.check_section(&dom)?;
        Ok(Experiment { dom, drift, noise, stepper, x0, y0, ensemble_size: self.run.ensemble_size, master_seed: seed })
    }

    fn build_drift(&self) -> Result<DriftSpec, ConfigError> {
        let d = &self.drift;
        let psi = match &d.psi {
            PsiConfig::PowerSum { terms, modulation, slope_cap } => {
                let mut p = PsiSpec::power_sum(terms.iter().map(|t| (t[0], t[1])).collect());
                if let Some(m) = modulation {
                    p = p.with_modulation((*m).into());
                }
                if let Some(cap) = slope_cap {
                    if !(*cap > 0.0) {
                        return Err(ConfigError::new("drift.psi.slope_cap", "must be positive"));
                    }
                    p = p.with_slope_cap(*cap);
                }
                p
            }
            PsiConfig::LogPower { theta, r, modulation } => {
                let mut p = PsiSpec::log_power(*theta, *r);
                if let Some(m) = modulation {
                    p = p.with_modulation((*m).into());
                }
                p
            }
        };
        let phi = PhiSpec { h: d.phi.h.into(), phi0: d.phi.phi0.iter().map(|t| (t[0], t[1])).collect() };
        let mode = match d.mode {
            ModeConfig::A1 => spme_core::drift::Mode::A1,
            ModeConfig::A2 => spme_core::drift::Mode::A2,
        };
        DriftSpec::new(psi, phi, d.f_const, d.g_const, mode).map_err(|e| match e {
            CoreError::Unsupported(msg) => ConfigError::new("drift.mode", msg),
            CoreError::Validation { what, reason } => ConfigError::new(drift_key(what), reason),
            other => ConfigError::new("drift.psi", other.to_string()),
        })
    }

    fn build_noise(&self) -> Result<NoiseSpec, ConfigError> {
        let n = &self.noise;
        let modes = n.modes.unwrap_or(self.stepper.n_modes);
        let mult = match n.mult {
            MultConfig::Constant(c) => Multiplier::Constant(c),
            MultConfig::Decay(d) => Multiplier::Decay { rho_min: d.rho_min, rho_max: d.rho_max, kappa: d.kappa },
        };
        if !n.sigma0.is_finite() || !n.beta.is_finite() {
            return Err(ConfigError::new("noise.sigma0", "sigma0 and beta must be finite"));
        }
        NoiseSpec::power_decay(n.sigma0, n.beta, modes, mult).map_err(|e| match e {
            CoreError::Validation { what: "noise.sigma", reason } => ConfigError::new("noise.sigma0", reason),
            other => core_key("noise", other),
        })
    }

    fn check_section(&self, dom: &SpectralDomain) -> Result<(), ConfigError> {
        let c = &self.check;
        if !(c.eps > 0.0) {
            return Err(ConfigError::new("check.eps", "must be positive"));
        }
        if !(c.c2_scale >= 0.0 && c.c2_scale.is_finite()) {
            return Err(ConfigError::new("check.c2_scale", "must be finite and nonnegative"));
        }
        if !(c.z_max > 0.0) {
            return Err(ConfigError::new("check.z_max", "must be positive"));
        }
        if c.refine_levels == 0 || c.refine_levels > 10 {
            return Err(ConfigError::new("check.refine_levels", "must be in 1..=10"));
        }
        if let Some(dc) = c.declared_c {
            if !dc.is_finite() {
                return Err(ConfigError::new("check.declared_c", "must be finite"));
            }
        }
        if c.oracle_times.iter().any(|t| !(*t >= 0.0 && *t <= self.stepper.t_end)) {
            return Err(ConfigError::new("check.oracle_times", "times must lie in [0, t_end]"));
        }
        let k = match c.observable {
            ObservableConfig::HInnerMode { k } | ObservableConfig::Mode { k } => k,
        };
        if k == 0 || k > self.stepper.n_modes.min(dom.n_grid()) {
            return Err(ConfigError::new("check.observable.k", format!("mode {k} outside 1..={}", self.stepper.n_modes)));
        }
        Ok(())
    }
}

fn drift_key(what: &str) -> String {
    if what.starts_with("drift.") {
        what.to_string()
    } else {
        format!("drift.{what}")
    }
}

fn initial_field(dom: &SpectralDomain, ic: &InitialCondition, key: &'static str) -> Result<Field, ConfigError> {
    let finite = |a: f64, sub: &str| {
        if a.is_finite() {
            Ok(())
        } else {
            Err(ConfigError::new(format!("{key}.{sub}"), "must be finite"))
        }
    };
    Ok(match *ic {
        InitialCondition::Zero => Field::zeros(dom.n_grid()),
        InitialCondition::Bump { amplitude } => {
            finite(amplitude, "amplitude")?;
            dom.sample(|x| {
                let b = 4.0 * x * (1.0 - x);
                amplitude * b * b
            })
        }
        InitialCondition::Eigenmode { k, amplitude } => {
            finite(amplitude, "amplitude")?;
            if k == 0 || k > dom.n_grid() {
                return Err(ConfigError::new(format!("{key}.k"), format!("mode {k} outside 1..={}", dom.n_grid())));
            }
            Field::from_values(dom.basis_vector(k).iter().map(|s| amplitude * s).collect())
        }
        InitialCondition::Random { gamma, amplitude, seed } => {
            finite(amplitude, "amplitude")?;
            finite(gamma, "gamma")?;
            let mut rng = spme_core::rng::stream(seed, u64::MAX - 2, 0);
            spme_core::drift::random_field(dom, gamma, amplitude, &mut rng)
        }
        InitialCondition::Coefficients { ref values } => {
            if values.len() > dom.n_grid() {
                return Err(ConfigError::new(format!("{key}.values"), format!("at most {} coefficients", dom.n_grid())));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(ConfigError::new(format!("{key}.values"), "must be finite"));
            }
            Field::from_galerkin(dom, values)
        }
    })
}
