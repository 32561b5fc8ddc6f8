//! One function per subcommand. Each returns its CSV tables and a verdict;
//! writing files and the manifest is left to the caller.

use spme_core::drift::{self, DeclaredConstants, LinvNorms, Mode, SampleGrid};
use spme_core::galerkin::{Ensemble, Galerkin, Observable, Scheme};
use spme_core::report::ConditionReport;
use spme_core::rng::splitmix64;
use spme_core::stats::StatTable;
use spme_core::triple::Field;
use spme_core::verify;

use crate::config::{Experiment, ExperimentConfig};
use crate::csv::{fmt_f64, CsvTable};
use crate::ensemble::{column, map_paths, monte_carlo, observe_paths};
use crate::error::{ConfigError, RunError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Simulate,
    CheckConditions,
    ItoCheck,
    Contraction,
    Energy,
    Extinction,
    OuOracle,
    Ergodicity,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Simulate => "simulate",
            Subcommand::CheckConditions => "check-conditions",
            Subcommand::ItoCheck => "ito-check",
            Subcommand::Contraction => "contraction",
            Subcommand::Energy => "energy",
            Subcommand::Extinction => "extinction",
            Subcommand::OuOracle => "ou-oracle",
            Subcommand::Ergodicity => "ergodicity",
        }
    }
}

/// Tables to write (file name, contents) and the verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub pass: bool,
    pub summary: String,
    pub tables: Vec<(String, CsvTable)>,
}

impl Outcome {
    fn new(pass: bool, summary: String, tables: Vec<(&str, CsvTable)>) -> Self {
        Self { pass, summary, tables: tables.into_iter().map(|(n, t)| (n.to_string(), t)).collect() }
    }
}

pub fn run(sub: Subcommand, cfg: &ExperimentConfig, exp: &Experiment) -> Result<Outcome, RunError> {
    match sub {
        Subcommand::Simulate => simulate(exp),
        Subcommand::CheckConditions => check_conditions(cfg, exp),
        Subcommand::ItoCheck => ito_check(cfg, exp),
        Subcommand::Contraction => contraction(cfg, exp),
        Subcommand::Energy => energy(cfg, exp),
        Subcommand::Extinction => extinction(cfg, exp),
        Subcommand::OuOracle => ou_oracle(cfg, exp),
        Subcommand::Ergodicity => ergodicity(cfg, exp),
    }
}

fn ensemble<'a>(exp: &'a Experiment, sys: Galerkin<'a>) -> Ensemble<'a> {
    Ensemble { system: sys, config: exp.stepper.clone(), x0: exp.x0.clone(), y0: exp.y0.clone(), master_seed: exp.master_seed }
}

fn need_paths(exp: &Experiment, min: usize) -> Result<(), RunError> {
    if exp.ensemble_size < min {
        return Err(ConfigError::new("run.ensemble_size", format!("this subcommand needs at least {min} paths")).into());
    }
    Ok(())
}

fn pair(exp: &Experiment) -> Result<&Field, RunError> {
    exp.y0.as_ref().ok_or_else(|| ConfigError::new("initial_pair", "this subcommand needs a second initial condition").into())
}

/// `‖L⁻¹‖` estimates for every exponent of `Ψ` and `Φ₀`, when `Φ₀` is
/// present or the mode is A2.
fn linv_norms(cfg: &ExperimentConfig, exp: &Experiment) -> Result<Option<LinvNorms>, RunError> {
    if exp.drift.mode != Mode::A2 && !exp.drift.phi.has_phi0() {
        return Ok(None);
    }
    let mut exps: Vec<f64> = exp.drift.psi.terms().map(|t| t.iter().map(|x| x.1).collect()).unwrap_or_default();
    exps.extend(exp.drift.phi.phi0.iter().map(|x| x.1));
    exps.sort_by(f64::total_cmp);
    exps.dedup();
    Ok(Some(LinvNorms::estimate(&exp.dom, &exps, cfg.check.linv_samples, exp.master_seed)?))
}

fn constants(cfg: &ExperimentConfig, exp: &Experiment) -> Result<DeclaredConstants, RunError> {
    let linv = linv_norms(cfg, exp)?;
    let mut d = drift::declared_constants(&exp.dom, &exp.drift, &exp.noise, linv.as_ref())?;
    if let Some(c) = cfg.check.declared_c {
        d.c_mono = c;
    }
    Ok(d)
}

fn stats_table(st: &StatTable) -> CsvTable {
    let mut header = vec!["t".to_string()];
    for n in &st.names {
        header.push(format!("{n}_mean"));
        header.push(format!("{n}_se"));
    }
    let mut t = CsvTable::new(header);
    for (i, &time) in st.times.iter().enumerate() {
        let mut row = vec![time];
        for j in 0..st.n_obs() {
            let k = st.index(i, j);
            row.push(st.mean[k]);
            row.push(st.se_mean[k]);
        }
        t.push_numbers(&row);
    }
    t
}

fn simulate(exp: &Experiment) -> Result<Outcome, RunError> {
    let sys = Galerkin::new(&exp.dom, &exp.drift, &exp.noise);
    let n = exp.stepper.n_modes;
    let traj = sys.simulate(&exp.stepper, &exp.x0, exp.master_seed, 0)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|k| format!("mode_{k}")));
    let mut t = CsvTable::new(header);
    for (time, state) in traj.times.iter().zip(&traj.states) {
        let mut row = vec![*time];
        row.extend_from_slice(state);
        t.push_numbers(&row);
    }
    let mut tables = vec![("trajectory.csv", t)];
    if exp.ensemble_size >= 2 {
        let obs = [Observable::HNormSq, Observable::MaxNorm, Observable::Mode(1)];
        let st = monte_carlo(&ensemble(exp, sys), exp.ensemble_size, &obs)?;
        tables.push(("stats.csv", stats_table(&st)));
    }
    let summary = format!("simulated {} path(s), {} saved times", exp.ensemble_size, traj.times.len());
    Ok(Outcome::new(true, summary, tables))
}

fn check_conditions(cfg: &ExperimentConfig, exp: &Experiment) -> Result<Outcome, RunError> {
    let grid = SampleGrid::standard(exp.stepper.t_end);
    let linv = linv_norms(cfg, exp)?;
    let mode_report = match exp.drift.mode {
        Mode::A1 => drift::check_a1(&exp.drift, &grid)?,
        Mode::A2 => drift::check_a2(&exp.drift, linv.as_ref().expect("A2 estimates"), &grid)?,
    };
    let mut declared = drift::declared_constants(&exp.dom, &exp.drift, &exp.noise, linv.as_ref())?;
    if let Some(c) = cfg.check.declared_c {
        declared.c_mono = c;
    }
    let seed = exp.master_seed;
    let n = cfg.check.n_samples;
    let reports: Vec<ConditionReport> = vec![
        mode_report,
        drift::check_k(&exp.dom, &exp.drift, n, seed)?,
        drift::check_h(&exp.dom, &exp.drift, &exp.noise, &declared, n, exp.stepper.t_end, seed)?,
    ];
    let mut values = CsvTable::new(["report", "key", "value"]);
    let mut violations = CsvTable::new(["report", "condition", "detail"]);
    for r in &reports {
        for (k, v) in &r.entries {
            values.push(vec![r.name.clone(), k.clone(), fmt_f64(*v)]);
        }
        for v in &r.violations {
            violations.push(vec![r.name.clone(), v.condition.to_string(), v.detail.clone()]);
        }
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed()).map(|r| r.name.as_str()).collect();
    let summary = if failed.is_empty() {
        format!("{} reports, no violations", reports.len())
    } else {
        format!("{} violation(s) in {}", violations.rows.len(), failed.join(", "))
    };
    Ok(Outcome::new(failed.is_empty(), summary, vec![("conditions.csv", values), ("violations.csv", violations)]))
}

/// Relative tolerance of the deterministic explicit ledger.
pub const SKELETON_TOL: f64 = 1e-10;
/// Absolute slack of the ledger in ulps of `max ‖X_k‖²_H`.
pub const SKELETON_ULPS: f64 = 16.0;

fn ito_check(cfg: &ExperimentConfig, exp: &Experiment) -> Result<Outcome, RunError> {
    let sys = Galerkin::new(&exp.dom, &exp.drift, &exp.noise);
    let mut stepper = exp.stepper.clone();
    stepper.record_ito = true;
    if exp.noise.is_zero() && stepper.scheme == Scheme::ExplicitEm {
        // the explicit scheme without noise leaves exactly Σ dt²‖A_j‖²_H
        let traj = sys.simulate(&stepper, &exp.x0, exp.master_seed, 0)?;
        let led = verify::ito_ledger(&exp.dom, &traj)?;
        // storing X_k in f64 already perturbs ‖X_k‖² by a few ulps
        let floor = SKELETON_ULPS * f64::EPSILON * led.norm_sq.iter().fold(0.0, |m: f64, x| m.max(*x));
        let mut t = CsvTable::new(["t", "residual", "remainder", "relative_error"]);
        let mut worst: f64 = 0.0;
        let mut pass = true;
        for k in 0..led.times.len() {
            let (r, q) = (led.residual[k], led.remainder[k]);
            let err = (r - q).abs();
            let rel = if q != 0.0 { err / q.abs() } else { err };
            worst = worst.max(rel);
            pass &= err <= SKELETON_TOL * q.abs() + floor;
            t.push_numbers(&[led.times[k], r, q, rel]);
        }
        let summary = format!("deterministic ledger, max relative error {worst:.3e}, rounding floor {floor:.1e}");
        return Ok(Outcome::new(pass, summary, vec![("ito.csv", t)]));
    }

    let levels = cfg.check.refine_levels;
    let paths = exp.ensemble_size;
    let (dom, x0, seed) = (&exp.dom, exp.x0.coeffs(&exp.dom).to_vec(), exp.master_seed);
    let mut t = CsvTable::new(["dt", "mean_max_residual", "se"]);
    let mut dts = Vec::new();
    let mut errs = Vec::new();
    for level in 0..=levels {
        let mut c = stepper.clone();
        c.dt = stepper.dt / f64::from(1u32 << level);
        c.refine_level = level;
        let per_path = map_paths(paths, |p| {
            let traj = sys.simulate(&c, &Field::from_coeffs(x0.clone()), seed, p as u64)?;
            Ok(verify::ito_residual(dom, &traj)?.0)
        })?;
        let (m, se) = mean_se(&per_path);
        t.push_numbers(&[c.dt, m, se]);
        dts.push(c.dt);
        errs.push(m);
    }
    let monotone = errs.windows(2).all(|w| w[1] < w[0]);
    let order = log_log_slope(&dts, &errs);
    let pass = monotone && order >= cfg.check.min_order;
    let summary =
        format!("order {order:.3} over {} levels (monotone: {monotone}, required >= {})", levels + 1, cfg.check.min_order);
    Ok(Outcome::new(pass, summary, vec![("ito.csv", t)]))
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn contraction(cfg: &ExperimentConfig, exp: &Experiment) -> Result<Outcome, RunError> {
    pair(exp)?;
    let c = match cfg.check.declared_c {
        Some(c) => c,
        None => constants(cfg, exp)?.c_mono,
    };
    let sys = Galerkin::new(&exp.dom, &exp.drift, &exp.noise);
    let ens = ensemble(exp, sys);
    let times = ens.saved_times()?;
    let per_path = observe_paths(&ens, exp.ensemble_size, &[Observable::DiffHNormSq])?;
    let rep = verify::contraction_test(&times, &per_path, c)?;

    // without growth the semi-implicit step is a contraction on every path
    let pathwise = if c <= 0.0 && exp.stepper.scheme == Scheme::SemiImplicitEm {
        Some(per_path.iter().all(|p| p.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12))))
    } else {
        None
    };
    let st = StatTable::from_paths(times, vec!["diff_h_norm_sq".into()], &per_path)?;
    let pass = rep.pass && pathwise.unwrap_or(true);
    let mut summary = format!("slope {:.6e} (se {:.3e}) vs declared c {c:.6e}", rep.fit.slope, rep.fit.se);
    if let Some(p) = pathwise {
        summary.push_str(&format!(", pathwise nonincreasing: {p}"));
    }
    Ok(Outcome::new(pass, summary, vec![("contraction.csv", stats_table(&st))]))
}

fn energy(cfg: &ExperimentConfig, exp: &Experiment) -> Result<Outcome, RunError> {
    need_paths(exp, 2)?;
    let d = constants(cfg, exp)?;
    let c2 = d.c2 * cfg.check.c2_scale;
    let sys = Galerkin::new(&exp.dom, &exp.drift, &exp.noise);
    let mut ens = ensemble(exp, sys);
    // the defect integrates R over every step
    ens.config.save_every = 1;
    let times = ens.saved_times()?;
    let per_path = observe_paths(&ens, exp.ensemble_size, &[Observable::HNormSq, Observable::R])?;
    let norms: Vec<Vec<f64>> = per_path.iter().map(|p| column(p, 2, 0)).collect();
    let defects: Vec<Vec<f64>> =
        per_path.iter().zip(&norms).map(|(p, ns)| verify::energy_defect(&times, ns, &column(p, 2, 1), d.c1, c2, d.f)).collect();
    let rep = verify::energy_estimate(&times, &defects, &norms)?;
    let rows: Vec<Vec<f64>> =
        defects.iter().zip(&norms).map(|(a, b)| a.iter().zip(b).flat_map(|(x, y)| [*x, *y]).collect()).collect();
    let st = StatTable::from_paths(times, vec!["defect".into(), "h_norm_sq".into()], &rows)?;
    let summary = match rep.first_violation {
        None => format!("defect within 3 SE at all times (c1 {:.4e}, c2 {c2:.4e}, f {:.4e})", d.c1, d.f),
        Some(t) => format!("defect exceeds 3 SE from t = {t} (c1 {:.4e}, c2 {c2:.4e}, f {:.4e})", d.c1, d.f),
    };
    Ok(Outcome::new(rep.passed(), summary, vec![("energy.csv", stats_table(&st))]))
}

fn extinction(cfg: &ExperimentConfig, exp: &Experiment) -> Result<Outcome, RunError> {
    let sys = Galerkin::new(&exp.dom, &exp.drift, &exp.noise);
    let ens = ensemble(exp, sys);
    let times = ens.saved_times()?;
    let obs = [Observable::MaxNorm, Observable::HNormSq];
    let path = ens.observe_path(0, &obs)?;
    let (maxn, hn) = (column(&path, 2, 0), column(&path, 2, 1));
    let found = verify::extinction_time(&times, &maxn, cfg.check.eps)?;
    let mut t = CsvTable::new(["t", "max_norm", "h_norm_sq"]);
    for i in 0..times.len() {
        t.push_numbers(&[times[i], maxn[i], hn[i]]);
    }
    let mut pass = found.is_some() == cfg.check.expect_extinction;
    let mut summary = match found {
        Some(at) => format!("max-norm below {:e} at t = {at}", cfg.check.eps),
        None => format!("max-norm stays above {:e} up to t = {}", cfg.check.eps, exp.stepper.t_end),
    };
    if !cfg.check.expect_extinction && exp.noise.is_zero() {
        let decreasing = hn.windows(2).all(|w| w[1] < w[0]);
        summary.push_str(&format!(", H-norm strictly decreasing: {decreasing}"));
        pass &= decreasing;
    }
    Ok(Outcome::new(pass, summary, vec![("extinction.csv", t)]))
}

fn ou_oracle(cfg: &ExperimentConfig, exp: &Experiment) -> Result<Outcome, RunError> {
    need_paths(exp, 2)?;
    let n = exp.stepper.n_modes;
    let x0 = exp.x0.coeffs(&exp.dom)[..n].to_vec();
    // refuses non-linear drifts before any path is simulated
    verify::ou_oracle(&exp.dom, &exp.drift, &exp.noise, &x0, 0.0)?;
    let sys = Galerkin::new(&exp.dom, &exp.drift, &exp.noise);
    let ens = ensemble(exp, sys);
    let times = ens.saved_times()?;
    let targets: Vec<usize> = if cfg.check.oracle_times.is_empty() {
        vec![times.len() - 1]
    } else {
        cfg.check
            .oracle_times
            .iter()
            .map(|&t| {
                times
                    .iter()
                    .position(|&s| (s - t).abs() <= 1e-9 * t.max(1.0))
                    .ok_or_else(|| ConfigError::new("check.oracle_times", format!("t = {t} is not a saved time")))
            })
            .collect::<Result<_, _>>()?
    };
    let obs: Vec<Observable> = (1..=n).map(Observable::Mode).collect();
    let st = monte_carlo(&ens, exp.ensemble_size, &obs)?;
    let mut t = CsvTable::new(["t", "mode", "mean", "expected_mean", "z_mean", "var", "expected_var", "z_var"]);
    let mut zmax: f64 = 0.0;
    for &i in &targets {
        let time = st.times[i];
        let exact = verify::ou_oracle(&exp.dom, &exp.drift, &exp.noise, &x0, time)?;
        for (k, &(em, ev)) in exact.iter().enumerate() {
            let j = st.index(i, k);
            let z = |got: f64, want: f64, se: f64| {
                if se > 0.0 {
                    (got - want) / se
                } else if got == want {
                    0.0
                } else {
                    f64::INFINITY
                }
            };
            let zm = z(st.mean[j], em, st.se_mean[j]);
            let zv = z(st.var[j], ev, st.se_var[j]);
            zmax = zmax.max(zm.abs()).max(zv.abs());
            t.push(vec![
                fmt_f64(time),
                (k + 1).to_string(),
                fmt_f64(st.mean[j]),
                fmt_f64(em),
                fmt_f64(zm),
                fmt_f64(st.var[j]),
                fmt_f64(ev),
                fmt_f64(zv),
            ]);
        }
    }
    let pass = zmax < cfg.check.z_max;
    let summary = format!("max |z| = {zmax:.3} over {} statistics (threshold {})", 2 * n * targets.len(), cfg.check.z_max);
    Ok(Outcome::new(pass, summary, vec![("ou.csv", t)]))
}

fn ergodicity(cfg: &ExperimentConfig, exp: &Experiment) -> Result<Outcome, RunError> {
    need_paths(exp, 2)?;
    let y0 = pair(exp)?.clone();
    let c = match cfg.check.declared_c {
        Some(c) => c,
        None => constants(cfg, exp)?.c_mono,
    };
    let obs: Observable = cfg.check.observable.into();
    let lip =
        obs.lipschitz(&exp.dom).ok_or_else(|| ConfigError::new("check.observable", "observable has no Lipschitz constant"))?;
    let sys = Galerkin::new(&exp.dom, &exp.drift, &exp.noise);
    let mut from_x = ensemble(exp, sys);
    from_x.y0 = None;
    let mut from_y = from_x.clone();
    from_y.x0 = y0;
    from_y.master_seed = splitmix64(exp.master_seed);
    let times = from_x.saved_times()?;
    let px = observe_paths(&from_x, exp.ensemble_size, &[obs])?;
    let py = observe_paths(&from_y, exp.ensemble_size, &[obs])?;
    let names = vec![obs.name()];
    let sx = StatTable::from_paths(times.clone(), names.clone(), &px)?;
    let sy = StatTable::from_paths(times.clone(), names, &py)?;

    let n = exp.stepper.n_modes;
    let d: Vec<f64> = from_x.x0.coeffs(&exp.dom)[..n].iter().zip(&from_y.x0.coeffs(&exp.dom)[..n]).map(|(a, b)| a - b).collect();
    let dist = exp.dom.h_norm_sq_coeffs(&d).sqrt();

    let half = exp.stepper.t_end / 2.0;
    let tail: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= half).collect();
    let avg = |p: &Vec<f64>| tail.iter().map(|&i| p[i]).sum::<f64>() / tail.len() as f64;
    let ax: Vec<f64> = px.iter().map(avg).collect();
    let ay: Vec<f64> = py.iter().map(avg).collect();
    let (mx, ex, my, ey) = (sx.mean_series(0), sx.se_series(0), sy.mean_series(0), sy.se_series(0));
    let rep = verify::ergodicity_test(&times, &mx, &ex, &my, &ey, c, lip, dist, &ax, &ay)?;

    let mut t = CsvTable::new(["t", "mean_x", "se_x", "mean_y", "se_y", "bound"]);
    for i in 0..times.len() {
        t.push_numbers(&[times[i], mx[i], ex[i], my[i], ey[i], (c * times[i] / 2.0).exp() * lip * dist]);
    }
    let summary = format!(
        "bound excess {:.3e} (holds: {}), time averages differ by {:.3e} vs 3 SE {:.3e}",
        rep.max_excess,
        rep.bound_holds,
        rep.time_average_diff,
        3.0 * rep.time_average_se
    );
    Ok(Outcome::new(rep.passed(), summary, vec![("ergodicity.csv", t)]))
}
