//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero when any criterion fails.
//!
//! Simulation criteria go through the same entry point as the `spme` binary
//! using the sample configs in `configs/`; the reproducibility criterion
//! reruns those configs through the binary itself.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use spme::cli::{execute, Report, RunArgs};
use spme::experiments::Subcommand;
use spme_core::drift::{random_field, DriftSpec, PsiSpec};
use spme_core::galerkin::{Ensemble, Galerkin, Observable, Scheme, StepperConfig};
use spme_core::noise::NoiseSpec;
use spme_core::orlicz::{legendre, DiscreteMeasure, YoungFunction, YoungLike};
use spme_core::rng;
use spme_core::triple::{Field, SpectralDomain};
use spme_core::verify;

type Verdict = Result<(bool, String), String>;

struct Ctx {
    work: tempfile::TempDir,
    /// Every CLI run of the suite, for the reproducibility rerun.
    runs: std::cell::RefCell<Vec<(Subcommand, PathBuf, PathBuf)>>,
}

impl Ctx {
    fn config_dir() -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs")
    }

    fn load(name: &str) -> Value {
        let text = std::fs::read_to_string(Self::config_dir().join(name)).expect("sample config");
        serde_json::from_str(&text).expect("sample config is JSON")
    }

    /// Runs `sub` on `config`, written to a fresh directory under `tag`.
    fn run(&self, sub: Subcommand, tag: &str, config: &Value, seed: Option<u64>) -> Result<(Report, PathBuf), String> {
        let dir = self.work.path().join(tag);
        std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        let cfg_path = dir.join("config.json");
        std::fs::write(&cfg_path, serde_json::to_string_pretty(config).unwrap()).map_err(|e| e.to_string())?;
        let out = dir.join("out");
        let args = RunArgs { config: cfg_path.clone(), out: out.clone(), seed, threads: 0 };
        let report = execute(sub, &args).map_err(|e| format!("{}: {e}", sub.name()))?;
        self.runs.borrow_mut().push((sub, cfg_path, out.clone()));
        Ok((report, out))
    }
}

fn read_csv(path: &Path) -> Result<Vec<Vec<String>>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(text.lines().map(|l| l.split(',').map(str::to_string).collect()).collect())
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

fn c1_orlicz(_: &Ctx) -> Verdict {
    let grid = log_grid(1e-2, 1e2, 41);
    let mut worst_rt: f64 = 0.0;
    for r in [0.5, 1.0, 2.0, 3.0] {
        let n = YoungFunction::power_sum(&[(1.0, r)]).map_err(err)?;
        let dual = n.dual();
        for &s in &grid {
            let back = legendre(|x| dual.eval(x), s).map_err(err)?;
            let want = n.eval(s).map_err(err)?;
            worst_rt = worst_rt.max((back - want).abs() / want);
        }
    }
    let round_trip = worst_rt <= 1e-6;

    let square = YoungFunction::power_sum(&[(1.0, 1.0)]).map_err(err)?;
    let mut doubling = square.dual_doubling_factor() == Some(4.0);
    for &s in &grid {
        doubling &= close(square.dual_eval(2.0 * s).map_err(err)?, 4.0 * square.dual_eval(s).map_err(err)?, 1e-12);
    }
    for r in [0.5, 2.0, 3.0] {
        let n = YoungFunction::power_sum(&[(1.0, r)]).map_err(err)?;
        let factor = n.dual_doubling_factor().ok_or("no doubling factor")?;
        let theta: f64 = 2f64.powf(1.0 / r);
        doubling &= close(factor, theta.powf(r + 1.0), 1e-12);
        for &s in &grid {
            doubling &= n.dual_eval(2.0 * s).map_err(err)? <= factor * n.dual_eval(s).map_err(err)? * (1.0 + 1e-9);
        }
    }

    let dom = SpectralDomain::new(32, 1.0).map_err(err)?;
    let m = DiscreteMeasure::uniform(32, dom.h());
    let family = [
        YoungFunction::power_sum(&[(1.0, 1.0)]).map_err(err)?,
        YoungFunction::power_sum(&[(1.0, 0.5)]).map_err(err)?,
        YoungFunction::power_sum(&[(0.5, 0.5), (2.0, 2.0)]).map_err(err)?,
        YoungFunction::log_power(2.0, 1.0).map_err(err)?,
    ];
    let mut rng = rng::stream(2024, 0, 0);
    let mut tight = 0usize;
    for i in 0..1000 {
        let amp = 10f64.powf(-2.0 + 4.0 * i as f64 / 999.0);
        let f = random_field(&dom, [0.0, 0.5, 1.0, 2.0][i % 4], amp, &mut rng);
        let n = &family[i % family.len()];
        let lam = n.luxemburg_norm(f.values(&dom), &m).map_err(err)?;
        let at = |l: f64| n.modular(&f.values(&dom).iter().map(|x| x / l).collect::<Vec<_>>(), &m);
        if at(lam).map_err(err)? <= 1.0 && at(lam * (1.0 - 1e-6)).map_err(err)? > 1.0 {
            tight += 1;
        }
    }
    Ok((
        round_trip && doubling && tight == 1000,
        format!("dual round trip {worst_rt:.1e}, doubling inequality {doubling}, unit ball tight on {tight}/1000 fields"),
    ))
}

fn c2_pairing(_: &Ctx) -> Verdict {
    let psi = PsiSpec::power(1.0, 2.0);
    let mut worst: f64 = 0.0;
    for alpha in [1.0, 0.5] {
        let dom = SpectralDomain::new(128, alpha).map_err(err)?;
        let mut rng = rng::stream(17, 0, alpha.to_bits());
        for i in 0..1000 {
            let gamma = [0.0, 0.5, 1.0, 2.0][i % 4];
            let v = random_field(&dom, gamma, 2.0, &mut rng);
            let u = random_field(&dom, gamma, 1.0, &mut rng);
            let pv = Field::from_values(v.values(&dom).iter().map(|&s| psi.eval(0.0, s)).collect());
            let a = dom.pairing_vstar_v(&pv, &u).map_err(err)?;
            let b = dom.pairing_via_h(&pv, &u).map_err(err)?;
            worst = worst.max((a - b).abs() / (1.0 + a.abs()));
        }
    }
    Ok((worst <= 1e-9, format!("max discrepancy {worst:.2e} over 2000 pairs")))
}

fn violations(out: &Path) -> Result<Vec<String>, String> {
    Ok(read_csv(&out.join("violations.csv"))?.into_iter().skip(1).map(|r| r[1].clone()).collect())
}

fn c3_certificates(ctx: &Ctx) -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;
    for name in ["check_pme.json", "check_fast_diffusion.json"] {
        let (rep, _) = ctx.run(Subcommand::CheckConditions, name.trim_end_matches(".json"), &Ctx::load(name), None)?;
        ok &= rep.outcome.pass;
        notes.push(format!("{name}: {}", rep.manifest.status));
    }

    let a2 = Ctx::load("check_a2.json");
    let (rep, out) = ctx.run(Subcommand::CheckConditions, "check_a2", &a2, None)?;
    let eps = read_csv(&out.join("conditions.csv"))?
        .into_iter()
        .find(|r| r[1] == "phi2_epsilon")
        .and_then(|r| r[2].parse::<f64>().ok())
        .ok_or("no phi2_epsilon entry")?;
    ok &= rep.outcome.pass && (eps - 0.5).abs() < 1e-3;
    notes.push(format!("A2 with eps {eps:.4}: {}", rep.manifest.status));

    let mut strong = a2.clone();
    let c = strong["drift"]["phi"]["phi0"][0][0].as_f64().unwrap();
    strong["drift"]["phi"]["phi0"][0][0] = json!(4.0 * c);
    let (rep, out) = ctx.run(Subcommand::CheckConditions, "check_a2_eps2", &strong, None)?;
    let caught = !rep.outcome.pass && violations(&out)?.iter().any(|v| v == "phi2");
    ok &= caught;
    notes.push(format!("eps 2 detected: {caught}"));

    let mut bent = Ctx::load("check_pme.json");
    bent["drift"]["psi"]["terms"] = json!([[1.0, 1.0], [-1.0, 3.0]]);
    let (rep, out) = ctx.run(Subcommand::CheckConditions, "check_non_monotone", &bent, None)?;
    let caught = !rep.outcome.pass && violations(&out)?.iter().any(|v| v == "psi1");
    ok &= caught;
    notes.push(format!("non-monotone detected: {caught}"));
    Ok((ok, notes.join("; ")))
}

fn simple(ctx: &Ctx, sub: Subcommand, name: &str) -> Verdict {
    let (rep, _) = ctx.run(sub, name.trim_end_matches(".json"), &Ctx::load(name), None)?;
    Ok((rep.outcome.pass, rep.outcome.summary))
}

fn c4_skeleton(ctx: &Ctx) -> Verdict {
    simple(ctx, Subcommand::ItoCheck, "ito_skeleton.json")
}

fn c5_refinement(ctx: &Ctx) -> Verdict {
    simple(ctx, Subcommand::ItoCheck, "ito_refinement.json")
}

fn c6_contraction(ctx: &Ctx) -> Verdict {
    let (rep, _) = ctx.run(Subcommand::Contraction, "contraction_pme", &Ctx::load("contraction_pme.json"), None)?;
    let a = rep.outcome.pass;

    // single linear mode on common noise: the difference is deterministic
    let dom = SpectralDomain::new(16, 1.0).map_err(err)?;
    let drift = DriftSpec::linear(1.0).map_err(err)?;
    let noise = NoiseSpec::additive(vec![1.0]).map_err(err)?;
    let dt = 1e-4;
    let mut config = StepperConfig::new(dt, 0.2, 1, Scheme::ExplicitEm);
    config.save_every = 100;
    let ens = Ensemble {
        system: Galerkin::new(&dom, &drift, &noise),
        config,
        x0: Field::from_galerkin(&dom, &[1.0]),
        y0: Some(Field::from_galerkin(&dom, &[-1.0])),
        master_seed: 3,
    };
    let times = ens.saved_times().map_err(err)?;
    let per_path = spme::ensemble::observe_paths(&ens, 100, &[Observable::DiffHNormSq]).map_err(err)?;
    let lam = dom.eigenvalue(1);
    let fit = verify::contraction_test(&times, &per_path, -2.0 * lam).map_err(err)?.fit;
    let scheme_rate = 2.0 * (1.0 - lam * dt).ln() / dt;
    let bias = lam * lam * dt / (1.0 - lam * dt);
    let b_scheme = (fit.slope - scheme_rate).abs() <= 3.0 * fit.se + 1e-9 * lam;
    let b_exact = (fit.slope + 2.0 * lam).abs() <= 3.0 * fit.se + bias;
    Ok((
        a && b_scheme && b_exact,
        format!(
            "(a) {}; (b) slope {:.6} vs -2λ₁ = {:.6} (se {:.1e}, discretization bias ≤ {bias:.2e}), scheme rate {scheme_rate:.6}",
            rep.outcome.summary,
            fit.slope,
            -2.0 * lam,
            fit.se
        ),
    ))
}

fn ou_excursions(out: &Path, z_max: f64) -> Result<Vec<f64>, String> {
    let rows = read_csv(&out.join("ou.csv"))?;
    let mut big = Vec::new();
    for r in rows.iter().skip(1) {
        for idx in [4, 7] {
            let z: f64 = r[idx].parse().map_err(err)?;
            if z.abs() >= z_max {
                big.push(z.abs());
            }
        }
    }
    Ok(big)
}

fn c7_ou(ctx: &Ctx) -> Verdict {
    let cfg = Ctx::load("ou_linear.json");
    let (rep, out) = ctx.run(Subcommand::OuOracle, "ou_linear", &cfg, None)?;
    if rep.outcome.pass {
        return Ok((true, rep.outcome.summary));
    }
    // one marginal excursion earns one rerun on a fresh seed
    let big = ou_excursions(&out, 3.0)?;
    if big.len() == 1 && big[0] < 3.5 {
        let seed = rep.manifest.master_seed.wrapping_add(1);
        let (again, _) = ctx.run(Subcommand::OuOracle, "ou_linear_rerun", &cfg, Some(seed))?;
        return Ok((again.outcome.pass, format!("first run {}; rerun {}", rep.outcome.summary, again.outcome.summary)));
    }
    Ok((false, rep.outcome.summary))
}

fn c8_dichotomy(ctx: &Ctx) -> Verdict {
    let (fast, _) = ctx.run(Subcommand::Extinction, "extinction_fast", &Ctx::load("extinction_fast_diffusion.json"), None)?;
    let (pme, _) = ctx.run(Subcommand::Extinction, "extinction_pme", &Ctx::load("extinction_pme.json"), None)?;
    Ok((
        fast.outcome.pass && pme.outcome.pass,
        format!("fast diffusion: {}; porous medium: {}", fast.outcome.summary, pme.outcome.summary),
    ))
}

fn c9_energy(ctx: &Ctx) -> Verdict {
    let cfg = Ctx::load("energy_pme.json");
    let (rep, _) = ctx.run(Subcommand::Energy, "energy_pme", &cfg, None)?;
    let mut control = cfg.clone();
    control["check"]["c2_scale"] = json!(10.0);
    let (ctl, _) = ctx.run(Subcommand::Energy, "energy_pme_control", &control, None)?;
    Ok((
        rep.outcome.pass && !ctl.outcome.pass,
        format!("declared: {}; 10x control: {}", rep.outcome.summary, ctl.outcome.summary),
    ))
}

fn c10_ergodicity(ctx: &Ctx) -> Verdict {
    simple(ctx, Subcommand::Ergodicity, "ergodicity_linear.json")
}

fn c11_reproducibility(ctx: &Ctx) -> Verdict {
    let runs = ctx.runs.borrow().clone();
    if runs.is_empty() {
        return Err("no earlier runs to repeat".into());
    }
    let mut compared = 0;
    for (i, (sub, cfg, out)) in runs.iter().enumerate() {
        let again = ctx.work.path().join(format!("rerun_{i}"));
        let manifest: Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).map_err(err)?).map_err(err)?;
        let seed = manifest["master_seed"].as_u64().ok_or("manifest without seed")?;
        let status = Command::new(env!("CARGO_BIN_EXE_spme"))
            .arg(sub.name())
            .arg("--config")
            .arg(cfg)
            .arg("--out")
            .arg(&again)
            .args(["--seed", &seed.to_string(), "--threads", "1"])
            .output()
            .map_err(err)?;
        if !matches!(status.status.code(), Some(0 | 1)) {
            return Err(format!("rerun of {} failed: {}", sub.name(), String::from_utf8_lossy(&status.stderr)));
        }
        for entry in manifest["outputs"].as_array().ok_or("manifest without outputs")? {
            let file = entry["file"].as_str().ok_or("bad manifest entry")?;
            let (a, b) = (std::fs::read(out.join(file)).map_err(err)?, std::fs::read(again.join(file)).map_err(err)?);
            if a != b {
                return Ok((false, format!("{} differs on rerun of {}", file, cfg.display())));
            }
            compared += 1;
        }
    }
    Ok((true, format!("{compared} CSV files from {} runs byte-identical (single-threaded rerun)", runs.len())))
}

struct Criterion {
    id: &'static str,
    name: &'static str,
    budget: Duration,
    check: fn(&Ctx) -> Verdict,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: "1", name: "orlicz suite", budget: Duration::from_secs(10), check: c1_orlicz },
        Criterion { id: "2", name: "triple pairing", budget: Duration::from_secs(30), check: c2_pairing },
        Criterion { id: "3", name: "condition certificates", budget: Duration::from_secs(30), check: c3_certificates },
        Criterion { id: "4", name: "deterministic Itô skeleton", budget: Duration::from_secs(10), check: c4_skeleton },
        Criterion { id: "5", name: "stochastic Itô refinement", budget: Duration::from_secs(120), check: c5_refinement },
        Criterion { id: "6", name: "contraction", budget: Duration::from_secs(120), check: c6_contraction },
        Criterion { id: "7", name: "OU oracle", budget: Duration::from_secs(120), check: c7_ou },
        Criterion { id: "8", name: "decay dichotomy", budget: Duration::from_secs(60), check: c8_dichotomy },
        Criterion { id: "9", name: "energy estimate", budget: Duration::from_secs(120), check: c9_energy },
        Criterion { id: "10", name: "ergodicity", budget: Duration::from_secs(120), check: c10_ergodicity },
        Criterion { id: "11", name: "reproducibility", budget: Duration::MAX, check: c11_reproducibility },
    ];
    let ctx = Ctx { work: tempfile::tempdir().expect("temp dir"), runs: Default::default() };
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let verdict = (c.check)(&ctx);
        let took = start.elapsed();
        let (pass, detail) = match verdict {
            Ok((pass, detail)) if took <= c.budget => (pass, detail),
            Ok((_, detail)) => (false, format!("over the {:?} budget; {detail}", c.budget)),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "{} criterion {} ({}) [{:.1} s]: {detail}",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            took.as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
