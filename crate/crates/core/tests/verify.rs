use proptest::prelude::*;
use spme_core::drift::{declared_constants, DriftSpec, Mode, PhiSpec, PsiSpec};
use spme_core::galerkin::{Ensemble, Galerkin, Observable, Scheme, StepperConfig};
use spme_core::noise::{Multiplier, NoiseSpec};
use spme_core::triple::{Field, SpectralDomain};
use spme_core::verify::{
    contraction_test, energy_defect, energy_estimate, ergodicity_test, extinction_time, fit_log_slope, ito_ledger, ito_residual,
    ou_oracle, ou_oracle_discrete, trajectory_extinction_time,
};
use spme_core::Error;

fn bump(dom: &SpectralDomain, amp: f64) -> Field {
    dom.sample(|x| amp * (x * (1.0 - x) * 4.0).powi(2))
}

fn paired_diffs(ens: &Ensemble<'_>, n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| ens.observe_path(i, &[Observable::DiffHNormSq]).unwrap()).collect()
}

#[test]
fn deterministic_explicit_ledger_closes_on_the_remainder() {
    let dom = SpectralDomain::new(32, 1.0).unwrap();
    let drift = DriftSpec::new(PsiSpec::power(1.0, 2.0), PhiSpec::linear(0.5), 0.0, 0.0, Mode::A1).unwrap();
    let noise = NoiseSpec::zero();
    let sys = Galerkin::new(&dom, &drift, &noise);
    let mut cfg = StepperConfig::new(2e-4, 0.05, 10, Scheme::ExplicitEm);
    cfg.record_ito = true;
    cfg.save_every = 25;
    let traj = sys.simulate(&cfg, &bump(&dom, 1.0), 0, 0).unwrap();
    let led = ito_ledger(&dom, &traj).unwrap();
    assert_eq!(led.residual.len(), 251);
    let scale = led.norm_sq[0];
    for (r, q) in led.residual.iter().zip(&led.remainder) {
        assert!((r - q).abs() <= 1e-14 * scale, "{r} vs {q}");
    }
    assert!(led.remainder.last().unwrap() > &0.0);
}

#[test]
fn zero_system_has_zero_residuals() {
    let dom = SpectralDomain::new(16, 1.0).unwrap();
    let drift = DriftSpec::new(PsiSpec::zero(), PhiSpec::zero(), 0.0, 0.0, Mode::A1).unwrap();
    let noise = NoiseSpec::zero();
    let sys = Galerkin::new(&dom, &drift, &noise);
    let mut cfg = StepperConfig::new(0.01, 0.5, 16, Scheme::ExplicitEm);
    cfg.record_ito = true;
    let (max, res) = ito_residual(&dom, &sys.simulate(&cfg, &bump(&dom, 1.0), 0, 0).unwrap()).unwrap();
    assert_eq!(max, 0.0);
    assert!(res.iter().all(|&r| r == 0.0));
}

#[test]
fn ledger_needs_records() {
    let dom = SpectralDomain::new(16, 1.0).unwrap();
    let (drift, noise) = (DriftSpec::linear(1.0).unwrap(), NoiseSpec::zero());
    let sys = Galerkin::new(&dom, &drift, &noise);
    let cfg = StepperConfig::new(0.01, 0.1, 4, Scheme::ExplicitEm);
    let traj = sys.simulate(&cfg, &bump(&dom, 1.0), 0, 0).unwrap();
    assert!(matches!(ito_ledger(&dom, &traj), Err(Error::Precondition(_))));
}

#[test]
fn stochastic_residual_shrinks_under_refinement() {
    let dom = SpectralDomain::new(32, 1.0).unwrap();
    let drift = DriftSpec::power(1.0, 2.0).unwrap();
    let noise = NoiseSpec::power_decay(0.1, 2.0, 4, Multiplier::Constant(1.0)).unwrap();
    let sys = Galerkin::new(&dom, &drift, &noise);
    let levels = [0u32, 1, 2];
    let mean_max: Vec<f64> = levels
        .iter()
        .map(|&l| {
            let mut cfg = StepperConfig::new(2e-3 / (1u32 << l) as f64, 1.0, 4, Scheme::ExplicitEm);
            cfg.record_ito = true;
            cfg.refine_level = l;
            (0..10).map(|p| ito_residual(&dom, &sys.simulate(&cfg, &bump(&dom, 2.0), 21, p).unwrap()).unwrap().0).sum::<f64>()
                / 10.0
        })
        .collect();
    let order = (mean_max[0] / mean_max[2]).log2() / 2.0;
    assert!(order >= 0.8, "order {order} from {mean_max:?}");
}

#[test]
fn linear_difference_decays_at_the_scheme_rate() {
    let dom = SpectralDomain::new(16, 1.0).unwrap();
    let drift = DriftSpec::linear(1.0).unwrap();
    let noise = NoiseSpec::additive(vec![1.0]).unwrap();
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
    let times = ens.saved_times().unwrap();
    let lam = dom.eigenvalue(1);
    let rep = contraction_test(&times, &paired_diffs(&ens, 100), -2.0 * lam).unwrap();
    let scheme_rate = 2.0 * (1.0 - lam * dt).ln() / dt;
    assert!((rep.fit.slope - scheme_rate).abs() <= 1e-9 * lam);
    assert!((rep.fit.slope + 2.0 * lam).abs() <= 2.0 * lam * lam * dt);
    assert!(rep.pass);
}

#[test]
fn monotone_pme_contracts() {
    let dom = SpectralDomain::new(16, 1.0).unwrap();
    let drift = DriftSpec::power(1.0, 2.0).unwrap();
    let noise = NoiseSpec::additive(vec![0.5; 16]).unwrap();
    let mut config = StepperConfig::new(1e-3, 0.5, 16, Scheme::SemiImplicitEm);
    config.save_every = 10;
    let ens = Ensemble {
        system: Galerkin::new(&dom, &drift, &noise),
        config,
        x0: bump(&dom, 2.0),
        y0: Some(bump(&dom, -1.0)),
        master_seed: 8,
    };
    let rep = contraction_test(&ens.saved_times().unwrap(), &paired_diffs(&ens, 100), 0.0).unwrap();
    assert!(rep.fit.slope <= 0.0);
    assert!(rep.pass);
}

#[test]
fn pure_linear_growth_has_slope_two_h() {
    let dom = SpectralDomain::new(16, 1.0).unwrap();
    let h = 0.7;
    let drift = DriftSpec::new(PsiSpec::zero(), PhiSpec::linear(h), 0.0, 0.0, Mode::A1).unwrap();
    let noise = NoiseSpec::additive(vec![1.0; 4]).unwrap();
    let dt = 1e-3;
    let mut config = StepperConfig::new(dt, 1.0, 4, Scheme::ExplicitEm);
    config.save_every = 50;
    let ens = Ensemble {
        system: Galerkin::new(&dom, &drift, &noise),
        config,
        x0: bump(&dom, 1.0),
        y0: Some(Field::zeros(16)),
        master_seed: 1,
    };
    let rep = contraction_test(&ens.saved_times().unwrap(), &paired_diffs(&ens, 100), 2.0 * h).unwrap();
    assert!((rep.fit.slope - 2.0 * (1.0 + h * dt).ln() / dt).abs() < 1e-9);
    assert!(rep.pass);
}

#[test]
fn contraction_preconditions() {
    let times: Vec<f64> = (0..10).map(|i| i as f64).collect();
    let few = vec![vec![1.0; 10]; 99];
    assert!(contraction_test(&times, &few, 0.0).is_err());
    let identical = vec![vec![0.0; 10]; 100];
    assert!(matches!(contraction_test(&times, &identical, 0.0), Err(Error::Precondition(_))));
}

#[test]
fn slope_fit_recovers_an_exponential() {
    let times: Vec<f64> = (0..=50).map(|i| i as f64 * 0.02).collect();
    let paths: Vec<Vec<f64>> = (0..5).map(|_| times.iter().map(|t| 3.0 * (-1.7 * t).exp()).collect()).collect();
    let fit = fit_log_slope(&times, &paths).unwrap();
    assert!((fit.slope + 1.7).abs() < 1e-12);
    assert!(fit.se < 1e-10);
    // the first 10% of the horizon is dropped
    assert_eq!(fit.n_points, 46);
}

#[test]
fn zero_system_energy_defect_vanishes() {
    let times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
    let d = energy_defect(&times, &[2.0; 11], &[0.0; 11], 0.0, 0.0, 0.0);
    assert!(d.iter().all(|&x| x == 0.0));
    let rep = energy_estimate(&times, &[d.clone(), d], &[vec![2.0; 11], vec![2.0; 11]]).unwrap();
    assert!(rep.passed());
    assert_eq!(rep.sup_mean_norm_sq, 2.0);
}

fn pme_energy_series(c2_scale: f64) -> (bool, f64) {
    let dom = SpectralDomain::new(16, 1.0).unwrap();
    let drift = DriftSpec::power(1.0, 2.0).unwrap();
    let noise = NoiseSpec::power_decay(1.0, 1.0, 16, Multiplier::Constant(1.0)).unwrap();
    let k = declared_constants(&dom, &drift, &noise, None).unwrap();
    let config = StepperConfig::new(1e-3, 0.3, 16, Scheme::SemiImplicitEm);
    let ens = Ensemble { system: Galerkin::new(&dom, &drift, &noise), config, x0: bump(&dom, 1.0), y0: None, master_seed: 12 };
    let times = ens.saved_times().unwrap();
    let (mut defects, mut norms) = (Vec::new(), Vec::new());
    for p in 0..200 {
        let obs = ens.observe_path(p, &[Observable::HNormSq, Observable::R]).unwrap();
        let n: Vec<f64> = obs.iter().step_by(2).copied().collect();
        let r: Vec<f64> = obs.iter().skip(1).step_by(2).copied().collect();
        defects.push(energy_defect(&times, &n, &r, k.c1, c2_scale * k.c2, k.f));
        norms.push(n);
    }
    let rep = energy_estimate(&times, &defects, &norms).unwrap();
    (rep.passed(), rep.sup_mean_norm_sq)
}

#[test]
fn pme_energy_bound_holds_with_declared_constants() {
    let (ok, sup) = pme_energy_series(1.0);
    assert!(ok);
    assert!(sup.is_finite() && sup > 0.0);
}

#[test]
fn inflated_coercivity_constant_is_caught() {
    assert!(!pme_energy_series(10.0).0);
}

#[test]
fn zero_state_is_extinct_immediately() {
    let dom = SpectralDomain::new(16, 1.0).unwrap();
    let (drift, noise) = (DriftSpec::power(1.0, 0.5).unwrap(), NoiseSpec::zero());
    let sys = Galerkin::new(&dom, &drift, &noise);
    let cfg = StepperConfig::new(0.01, 0.1, 16, Scheme::SemiImplicitEm);
    let traj = sys.simulate(&cfg, &Field::zeros(16), 0, 0).unwrap();
    assert_eq!(trajectory_extinction_time(&dom, &traj, 1e-6).unwrap(), Some(0.0));
    assert!(extinction_time(&[0.0], &[0.0], 0.0).is_err());
}

#[test]
fn fast_diffusion_dies_out_and_porous_medium_does_not() {
    let dom = SpectralDomain::new(64, 1.0).unwrap();
    let noise = NoiseSpec::zero();
    let mut cfg = StepperConfig::new(1e-3, 5.0, 64, Scheme::SemiImplicitEm);
    cfg.save_every = 10;
    let x0 = bump(&dom, 1.0);
    let fast = DriftSpec::power(1.0, 0.5).unwrap();
    let traj = Galerkin::new(&dom, &fast, &noise).simulate(&cfg, &x0, 0, 0).unwrap();
    let t = trajectory_extinction_time(&dom, &traj, 1e-6).unwrap();
    assert!(matches!(t, Some(t) if t > 0.0 && t < 5.0), "{t:?}");

    let slow = DriftSpec::power(1.0, 2.0).unwrap();
    let traj = Galerkin::new(&dom, &slow, &noise).simulate(&cfg, &x0, 0, 0).unwrap();
    assert_eq!(trajectory_extinction_time(&dom, &traj, 1e-6).unwrap(), None);
    let e: Vec<f64> = traj.states.iter().map(|s| dom.h_norm_sq_coeffs(s)).collect();
    assert!(e.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn ou_oracle_limits() {
    let dom = SpectralDomain::new(16, 1.0).unwrap();
    let drift = DriftSpec::linear(1.0).unwrap();
    let noise = NoiseSpec::additive(vec![1.0, 0.5]).unwrap();
    let x0 = [2.0, -1.0, 3.0];
    let at0 = ou_oracle(&dom, &drift, &noise, &x0, 0.0).unwrap();
    assert_eq!(at0, vec![(2.0, 0.0), (-1.0, 0.0), (3.0, 0.0)]);
    let late = ou_oracle(&dom, &drift, &noise, &x0, 1e3).unwrap();
    for (k, (m, v)) in late.iter().enumerate() {
        let s = [1.0, 0.5, 0.0][k];
        assert!(m.abs() < 1e-300);
        assert!((v - s * s / (2.0 * dom.eigenvalue(k + 1))).abs() < 1e-15);
    }
}

#[test]
fn ou_oracle_refuses_nonlinear_settings() {
    let dom = SpectralDomain::new(16, 1.0).unwrap();
    let noise = NoiseSpec::additive(vec![1.0]).unwrap();
    assert!(ou_oracle(&dom, &DriftSpec::power(1.0, 2.0).unwrap(), &noise, &[1.0], 1.0).is_err());
    let mult = NoiseSpec::new(vec![1.0], Multiplier::Decay { rho_min: 0.0, rho_max: 1.0, kappa: 1.0 }).unwrap();
    assert!(ou_oracle(&dom, &DriftSpec::linear(1.0).unwrap(), &mult, &[1.0], 1.0).is_err());
    let shifted = DriftSpec::new(PsiSpec::linear(1.0), PhiSpec::linear(0.1), 0.0, 0.0, Mode::A1).unwrap();
    assert!(ou_oracle(&dom, &shifted, &noise, &[1.0], 1.0).is_err());
}

#[test]
fn ou_oracle_is_the_limit_of_the_exact_recursion() {
    let dom = SpectralDomain::new(16, 1.0).unwrap();
    let drift = DriftSpec::linear(0.5).unwrap();
    let noise = NoiseSpec::additive(vec![1.0, 2.0]).unwrap();
    let x0 = [1.0, 1.0];
    let t = 0.05;
    let exact = ou_oracle(&dom, &drift, &noise, &x0, t).unwrap();
    let errs: Vec<f64> = [100usize, 1000, 10_000]
        .iter()
        .map(|&n| {
            let d = ou_oracle_discrete(&dom, &drift, &noise, &x0, t / n as f64, n).unwrap();
            d.iter().zip(&exact).map(|(a, b)| (a.0 - b.0).abs() + (a.1 - b.1).abs()).sum::<f64>()
        })
        .collect();
    // first order in dt
    for w in errs.windows(2) {
        assert!((w[0] / w[1] - 10.0).abs() < 1.0, "{errs:?}");
    }
}

#[test]
fn ergodicity_refuses_nonnegative_rate() {
    let r = ergodicity_test(&[0.0], &[0.0], &[0.0], &[0.0], &[0.0], 0.0, 1.0, 1.0, &[0.0, 0.0], &[0.0, 0.0]);
    assert!(matches!(r, Err(Error::Precondition(_))));
}

#[test]
fn constant_observable_has_no_gap() {
    let times = [0.0, 1.0, 2.0];
    let rep =
        ergodicity_test(&times, &[3.0; 3], &[0.0; 3], &[3.0; 3], &[0.0; 3], -1.0, 0.0, 5.0, &[3.0, 3.0], &[3.0, 3.0]).unwrap();
    assert!(rep.passed());
    assert_eq!(rep.time_average_diff, 0.0);
}

#[test]
fn linear_mode_observable_obeys_the_bound() {
    let dom = SpectralDomain::new(16, 1.0).unwrap();
    let drift = DriftSpec::linear(1.0).unwrap();
    let noise = NoiseSpec::additive(vec![1.0, 1.0]).unwrap();
    let mut config = StepperConfig::new(1e-3, 0.5, 2, Scheme::ExplicitEm);
    config.save_every = 10;
    let (x, y) = (Field::from_galerkin(&dom, &[3.0, 1.0]), Field::from_galerkin(&dom, &[-2.0, 0.5]));
    let obs = [Observable::HInnerWithMode(1)];
    let run = |x0: &Field, seed: u64| {
        let ens = Ensemble {
            system: Galerkin::new(&dom, &drift, &noise),
            config: config.clone(),
            x0: x0.clone(),
            y0: None,
            master_seed: seed,
        };
        spme_core::galerkin::monte_carlo(&ens, 500, &obs).unwrap()
    };
    let (a, b) = (run(&x, 1), run(&y, 2));
    let lip = obs[0].lipschitz(&dom).unwrap();
    let dist = dom.h_norm(&x.axpy(&dom, -1.0, &y)).unwrap();
    let last = |t: &spme_core::stats::StatTable| -> Vec<f64> { vec![*t.mean.last().unwrap(); 2] };
    let rep = ergodicity_test(
        &a.times,
        &a.mean_series(0),
        &a.se_series(0),
        &b.mean_series(0),
        &b.se_series(0),
        -2.0 * dom.eigenvalue(1),
        lip,
        dist,
        &last(&a),
        &last(&b),
    )
    .unwrap();
    assert!(rep.bound_holds, "excess {}", rep.max_excess);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn linear_skeleton_ledger_is_exact(x1 in -3.0f64..3.0, x2 in -3.0f64..3.0, delta in 0.1f64..2.0) {
        let dom = SpectralDomain::new(16, 1.0).unwrap();
        let drift = DriftSpec::linear(delta).unwrap();
        let noise = NoiseSpec::zero();
        let sys = Galerkin::new(&dom, &drift, &noise);
        let mut cfg = StepperConfig::new(1e-4, 0.01, 2, Scheme::ExplicitEm);
        cfg.record_ito = true;
        let traj = sys.simulate(&cfg, &Field::from_galerkin(&dom, &[x1, x2]), 0, 0).unwrap();
        let led = ito_ledger(&dom, &traj).unwrap();
        let scale = led.norm_sq[0] + 1e-300;
        for (r, q) in led.residual.iter().zip(&led.remainder) {
            prop_assert!((r - q).abs() <= 1e-13 * scale);
        }
    }

    #[test]
    fn oracle_variance_is_monotone_in_time(t1 in 0.0f64..1.0, dt in 0.0f64..1.0, sigma in 0.0f64..3.0) {
        let dom = SpectralDomain::new(8, 1.0).unwrap();
        let drift = DriftSpec::linear(1.0).unwrap();
        let noise = NoiseSpec::additive(vec![sigma; 3]).unwrap();
        let a = ou_oracle(&dom, &drift, &noise, &[1.0, 1.0, 1.0], t1).unwrap();
        let b = ou_oracle(&dom, &drift, &noise, &[1.0, 1.0, 1.0], t1 + dt).unwrap();
        for (p, q) in a.iter().zip(&b) {
            prop_assert!(q.1 >= p.1 - 1e-15);
            prop_assert!(q.0.abs() <= p.0.abs());
        }
    }
}
