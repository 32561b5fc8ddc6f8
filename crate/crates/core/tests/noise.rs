use proptest::prelude::*;
use rand::Rng;
use spme_core::noise::{sample_increment, BrownianSource, Multiplier, NoiseSpec};
use spme_core::rng;
use spme_core::triple::{Field, SpectralDomain};
use spme_core::Error;

fn hs_diff(dom: &SpectralDomain, spec: &NoiseSpec, u: &Field, v: &Field) -> f64 {
    let dim = spec.dim(dom.n_grid());
    let zu = spec.coefficients(dom.h_norm(u).unwrap(), dim);
    let zv = spec.coefficients(dom.h_norm(v).unwrap(), dim);
    zu.iter().zip(&zv).zip(dom.eigenvalues()).map(|((a, b), l)| (a - b) * (a - b) / l).sum::<f64>().sqrt()
}

fn random_field(dom: &SpectralDomain, seed: u64) -> Field {
    let mut r = rng::stream(seed, 0, 0);
    Field::from_values((0..dom.n_grid()).map(|_| r.random_range(-2.0..2.0)).collect())
}

#[test]
fn zero_step_draws_nothing() {
    let mut r = rng::stream(3, 0, 0);
    assert_eq!(sample_increment(5, 0.0, &mut r), vec![0.0; 5]);
}

#[test]
fn increments_have_the_right_mean_and_variance() {
    let dt = 0.01;
    let n = 100_000;
    let mut r = rng::stream(2024, 0, 0);
    let xs: Vec<f64> = (0..n).map(|_| sample_increment(1, dt, &mut r)[0]).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    assert!(mean.abs() <= 4.0 * (dt / n as f64).sqrt(), "mean {mean}");
    assert!((var - dt).abs() <= 0.05 * dt, "var {var}");
}

#[test]
fn brownian_source_is_deterministic() {
    let mut a = BrownianSource::new(5, 7, 4, 1e-3, 3);
    let mut b = BrownianSource::new(5, 7, 4, 1e-3, 3);
    for step in [0u64, 1, 9, 8, 100] {
        assert_eq!(a.increment(step), b.increment(step));
    }
    let mut c = BrownianSource::new(5, 8, 4, 1e-3, 3);
    assert_ne!(a.increment(0), c.increment(0));
}

#[test]
fn zero_amplitudes_give_zero_field() {
    let dom = SpectralDomain::new(16, 1.0).unwrap();
    let spec = NoiseSpec::additive(vec![0.0; 16]).unwrap();
    let x = dom.sample(|x| x.sin());
    let b = spec.apply_b(&dom, &x, &[0.3; 16]).unwrap();
    assert!(b.values(&dom).iter().all(|&v| v == 0.0));
    assert_eq!(spec.hs_norm_sq(&dom, &x).unwrap(), 0.0);
}

#[test]
fn unit_increment_on_first_mode() {
    let dom = SpectralDomain::new(16, 1.0).unwrap();
    let spec = NoiseSpec::additive(vec![0.7, 0.2, 0.1]).unwrap();
    let mut dw = vec![0.0; 3];
    dw[0] = 1.0;
    let b = spec.apply_b(&dom, &Field::zeros(16), &dw).unwrap();
    for (got, s) in b.values(&dom).iter().zip(dom.basis_vector(1)) {
        assert!((got - 0.7 * s).abs() < 1e-14);
    }
}

#[test]
fn increment_length_is_checked() {
    let dom = SpectralDomain::new(8, 1.0).unwrap();
    let spec = NoiseSpec::additive(vec![1.0; 3]).unwrap();
    assert_eq!(spec.apply_b(&dom, &Field::zeros(8), &[1.0; 4]).err(), Some(Error::DimensionMismatch { expected: 3, got: 4 }));
}

#[test]
fn single_mode_hs_norm_is_inverse_eigenvalue() {
    let dom = SpectralDomain::new(32, 0.75).unwrap();
    let spec = NoiseSpec::additive(vec![1.0]).unwrap();
    let x = dom.sample(|x| x * x);
    assert!((spec.hs_norm_sq(&dom, &x).unwrap() - 1.0 / dom.eigenvalue(1)).abs() < 1e-15);
}

#[test]
fn hs_norm_matches_sum_over_basis_images() {
    let dom = SpectralDomain::new(24, 0.6).unwrap();
    let sigma: Vec<f64> = (1..=10).map(|k| 1.0 / (k as f64 + 0.5)).collect();
    let mult = Multiplier::Decay { rho_min: 0.2, rho_max: 1.5, kappa: 0.8 };
    let spec = NoiseSpec::new(sigma.clone(), mult).unwrap();
    let x = random_field(&dom, 17);
    let mut oracle = 0.0;
    for k in 0..sigma.len() {
        let mut g = vec![0.0; sigma.len()];
        g[k] = 1.0;
        let image = spec.apply_b(&dom, &x, &g).unwrap();
        let values = image.values(&dom).to_vec();
        let h = dom.h_norm(&Field::from_values(values)).unwrap();
        oracle += h * h;
    }
    let got = spec.hs_norm_sq(&dom, &x).unwrap();
    assert!((got - oracle).abs() < 1e-12 * oracle, "{got} vs {oracle}");
}

#[test]
fn additive_noise_does_not_depend_on_state() {
    let dom = SpectralDomain::new(16, 1.0).unwrap();
    let spec = NoiseSpec::power_decay(1.0, 1.0, 16, Multiplier::Constant(0.4)).unwrap();
    assert!(spec.is_additive());
    assert_eq!(spec.lipschitz_sq(&dom), 0.0);
    for seed in 0..20 {
        assert_eq!(hs_diff(&dom, &spec, &random_field(&dom, seed), &random_field(&dom, seed + 100)), 0.0);
    }
}

#[test]
fn decaying_multiplier_is_lipschitz() {
    let dom = SpectralDomain::new(32, 1.0).unwrap();
    let mult = Multiplier::Decay { rho_min: 0.0, rho_max: 1.0, kappa: 1.0 };
    assert_eq!(mult.lipschitz(), 1.0);
    let spec = NoiseSpec::power_decay(2.0, 0.5, 32, mult).unwrap();
    let bound = spec.lipschitz_sq(&dom).sqrt();
    for seed in 0..200 {
        let u = random_field(&dom, seed).scaled(&dom, 0.01 * seed as f64);
        let v = random_field(&dom, seed + 1000);
        let d = dom.h_norm(&u.axpy(&dom, -1.0, &v)).unwrap();
        assert!(hs_diff(&dom, &spec, &u, &v) <= bound * d * (1.0 + 1e-12));
    }
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(NoiseSpec::additive(vec![1.0, -0.1]).is_err());
    assert!(NoiseSpec::additive(vec![f64::NAN]).is_err());
    assert!(NoiseSpec::new(vec![1.0], Multiplier::Decay { rho_min: 2.0, rho_max: 1.0, kappa: 1.0 }).is_err());
}

#[test]
fn ito_isometry_additive() {
    let dom = SpectralDomain::new(32, 1.0).unwrap();
    let spec = NoiseSpec::power_decay(1.0, 0.5, 6, Multiplier::Constant(1.0)).unwrap();
    let (dt, steps, paths) = (0.01, 50u64, 10_000u64);
    let t = dt * steps as f64;
    let x = Field::zeros(32);
    let mut samples = Vec::with_capacity(paths as usize);
    for p in 0..paths {
        let mut bm = BrownianSource::new(99, p, 6, dt, 0);
        let mut acc = vec![0.0; 32];
        for k in 0..steps {
            let db = spec.apply_b(&dom, &x, bm.increment(k)).unwrap();
            for (a, c) in acc.iter_mut().zip(db.coeffs(&dom)) {
                *a += c;
            }
        }
        samples.push(dom.h_norm_sq_coeffs(&acc));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
    let expect = t * spec.hs_norm_sq(&dom, &x).unwrap();
    assert!((mean - expect).abs() <= 3.0 * (var / n).sqrt(), "{mean} vs {expect}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn refinement_levels_share_one_path(seed in any::<u64>(), level in 1u32..5, block in 0u64..20) {
        let dt = 0.01;
        let mut coarse = BrownianSource::new(seed, 1, 2, dt, 0);
        let mut fine = BrownianSource::new(seed, 1, 2, dt / (1u64 << level) as f64, level);
        let c = coarse.increment(block).to_vec();
        let mut s = [0.0; 2];
        let m = 1u64 << level;
        for j in 0..m {
            for (a, x) in s.iter_mut().zip(fine.increment(block * m + j)) {
                *a += x;
            }
        }
        for (a, b) in c.iter().zip(s) {
            prop_assert!((a - b).abs() <= 1e-14 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn hs_norm_scales_quadratically(scale in 0.0f64..10.0, x0 in 0.0f64..5.0) {
        let dom = SpectralDomain::new(16, 1.0).unwrap();
        let mult = Multiplier::Decay { rho_min: 0.5, rho_max: 1.0, kappa: 2.0 };
        let a = NoiseSpec::power_decay(1.0, 1.0, 8, mult).unwrap();
        let b = NoiseSpec::power_decay(scale, 1.0, 8, mult).unwrap();
        let ha = a.hs_norm_sq_at(&dom, x0);
        prop_assert!(ha >= 0.0);
        prop_assert!((b.hs_norm_sq_at(&dom, x0) - scale * scale * ha).abs() <= 1e-12 * (1.0 + scale * scale * ha));
    }

    #[test]
    fn multiplier_stays_in_its_range(x in 0.0f64..1e6, lo in 0.0f64..1.0, span in 0.0f64..2.0, kappa in 0.0f64..10.0) {
        let m = Multiplier::Decay { rho_min: lo, rho_max: lo + span, kappa };
        let v = m.eval(x);
        prop_assert!(v >= lo - 1e-15 && v <= lo + span + 1e-15);
    }
}
