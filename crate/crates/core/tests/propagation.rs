use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resolvent_core::born::LambdaQuadrature;
use resolvent_core::propagator::{
    decay_fit, decay_sweep, ibp_check, remainder_decay_scan, EvolutionOracle, EvolveSettings, SpectralCache,
};
use resolvent_core::{build_radial_grid, Field, Grid, Potential, Shape};

fn radial(r: f64, n: usize) -> Arc<Grid> {
    Arc::new(build_radial_grid(r, n).unwrap())
}

fn gaussian(g: &Arc<Grid>, s: f64) -> Field {
    Field::from_radial_fn(g, |r| Complex64::new((-(r * r) / (s * s)).exp(), 0.0))
}

fn well(g: &Arc<Grid>, depth: f64) -> Potential {
    Potential::from_shape(g, Shape::Well { depth, radius: 1.0 })
}

fn doubling_times() -> Vec<f64> {
    (0..7).map(|k| 2f64.powi(k)).collect()
}

#[test]
fn narrow_bump_reaches_point_mass_amplitude() {
    // For e^{−r²/s²} the exact ratio to (4π)^{−3/2}‖f‖₁ t^{−3/2} is (1 + (s²/4t)²)^{−3/4}.
    let s = 0.25;
    let g = radial(3.0, 200);
    let f = gaussian(&g, s);
    let cache = SpectralCache::new(&g, &Potential::zero(&g), &f, EvolveSettings::new(24.0, 64, 12)).unwrap();
    for t in [1.0, 2.0, 4.0, 8.0, 16.0] {
        let ratio = cache.at(t).unwrap().sup() * t.powf(1.5) / f.l1() * (4.0 * PI).powf(1.5);
        let exact = (1.0 + (s * s / (4.0 * t)).powi(2)).powf(-0.75);
        assert!((ratio - exact).abs() < 1e-3, "t={t}: {ratio} vs {exact}");
    }
}

#[test]
fn free_decay_exponent_is_three_halves() {
    let g = radial(4.0, 300);
    let f = gaussian(&g, 0.5);
    let cache = SpectralCache::new(&g, &Potential::zero(&g), &f, EvolveSettings::new(24.0, 96, 12)).unwrap();
    let curve = decay_sweep(&cache, &doubling_times()).unwrap();
    assert!((curve.fitted_alpha - 1.5).abs() < 0.05, "{}", curve.fitted_alpha);
}

#[test]
fn non_resonant_well_decays_and_matches_oracle() {
    let g = radial(8.0, 400);
    let v = well(&g, 1.0);
    let f = gaussian(&g, 1.0);
    let cache = SpectralCache::new(&g, &v, &f, EvolveSettings::new(12.0, 48, 12)).unwrap();
    let curve = decay_sweep(&cache, &doubling_times()).unwrap();
    assert!((1.35..=1.65).contains(&curve.fitted_alpha), "{}", curve.fitted_alpha);

    let go = radial(50.0, 1250);
    let oracle = EvolutionOracle::new(&go, &well(&go, 1.0)).unwrap();
    let fo = gaussian(&go, 1.0);
    let near = |u: &Field| {
        u.values().iter().zip(u.grid().radii()).filter(|(_, r)| **r <= 8.0).map(|(z, _)| z.norm()).fold(0.0, f64::max)
    };
    for t in [1.0, 2.0, 3.0, 4.0] {
        assert!(t <= oracle.validity_window(6.0));
        let a = near(&cache.at(t).unwrap());
        let b = near(&oracle.evolve(t, &fo, true).unwrap());
        assert!((a - b).abs() <= 0.05 * b, "t={t}: {a} vs {b}");
    }
}

#[test]
fn threshold_well_decays_slowly() {
    // Expected failure of the t^{−3/2} rate at a zero-energy resonance.
    let g = radial(8.0, 400);
    let v = well(&g, PI * PI / 4.0);
    let f = gaussian(&g, 1.0);
    let cache = SpectralCache::new(&g, &v, &f, EvolveSettings::new(12.0, 48, 12)).unwrap();
    let curve = decay_sweep(&cache, &doubling_times()).unwrap();
    assert!(curve.fitted_alpha < 1.2, "{}", curve.fitted_alpha);
}

#[test]
fn decay_fit_tolerates_five_percent_noise() {
    let times = doubling_times();
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sups: Vec<f64> = times.iter().map(|t| 2.0 * t.powf(-1.5) * (1.0 + 0.05 * rng.random_range(-1.0..1.0))).collect();
        let c = decay_fit(&times, &sups, 1.0).unwrap();
        assert!((c.fitted_alpha - 1.5).abs() < 0.1, "seed {seed}: {}", c.fitted_alpha);
    }
}

#[test]
fn remainder_norm_decays_in_lambda() {
    let g = radial(2.0, 80);
    let v = well(&g, 1.0).with_epsilon(0.5).unwrap();
    let m = (4.0 / v.epsilon() + 4.0).ceil() as usize;
    let lambdas: Vec<f64> = (0..12).map(|k| 5.0 * 10f64.powf(k as f64 / 11.0)).collect();
    let deep = remainder_decay_scan(&g, &v, m, &lambdas).unwrap();
    assert!(deep.tail_decreasing, "{:?}", deep.values);
    let zero = remainder_decay_scan(&g, &Potential::zero(&g), m, &lambdas).unwrap();
    assert!(zero.values.iter().all(|&x| x == 0.0));

    let shallow = remainder_decay_scan(&g, &v, 0, &lambdas).unwrap();
    let four = remainder_decay_scan(&g, &v, 4, &lambdas).unwrap();
    let drop = |s: &[f64]| s[0] / s[s.len() - 1];
    assert!(drop(&four.values) > drop(&shallow.values));
    assert!(four.values.iter().zip(&shallow.values).all(|(a, b)| a < b));
}

#[test]
fn integration_by_parts_converges_in_step() {
    let g = radial(3.0, 120);
    let v = well(&g, 1.0);
    let f = gaussian(&g, 1.0);
    let q = LambdaQuadrature::new(12.0, 32, 10);
    let coarse = ibp_check(&g, &v, 4, 4.0, &f, &f, &q, None).unwrap();
    assert!(coarse.relerr <= 1e-3, "{}", coarse.relerr);
    let fine = ibp_check(&g, &v, 4, 4.0, &f, &f, &q, Some(coarse.fd_step / 2.0)).unwrap();
    assert!(coarse.relerr / fine.relerr >= 2.0, "{} -> {}", coarse.relerr, fine.relerr);
    assert!(coarse.boundary < 1e-3 * coarse.lhs.norm());

    let zero = ibp_check(&g, &Potential::zero(&g), 4, 4.0, &f, &f, &q, None).unwrap();
    assert_eq!((zero.lhs, zero.rhs), (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)));
}
