use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use resolvent_core::born::{born_dispersive_term, cutoff_ladder, iterated_kato_integral, statphase_sup, LambdaQuadrature};
use resolvent_core::quadrature::power_law_fit;
use resolvent_core::{build_radial_grid, Field, Potential, Shape};

#[test]
fn statphase_single_constant_and_exponent() {
    let ladder = cutoff_ladder(4);
    let times = [1.0, 4.0, 16.0, 64.0];
    let (mut ts, mut ys, mut ratios) = (Vec::new(), Vec::new(), Vec::new());
    for a in [0.1, 1.0, 10.0] {
        for &t in &times {
            let (sup, _) = statphase_sup(t, a, &ladder).unwrap();
            ratios.push(sup * t.powf(1.5) / a);
            ts.push(t);
            ys.push(sup / a);
        }
    }
    // Smallest single C with no violations; the closed-form leading term gives √π/2.
    let c = ratios.iter().cloned().fold(0.0, f64::max);
    assert!(c < 4.0 * PI.sqrt() / 2.0, "{c}");
    let (_, alpha, _) = power_law_fit(&ts, &ys).unwrap();
    assert!((alpha - 1.5).abs() <= 0.1, "{alpha}");
}

#[test]
fn kato_chain_bounds() {
    let g = Arc::new(build_radial_grid(2.0, 400).unwrap());
    let v = Potential::from_shape(&g, Shape::Well { depth: -1.0, radius: 1.0 });
    let endpoints = [([0.0; 3], [0.0; 3]), ([0.3, -0.5, 0.2], [1.5, 0.1, 0.0]), ([2.0, 0.0, 0.0], [0.0, 0.7, 0.0])];
    for k in 1..=4 {
        for &(x0, x1) in &endpoints {
            let e = iterated_kato_integral(&v, k, x0, x1, 100_000, 11).unwrap();
            let bound = (k as f64 + 1.0) * (2.0 * PI).powi(k as i32);
            assert!(e.mean - 3.0 * e.stderr <= bound, "k={k}: {} ± {} vs {bound}", e.mean, e.stderr);
        }
    }
    let centre = iterated_kato_integral(&v, 1, [0.0; 3], [0.0; 3], 400_000, 3).unwrap();
    assert!((centre.mean - 4.0 * PI).abs() <= 0.01 * 4.0 * PI, "{}", centre.mean);
}

#[test]
fn dispersive_born_exponents() {
    // Probe width 1: narrower bumps push the small-L cutoffs into the fitted window.
    let g = Arc::new(build_radial_grid(10.0, 400).unwrap());
    let f = Field::from_radial_fn(&g, |r| Complex64::new((-r * r).exp(), 0.0));
    let times: Vec<f64> = (0..7).map(|k| 2f64.powi(k)).collect();
    let quad = LambdaQuadrature::new(16.0, 64, 12);
    let free = Potential::zero(&g);
    let well = Potential::from_shape(&g, Shape::Well { depth: 0.5, radius: 1.0 });
    for (k, v, band) in [(0, &free, 0.15), (1, &well, 0.2)] {
        let out = born_dispersive_term(v, k, &times, &f, &f, &cutoff_ladder(4), &quad).unwrap();
        let vals: Vec<f64> = out.iter().map(|o| o.value).collect();
        let (_, alpha, _) = power_law_fit(&times, &vals).unwrap();
        assert!((alpha - 1.5).abs() <= band, "k={k}: {alpha}");
    }
    let zero = born_dispersive_term(&free, 1, &times, &f, &f, &cutoff_ladder(4), &quad).unwrap();
    assert!(zero.iter().all(|o| o.value == 0.0));
}
