//! One-dimensional quadrature: Gauss-Legendre rules, barycentric panel
//! interpolation, and chirp weights for `∫ e^{itλ²} g(λ) a(λ) dλ` where the
//! amplitude `a` is only known at coarse panel nodes.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let n = order as f64;
        for i in 0..order.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(order, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(order, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
    }

    pub fn integrate_complex<F: Fn(f64) -> Complex64>(&self, a: f64, b: f64, f: F) -> Complex64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(|(x, w)| f(mid + half * x) * *w).sum::<Complex64>() * half
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (mid + half * x, w * half))
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    let dp = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Coarse Gauss-Legendre panels covering `[0, upper]`; amplitudes sampled at
/// [`PanelSampling::nodes`] are interpolated panel-wise by barycentric
/// Lagrange polynomials.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelSampling {
    upper: f64,
    n_panels: usize,
    rule: GaussLegendre,
    bary: Vec<f64>,
    nodes: Vec<f64>,
}

impl PanelSampling {
    pub fn new(upper: f64, n_panels: usize, order: usize) -> Result<Self> {
        if !(upper > 0.0) || n_panels == 0 || order < 2 {
            return Err(Error::InvalidArgument(format!(
                "panel sampling needs upper > 0, panels ≥ 1, order ≥ 2 (got {upper}, {n_panels}, {order})"
            )));
        }
        let rule = GaussLegendre::new(order);
        let bary = (0..order)
            .map(|k| {
                1.0 / (0..order)
                    .filter(|&j| j != k)
                    .map(|j| rule.nodes[k] - rule.nodes[j])
                    .product::<f64>()
            })
            .collect();
        let width = upper / n_panels as f64;
        let nodes = (0..n_panels)
            .flat_map(|p| {
                let a = p as f64 * width;
                rule.nodes.iter().map(move |x| a + 0.5 * width * (x + 1.0)).collect::<Vec<_>>()
            })
            .collect();
        Ok(PanelSampling { upper, n_panels, rule, bary, nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn order(&self) -> usize {
        self.rule.nodes.len()
    }

    pub fn n_panels(&self) -> usize {
        self.n_panels
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn panel_width(&self) -> f64 {
        self.upper / self.n_panels as f64
    }

    /// Lagrange basis values at reference coordinate `x ∈ [-1, 1]`.
    fn basis(&self, x: f64, out: &mut [f64]) {
        let nodes = &self.rule.nodes;
        if let Some(k) = nodes.iter().position(|&xk| (x - xk).abs() < 1e-15) {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[k] = 1.0;
            return;
        }
        let mut denom = 0.0;
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.bary[k] / (x - nodes[k]);
            denom += *o;
        }
        out.iter_mut().for_each(|v| *v /= denom);
    }

    /// Interpolates node samples at an arbitrary `λ ∈ [0, upper]`.
    pub fn interpolate(&self, samples: &[Complex64], lambda: f64) -> Complex64 {
        let width = self.panel_width();
        let p = ((lambda / width).floor() as usize).min(self.n_panels - 1);
        let x = 2.0 * (lambda - p as f64 * width) / width - 1.0;
        let mut basis = vec![0.0; self.order()];
        self.basis(x, &mut basis);
        let m = self.order();
        basis.iter().zip(&samples[p * m..(p + 1) * m]).map(|(b, s)| s * *b).sum()
    }

    /// Weights `W_k` with `Σ_k W_k a(λ_k) ≈ ∫_0^upper e^{itλ²} envelope(λ) a(λ) dλ`.
    ///
    /// Each coarse panel is split into sub-panels no wider than
    /// `upper / n_fine`, each integrated with a `fine_order` Gauss rule.
    pub fn chirp_weights(
        &self,
        t: f64,
        envelope: impl Fn(f64) -> f64,
        n_fine: usize,
        fine_order: usize,
    ) -> Vec<Complex64> {
        let m = self.order();
        let width = self.panel_width();
        let subs = n_fine.div_ceil(self.n_panels).max(1);
        let sub_width = width / subs as f64;
        let fine = GaussLegendre::new(fine_order);
        let mut out = vec![Complex64::new(0.0, 0.0); self.nodes.len()];
        let mut basis = vec![0.0; m];
        for p in 0..self.n_panels {
            let a = p as f64 * width;
            let weights = &mut out[p * m..(p + 1) * m];
            for s in 0..subs {
                let lo = a + s as f64 * sub_width;
                for (lam, w) in fine.mapped(lo, lo + sub_width) {
                    let env = envelope(lam);
                    if env == 0.0 {
                        continue;
                    }
                    let x = 2.0 * (lam - a) / width - 1.0;
                    self.basis(x, &mut basis);
                    let phase = Complex64::from_polar(w * env, t * lam * lam);
                    for (wk, b) in weights.iter_mut().zip(&basis) {
                        *wk += phase * *b;
                    }
                }
            }
        }
        out
    }
}

/// Least-squares fit of `log y = log C - alpha log x`; returns `(C, alpha, rms residual)`.
pub fn power_law_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InsufficientSamples(format!("power-law fit needs ≥ 2 paired samples, got {}", xs.len())));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return Err(Error::NonPositive("power-law fit requires positive data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok((intercept.exp(), -slope, rms))
}
