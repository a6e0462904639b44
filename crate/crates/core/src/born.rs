//! Finite Born series terms `R₀(VR₀)^k`, the model stationary-phase
//! integral, Monte Carlo estimates of iterated Kato integrals, and the
//! λ-integrated Born terms whose `t^{-3/2}` decay is measured.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::free_resolvent::{apply_free, assemble_free, BranchSign, OperatorTag, ResolventOperator};
use crate::grid::{dist3, Field, Grid, Point};
use crate::potential::Potential;
use crate::quadrature::{GaussLegendre, PanelSampling};

/// `e^{-1/x}` for `x > 0`, else 0.
fn smooth_step(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// Even C^∞ bump `ψ(s) = g(2−|s|) / (g(2−|s|) + g(|s|−1))` with `g(x) = e^{−1/x}`:
/// identically 1 on `[−1, 1]`, 0 outside `(−2, 2)`, evaluated at scale `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSpec {
    pub scale: f64,
}

impl CutoffSpec {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale >= 1.0) || !scale.is_finite() {
            return Err(Error::InvalidArgument(format!("cutoff scale L must be ≥ 1, got {scale}")));
        }
        Ok(CutoffSpec { scale })
    }

    pub fn psi(s: f64) -> f64 {
        let s = s.abs();
        let a = smooth_step(2.0 - s);
        let b = smooth_step(s - 1.0);
        if a + b == 0.0 {
            0.0
        } else {
            a / (a + b)
        }
    }

    /// `ψ(λ / L)`.
    pub fn eval(&self, lambda: f64) -> f64 {
        Self::psi(lambda / self.scale)
    }

    /// Right end of the support, `2L`.
    pub fn support(&self) -> f64 {
        2.0 * self.scale
    }
}

/// The ladder `L ∈ {1, 2, 4, …, 2^J}`.
pub fn cutoff_ladder(j: u32) -> Vec<CutoffSpec> {
    (0..=j).map(|e| CutoffSpec { scale: 2f64.powi(e as i32) }).collect()
}

#[derive(Debug, Clone)]
pub struct BornTerm {
    pub k: usize,
    pub lambda: f64,
    pub branch: BranchSign,
    pub operator: ResolventOperator,
}

/// Left multiplication by the diagonal `diag(v)`.
pub(crate) fn scale_rows(v: &[f64], m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let mut out = m.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= Complex64::new(v[i], 0.0);
    }
    out
}

pub(crate) fn check_potential_grid(grid: &Grid, v: &Potential) -> Result<()> {
    if grid.same_as(v.grid()) {
        Ok(())
    } else {
        Err(Error::GridMismatch("potential was sampled on a different grid".into()))
    }
}

/// Dense `R₀±(λ²) (V R₀±(λ²))^k`, resolvent leftmost.
pub fn born_term(grid: &Arc<Grid>, v: &Potential, lambda: f64, branch: BranchSign, k: usize) -> Result<BornTerm> {
    check_potential_grid(grid, v)?;
    let free = assemble_free(grid, lambda, branch)?;
    let vr = scale_rows(v.values(), &free.matrix);
    let mut matrix = free.matrix.clone();
    for step in 0..k {
        matrix = &matrix * &vr;
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Overflow { k: step + 1 });
        }
    }
    let tag = if k == 0 { OperatorTag::Free } else { OperatorTag::Composed };
    Ok(BornTerm { k, lambda, branch, operator: ResolventOperator { matrix, tag, ..free } })
}

/// `∫₀^∞ e^{itλ} sin(a√λ) ψ(√λ/L) dλ`, computed after `λ = μ²` as
/// `∫₀^{2L} e^{itμ²} sin(aμ) ψ(μ/L) 2μ dμ` on Gauss panels refined by doubling.
pub fn statphase_integral(t: f64, a: f64, cutoff: &CutoffSpec) -> Result<Complex64> {
    if !(t >= 1.0) {
        return Err(Error::InvalidArgument(format!("stationary-phase integral needs t ≥ 1, got {t}")));
    }
    CutoffSpec::new(cutoff.scale)?;
    if a == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let upper = cutoff.support();
    let rule = GaussLegendre::new(16);
    let integrate = |panels: usize| -> (Complex64, f64) {
        let width = upper / panels as f64;
        (0..panels)
            .into_par_iter()
            .map(|p| {
                let lo = p as f64 * width;
                let mut value = Complex64::new(0.0, 0.0);
                let mut mass = 0.0;
                for (mu, w) in rule.mapped(lo, lo + width) {
                    let amp = 2.0 * mu * (a * mu).sin() * cutoff.eval(mu);
                    value += Complex64::from_polar(w * amp, t * mu * mu);
                    mass += w * amp.abs();
                }
                (value, mass)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold((Complex64::new(0.0, 0.0), 0.0), |x, y| (x.0 + y.0, x.1 + y.1))
    };
    // Phase advance per panel kept below π/2 from the start; refinement stops
    // at a relative tolerance or at the cancellation floor set by ∫|integrand|.
    let max_freq = 2.0 * t * upper + a.abs();
    let mut panels = ((upper * max_freq) / (0.5 * PI)).ceil().max(8.0) as usize;
    let (mut previous, _) = integrate(panels);
    let requested = 1e-8;
    let mut achieved = f64::INFINITY;
    for _ in 0..5 {
        panels *= 2;
        let (current, mass) = integrate(panels);
        let diff = (current - previous).norm();
        achieved = diff / current.norm().max(1e-300);
        if achieved < requested || diff < 1e-13 * mass {
            return Ok(current);
        }
        previous = current;
    }
    Err(Error::QuadratureNonConvergence { achieved, requested })
}

/// `sup_L |statphase_integral(t, a, L)|` over the ladder, with the per-L values.
pub fn statphase_sup(t: f64, a: f64, ladder: &[CutoffSpec]) -> Result<(f64, Vec<f64>)> {
    let values = ladder
        .iter()
        .map(|c| statphase_integral(t, a, c).map(|z| z.norm()))
        .collect::<Result<Vec<_>>>()?;
    Ok((values.iter().copied().fold(0.0, f64::max), values))
}

/// Monte Carlo estimate with its standard error and the analytic bound it is
/// compared against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KatoEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// `(k+1) ‖V‖_K^k` with the Kato norm of the sampled potential.
    pub bound: f64,
    pub n_samples: usize,
}

impl KatoEstimate {
    pub fn within_bound(&self, bound: f64) -> bool {
        self.mean - 3.0 * self.stderr <= bound
    }
}

const MC_BATCH: usize = 4096;

/// Importance-sampled
/// `∫ Π_{j=1}^k |V(x_j)| / Π_{j=0}^k |x_j − x_{j+1}| · Σ_ℓ |x_ℓ − x_{ℓ+1}| dx₁…dx_k`.
///
/// Each `x_j` is drawn as `x_{j−1} + r ω` with `r` uniform on `[0, R]` and `ω`
/// uniform on the sphere, i.e. with density `1/(4πR|x_j − x_{j−1}|²)` on the
/// ball of radius `R` covering the support, which cancels the chain
/// singularity. Batches use independent ChaCha streams of one seed and are
/// summed in order, so the result is independent of the thread count.
pub fn iterated_kato_integral(
    v: &Potential,
    k: usize,
    x0: Point,
    xk1: Point,
    n_samples: usize,
    seed: u64,
) -> Result<KatoEstimate> {
    if n_samples < 10_000 {
        return Err(Error::InsufficientSamples(format!("iterated Kato integral needs ≥ 10⁴ samples, got {n_samples}")));
    }
    let bound = (k as f64 + 1.0) * v.kato_norm().powi(k as i32);
    if k == 0 {
        return Ok(KatoEstimate { mean: 1.0, stderr: 0.0, bound, n_samples });
    }
    if v.is_zero() {
        return Err(Error::DegenerateSampler);
    }
    let rho = v.support_radius();
    if !rho.is_finite() {
        return Err(Error::InvalidArgument("Monte Carlo sampler needs a compactly supported potential".into()));
    }
    let c = v.offset();
    let cover = (dist3(&x0, &c) + rho).max(2.0 * rho);
    let n_batches = n_samples.div_ceil(MC_BATCH);
    let sums: Vec<(f64, f64, usize)> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = MC_BATCH.min(n_samples - b * MC_BATCH);
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let w = kato_sample(v, k, &x0, &xk1, cover, &mut rng);
                s1 += w;
                s2 += w * w;
            }
            (s1, s2, count)
        })
        .collect();
    let (s1, s2, n) = sums.iter().fold((0.0, 0.0, 0usize), |acc, x| (acc.0 + x.0, acc.1 + x.1, acc.2 + x.2));
    let n_f = n as f64;
    let mean = s1 / n_f;
    let var = (s2 / n_f - mean * mean).max(0.0) * n_f / (n_f - 1.0);
    Ok(KatoEstimate { mean, stderr: (var / n_f).sqrt(), bound, n_samples: n })
}

fn kato_sample(v: &Potential, k: usize, x0: &Point, xk1: &Point, cover: f64, rng: &mut ChaCha8Rng) -> f64 {
    let mut prev = *x0;
    let mut weight = 1.0;
    let mut total = 0.0;
    for _ in 0..k {
        let r = cover * rng.random::<f64>();
        let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
        let phi = 2.0 * PI * rng.random::<f64>();
        let s = (1.0 - z * z).max(0.0).sqrt();
        let x = [prev[0] + r * s * phi.cos(), prev[1] + r * s * phi.sin(), prev[2] + r * z];
        let vx = v.eval_at(&x).abs();
        if vx == 0.0 {
            return 0.0;
        }
        // |V| · (1/r) / density, density = 1/(4π R r²)
        weight *= vx * 4.0 * PI * cover * r;
        total += r;
        prev = x;
    }
    let last = dist3(&prev, xk1);
    if last == 0.0 {
        return 0.0;
    }
    weight * (total + last) / last
}

/// λ-quadrature layout shared by the Stone-formula integrals: coarse Gauss
/// panels carry the amplitude, fine sub-panels carry the chirp `e^{itλ²}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaQuadrature {
    pub lambda_max: f64,
    pub n_panels: usize,
    pub order: usize,
    /// Fine sub-panel count; `None` picks the smallest count passing the guard.
    pub n_fine: Option<usize>,
    pub fine_order: usize,
}

impl LambdaQuadrature {
    pub fn new(lambda_max: f64, n_panels: usize, order: usize) -> Self {
        LambdaQuadrature { lambda_max, n_panels, order, n_fine: None, fine_order: 6 }
    }

    pub fn sampling(&self) -> Result<PanelSampling> {
        PanelSampling::new(self.lambda_max, self.n_panels, self.order)
    }

    /// Fine panel count passing `panel · 2t·λ_max < π/2`.
    pub fn fine_panels(&self, t: f64) -> Result<usize> {
        let auto = ((self.lambda_max * 2.0 * t * self.lambda_max) / (0.25 * PI)).ceil() as usize;
        let n = self.n_fine.unwrap_or_else(|| auto.max(self.n_panels));
        let sub = self.lambda_max / (n.div_ceil(self.n_panels) * self.n_panels) as f64;
        let product = sub * 2.0 * t * self.lambda_max;
        if product >= 0.5 * PI {
            return Err(Error::Nyquist { panel: sub, product });
        }
        Ok(n)
    }

    /// Weights for `∫₀^{λ_max} e^{itλ²} λ ψ(λ/L) a(λ) dλ` against samples at the panel nodes.
    pub fn weights(&self, sampling: &PanelSampling, t: f64, cutoff: Option<&CutoffSpec>) -> Result<Vec<Complex64>> {
        let n_fine = self.fine_panels(t)?;
        Ok(sampling.chirp_weights(t, |l| l * cutoff.map_or(1.0, |c| c.eval(l)), n_fine, self.fine_order))
    }
}

/// One CSV row of the dispersive Born-term sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BornRow {
    pub k: usize,
    pub t: f64,
    pub scale: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BornDispersive {
    /// Supremum over the ladder.
    pub value: f64,
    pub rows: Vec<BornRow>,
}

/// `Im⟨R₀⁺(λ²)(VR₀⁺(λ²))^k f, g⟩` at each λ (matrix-free).
pub fn born_amplitudes(v: &Potential, k: usize, f: &Field, g: &Field, lambdas: &[f64]) -> Result<Vec<f64>> {
    let grid = v.grid().clone();
    f.check_grid(&grid)?;
    g.check_grid(&grid)?;
    let vv = DVector::from_iterator(grid.len(), v.values().iter().map(|&x| Complex64::new(x, 0.0)));
    lambdas
        .iter()
        .map(|&lambda| {
            let mut u = apply_free(&grid, lambda, BranchSign::Plus, f)?;
            for _ in 0..k {
                let vu = u.with_values(u.values().component_mul(&vv));
                u = apply_free(&grid, lambda, BranchSign::Plus, &vu)?;
            }
            Ok(u.inner(g).im)
        })
        .collect()
}

/// `sup_L |∫₀^∞ e^{itλ²} λ ψ(λ/L) Im⟨R₀⁺(VR₀⁺)^k f, g⟩ dλ|` over the ladder.
///
/// Amplitudes are sampled once on the coarse panels; each `(t, L)` pair only
/// costs a new set of chirp weights.
pub fn born_dispersive_term(
    v: &Potential,
    k: usize,
    times: &[f64],
    f: &Field,
    g: &Field,
    ladder: &[CutoffSpec],
    quad: &LambdaQuadrature,
) -> Result<Vec<BornDispersive>> {
    if times.iter().any(|&t| !(t >= 1.0)) {
        return Err(Error::InvalidArgument("dispersive Born term needs t ≥ 1".into()));
    }
    for &t in times {
        quad.fine_panels(t)?;
    }
    let sampling = quad.sampling()?;
    let amplitudes: Vec<Complex64> = if k >= 1 && v.is_zero() {
        vec![Complex64::new(0.0, 0.0); sampling.nodes().len()]
    } else {
        born_amplitudes(v, k, f, g, sampling.nodes())?.into_iter().map(|a| Complex64::new(a, 0.0)).collect()
    };
    times
        .iter()
        .map(|&t| {
            let rows = ladder
                .iter()
                .map(|c| {
                    let w = quad.weights(&sampling, t, Some(c))?;
                    let value = w.iter().zip(&amplitudes).map(|(w, a)| w * a).sum::<Complex64>().norm();
                    Ok(BornRow { k, t, scale: c.scale, value })
                })
                .collect::<Result<Vec<_>>>()?;
            let value = rows.iter().map(|r| r.value).fold(0.0, f64::max);
            Ok(BornDispersive { value, rows })
        })
        .collect()
}

pub fn write_born_csv<W: std::io::Write>(rows: &[BornRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "t", "L", "value"]).map_err(|e| Error::Io(e.to_string()))?;
    for r in rows {
        w.write_record([r.k.to_string(), format!("{}", r.t), format!("{}", r.scale), format!("{:.12e}", r.value)])
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::free_resolvent::free_kernel;
    use crate::grid::{build_box_grid, build_radial_grid};
    use crate::potential::Shape;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn cutoff_is_even_bounded_bump(s in -3.0..3.0f64) {
            let v = CutoffSpec::psi(s);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v, CutoffSpec::psi(-s));
            if s.abs() <= 1.0 { prop_assert_eq!(v, 1.0); }
            if s.abs() >= 2.0 { prop_assert_eq!(v, 0.0); }
        }
    }

    #[test]
    fn cutoff_midpoint_and_scale() {
        assert_relative_eq!(CutoffSpec::psi(1.5), 0.5, epsilon = 1e-15);
        let c = CutoffSpec::new(4.0).unwrap();
        assert_eq!(c.eval(4.0), 1.0);
        assert_eq!(c.eval(8.0), 0.0);
        assert!(CutoffSpec::new(0.5).is_err());
    }

    #[test]
    fn zeroth_term_is_free_resolvent_and_higher_vanish_for_zero_potential() {
        let g = Arc::new(build_radial_grid(2.0, 30).unwrap());
        let free = assemble_free(&g, 1.3, BranchSign::Plus).unwrap();
        let t0 = born_term(&g, &Potential::zero(&g), 1.3, BranchSign::Plus, 0).unwrap();
        assert_eq!(t0.operator.matrix, free.matrix);
        assert_eq!(t0.operator.tag, OperatorTag::Free);
        for k in 1..3 {
            let t = born_term(&g, &Potential::zero(&g), 1.3, BranchSign::Plus, k).unwrap();
            assert_eq!(t.operator.matrix.camax(), 0.0);
        }
    }

    #[test]
    fn second_term_matches_explicit_kernel_chain() {
        // ⟨R₀VR₀VR₀ f, g⟩ summed node by node from the point kernel
        let grid = Arc::new(build_box_grid(1.2, 4).unwrap());
        let v = Potential::from_shape(&grid, Shape::Well { depth: 0.5, radius: 1.0 });
        let lambda = 1.7;
        let term = born_term(&grid, &v, lambda, BranchSign::Plus, 2).unwrap();
        let f = Field::from_fn(&grid, |x| Complex64::new((x[0] - 0.2).cos(), x[1] * x[2])).unwrap();
        let gg = Field::from_fn(&grid, |x| Complex64::new(1.0 + x[2], -x[0])).unwrap();
        let lhs = term.operator.apply(&f).unwrap().inner(&gg);

        let n = grid.len();
        let nodes = grid.nodes();
        let w = grid.weights();
        let kernel = |i: usize, j: usize| -> Complex64 {
            if i == j {
                Complex64::new(grid.diag_correction()[i], lambda * w[i] / (4.0 * PI))
            } else {
                free_kernel(lambda, BranchSign::Plus, &nodes[i], &nodes[j]).unwrap() * w[j]
            }
        };
        let vals = v.values();
        let mut rhs = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for a in 0..n {
                if vals[a] == 0.0 {
                    continue;
                }
                let kia = kernel(i, a) * vals[a];
                for b in 0..n {
                    if vals[b] == 0.0 {
                        continue;
                    }
                    let kab = kernel(a, b) * vals[b];
                    let mut inner = Complex64::new(0.0, 0.0);
                    for j in 0..n {
                        inner += kernel(b, j) * f.values()[j];
                    }
                    rhs += kia * kab * inner * gg.values()[i].conj() * w[i];
                }
            }
        }
        assert!((lhs - rhs).norm() <= 1e-6 * rhs.norm(), "{lhs} vs {rhs}");
    }

    #[test]
    fn statphase_basic_symmetries() {
        let c = CutoffSpec::new(2.0).unwrap();
        assert_eq!(statphase_integral(3.0, 0.0, &c).unwrap(), Complex64::new(0.0, 0.0));
        let p = statphase_integral(3.0, 1.3, &c).unwrap();
        let m = statphase_integral(3.0, -1.3, &c).unwrap();
        assert!((p + m).norm() < 1e-13);
        assert!(statphase_integral(0.5, 1.0, &c).is_err());
    }

    #[test]
    fn statphase_approaches_gaussian_closed_form() {
        // L → ∞: ∫₀^∞ e^{itμ²} sin(aμ) 2μ dμ = √(iπ/t) · (ia/2t) · e^{−ia²/4t}
        for (t, a) in [(1.0, 1.0), (4.0, 0.3), (16.0, 10.0)] {
            let c = CutoffSpec::new(16.0).unwrap();
            let value = statphase_integral(t, a, &c).unwrap();
            let exact = (Complex64::new(0.0, PI / t)).sqrt()
                * Complex64::new(0.0, a / (2.0 * t))
                * Complex64::from_polar(1.0, -a * a / (4.0 * t));
            assert!((value - exact).norm() < 1e-6 * exact.norm(), "t={t} a={a}: {value} vs {exact}");
        }
    }

    #[test]
    fn kato_integral_trivial_order() {
        let g = Arc::new(build_radial_grid(2.0, 100).unwrap());
        let v = Potential::from_shape(&g, Shape::Well { depth: -1.0, radius: 1.0 });
        let e = iterated_kato_integral(&v, 0, [0.3, 0.0, 0.0], [0.0; 3], 10_000, 1).unwrap();
        assert_eq!(e.mean, 1.0);
        assert!(e.within_bound(1.0));
        assert!(iterated_kato_integral(&v, 1, [0.0; 3], [0.0; 3], 100, 1).is_err());
        assert!(matches!(
            iterated_kato_integral(&Potential::zero(&g), 1, [0.0; 3], [0.0; 3], 10_000, 1),
            Err(Error::DegenerateSampler)
        ));
    }

    #[test]
    fn kato_integral_center_case_equals_bound() {
        let g = Arc::new(build_radial_grid(2.0, 400).unwrap());
        let v = Potential::from_shape(&g, Shape::Well { depth: -1.0, radius: 1.0 });
        let e = iterated_kato_integral(&v, 1, [0.0; 3], [0.0; 3], 200_000, 7).unwrap();
        assert!((e.mean - 4.0 * PI).abs() < 0.01 * 4.0 * PI, "{e:?}");
        assert!((e.mean - 4.0 * PI).abs() < 4.0 * e.stderr + 1e-3);
        let again = iterated_kato_integral(&v, 1, [0.0; 3], [0.0; 3], 200_000, 7).unwrap();
        assert_eq!(e, again);
    }

    #[test]
    fn nyquist_guard() {
        let q = LambdaQuadrature { n_fine: Some(10), ..LambdaQuadrature::new(10.0, 10, 8) };
        assert!(matches!(q.fine_panels(10.0), Err(Error::Nyquist { .. })));
        let q = LambdaQuadrature::new(10.0, 10, 8);
        let n = q.fine_panels(64.0).unwrap();
        assert!(10.0 / n as f64 * 2.0 * 64.0 * 10.0 < 0.5 * PI);
    }

    #[test]
    fn born_csv_header() {
        let mut buf = Vec::new();
        write_born_csv(&[BornRow { k: 0, t: 1.0, scale: 2.0, value: 0.5 }], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,t,L,value\n0,1,2,5.000000000000e-1"));
    }
}
