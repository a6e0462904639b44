//! Perturbed resolvent, Stone-formula evolution `e^{itH} P_ac f`, an
//! eigendecomposition oracle, decay fits, and the Born remainder `A(λ)` with
//! its integration-by-parts check.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::birman_schwinger::{default_resonance_threshold, singular_values};
use crate::born::{born_term, check_potential_grid, scale_rows, CutoffSpec, LambdaQuadrature};
use crate::error::{Error, Result};
use crate::free_resolvent::{apply_free, assemble_difference, assemble_free, assemble_free_block, BranchSign};
use crate::grid::{Field, Grid, GridKind};
use crate::potential::Potential;
use crate::quadrature::{power_law_fit, PanelSampling};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `R_V±(λ²)` restricted to the support `S` of `V`:
/// solve `(I + (R₀)_{SS} V_S) ψ_S = (R₀ f)_S`, then `ψ = R₀ f − R₀(V ψ_S)`.
#[derive(Debug, Clone)]
pub struct PerturbedResolvent {
    grid: Arc<Grid>,
    potential: Potential,
    lambda: f64,
    branch: BranchSign,
    support: Vec<usize>,
    lu: Option<nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>>,
    sigma_min: f64,
}

impl PerturbedResolvent {
    pub fn new(grid: &Arc<Grid>, v: &Potential, lambda: f64, branch: BranchSign) -> Result<Self> {
        Self::with_floor(grid, v, lambda, branch, default_resonance_threshold(grid.len()))
    }

    pub fn with_floor(grid: &Arc<Grid>, v: &Potential, lambda: f64, branch: BranchSign, floor: f64) -> Result<Self> {
        check_potential_grid(grid, v)?;
        let support = v.support();
        if support.is_empty() {
            return Ok(PerturbedResolvent {
                grid: grid.clone(),
                potential: v.clone(),
                lambda,
                branch,
                support,
                lu: None,
                sigma_min: 1.0,
            });
        }
        let mut block = assemble_free_block(grid, lambda, branch, &support, &support)?;
        for (b, mut col) in block.column_iter_mut().enumerate() {
            col *= Complex64::new(v.values()[support[b]], 0.0);
        }
        let m = block + DMatrix::identity(support.len(), support.len());
        let sigma_min = singular_values(&m).min();
        if sigma_min < floor {
            return Err(Error::NearSingular { lambda, sigma_min, floor });
        }
        Ok(PerturbedResolvent {
            grid: grid.clone(),
            potential: v.clone(),
            lambda,
            branch,
            support,
            lu: Some(m.lu()),
            sigma_min,
        })
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn apply(&self, f: &Field) -> Result<Field> {
        let free = apply_free(&self.grid, self.lambda, self.branch, f)?;
        let Some(lu) = &self.lu else { return Ok(free) };
        let rhs = DVector::from_iterator(self.support.len(), self.support.iter().map(|&i| free.values()[i]));
        let psi_s = lu.solve(&rhs).ok_or(Error::NearSingular { lambda: self.lambda, sigma_min: 0.0, floor: 0.0 })?;
        let mut src = DVector::zeros(self.grid.len());
        for (a, &i) in self.support.iter().enumerate() {
            src[i] = psi_s[a] * self.potential.values()[i];
        }
        let correction = apply_free(&self.grid, self.lambda, self.branch, &f.with_values(src))?;
        Ok(free.with_values(free.values() - correction.values()))
    }
}

/// `R_V±(λ²) f`.
pub fn perturbed_apply(grid: &Arc<Grid>, v: &Potential, lambda: f64, branch: BranchSign, f: &Field) -> Result<Field> {
    PerturbedResolvent::new(grid, v, lambda, branch)?.apply(f)
}

/// `[R_V⁺ − R_V⁻](λ²) f`, using `R_V⁻ f = conj(R_V⁺ conj f)` for real `V`.
pub fn perturbed_difference(solver: &PerturbedResolvent, f: &Field) -> Result<Field> {
    let plus = solver.apply(f)?;
    let conj_part = solver.apply(&f.conj())?.conj();
    Ok(plus.with_values(plus.values() - conj_part.values()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralValue {
    pub value: f64,
    /// Imaginary part discarded from `(2πi)^{-1}⟨[R_V⁺ − R_V⁻] f, g⟩`.
    pub imag_residue: f64,
}

/// `(2πi)^{-1}⟨[R_V⁺(λ²) − R_V⁻(λ²)] f, g⟩`.
pub fn spectral_density(grid: &Arc<Grid>, v: &Potential, lambda: f64, f: &Field, g: &Field) -> Result<SpectralValue> {
    if lambda == 0.0 {
        return Ok(SpectralValue { value: 0.0, imag_residue: 0.0 });
    }
    let plus = perturbed_apply(grid, v, lambda, BranchSign::Plus, f)?;
    let minus = perturbed_apply(grid, v, lambda, BranchSign::Minus, f)?;
    let z = plus.with_values(plus.values() - minus.values()).inner(g) / Complex64::new(0.0, 2.0 * PI);
    Ok(SpectralValue { value: z.re, imag_residue: z.im })
}

/// λ-quadrature and cutoff for [`evolve`]; the cutoff defaults to `L = λ_max/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveSettings {
    pub quadrature: LambdaQuadrature,
    pub cutoff: Option<CutoffSpec>,
}

impl EvolveSettings {
    pub fn new(lambda_max: f64, n_panels: usize, order: usize) -> Self {
        EvolveSettings { quadrature: LambdaQuadrature::new(lambda_max, n_panels, order), cutoff: None }
    }

    pub fn cutoff(&self) -> Result<CutoffSpec> {
        match self.cutoff {
            Some(c) => Ok(c),
            None => CutoffSpec::new((0.5 * self.quadrature.lambda_max).max(1.0)),
        }
    }
}

/// `[R_V⁺ − R_V⁻] f` at every λ node, computed once and reused for all `t`.
#[derive(Debug, Clone)]
pub struct SpectralCache {
    grid: Arc<Grid>,
    settings: EvolveSettings,
    sampling: PanelSampling,
    samples: Vec<DVector<Complex64>>,
    skipped: Vec<f64>,
    l1_in: f64,
}

impl SpectralCache {
    pub fn new(grid: &Arc<Grid>, v: &Potential, f: &Field, settings: EvolveSettings) -> Result<Self> {
        check_potential_grid(grid, v)?;
        f.check_grid(grid)?;
        let sampling = settings.quadrature.sampling()?;
        let nodes = sampling.nodes().to_vec();
        let results: Vec<Result<DVector<Complex64>>> = nodes
            .par_iter()
            .map(|&l| {
                let solver = PerturbedResolvent::new(grid, v, l, BranchSign::Plus)?;
                Ok(perturbed_difference(&solver, f)?.into_values())
            })
            .collect();
        let mut samples = Vec::with_capacity(nodes.len());
        let mut skipped = Vec::new();
        let mut previous_failed = false;
        for (k, r) in results.into_iter().enumerate() {
            match r {
                Ok(s) => {
                    samples.push(s);
                    previous_failed = false;
                }
                Err(Error::NearSingular { sigma_min, .. }) => {
                    if k == 0 || previous_failed {
                        return Err(Error::ResonanceSuspected { sigma_min });
                    }
                    log::warn!("Birman-Schwinger solve failed at λ = {:.6}; sample skipped", nodes[k]);
                    skipped.push(nodes[k]);
                    samples.push(DVector::zeros(grid.len()));
                    previous_failed = true;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(SpectralCache { grid: grid.clone(), settings, sampling, samples, skipped, l1_in: f.l1() })
    }

    pub fn skipped(&self) -> &[f64] {
        &self.skipped
    }

    pub fn l1_in(&self) -> f64 {
        self.l1_in
    }

    /// `u(t) = (πi)^{-1} ∫₀^{λ_max} e^{itλ²} λ ψ(λ/L) [R_V⁺ − R_V⁻] f dλ`.
    pub fn at(&self, t: f64) -> Result<Field> {
        let cutoff = self.settings.cutoff()?;
        let weights = self.settings.quadrature.weights(&self.sampling, t, Some(&cutoff))?;
        let mut u = DVector::<Complex64>::zeros(self.grid.len());
        for (w, s) in weights.iter().zip(&self.samples) {
            u.axpy(*w, s, Complex64::new(1.0, 0.0));
        }
        u /= Complex64::new(0.0, PI);
        Field::from_values(&self.grid, u)
    }
}

pub fn evolve(grid: &Arc<Grid>, v: &Potential, t: f64, f: &Field, settings: EvolveSettings) -> Result<Field> {
    if !(t >= 1.0) {
        return Err(Error::InvalidArgument(format!("evolve needs t ≥ 1, got {t}")));
    }
    settings.quadrature.fine_panels(t)?;
    SpectralCache::new(grid, v, f, settings)?.at(t)
}

/// Dense eigendecomposition of the discrete `H = −Δ_h + V`.
///
/// Radial grids discretize the s-wave operator `−u'' + V u` on `u = rψ` with
/// an odd ghost node at the origin and a Dirichlet wall at `r_max`; box grids
/// use the 7-point Laplacian with Dirichlet walls.
#[derive(Debug, Clone)]
pub struct EvolutionOracle {
    grid: Arc<Grid>,
    energies: DVector<f64>,
    vectors: DMatrix<f64>,
    n_negative: usize,
}

impl EvolutionOracle {
    pub fn new(grid: &Arc<Grid>, v: &Potential) -> Result<Self> {
        check_potential_grid(grid, v)?;
        let n = grid.len();
        let h = grid.spacing();
        let h2 = h * h;
        let mut m = DMatrix::<f64>::zeros(n, n);
        match grid.kind() {
            GridKind::Radial => {
                for i in 0..n {
                    m[(i, i)] = 2.0 / h2 + v.values()[i];
                    if i + 1 < n {
                        m[(i, i + 1)] = -1.0 / h2;
                        m[(i + 1, i)] = -1.0 / h2;
                    }
                }
                m[(0, 0)] += 1.0 / h2;
                m[(n - 1, n - 1)] += 1.0 / h2;
            }
            GridKind::Box => {
                let k = grid.n_per_axis();
                for ix in 0..k {
                    for iy in 0..k {
                        for iz in 0..k {
                            let c = grid.box_index(ix, iy, iz);
                            m[(c, c)] = 6.0 / h2 + v.values()[c];
                            let mut link = |j: usize| m[(c, j)] = -1.0 / h2;
                            if ix + 1 < k {
                                link(grid.box_index(ix + 1, iy, iz));
                            }
                            if ix > 0 {
                                link(grid.box_index(ix - 1, iy, iz));
                            }
                            if iy + 1 < k {
                                link(grid.box_index(ix, iy + 1, iz));
                            }
                            if iy > 0 {
                                link(grid.box_index(ix, iy - 1, iz));
                            }
                            if iz + 1 < k {
                                link(grid.box_index(ix, iy, iz + 1));
                            }
                            if iz > 0 {
                                link(grid.box_index(ix, iy, iz - 1));
                            }
                        }
                    }
                }
            }
        }
        let eig = SymmetricEigen::try_new(m, 1e-14, 0).ok_or_else(|| Error::Eigen("symmetric eigensolver did not converge".into()))?;
        let n_negative = eig.eigenvalues.iter().filter(|&&e| e < 0.0).count();
        Ok(EvolutionOracle { grid: grid.clone(), energies: eig.eigenvalues, vectors: eig.eigenvectors, n_negative })
    }

    /// Number of negative-energy (bound) states projected out.
    pub fn n_negative(&self) -> usize {
        self.n_negative
    }

    pub fn energies(&self) -> &DVector<f64> {
        &self.energies
    }

    /// Latest time before waves of frequency `k_band` return from the wall.
    pub fn validity_window(&self, k_band: f64) -> f64 {
        self.grid.extent() / (2.0 * k_band)
    }

    fn to_basis(&self, f: &Field) -> DVector<Complex64> {
        match self.grid.kind() {
            GridKind::Radial => {
                DVector::from_iterator(self.grid.len(), f.values().iter().zip(self.grid.radii()).map(|(z, r)| z * *r))
            }
            GridKind::Box => f.values().clone(),
        }
    }

    fn back_from_basis(&self, u: DVector<Complex64>) -> DVector<Complex64> {
        match self.grid.kind() {
            GridKind::Radial => DVector::from_iterator(self.grid.len(), u.iter().zip(self.grid.radii()).map(|(z, r)| z / *r)),
            GridKind::Box => u,
        }
    }

    /// `Σ_j e^{itE_j} ⟨φ_j, f⟩ φ_j`, over `E_j ≥ 0` when `project` is set.
    pub fn evolve(&self, t: f64, f: &Field, project: bool) -> Result<Field> {
        f.check_grid(&self.grid)?;
        let u = self.to_basis(f);
        let n = self.grid.len();
        let mut out = DVector::<Complex64>::zeros(n);
        for (j, &e) in self.energies.iter().enumerate() {
            if project && e < 0.0 {
                continue;
            }
            let phi = self.vectors.column(j);
            let coeff: Complex64 = phi.iter().zip(u.iter()).map(|(p, z)| z * *p).sum();
            let c = coeff * Complex64::from_polar(1.0, t * e);
            for (o, p) in out.iter_mut().zip(phi.iter()) {
                *o += c * *p;
            }
        }
        Field::from_values(&self.grid, self.back_from_basis(out))
    }
}

pub fn evolve_oracle(grid: &Arc<Grid>, v: &Potential, t: f64, f: &Field) -> Result<Field> {
    EvolutionOracle::new(grid, v)?.evolve(t, f, true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayCurve {
    pub times: Vec<f64>,
    pub sup_norms: Vec<f64>,
    pub l1_in: f64,
    pub fitted_c: f64,
    pub fitted_alpha: f64,
    pub residual: f64,
    pub fit_window: (usize, usize),
}

/// Least squares of `log sup_norm` against `log t`; needs ≥ 6 samples spanning a factor ≥ 8.
pub fn decay_fit(times: &[f64], sup_norms: &[f64], l1_in: f64) -> Result<DecayCurve> {
    if times.len() != sup_norms.len() {
        return Err(Error::InvalidArgument("times and sup norms differ in length".into()));
    }
    if times.len() < 6 {
        return Err(Error::InsufficientSamples(format!("decay fit needs ≥ 6 time samples, got {}", times.len())));
    }
    let (lo, hi) = times.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &t| (a.min(t), b.max(t)));
    if !(hi >= 8.0 * lo) {
        return Err(Error::InsufficientSamples(format!("decay fit needs times spanning a factor ≥ 8, got {lo}..{hi}")));
    }
    if sup_norms.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::NonPositive("sup norms must be positive".into()));
    }
    let (c, alpha, residual) = power_law_fit(times, sup_norms)?;
    Ok(DecayCurve {
        times: times.to_vec(),
        sup_norms: sup_norms.to_vec(),
        l1_in,
        fitted_c: c,
        fitted_alpha: alpha,
        residual,
        fit_window: (0, times.len()),
    })
}

pub fn write_decay_csv<W: std::io::Write>(curve: &DecayCurve, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["t", "sup_norm", "l1_in"]).map_err(io)?;
    for (t, s) in curve.times.iter().zip(&curve.sup_norms) {
        w.write_record([format!("{t}"), format!("{s:.12e}"), format!("{:.12e}", curve.l1_in)]).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Sweeps `t`, recording `‖u(t)‖_∞`, and fits the decay exponent.
pub fn decay_sweep(cache: &SpectralCache, times: &[f64]) -> Result<DecayCurve> {
    let sups = times.iter().map(|&t| cache.at(t).map(|u| u.sup())).collect::<Result<Vec<_>>>()?;
    decay_fit(times, &sups, cache.l1_in())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssemblyPath {
    /// `R_V⁺(VR₀⁺)^{m+2} − R_V⁻(VR₀⁻)^{m+2}`.
    Direct,
    /// `(R_V⁺ − R_V⁻)(VR₀⁺)^{m+2} + R_V⁻ Σ_k (VR₀⁻)^k V(R₀⁺ − R₀⁻)(VR₀⁺)^{m+1−k}`.
    Telescoped,
}

#[derive(Debug, Clone)]
pub struct RemainderOperator {
    pub lambda: f64,
    pub m: usize,
    pub matrix: DMatrix<Complex64>,
}

impl RemainderOperator {
    /// `⟨A(λ) f, g⟩`.
    pub fn pair(&self, grid: &Grid, f: &Field, g: &Field) -> Complex64 {
        let af = &self.matrix * f.values();
        crate::grid::inner_weighted(grid.weights(), &af, g.values())
    }
}

/// Dense `R_V±(λ²) = (I + R₀V)^{-1} R₀`.
fn dense_perturbed(grid: &Arc<Grid>, v: &Potential, lambda: f64, branch: BranchSign) -> Result<DMatrix<Complex64>> {
    let r0 = assemble_free(grid, lambda, branch)?.matrix;
    let n = grid.len();
    let mut r0v = r0.clone();
    for (j, mut col) in r0v.column_iter_mut().enumerate() {
        col *= Complex64::new(v.values()[j], 0.0);
    }
    let bs = r0v + DMatrix::identity(n, n);
    let smin = singular_values(&bs).min();
    let floor = default_resonance_threshold(n);
    if smin < floor {
        return Err(Error::NearSingular { lambda, sigma_min: smin, floor });
    }
    bs.lu().solve(&r0).ok_or(Error::NearSingular { lambda, sigma_min: smin, floor })
}

pub fn remainder_operator(grid: &Arc<Grid>, v: &Potential, lambda: f64, m: usize, path: AssemblyPath) -> Result<RemainderOperator> {
    check_potential_grid(grid, v)?;
    let n = grid.len();
    let power = m + 2;
    let x = scale_rows(v.values(), &assemble_free(grid, lambda, BranchSign::Plus)?.matrix);
    let y = scale_rows(v.values(), &assemble_free(grid, lambda, BranchSign::Minus)?.matrix);
    let pow = |a: &DMatrix<Complex64>, k: usize| {
        let mut out = DMatrix::<Complex64>::identity(n, n);
        for _ in 0..k {
            out = &out * a;
        }
        out
    };
    let rv_plus = dense_perturbed(grid, v, lambda, BranchSign::Plus)?;
    let rv_minus = dense_perturbed(grid, v, lambda, BranchSign::Minus)?;
    let matrix = match path {
        AssemblyPath::Direct => &rv_plus * pow(&x, power) - &rv_minus * pow(&y, power),
        AssemblyPath::Telescoped => {
            let vd = scale_rows(v.values(), &assemble_difference(grid, lambda)?.matrix);
            let mut sum = DMatrix::<Complex64>::zeros(n, n);
            let mut y_k = DMatrix::<Complex64>::identity(n, n);
            for k in 0..power {
                sum += &y_k * &vd * pow(&x, power - 1 - k);
                y_k = &y_k * &y;
            }
            (&rv_plus - &rv_minus) * pow(&x, power) + &rv_minus * sum
        }
    };
    Ok(RemainderOperator { lambda, m, matrix })
}

/// Matrix-free `⟨A(λ) f, g⟩`, extended to `λ < 0` by `A(−λ) = −A(λ)`.
pub fn remainder_pair(grid: &Arc<Grid>, v: &Potential, lambda: f64, m: usize, f: &Field, g: &Field) -> Result<Complex64> {
    if lambda < 0.0 {
        return remainder_pair(grid, v, -lambda, m, f, g).map(|z| -z);
    }
    if lambda == 0.0 || v.is_zero() {
        return Ok(ZERO);
    }
    let vv = DVector::from_iterator(grid.len(), v.values().iter().map(|&x| Complex64::new(x, 0.0)));
    let branch_term = |branch: BranchSign| -> Result<Field> {
        let mut u = f.clone();
        for _ in 0..m + 2 {
            let r = apply_free(grid, lambda, branch, &u)?;
            u = r.with_values(r.values().component_mul(&vv));
        }
        PerturbedResolvent::new(grid, v, lambda, branch)?.apply(&u)
    };
    let plus = branch_term(BranchSign::Plus)?;
    let minus = branch_term(BranchSign::Minus)?;
    Ok(plus.with_values(plus.values() - minus.values()).inner(g))
}

/// Exact discrete `‖A(λ)‖_{1→∞}` per λ and whether its envelope decreases.
#[derive(Debug, Clone, PartialEq)]
pub struct RemainderScan {
    pub m: usize,
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
    pub tail_decreasing: bool,
}

pub fn remainder_decay_scan(grid: &Arc<Grid>, v: &Potential, m: usize, lambda_grid: &[f64]) -> Result<RemainderScan> {
    let eps = v.epsilon();
    if (m as f64 - 3.0) * eps <= 1.0 {
        log::warn!("remainder depth m = {m} does not satisfy (m − 3)ε > 1 for ε = {eps}");
    }
    let values = lambda_grid
        .iter()
        .map(|&l| {
            if v.is_zero() {
                return Ok(0.0);
            }
            let a = remainder_operator(grid, v, l, m, AssemblyPath::Direct)?;
            Ok(crate::free_resolvent::norm_1_to_inf(&a.matrix, grid.weights()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RemainderScan { m, lambdas: lambda_grid.to_vec(), tail_decreasing: envelope_decreasing(&values), values })
}

/// The discrete norms oscillate with the grid's sinusoidal structure, so
/// "decreasing" is judged on the maxima over successive thirds of the scan.
fn envelope_decreasing(values: &[f64]) -> bool {
    if values.iter().all(|&v| v == 0.0) {
        return true;
    }
    let chunk = values.len().div_ceil(3).max(1);
    let maxima: Vec<f64> = values.chunks(chunk).map(|c| c.iter().cloned().fold(0.0, f64::max)).collect();
    maxima.len() > 1 && maxima.windows(2).all(|w| w[1] < w[0])
}

/// Finite Born identity on a pair:
/// `⟨[R_V⁺ − R_V⁻] f, g⟩` against
/// `Σ_{k≤m+1} (−1)^k ⟨[R₀⁺(VR₀⁺)^k − R₀⁻(VR₀⁻)^k] f, g⟩ + (−1)^m ⟨A(λ) f, g⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BornIdentity {
    pub full: Complex64,
    pub series: Complex64,
    pub relerr: f64,
}

pub fn born_remainder_identity(grid: &Arc<Grid>, v: &Potential, lambda: f64, m: usize, f: &Field, g: &Field) -> Result<BornIdentity> {
    let mut series = ZERO;
    for k in 0..=m + 1 {
        let plus = born_term(grid, v, lambda, BranchSign::Plus, k)?.operator.apply(f)?;
        let minus = born_term(grid, v, lambda, BranchSign::Minus, k)?.operator.apply(f)?;
        let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        series += plus.with_values(plus.values() - minus.values()).inner(g) * sign;
    }
    let a = remainder_operator(grid, v, lambda, m, AssemblyPath::Direct)?;
    let sign_m = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    series += a.pair(grid, f, g) * sign_m;
    let plus = dense_perturbed(grid, v, lambda, BranchSign::Plus)? * f.values();
    let minus = dense_perturbed(grid, v, lambda, BranchSign::Minus)? * f.values();
    let full = crate::grid::inner_weighted(grid.weights(), &(plus - minus), g.values());
    let relerr = (series - full).norm() / full.norm().max(f64::MIN_POSITIVE);
    Ok(BornIdentity { full, series, relerr })
}

/// Both sides of `∫ e^{itλ²} λ a(λ) dλ = −(2it)^{-1} ∫ e^{itλ²} a'(λ) dλ`,
/// `a(λ) = ⟨A(λ) f, g⟩`, with `a'` by centred differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IbpReport {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub relerr: f64,
    /// `|a(λ_max)| / (2t)`: the dropped boundary term.
    pub boundary: f64,
    pub fd_step: f64,
}

impl IbpReport {
    pub fn to_json(&self) -> String {
        format!(
            "{{\"lhs\":[{:e},{:e}],\"rhs\":[{:e},{:e}],\"relerr\":{:e},\"boundary\":{:e},\"fd_step\":{:e},\"pass\":{}}}",
            self.lhs.re,
            self.lhs.im,
            self.rhs.re,
            self.rhs.im,
            self.relerr,
            self.boundary,
            self.fd_step,
            self.relerr <= 1e-3
        )
    }
}

#[allow(clippy::too_many_arguments)]
pub fn ibp_check(
    grid: &Arc<Grid>,
    v: &Potential,
    m: usize,
    t: f64,
    f: &Field,
    g: &Field,
    quad: &LambdaQuadrature,
    fd_step: Option<f64>,
) -> Result<IbpReport> {
    if !(t >= 1.0) {
        return Err(Error::InvalidArgument(format!("ibp check needs t ≥ 1, got {t}")));
    }
    let n_fine = quad.fine_panels(t)?;
    let sampling = quad.sampling()?;
    let step = fd_step.unwrap_or(quad.lambda_max / n_fine as f64);
    if v.is_zero() {
        return Ok(IbpReport { lhs: ZERO, rhs: ZERO, relerr: 0.0, boundary: 0.0, fd_step: step });
    }
    let nodes = sampling.nodes().to_vec();
    let a = |l: f64| remainder_pair(grid, v, l, m, f, g);
    let values: Vec<(Complex64, Complex64)> = nodes
        .par_iter()
        .map(|&l| {
            let d = (a(l + step)? - a(l - step)?) / (2.0 * step);
            Ok((a(l)?, d))
        })
        .collect::<Result<Vec<_>>>()?;
    let w_lhs = sampling.chirp_weights(t, |l| l, n_fine, quad.fine_order);
    let w_rhs = sampling.chirp_weights(t, |_| 1.0, n_fine, quad.fine_order);
    let lhs: Complex64 = w_lhs.iter().zip(&values).map(|(w, v)| w * v.0).sum();
    let rhs: Complex64 = -w_rhs.iter().zip(&values).map(|(w, v)| w * v.1).sum::<Complex64>() / Complex64::new(0.0, 2.0 * t);
    let boundary = a(quad.lambda_max)?.norm() / (2.0 * t);
    let relerr = (lhs - rhs).norm() / lhs.norm().max(f64::MIN_POSITIVE);
    Ok(IbpReport { lhs, rhs, relerr, boundary, fd_step: step })
}
