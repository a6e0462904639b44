//! The Birman-Schwinger operator `I + VR₀±(λ²)`: assembly, direct and
//! Neumann inversion, zero-energy resonance detection, weighted operator-norm
//! scans and the dyadic `T₁/T₂` splitting of `R₀±(λ²)V`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::born::{check_potential_grid, scale_rows};
use crate::error::{Error, Result};
use crate::free_resolvent::{assemble_free, BranchSign};
use crate::grid::{Field, Grid};
use crate::potential::{weighted_lp_values, NormDescriptor, NormKind, Potential};
use crate::quadrature::power_law_fit;

/// Default resonance threshold `1e-3 · n^{-1/2}`.
pub fn default_resonance_threshold(n: usize) -> f64 {
    1e-3 / (n as f64).sqrt()
}

#[derive(Debug, Clone)]
pub struct BSOperator {
    pub grid: Arc<Grid>,
    pub lambda: f64,
    pub branch: BranchSign,
    pub potential: Potential,
    /// `I + diag(V) R₀±(λ²)` on node values.
    pub matrix: DMatrix<Complex64>,
}

pub fn assemble_bs(grid: &Arc<Grid>, v: &Potential, lambda: f64, branch: BranchSign) -> Result<BSOperator> {
    check_potential_grid(grid, v)?;
    let n = grid.len();
    let matrix = if v.is_zero() {
        DMatrix::identity(n, n)
    } else {
        let r0 = assemble_free(grid, lambda, branch)?;
        scale_rows(v.values(), &r0.matrix) + DMatrix::identity(n, n)
    };
    Ok(BSOperator { grid: grid.clone(), lambda, branch, potential: v.clone(), matrix })
}

/// The dual operator `I + R₀±(λ²) V`.
pub fn assemble_bs_dual(grid: &Arc<Grid>, v: &Potential, lambda: f64, branch: BranchSign) -> Result<DMatrix<Complex64>> {
    check_potential_grid(grid, v)?;
    let n = grid.len();
    let mut r0 = assemble_free(grid, lambda, branch)?.matrix;
    for (j, mut col) in r0.column_iter_mut().enumerate() {
        col *= Complex64::new(v.values()[j], 0.0);
    }
    Ok(r0 + DMatrix::identity(n, n))
}

/// Singular values of a complex matrix, computed in real arithmetic when the
/// matrix happens to be real (λ = 0).
pub fn singular_values(m: &DMatrix<Complex64>) -> DVector<f64> {
    if m.iter().all(|z| z.im == 0.0) {
        m.map(|z| z.re).singular_values()
    } else {
        m.clone().singular_values()
    }
}

pub fn sigma_min(m: &DMatrix<Complex64>) -> f64 {
    singular_values(m).min()
}

#[derive(Debug, Clone)]
pub struct BSInverse {
    pub matrix: DMatrix<Complex64>,
    pub sigma_min: f64,
    /// `max |op · inv − I|`.
    pub residual: f64,
}

/// Dense inverse, refused when σ_min falls below the resonance threshold
/// `1e-3 · n^{-1/2}`: discretization shifts exact zeros, so a smaller floor
/// would let threshold potentials through.
pub fn invert_bs(op: &BSOperator) -> Result<BSInverse> {
    invert_bs_with_floor(op, default_resonance_threshold(op.matrix.nrows()))
}

pub fn invert_bs_with_floor(op: &BSOperator, floor: f64) -> Result<BSInverse> {
    let n = op.matrix.nrows();
    if op.potential.is_zero() {
        return Ok(BSInverse { matrix: DMatrix::identity(n, n), sigma_min: 1.0, residual: 0.0 });
    }
    let smin = sigma_min(&op.matrix);
    if smin < floor {
        return Err(Error::NearSingular { lambda: op.lambda, sigma_min: smin, floor });
    }
    let inv = op
        .matrix
        .clone()
        .lu()
        .try_inverse()
        .ok_or(Error::NearSingular { lambda: op.lambda, sigma_min: smin, floor })?;
    let residual = (&op.matrix * &inv - DMatrix::<Complex64>::identity(n, n)).camax();
    Ok(BSInverse { matrix: inv, sigma_min: smin, residual })
}

/// Exact discrete `L^{1,σ} → L^{1,σ}` norm: the largest weighted column sum.
pub fn norm_l1_weighted(m: &DMatrix<Complex64>, grid: &Grid, sigma: f64, center: [f64; 3]) -> f64 {
    let mu: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(grid.weights())
        .map(|(x, w)| w * (1.0 + crate::grid::dist3(x, &center)).powf(sigma))
        .collect();
    m.column_iter()
        .zip(&mu)
        .map(|(col, mj)| col.iter().zip(&mu).map(|(z, mi)| z.norm() * mi).sum::<f64>() / mj)
        .fold(0.0, f64::max)
}

/// Exact discrete `L^{∞,σ} → L^{∞,σ}` norm: the largest weighted row sum.
pub fn norm_linf_weighted(m: &DMatrix<Complex64>, grid: &Grid, sigma: f64, center: [f64; 3]) -> f64 {
    let rho: Vec<f64> = grid.nodes().iter().map(|x| (1.0 + crate::grid::dist3(x, &center)).powf(sigma)).collect();
    m.row_iter()
        .zip(&rho)
        .map(|(row, ri)| row.iter().zip(&rho).map(|(z, rj)| z.norm() / rj).sum::<f64>() * ri)
        .fold(0.0, f64::max)
}

/// The fixed probe family: centred Gaussians of dyadic widths, indicators of
/// dyadic annuli, and narrow bumps centred on dyadic radii.
pub fn probe_family(grid: &Arc<Grid>) -> Vec<Field> {
    let h = grid.spacing();
    let extent = grid.extent();
    let mut probes = Vec::new();
    let mut width = 2.0 * h;
    while width < 2.0 * extent {
        probes.push(Field::from_radial_fn(grid, |r| Complex64::new((-(r * r) / (width * width)).exp(), 0.0)));
        width *= 2.0;
    }
    let mut inner = 0.0;
    let mut outer = 2.0 * h;
    while inner < extent {
        probes.push(Field::from_radial_fn(grid, |r| Complex64::new(if r >= inner && r < outer { 1.0 } else { 0.0 }, 0.0)));
        inner = outer;
        outer *= 2.0;
    }
    let mut center = 2.0 * h;
    while center < extent {
        let s = 0.25 * center;
        probes.push(Field::from_radial_fn(grid, |r| Complex64::new((-((r - center) / s).powi(2)).exp(), 0.0)));
        center *= 2.0;
    }
    probes.retain(|f| f.l1() > 0.0);
    probes
}

/// Operator norm in the descriptor's norm: exact for `p ∈ {1, ∞}`, otherwise
/// the maximum ratio over [`probe_family`].
pub fn operator_norm(m: &DMatrix<Complex64>, grid: &Arc<Grid>, d: &NormDescriptor) -> Result<f64> {
    d.validate()?;
    let sigma = if d.kind == NormKind::Weighted { d.sigma } else { 0.0 };
    if d.kind == NormKind::Kato {
        return Err(Error::InvalidArgument("the Kato norm is not an operator norm".into()));
    }
    if d.p == 1.0 {
        return Ok(norm_l1_weighted(m, grid, sigma, d.center));
    }
    if d.p.is_infinite() {
        return Ok(norm_linf_weighted(m, grid, sigma, d.center));
    }
    let mult = d.node_weights(grid)?;
    let norm = |v: &DVector<Complex64>| weighted_lp_values(grid, v.iter().map(|z| z.norm()), &mult, d.p);
    let probes = probe_family(grid);
    let best = probes
        .iter()
        .map(|f| norm(&(m * f.values())) / norm(f.values()))
        .fold(f64::NAN, f64::max);
    if best.is_nan() {
        Err(Error::EmptyProbeSet)
    } else {
        Ok(best)
    }
}

/// Operating norm for the Neumann regime: discrete `L^{1,1}`.
pub fn neumann_norm_descriptor() -> NormDescriptor {
    NormDescriptor::weighted(1.0, 1.0)
}

#[derive(Debug, Clone)]
pub struct NeumannInverse {
    pub matrix: DMatrix<Complex64>,
    /// Number of `(VR₀)^{2k}(I − VR₀)` blocks summed.
    pub terms: usize,
    /// `‖(VR₀)²‖` in the operating norm.
    pub square_norm: f64,
}

/// `(I + VR₀)^{-1} = Σ_k (VR₀)^{2k} (I − VR₀)`, summed until the increment
/// drops below `tol` in max-modulus. Refuses unless `‖(VR₀)²‖_{L^{1,1}} < 1/2`.
pub fn neumann_inverse(grid: &Arc<Grid>, v: &Potential, lambda: f64, branch: BranchSign, tol: f64) -> Result<NeumannInverse> {
    check_potential_grid(grid, v)?;
    let n = grid.len();
    let id = DMatrix::<Complex64>::identity(n, n);
    if v.is_zero() {
        return Ok(NeumannInverse { matrix: id, terms: 1, square_norm: 0.0 });
    }
    let a = scale_rows(v.values(), &assemble_free(grid, lambda, branch)?.matrix);
    let a2 = &a * &a;
    let square_norm = operator_norm(&a2, grid, &neumann_norm_descriptor())?;
    if square_norm >= 0.5 {
        return Err(Error::NeumannPrecondition { norm: square_norm });
    }
    let mut block = &id - &a;
    let mut sum = block.clone();
    let mut terms = 1;
    while block.camax() >= tol {
        block = &a2 * &block;
        sum += &block;
        terms += 1;
        if terms > 10_000 {
            return Err(Error::QuadratureNonConvergence { achieved: block.camax(), requested: tol });
        }
    }
    Ok(NeumannInverse { matrix: sum, terms, square_norm })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroEnergyFlag {
    Clear,
    EigenvalueOrResonanceSuspected,
}

/// Advisory label from the decay rate of the zero-energy solution
/// `ψ = R₀(0)φ` over the outer third of the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NullClass {
    /// `|ψ| ~ |x|^{-1}`.
    Resonance { slope: f64 },
    /// Faster decay.
    Eigenvalue { slope: f64 },
    Undetermined,
}

/// Decay slopes steeper than this are read as an eigenfunction.
pub const EIGENVALUE_SLOPE: f64 = -1.5;

#[derive(Debug, Clone)]
pub struct ResonanceReport {
    pub lambda_grid: Vec<f64>,
    pub sigma_min: Vec<f64>,
    pub det_log: Vec<f64>,
    pub zero_energy_flag: ZeroEnergyFlag,
    pub threshold: f64,
    /// Right singular vector of `I + VR₀(0)` for the smallest singular value, when flagged.
    pub null_vector: Option<Field>,
    pub classification: Option<NullClass>,
}

/// σ_min and log|det| of `I + VR₀⁺(λ²)` over the λ grid (which must contain 0).
pub fn resonance_scan(grid: &Arc<Grid>, v: &Potential, lambda_grid: &[f64], threshold: Option<f64>) -> Result<ResonanceReport> {
    let zero = lambda_grid
        .iter()
        .position(|&l| l == 0.0)
        .ok_or_else(|| Error::InvalidArgument("resonance scan needs λ = 0 in its grid".into()))?;
    let threshold = threshold.unwrap_or_else(|| default_resonance_threshold(grid.len()));
    let rows: Vec<(f64, f64)> = lambda_grid
        .par_iter()
        .map(|&l| {
            let op = assemble_bs(grid, v, l, BranchSign::Plus)?;
            let s = singular_values(&op.matrix);
            Ok((s.min(), s.iter().map(|x| x.ln()).sum()))
        })
        .collect::<Result<Vec<_>>>()?;
    let sigma: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let det_log: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let flagged = sigma[zero] < threshold;
    let (null_vector, classification) = if flagged {
        let (phi, class) = zero_energy_solution(grid, v)?;
        (Some(phi), Some(class))
    } else {
        (None, None)
    };
    Ok(ResonanceReport {
        lambda_grid: lambda_grid.to_vec(),
        sigma_min: sigma,
        det_log,
        zero_energy_flag: if flagged { ZeroEnergyFlag::EigenvalueOrResonanceSuspected } else { ZeroEnergyFlag::Clear },
        threshold,
        null_vector,
        classification,
    })
}

/// Null vector `φ` of `I + VR₀(0)` and the decay label of `ψ = R₀(0)φ`.
pub fn zero_energy_solution(grid: &Arc<Grid>, v: &Potential) -> Result<(Field, NullClass)> {
    let op = assemble_bs(grid, v, 0.0, BranchSign::Plus)?;
    let real = op.matrix.map(|z| z.re);
    let svd = real.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Eigen("SVD did not return singular vectors".into()))?;
    let k = svd.singular_values.imin();
    let phi = DVector::from_iterator(grid.len(), v_t.row(k).iter().map(|&x| Complex64::new(x, 0.0)));
    let phi = Field::from_values(grid, phi)?;
    let psi = crate::free_resolvent::apply_free(grid, 0.0, BranchSign::Plus, &phi)?;
    Ok((phi, classify_decay(grid, &psi)))
}

/// Log-log slope of `|ψ|` against `|x|` over the outer third of the grid.
pub fn classify_decay(grid: &Grid, psi: &Field) -> NullClass {
    let extent = grid.extent();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (x, z) in grid.nodes().iter().zip(psi.values().iter()) {
        let r = crate::grid::norm3(x);
        if r >= 2.0 * extent / 3.0 && r <= extent && z.norm() > 0.0 {
            xs.push(r);
            ys.push(z.norm());
        }
    }
    match power_law_fit(&xs, &ys) {
        Ok((_, alpha, _)) => {
            let slope = -alpha;
            if slope < EIGENVALUE_SLOPE {
                NullClass::Eigenvalue { slope }
            } else {
                NullClass::Resonance { slope }
            }
        }
        Err(_) => NullClass::Undetermined,
    }
}

/// σ_min(I + VR₀(0)) along a family of well depths, with the minimizer
/// refined by golden-section search between the neighbours of the best sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthSweep {
    pub depths: Vec<f64>,
    pub sigma_min: Vec<f64>,
    pub minimizer: f64,
    pub minimum: f64,
}

pub fn resonance_depth_sweep(grid: &Arc<Grid>, radius: f64, depths: &[f64]) -> Result<DepthSweep> {
    if depths.len() < 3 {
        return Err(Error::InsufficientSamples("depth sweep needs ≥ 3 depths".into()));
    }
    let r0 = assemble_free(grid, 0.0, BranchSign::Plus)?.matrix.map(|z| z.re);
    let n = grid.len();
    let shape: Vec<f64> = grid.radii().iter().map(|&r| if r < radius { -1.0 } else { 0.0 }).collect();
    let profile = |depth: f64| -> f64 {
        let mut m = r0.clone();
        for (i, mut row) in m.row_iter_mut().enumerate() {
            row *= depth * shape[i];
        }
        (m + DMatrix::<f64>::identity(n, n)).singular_values().min()
    };
    let sigma: Vec<f64> = depths.par_iter().map(|&d| profile(d)).collect();
    let best = sigma.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
    let (mut a, mut b) = (depths[best.saturating_sub(1)], depths[(best + 1).min(depths.len() - 1)]);
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - golden * (b - a);
    let mut d = a + golden * (b - a);
    let (mut fc, mut fd) = (profile(c), profile(d));
    while (b - a).abs() > 1e-6 * (1.0 + a.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - golden * (b - a);
            fc = profile(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + golden * (b - a);
            fd = profile(d);
        }
    }
    let minimizer = 0.5 * (a + b);
    Ok(DepthSweep { depths: depths.to_vec(), sigma_min: sigma, minimizer, minimum: profile(minimizer) })
}

/// Norm estimates of `(I + VR₀⁺(λ²))^{-1}` per λ. Refuses resonant potentials.
pub fn inverse_norm_scan(grid: &Arc<Grid>, v: &Potential, lambda_grid: &[f64], norm: &NormDescriptor) -> Result<Vec<f64>> {
    let zero = assemble_bs(grid, v, 0.0, BranchSign::Plus)?;
    let smin = sigma_min(&zero.matrix);
    if smin < default_resonance_threshold(grid.len()) {
        return Err(Error::ResonanceSuspected { sigma_min: smin });
    }
    lambda_grid
        .iter()
        .map(|&l| {
            let op = assemble_bs(grid, v, l, BranchSign::Plus)?;
            let inv = invert_bs(&op)?;
            operator_norm(&inv.matrix, grid, norm)
        })
        .collect()
}

/// Inverse-norm scans repeated over translates `V(· − y)` (box grids).
pub fn inverse_norm_translate_sweep(
    v: &Potential,
    shifts: &[[f64; 3]],
    lambda_grid: &[f64],
    norm: &NormDescriptor,
) -> Result<Vec<Vec<f64>>> {
    shifts
        .iter()
        .map(|&y| {
            let t = crate::potential::translate(v, y)?;
            inverse_norm_scan(v.grid(), &t.potential, lambda_grid, norm)
        })
        .collect()
}

/// `‖(VR₀±(λ²))²‖` per λ and the λ past which every value stays below 1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct NormScan {
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
    pub crossing: Option<f64>,
}

pub fn vr0_power_norm(grid: &Arc<Grid>, v: &Potential, lambda: f64, branch: BranchSign, power: usize, norm: &NormDescriptor) -> Result<f64> {
    check_potential_grid(grid, v)?;
    if v.is_zero() {
        return Ok(0.0);
    }
    let a = scale_rows(v.values(), &assemble_free(grid, lambda, branch)?.matrix);
    let mut m = a.clone();
    for _ in 1..power {
        m = &m * &a;
    }
    operator_norm(&m, grid, norm)
}

pub fn vr0_squared_norm_scan(grid: &Arc<Grid>, v: &Potential, lambda_grid: &[f64], norm: &NormDescriptor) -> Result<NormScan> {
    let values = lambda_grid
        .iter()
        .map(|&l| vr0_power_norm(grid, v, l, BranchSign::Plus, 2, norm))
        .collect::<Result<Vec<_>>>()?;
    let crossing = values
        .iter()
        .rposition(|&x| x >= 0.5)
        .map_or(lambda_grid.first().copied(), |i| lambda_grid.get(i + 1).copied());
    Ok(NormScan { lambdas: lambda_grid.to_vec(), values, crossing })
}

/// Splits `R₀±(λ²) V f = T₁f + T₂f`: on the annulus `2^{k−1} ≤ |x| < 2^k`,
/// `T₁` keeps the sources inside `D_k = {|y| < λ^{1/p} 2^{k+1}}`, `T₂` the rest.
pub fn t1_t2_decompose(
    grid: &Arc<Grid>,
    v: &Potential,
    lambda: f64,
    branch: BranchSign,
    p: f64,
    f: &Field,
) -> Result<(Field, Field)> {
    check_potential_grid(grid, v)?;
    f.check_grid(grid)?;
    let eps = v.epsilon();
    let p_min = (1.0 + eps) / eps;
    if !(p >= p_min) {
        return Err(Error::InvalidArgument(format!("T1/T2 splitting needs p ≥ (1+ε)/ε = {p_min}, got {p}")));
    }
    let r0 = assemble_free(grid, lambda, branch)?.matrix;
    let src: Vec<Complex64> = f.values().iter().zip(v.values()).map(|(z, vv)| z * *vv).collect();
    let radii: Vec<f64> = grid.nodes().iter().map(crate::grid::norm3).collect();
    let scale = lambda.powf(1.0 / p);
    let n = grid.len();
    let mut t1 = DVector::zeros(n);
    let mut t2 = DVector::zeros(n);
    for i in 0..n {
        let k = if radii[i] > 0.0 { radii[i].log2().floor() + 1.0 } else { f64::NEG_INFINITY };
        let reach = scale * 2f64.powf(k + 1.0);
        let (mut a, mut b) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for j in 0..n {
            if src[j] == Complex64::new(0.0, 0.0) {
                continue;
            }
            let term = r0[(i, j)] * src[j];
            if radii[j] < reach {
                a += term;
            } else {
                b += term;
            }
        }
        t1[i] = a;
        t2[i] = b;
    }
    Ok((f.with_values(t1), f.with_values(t2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_radial_grid;
    use crate::potential::Shape;
    use approx::assert_relative_eq;

    fn radial(r: f64, n: usize) -> Arc<Grid> {
        Arc::new(build_radial_grid(r, n).unwrap())
    }

    fn well(g: &Arc<Grid>, depth: f64) -> Potential {
        Potential::from_shape(g, Shape::Well { depth, radius: 1.0 })
    }

    #[test]
    fn zero_potential_is_identity() {
        let g = radial(2.0, 40);
        let op = assemble_bs(&g, &Potential::zero(&g), 1.0, BranchSign::Plus).unwrap();
        assert_eq!(op.matrix, DMatrix::identity(40, 40));
        let inv = invert_bs(&op).unwrap();
        assert_eq!(inv.matrix, DMatrix::identity(40, 40));
        let neu = neumann_inverse(&g, &Potential::zero(&g), 1.0, BranchSign::Plus, 1e-10).unwrap();
        assert_eq!(neu.matrix, DMatrix::identity(40, 40));
        let scan = resonance_scan(&g, &Potential::zero(&g), &[0.0, 1.0, 2.0], None).unwrap();
        assert!(scan.sigma_min.iter().all(|&s| (s - 1.0).abs() < 1e-14));
        assert_eq!(scan.zero_energy_flag, ZeroEnergyFlag::Clear);
    }

    #[test]
    fn zero_energy_operator_is_real_and_branches_conjugate() {
        let g = radial(2.0, 50);
        let v = well(&g, 1.0);
        let op = assemble_bs(&g, &v, 0.0, BranchSign::Plus).unwrap();
        assert!(op.matrix.iter().all(|z| z.im == 0.0));
        let p = assemble_bs(&g, &v, 1.5, BranchSign::Plus).unwrap();
        let m = assemble_bs(&g, &v, 1.5, BranchSign::Minus).unwrap();
        assert!((p.matrix.map(|z| z.conj()) - &m.matrix).camax() < 1e-15);
        let other = radial(2.0, 60);
        assert!(matches!(assemble_bs(&other, &v, 1.0, BranchSign::Plus), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn dual_assembly_is_weighted_adjoint() {
        let g = radial(2.0, 40);
        let v = well(&g, 1.3);
        let dual = assemble_bs_dual(&g, &v, 2.0, BranchSign::Plus).unwrap();
        let minus = assemble_bs(&g, &v, 2.0, BranchSign::Minus).unwrap().matrix;
        let w = g.weights();
        for i in 0..40 {
            for j in 0..40 {
                let adj = minus[(j, i)].conj() * w[j] / w[i];
                assert!((dual[(i, j)] - adj).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn direct_inverse_residual() {
        let g = radial(2.0, 200);
        let op = assemble_bs(&g, &well(&g, 1.0), 2.0, BranchSign::Plus).unwrap();
        let inv = invert_bs(&op).unwrap();
        assert!(inv.residual <= 1e-8, "{}", inv.residual);
    }

    #[test]
    fn neumann_regimes() {
        let g = radial(2.0, 300);
        let v = well(&g, 1.0);
        let tol = 1e-9;
        let neu = neumann_inverse(&g, &v, 50.0, BranchSign::Plus, tol).unwrap();
        let direct = invert_bs(&assemble_bs(&g, &v, 50.0, BranchSign::Plus).unwrap()).unwrap();
        assert!((&neu.matrix - &direct.matrix).camax() < 1e-6);
        assert!((&neu.matrix - &direct.matrix).camax() <= 10.0 * tol);
        let deep = well(&g, 20.0);
        assert!(matches!(neumann_inverse(&g, &deep, 1.0, BranchSign::Plus, tol), Err(Error::NeumannPrecondition { .. })));
    }

    #[test]
    fn exact_norms_are_dual() {
        let g = radial(3.0, 60);
        let v = well(&g, 1.0);
        let plus = invert_bs(&assemble_bs(&g, &v, 1.0, BranchSign::Plus).unwrap()).unwrap().matrix;
        let dual = assemble_bs_dual(&g, &v, 1.0, BranchSign::Minus).unwrap().lu().try_inverse().unwrap();
        let a = norm_l1_weighted(&plus, &g, 1.0, [0.0; 3]);
        let b = norm_linf_weighted(&dual, &g, -1.0, [0.0; 3]);
        assert_relative_eq!(a, b, max_relative = 1e-10);
    }

    #[test]
    fn l1_norm_matches_probe_lower_bound() {
        let g = radial(3.0, 60);
        let m = assemble_free(&g, 1.0, BranchSign::Plus).unwrap().matrix;
        let exact = norm_l1_weighted(&m, &g, 0.0, [0.0; 3]);
        let probed = operator_norm(&m, &g, &NormDescriptor::lp(1.0 + 1e-9)).unwrap();
        assert!(probed <= exact * (1.0 + 1e-6));
        assert!(probed > 0.2 * exact);
    }

    #[test]
    fn shallow_well_is_clear() {
        let g = radial(2.0, 200);
        let lambdas: Vec<f64> = (0..=10).map(|k| k as f64).collect();
        let r = resonance_scan(&g, &well(&g, 1.0), &lambdas, None).unwrap();
        assert_eq!(r.zero_energy_flag, ZeroEnergyFlag::Clear);
        assert!(r.sigma_min.iter().all(|&s| s > 0.1), "{:?}", r.sigma_min);
        assert!(resonance_scan(&g, &well(&g, 1.0), &[1.0], None).is_err());
    }

    #[test]
    fn threshold_well_is_flagged_as_resonance() {
        let g = radial(6.0, 600);
        let sweep = resonance_depth_sweep(&g, 1.0, &[2.3, 2.4, 2.5, 2.6]).unwrap();
        let v = well(&g, sweep.minimizer);
        let r = resonance_scan(&g, &v, &[0.0, 0.5], Some(1e-6)).unwrap();
        assert_eq!(r.zero_energy_flag, ZeroEnergyFlag::EigenvalueOrResonanceSuspected);
        match r.classification.unwrap() {
            NullClass::Resonance { slope } => assert!((slope + 1.0).abs() < 0.1, "{slope}"),
            other => panic!("{other:?}"),
        }
        let exact = well(&g, std::f64::consts::PI.powi(2) / 4.0);
        let err = invert_bs(&assemble_bs(&g, &exact, 0.0, BranchSign::Plus).unwrap());
        assert!(matches!(err, Err(Error::NearSingular { .. })));
        assert!(matches!(
            inverse_norm_scan(&g, &v, &[1.0], &NormDescriptor::lp(1.0)),
            Err(Error::ResonanceSuspected { .. })
        ));
    }

    #[test]
    fn sigma_min_decreases_towards_threshold() {
        let g = radial(2.0, 200);
        let depths: Vec<f64> = (0..=8).map(|k| 0.25 * k as f64).collect();
        let sweep = resonance_depth_sweep(&g, 1.0, &[2.0, 2.4, 2.8]).unwrap();
        let below: Vec<f64> = depths
            .iter()
            .map(|&d| sigma_min(&assemble_bs(&g, &well(&g, d), 0.0, BranchSign::Plus).unwrap().matrix))
            .collect();
        assert!(below.windows(2).all(|w| w[1] < w[0]), "{below:?}");
        assert!(sweep.minimizer > 2.0);
    }

    #[test]
    fn t1_t2_partition() {
        let g = radial(8.0, 160);
        let v = Potential::from_shape(&g, Shape::Gaussian { depth: 1.0, width: 2.0 });
        let f = Field::from_radial_fn(&g, |r| Complex64::new((0.7 * r).cos(), (0.3 * r).sin()));
        let (t1, t2) = t1_t2_decompose(&g, &v, 3.0, BranchSign::Plus, 11.0, &f).unwrap();
        let vf: DVector<Complex64> = f.values().iter().zip(v.values()).map(|(z, x)| z * *x).collect::<Vec<_>>().into();
        let full = assemble_free(&g, 3.0, BranchSign::Plus).unwrap().matrix * &vf;
        assert!((t1.values() + t2.values() - &full).camax() < 1e-12 * full.camax());
        assert!(t2.sup() > 0.0);
        // far beyond the grid every D_k covers all sources
        // λ^{1/p} 2^{k+1} > r_max already on the innermost annulus
        let (t1, t2) = t1_t2_decompose(&g, &v, 1e25, BranchSign::Plus, 11.0, &f).unwrap();
        assert_eq!(t2.sup(), 0.0);
        let full = assemble_free(&g, 1e25, BranchSign::Plus).unwrap().matrix * &vf;
        assert!((t1.values() - &full).camax() <= 1e-12 * full.camax());
        assert!(t1_t2_decompose(&g, &v, 3.0, BranchSign::Plus, 2.0, &f).is_err());
    }
}
