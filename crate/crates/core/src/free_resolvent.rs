//! The outgoing/incoming free resolvents `R₀±(λ²)` as dense kernel
//! operators, their λ-derivative and ± difference, matrix-free application,
//! and empirical mapping-norm probes.
//!
//! On radial grids every kernel is the angular average over the shell, e.g.
//! `G_λ(r, s) = e^{±iλ max(r,s)} sin(λ min(r,s)) / (4πλ r s)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{dist3, Field, Grid, GridKind, Point};
use crate::potential::{lp_norm, weak_l3_norm};
use crate::quadrature::GaussLegendre;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BranchSign {
    Plus,
    Minus,
}

impl BranchSign {
    pub fn sign(self) -> f64 {
        match self {
            BranchSign::Plus => 1.0,
            BranchSign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            BranchSign::Plus => BranchSign::Minus,
            BranchSign::Minus => BranchSign::Plus,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BranchSign::Plus => "plus",
            BranchSign::Minus => "minus",
        }
    }
}

impl fmt::Display for BranchSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorTag {
    Free,
    Derivative,
    Difference,
    Composed,
}

/// Dense operator on the node values of a grid; quadrature weights are
/// folded into the columns so `apply` is a plain matrix-vector product.
#[derive(Debug, Clone)]
pub struct ResolventOperator {
    pub grid: Arc<Grid>,
    pub lambda: f64,
    pub branch: BranchSign,
    pub matrix: DMatrix<Complex64>,
    pub tag: OperatorTag,
}

impl ResolventOperator {
    pub fn apply(&self, f: &Field) -> Result<Field> {
        f.check_grid(&self.grid)?;
        Ok(f.with_values(&self.matrix * f.values()))
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &ResolventOperator) -> Result<ResolventOperator> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch("cannot compose operators on different grids".into()));
        }
        Ok(ResolventOperator {
            grid: self.grid.clone(),
            lambda: self.lambda,
            branch: self.branch,
            matrix: &self.matrix * &other.matrix,
            tag: OperatorTag::Composed,
        })
    }

    /// Exact discrete `L¹ → L^∞` norm.
    pub fn norm_1_to_inf(&self) -> f64 {
        norm_1_to_inf(&self.matrix, self.grid.weights())
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }
}

/// `max_{ij} |A_ij| / w_j`: the operator norm from weighted ℓ¹ to ℓ^∞.
pub fn norm_1_to_inf(matrix: &DMatrix<Complex64>, weights: &[f64]) -> f64 {
    matrix
        .column_iter()
        .zip(weights)
        .map(|(col, w)| col.iter().map(|z| z.norm()).fold(0.0, f64::max) / w)
        .fold(0.0, f64::max)
}

/// Point kernel `e^{±iλ|x−y|}/(4π|x−y|)`; the coincident case must go
/// through the grid's diagonal correction instead.
pub fn free_kernel(lambda: f64, branch: BranchSign, x: &Point, y: &Point) -> Result<Complex64> {
    let d = dist3(x, y);
    if d == 0.0 {
        return Err(Error::InvalidArgument("free kernel is singular at x = y".into()));
    }
    Ok(Complex64::from_polar(1.0 / (4.0 * PI * d), branch.sign() * lambda * d))
}

/// `sin(λ r)/λ`, continuous at λ = 0.
fn sin_over(lambda: f64, r: f64) -> f64 {
    if lambda == 0.0 {
        r
    } else {
        (lambda * r).sin() / lambda
    }
}

/// Angular average of the free kernel between shells of radii `r` and `s`.
pub fn radial_kernel(lambda: f64, branch: BranchSign, r: f64, s: f64) -> Complex64 {
    let (lo, hi) = if r < s { (r, s) } else { (s, r) };
    Complex64::from_polar(sin_over(lambda, lo) / (4.0 * PI * r * s), branch.sign() * lambda * hi)
}

/// Real part of the radial kernel integrated over the shell of node `i`.
fn radial_cell_real(grid: &Grid, i: usize, lambda: f64, rule: &GaussLegendre) -> f64 {
    let r = grid.radius(i);
    let (a, b) = grid.shell_bounds(i);
    let inner = rule.integrate(a, r, |s| (lambda * r).cos() * sin_over(lambda, s) * s / r);
    let outer = rule.integrate(r, b, |s| (lambda * s).cos() * sin_over(lambda, r) * s / r);
    inner + outer
}

fn assemble_columns(n: usize, entry: impl Fn(usize, usize) -> Complex64 + Sync) -> DMatrix<Complex64> {
    let mut data = vec![Complex64::new(0.0, 0.0); n * n];
    data.par_chunks_mut(n).enumerate().for_each(|(j, col)| {
        for (i, c) in col.iter_mut().enumerate() {
            *c = entry(i, j);
        }
    });
    DMatrix::from_vec(n, n, data)
}

/// Diagonal entry of `R₀±(λ²)` at node `i`, weight included.
///
/// Box grids: the λ = 0 ball self-integral for the real part, and the
/// leading `±λ w/(4π)` term of the ball integral of `sin(λ|y|)/(4π|y|)` for
/// the imaginary part, so that plus minus minus is exactly the difference
/// operator. Radial grids: the angularly averaged kernel integrated over the
/// node's own shell.
fn free_diagonal(grid: &Grid, i: usize, lambda: f64, branch: BranchSign, rule: &GaussLegendre) -> Complex64 {
    let w = grid.weight(i);
    match grid.kind() {
        GridKind::Box => Complex64::new(grid.diag_correction()[i], branch.sign() * lambda * w / (4.0 * PI)),
        GridKind::Radial => {
            let r = grid.radius(i);
            let re = if lambda == 0.0 { grid.diag_correction()[i] } else { radial_cell_real(grid, i, lambda, rule) };
            let im = branch.sign() * lambda * sin_over(lambda, r).powi(2) / (4.0 * PI * r * r) * w;
            Complex64::new(re, im)
        }
    }
}

/// Single weighted entry `(R₀±(λ²))_{ij}` of [`assemble_free`].
pub(crate) fn free_entry(grid: &Grid, lambda: f64, branch: BranchSign, i: usize, j: usize, rule: &GaussLegendre) -> Complex64 {
    if i == j {
        return free_diagonal(grid, i, lambda, branch, rule);
    }
    let w = grid.weight(j);
    if grid.is_radial() {
        radial_kernel(lambda, branch, grid.radius(i), grid.radius(j)) * w
    } else {
        let d = dist3(&grid.node(i), &grid.node(j));
        Complex64::from_polar(w / (4.0 * PI * d), branch.sign() * lambda * d)
    }
}

pub fn assemble_free(grid: &Arc<Grid>, lambda: f64, branch: BranchSign) -> Result<ResolventOperator> {
    check_lambda(lambda)?;
    let rule = GaussLegendre::new(8);
    let matrix = assemble_columns(grid.len(), |i, j| free_entry(grid, lambda, branch, i, j, &rule));
    Ok(ResolventOperator { grid: grid.clone(), lambda, branch, matrix, tag: OperatorTag::Free })
}

/// The block of [`assemble_free`] with the given row and column node indices.
pub fn assemble_free_block(grid: &Grid, lambda: f64, branch: BranchSign, rows: &[usize], cols: &[usize]) -> Result<DMatrix<Complex64>> {
    check_lambda(lambda)?;
    let rule = GaussLegendre::new(8);
    Ok(DMatrix::from_fn(rows.len(), cols.len(), |a, b| free_entry(grid, lambda, branch, rows[a], cols[b], &rule)))
}

/// `R₀⁺(λ²) − R₀⁻(λ²)`, kernel `i sin(λ|x−y|)/(2π|x−y|)` (smooth, no correction).
pub fn assemble_difference(grid: &Arc<Grid>, lambda: f64) -> Result<ResolventOperator> {
    check_lambda(lambda)?;
    let nodes = grid.nodes();
    let w = grid.weights();
    let radii = grid.radii();
    let radial = grid.is_radial();
    let matrix = assemble_columns(grid.len(), |i, j| {
        let value = if radial {
            let (r, s) = (radii[i], radii[j]);
            lambda * sin_over(lambda, r) * sin_over(lambda, s) / (2.0 * PI * r * s)
        } else if i == j {
            lambda / (2.0 * PI)
        } else {
            sin_over(lambda, dist3(&nodes[i], &nodes[j])) * lambda / (2.0 * PI * dist3(&nodes[i], &nodes[j]))
        };
        I * value * w[j]
    });
    Ok(ResolventOperator { grid: grid.clone(), lambda, branch: BranchSign::Plus, matrix, tag: OperatorTag::Difference })
}

/// Angular average of `e^{±iλ|x−y|}` between shells `r` and `s`.
fn radial_phase_average(lambda: f64, branch: BranchSign, r: f64, s: f64) -> Complex64 {
    let (lo, hi) = ((r - s).abs(), r + s);
    let k = branch.sign() * lambda;
    if lambda * hi < 0.1 {
        let rule = GaussLegendre::new(8);
        return rule.integrate_complex(lo, hi, |d| Complex64::from_polar(d, k * d)) / (2.0 * r * s);
    }
    // ∫ d e^{ikd} dd = e^{ikd} (d/(ik) + 1/k²)
    let prim = |d: f64| Complex64::from_polar(1.0, k * d) * (Complex64::new(0.0, -d / k) + 1.0 / (k * k));
    (prim(hi) - prim(lo)) / (2.0 * r * s)
}

/// `d/dλ R₀±(λ²)`, kernel `(∓4πi)^{-1} e^{±iλ|x−y|}`.
pub fn assemble_derivative(grid: &Arc<Grid>, lambda: f64, branch: BranchSign) -> Result<ResolventOperator> {
    check_lambda(lambda)?;
    let nodes = grid.nodes();
    let w = grid.weights();
    let radii = grid.radii();
    let radial = grid.is_radial();
    let prefactor = 1.0 / Complex64::new(0.0, -branch.sign() * 4.0 * PI);
    let matrix = assemble_columns(grid.len(), |i, j| {
        let phase = if radial {
            radial_phase_average(lambda, branch, radii[i], radii[j])
        } else {
            Complex64::from_polar(1.0, branch.sign() * lambda * dist3(&nodes[i], &nodes[j]))
        };
        prefactor * phase * w[j]
    });
    Ok(ResolventOperator { grid: grid.clone(), lambda, branch, matrix, tag: OperatorTag::Derivative })
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("λ must be finite and ≥ 0, got {lambda}")))
    }
}

/// Matrix-free `R₀±(λ²) f`, identical to applying [`assemble_free`].
///
/// Radial grids cost O(n) via prefix sums of the separable kernel; box grids
/// are summed directly in O(N²) without storing the matrix.
pub fn apply_free(grid: &Arc<Grid>, lambda: f64, branch: BranchSign, f: &Field) -> Result<Field> {
    check_lambda(lambda)?;
    f.check_grid(grid)?;
    let rule = GaussLegendre::new(8);
    let g = f.values();
    let n = grid.len();
    let w = grid.weights();
    let sign = branch.sign();
    let out: Vec<Complex64> = match grid.kind() {
        GridKind::Radial => {
            let r = grid.radii();
            // below[i] = Σ_{j<i} sin(λ s_j)/λ / s_j · w_j g_j
            let mut below = vec![Complex64::new(0.0, 0.0); n];
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                below[j] = acc;
                acc += g[j] * (sin_over(lambda, r[j]) / r[j] * w[j]);
            }
            // above[i] = Σ_{j>i} e^{±iλ s_j} / s_j · w_j g_j
            let mut above = vec![Complex64::new(0.0, 0.0); n];
            let mut acc = Complex64::new(0.0, 0.0);
            for j in (0..n).rev() {
                above[j] = acc;
                acc += g[j] * Complex64::from_polar(w[j] / r[j], sign * lambda * r[j]);
            }
            (0..n)
                .map(|i| {
                    let far = below[i] * Complex64::from_polar(1.0, sign * lambda * r[i]) + above[i] * sin_over(lambda, r[i]);
                    far / (4.0 * PI * r[i]) + free_diagonal(grid, i, lambda, branch, &rule) * g[i]
                })
                .collect()
        }
        GridKind::Box => {
            let nodes = grid.nodes();
            let support: Vec<usize> = (0..n).filter(|&j| g[j] != Complex64::new(0.0, 0.0)).collect();
            (0..n)
                .into_par_iter()
                .map(|i| {
                    support
                        .iter()
                        .map(|&j| {
                            if i == j {
                                free_diagonal(grid, i, lambda, branch, &rule) * g[j]
                            } else {
                                let d = dist3(&nodes[i], &nodes[j]);
                                g[j] * Complex64::from_polar(w[j] / (4.0 * PI * d), sign * lambda * d)
                            }
                        })
                        .sum()
                })
                .collect()
        }
    };
    Ok(f.with_values(DVector::from_vec(out)))
}

/// `R₀(z)` for complex energy `z` off the real axis (`Im √z > 0`), box grids
/// only; the self-cell uses the exact ball integral `∫₀^R e^{ikr} r dr`.
pub fn apply_free_complex(grid: &Arc<Grid>, z: Complex64, f: &Field) -> Result<Field> {
    if grid.is_radial() {
        return Err(Error::InvalidArgument("complex-energy resolvent is implemented on box grids".into()));
    }
    f.check_grid(grid)?;
    let mut k = z.sqrt();
    if k.im < 0.0 {
        k = -k;
    }
    let nodes = grid.nodes();
    let w = grid.weights();
    let g = f.values();
    let n = grid.len();
    let r_eq = (3.0 * w[0] / (4.0 * PI)).cbrt();
    let diag = if k.norm() * r_eq < 1e-6 {
        Complex64::new(r_eq * r_eq / 2.0, 0.0)
    } else {
        let e = (I * k * r_eq).exp();
        e * (Complex64::new(r_eq, 0.0) / (I * k) + 1.0 / (k * k)) - 1.0 / (k * k)
    };
    let support: Vec<usize> = (0..n).filter(|&j| g[j] != Complex64::new(0.0, 0.0)).collect();
    let out: Vec<Complex64> = (0..n)
        .into_par_iter()
        .map(|i| {
            support
                .iter()
                .map(|&j| {
                    if i == j {
                        diag * g[j]
                    } else {
                        let d = dist3(&nodes[i], &nodes[j]);
                        g[j] * (I * k * d).exp() * (w[j] / (4.0 * PI * d))
                    }
                })
                .sum()
        })
        .collect();
    Ok(f.with_values(DVector::from_vec(out)))
}

/// 7-point `−Δ_h u` at interior nodes of a box grid (`None` on the boundary layer).
pub fn box_laplacian(grid: &Grid, u: &DVector<Complex64>) -> Result<Vec<Option<Complex64>>> {
    if grid.is_radial() {
        return Err(Error::InvalidArgument("box Laplacian needs a box grid".into()));
    }
    let n = grid.n_per_axis();
    let h2 = grid.spacing().powi(2);
    let mut out = vec![None; grid.len()];
    for ix in 1..n - 1 {
        for iy in 1..n - 1 {
            for iz in 1..n - 1 {
                let c = grid.box_index(ix, iy, iz);
                let nb = [
                    grid.box_index(ix - 1, iy, iz),
                    grid.box_index(ix + 1, iy, iz),
                    grid.box_index(ix, iy - 1, iz),
                    grid.box_index(ix, iy + 1, iz),
                    grid.box_index(ix, iy, iz - 1),
                    grid.box_index(ix, iy, iz + 1),
                ];
                let sum: Complex64 = nb.iter().map(|&k| u[k]).sum();
                out[c] = Some((u[c] * 6.0 - sum) / h2);
            }
        }
    }
    Ok(out)
}

/// Centred Gaussians `e^{−|x|²/σ²}` for the listed widths.
pub fn gaussian_probes(grid: &Arc<Grid>, widths: &[f64]) -> Vec<Field> {
    widths
        .iter()
        .map(|&s| Field::from_radial_fn(grid, |r| Complex64::new((-(r * r) / (s * s)).exp(), 0.0)))
        .collect()
}

/// `n` widths spaced geometrically between `lo` and `hi`.
pub fn geometric_widths(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect()
}

/// `max_f ‖R₀±(λ²) f‖_{L^{3p}} / ‖f‖_{L^p}` over the probes: a lower bound on
/// the mapping norm, never a certified value.
pub fn mapping_norm_probe(grid: &Arc<Grid>, lambda: f64, branch: BranchSign, p: f64, probes: &[Field]) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidExponent(p));
    }
    if !(p > 1.0 && p <= 4.0 / 3.0) {
        return Err(Error::InvalidArgument(format!("mapping-norm probe needs 1 < p ≤ 4/3, got {p}")));
    }
    probe_max(probes, |f| {
        let u = apply_free(grid, lambda, branch, f)?;
        Ok(lp_norm(&u, 3.0 * p)? / lp_norm(f, p)?)
    })
}

/// The `p = 1` endpoint: `max_f ‖R₀±(λ²) f‖_{L³_weak} / ‖f‖_{L¹}`.
pub fn weak_mapping_probe(grid: &Arc<Grid>, lambda: f64, branch: BranchSign, probes: &[Field]) -> Result<f64> {
    probe_max(probes, |f| {
        let u = apply_free(grid, lambda, branch, f)?;
        Ok(weak_l3_norm(&u) / f.l1())
    })
}

fn probe_max(probes: &[Field], ratio: impl Fn(&Field) -> Result<f64>) -> Result<f64> {
    let mut best: Option<f64> = None;
    for f in probes {
        if f.l1() == 0.0 {
            continue;
        }
        let r = ratio(f)?;
        best = Some(best.map_or(r, |b| b.max(r)));
    }
    best.ok_or(Error::EmptyProbeSet)
}

/// `Im⟨R₀±(λ²) g, g⟩`: non-negative on the plus branch, negated on minus.
pub fn restriction_positivity_check(grid: &Arc<Grid>, lambda: f64, branch: BranchSign, g: &Field) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("restriction check needs λ > 0, got {lambda}")));
    }
    let u = apply_free(grid, lambda, branch, g)?;
    Ok(u.inner(g).im)
}
