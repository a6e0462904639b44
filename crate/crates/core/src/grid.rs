//! Spatial discretization: tensor box grids and radial shell grids, their
//! quadrature weights, and the self-cell correction for the `1/|x-y|`
//! singularity that every resolvent assembly relies on.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Point = [f64; 3];

pub fn norm3(x: &Point) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

pub fn dist3(x: &Point, y: &Point) -> f64 {
    let d = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
    norm3(&d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridKind {
    Box,
    Radial,
}

impl GridKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            GridKind::Box => "box",
            GridKind::Radial => "radial",
        }
    }
}

/// Serializable description of a grid: `kind`, `extent` and `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub kind: GridKind,
    /// Half-width for box grids, maximal radius for radial grids.
    pub extent: f64,
    /// Nodes per axis (box) or number of shells (radial).
    pub n: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        match self.kind {
            GridKind::Box => build_box_grid(self.extent, self.n),
            GridKind::Radial => build_radial_grid(self.extent, self.n),
        }
    }

    /// Plain-text block, one `key = value` per line.
    pub fn to_block(&self) -> String {
        format!(
            "[grid]\nkind = {}\nextent = {}\nn = {}\n",
            self.kind.as_str(),
            self.extent,
            self.n
        )
    }

    pub fn parse_block(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut extent = None;
        let mut n = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line == "[grid]" {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidGrid(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let value = value.trim().trim_matches('"');
            let bad = |what: &str| Error::InvalidGrid(format!("line {}: bad {what}", lineno + 1));
            match key.trim() {
                "kind" => {
                    kind = Some(match value {
                        "box" => GridKind::Box,
                        "radial" => GridKind::Radial,
                        _ => return Err(bad("kind")),
                    })
                }
                "extent" => extent = Some(value.parse::<f64>().map_err(|_| bad("extent"))?),
                "n" => n = Some(value.parse::<usize>().map_err(|_| bad("n"))?),
                other => {
                    return Err(Error::InvalidGrid(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            }
        }
        Ok(GridSpec {
            kind: kind.ok_or_else(|| Error::InvalidGrid("missing kind".into()))?,
            extent: extent.ok_or_else(|| Error::InvalidGrid("missing extent".into()))?,
            n: n.ok_or_else(|| Error::InvalidGrid("missing n".into()))?,
        })
    }
}

/// Immutable sample nodes with quadrature weights.
///
/// Radial grids store shell radii `r_i = (i + 1/2) h`; the associated point is
/// `(r_i, 0, 0)` and every function carried by the grid is understood as its
/// rotation-invariant extension.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    spec: GridSpec,
    spacing: f64,
    nodes: Vec<Point>,
    radii: Vec<f64>,
    weights: Vec<f64>,
    diag_correction: Vec<f64>,
}

/// Self-integral `∫_{|y|<r} dy / (4π|y|) = r²/2` of a ball with the given volume.
pub fn ball_self_integral(volume: f64) -> f64 {
    let r_eq = (3.0 * volume / (4.0 * PI)).cbrt();
    0.5 * r_eq * r_eq
}

/// Exact `∫_{shell} 4π s² / (4π max(r, s)) ds` over `[a, b] ∋ r`.
fn shell_self_integral(r: f64, a: f64, b: f64) -> f64 {
    (r.powi(3) - a.powi(3)) / (3.0 * r) + 0.5 * (b * b - r * r)
}

pub fn build_box_grid(half_width: f64, n_per_axis: usize) -> Result<Grid> {
    if !(half_width > 0.0) || !half_width.is_finite() {
        return Err(Error::InvalidGrid(format!("half_width must be positive, got {half_width}")));
    }
    if n_per_axis < 2 {
        return Err(Error::InvalidGrid(format!("n_per_axis must be at least 2, got {n_per_axis}")));
    }
    let h = 2.0 * half_width / n_per_axis as f64;
    let cell = h * h * h;
    let coord = |i: usize| -half_width + (i as f64 + 0.5) * h;
    let total = n_per_axis.pow(3);
    let mut nodes = Vec::with_capacity(total);
    for ix in 0..n_per_axis {
        for iy in 0..n_per_axis {
            for iz in 0..n_per_axis {
                nodes.push([coord(ix), coord(iy), coord(iz)]);
            }
        }
    }
    let radii = nodes.iter().map(norm3).collect();
    Ok(Grid {
        spec: GridSpec { kind: GridKind::Box, extent: half_width, n: n_per_axis },
        spacing: h,
        nodes,
        radii,
        weights: vec![cell; total],
        diag_correction: vec![ball_self_integral(cell); total],
    })
}

pub fn build_radial_grid(r_max: f64, n: usize) -> Result<Grid> {
    if !(r_max > 0.0) || !r_max.is_finite() {
        return Err(Error::InvalidGrid(format!("r_max must be positive, got {r_max}")));
    }
    if n < 2 {
        return Err(Error::InvalidGrid(format!("radial grid needs at least 2 shells, got {n}")));
    }
    let h = r_max / n as f64;
    let radii: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
    let weights = radii.iter().map(|r| 4.0 * PI * r * r * h).collect();
    let diag_correction = radii
        .iter()
        .map(|&r| shell_self_integral(r, r - 0.5 * h, r + 0.5 * h))
        .collect();
    Ok(Grid {
        spec: GridSpec { kind: GridKind::Radial, extent: r_max, n },
        spacing: h,
        nodes: radii.iter().map(|&r| [r, 0.0, 0.0]).collect(),
        radii,
        weights,
        diag_correction,
    })
}

impl Grid {
    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn kind(&self) -> GridKind {
        self.spec.kind
    }

    pub fn is_radial(&self) -> bool {
        self.spec.kind == GridKind::Radial
    }

    pub fn extent(&self) -> f64 {
        self.spec.extent
    }

    /// Node count.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Cell size (box) or shell thickness (radial).
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn n_per_axis(&self) -> usize {
        self.spec.n
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> Point {
        self.nodes[i]
    }

    /// Distance of node `i` from the origin.
    pub fn radius(&self, i: usize) -> f64 {
        self.radii[i]
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn diag_correction(&self) -> &[f64] {
        &self.diag_correction
    }

    /// Volume of the covered region: the cube, or the ball of radius `r_max`.
    pub fn volume(&self) -> f64 {
        match self.kind() {
            GridKind::Box => (2.0 * self.extent()).powi(3),
            GridKind::Radial => 4.0 * PI / 3.0 * self.extent().powi(3),
        }
    }

    /// Linear index of box node `(ix, iy, iz)`.
    pub fn box_index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        let n = self.spec.n;
        (ix * n + iy) * n + iz
    }

    pub fn shell_bounds(&self, i: usize) -> (f64, f64) {
        let r = self.radii[i];
        (r - 0.5 * self.spacing, r + 0.5 * self.spacing)
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        std::ptr::eq(self, other) || self.spec == other.spec
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} grid (extent {}, n {}, {} nodes)", self.kind().as_str(), self.extent(), self.spec.n, self.len())
    }
}

/// Complex samples on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<Grid>,
    values: DVector<Complex64>,
}

impl Field {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Field { grid: grid.clone(), values: DVector::zeros(grid.len()) }
    }

    pub fn from_values(grid: &Arc<Grid>, values: DVector<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Field { grid: grid.clone(), values })
    }

    pub fn from_real(grid: &Arc<Grid>, values: &[f64]) -> Result<Self> {
        Self::from_values(grid, DVector::from_iterator(values.len(), values.iter().map(|&v| Complex64::new(v, 0.0))))
    }

    /// Samples a function of `|x|`; valid on both grid kinds.
    pub fn from_radial_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> Complex64) -> Self {
        let values = DVector::from_iterator(grid.len(), grid.radii().iter().map(|&r| f(r)));
        Field { grid: grid.clone(), values }
    }

    /// Samples a function of the point. On radial grids the function is probed
    /// along several directions and rejected if it is not rotation invariant.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(&Point) -> Complex64) -> Result<Self> {
        if grid.is_radial() {
            let s = 1.0 / 3f64.sqrt();
            for &r in grid.radii() {
                let reference = f(&[r, 0.0, 0.0]);
                let scale = reference.norm().max(1e-300);
                for probe in [[0.0, r, 0.0], [0.0, 0.0, r], [-r, 0.0, 0.0], [r * s, r * s, r * s]] {
                    if (f(&probe) - reference).norm() > 1e-12 * scale.max(1.0) {
                        return Err(Error::NotRadial);
                    }
                }
            }
        }
        let values = DVector::from_iterator(grid.len(), grid.nodes().iter().map(&f));
        Ok(Field { grid: grid.clone(), values })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &DVector<Complex64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut DVector<Complex64> {
        &mut self.values
    }

    pub fn into_values(self) -> DVector<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn with_values(&self, values: DVector<Complex64>) -> Field {
        debug_assert_eq!(values.len(), self.grid.len());
        Field { grid: self.grid.clone(), values }
    }

    pub fn conj(&self) -> Field {
        self.with_values(self.values.map(|z| z.conj()))
    }

    pub fn scale(&self, s: Complex64) -> Field {
        self.with_values(self.values.map(|z| z * s))
    }

    pub fn l1(&self) -> f64 {
        self.grid.weights().iter().zip(self.values.iter()).map(|(w, z)| w * z.norm()).sum()
    }

    pub fn l2(&self) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(self.values.iter())
            .map(|(w, z)| w * z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Quadrature pairing `Σ w_i u_i conj(v_i)`.
    pub fn inner(&self, other: &Field) -> Complex64 {
        inner_weighted(self.grid.weights(), &self.values, &other.values)
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.grid.same_as(grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("field lives on {}, expected {}", self.grid, grid)))
        }
    }
}

pub(crate) fn inner_weighted(weights: &[f64], u: &DVector<Complex64>, v: &DVector<Complex64>) -> Complex64 {
    weights
        .iter()
        .zip(u.iter().zip(v.iter()))
        .map(|(w, (a, b))| a * b.conj() * *w)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_per_axis_box() {
        let g = build_box_grid(1.0, 2).unwrap();
        assert_eq!(g.len(), 8);
        assert!(g.weights().iter().all(|&w| (w - 1.0).abs() < 1e-15));
        assert_relative_eq!(g.weights().iter().sum::<f64>(), 8.0, max_relative = 1e-12);
    }

    #[test]
    fn unit_cell_ball_correction() {
        // cell volume 1 -> r_eq = (3/4π)^{1/3}
        let g = build_box_grid(1.0, 2).unwrap();
        let r_eq = (3.0 / (4.0 * PI)).cbrt();
        assert_relative_eq!(r_eq, 0.6204, epsilon = 1e-4);
        assert_relative_eq!(g.diag_correction()[0], 0.5 * r_eq * r_eq, max_relative = 1e-14);
        assert_relative_eq!(g.diag_correction()[0], 0.1924, epsilon = 1e-4);
    }

    #[test]
    fn degenerate_grids_rejected() {
        assert!(build_box_grid(1.0, 1).is_err());
        assert!(build_box_grid(0.0, 4).is_err());
        assert!(build_box_grid(-1.0, 4).is_err());
        assert!(build_radial_grid(0.0, 10).is_err());
        assert!(build_radial_grid(1.0, 1).is_err());
    }

    #[test]
    fn radial_volume() {
        let g = build_radial_grid(1.0, 100).unwrap();
        assert_relative_eq!(g.weights().iter().sum::<f64>(), 4.0 * PI / 3.0, max_relative = 1e-3);
        let g = build_radial_grid(2.0, 2).unwrap();
        assert_eq!(g.len(), 2);
        assert!(g.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn box_volume_exact() {
        for (hw, n) in [(1.0, 3), (2.5, 7), (0.3, 10)] {
            let g = build_box_grid(hw, n).unwrap();
            assert_relative_eq!(g.weights().iter().sum::<f64>(), g.volume(), max_relative = 1e-12);
            assert!(g.diag_correction().iter().all(|&d| d > 0.0));
        }
    }

    #[test]
    fn radial_shell_correction_positive_and_close_to_midpoint() {
        let g = build_radial_grid(3.0, 50).unwrap();
        let h = g.spacing();
        for i in 0..g.len() {
            let r = g.radius(i);
            let d = g.diag_correction()[i];
            assert!(d > 0.0);
            // midpoint value r h, shifted by the kink term -h²/8
            assert_relative_eq!(d, r * h - h * h / 8.0 + h.powi(3) / (24.0 * r), max_relative = 1e-12);
        }
    }

    #[test]
    fn gaussian_quadrature_converges() {
        let exact = PI.powf(1.5);
        let mut errors = Vec::new();
        for n in [4, 8, 16] {
            let g = Arc::new(build_box_grid(5.0, n).unwrap());
            let f = Field::from_radial_fn(&g, |r| Complex64::new((-r * r).exp(), 0.0));
            errors.push((f.values().iter().zip(g.weights()).map(|(v, w)| v.re * w).sum::<f64>() - exact).abs());
        }
        for pair in errors.windows(2) {
            let order = (pair[0] / pair[1]).log2();
            assert!(order >= 1.0, "observed order {order}");
        }
    }

    #[test]
    fn non_radial_field_rejected() {
        let g = Arc::new(build_radial_grid(1.0, 10).unwrap());
        assert_eq!(Field::from_fn(&g, |x| Complex64::new(x[0], 0.0)), Err(Error::NotRadial));
        assert!(Field::from_fn(&g, |x| Complex64::new(norm3(x), 0.0)).is_ok());
    }

    #[test]
    fn spec_block_round_trip() {
        let spec = GridSpec { kind: GridKind::Radial, extent: 2.5, n: 400 };
        assert_eq!(GridSpec::parse_block(&spec.to_block()).unwrap(), spec);
        assert!(GridSpec::parse_block("kind = box\nextent = 1\nn = 3\ncolour = red").is_err());
    }
}
