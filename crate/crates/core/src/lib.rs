//! Discretized free and perturbed resolvents for `H = -Δ + V` on `R³`,
//! Born-series terms, Birman-Schwinger inversion and dispersive-decay
//! measurement of `e^{itH} P_ac`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod birman_schwinger;
pub mod born;
pub mod error;
pub mod free_resolvent;
pub mod grid;
pub mod potential;
pub mod propagator;
pub mod quadrature;

pub use error::{Error, Result};
pub use grid::{build_box_grid, build_radial_grid, Field, Grid, GridKind, GridSpec, Point};
pub use potential::{class_audit, kato_norm, lp_norm, translate, weighted_norm, NormDescriptor, Potential, Shape};
