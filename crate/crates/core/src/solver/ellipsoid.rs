//! Central-cut ellipsoid method state and update.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which kind of cut drives an update. Both use the same formula; the
/// distinction is kept for diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CutKind {
    /// Subgradient of the dual objective at a feasible center.
    Objective,
    /// Gradient of a violated feasibility constraint.
    Constraint,
}

/// Ellipsoid `{x : (x - c)' P^{-1} (x - c) <= 1}`.
///
/// The shape is carried as a factor `P = L L'` and updated in that form,
/// which keeps it positive definite through thousands of cuts.
#[derive(Clone, Debug, PartialEq)]
pub struct EllipsoidState {
    pub center: DVector<f64>,
    pub shape: DMatrix<f64>,
    factor: DMatrix<f64>,
    pub iteration: usize,
}

impl EllipsoidState {
    /// Ball of radius `radius` around `center`.
    pub fn ball(center: &[f64], radius: f64) -> Self {
        let q = center.len();
        Self {
            center: DVector::from_column_slice(center),
            shape: DMatrix::identity(q, q) * (radius * radius),
            factor: DMatrix::identity(q, q) * radius,
            iteration: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `sqrt(g' P g)`: half-width of the ellipsoid along `g`, scaled by `|g|`.
    pub fn cut_width(&self, g: &DVector<f64>) -> f64 {
        self.factor.tr_mul(g).norm()
    }

    /// True when the shape matrix admits a Cholesky factorization.
    pub fn is_positive_definite(&self) -> bool {
        self.shape.clone().cholesky().is_some()
    }
}

/// Closed-form volume ratio of one central-cut step in dimension `q`.
pub fn volume_ratio(q: usize) -> f64 {
    let q = q as f64;
    (q / (q + 1.0)) * (q * q / (q * q - 1.0)).powf((q - 1.0) / 2.0)
}

/// Keeps the half-ellipsoid `{x : g'(x - c) <= 0}` and returns the minimum
/// volume ellipsoid containing it.
pub fn ellipsoid_step(
    state: &EllipsoidState,
    cut: &DVector<f64>,
    _kind: CutKind,
) -> Result<EllipsoidState> {
    let q = state.dim() as f64;
    // In factored coordinates the cut is a unit vector u and the update is
    // L' = s L (I - gamma u u'), with (1 - gamma)^2 = 1 - 2 / (q + 1).
    let v = state.factor.tr_mul(cut);
    let width = v.norm();
    if !(width > 0.0) || !width.is_finite() {
        return Err(Error::DegenerateCut(width * width));
    }
    let u = v / width;
    let lu = &state.factor * &u;
    let center = &state.center - &lu * (1.0 / (q + 1.0));
    let gamma = 1.0 - ((q - 1.0) / (q + 1.0)).sqrt();
    let scale = q / (q * q - 1.0).sqrt();
    let factor = (&state.factor - (&lu * u.transpose()) * gamma) * scale;
    let shape = &factor * factor.transpose();
    Ok(EllipsoidState {
        center,
        shape,
        factor,
        iteration: state.iteration + 1,
    })
}
