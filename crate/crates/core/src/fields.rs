//! Design fields, density filtering, Heaviside projection and SIMP
//! material interpolation, together with their exact derivatives.

use crate::error::Error;
use crate::grid::StructuredGrid;
use crate::solver::CsrMatrix;
use serde::{Deserialize, Serialize};

/// Role of one element in the optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Designable,
    /// Pinned at density 1 (non-design solid).
    ForcedSolid,
    /// Pinned at density 0 (non-design void).
    ForcedVoid,
}

impl Role {
    pub fn pinned_value(self) -> Option<f64> {
        match self {
            Role::Designable => None,
            Role::ForcedSolid => Some(1.0),
            Role::ForcedVoid => Some(0.0),
        }
    }
}

/// Per-element design variables with non-design bookkeeping.
#[derive(Debug, Clone)]
pub struct DesignField {
    values: Vec<f64>,
    roles: Vec<Role>,
}

impl DesignField {
    pub fn uniform(num_elements: usize, value: f64) -> Result<Self, Error> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidParameter(format!("design value {value} outside [0,1]")));
        }
        Ok(Self { values: vec![value; num_elements], roles: vec![Role::Designable; num_elements] })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn role(&self, e: usize) -> Role {
        self.roles[e]
    }

    /// Pin an element's role; forced roles also pin the value.
    pub fn set_role(&mut self, e: usize, role: Role) {
        self.roles[e] = role;
        if let Some(v) = role.pinned_value() {
            self.values[e] = v;
        }
    }

    /// Overwrite the designable entries; forced entries are left pinned.
    pub fn set_designable_values(&mut self, new_values: &[f64]) -> Result<(), Error> {
        if new_values.len() != self.values.len() {
            return Err(Error::SizeMismatch {
                expected: self.values.len(),
                got: new_values.len(),
                what: "design values",
            });
        }
        for (e, &v) in new_values.iter().enumerate() {
            if self.roles[e] == Role::Designable {
                if !(-1e-12..=1.0 + 1e-12).contains(&v) {
                    return Err(Error::InvalidParameter(format!(
                        "design value {v} at element {e} outside [0,1]"
                    )));
                }
                self.values[e] = v.clamp(0.0, 1.0);
            }
        }
        Ok(())
    }

    pub fn designable_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&e| self.roles[e] == Role::Designable).collect()
    }

    pub fn num_designable(&self) -> usize {
        self.roles.iter().filter(|r| **r == Role::Designable).count()
    }

    /// Re-pin forced entries of an arbitrary per-element vector.
    pub fn clamp_to_roles(&self, values: &mut [f64]) {
        for (e, role) in self.roles.iter().enumerate() {
            if let Some(v) = role.pinned_value() {
                values[e] = v;
            }
        }
    }

    /// Zero the forced entries of a per-element sensitivity vector.
    pub fn zero_forced(&self, values: &mut [f64]) {
        for (e, role) in self.roles.iter().enumerate() {
            if *role != Role::Designable {
                values[e] = 0.0;
            }
        }
    }
}

/// Row-normalized volume-weighted cone filter over element centers.
///
/// Row i holds `w_ij v_j / sum_k w_ik v_k` with
/// `w_ij = max(0, 1 - ||x_i - x_j|| / radius)`.
#[derive(Debug, Clone)]
pub struct FilterOperator {
    weights: CsrMatrix,
    weights_t: CsrMatrix,
    radius: f64,
}

impl FilterOperator {
    pub fn build(grid: &StructuredGrid, radius: f64) -> Result<Self, Error> {
        if radius <= 0.0 {
            return Err(Error::InvalidParameter(format!("filter radius {radius} must be > 0")));
        }
        let [dx, dy, dz] = grid.element_size();
        let [nelx, nely, nelz] = grid.num_elements_per_axis();
        let nelz = nelz.max(1);
        let reach = |d: f64| if d > 0.0 { (radius / d).ceil() as isize } else { 0 };
        let (rx, ry, rz) = (reach(dx), reach(dy), if grid.is_2d() { 0 } else { reach(dz) });

        let ne = grid.num_elements();
        // Element volumes are all equal on a structured grid, but keep the
        // volume weighting explicit to mirror the filter definition.
        let v = grid.element_volume();
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        for e in 0..ne {
            let [i, j, k] = grid.element_coords_of(e);
            let mut row: Vec<(usize, f64)> = Vec::new();
            let mut total = 0.0;
            for dk in -rz..=rz {
                let kk = k as isize + dk;
                if kk < 0 || kk >= nelz as isize {
                    continue;
                }
                for dj in -ry..=ry {
                    let jj = j as isize + dj;
                    if jj < 0 || jj >= nely as isize {
                        continue;
                    }
                    for di in -rx..=rx {
                        let ii = i as isize + di;
                        if ii < 0 || ii >= nelx as isize {
                            continue;
                        }
                        let dist = ((di as f64 * dx).powi(2)
                            + (dj as f64 * dy).powi(2)
                            + (dk as f64 * dz).powi(2))
                        .sqrt();
                        let w = 1.0 - dist / radius;
                        if w > 0.0 {
                            let n = grid.element_index(ii as usize, jj as usize, kk as usize);
                            row.push((n, w * v));
                            total += w * v;
                        }
                    }
                }
            }
            for (n, w) in row {
                triplets.push((e, n, w / total));
            }
        }
        let weights = CsrMatrix::from_triplets(ne, ne, &triplets);
        let weights_t = weights.transpose();
        Ok(Self { weights, weights_t, radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.weights
    }

    /// Physical densities: filtered design variables with forced regions
    /// re-pinned afterwards.
    pub fn apply(&self, rho: &DesignField) -> Result<Vec<f64>, Error> {
        if rho.len() != self.weights.n_rows() {
            return Err(Error::SizeMismatch {
                expected: self.weights.n_rows(),
                got: rho.len(),
                what: "design field",
            });
        }
        let mut tilde = self.weights.mul_vec(rho.values());
        rho.clamp_to_roles(&mut tilde);
        Ok(tilde)
    }

    /// Chain rule d/d(rho) of a sensitivity given w.r.t. the filtered field:
    /// the exact transpose of [`FilterOperator::apply`], with forced-element
    /// entries zeroed.
    pub fn chain_rule(&self, rho: &DesignField, df_dtilde: &[f64]) -> Result<Vec<f64>, Error> {
        if df_dtilde.len() != self.weights.n_rows() {
            return Err(Error::SizeMismatch {
                expected: self.weights.n_rows(),
                got: df_dtilde.len(),
                what: "sensitivity field",
            });
        }
        // Forced elements do not move, so their filtered contribution is
        // design-independent: drop it before the transpose.
        let mut masked = df_dtilde.to_vec();
        rho.zero_forced(&mut masked);
        let mut out = self.weights_t.mul_vec(&masked);
        rho.zero_forced(&mut out);
        Ok(out)
    }
}

/// Smooth (tanh-based) Heaviside projection with `H(0) = 0` and `H(1) = 1`
/// exactly by construction.
pub fn heaviside(rho_tilde: f64, eta: f64, beta: f64) -> f64 {
    let denom = (beta * eta).tanh() + (beta * (1.0 - eta)).tanh();
    ((beta * eta).tanh() + (beta * (rho_tilde - eta)).tanh()) / denom
}

/// Analytic derivative of [`heaviside`] with respect to the density.
pub fn heaviside_derivative(rho_tilde: f64, eta: f64, beta: f64) -> f64 {
    let denom = (beta * eta).tanh() + (beta * (1.0 - eta)).tanh();
    let t = (beta * (rho_tilde - eta)).tanh();
    beta * (1.0 - t * t) / denom
}

/// Modified SIMP interpolation `E = E0 + rho^zeta (E1 - E0)` and its
/// density derivative.
pub fn simp_modulus(rho_tilde: f64, e0: f64, e1: f64, zeta: f64) -> (f64, f64) {
    let de = e1 - e0;
    let e = e0 + rho_tilde.powf(zeta) * de;
    let d = if zeta == 1.0 { de } else { zeta * rho_tilde.powf(zeta - 1.0) * de };
    (e, d)
}
