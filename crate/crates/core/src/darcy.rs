//! Design-dependent pressure field via a Darcy-type flow problem with a
//! drainage term, and its conversion into consistent nodal loads.
//!
//! Each element carries a flow coefficient `K` interpolated between void
//! and solid values through a smooth Heaviside of the physical density, and
//! a drainage coefficient `D` that bleeds pressure out of solid elements so
//! the pressure drop concentrates in a thin layer at the loaded boundary.
//! Assembling `int(K B' B + D N' N)` and solving `A p = 0` under prescribed
//! inlet/outlet pressures yields the pressure field; the design-independent
//! transformation matrix turns it into nodal forces `F = -D_T p`.

use crate::error::Error;
use crate::fields::{heaviside, heaviside_derivative};
use crate::grid::{DofPartition, StructuredGrid};
use crate::solver::{pcg, CsrMatrix, IncompleteCholesky, SolveOpts, SolveStats};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Parameters of the flow and drainage interpolation.
///
/// `drain_solid()` derives the solid drainage coefficient from the
/// requirement that the pressure inside solid material decays to the
/// fraction `remainder` of the input pressure over the depth `delta_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowParams {
    /// Void flow coefficient K_v (m^4 / (N s)).
    pub k_v: f64,
    /// Flow contrast: K_solid / K_void.
    pub epsilon: f64,
    /// Step location of the flow Heaviside.
    pub eta_k: f64,
    /// Step slope of the flow Heaviside.
    pub beta_k: f64,
    /// Step location of the drainage Heaviside.
    pub eta_d: f64,
    /// Step slope of the drainage Heaviside.
    pub beta_d: f64,
    /// Fraction of the input pressure remaining at depth `delta_s`.
    pub remainder: f64,
    /// Pressure penetration depth into solid material (m).
    pub delta_s: f64,
    /// External (drain-to) pressure; zero throughout this crate.
    pub p_ext: f64,
    /// Switch for the drainage term; disabling reproduces the pure Darcy
    /// behavior where the pressure drop spreads over all solid material.
    #[serde(default = "default_true")]
    pub drainage: bool,
}

fn default_true() -> bool {
    true
}

impl FlowParams {
    pub fn validate(&self) -> Result<(), Error> {
        if self.k_v <= 0.0 {
            return Err(Error::InvalidParameter("k_v must be > 0".into()));
        }
        if !(0.0 < self.epsilon && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "flow contrast epsilon {} must be in (0,1)",
                self.epsilon
            )));
        }
        if !(0.0 < self.remainder && self.remainder < 1.0) {
            return Err(Error::InvalidParameter("remainder must be in (0,1)".into()));
        }
        if self.delta_s <= 0.0 {
            return Err(Error::InvalidParameter("delta_s must be > 0".into()));
        }
        if self.beta_k <= 0.0 || self.beta_d <= 0.0 {
            return Err(Error::InvalidParameter("Heaviside slopes must be > 0".into()));
        }
        for (name, eta) in [("eta_k", self.eta_k), ("eta_d", self.eta_d)] {
            if !(0.0 < eta && eta < 1.0) {
                return Err(Error::InvalidParameter(format!("{name} must be in (0,1)")));
            }
        }
        Ok(())
    }

    /// Solid flow coefficient K_s = epsilon * K_v.
    pub fn k_solid(&self) -> f64 {
        self.epsilon * self.k_v
    }

    /// Solid drainage coefficient d_s = (ln r / delta_s)^2 K_s.
    pub fn drain_solid(&self) -> f64 {
        let decay = self.remainder.ln() / self.delta_s;
        decay * decay * self.k_solid()
    }

    /// Flow coefficient K(rho) and its density derivative.
    ///
    /// Evaluated in the convex-combination form `K_v + (K_s - K_v) H`,
    /// algebraically identical to `K_v (1 - (1 - eps) H)` but exact at the
    /// endpoints where the subtraction form loses the tiny K_s to rounding.
    pub fn flow_coefficient(&self, rho_tilde: f64) -> (f64, f64) {
        let h = heaviside(rho_tilde, self.eta_k, self.beta_k);
        let dh = heaviside_derivative(rho_tilde, self.eta_k, self.beta_k);
        let span = self.k_solid() - self.k_v;
        (self.k_v + span * h, span * dh)
    }

    /// Drainage coefficient D(rho) and its density derivative.
    pub fn drainage_coefficient(&self, rho_tilde: f64) -> (f64, f64) {
        if !self.drainage {
            return (0.0, 0.0);
        }
        let ds = self.drain_solid();
        let h = heaviside(rho_tilde, self.eta_d, self.beta_d);
        let dh = heaviside_derivative(rho_tilde, self.eta_d, self.beta_d);
        (ds * h, ds * dh)
    }
}

/// Unit conductivity matrix: `int B_p' B_p` over one element (K = 1).
pub fn unit_conductivity_matrix(grid: &StructuredGrid) -> DMatrix<f64> {
    let npe = grid.nodes_per_element();
    let dim = grid.dim();
    let det = grid.jacobian_det();
    let mut a = DMatrix::zeros(npe, npe);
    for (pt, w) in grid.gauss_points() {
        let b = grid.shape_gradients(pt);
        for i in 0..npe {
            for j in 0..npe {
                let mut s = 0.0;
                for d in 0..dim {
                    s += b[d * npe + i] * b[d * npe + j];
                }
                a[(i, j)] += w * det * s;
            }
        }
    }
    a
}

/// Unit mass matrix: `int N_p' N_p` over one element (D = 1).
pub fn unit_pressure_mass_matrix(grid: &StructuredGrid) -> DMatrix<f64> {
    let npe = grid.nodes_per_element();
    let det = grid.jacobian_det();
    let mut a = DMatrix::zeros(npe, npe);
    for (pt, w) in grid.gauss_points() {
        let n = grid.shape_values(pt);
        for i in 0..npe {
            for j in 0..npe {
                // Symmetric product first: keeps the matrix bitwise symmetric.
                a[(i, j)] += w * det * (n[i] * n[j]);
            }
        }
    }
    a
}

/// Element flow matrix `K_e * A_cond + D_e * A_mass` from the cached split,
/// so design derivatives need no re-integration.
pub fn element_flow_matrix(
    k_e: f64,
    d_e: f64,
    a_cond: &DMatrix<f64>,
    a_mass: &DMatrix<f64>,
) -> DMatrix<f64> {
    a_cond * k_e + a_mass * d_e
}

/// Assembled Darcy system for one grid and one set of prescribed pressures.
///
/// The sparsity pattern, the Dirichlet partition and the element scatter
/// maps are built once; only values change between design iterations.
pub struct PressureSystem {
    a_cond: DMatrix<f64>,
    a_mass: DMatrix<f64>,
    connectivity: Vec<u32>,
    npe: usize,
    /// Full-size flow matrix over all pressure DOFs.
    full: CsrMatrix,
    /// Element-entry -> full value index.
    scatter: Vec<u32>,
    partition: DofPartition,
    /// Full-length vector with prescribed values at Dirichlet DOFs.
    bc_values: Vec<f64>,
    /// Flow matrix restricted to free DOFs.
    reduced: CsrMatrix,
    /// Reduced value index -> full value index.
    gather: Vec<u32>,
}

impl PressureSystem {
    pub fn new(grid: &StructuredGrid, dirichlet: &[(usize, f64)]) -> Result<Self, Error> {
        if dirichlet.is_empty() {
            return Err(Error::InvalidProblem(
                "pressure problem needs at least one prescribed DOF".into(),
            ));
        }
        let n = grid.num_nodes();
        let npe = grid.nodes_per_element();
        let ne = grid.num_elements();

        let mut connectivity = Vec::with_capacity(ne * npe);
        for e in 0..ne {
            for &node in grid.element_nodes(e)?.iter() {
                connectivity.push(node as u32);
            }
        }

        let (row_ptr, col_idx) = crate::grid::neighbor_pattern(grid, 1, 1);
        let full = CsrMatrix::from_pattern(n, n, row_ptr, col_idx);

        let mut scatter = Vec::with_capacity(ne * npe * npe);
        for e in 0..ne {
            let nodes = &connectivity[e * npe..(e + 1) * npe];
            for &r in nodes {
                for &c in nodes {
                    let idx = full
                        .find(r as usize, c as usize)
                        .expect("pattern contains every element entry");
                    scatter.push(idx as u32);
                }
            }
        }

        let fixed: Vec<usize> = dirichlet.iter().map(|&(d, _)| d).collect();
        for &d in &fixed {
            if d >= n {
                return Err(Error::IndexOutOfRange { index: d, len: n });
            }
        }
        let partition = DofPartition::new(n, &fixed);
        let mut bc_values = vec![0.0; n];
        for &(d, v) in dirichlet {
            bc_values[d] = v;
        }

        let (reduced, gather) = reduce_pattern(&full, &partition);
        Ok(Self {
            a_cond: unit_conductivity_matrix(grid),
            a_mass: unit_pressure_mass_matrix(grid),
            connectivity,
            npe,
            full,
            scatter,
            partition,
            bc_values,
            reduced,
            gather,
        })
    }

    pub fn partition(&self) -> &DofPartition {
        &self.partition
    }

    pub fn bc_values(&self) -> &[f64] {
        &self.bc_values
    }

    pub fn full_matrix(&self) -> &CsrMatrix {
        &self.full
    }

    pub fn reduced_matrix(&self) -> &CsrMatrix {
        &self.reduced
    }

    pub fn unit_matrices(&self) -> (&DMatrix<f64>, &DMatrix<f64>) {
        (&self.a_cond, &self.a_mass)
    }

    pub fn element_nodes(&self, e: usize) -> &[u32] {
        &self.connectivity[e * self.npe..(e + 1) * self.npe]
    }

    /// Fill matrix values for the given physical densities.
    pub fn assemble(&mut self, rho_tilde: &[f64], params: &FlowParams) -> Result<(), Error> {
        let ne = self.connectivity.len() / self.npe;
        if rho_tilde.len() != ne {
            return Err(Error::SizeMismatch { expected: ne, got: rho_tilde.len(), what: "rho_tilde" });
        }
        let npe2 = self.npe * self.npe;
        self.full.set_zero();
        let cond = self.a_cond.as_slice();
        let mass = self.a_mass.as_slice();
        {
            let values = self.full.values_mut();
            for e in 0..ne {
                let (k_e, _) = params.flow_coefficient(rho_tilde[e]);
                let (d_e, _) = params.drainage_coefficient(rho_tilde[e]);
                let base = e * npe2;
                for ij in 0..npe2 {
                    values[self.scatter[base + ij] as usize] += k_e * cond[ij] + d_e * mass[ij];
                }
            }
        }
        let full_values: &[f64] = self.full.values();
        let reduced_values = self.reduced.values_mut();
        for (rv, &g) in reduced_values.iter_mut().zip(&self.gather) {
            *rv = full_values[g as usize];
        }
        Ok(())
    }

    /// Factor the reduced matrix for PCG; shared by state and adjoint solves.
    pub fn factor(&self) -> Result<IncompleteCholesky, Error> {
        IncompleteCholesky::new(&self.reduced)
    }

    /// Solve `A p = 0` under the prescribed pressures. Returns the full
    /// pressure vector (prescribed entries exact) and solver statistics.
    ///
    /// The discrete solution obeys the prescribed bounds up to a small
    /// slack: the consistent drainage mass matrix is not an M-matrix, so
    /// tiny over/undershoot (observed < 1e-3 of the inlet pressure) can
    /// occur next to steep drainage gradients.
    pub fn solve(
        &self,
        factor: &IncompleteCholesky,
        opts: &SolveOpts,
        warm: Option<&[f64]>,
    ) -> Result<(Vec<f64>, SolveStats), Error> {
        // Dirichlet data enters through the right-hand side of the free block.
        let coupled = self.full.mul_vec(&self.bc_values);
        let rhs: Vec<f64> = self.partition.free.iter().map(|&d| -coupled[d]).collect();
        let warm_red = warm.map(|p| self.partition.restrict(p));
        let sol = pcg(
            &self.reduced,
            &rhs,
            factor,
            opts.tol,
            opts.iter_cap(rhs.len()),
            warm_red.as_deref(),
        )
        .into_result(opts.tol)?;
        let mut p = self.partition.prolong(&sol.x, self.bc_values.len());
        for (d, &v) in self.bc_values.iter().enumerate() {
            if !self.partition.is_free(d) {
                p[d] = v;
            }
        }
        Ok((p, SolveStats { iterations: sol.iterations, residual: sol.residual }))
    }

    /// Solve the adjoint system `A lambda = rhs_full|free` (A symmetric),
    /// homogeneous at prescribed DOFs.
    pub fn solve_adjoint(
        &self,
        factor: &IncompleteCholesky,
        rhs_full: &[f64],
        opts: &SolveOpts,
        warm: Option<&[f64]>,
    ) -> Result<(Vec<f64>, SolveStats), Error> {
        let rhs = self.partition.restrict(rhs_full);
        let warm_red = warm.map(|p| self.partition.restrict(p));
        let sol = pcg(
            &self.reduced,
            &rhs,
            factor,
            opts.tol,
            opts.iter_cap(rhs.len()),
            warm_red.as_deref(),
        )
        .into_result(opts.tol)?;
        let lambda = self.partition.prolong(&sol.x, rhs_full.len());
        Ok((lambda, SolveStats { iterations: sol.iterations, residual: sol.residual }))
    }
}

/// Restrict a square matrix pattern to free DOFs; returns the reduced
/// matrix (zero values) plus the map from reduced to full value indices.
pub(crate) fn reduce_pattern(full: &CsrMatrix, part: &DofPartition) -> (CsrMatrix, Vec<u32>) {
    let nf = part.num_free();
    let mut row_ptr = vec![0usize; nf + 1];
    let mut col_idx = Vec::new();
    let mut gather = Vec::new();
    for (rf, &r) in part.free.iter().enumerate() {
        for k in full.row_ptr()[r]..full.row_ptr()[r + 1] {
            let c = full.col_idx()[k] as usize;
            let cf = part.free_of[c];
            if cf != usize::MAX {
                col_idx.push(cf as u32);
                gather.push(k as u32);
            }
        }
        row_ptr[rf + 1] = col_idx.len();
    }
    (CsrMatrix::from_pattern(nf, nf, row_ptr, col_idx), gather)
}

/// Design-independent transformation from nodal pressures to consistent
/// nodal loads, assembled once per grid: `F = -D_T p`.
pub struct TransformationMatrix {
    /// (dim * num_nodes) x num_nodes.
    d: CsrMatrix,
    /// Cached transpose for adjoint right-hand sides.
    dt: CsrMatrix,
}

impl TransformationMatrix {
    pub fn build(grid: &StructuredGrid) -> Result<Self, Error> {
        let dim = grid.dim();
        let npe = grid.nodes_per_element();
        let det = grid.jacobian_det();
        // Element block: row (a, axis), column b -> int N_a dN_b/dx_axis.
        let mut block = vec![0.0; dim * npe * npe];
        for (pt, w) in grid.gauss_points() {
            let n = grid.shape_values(pt);
            let b = grid.shape_gradients(pt);
            for a in 0..npe {
                for d in 0..dim {
                    for bb in 0..npe {
                        block[(a * dim + d) * npe + bb] += w * det * n[a] * b[d * npe + bb];
                    }
                }
            }
        }
        let nn = grid.num_nodes();
        let (row_ptr, col_idx) = crate::grid::neighbor_pattern(grid, dim, 1);
        let mut d_mat = CsrMatrix::from_pattern(dim * nn, nn, row_ptr, col_idx);
        for e in 0..grid.num_elements() {
            let nodes = grid.element_nodes(e)?;
            for (a, &na) in nodes.iter().enumerate() {
                for d in 0..dim {
                    for (bb, &nb) in nodes.iter().enumerate() {
                        let idx = d_mat
                            .find(na * dim + d, nb)
                            .expect("pattern covers element couplings");
                        d_mat.values_mut()[idx] += block[(a * dim + d) * npe + bb];
                    }
                }
            }
        }
        let dt = d_mat.transpose();
        Ok(Self { d: d_mat, dt })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.d
    }

    /// Consistent nodal loads `F = -D_T p`.
    pub fn nodal_loads(&self, p: &[f64]) -> Result<Vec<f64>, Error> {
        if p.len() != self.d.n_cols() {
            return Err(Error::SizeMismatch { expected: self.d.n_cols(), got: p.len(), what: "pressure vector" });
        }
        let mut f = self.d.mul_vec(p);
        f.iter_mut().for_each(|v| *v = -*v);
        Ok(f)
    }

    /// `D_T' u`, used to form adjoint right-hand sides.
    pub fn transpose_apply(&self, u: &[f64]) -> Vec<f64> {
        self.dt.mul_vec(u)
    }
}
