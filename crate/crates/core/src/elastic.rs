//! SIMP-interpolated linear elasticity on the structured grid: element
//! stiffness, global assembly with output springs, and the state/dummy
//! solves `K u = F` and `K v = F_d`.
//!
//! All elements are congruent boxes, so the element stiffness is integrated
//! once for unit Young's modulus and scaled by `E(rho)` per element. 2D
//! problems use plane-stress quads of unit thickness.

use crate::error::Error;
use crate::fields::simp_modulus;
use crate::grid::{neighbor_pattern, DofPartition, StructuredGrid};
use crate::solver::{pcg, CsrMatrix, IncompleteCholesky, SolveOpts, SolveStats};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Isotropic material and SIMP penalization parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialParams {
    /// Young's modulus of solid material (N/m^2).
    pub e1: f64,
    /// Young's modulus of void material (N/m^2).
    pub e0: f64,
    /// Poisson ratio.
    pub nu: f64,
    /// SIMP penalization exponent.
    pub zeta: f64,
}

impl MaterialParams {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.e1 > self.e0 && self.e0 > 0.0) {
            return Err(Error::InvalidParameter("need E1 > E0 > 0".into()));
        }
        if !(0.0..0.5).contains(&self.nu) {
            return Err(Error::InvalidParameter(format!("nu {} must be in [0, 0.5)", self.nu)));
        }
        if self.zeta < 1.0 {
            return Err(Error::InvalidParameter("zeta must be >= 1".into()));
        }
        Ok(())
    }

    /// SIMP modulus and derivative at one density.
    pub fn modulus(&self, rho_tilde: f64) -> (f64, f64) {
        simp_modulus(rho_tilde, self.e0, self.e1, self.zeta)
    }
}

/// Element stiffness for unit Young's modulus.
///
/// 3D: trilinear hex, full isotropic elasticity. 2D: bilinear quad, plane
/// stress with unit thickness. DOFs are node-major: `(node, axis)`.
pub fn unit_element_stiffness(grid: &StructuredGrid, nu: f64) -> DMatrix<f64> {
    let dim = grid.dim();
    let npe = grid.nodes_per_element();
    let ndof = dim * npe;
    let det = grid.jacobian_det();
    let n_strain = if dim == 2 { 3 } else { 6 };

    // Constitutive matrix for E = 1.
    let mut c = DMatrix::zeros(n_strain, n_strain);
    if dim == 2 {
        let f = 1.0 / (1.0 - nu * nu);
        c[(0, 0)] = f;
        c[(1, 1)] = f;
        c[(0, 1)] = nu * f;
        c[(1, 0)] = nu * f;
        c[(2, 2)] = f * (1.0 - nu) / 2.0;
    } else {
        let f = 1.0 / ((1.0 + nu) * (1.0 - 2.0 * nu));
        for i in 0..3 {
            for j in 0..3 {
                c[(i, j)] = if i == j { (1.0 - nu) * f } else { nu * f };
            }
        }
        let g = 0.5 / (1.0 + nu);
        for i in 3..6 {
            c[(i, i)] = g;
        }
    }

    let mut ke = DMatrix::zeros(ndof, ndof);
    for (pt, w) in grid.gauss_points() {
        let grads = grid.shape_gradients(pt);
        let mut b = DMatrix::zeros(n_strain, ndof);
        for a in 0..npe {
            let gx = grads[a];
            let gy = grads[npe + a];
            if dim == 2 {
                b[(0, 2 * a)] = gx;
                b[(1, 2 * a + 1)] = gy;
                b[(2, 2 * a)] = gy;
                b[(2, 2 * a + 1)] = gx;
            } else {
                let gz = grads[2 * npe + a];
                b[(0, 3 * a)] = gx;
                b[(1, 3 * a + 1)] = gy;
                b[(2, 3 * a + 2)] = gz;
                // Engineering shear strains: xy, yz, zx.
                b[(3, 3 * a)] = gy;
                b[(3, 3 * a + 1)] = gx;
                b[(4, 3 * a + 1)] = gz;
                b[(4, 3 * a + 2)] = gy;
                b[(5, 3 * a)] = gz;
                b[(5, 3 * a + 2)] = gx;
            }
        }
        ke += b.transpose() * &c * b * (w * det);
    }
    // Quadrature of symmetric integrands is symmetric up to rounding;
    // symmetrize so assembled matrices are exactly symmetric.
    let ket = ke.transpose();
    ke = (ke + ket) * 0.5;
    ke
}

/// Axis-aligned point spring attached to one displacement DOF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spring {
    pub dof: usize,
    pub stiffness: f64,
}

/// Assembled elasticity system on the free displacement DOFs.
///
/// Dirichlet BCs are realized by row/column elimination: the reduced
/// matrix only carries free DOFs, keeping it SPD.
pub struct ElasticSystem {
    ke0: DMatrix<f64>,
    connectivity: Vec<u32>,
    npe: usize,
    dim: usize,
    num_dofs: usize,
    partition: DofPartition,
    reduced: CsrMatrix,
    /// Element-entry -> reduced value index, or `SKIP` when the row or
    /// column DOF is prescribed.
    scatter: Vec<u32>,
    /// Reduced diagonal value index and stiffness per spring.
    spring_slots: Vec<(usize, f64)>,
}

const SKIP: u32 = u32::MAX;

impl ElasticSystem {
    pub fn new(
        grid: &StructuredGrid,
        nu: f64,
        fixed_dofs: &[usize],
        springs: &[Spring],
    ) -> Result<Self, Error> {
        let dim = grid.dim();
        let npe = grid.nodes_per_element();
        let ne = grid.num_elements();
        let num_dofs = dim * grid.num_nodes();
        if fixed_dofs.is_empty() && springs.is_empty() {
            return Err(Error::InvalidProblem(
                "elastic problem needs displacement BCs or springs".into(),
            ));
        }
        for &d in fixed_dofs {
            if d >= num_dofs {
                return Err(Error::IndexOutOfRange { index: d, len: num_dofs });
            }
        }
        let partition = DofPartition::new(num_dofs, fixed_dofs);

        let mut connectivity = Vec::with_capacity(ne * npe);
        for e in 0..ne {
            for &node in grid.element_nodes(e)?.iter() {
                connectivity.push(node as u32);
            }
        }

        // Free-DOF pattern: walk the full neighbor pattern, keep free pairs.
        let (full_ptr, full_cols) = neighbor_pattern(grid, dim, dim);
        let nf = partition.num_free();
        let mut row_ptr = Vec::with_capacity(nf + 1);
        row_ptr.push(0usize);
        let mut col_idx: Vec<u32> = Vec::new();
        for &dof in &partition.free {
            for k in full_ptr[dof]..full_ptr[dof + 1] {
                let c = full_cols[k] as usize;
                let cf = partition.free_of[c];
                if cf != usize::MAX {
                    col_idx.push(cf as u32);
                }
            }
            row_ptr.push(col_idx.len());
        }
        let reduced = CsrMatrix::from_pattern(nf, nf, row_ptr, col_idx);

        let edof = dim * npe;
        let mut scatter = vec![SKIP; ne * edof * edof];
        for e in 0..ne {
            let nodes = &connectivity[e * npe..(e + 1) * npe];
            for ar in 0..edof {
                let gr = nodes[ar / dim] as usize * dim + ar % dim;
                let rf = partition.free_of[gr];
                if rf == usize::MAX {
                    continue;
                }
                for ac in 0..edof {
                    let gc = nodes[ac / dim] as usize * dim + ac % dim;
                    let cf = partition.free_of[gc];
                    if cf == usize::MAX {
                        continue;
                    }
                    let idx = reduced.find(rf, cf).expect("pattern covers element couplings");
                    scatter[e * edof * edof + ar * edof + ac] = idx as u32;
                }
            }
        }

        let mut spring_slots = Vec::new();
        for s in springs {
            if s.stiffness < 0.0 {
                return Err(Error::InvalidParameter("spring stiffness must be >= 0".into()));
            }
            if s.dof >= num_dofs {
                return Err(Error::IndexOutOfRange { index: s.dof, len: num_dofs });
            }
            let rf = partition.free_of[s.dof];
            if rf == usize::MAX {
                // A spring on a fixed DOF has no effect.
                continue;
            }
            let idx = reduced.find(rf, rf).expect("diagonal entry");
            spring_slots.push((idx, s.stiffness));
        }

        Ok(Self {
            ke0: unit_element_stiffness(grid, nu),
            connectivity,
            npe,
            dim,
            num_dofs,
            partition,
            reduced,
            scatter,
            spring_slots,
        })
    }

    pub fn partition(&self) -> &DofPartition {
        &self.partition
    }

    pub fn num_dofs(&self) -> usize {
        self.num_dofs
    }

    pub fn num_elements(&self) -> usize {
        self.connectivity.len() / self.npe
    }

    pub fn reduced_matrix(&self) -> &CsrMatrix {
        &self.reduced
    }

    pub fn unit_stiffness(&self) -> &DMatrix<f64> {
        &self.ke0
    }

    pub fn element_nodes(&self, e: usize) -> &[u32] {
        &self.connectivity[e * self.npe..(e + 1) * self.npe]
    }

    /// Gather the element-local DOF values of a full-length vector.
    pub fn element_vector(&self, e: usize, full: &[f64], out: &mut [f64]) {
        let nodes = self.element_nodes(e);
        for (a, &n) in nodes.iter().enumerate() {
            for d in 0..self.dim {
                out[a * self.dim + d] = full[n as usize * self.dim + d];
            }
        }
    }

    /// Fill stiffness values for the given physical densities.
    pub fn assemble(&mut self, rho_tilde: &[f64], mat: &MaterialParams) -> Result<(), Error> {
        let ne = self.connectivity.len() / self.npe;
        if rho_tilde.len() != ne {
            return Err(Error::SizeMismatch { expected: ne, got: rho_tilde.len(), what: "rho_tilde" });
        }
        let edof2 = (self.dim * self.npe) * (self.dim * self.npe);
        let ke = self.ke0.as_slice();
        self.reduced.set_zero();
        let values = self.reduced.values_mut();
        for e in 0..ne {
            let (e_mod, _) = mat.modulus(rho_tilde[e]);
            let base = e * edof2;
            for ij in 0..edof2 {
                let slot = self.scatter[base + ij];
                if slot != SKIP {
                    values[slot as usize] += e_mod * ke[ij];
                }
            }
        }
        for &(idx, k) in &self.spring_slots {
            values[idx] += k;
        }
        Ok(())
    }

    pub fn factor(&self) -> Result<IncompleteCholesky, Error> {
        IncompleteCholesky::new(&self.reduced)
    }

    /// Solve `K u = f` for a full-length load vector; returns the
    /// full-length displacement (zeros at prescribed DOFs).
    pub fn solve(
        &self,
        factor: &IncompleteCholesky,
        f: &[f64],
        opts: &SolveOpts,
        warm: Option<&[f64]>,
    ) -> Result<(Vec<f64>, SolveStats), Error> {
        if f.len() != self.num_dofs {
            return Err(Error::SizeMismatch { expected: self.num_dofs, got: f.len(), what: "load vector" });
        }
        let rhs = self.partition.restrict(f);
        let warm_red = warm.map(|u| self.partition.restrict(u));
        let sol = pcg(
            &self.reduced,
            &rhs,
            factor,
            opts.tol,
            opts.iter_cap(rhs.len()),
            warm_red.as_deref(),
        )
        .into_result(opts.tol)?;
        let u = self.partition.prolong(&sol.x, self.num_dofs);
        Ok((u, SolveStats { iterations: sol.iterations, residual: sol.residual }))
    }
}

/// Strain energy `0.5 u' K u` evaluated as `0.5 F' u`; valid because the
/// prescribed displacement DOFs are homogeneous.
pub fn strain_energy(f: &[f64], u: &[f64]) -> f64 {
    0.5 * f.iter().zip(u).map(|(a, b)| a * b).sum::<f64>()
}

/// Mutual strain energy `v' K u = F' v = F_d' u`.
pub fn mutual_strain_energy(f_d: &[f64], u: &[f64]) -> f64 {
    f_d.iter().zip(u).map(|(a, b)| a * b).sum()
}
