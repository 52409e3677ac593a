//! Structured-grid discretization.
//!
//! The design domain is an axis-aligned box meshed with congruent trilinear
//! hexahedra (3D) or bilinear quadrilaterals (2D, `nelz == 0`). Nodes and
//! elements are numbered lexicographically with x fastest, then y, then z.
//! Element corners follow the usual VTK ordering:
//!
//! ```text
//! 3D: 0:(i,j,k)   1:(i+1,j,k)   2:(i+1,j+1,k)   3:(i,j+1,k)
//!     4:(i,j,k+1) 5:(i+1,j,k+1) 6:(i+1,j+1,k+1) 7:(i,j+1,k+1)
//! 2D: 0:(i,j)     1:(i+1,j)     2:(i+1,j+1)     3:(i,j+1)
//! ```
//!
//! Shape functions live on the reference element `[-1,1]^dim`.

use crate::error::Error;
use arrayvec::ArrayVec;

/// Maximum nodes per element (hex8).
pub const MAX_NODES: usize = 8;

pub type ElementNodes = ArrayVec<usize, MAX_NODES>;

/// Axis-aligned structured grid of congruent box elements.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredGrid {
    nelx: usize,
    nely: usize,
    /// Zero in 2D.
    nelz: usize,
    lx: f64,
    ly: f64,
    lz: f64,
}

impl StructuredGrid {
    pub fn new_3d(nel: [usize; 3], size: [f64; 3]) -> Result<Self, Error> {
        if nel[0] == 0 || nel[1] == 0 || nel[2] == 0 {
            return Err(Error::InvalidGrid("element counts must be >= 1".into()));
        }
        if size.iter().any(|&l| l <= 0.0) {
            return Err(Error::InvalidGrid("domain lengths must be > 0".into()));
        }
        Ok(Self { nelx: nel[0], nely: nel[1], nelz: nel[2], lx: size[0], ly: size[1], lz: size[2] })
    }

    pub fn new_2d(nel: [usize; 2], size: [f64; 2]) -> Result<Self, Error> {
        if nel[0] == 0 || nel[1] == 0 {
            return Err(Error::InvalidGrid("element counts must be >= 1".into()));
        }
        if size[0] <= 0.0 || size[1] <= 0.0 {
            return Err(Error::InvalidGrid("domain lengths must be > 0".into()));
        }
        Ok(Self { nelx: nel[0], nely: nel[1], nelz: 0, lx: size[0], ly: size[1], lz: 0.0 })
    }

    pub fn dim(&self) -> usize {
        if self.nelz == 0 { 2 } else { 3 }
    }

    pub fn is_2d(&self) -> bool {
        self.nelz == 0
    }

    /// Element counts per axis; `[nelx, nely, 0]` in 2D.
    pub fn num_elements_per_axis(&self) -> [usize; 3] {
        [self.nelx, self.nely, self.nelz]
    }

    /// Node counts per axis; the z count is 1 in 2D.
    pub fn num_nodes_per_axis(&self) -> [usize; 3] {
        [self.nelx + 1, self.nely + 1, if self.nelz == 0 { 1 } else { self.nelz + 1 }]
    }

    pub fn num_elements(&self) -> usize {
        self.nelx * self.nely * self.nelz.max(1)
    }

    pub fn num_nodes(&self) -> usize {
        let [nx, ny, nz] = self.num_nodes_per_axis();
        nx * ny * nz
    }

    pub fn nodes_per_element(&self) -> usize {
        if self.is_2d() { 4 } else { 8 }
    }

    pub fn domain_size(&self) -> [f64; 3] {
        [self.lx, self.ly, self.lz]
    }

    /// Edge lengths of one element; `dz = 0` in 2D.
    pub fn element_size(&self) -> [f64; 3] {
        [
            self.lx / self.nelx as f64,
            self.ly / self.nely as f64,
            if self.nelz == 0 { 0.0 } else { self.lz / self.nelz as f64 },
        ]
    }

    /// Smallest element edge over active axes.
    pub fn min_element_edge(&self) -> f64 {
        let [dx, dy, dz] = self.element_size();
        if self.is_2d() { dx.min(dy) } else { dx.min(dy).min(dz) }
    }

    /// Volume (area in 2D, unit thickness) of one element.
    pub fn element_volume(&self) -> f64 {
        let [dx, dy, dz] = self.element_size();
        if self.is_2d() { dx * dy } else { dx * dy * dz }
    }

    pub fn node_index(&self, i: usize, j: usize, k: usize) -> usize {
        let [nx, ny, _] = self.num_nodes_per_axis();
        debug_assert!(i < nx && j < ny);
        i + nx * (j + ny * k)
    }

    pub fn node_coords_of(&self, node: usize) -> [usize; 3] {
        let [nx, ny, _] = self.num_nodes_per_axis();
        let i = node % nx;
        let j = (node / nx) % ny;
        let k = node / (nx * ny);
        [i, j, k]
    }

    /// Physical position of a node.
    pub fn node_position(&self, node: usize) -> [f64; 3] {
        let [i, j, k] = self.node_coords_of(node);
        let [dx, dy, dz] = self.element_size();
        [i as f64 * dx, j as f64 * dy, k as f64 * dz]
    }

    pub fn element_index(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.nelx && j < self.nely && k < self.nelz.max(1));
        i + self.nelx * (j + self.nely * k)
    }

    pub fn element_coords_of(&self, e: usize) -> [usize; 3] {
        let i = e % self.nelx;
        let j = (e / self.nelx) % self.nely;
        let k = e / (self.nelx * self.nely);
        [i, j, k]
    }

    /// Center of an element in physical coordinates.
    pub fn element_center(&self, e: usize) -> [f64; 3] {
        let [i, j, k] = self.element_coords_of(e);
        let [dx, dy, dz] = self.element_size();
        [(i as f64 + 0.5) * dx, (j as f64 + 0.5) * dy, if self.is_2d() { 0.0 } else { (k as f64 + 0.5) * dz }]
    }

    /// Node indices of element `e` in corner order (see module docs).
    pub fn element_nodes(&self, e: usize) -> Result<ElementNodes, Error> {
        if e >= self.num_elements() {
            return Err(Error::IndexOutOfRange { index: e, len: self.num_elements() });
        }
        let [i, j, k] = self.element_coords_of(e);
        let mut nodes = ElementNodes::new();
        nodes.push(self.node_index(i, j, k));
        nodes.push(self.node_index(i + 1, j, k));
        nodes.push(self.node_index(i + 1, j + 1, k));
        nodes.push(self.node_index(i, j + 1, k));
        if !self.is_2d() {
            nodes.push(self.node_index(i, j, k + 1));
            nodes.push(self.node_index(i + 1, j, k + 1));
            nodes.push(self.node_index(i + 1, j + 1, k + 1));
            nodes.push(self.node_index(i, j + 1, k + 1));
        }
        Ok(nodes)
    }

    /// Reference coordinates of local corner `a`, entries in {-1, +1}.
    pub fn corner_reference(&self, a: usize) -> [f64; 3] {
        // Bit patterns encode the lexicographic corner walk of the module docs.
        const SIGNS: [[f64; 3]; 8] = [
            [-1.0, -1.0, -1.0],
            [1.0, -1.0, -1.0],
            [1.0, 1.0, -1.0],
            [-1.0, 1.0, -1.0],
            [-1.0, -1.0, 1.0],
            [1.0, -1.0, 1.0],
            [1.0, 1.0, 1.0],
            [-1.0, 1.0, 1.0],
        ];
        SIGNS[a]
    }

    /// Shape function values at reference coordinates in `[-1,1]^dim`.
    pub fn shape_values(&self, local: [f64; 3]) -> ArrayVec<f64, MAX_NODES> {
        let npe = self.nodes_per_element();
        let mut out = ArrayVec::new();
        for a in 0..npe {
            let s = self.corner_reference(a);
            let mut n = 0.25 * (1.0 + s[0] * local[0]) * (1.0 + s[1] * local[1]);
            if !self.is_2d() {
                n *= 0.5 * (1.0 + s[2] * local[2]);
            }
            out.push(n);
        }
        out
    }

    /// Physical-space shape gradients at reference coordinates.
    ///
    /// Returns a `dim x npe` matrix in row-major layout: row d holds
    /// d(N_a)/d(x_d) for all corners a. The constant Jacobian of a box
    /// element maps reference derivatives by `2/edge`.
    pub fn shape_gradients(&self, local: [f64; 3]) -> Vec<f64> {
        let dim = self.dim();
        let npe = self.nodes_per_element();
        let [dx, dy, dz] = self.element_size();
        let scale = [2.0 / dx, 2.0 / dy, if dim == 3 { 2.0 / dz } else { 0.0 }];
        let mut out = vec![0.0; dim * npe];
        for a in 0..npe {
            let s = self.corner_reference(a);
            let fx = 1.0 + s[0] * local[0];
            let fy = 1.0 + s[1] * local[1];
            if self.is_2d() {
                out[a] = 0.25 * s[0] * fy * scale[0];
                out[npe + a] = 0.25 * fx * s[1] * scale[1];
            } else {
                let fz = 1.0 + s[2] * local[2];
                out[a] = 0.125 * s[0] * fy * fz * scale[0];
                out[npe + a] = 0.125 * fx * s[1] * fz * scale[1];
                out[2 * npe + a] = 0.125 * fx * fy * s[2] * scale[2];
            }
        }
        out
    }

    /// Full 2x2(x2) Gauss rule on the reference element: (point, weight) pairs.
    pub fn gauss_points(&self) -> Vec<([f64; 3], f64)> {
        let g = 1.0 / 3.0_f64.sqrt();
        let pts_1d = [-g, g];
        let mut out = Vec::new();
        if self.is_2d() {
            for &gy in &pts_1d {
                for &gx in &pts_1d {
                    out.push(([gx, gy, 0.0], 1.0));
                }
            }
        } else {
            for &gz in &pts_1d {
                for &gy in &pts_1d {
                    for &gx in &pts_1d {
                        out.push(([gx, gy, gz], 1.0));
                    }
                }
            }
        }
        out
    }

    /// Jacobian determinant of the reference-to-physical map (constant).
    pub fn jacobian_det(&self) -> f64 {
        let [dx, dy, dz] = self.element_size();
        if self.is_2d() { dx * dy / 4.0 } else { dx * dy * dz / 8.0 }
    }
}

/// CSR sparsity pattern coupling nodal fields on a structured grid.
///
/// Row DOF `node * row_comps + c` couples to every DOF of every node within
/// Chebyshev distance one (the nodes sharing an element), which is exactly
/// the assembled finite-element pattern. Returns `(row_ptr, col_idx)` with
/// sorted columns.
pub fn neighbor_pattern(
    grid: &StructuredGrid,
    row_comps: usize,
    col_comps: usize,
) -> (Vec<usize>, Vec<u32>) {
    let [nx, ny, nz] = grid.num_nodes_per_axis();
    let nn = grid.num_nodes();
    let mut row_ptr = Vec::with_capacity(nn * row_comps + 1);
    row_ptr.push(0usize);
    let mut col_idx: Vec<u32> = Vec::new();
    let mut neighbors: Vec<usize> = Vec::with_capacity(27);
    for n in 0..nn {
        let [i, j, k] = grid.node_coords_of(n);
        neighbors.clear();
        let k_range = if nz == 1 { 0..=0 } else { k.saturating_sub(1)..=(k + 1).min(nz - 1) };
        for kk in k_range {
            for jj in j.saturating_sub(1)..=(j + 1).min(ny - 1) {
                for ii in i.saturating_sub(1)..=(i + 1).min(nx - 1) {
                    neighbors.push(grid.node_index(ii, jj, kk));
                }
            }
        }
        for _ in 0..row_comps {
            for &m in &neighbors {
                for c in 0..col_comps {
                    col_idx.push((m * col_comps + c) as u32);
                }
            }
            row_ptr.push(col_idx.len());
        }
    }
    (row_ptr, col_idx)
}

/// Degree-of-freedom numbering for the scalar pressure field and the
/// vector displacement field on one grid.
///
/// Pressure DOF = node index. Displacement DOF = `dim * node + axis`.
#[derive(Debug, Clone)]
pub struct DofMap {
    dim: usize,
    num_nodes: usize,
}

impl DofMap {
    pub fn new(grid: &StructuredGrid) -> Self {
        Self { dim: grid.dim(), num_nodes: grid.num_nodes() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_pressure_dofs(&self) -> usize {
        self.num_nodes
    }

    pub fn num_displacement_dofs(&self) -> usize {
        self.dim * self.num_nodes
    }

    pub fn displacement_dof(&self, node: usize, axis: usize) -> usize {
        debug_assert!(axis < self.dim);
        self.dim * node + axis
    }
}

/// Splits a DOF range into prescribed (fixed) and free sets.
///
/// `free_of[dof]` is the index within the free subset, or `usize::MAX` for
/// prescribed DOFs.
#[derive(Debug, Clone)]
pub struct DofPartition {
    pub free: Vec<usize>,
    pub free_of: Vec<usize>,
    pub prescribed: Vec<usize>,
}

impl DofPartition {
    pub fn new(num_dofs: usize, prescribed: &[usize]) -> Self {
        let mut is_fixed = vec![false; num_dofs];
        for &d in prescribed {
            assert!(d < num_dofs, "prescribed dof {d} out of range {num_dofs}");
            is_fixed[d] = true;
        }
        let mut free = Vec::with_capacity(num_dofs - prescribed.len());
        let mut free_of = vec![usize::MAX; num_dofs];
        for (d, &fixed) in is_fixed.iter().enumerate() {
            if !fixed {
                free_of[d] = free.len();
                free.push(d);
            }
        }
        let mut pres: Vec<usize> = prescribed.to_vec();
        pres.sort_unstable();
        pres.dedup();
        Self { free, free_of, prescribed: pres }
    }

    pub fn num_free(&self) -> usize {
        self.free.len()
    }

    pub fn is_free(&self, dof: usize) -> bool {
        self.free_of[dof] != usize::MAX
    }

    /// Gather the free entries of a full-length vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&d| full[d]).collect()
    }

    /// Scatter free values into a full-length vector, zeros elsewhere.
    pub fn prolong(&self, reduced: &[f64], num_dofs: usize) -> Vec<f64> {
        let mut full = vec![0.0; num_dofs];
        for (r, &d) in self.free.iter().enumerate() {
            full[d] = reduced[r];
        }
        full
    }
}
