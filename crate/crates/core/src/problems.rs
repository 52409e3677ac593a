//! Catalog of benchmark problem definitions and their translation into
//! grids, boundary-condition sets and design fields.
//!
//! A [`ProblemSpec`] is a plain serializable value object: geometry in
//! physical coordinates, regions as axis-aligned boxes, parameters as
//! numbers. Resolution is separate, so any spec can be re-meshed; regions
//! snap to the elements whose centers they contain.

use crate::darcy::FlowParams;
use crate::elastic::{MaterialParams, Spring};
use crate::error::Error;
use crate::fields::{DesignField, Role};
use crate::grid::StructuredGrid;
use crate::sensitivity::ObjectiveKind;
use serde::{Deserialize, Serialize};

/// 1 bar in N/m^2.
pub const BAR: f64 = 1.0e5;

/// Axis-aligned box in physical coordinates. Degenerate boxes (zero
/// extent along an axis) select nodes on a plane, line or point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl BoxRegion {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: [f64; 3], tol: f64) -> bool {
        (0..3).all(|d| p[d] >= self.min[d] - tol && p[d] <= self.max[d] + tol)
    }

    pub fn overlaps(&self, other: &BoxRegion) -> bool {
        (0..3).all(|d| self.min[d] < other.max[d] && other.min[d] < self.max[d])
    }
}

/// One face of the domain box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Face {
    XMin,
    XMax,
    YMin,
    YMax,
    ZMin,
    ZMax,
}

impl Face {
    pub fn axis(self) -> usize {
        match self {
            Face::XMin | Face::XMax => 0,
            Face::YMin | Face::YMax => 1,
            Face::ZMin | Face::ZMax => 2,
        }
    }

    fn is_max_side(self) -> bool {
        matches!(self, Face::XMax | Face::YMax | Face::ZMax)
    }

    /// Does the node with grid coordinates `c` lie on this face?
    pub fn on_face(self, grid: &StructuredGrid, c: [usize; 3]) -> bool {
        let [nx, ny, nz] = grid.num_nodes_per_axis();
        let last = [nx - 1, ny - 1, nz - 1];
        let a = self.axis();
        if self.is_max_side() { c[a] == last[a] } else { c[a] == 0 }
    }
}

/// Prescribed pressure on one face. Later entries override earlier ones
/// on shared edge nodes, so the inlet is listed last.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceBc {
    pub face: Face,
    pub value: f64,
}

/// Region of fully fixed displacement DOFs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SupportRegion {
    /// The boundary ring of a face: its nodes that also lie on an
    /// orthogonal domain face.
    FaceEdges { face: Face },
    /// All nodes inside a box.
    NodeBox { region: BoxRegion },
}

/// Output port of a mechanism: nodes inside the region carry one spring
/// each and share a unit dummy load along the desired direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub region: BoxRegion,
    pub axis: usize,
    /// Sign of the desired motion along `axis`.
    pub direction: f64,
    /// Workpiece spring stiffness per node (N/m).
    pub spring_per_node: f64,
}

/// How the filter radius follows the mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum FilterRule {
    /// `factor * min(element edge)`.
    MinEdgeFactor { factor: f64 },
    Absolute { radius: f64 },
}

impl FilterRule {
    pub fn radius(&self, grid: &StructuredGrid) -> f64 {
        match *self {
            FilterRule::MinEdgeFactor { factor } => factor * grid.min_element_edge(),
            FilterRule::Absolute { radius } => radius,
        }
    }
}

/// Flow settings with the penetration depth expressed in element edges,
/// resolved into absolute [`FlowParams`] at build time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSettings {
    pub k_v: f64,
    pub epsilon: f64,
    pub eta_k: f64,
    pub beta_k: f64,
    pub eta_d: f64,
    pub beta_d: f64,
    pub remainder: f64,
    /// Penetration depth as a multiple of the smallest element edge.
    pub delta_s_elements: f64,
    pub drainage: bool,
}

impl FlowSettings {
    pub fn validate(&self) -> Result<(), Error> {
        if self.delta_s_elements <= 0.0 {
            return Err(Error::InvalidParameter("delta_s_elements must be > 0".into()));
        }
        // Remaining checks share the FlowParams rules; the depth value
        // here is a stand-in, validated for real at build time.
        FlowParams {
            k_v: self.k_v,
            epsilon: self.epsilon,
            eta_k: self.eta_k,
            beta_k: self.beta_k,
            eta_d: self.eta_d,
            beta_d: self.beta_d,
            remainder: self.remainder,
            delta_s: 1.0,
            p_ext: 0.0,
            drainage: self.drainage,
        }
        .validate()
    }

    pub fn resolve(&self, grid: &StructuredGrid) -> FlowParams {
        FlowParams {
            k_v: self.k_v,
            epsilon: self.epsilon,
            eta_k: self.eta_k,
            beta_k: self.beta_k,
            eta_d: self.eta_d,
            beta_d: self.beta_d,
            remainder: self.remainder,
            delta_s: self.delta_s_elements * grid.min_element_edge(),
            p_ext: 0.0,
            drainage: self.drainage,
        }
    }
}

/// Named probe point, reported by analysis runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub name: String,
    pub position: [f64; 3],
}

/// Complete problem definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub name: String,
    /// Default element counts; `[nx, ny, 0]` marks a 2D problem.
    pub elements: [usize; 3],
    /// Physical domain size in meters; third entry ignored in 2D.
    pub domain: [f64; 3],
    /// Prescribed pressures; later entries win on shared nodes.
    pub pressure_bcs: Vec<FaceBc>,
    pub supports: Vec<SupportRegion>,
    /// Symmetry planes: zero normal displacement, natural (zero-flux)
    /// pressure boundary.
    pub symmetry_planes: Vec<Face>,
    /// Non-design solid boxes.
    pub solid_regions: Vec<BoxRegion>,
    /// Non-design void boxes.
    pub void_regions: Vec<BoxRegion>,
    /// Role of elements not covered by any region.
    pub default_role: Role,
    pub output: Option<OutputSpec>,
    pub objective: ObjectiveKind,
    pub volume_fraction: f64,
    pub filter: FilterRule,
    pub flow: FlowSettings,
    pub material: MaterialParams,
    pub max_iterations: usize,
    /// External MMA move limit per iteration.
    pub move_limit: f64,
    pub probes: Vec<Probe>,
    /// Whether the structural problem is posed at all (the pressure
    /// pipeline test problem has no displacement BCs).
    pub structural: bool,
}

impl ProblemSpec {
    /// Same problem on a different mesh; regions are physical so they
    /// re-snap automatically, and mesh-rule quantities re-derive.
    pub fn rescale(&self, elements: [usize; 3]) -> ProblemSpec {
        ProblemSpec { elements, ..self.clone() }
    }

    pub fn is_2d(&self) -> bool {
        self.elements[2] == 0
    }

    fn containment_tol(&self) -> f64 {
        1e-9 * self.domain.iter().cloned().fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.volume_fraction <= 0.0 || self.volume_fraction > 1.0 {
            return Err(Error::InvalidProblem("volume fraction outside (0,1]".into()));
        }
        self.material.validate()?;
        self.objective.validate()?;
        self.flow.validate()?;
        if !(0.0 < self.move_limit && self.move_limit <= 1.0) {
            return Err(Error::InvalidProblem("move limit outside (0,1]".into()));
        }
        for s in &self.solid_regions {
            for v in &self.void_regions {
                if s.overlaps(v) {
                    return Err(Error::InvalidProblem(format!(
                        "solid region {s:?} overlaps void region {v:?}"
                    )));
                }
            }
        }
        for bc in &self.pressure_bcs {
            if self.symmetry_planes.contains(&bc.face) {
                return Err(Error::InvalidProblem(format!(
                    "face {:?} carries both a pressure BC and a symmetry plane",
                    bc.face
                )));
            }
        }
        if self.is_2d() && self.symmetry_planes.iter().any(|f| f.axis() == 2) {
            return Err(Error::InvalidProblem("z symmetry plane in a 2D problem".into()));
        }
        Ok(())
    }

    /// Instantiate grid, boundary sets and the initial design field.
    pub fn build(&self) -> Result<ProblemModel, Error> {
        self.validate()?;
        let grid = if self.is_2d() {
            StructuredGrid::new_2d(
                [self.elements[0], self.elements[1]],
                [self.domain[0], self.domain[1]],
            )?
        } else {
            StructuredGrid::new_3d(self.elements, self.domain)?
        };
        let dim = grid.dim();
        let tol = self.containment_tol();

        // Element roles from region boxes (element-center containment).
        let mut design = DesignField::uniform(grid.num_elements(), 0.0)?;
        let mut roles = vec![self.default_role; grid.num_elements()];
        for e in 0..grid.num_elements() {
            let c = grid.element_center(e);
            let in_solid = self.solid_regions.iter().any(|b| b.contains(c, tol));
            let in_void = self.void_regions.iter().any(|b| b.contains(c, tol));
            if in_solid && in_void {
                return Err(Error::InvalidProblem(format!(
                    "element {e} claimed by both solid and void regions"
                )));
            }
            if in_solid {
                roles[e] = Role::ForcedSolid;
            } else if in_void {
                roles[e] = Role::ForcedVoid;
            }
        }
        let init = self.volume_fraction;
        for (e, role) in roles.iter().enumerate() {
            design.set_role(e, *role);
        }
        let init_values = vec![init; grid.num_elements()];
        design.set_designable_values(&init_values)?;

        // Prescribed pressures; later BCs overwrite earlier on shared nodes.
        let mut pressure_bc_map: Vec<Option<f64>> = vec![None; grid.num_nodes()];
        for bc in &self.pressure_bcs {
            for n in 0..grid.num_nodes() {
                if bc.face.on_face(&grid, grid.node_coords_of(n)) {
                    pressure_bc_map[n] = Some(bc.value);
                }
            }
        }
        let pressure_dirichlet: Vec<(usize, f64)> = pressure_bc_map
            .iter()
            .enumerate()
            .filter_map(|(n, v)| v.map(|v| (n, v)))
            .collect();

        // Fixed displacement DOFs.
        let mut fixed = vec![false; dim * grid.num_nodes()];
        for support in &self.supports {
            match support {
                SupportRegion::FaceEdges { face } => {
                    let a = face.axis();
                    for n in 0..grid.num_nodes() {
                        let c = grid.node_coords_of(n);
                        if !face.on_face(&grid, c) {
                            continue;
                        }
                        let on_ring = (0..dim).any(|d| {
                            d != a
                                && (c[d] == 0
                                    || c[d] == grid.num_nodes_per_axis()[d] - 1)
                        });
                        if on_ring {
                            for d in 0..dim {
                                fixed[dim * n + d] = true;
                            }
                        }
                    }
                }
                SupportRegion::NodeBox { region } => {
                    for n in 0..grid.num_nodes() {
                        if region.contains(grid.node_position(n), tol) {
                            for d in 0..dim {
                                fixed[dim * n + d] = true;
                            }
                        }
                    }
                }
            }
        }
        // Symmetry rollers: zero normal displacement.
        for face in &self.symmetry_planes {
            let a = face.axis();
            for n in 0..grid.num_nodes() {
                if face.on_face(&grid, grid.node_coords_of(n)) {
                    fixed[dim * n + a] = true;
                }
            }
        }
        let fixed_dofs: Vec<usize> =
            fixed.iter().enumerate().filter_map(|(d, &f)| f.then_some(d)).collect();

        // Output springs and dummy load.
        let mut springs = Vec::new();
        let mut dummy_load = None;
        let mut output_nodes = Vec::new();
        if let Some(out) = &self.output {
            if out.axis >= dim {
                return Err(Error::InvalidProblem("output axis outside the dimension".into()));
            }
            for n in 0..grid.num_nodes() {
                if out.region.contains(grid.node_position(n), tol) {
                    output_nodes.push(n);
                }
            }
            if output_nodes.is_empty() {
                return Err(Error::InvalidProblem("output region contains no nodes".into()));
            }
            let mut f_d = vec![0.0; dim * grid.num_nodes()];
            let share = out.direction / output_nodes.len() as f64;
            for &n in &output_nodes {
                springs.push(Spring { dof: dim * n + out.axis, stiffness: out.spring_per_node });
                f_d[dim * n + out.axis] = share;
            }
            dummy_load = Some(f_d);
        }
        if self.objective.needs_dummy_load() && dummy_load.is_none() {
            return Err(Error::InvalidProblem(
                "multi-criteria objective needs an output definition".into(),
            ));
        }

        // Probe and reporting node sets.
        let probe_nodes = self
            .probes
            .iter()
            .map(|p| (p.name.clone(), nearest_node(&grid, p.position)))
            .collect();
        let solid_region_nodes = self
            .solid_regions
            .iter()
            .map(|b| {
                (0..grid.num_nodes())
                    .filter(|&n| b.contains(grid.node_position(n), tol))
                    .collect()
            })
            .collect();

        let flow = self.flow.resolve(&grid);
        flow.validate()?;
        let filter_radius = self.filter.radius(&grid);

        Ok(ProblemModel {
            grid,
            design,
            pressure_dirichlet,
            fixed_dofs,
            springs,
            dummy_load,
            output_nodes,
            flow,
            filter_radius,
            probe_nodes,
            solid_region_nodes,
        })
    }
}

fn nearest_node(grid: &StructuredGrid, p: [f64; 3]) -> usize {
    let [dx, dy, dz] = grid.element_size();
    let [nx, ny, nz] = grid.num_nodes_per_axis();
    let snap = |x: f64, d: f64, n: usize| -> usize {
        if d == 0.0 {
            return 0;
        }
        ((x / d).round().max(0.0) as usize).min(n - 1)
    };
    grid.node_index(snap(p[0], dx, nx), snap(p[1], dy, ny), snap(p[2], dz, nz))
}

/// Everything the pipeline needs to run one problem at one resolution.
pub struct ProblemModel {
    pub grid: StructuredGrid,
    pub design: DesignField,
    pub pressure_dirichlet: Vec<(usize, f64)>,
    pub fixed_dofs: Vec<usize>,
    pub springs: Vec<Spring>,
    pub dummy_load: Option<Vec<f64>>,
    pub output_nodes: Vec<usize>,
    pub flow: FlowParams,
    pub filter_radius: f64,
    /// Probe name and nearest node.
    pub probe_nodes: Vec<(String, usize)>,
    /// Node sets of the forced-solid boxes, in spec order.
    pub solid_region_nodes: Vec<Vec<usize>>,
}

/// Table-defaults shared by the catalog problems.
fn default_material() -> MaterialParams {
    let e1 = 5.0e8;
    MaterialParams { e1, e0: 1e-6 * e1, nu: 0.40, zeta: 3.0 }
}

fn default_flow() -> FlowSettings {
    FlowSettings {
        k_v: 1.0,
        epsilon: 1e-7,
        eta_k: 0.3,
        beta_k: 10.0,
        eta_d: 0.2,
        beta_d: 10.0,
        remainder: 0.1,
        delta_s_elements: 2.0,
        drainage: true,
    }
}

/// Names accepted by [`catalog`].
pub const PROBLEM_NAMES: [&str; 7] =
    ["test3d", "arc2d", "lid", "extpress", "inverter", "gripper", "magnifier"];

/// Benchmark problem definitions at their default resolutions.
pub fn catalog(name: &str) -> Result<ProblemSpec, Error> {
    match name {
        "test3d" => Ok(test3d()),
        "arc2d" => Ok(arc2d()),
        "lid" => Ok(lid()),
        "extpress" => Ok(extpress_half()),
        "inverter" => Ok(mechanism("inverter")),
        "gripper" => Ok(mechanism("gripper")),
        "magnifier" => Ok(mechanism("magnifier")),
        other => Err(Error::UnknownProblem(other.into())),
    }
}

/// Pressure-pipeline qualification domain: two full-section solid blocks
/// inside a void duct, pressure across the duct. No structural problem.
fn test3d() -> ProblemSpec {
    let (lx, ly, lz) = (0.02, 0.01, 0.01);
    ProblemSpec {
        name: "test3d".into(),
        elements: [48, 24, 24],
        domain: [lx, ly, lz],
        pressure_bcs: vec![
            FaceBc { face: Face::XMax, value: 0.0 },
            FaceBc { face: Face::XMin, value: BAR },
        ],
        supports: vec![],
        symmetry_planes: vec![],
        solid_regions: vec![
            BoxRegion::new([lx / 6.0, 0.0, 0.0], [2.0 * lx / 6.0, ly, lz]),
            BoxRegion::new([3.0 * lx / 6.0, 0.0, 0.0], [4.0 * lx / 6.0, ly, lz]),
        ],
        void_regions: vec![],
        default_role: Role::ForcedVoid,
        output: None,
        objective: ObjectiveKind::Compliance,
        volume_fraction: 1.0,
        filter: FilterRule::MinEdgeFactor { factor: 3f64.sqrt() },
        flow: default_flow(),
        material: default_material(),
        max_iterations: 0,
        move_limit: 0.1,
        probes: vec![Probe {
            name: "mid_gap".into(),
            position: [2.5 * lx / 6.0, ly / 2.0, lz / 2.0],
        }],
        structural: false,
    }
}

/// Internally pressurized 2D arc: pressure along the bottom edge, corner
/// supports, compliance objective. Steel-scale modulus; the flow-contrast
/// study this problem reproduces was run with structural-steel material
/// rather than the soft default of the 3D problems.
fn arc2d() -> ProblemSpec {
    let (lx, ly) = (0.2, 0.1);
    let e1 = 2.1e11;
    ProblemSpec {
        name: "arc2d".into(),
        elements: [200, 100, 0],
        domain: [lx, ly, 0.0],
        pressure_bcs: vec![
            FaceBc { face: Face::XMin, value: 0.0 },
            FaceBc { face: Face::XMax, value: 0.0 },
            FaceBc { face: Face::YMax, value: 0.0 },
            FaceBc { face: Face::YMin, value: BAR },
        ],
        supports: vec![
            SupportRegion::NodeBox {
                region: BoxRegion::new([0.0, 0.0, 0.0], [lx / 20.0, 0.0, 0.0]),
            },
            SupportRegion::NodeBox {
                region: BoxRegion::new([lx - lx / 20.0, 0.0, 0.0], [lx, 0.0, 0.0]),
            },
        ],
        symmetry_planes: vec![],
        solid_regions: vec![],
        void_regions: vec![],
        default_role: Role::Designable,
        output: None,
        objective: ObjectiveKind::Compliance,
        volume_fraction: 0.2,
        filter: FilterRule::MinEdgeFactor { factor: 2.0 },
        flow: default_flow(),
        material: MaterialParams { e1, e0: 1e-6 * e1, nu: 0.40, zeta: 3.0 },
        max_iterations: 100,
        move_limit: 0.1,
        probes: vec![],
        structural: true,
    }
}

/// Pressurized lid: pressure on the top face, the top-face boundary edges
/// fixed, full model.
fn lid() -> ProblemSpec {
    let (lx, ly, lz) = (0.2, 0.1, 0.1);
    ProblemSpec {
        name: "lid".into(),
        elements: [120, 60, 60],
        domain: [lx, ly, lz],
        pressure_bcs: vec![
            FaceBc { face: Face::XMin, value: 0.0 },
            FaceBc { face: Face::XMax, value: 0.0 },
            FaceBc { face: Face::YMin, value: 0.0 },
            FaceBc { face: Face::YMax, value: 0.0 },
            FaceBc { face: Face::ZMin, value: 0.0 },
            FaceBc { face: Face::ZMax, value: BAR },
        ],
        supports: vec![SupportRegion::FaceEdges { face: Face::ZMax }],
        symmetry_planes: vec![],
        solid_regions: vec![],
        void_regions: vec![],
        default_role: Role::Designable,
        output: None,
        objective: ObjectiveKind::Compliance,
        volume_fraction: 0.25,
        filter: FilterRule::MinEdgeFactor { factor: 3f64.sqrt() },
        flow: default_flow(),
        material: default_material(),
        max_iterations: 100,
        move_limit: 0.1,
        probes: vec![],
        structural: true,
    }
}

/// Externally pressurized structure, half model symmetric about the
/// x-max plane: pressure on the top face, bottom-face edges fixed.
fn extpress_half() -> ProblemSpec {
    let (lx, ly, lz) = (0.1, 0.1, 0.1);
    ProblemSpec {
        name: "extpress".into(),
        elements: [80, 80, 80],
        domain: [lx, ly, lz],
        pressure_bcs: vec![
            FaceBc { face: Face::XMin, value: 0.0 },
            FaceBc { face: Face::YMin, value: 0.0 },
            FaceBc { face: Face::YMax, value: 0.0 },
            FaceBc { face: Face::ZMin, value: 0.0 },
            FaceBc { face: Face::ZMax, value: BAR },
        ],
        supports: vec![
            // Bottom-face edges, except the edge lying on the symmetry plane.
            SupportRegion::NodeBox { region: BoxRegion::new([0.0, 0.0, 0.0], [0.0, ly, 0.0]) },
            SupportRegion::NodeBox { region: BoxRegion::new([0.0, 0.0, 0.0], [lx, 0.0, 0.0]) },
            SupportRegion::NodeBox { region: BoxRegion::new([0.0, ly, 0.0], [lx, ly, 0.0]) },
        ],
        symmetry_planes: vec![Face::XMax],
        solid_regions: vec![],
        void_regions: vec![],
        default_role: Role::Designable,
        output: None,
        objective: ObjectiveKind::Compliance,
        volume_fraction: 0.25,
        filter: FilterRule::MinEdgeFactor { factor: 3f64.sqrt() },
        flow: default_flow(),
        material: default_material(),
        max_iterations: 100,
        move_limit: 0.1,
        probes: vec![],
        structural: true,
    }
}

/// Full (unsymmetric) externally pressurized model, used to validate the
/// half model against; not part of the named catalog.
pub fn extpress_full_model() -> ProblemSpec {
    let mut spec = extpress_half();
    spec.name = "extpress_full".into();
    spec.domain = [0.2, 0.1, 0.1];
    spec.elements = [160, 80, 80];
    spec.symmetry_planes.clear();
    spec.pressure_bcs = vec![
        FaceBc { face: Face::XMin, value: 0.0 },
        FaceBc { face: Face::XMax, value: 0.0 },
        FaceBc { face: Face::YMin, value: 0.0 },
        FaceBc { face: Face::YMax, value: 0.0 },
        FaceBc { face: Face::ZMin, value: 0.0 },
        FaceBc { face: Face::ZMax, value: BAR },
    ];
    spec.supports = vec![SupportRegion::FaceEdges { face: Face::ZMin }];
    spec
}

/// Quarter models of the pressure-actuated compliant mechanisms. The
/// quarter spans the full x extent; the y-max and z-max faces are the
/// symmetry planes. A solid rim frames the inlet, a void block in front
/// of the inlet keeps the pressure chamber open, and the rim nodes on the
/// inlet face anchor the structure.
fn mechanism(which: &str) -> ProblemSpec {
    let (lx, ly, lz) = (0.2, 0.1, 0.1);
    let rim_depth = lx / 8.0;
    let rim_y = ly / 15.0;
    let rim_z = lz / 15.0;

    let solid_rim = vec![
        BoxRegion::new([0.0, 0.0, 0.0], [rim_depth, rim_y, lz]),
        BoxRegion::new([0.0, 0.0, 0.0], [rim_depth, ly, rim_z]),
    ];
    let void_block = BoxRegion::new([0.0, rim_y, rim_z], [lx / 10.0, ly, lz]);

    let mut solid_regions = solid_rim;
    let mut void_regions = vec![void_block];
    let output = match which {
        "inverter" => OutputSpec {
            region: BoxRegion::new([lx, ly, lz], [lx, ly, lz]),
            axis: 0,
            direction: -1.0,
            spring_per_node: 500.0,
        },
        "gripper" => {
            // Jaw plate over a void slot at the output end, both adjacent
            // to the z symmetry plane; gripping closes toward the plane.
            let slot = BoxRegion::new([lx - lx / 8.0, 0.0, lz - lz / 10.0], [lx, ly, lz]);
            let jaw = BoxRegion::new(
                [lx - lx / 8.0, ly / 2.0, lz - lz / 10.0 - lz / 20.0],
                [lx, ly, lz - lz / 10.0],
            );
            void_regions.push(slot);
            solid_regions.push(jaw);
            OutputSpec { region: jaw, axis: 2, direction: 1.0, spring_per_node: 50.0 }
        }
        "magnifier" => OutputSpec {
            region: BoxRegion::new([lx / 2.0, 0.0, lz], [lx / 2.0, 0.0, lz]),
            axis: 1,
            direction: -1.0,
            spring_per_node: 500.0,
        },
        other => unreachable!("unknown mechanism {other}"),
    };

    let mut flow = default_flow();
    flow.eta_k = 0.1;
    flow.eta_d = 0.2;

    ProblemSpec {
        name: which.into(),
        elements: [120, 60, 60],
        domain: [lx, ly, lz],
        pressure_bcs: vec![
            FaceBc { face: Face::XMax, value: 0.0 },
            FaceBc { face: Face::YMin, value: 0.0 },
            FaceBc { face: Face::ZMin, value: 0.0 },
            FaceBc { face: Face::XMin, value: BAR },
        ],
        supports: vec![
            SupportRegion::NodeBox { region: BoxRegion::new([0.0, 0.0, 0.0], [0.0, rim_y, lz]) },
            SupportRegion::NodeBox { region: BoxRegion::new([0.0, 0.0, 0.0], [0.0, ly, rim_z]) },
        ],
        symmetry_planes: vec![Face::YMax, Face::ZMax],
        solid_regions,
        void_regions,
        default_role: Role::Designable,
        output: Some(output),
        objective: ObjectiveKind::MultiCriteria { mu: 100.0 },
        volume_fraction: 0.1,
        filter: FilterRule::MinEdgeFactor { factor: 3f64.sqrt() },
        flow,
        material: default_material(),
        max_iterations: 250,
        move_limit: 0.1,
        probes: vec![],
        structural: true,
    }
}
