//! Shared fixtures for the integration and acceptance suites.

use pressto::driver::Pipeline;
use pressto::fdcheck::fd_gradients;
use pressto::fields::Role;
use pressto::problems::{
    BoxRegion, Face, FaceBc, FilterRule, FlowSettings, OutputSpec, ProblemSpec, SupportRegion, BAR,
};
use pressto::sensitivity::{stiffness_contractions, ObjectiveKind};
use pressto::solver::SolveOpts;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub fn table_flow() -> FlowSettings {
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

/// Small pressurized-box instance: inlet on x-min, outlets elsewhere,
/// x-min face clamped. Compliance or mechanism objective.
pub fn small_spec(objective: ObjectiveKind) -> ProblemSpec {
    let (lx, ly, lz) = (0.06, 0.04, 0.04);
    let output = if objective.needs_dummy_load() {
        Some(OutputSpec {
            region: BoxRegion::new([lx, ly / 2.0, lz / 2.0], [lx, ly / 2.0, lz / 2.0]),
            axis: 0,
            direction: -1.0,
            spring_per_node: 500.0,
        })
    } else {
        None
    };
    ProblemSpec {
        name: "fd-instance".into(),
        elements: [6, 4, 4],
        domain: [lx, ly, lz],
        pressure_bcs: vec![
            FaceBc { face: Face::XMax, value: 0.0 },
            FaceBc { face: Face::YMin, value: 0.0 },
            FaceBc { face: Face::YMax, value: 0.0 },
            FaceBc { face: Face::ZMin, value: 0.0 },
            FaceBc { face: Face::ZMax, value: 0.0 },
            FaceBc { face: Face::XMin, value: BAR },
        ],
        supports: vec![SupportRegion::NodeBox {
            region: BoxRegion::new([0.0, 0.0, 0.0], [0.0, ly, lz]),
        }],
        symmetry_planes: vec![],
        solid_regions: vec![],
        void_regions: vec![],
        default_role: Role::Designable,
        output,
        objective,
        volume_fraction: 0.5,
        filter: FilterRule::MinEdgeFactor { factor: 3f64.sqrt() },
        flow: table_flow(),
        material: pressto::elastic::MaterialParams { e1: 5e8, e0: 5e2, nu: 0.4, zeta: 3.0 },
        max_iterations: 10,
        move_limit: 0.1,
        probes: vec![],
        structural: true,
    }
}

pub fn seeded_design(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| 0.2 + 0.6 * rng.random::<f64>()).collect()
}

pub fn probe_elements(designable: &[usize], count: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut els: Vec<usize> = designable.to_vec();
    for i in (1..els.len()).rev() {
        let j = rng.random_range(0..=i);
        els.swap(i, j);
    }
    els.truncate(count);
    els
}

pub struct FdOutcome {
    pub adj: Vec<f64>,
    pub fd: Vec<f64>,
    pub fd_g: Vec<f64>,
    pub adj_g: Vec<f64>,
    /// Gradient without the load-sensitivity terms, chain-ruled, at the
    /// probe elements.
    pub ablated: Vec<f64>,
}

/// Adjoint-vs-central-difference comparison on the 6x4x4 instance: 20
/// random designable elements, step 1e-6, solver tolerance 1e-10.
pub fn run_fd_check(objective: ObjectiveKind, seed: u64) -> FdOutcome {
    let spec = small_spec(objective);
    let opts = SolveOpts { tol: 1e-10, max_iter: 0 };
    let mut pipeline = Pipeline::with_options(&spec, opts, false).unwrap();
    let ne = pipeline.model().grid.num_elements();
    pipeline.set_design_values(&seeded_design(ne, seed)).unwrap();

    let eval = pipeline.evaluate().unwrap();
    let bundle = pipeline.gradient(&eval).unwrap();

    // Load-term ablation: stiffness terms only, same filter chain.
    let state = eval.state.as_ref().unwrap();
    let stiffness_only: Vec<f64> = {
        let elastic = pressto::elastic::ElasticSystem::new(
            &pipeline.model().grid,
            spec.material.nu,
            &pipeline.model().fixed_dofs,
            &pipeline.model().springs,
        )
        .unwrap();
        let uku = stiffness_contractions(&elastic, ne, &state.u, &state.u);
        match objective {
            ObjectiveKind::Compliance => (0..ne)
                .map(|e| {
                    let (_, de) = spec.material.modulus(eval.rho_tilde[e]);
                    -de * uku[e]
                })
                .collect(),
            ObjectiveKind::MultiCriteria { mu } => {
                let v = state.v.as_ref().unwrap();
                let ukv = stiffness_contractions(&elastic, ne, &state.u, v);
                let (se, mse) = (state.se, state.mse.unwrap());
                (0..ne)
                    .map(|e| {
                        let (_, de) = spec.material.modulus(eval.rho_tilde[e]);
                        mu * (mse / (se * se) * (-0.5 * de * uku[e]) + de * ukv[e] / se)
                    })
                    .collect()
            }
        }
    };
    let filter = pressto::fields::FilterOperator::build(
        &pipeline.model().grid,
        pipeline.model().filter_radius,
    )
    .unwrap();
    let ablated_full = filter.chain_rule(pipeline.design(), &stiffness_only).unwrap();

    let designable = pipeline.design().designable_indices();
    let els = probe_elements(&designable, 20, seed + 1);
    let (fd, fd_g) = fd_gradients(&mut pipeline, &els, 1e-6).unwrap();
    FdOutcome {
        adj: els.iter().map(|&e| bundle.df0[e]).collect(),
        fd,
        fd_g,
        adj_g: els.iter().map(|&e| bundle.dg1[e]).collect(),
        ablated: els.iter().map(|&e| ablated_full[e]).collect(),
    }
}
