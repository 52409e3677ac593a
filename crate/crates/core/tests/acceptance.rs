//! Acceptance suite: end-to-end checks of the benchmark behaviors, one
//! test per criterion, serialized through a global lock so the reported
//! wall times are meaningful. Run with `--nocapture` to see the PASS
//! lines and measured values.

mod common;

use common::run_fd_check;
use pressto::config::RunSettings;
use pressto::darcy::{PressureSystem, TransformationMatrix};
use pressto::driver::{analyze, run, Pipeline, RunSummary};
use pressto::elastic::ElasticSystem;
use pressto::fdcheck::max_relative_error;
use pressto::fields::{heaviside, simp_modulus, FilterOperator};
use pressto::grid::StructuredGrid;
use pressto::problems::{catalog, extpress_full_model, ProblemSpec, BAR};
use pressto::sensitivity::ObjectiveKind;
use pressto::solver::{direct_solve, pcg, CsrMatrix, IncompleteCholesky, SolveOpts};
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

static GATE: Mutex<()> = Mutex::new(());

fn gate() -> MutexGuard<'static, ()> {
    GATE.lock().unwrap_or_else(|e| e.into_inner())
}

fn pass(criterion: &str, details: String) {
    eprintln!("ACCEPTANCE {criterion}: PASS — {details}");
}

#[test]
fn criterion_1_force_conservation() {
    let _g = gate();
    // Single-threaded, as specified: run the whole analysis inside a
    // one-thread pool.
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let t0 = Instant::now();
    let (fx, probe) = pool.install(|| {
        let spec = catalog("test3d").unwrap();
        assert_eq!(spec.elements, [48, 24, 24]);
        let mut pipeline =
            Pipeline::with_options(&spec, SolveOpts { tol: 1e-10, max_iter: 0 }, false).unwrap();
        let report = analyze(&mut pipeline).unwrap();
        (report.region_forces[0][0], report.probes[0].1)
    });
    let elapsed = t0.elapsed();
    let rel = (fx - 10.0).abs() / 10.0;
    assert!(rel <= 1e-3, "first-block x force {fx} N deviates {rel:.2e} from 10 N");
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    pass(
        "1 force-conservation",
        format!("Fx(block 1) = {fx:.6} N (rel err {rel:.1e}), mid-gap p = {probe:.3e} N/m^2, {elapsed:.2?} single-threaded"),
    );
}

#[test]
fn criterion_2_drainage_confinement() {
    let _g = gate();
    let opts = SolveOpts { tol: 1e-11, max_iter: 0 };
    let spec = catalog("test3d").unwrap();
    let mut pipeline = Pipeline::with_options(&spec, opts, false).unwrap();
    let with = analyze(&mut pipeline).unwrap().probes[0].1;
    assert!(
        with <= 0.01 * BAR,
        "drained mid-gap pressure {with} exceeds 0.01 p_in"
    );

    let mut spec_nd = spec;
    spec_nd.flow.drainage = false;
    let mut pipeline = Pipeline::with_options(&spec_nd, opts, false).unwrap();
    let without = analyze(&mut pipeline).unwrap().probes[0].1;
    assert!(
        (0.4 * BAR..=0.6 * BAR).contains(&without),
        "undrained mid-gap pressure {without} outside [0.4, 0.6] p_in"
    );
    pass(
        "2 drainage-confinement",
        format!(
            "mid-gap p/p_in = {:.3e} with drainage, {:.3} without",
            with / BAR,
            without / BAR
        ),
    );
}

#[test]
fn criterion_3_adjoint_correctness() {
    let _g = gate();
    let t0 = Instant::now();
    let mut details = String::new();
    for (kind, label, seed) in [
        (ObjectiveKind::Compliance, "compliance", 11u64),
        (ObjectiveKind::MultiCriteria { mu: 100.0 }, "multi-criteria", 23),
    ] {
        let out = run_fd_check(kind, seed);
        let scale = out.fd.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let err = max_relative_error(&out.adj, &out.fd, 1e-6 * scale);
        assert!(err <= 1e-4, "{label}: adjoint vs fd relative error {err}");
        let ablated = max_relative_error(&out.ablated, &out.fd, 1e-6 * scale);
        assert!(ablated > 0.01, "{label}: ablation only changes the match by {ablated}");
        details.push_str(&format!("{label}: err {err:.2e}, ablated err {ablated:.2e}; "));
    }
    let elapsed = t0.elapsed();
    assert!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    pass("3 adjoint-correctness", format!("{details}{elapsed:.1?}"));
}

#[test]
fn criterion_4_flow_contrast_sweep() {
    let _g = gate();
    let t0 = Instant::now();
    let sweep = [1e-1, 1e-3, 1e-5, 1e-7];
    let mut finals = Vec::new();
    for eps in sweep {
        let mut spec = catalog("arc2d").unwrap();
        assert_eq!(spec.elements, [200, 100, 0]);
        spec.flow.epsilon = eps;
        let settings = RunSettings::default();
        let mut pipeline =
            Pipeline::with_options(&spec, settings.solve_opts(), settings.warm_starts).unwrap();
        let summary = run(&mut pipeline, &settings, |_, _| Ok(())).unwrap();
        finals.push(summary.final_f0);
    }
    let elapsed = t0.elapsed();
    assert!(
        finals[0] > finals[1] && finals[1] > finals[2],
        "compliance not strictly decreasing from eps 1e-1 to 1e-5: {finals:?}"
    );
    let target_tight = 6.602099271926e-3;
    let rel_tight = (finals[3] - target_tight).abs() / target_tight;
    assert!(rel_tight <= 0.20, "eps=1e-7 compliance {} vs {target_tight} ({rel_tight:.2})", finals[3]);
    let target_loose = 1.4172302485361e-2;
    let rel_loose = (finals[0] - target_loose).abs() / target_loose;
    assert!(rel_loose <= 0.20, "eps=1e-1 compliance {} vs {target_loose} ({rel_loose:.2})", finals[0]);
    assert!(elapsed < Duration::from_secs(30 * 60), "took {elapsed:?}");
    pass(
        "4 flow-contrast-sweep",
        format!(
            "finals {:?} N*m; eps=1e-7 off by {:.1}%, eps=1e-1 off by {:.1}%; {elapsed:.0?}",
            finals,
            rel_tight * 100.0,
            rel_loose * 100.0
        ),
    );
}

struct CatalogRun {
    name: &'static str,
    summary: RunSummary,
    /// Output displacement along the desired direction at the final design.
    output_disp: Option<f64>,
    final_mse: Option<f64>,
    wall: Duration,
}

fn optimize_catalog(name: &'static str, resolution: [usize; 3]) -> CatalogRun {
    let spec = catalog(name).unwrap().rescale(resolution);
    let settings = RunSettings::default();
    let t0 = Instant::now();
    let mut pipeline =
        Pipeline::with_options(&spec, settings.solve_opts(), settings.warm_starts).unwrap();
    let summary = run(&mut pipeline, &settings, |r, _| {
        if r.iteration % 25 == 0 {
            eprintln!(
                "  [{name}] it {:4} f0 {:+.4e} g1 {:+.2e} change {:.2e}",
                r.iteration, r.f0, r.g1, r.max_change
            );
        }
        Ok(())
    })
    .unwrap();
    let eval = pipeline.evaluate().unwrap();
    let output_disp = pipeline.output_displacement(&eval);
    let final_mse = eval.state.as_ref().and_then(|s| s.mse);
    CatalogRun { name, summary, output_disp, final_mse, wall: t0.elapsed() }
}

static MECHANISMS: OnceLock<Vec<CatalogRun>> = OnceLock::new();

fn mechanism_runs() -> &'static [CatalogRun] {
    MECHANISMS.get_or_init(|| {
        ["inverter", "gripper", "magnifier"]
            .into_iter()
            .map(|name| optimize_catalog(name, [60, 30, 30]))
            .collect()
    })
}

#[test]
fn criterion_5_constraint_activeness() {
    let _g = gate();
    let mut details = String::new();
    let mut check = |r: &CatalogRun| {
        assert!(
            r.summary.final_g1.abs() <= 1e-3,
            "{}: final g1 {} not active",
            r.name,
            r.summary.final_g1
        );
        assert!(
            r.summary.final_f0 < r.summary.history[0].f0,
            "{}: objective did not improve: {} -> {}",
            r.name,
            r.summary.history[0].f0,
            r.summary.final_f0
        );
        assert!(r.wall < Duration::from_secs(60 * 60), "{}: took {:?}", r.name, r.wall);
        details.push_str(&format!(
            "{}: f0 {:+.4e} (from {:+.4e}), |g1| {:.1e}, {} iters, {:.0?}; ",
            r.name,
            r.summary.final_f0,
            r.summary.history[0].f0,
            r.summary.final_g1.abs(),
            r.summary.iterations,
            r.wall
        ));
    };
    let lid = optimize_catalog("lid", [60, 30, 30]);
    check(&lid);
    let extpress = optimize_catalog("extpress", [40, 40, 40]);
    check(&extpress);
    for r in mechanism_runs() {
        check(r);
    }
    pass("5 constraint-activeness", details);
}

#[test]
fn criterion_6_symmetry_property() {
    let _g = gate();
    // Frozen symmetric density, solved on the half model and on the full
    // model at matched element size. Systems are built directly from the
    // catalog boundary sets so the comparison probes the solvers and BC
    // handling; the density filter would truncate asymmetrically at the
    // symmetry plane and is not part of this check.
    let half_spec = catalog("extpress").unwrap().rescale([16, 16, 16]);
    let full_spec = extpress_full_model().rescale([32, 16, 16]);
    let frozen = |grid: &StructuredGrid| -> Vec<f64> {
        let [lx_full, ly, lz] = [0.2, 0.1, 0.1];
        (0..grid.num_elements())
            .map(|e| {
                let c = grid.element_center(e);
                0.45 + 0.25
                    * (std::f64::consts::PI * c[1] / ly).sin()
                    * (std::f64::consts::PI * c[2] / lz).sin()
                    * (2.0 * std::f64::consts::PI * c[0] / lx_full).cos()
            })
            .collect()
    };

    let solve = |spec: &ProblemSpec| -> (Vec<f64>, Vec<f64>, StructuredGrid) {
        let model = spec.build().unwrap();
        let rho = frozen(&model.grid);
        let opts = SolveOpts { tol: 1e-13, max_iter: 0 };
        let mut psys = PressureSystem::new(&model.grid, &model.pressure_dirichlet).unwrap();
        psys.assemble(&rho, &model.flow).unwrap();
        let pf = psys.factor().unwrap();
        let (p, _) = psys.solve(&pf, &opts, None).unwrap();
        let transform = TransformationMatrix::build(&model.grid).unwrap();
        let loads = transform.nodal_loads(&p).unwrap();
        let mut esys =
            ElasticSystem::new(&model.grid, spec.material.nu, &model.fixed_dofs, &model.springs)
                .unwrap();
        esys.assemble(&rho, &spec.material).unwrap();
        let kf = esys.factor().unwrap();
        let (u, _) = esys.solve(&kf, &loads, &opts, None).unwrap();
        (p, u, model.grid)
    };

    let (p_half, u_half, grid_half) = solve(&half_spec);
    let (p_full, u_full, grid_full) = solve(&full_spec);

    let p_scale = p_full.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let u_scale = u_full.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut p_err = 0.0f64;
    let mut u_err = 0.0f64;
    for n_half in 0..grid_half.num_nodes() {
        let [i, j, k] = grid_half.node_coords_of(n_half);
        let n_full = grid_full.node_index(i, j, k);
        p_err = p_err.max((p_half[n_half] - p_full[n_full]).abs());
        for d in 0..3 {
            u_err = u_err.max((u_half[3 * n_half + d] - u_full[3 * n_full + d]).abs());
        }
    }
    let p_rel = p_err / p_scale;
    let u_rel = u_err / u_scale;
    assert!(p_rel <= 1e-6, "pressure mismatch {p_rel:.2e}");
    assert!(u_rel <= 1e-6, "displacement mismatch {u_rel:.2e}");
    pass(
        "6 symmetry-property",
        format!("max-norm mismatch: pressure {p_rel:.2e}, displacement {u_rel:.2e}"),
    );
}

#[test]
fn criterion_7_unit_invariants() {
    let _g = gate();
    let t0 = Instant::now();

    // Filter: row sums, nonnegativity, transpose consistency.
    let grid = StructuredGrid::new_3d([6, 5, 4], [0.6, 0.5, 0.4]).unwrap();
    let filt = FilterOperator::build(&grid, 0.27).unwrap();
    let w = filt.matrix();
    for r in 0..w.n_rows() {
        let lo = w.row_ptr()[r];
        let hi = w.row_ptr()[r + 1];
        let sum: f64 = w.values()[lo..hi].iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(w.values()[lo..hi].iter().all(|&v| v >= 0.0));
    }
    let ne = grid.num_elements();
    
    let x: Vec<f64> = (0..ne).map(|e| ((e * 7919) % 101) as f64 / 101.0).collect();
    let y: Vec<f64> = (0..ne).map(|e| ((e * 104729) % 89) as f64 / 89.0 - 0.5).collect();
    let mut xf = pressto::fields::DesignField::uniform(ne, 0.0).unwrap();
    xf.set_designable_values(&x).unwrap();
    let fx = filt.apply(&xf).unwrap();
    let fty = filt.chain_rule(&xf, &y).unwrap();
    let lhs: f64 = fx.iter().zip(&y).map(|(a, b)| a * b).sum();
    let rhs: f64 = x.iter().zip(&fty).map(|(a, b)| a * b).sum();
    assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0), "transpose identity");

    // Heaviside and SIMP endpoints.
    for (eta, beta) in [(0.3, 10.0), (0.2, 10.0), (0.5, 100.0)] {
        assert_eq!(heaviside(0.0, eta, beta), 0.0);
        assert_eq!(heaviside(1.0, eta, beta), 1.0);
    }
    let (e_void, _) = simp_modulus(0.0, 500.0, 5e8, 3.0);
    let (e_solid, _) = simp_modulus(1.0, 500.0, 5e8, 3.0);
    assert_eq!(e_void, 500.0);
    assert_eq!(e_solid, 5e8);

    // Element nullspaces: rigid modes of the stiffness, constants of the
    // conductivity.
    let cube = StructuredGrid::new_3d([1, 1, 1], [0.3, 0.4, 0.5]).unwrap();
    let ke = pressto::elastic::unit_element_stiffness(&cube, 0.4);
    let zero_modes = ke
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .filter(|l| l.abs() < 1e-9 * ke.amax())
        .count();
    assert_eq!(zero_modes, 6);
    let quad = StructuredGrid::new_2d([1, 1], [0.3, 0.4]).unwrap();
    let ke2 = pressto::elastic::unit_element_stiffness(&quad, 0.3);
    let zero_modes_2d = ke2
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .filter(|l| l.abs() < 1e-9 * ke2.amax())
        .count();
    assert_eq!(zero_modes_2d, 3);
    let cond = pressto::darcy::unit_conductivity_matrix(&cube);
    for i in 0..8 {
        let row: f64 = (0..8).map(|j| cond[(i, j)]).sum();
        assert!(row.abs() < 1e-12 * cond.amax());
    }

    // PCG against the dense direct oracle.
    let n = 60;
    let mut triplets = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let base = ((i * 31 + j * 17) % 19) as f64 / 19.0 - 0.5;
            let v = if i == j { 20.0 + base } else { base * 0.3 };
            triplets.push((i, j, v));
        }
    }
    // Symmetrize.
    let sym: Vec<(usize, usize, f64)> = triplets
        .iter()
        .map(|&(i, j, v)| {
            let w = triplets.iter().find(|&&(a, b, _)| a == j && b == i).unwrap().2;
            (i, j, 0.5 * (v + w))
        })
        .collect();
    let a = CsrMatrix::from_triplets(n, n, &sym);
    let b: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.37).sin()).collect();
    let m = IncompleteCholesky::new(&a).unwrap();
    let it = pcg(&a, &b, &m, 1e-11, 10 * n, None);
    assert!(it.converged);
    let direct = direct_solve(&a, &b).unwrap();
    let scale = direct.iter().fold(0.0f64, |mm, v| mm.max(v.abs()));
    for i in 0..n {
        assert!((it.x[i] - direct[i]).abs() <= 1e-9 * scale.max(1.0));
    }

    // MMA two-variable toy against exhaustive search.
    let toy = |x: &[f64]| -> (f64, Vec<f64>) {
        let c = [1.0, 2.0];
        let e0 = 1e-3;
        let mut f = 0.0;
        let mut df = vec![0.0; 2];
        for i in 0..2 {
            let stiff = e0 + x[i].powi(3);
            f += c[i] / stiff;
            df[i] = -c[i] * 3.0 * x[i] * x[i] / (stiff * stiff);
        }
        (f, df)
    };
    let vstar = 0.4;
    let mut best = (f64::INFINITY, [0.0, 0.0]);
    for i in 0..=1000 {
        for j in 0..=1000 {
            let x = [i as f64 / 1000.0, j as f64 / 1000.0];
            if (x[0] + x[1]) / 2.0 <= vstar + 1e-12 {
                let (f, _) = toy(&x);
                if f < best.0 {
                    best = (f, x);
                }
            }
        }
    }
    let mut mma = pressto::mma::MmaState::new(2, pressto::mma::MmaParams::default());
    let mut x = vec![vstar, vstar];
    for _ in 0..200 {
        let (_, df) = toy(&x);
        let g1 = (x[0] + x[1]) / (2.0 * vstar) - 1.0;
        x = mma.update(&x, &df, g1, &vec![1.0 / (2.0 * vstar); 2], 0.1).unwrap().x;
    }
    let (f_mma, _) = toy(&x);
    assert!(f_mma <= best.0 * (1.0 + 1e-3), "mma {} vs brute force {}", f_mma, best.0);

    let elapsed = t0.elapsed();
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    pass("7 unit-invariants", format!("all invariant suites re-passed in {elapsed:.2?}"));
}

#[test]
fn criterion_8_mechanism_sanity() {
    let _g = gate();
    let runs = mechanism_runs();
    let mut details = String::new();
    for r in runs.iter().filter(|r| r.name == "inverter" || r.name == "gripper") {
        let disp = r.output_disp.expect("mechanisms define an output");
        let mse = r.final_mse.expect("mechanisms compute MSE");
        // The dummy load points along the desired motion, so intended
        // motion means a positive desired-direction displacement and a
        // positive MSE (the inverter output moves in -x, the gripper jaw
        // closes toward the symmetry plane).
        assert!(
            disp > 0.0,
            "{}: output moves against the intended direction ({disp:.3e} m)",
            r.name
        );
        assert!(mse > 0.0, "{}: MSE {mse:.3e} not positive", r.name);
        details.push_str(&format!(
            "{}: desired-direction displacement {:+.3e} m, MSE {:+.3e}; ",
            r.name, disp, mse
        ));
    }
    pass("8 mechanism-sanity", details);
}
