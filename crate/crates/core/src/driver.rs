//! Orchestration: one forward evaluation of the coupled pipeline
//! (filter, Darcy pressure, load conversion, elasticity, objective), the
//! adjoint gradient, and the MMA-driven optimization loop.

use crate::config::RunSettings;
use crate::darcy::{PressureSystem, TransformationMatrix};
use crate::elastic::{mutual_strain_energy, strain_energy, ElasticSystem, MaterialParams};
use crate::error::Error;
use crate::fields::{DesignField, FilterOperator};
use crate::mma::{MmaParams, MmaState};
use crate::problems::{ProblemModel, ProblemSpec};
use crate::sensitivity::{
    full_gradient, objective_value, AdjointInputs, SensitivityBundle, StructuralState,
};
use crate::solver::{IncompleteCholesky, SolveOpts, SolveStats};
use std::time::Instant;

/// One forward evaluation of the pipeline at the current design.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub rho_tilde: Vec<f64>,
    /// Nodal pressure, prescribed values included.
    pub p: Vec<f64>,
    /// Consistent nodal loads F = -D_T p.
    pub loads: Vec<f64>,
    pub state: Option<StructuralState>,
    /// Objective value; absent for pressure-only problems.
    pub f0: Option<f64>,
    pub pressure_stats: SolveStats,
    pub state_stats: SolveStats,
    pub dummy_stats: SolveStats,
    /// Wall seconds spent in the pressure and structural phases.
    pub pressure_seconds: f64,
    pub structural_seconds: f64,
}

/// Assembled systems for one problem at one resolution, with warm-start
/// caches for the optimization loop.
pub struct Pipeline {
    spec: ProblemSpec,
    model: ProblemModel,
    material: MaterialParams,
    filter: FilterOperator,
    pressure: PressureSystem,
    transform: TransformationMatrix,
    elastic: Option<ElasticSystem>,
    opts: SolveOpts,
    warm_starts: bool,
    pressure_factor: Option<IncompleteCholesky>,
    warm_p: Option<Vec<f64>>,
    warm_u: Option<Vec<f64>>,
    warm_v: Option<Vec<f64>>,
    warm_adjoint: Option<Vec<f64>>,
}

impl Pipeline {
    pub fn new(spec: &ProblemSpec) -> Result<Self, Error> {
        Self::with_options(spec, SolveOpts::default(), true)
    }

    pub fn with_options(spec: &ProblemSpec, opts: SolveOpts, warm_starts: bool) -> Result<Self, Error> {
        let model = spec.build()?;
        let filter = FilterOperator::build(&model.grid, model.filter_radius)?;
        let pressure = PressureSystem::new(&model.grid, &model.pressure_dirichlet)?;
        let transform = TransformationMatrix::build(&model.grid)?;
        let elastic = if spec.structural {
            Some(ElasticSystem::new(
                &model.grid,
                spec.material.nu,
                &model.fixed_dofs,
                &model.springs,
            )?)
        } else {
            None
        };
        Ok(Self {
            material: spec.material,
            spec: spec.clone(),
            model,
            filter,
            pressure,
            transform,
            elastic,
            opts,
            warm_starts,
            pressure_factor: None,
            warm_p: None,
            warm_u: None,
            warm_v: None,
            warm_adjoint: None,
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn model(&self) -> &ProblemModel {
        &self.model
    }

    pub fn design(&self) -> &DesignField {
        &self.model.design
    }

    pub fn set_design_values(&mut self, values: &[f64]) -> Result<(), Error> {
        self.model.design.set_designable_values(values)
    }

    pub fn solve_opts(&self) -> SolveOpts {
        self.opts
    }

    pub fn set_solve_opts(&mut self, opts: SolveOpts) {
        self.opts = opts;
    }

    pub fn set_warm_starts(&mut self, on: bool) {
        self.warm_starts = on;
        if !on {
            self.warm_p = None;
            self.warm_u = None;
            self.warm_v = None;
            self.warm_adjoint = None;
        }
    }

    /// Filter, pressure solve, load conversion, structural solves and the
    /// objective. The pressure preconditioner is kept for the adjoint.
    pub fn evaluate(&mut self) -> Result<Evaluation, Error> {
        let t0 = Instant::now();
        let rho_tilde = self.filter.apply(&self.model.design)?;

        self.pressure.assemble(&rho_tilde, &self.model.flow)?;
        let factor = self.pressure.factor()?;
        let (p, pressure_stats) =
            self.pressure.solve(&factor, &self.opts, self.warm_p.as_deref())?;
        self.pressure_factor = Some(factor);
        if self.warm_starts {
            self.warm_p = Some(p.clone());
        }

        let loads = self.transform.nodal_loads(&p)?;
        let pressure_seconds = t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        let mut state = None;
        let mut f0 = None;
        let mut state_stats = SolveStats::default();
        let mut dummy_stats = SolveStats::default();
        if let Some(elastic) = self.elastic.as_mut() {
            elastic.assemble(&rho_tilde, &self.material)?;
            let k_factor = elastic.factor()?;
            let (u, us) = elastic.solve(&k_factor, &loads, &self.opts, self.warm_u.as_deref())?;
            state_stats = us;
            let se = strain_energy(&loads, &u);
            let (v, mse) = if let Some(f_d) = &self.model.dummy_load {
                let (v, vs) =
                    elastic.solve(&k_factor, f_d, &self.opts, self.warm_v.as_deref())?;
                dummy_stats = vs;
                let mse = mutual_strain_energy(f_d, &u);
                if self.warm_starts {
                    self.warm_v = Some(v.clone());
                }
                (Some(v), Some(mse))
            } else {
                (None, None)
            };
            if self.warm_starts {
                self.warm_u = Some(u.clone());
            }
            let s = StructuralState { u, v, se, mse };
            f0 = Some(objective_value(self.spec.objective, &s)?);
            state = Some(s);
        }
        let structural_seconds = t1.elapsed().as_secs_f64();

        Ok(Evaluation {
            rho_tilde,
            p,
            loads,
            state,
            f0,
            pressure_stats,
            state_stats,
            dummy_stats,
            pressure_seconds,
            structural_seconds,
        })
    }

    /// Adjoint gradient at the design of the latest [`Pipeline::evaluate`].
    pub fn gradient(&mut self, eval: &Evaluation) -> Result<SensitivityBundle, Error> {
        let state = eval
            .state
            .as_ref()
            .ok_or_else(|| Error::InvalidProblem("gradient needs a structural state".into()))?;
        let elastic = self
            .elastic
            .as_ref()
            .ok_or_else(|| Error::InvalidProblem("gradient needs the elastic system".into()))?;
        let factor = self
            .pressure_factor
            .as_ref()
            .ok_or_else(|| Error::InvalidProblem("evaluate before gradient".into()))?;
        let inputs = AdjointInputs {
            pressure: &self.pressure,
            pressure_factor: factor,
            transform: &self.transform,
            elastic,
            flow: &self.model.flow,
            material: &self.material,
            rho_tilde: &eval.rho_tilde,
            p: &eval.p,
            opts: self.opts,
            adjoint_warm: self.warm_adjoint.as_deref(),
        };
        let (bundle, lambda) = full_gradient(
            self.spec.objective,
            &inputs,
            state,
            &self.filter,
            &self.model.design,
            self.spec.volume_fraction,
        )?;
        if self.warm_starts {
            self.warm_adjoint = Some(lambda);
        }
        Ok(bundle)
    }

    /// Pressure at each named probe.
    pub fn probe_pressures(&self, eval: &Evaluation) -> Vec<(String, f64)> {
        self.model
            .probe_nodes
            .iter()
            .map(|(name, n)| (name.clone(), eval.p[*n]))
            .collect()
    }

    /// Net consistent force on each forced-solid region, by axis.
    pub fn region_forces(&self, eval: &Evaluation) -> Vec<[f64; 3]> {
        let dim = self.model.grid.dim();
        self.model
            .solid_region_nodes
            .iter()
            .map(|nodes| {
                let mut f = [0.0; 3];
                for &n in nodes {
                    for d in 0..dim {
                        f[d] += eval.loads[dim * n + d];
                    }
                }
                f
            })
            .collect()
    }

    /// Displacement of the output port along the desired direction,
    /// averaged over the output nodes (positive = intended motion).
    pub fn output_displacement(&self, eval: &Evaluation) -> Option<f64> {
        let out = self.spec.output.as_ref()?;
        let state = eval.state.as_ref()?;
        let dim = self.model.grid.dim();
        let mean = self
            .model
            .output_nodes
            .iter()
            .map(|&n| state.u[dim * n + out.axis])
            .sum::<f64>()
            / self.model.output_nodes.len() as f64;
        Some(out.direction * mean)
    }
}

/// Per-iteration log entry of the optimization loop.
#[derive(Debug, Clone)]
pub struct ConvergenceRecord {
    pub iteration: usize,
    pub f0: f64,
    pub g1: f64,
    pub volume_fraction: f64,
    /// Max design change of the update applied after this evaluation.
    pub max_change: f64,
    pub pressure_iterations: usize,
    pub state_iterations: usize,
    pub dummy_iterations: usize,
    pub adjoint_iterations: usize,
    /// Wall-clock seconds per phase: pressure, structural, sensitivity,
    /// design update.
    pub phase_seconds: [f64; 4],
}

/// Borrowed view of the current iterate handed to run observers.
pub struct Snapshot<'a> {
    pub design: &'a [f64],
    pub rho_tilde: &'a [f64],
    pub p: &'a [f64],
    pub u: Option<&'a [f64]>,
}

/// Final outcome of a run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub iterations: usize,
    pub stopped_early: bool,
    pub final_f0: f64,
    pub final_g1: f64,
    pub final_volume_fraction: f64,
    pub history: Vec<ConvergenceRecord>,
}

/// Execute the optimization loop. The observer runs once per accepted
/// iteration (after the design update), receiving the record and the
/// pre-update iterate snapshot.
pub fn run(
    pipeline: &mut Pipeline,
    settings: &RunSettings,
    mut observer: impl FnMut(&ConvergenceRecord, &Snapshot<'_>) -> Result<(), Error>,
) -> Result<RunSummary, Error> {
    let spec = pipeline.spec().clone();
    let max_iterations = settings.max_iterations.unwrap_or(spec.max_iterations);
    let move_limit = settings.move_limit.unwrap_or(spec.move_limit);
    if !spec.structural && max_iterations > 0 {
        return Err(Error::InvalidProblem(format!(
            "problem '{}' has no structural model; only analysis (0 iterations) is possible",
            spec.name
        )));
    }

    let designable = pipeline.design().designable_indices();
    let mut mma = MmaState::new(designable.len(), MmaParams::default());
    let mut history: Vec<ConvergenceRecord> = Vec::new();
    let mut stopped_early = false;

    for it in 0..max_iterations {
        let eval = pipeline.evaluate().map_err(|e| e.in_phase("evaluate", it))?;

        let t1 = Instant::now();
        let bundle = pipeline.gradient(&eval).map_err(|e| e.in_phase("gradient", it))?;
        let t_sens = t1.elapsed().as_secs_f64();

        let t2 = Instant::now();
        let rho = pipeline.design().values().to_vec();
        let x: Vec<f64> = designable.iter().map(|&e| rho[e]).collect();
        let df0: Vec<f64> = designable.iter().map(|&e| bundle.df0[e]).collect();
        let dg1: Vec<f64> = designable.iter().map(|&e| bundle.dg1[e]).collect();
        let step = mma
            .update(&x, &df0, bundle.g1, &dg1, move_limit)
            .map_err(|e| e.in_phase("mma", it))?;
        let mut max_change = 0.0f64;
        let mut next = rho.clone();
        for (j, &e) in designable.iter().enumerate() {
            max_change = max_change.max((step.x[j] - x[j]).abs());
            next[e] = step.x[j];
        }
        pipeline.set_design_values(&next).map_err(|e| e.in_phase("update", it))?;
        let t_update = t2.elapsed().as_secs_f64();

        let volume_fraction =
            eval.rho_tilde.iter().sum::<f64>() / eval.rho_tilde.len() as f64;
        let record = ConvergenceRecord {
            iteration: it,
            f0: bundle.f0,
            g1: bundle.g1,
            volume_fraction,
            max_change,
            pressure_iterations: eval.pressure_stats.iterations,
            state_iterations: eval.state_stats.iterations,
            dummy_iterations: eval.dummy_stats.iterations,
            adjoint_iterations: bundle.adjoint_stats.iterations,
            phase_seconds: [eval.pressure_seconds, eval.structural_seconds, t_sens, t_update],
        };
        let snapshot = Snapshot {
            design: &rho,
            rho_tilde: &eval.rho_tilde,
            p: &eval.p,
            u: eval.state.as_ref().map(|s| s.u.as_slice()),
        };
        observer(&record, &snapshot)?;
        history.push(record);

        if settings.early_stop && max_change < settings.change_tol {
            stopped_early = true;
            break;
        }
    }

    // Final state at the final design.
    let final_eval = pipeline.evaluate().map_err(|e| e.in_phase("final", history.len()))?;
    let final_volume =
        final_eval.rho_tilde.iter().sum::<f64>() / final_eval.rho_tilde.len() as f64;
    let final_g1 = final_volume / spec.volume_fraction - 1.0;
    let final_f0 = final_eval.f0.unwrap_or(0.0);
    Ok(RunSummary {
        iterations: history.len(),
        stopped_early,
        final_f0,
        final_g1,
        final_volume_fraction: final_volume,
        history,
    })
}

/// Analysis report: one forward evaluation, no design mutation.
#[derive(Debug, Clone)]
pub struct AnalysisReport {
    pub evaluation: Evaluation,
    pub probes: Vec<(String, f64)>,
    pub region_forces: Vec<[f64; 3]>,
    pub output_displacement: Option<f64>,
}

/// Run the pipeline once at the initial design (analysis-only mode).
pub fn analyze(pipeline: &mut Pipeline) -> Result<AnalysisReport, Error> {
    let before = pipeline.design().values().to_vec();
    let evaluation = pipeline.evaluate()?;
    debug_assert_eq!(pipeline.design().values(), &before[..], "analysis must not mutate the design");
    let probes = pipeline.probe_pressures(&evaluation);
    let region_forces = pipeline.region_forces(&evaluation);
    let output_displacement = pipeline.output_displacement(&evaluation);
    Ok(AnalysisReport { evaluation, probes, region_forces, output_displacement })
}
