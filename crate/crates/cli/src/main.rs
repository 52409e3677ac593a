//! `pressto`: topology optimization of structures and compliant
//! mechanisms under design-dependent pressure loads.

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use pressto::config::{RunConfig, SAMPLE_CONFIG};
use pressto::driver::{analyze, run, Pipeline, Snapshot};
use pressto::export::{
    write_convergence_csv, write_manifest, write_timings_csv, write_vtk, FieldExport,
};
use pressto::problems::{self, ProblemSpec};
use std::path::PathBuf;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "pressto", version, about, long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an optimization.
    Run(RunArgs),
    /// Solve the pipeline once at the initial design and report fields,
    /// probes and region forces (no design update).
    Analyze(RunArgs),
    /// List the built-in problems.
    ListProblems,
    /// Print a sample run config, or a full problem definition.
    ExportConfig(ExportConfigArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Built-in problem name (see list-problems).
    #[arg(long, short = 'p')]
    problem: Option<String>,
    /// Problem-definition TOML file (overrides --problem).
    #[arg(long)]
    spec_file: Option<PathBuf>,
    /// Run-config TOML file; flags override its values.
    #[arg(long, short = 'c')]
    config: Option<PathBuf>,
    /// Elements per axis, e.g. 60,30,30 (use nz=0 for 2D problems).
    #[arg(long, value_parser = parse_resolution)]
    resolution: Option<[usize; 3]>,
    /// Max MMA iterations (default: problem-specific).
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Output directory.
    #[arg(long, short = 'o')]
    output_dir: Option<PathBuf>,
    /// Field-export cadence in iterations (0 = final state only).
    #[arg(long)]
    export_every: Option<usize>,
    /// Worker threads (default: all cores; also PRESSTO_THREADS).
    #[arg(long)]
    threads: Option<usize>,
    /// PCG relative residual.
    #[arg(long)]
    solver_tol: Option<f64>,
    /// Disable the design-change early stop.
    #[arg(long)]
    no_early_stop: bool,
    /// Disable PCG warm starts (for bitwise-reproducible logs).
    #[arg(long)]
    cold_starts: bool,
    /// External MMA move limit per iteration.
    #[arg(long)]
    move_limit: Option<f64>,
    /// Flow contrast K_s/K_v.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Flow Heaviside step location.
    #[arg(long)]
    eta_k: Option<f64>,
    /// Flow Heaviside slope.
    #[arg(long)]
    beta_k: Option<f64>,
    /// Drainage Heaviside step location.
    #[arg(long)]
    eta_d: Option<f64>,
    /// Drainage Heaviside slope.
    #[arg(long)]
    beta_d: Option<f64>,
    /// Input-pressure remainder at the penetration depth.
    #[arg(long)]
    remainder: Option<f64>,
    /// Penetration depth in element edges.
    #[arg(long)]
    delta_s_elements: Option<f64>,
    /// Disable the drainage term.
    #[arg(long)]
    no_drainage: bool,
    /// Input pressure (N/m^2).
    #[arg(long)]
    p_in: Option<f64>,
    /// Volume fraction limit.
    #[arg(long)]
    vstar: Option<f64>,
    /// Mechanism objective scaling.
    #[arg(long)]
    mu: Option<f64>,
    /// Absolute filter radius (m).
    #[arg(long)]
    filter_radius: Option<f64>,
    /// Random seed (reserved; the numerics are deterministic).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ExportConfigArgs {
    /// Export a full problem definition instead of the run config.
    #[arg(long, short = 'p')]
    problem: Option<String>,
}

fn parse_resolution(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected nx,ny,nz".into());
    }
    let mut out = [0usize; 3];
    for (i, p) in parts.iter().enumerate() {
        out[i] = p.trim().parse().map_err(|e| format!("{p}: {e}"))?;
    }
    Ok(out)
}

impl RunArgs {
    fn into_config(self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)
                .with_context(|| format!("reading config {}", path.display()))?,
            None => RunConfig::default(),
        };
        if self.problem.is_some() {
            cfg.problem = self.problem;
        }
        if self.spec_file.is_some() {
            cfg.spec_path = self.spec_file;
        }
        if self.resolution.is_some() {
            cfg.resolution = self.resolution;
        }
        if let Some(v) = self.output_dir {
            cfg.output_dir = Some(v);
        }
        if let Some(v) = self.export_every {
            cfg.export_every = v;
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        let o = &mut cfg.overrides;
        merge(&mut o.epsilon, self.epsilon);
        merge(&mut o.eta_k, self.eta_k);
        merge(&mut o.beta_k, self.beta_k);
        merge(&mut o.eta_d, self.eta_d);
        merge(&mut o.beta_d, self.beta_d);
        merge(&mut o.r, self.remainder);
        merge(&mut o.delta_s_elements, self.delta_s_elements);
        merge(&mut o.p_in, self.p_in);
        merge(&mut o.vstar, self.vstar);
        merge(&mut o.mu, self.mu);
        merge(&mut o.move_limit, self.move_limit);
        merge(&mut o.filter_radius, self.filter_radius);
        if self.no_drainage {
            o.drainage = Some(false);
        }
        let r = &mut cfg.run;
        merge(&mut r.max_iterations, self.max_iterations);
        merge(&mut r.move_limit, self.move_limit);
        merge(&mut r.solver_tol, self.solver_tol);
        if self.no_early_stop {
            r.early_stop = Some(false);
        }
        if self.cold_starts {
            r.warm_starts = Some(false);
        }
        Ok(cfg)
    }
}

fn merge<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

fn init_threads(requested: Option<usize>) -> Result<()> {
    let threads = requested.or_else(|| {
        std::env::var("PRESSTO_THREADS").ok().and_then(|v| v.parse().ok())
    });
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build_global()
            .context("initializing the thread pool")?;
    }
    Ok(())
}

fn snapshot_fields<'a>(snap: &'a Snapshot<'_>) -> FieldExport<'a> {
    FieldExport {
        cell_scalars: vec![("design", snap.design), ("density", snap.rho_tilde)],
        point_scalars: vec![("pressure", snap.p)],
        point_vectors: snap.u.map(|u| ("displacement", u)).into_iter().collect(),
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let cfg = args.into_config()?;
    init_threads(cfg.threads)?;
    let spec = cfg.resolve_spec()?;
    let settings = cfg.run.resolve();
    let out_dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;

    eprintln!(
        "running '{}' at {:?} ({} elements), objective {:?}",
        spec.name,
        spec.elements,
        spec.elements[0] * spec.elements[1] * spec.elements[2].max(1),
        spec.objective
    );
    let t0 = Instant::now();
    let mut pipeline = Pipeline::with_options(&spec, settings.solve_opts(), settings.warm_starts)?;
    let grid = pipeline.model().grid.clone();
    let export_every = cfg.export_every;
    let dir = out_dir.clone();
    let summary = run(&mut pipeline, &settings, |record, snap| {
        eprintln!(
            "it {:4}  f0 {:+.6e}  g1 {:+.3e}  vol {:.4}  change {:.3e}",
            record.iteration, record.f0, record.g1, record.volume_fraction, record.max_change
        );
        if export_every > 0 && record.iteration % export_every == 0 {
            let path = dir.join(format!("fields_{:04}.vtk", record.iteration));
            write_vtk(&path, &grid, &snapshot_fields(snap))?;
        }
        Ok(())
    })?;
    let wall = t0.elapsed().as_secs_f64();

    write_convergence_csv(&out_dir.join("convergence.csv"), &summary.history)?;
    write_timings_csv(&out_dir.join("timings.csv"), &summary.history)?;
    write_manifest(&out_dir.join("run.json"), &spec.name, spec.elements, &summary, wall)?;

    // Final state export.
    let eval = pipeline.evaluate()?;
    let design = pipeline.design().values().to_vec();
    let snap = Snapshot {
        design: &design,
        rho_tilde: &eval.rho_tilde,
        p: &eval.p,
        u: eval.state.as_ref().map(|s| s.u.as_slice()),
    };
    write_vtk(&out_dir.join("fields_final.vtk"), &grid, &snapshot_fields(&snap))?;

    println!(
        "final: f0 = {:.6e}, g1 = {:+.3e}, volume = {:.4}, iterations = {}{}; wall {:.1}s",
        summary.final_f0,
        summary.final_g1,
        summary.final_volume_fraction,
        summary.iterations,
        if summary.stopped_early { " (early stop)" } else { "" },
        wall
    );
    if let Some(disp) = pipeline.output_displacement(&eval) {
        println!("output displacement along desired direction: {disp:+.6e} m");
    }
    println!("outputs in {}", out_dir.display());
    Ok(())
}

fn cmd_analyze(args: RunArgs) -> Result<()> {
    let cfg = args.into_config()?;
    init_threads(cfg.threads)?;
    let spec = cfg.resolve_spec()?;
    let settings = cfg.run.resolve();
    let out_dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;

    let t0 = Instant::now();
    let mut pipeline = Pipeline::with_options(&spec, settings.solve_opts(), false)?;
    let report = analyze(&mut pipeline)?;
    let wall = t0.elapsed().as_secs_f64();

    println!("analysis of '{}' at {:?} ({:.2}s)", spec.name, spec.elements, wall);
    println!(
        "pressure solve: {} iterations, residual {:.2e}",
        report.evaluation.pressure_stats.iterations, report.evaluation.pressure_stats.residual
    );
    for (name, value) in &report.probes {
        println!("probe {name}: p = {value:.6e} N/m^2");
    }
    for (i, f) in report.region_forces.iter().enumerate() {
        println!(
            "solid region {i}: F = [{:+.6e}, {:+.6e}, {:+.6e}] N",
            f[0], f[1], f[2]
        );
    }
    if let Some(f0) = report.evaluation.f0 {
        println!("objective f0 = {f0:.6e}");
    }
    if let Some(d) = report.output_displacement {
        println!("output displacement along desired direction: {d:+.6e} m");
    }

    let design = pipeline.design().values().to_vec();
    let fields = FieldExport {
        cell_scalars: vec![("design", &design), ("density", &report.evaluation.rho_tilde)],
        point_scalars: vec![("pressure", &report.evaluation.p)],
        point_vectors: report
            .evaluation
            .state
            .as_ref()
            .map(|s| ("displacement", s.u.as_slice()))
            .into_iter()
            .collect(),
    };
    write_vtk(&out_dir.join("analysis.vtk"), &pipeline.model().grid, &fields)?;
    println!("fields written to {}", out_dir.join("analysis.vtk").display());
    Ok(())
}

fn cmd_list() {
    for name in problems::PROBLEM_NAMES {
        let spec = problems::catalog(name).expect("catalog names build");
        let kind = match spec.objective {
            pressto::sensitivity::ObjectiveKind::Compliance => "compliance",
            pressto::sensitivity::ObjectiveKind::MultiCriteria { .. } => "mechanism",
        };
        println!(
            "{name:10} {kind:10} {:?} elements, V* = {}, {} iterations",
            spec.elements, spec.volume_fraction, spec.max_iterations
        );
    }
}

fn cmd_export_config(args: ExportConfigArgs) -> Result<()> {
    match args.problem {
        None => print!("{SAMPLE_CONFIG}"),
        Some(name) => {
            let spec: ProblemSpec = problems::catalog(&name)?;
            let text = toml::to_string_pretty(&spec).context("serializing the problem")?;
            println!("# Full problem definition for '{name}'.");
            println!("# Feed back via `pressto run --spec-file <file>` after editing.");
            print!("{text}");
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::ListProblems => {
            cmd_list();
            Ok(())
        }
        Command::ExportConfig(args) => cmd_export_config(args),
    }
}
