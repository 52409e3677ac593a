//! File outputs: legacy-VTK field exports with a plain-text sidecar, the
//! convergence CSV, and the run manifest.
//!
//! Field files are legacy VTK (ASCII, `DATASET STRUCTURED_POINTS`), in
//! this exact order: the four header lines, `DIMENSIONS nx ny nz`,
//! `ORIGIN`, `SPACING`, then `CELL_DATA n` with one `SCALARS <name>
//! double 1` block per cell field and `POINT_DATA n` with the point
//! scalars followed by `VECTORS` blocks. Values are newline-separated,
//! x fastest then y then z, every float printed as `%.9e`. Exports are
//! byte-stable: identical inputs produce identical files.

use crate::driver::{ConvergenceRecord, RunSummary};
use crate::error::Error;
use crate::grid::StructuredGrid;
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

fn fmt_f64(v: f64) -> String {
    format!("{v:.9e}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io(format!("{}: {e}", path.display()))
}

/// Per-element (cell) and per-node (point) fields of one design state.
pub struct FieldExport<'a> {
    /// Cell scalars, e.g. ("design", rho), ("density", rho_tilde).
    pub cell_scalars: Vec<(&'static str, &'a [f64])>,
    /// Point scalars, e.g. ("pressure", p).
    pub point_scalars: Vec<(&'static str, &'a [f64])>,
    /// Point vectors with `dim` components per node, e.g. displacement.
    pub point_vectors: Vec<(&'static str, &'a [f64])>,
}

/// Write a legacy-VTK structured-points file plus a `.meta.txt` sidecar.
///
/// Layout: x fastest, then y, then z, matching the grid numbering. 2D
/// grids export as a single-cell-thick slab with unit z spacing. Vectors
/// are padded to three components.
pub fn write_vtk(path: &Path, grid: &StructuredGrid, fields: &FieldExport) -> Result<(), Error> {
    let [nx, ny, nz] = grid.num_nodes_per_axis();
    let [dx, dy, dz] = grid.element_size();
    let dim = grid.dim();
    let nn = grid.num_nodes();
    let ne = grid.num_elements();

    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("pressto field export\n");
    out.push_str("ASCII\n");
    out.push_str("DATASET STRUCTURED_POINTS\n");
    let _ = writeln!(out, "DIMENSIONS {nx} {ny} {nz}");
    out.push_str("ORIGIN 0.0 0.0 0.0\n");
    let spacing_z = if grid.is_2d() { 1.0 } else { dz };
    let _ = writeln!(out, "SPACING {} {} {}", fmt_f64(dx), fmt_f64(dy), fmt_f64(spacing_z));

    let _ = writeln!(out, "CELL_DATA {ne}");
    for (name, values) in &fields.cell_scalars {
        if values.len() != ne {
            return Err(Error::SizeMismatch { expected: ne, got: values.len(), what: "cell field" });
        }
        let _ = writeln!(out, "SCALARS {name} double 1");
        out.push_str("LOOKUP_TABLE default\n");
        for v in *values {
            out.push_str(&fmt_f64(*v));
            out.push('\n');
        }
    }

    let _ = writeln!(out, "POINT_DATA {nn}");
    for (name, values) in &fields.point_scalars {
        if values.len() != nn {
            return Err(Error::SizeMismatch { expected: nn, got: values.len(), what: "point field" });
        }
        let _ = writeln!(out, "SCALARS {name} double 1");
        out.push_str("LOOKUP_TABLE default\n");
        for v in *values {
            out.push_str(&fmt_f64(*v));
            out.push('\n');
        }
    }
    for (name, values) in &fields.point_vectors {
        if values.len() != dim * nn {
            return Err(Error::SizeMismatch {
                expected: dim * nn,
                got: values.len(),
                what: "point vector field",
            });
        }
        let _ = writeln!(out, "VECTORS {name} double");
        for n in 0..nn {
            for d in 0..3 {
                if d > 0 {
                    out.push(' ');
                }
                let v = if d < dim { values[dim * n + d] } else { 0.0 };
                out.push_str(&fmt_f64(v));
            }
            out.push('\n');
        }
    }
    fs::write(path, out).map_err(io_err(path))?;

    // Sidecar with grid metadata and visualization hints.
    let meta_path = path.with_extension("meta.txt");
    let mut meta = String::new();
    let _ = writeln!(meta, "grid_nodes = {nx} x {ny} x {nz}");
    let [ex, ey, ez] = grid.num_elements_per_axis();
    let _ = writeln!(meta, "grid_elements = {ex} x {ey} x {ez}");
    let _ = writeln!(
        meta,
        "element_size_m = {} {} {}",
        fmt_f64(dx),
        fmt_f64(dy),
        fmt_f64(if grid.is_2d() { 0.0 } else { dz })
    );
    let [lx, ly, lz] = grid.domain_size();
    let _ = writeln!(meta, "domain_m = {} {} {}", fmt_f64(lx), fmt_f64(ly), fmt_f64(lz));
    meta.push_str("layout = x fastest, then y, then z\n");
    for (name, _) in &fields.cell_scalars {
        let _ = writeln!(meta, "cell_field = {name}");
    }
    for (name, _) in &fields.point_scalars {
        let _ = writeln!(meta, "point_field = {name}");
    }
    for (name, _) in &fields.point_vectors {
        let _ = writeln!(meta, "point_vector = {name}");
    }
    meta.push_str("isosurface_hint = plot physical density at 0.25\n");
    fs::write(&meta_path, meta).map_err(io_err(&meta_path))?;
    Ok(())
}

pub const CONVERGENCE_HEADER: &str =
    "iteration,f0,g1,volume_fraction,max_change,pressure_iters,state_iters,dummy_iters,adjoint_iters";

/// Deterministic convergence log: one header line, one row per iteration.
/// Wall-clock timings live in a separate file (`write_timings_csv`) so
/// this one reproduces bitwise across identical runs.
pub fn write_convergence_csv(path: &Path, history: &[ConvergenceRecord]) -> Result<(), Error> {
    let mut out = String::from(CONVERGENCE_HEADER);
    out.push('\n');
    for r in history {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.iteration,
            fmt_f64(r.f0),
            fmt_f64(r.g1),
            fmt_f64(r.volume_fraction),
            fmt_f64(r.max_change),
            r.pressure_iterations,
            r.state_iterations,
            r.dummy_iterations,
            r.adjoint_iterations
        );
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Wall-clock seconds per phase and iteration (not reproducible).
pub fn write_timings_csv(path: &Path, history: &[ConvergenceRecord]) -> Result<(), Error> {
    let mut out = String::from("iteration,pressure_s,structural_s,sensitivity_s,update_s\n");
    for r in history {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6}",
            r.iteration,
            r.phase_seconds[0],
            r.phase_seconds[1],
            r.phase_seconds[2],
            r.phase_seconds[3]
        );
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Run manifest written at the end of a run.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub problem: &'a str,
    pub elements: [usize; 3],
    pub iterations: usize,
    pub stopped_early: bool,
    pub final_f0: f64,
    pub final_g1: f64,
    pub final_volume_fraction: f64,
    pub wall_seconds: f64,
}

pub fn write_manifest(
    path: &Path,
    problem: &str,
    elements: [usize; 3],
    summary: &RunSummary,
    wall_seconds: f64,
) -> Result<(), Error> {
    let manifest = RunManifest {
        problem,
        elements,
        iterations: summary.iterations,
        stopped_early: summary.stopped_early,
        final_f0: summary.final_f0,
        final_g1: summary.final_g1,
        final_volume_fraction: summary.final_volume_fraction,
        wall_seconds,
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Io(format!("manifest: {e}")))?;
    fs::write(path, text).map_err(io_err(path))
}
