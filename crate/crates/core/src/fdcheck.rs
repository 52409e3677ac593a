//! Finite-difference verification utility.
//!
//! Central differences of the full pipeline (filter, Darcy solve, load
//! conversion, structural solves, objective) with respect to individual
//! design variables. Every probe re-solves everything from scratch; this
//! is the independent ground truth the adjoint gradients are tested
//! against, and is useful for validating custom problem definitions. It
//! plays no part in the optimization loop itself.

use crate::driver::Pipeline;
use crate::error::Error;

/// Objective and volume-constraint values at the current design.
fn evaluate_f_g(pipeline: &mut Pipeline) -> Result<(f64, f64), Error> {
    let eval = pipeline.evaluate()?;
    let f0 = eval
        .f0
        .ok_or_else(|| Error::InvalidProblem("finite differences need an objective".into()))?;
    let volume = eval.rho_tilde.iter().sum::<f64>() / eval.rho_tilde.len() as f64;
    let g1 = volume / pipeline.spec().volume_fraction - 1.0;
    Ok((f0, g1))
}

/// Central-difference gradients of the objective and the constraint with
/// respect to the design variables at `elements`.
///
/// Warm starts are switched off for the probe solves so each evaluation
/// is independent and deterministic.
pub fn fd_gradients(
    pipeline: &mut Pipeline,
    elements: &[usize],
    step: f64,
) -> Result<(Vec<f64>, Vec<f64>), Error> {
    pipeline.set_warm_starts(false);
    let base = pipeline.design().values().to_vec();
    let mut df = Vec::with_capacity(elements.len());
    let mut dg = Vec::with_capacity(elements.len());
    for &e in elements {
        if base[e] - step < 0.0 || base[e] + step > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "design value {} at element {e} too close to its bounds for step {step}",
                base[e]
            )));
        }
        let mut plus = base.clone();
        plus[e] += step;
        pipeline.set_design_values(&plus)?;
        let (f_p, g_p) = evaluate_f_g(pipeline)?;

        let mut minus = base.clone();
        minus[e] -= step;
        pipeline.set_design_values(&minus)?;
        let (f_m, g_m) = evaluate_f_g(pipeline)?;

        df.push((f_p - f_m) / (2.0 * step));
        dg.push((g_p - g_m) / (2.0 * step));
    }
    pipeline.set_design_values(&base)?;
    Ok((df, dg))
}

/// Worst relative mismatch between an adjoint gradient and its
/// finite-difference counterpart over the probed elements.
pub fn max_relative_error(adjoint: &[f64], fd: &[f64], floor: f64) -> f64 {
    adjoint
        .iter()
        .zip(fd)
        .map(|(a, f)| (a - f).abs() / f.abs().max(floor))
        .fold(0.0, f64::max)
}
