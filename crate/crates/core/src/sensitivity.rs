//! Objective evaluation and adjoint sensitivity analysis.
//!
//! Both objectives are handled without extra stiffness-adjoint solves: the
//! structural multipliers are combinations of the state vectors `u` and
//! `v`, so only one pressure-adjoint solve per gradient is needed for the
//! design-dependent load terms. The flow-matrix derivative contracts
//! element-locally against the cached conductivity/mass split, and the
//! stiffness derivative scales the unit element stiffness with the SIMP
//! modulus derivative, so no re-integration happens anywhere.

use crate::darcy::{PressureSystem, TransformationMatrix};
use crate::elastic::ElasticSystem;
use crate::error::Error;
use crate::fields::{DesignField, FilterOperator};
use crate::solver::{IncompleteCholesky, SolveOpts, SolveStats};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Which objective the optimization minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// End-compliance `2 SE = u' K u` for loadbearing structures.
    Compliance,
    /// `-mu * MSE / SE` for compliant mechanisms.
    MultiCriteria { mu: f64 },
}

impl ObjectiveKind {
    pub fn validate(&self) -> Result<(), Error> {
        if let ObjectiveKind::MultiCriteria { mu } = self {
            if *mu <= 0.0 {
                return Err(Error::InvalidParameter("mu must be > 0".into()));
            }
        }
        Ok(())
    }

    pub fn needs_dummy_load(&self) -> bool {
        matches!(self, ObjectiveKind::MultiCriteria { .. })
    }
}

/// Solved structural state; `v`/`mse` only present for mechanism runs.
#[derive(Debug, Clone)]
pub struct StructuralState {
    pub u: Vec<f64>,
    pub v: Option<Vec<f64>>,
    /// Strain energy 0.5 u' K u.
    pub se: f64,
    /// Mutual strain energy v' K u (the output displacement).
    pub mse: Option<f64>,
}

pub fn objective_value(kind: ObjectiveKind, state: &StructuralState) -> Result<f64, Error> {
    match kind {
        ObjectiveKind::Compliance => Ok(2.0 * state.se),
        ObjectiveKind::MultiCriteria { mu } => {
            let mse = state.mse.ok_or_else(|| {
                Error::InvalidParameter("multi-criteria objective needs the dummy state".into())
            })?;
            if state.se <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "strain energy {} is not positive; structure unloaded or unconstrained",
                    state.se
                )));
            }
            Ok(-mu * mse / state.se)
        }
    }
}

/// Objective value, gradients and the volume constraint for one design.
/// Gradients are full element-length with zeros at non-design entries,
/// taken with respect to the design variables (filter chain included).
#[derive(Debug, Clone)]
pub struct SensitivityBundle {
    pub f0: f64,
    pub df0: Vec<f64>,
    pub g1: f64,
    pub dg1: Vec<f64>,
    /// Pressure-adjoint solve statistics.
    pub adjoint_stats: SolveStats,
}

/// Everything the adjoint computation reads; all solved states are full
/// length with prescribed values included.
pub struct AdjointInputs<'a> {
    pub pressure: &'a PressureSystem,
    pub pressure_factor: &'a IncompleteCholesky,
    pub transform: &'a TransformationMatrix,
    pub elastic: &'a ElasticSystem,
    pub flow: &'a crate::darcy::FlowParams,
    pub material: &'a crate::elastic::MaterialParams,
    pub rho_tilde: &'a [f64],
    pub p: &'a [f64],
    pub opts: SolveOpts,
    /// Warm start for the pressure-adjoint solve.
    pub adjoint_warm: Option<&'a [f64]>,
}

/// Per-element `x_e' Ke0 y_e` contraction table for a state pair (unit
/// modulus; scale with the SIMP derivative for stiffness sensitivities).
pub fn stiffness_contractions(
    elastic: &ElasticSystem,
    ne: usize,
    x: &[f64],
    y: &[f64],
) -> Vec<f64> {
    let ke = elastic.unit_stiffness();
    let edof = ke.nrows();
    (0..ne)
        .into_par_iter()
        .map(|e| {
            let mut xe = [0.0f64; 24];
            let mut ye = [0.0f64; 24];
            elastic.element_vector(e, x, &mut xe[..edof]);
            elastic.element_vector(e, y, &mut ye[..edof]);
            let mut acc = 0.0;
            for i in 0..edof {
                let mut row = 0.0;
                for j in 0..edof {
                    row += ke[(i, j)] * ye[j];
                }
                acc += xe[i] * row;
            }
            acc
        })
        .collect()
}

/// Per-element `lambda_e' (dK A_cond + dD A_mass) p_e` load contractions.
pub fn load_contractions(
    pressure: &PressureSystem,
    flow: &crate::darcy::FlowParams,
    rho_tilde: &[f64],
    lambda: &[f64],
    p: &[f64],
) -> Vec<f64> {
    let (a_cond, a_mass) = pressure.unit_matrices();
    let npe = a_cond.nrows();
    (0..rho_tilde.len())
        .into_par_iter()
        .map(|e| {
            let nodes = pressure.element_nodes(e);
            let mut le = [0.0f64; 8];
            let mut pe = [0.0f64; 8];
            for (a, &n) in nodes.iter().enumerate() {
                le[a] = lambda[n as usize];
                pe[a] = p[n as usize];
            }
            let (_, dk) = flow.flow_coefficient(rho_tilde[e]);
            let (_, dd) = flow.drainage_coefficient(rho_tilde[e]);
            let mut cond = 0.0;
            let mut mass = 0.0;
            for i in 0..npe {
                let mut c_row = 0.0;
                let mut m_row = 0.0;
                for j in 0..npe {
                    c_row += a_cond[(i, j)] * pe[j];
                    m_row += a_mass[(i, j)] * pe[j];
                }
                cond += le[i] * c_row;
                mass += le[i] * m_row;
            }
            dk * cond + dd * mass
        })
        .collect()
}

/// Compliance sensitivity w.r.t. the physical densities:
/// `-u'(dK)u + lambda'(dA)p` with `A lambda = D_T'(2u)`.
///
/// Returns the per-element sensitivities, the adjoint vector (for warm
/// starts) and the adjoint solve statistics.
pub fn compliance_sensitivity(
    inputs: &AdjointInputs,
    u: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, SolveStats), Error> {
    let rhs = {
        let two_u: Vec<f64> = u.iter().map(|x| 2.0 * x).collect();
        inputs.transform.transpose_apply(&two_u)
    };
    let (lambda, stats) = inputs.pressure.solve_adjoint(
        inputs.pressure_factor,
        &rhs,
        &inputs.opts,
        inputs.adjoint_warm,
    )?;

    let ne = inputs.rho_tilde.len();
    let uku = stiffness_contractions(inputs.elastic, ne, u, u);
    let load = load_contractions(inputs.pressure, inputs.flow, inputs.rho_tilde, &lambda, inputs.p);
    let mut df = vec![0.0; ne];
    for e in 0..ne {
        let (_, de_mod) = inputs.material.modulus(inputs.rho_tilde[e]);
        df[e] = -de_mod * uku[e] + load[e];
    }
    Ok((df, lambda, stats))
}

/// Multi-criteria sensitivity w.r.t. the physical densities:
///
/// `mu [ MSE/SE^2 (-1/2 u'(dK)u) + 1/SE (u'(dK)v) + lambda'(dA)p ]`
///
/// with one combined pressure-adjoint solve
/// `A lambda = D_T' (MSE/SE^2 u - 1/SE v)`; the two load terms of the
/// four-term expansion are linear in the adjoint right-hand side, so a
/// single solve carries both.
pub fn multicriteria_sensitivity(
    inputs: &AdjointInputs,
    state: &StructuralState,
    mu: f64,
) -> Result<(Vec<f64>, Vec<f64>, SolveStats), Error> {
    let v = state
        .v
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("dummy state required".into()))?;
    let mse = state.mse.expect("mse computed with v");
    let se = state.se;
    if se <= 0.0 {
        return Err(Error::InvalidParameter("strain energy must be positive".into()));
    }
    let u = &state.u;

    let w: Vec<f64> = u
        .iter()
        .zip(v)
        .map(|(ui, vi)| mse / (se * se) * ui - vi / se)
        .collect();
    let rhs = inputs.transform.transpose_apply(&w);
    let (lambda, stats) = inputs.pressure.solve_adjoint(
        inputs.pressure_factor,
        &rhs,
        &inputs.opts,
        inputs.adjoint_warm,
    )?;

    let ne = inputs.rho_tilde.len();
    let uku = stiffness_contractions(inputs.elastic, ne, u, u);
    let ukv = stiffness_contractions(inputs.elastic, ne, u, v);
    let load = load_contractions(inputs.pressure, inputs.flow, inputs.rho_tilde, &lambda, inputs.p);
    let mut df = vec![0.0; ne];
    for e in 0..ne {
        let (_, de_mod) = inputs.material.modulus(inputs.rho_tilde[e]);
        let stiffness_terms =
            mse / (se * se) * (-0.5 * de_mod * uku[e]) + (de_mod * ukv[e]) / se;
        df[e] = mu * (stiffness_terms + load[e]);
    }
    Ok((df, lambda, stats))
}

/// Volume constraint `g1 = V/V* - 1` with `V` the volume-weighted mean
/// density, and its (constant) density gradient. Non-design elements count
/// toward the volume; their gradient entries are zeroed by the filter
/// chain rule.
pub fn volume_constraint(rho_tilde: &[f64], volume_fraction: f64) -> Result<(f64, Vec<f64>), Error> {
    if !(0.0 < volume_fraction && volume_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "volume fraction {volume_fraction} must be in (0, 1]"
        )));
    }
    let n = rho_tilde.len() as f64;
    let mean = rho_tilde.iter().sum::<f64>() / n;
    let g1 = mean / volume_fraction - 1.0;
    let dg1 = vec![1.0 / (volume_fraction * n); rho_tilde.len()];
    Ok((g1, dg1))
}

/// Assemble the complete bundle: objective, constraint, gradients pushed
/// through the filter chain rule with non-design entries zeroed. Also
/// returns the pressure-adjoint vector for warm-starting the next iteration.
pub fn full_gradient(
    kind: ObjectiveKind,
    inputs: &AdjointInputs,
    state: &StructuralState,
    filter: &FilterOperator,
    design: &DesignField,
    volume_fraction: f64,
) -> Result<(SensitivityBundle, Vec<f64>), Error> {
    let f0 = objective_value(kind, state)?;
    let (df_dtilde, lambda, stats) = match kind {
        ObjectiveKind::Compliance => compliance_sensitivity(inputs, &state.u)?,
        ObjectiveKind::MultiCriteria { mu } => multicriteria_sensitivity(inputs, state, mu)?,
    };
    let df0 = filter.chain_rule(design, &df_dtilde)?;
    let (g1, dg1_dtilde) = volume_constraint(inputs.rho_tilde, volume_fraction)?;
    let dg1 = filter.chain_rule(design, &dg1_dtilde)?;
    Ok((SensitivityBundle { f0, df0, g1, dg1, adjoint_stats: stats }, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compliance_objective_is_twice_strain_energy() {
        let state = StructuralState { u: vec![0.0], v: None, se: 3.25, mse: None };
        assert_eq!(objective_value(ObjectiveKind::Compliance, &state).unwrap(), 6.5);
    }

    #[test]
    fn identical_state_and_dummy_give_minus_two() {
        // v = u means MSE = v'Ku = u'Ku = 2 SE, so -mu MSE/SE = -2 mu.
        let state =
            StructuralState { u: vec![1.0, 2.0], v: Some(vec![1.0, 2.0]), se: 0.7, mse: Some(1.4) };
        let val = objective_value(ObjectiveKind::MultiCriteria { mu: 1.0 }, &state).unwrap();
        assert!((val + 2.0).abs() < 1e-15);
        let val100 = objective_value(ObjectiveKind::MultiCriteria { mu: 100.0 }, &state).unwrap();
        assert!((val100 + 200.0).abs() < 1e-13);
    }

    #[test]
    fn zero_strain_energy_is_an_error_for_mechanisms() {
        let state = StructuralState { u: vec![0.0], v: Some(vec![0.0]), se: 0.0, mse: Some(0.0) };
        assert!(objective_value(ObjectiveKind::MultiCriteria { mu: 1.0 }, &state).is_err());
    }

    #[test]
    fn volume_constraint_values() {
        let (g1, dg1) = volume_constraint(&vec![0.25; 8], 0.25).unwrap();
        assert!(g1.abs() < 1e-14);
        assert!((dg1[0] - 1.0 / (0.25 * 8.0)).abs() < 1e-15);
        let (g1, _) = volume_constraint(&vec![1.0; 8], 0.25).unwrap();
        assert!((g1 - 3.0).abs() < 1e-13);
    }
}
