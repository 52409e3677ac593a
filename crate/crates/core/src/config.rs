//! Run configuration: file format, overrides and validation.
//!
//! Configs are TOML. A run needs either a catalog problem name or the
//! path of a full problem-definition file (itself the TOML form of
//! [`ProblemSpec`]); everything else tweaks parameters of that problem or
//! of the solver. Unknown keys are rejected.

use crate::error::Error;
use crate::problems::{self, FilterRule, ProblemSpec};
use crate::solver::SolveOpts;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Parameter overrides keyed by their usual symbol names.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Overrides {
    /// Flow contrast K_s / K_v.
    pub epsilon: Option<f64>,
    /// Flow Heaviside step location.
    pub eta_k: Option<f64>,
    /// Flow Heaviside slope.
    pub beta_k: Option<f64>,
    /// Drainage Heaviside step location.
    pub eta_d: Option<f64>,
    /// Drainage Heaviside slope.
    pub beta_d: Option<f64>,
    /// Remainder of the input pressure at the penetration depth.
    pub r: Option<f64>,
    /// Penetration depth in element edges.
    pub delta_s_elements: Option<f64>,
    /// Drainage term switch.
    pub drainage: Option<bool>,
    /// Input pressure (applied to the largest prescribed pressure).
    pub p_in: Option<f64>,
    /// Solid Young's modulus.
    pub e1: Option<f64>,
    /// Poisson ratio.
    pub nu: Option<f64>,
    /// SIMP penalization.
    pub zeta: Option<f64>,
    /// Volume fraction limit.
    pub vstar: Option<f64>,
    /// Mechanism objective scaling.
    pub mu: Option<f64>,
    /// External MMA move limit.
    pub move_limit: Option<f64>,
    /// Filter radius in meters (switches the rule to absolute).
    pub filter_radius: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, spec: &ProblemSpec) -> Result<ProblemSpec, Error> {
        let mut s = spec.clone();
        if let Some(v) = self.epsilon {
            s.flow.epsilon = v;
        }
        if let Some(v) = self.eta_k {
            s.flow.eta_k = v;
        }
        if let Some(v) = self.beta_k {
            s.flow.beta_k = v;
        }
        if let Some(v) = self.eta_d {
            s.flow.eta_d = v;
        }
        if let Some(v) = self.beta_d {
            s.flow.beta_d = v;
        }
        if let Some(v) = self.r {
            s.flow.remainder = v;
        }
        if let Some(v) = self.delta_s_elements {
            s.flow.delta_s_elements = v;
        }
        if let Some(v) = self.drainage {
            s.flow.drainage = v;
        }
        if let Some(v) = self.p_in {
            // Scale the inlet: the largest prescribed pressure.
            let max = s
                .pressure_bcs
                .iter()
                .map(|bc| bc.value)
                .fold(f64::NEG_INFINITY, f64::max);
            for bc in &mut s.pressure_bcs {
                if bc.value == max {
                    bc.value = v;
                }
            }
        }
        if let Some(v) = self.e1 {
            s.material.e1 = v;
            s.material.e0 = 1e-6 * v;
        }
        if let Some(v) = self.nu {
            s.material.nu = v;
        }
        if let Some(v) = self.zeta {
            s.material.zeta = v;
        }
        if let Some(v) = self.vstar {
            s.volume_fraction = v;
        }
        if let Some(v) = self.mu {
            match &mut s.objective {
                crate::sensitivity::ObjectiveKind::MultiCriteria { mu } => *mu = v,
                _ => {
                    return Err(Error::Config(
                        "mu override only applies to multi-criteria problems".into(),
                    ))
                }
            }
        }
        if let Some(v) = self.move_limit {
            s.move_limit = v;
        }
        if let Some(v) = self.filter_radius {
            s.filter = FilterRule::Absolute { radius: v };
        }
        s.validate()?;
        Ok(s)
    }
}

fn default_change_tol() -> f64 {
    1e-3
}

fn default_tol() -> f64 {
    1e-8
}

/// Loop controls beyond the problem definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSettings {
    /// Cap on MMA iterations; `None` uses the problem default.
    pub max_iterations: Option<usize>,
    /// External move limit override.
    pub move_limit: Option<f64>,
    /// Stop when the max design change drops below `change_tol`.
    pub early_stop: bool,
    pub change_tol: f64,
    /// Relative residual of the PCG solves.
    pub solver_tol: f64,
    /// Hard PCG iteration cap (0 = 10 per DOF).
    pub solver_max_iter: usize,
    /// Use previous-iteration solutions as PCG starting guesses.
    pub warm_starts: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            max_iterations: None,
            move_limit: None,
            early_stop: true,
            change_tol: default_change_tol(),
            solver_tol: default_tol(),
            solver_max_iter: 0,
            warm_starts: true,
        }
    }
}

impl RunSettings {
    pub fn solve_opts(&self) -> SolveOpts {
        SolveOpts { tol: self.solver_tol, max_iter: self.solver_max_iter }
    }
}

/// A full run description, as parsed from a config file or assembled from
/// CLI flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Catalog problem name.
    pub problem: Option<String>,
    /// Path to a problem-definition TOML (overrides `problem`).
    pub spec_path: Option<PathBuf>,
    /// Mesh override `[nx, ny, nz]` (`nz = 0` for 2D problems).
    pub resolution: Option<[usize; 3]>,
    pub overrides: Overrides,
    #[serde(default)]
    pub run: RunSettingsOpt,
    /// Output directory for exports and logs.
    pub output_dir: Option<PathBuf>,
    /// Write field exports every N iterations (0 = final state only).
    pub export_every: usize,
    /// Worker threads (also via the PRESSTO_THREADS env var; flag wins).
    pub threads: Option<usize>,
    /// Reserved; the numerics are deterministic and use no randomness.
    pub seed: Option<u64>,
}

/// Serde-friendly optional version of [`RunSettings`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSettingsOpt {
    pub max_iterations: Option<usize>,
    pub move_limit: Option<f64>,
    pub early_stop: Option<bool>,
    pub change_tol: Option<f64>,
    pub solver_tol: Option<f64>,
    pub solver_max_iter: Option<usize>,
    pub warm_starts: Option<bool>,
}

impl RunSettingsOpt {
    pub fn resolve(&self) -> RunSettings {
        let d = RunSettings::default();
        RunSettings {
            max_iterations: self.max_iterations,
            move_limit: self.move_limit,
            early_stop: self.early_stop.unwrap_or(d.early_stop),
            change_tol: self.change_tol.unwrap_or(d.change_tol),
            solver_tol: self.solver_tol.unwrap_or(d.solver_tol),
            solver_max_iter: self.solver_max_iter.unwrap_or(d.solver_max_iter),
            warm_starts: self.warm_starts.unwrap_or(d.warm_starts),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, Error> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Resolve the problem definition this config points at, with the
    /// resolution and parameter overrides applied.
    pub fn resolve_spec(&self) -> Result<ProblemSpec, Error> {
        let base = if let Some(path) = &self.spec_path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let spec: ProblemSpec =
                toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
            spec
        } else if let Some(name) = &self.problem {
            problems::catalog(name)?
        } else {
            return Err(Error::Config("config needs `problem` or `spec_path`".into()));
        };
        let base = match self.resolution {
            Some(res) => {
                if base.is_2d() != (res[2] == 0) {
                    return Err(Error::Config(
                        "resolution dimensionality does not match the problem".into(),
                    ));
                }
                base.rescale(res)
            }
            None => base,
        };
        self.overrides.apply(&base)
    }
}

/// Annotated sample configuration, written by `pressto export-config`.
pub const SAMPLE_CONFIG: &str = r#"# pressto run configuration
#
# A run optimizes one problem. Pick a built-in problem by name or point
# `spec_path` at a problem-definition TOML (see `pressto export-config
# --problem <name>` for full examples of that format).
problem = "lid"             # test3d | arc2d | lid | extpress | inverter | gripper | magnifier
# spec_path = "my_problem.toml"

# Mesh override: elements per axis, [nx, ny, nz]; nz = 0 for 2D problems.
# resolution = [60, 30, 30]

# Output directory for field exports, logs and the run manifest.
output_dir = "out"
# Field-export cadence in iterations (0 = final state only).
export_every = 0

# Worker threads (default: all cores; also PRESSTO_THREADS).
# threads = 2

[overrides]                 # parameter overrides, usual symbol names
# epsilon = 1e-7            # flow contrast K_s / K_v
# eta_k = 0.3               # flow Heaviside step location
# beta_k = 10.0             # flow Heaviside slope
# eta_d = 0.2               # drainage Heaviside step location
# beta_d = 10.0             # drainage Heaviside slope
# r = 0.1                   # input-pressure remainder at the penetration depth
# delta_s_elements = 2.0    # penetration depth in element edges
# drainage = true           # disable to reproduce the pure Darcy behavior
# p_in = 1e5                # input pressure (N/m^2)
# e1 = 5e8                  # solid Young's modulus (N/m^2); E0 = 1e-6 E1
# nu = 0.40                 # Poisson ratio
# zeta = 3.0                # SIMP penalization
# vstar = 0.25              # volume fraction limit
# mu = 100.0                # mechanism objective scaling
# move_limit = 0.1          # external MMA move limit per iteration
# filter_radius = 0.005     # absolute filter radius (m)

[run]
# max_iterations = 100      # default: problem-specific (100 / 250)
# move_limit = 0.1
early_stop = true           # stop when max design change < change_tol
change_tol = 1e-3
solver_tol = 1e-8           # PCG relative residual
# solver_max_iter = 0       # 0 = ten iterations per unknown
warm_starts = true
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_config_parses() {
        let cfg = RunConfig::from_toml(SAMPLE_CONFIG).unwrap();
        assert_eq!(cfg.problem.as_deref(), Some("lid"));
        let spec = cfg.resolve_spec().unwrap();
        assert_eq!(spec.name, "lid");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml("problem = \"lid\"\nbogus = 1\n").unwrap_err();
        match err {
            Error::Config(msg) => assert!(msg.contains("bogus"), "{msg}"),
            other => panic!("unexpected: {other}"),
        }
    }

    #[test]
    fn overrides_apply_and_validate() {
        let cfg = RunConfig::from_toml(
            "problem = \"arc2d\"\n[overrides]\nepsilon = 1e-3\nvstar = 0.3\n",
        )
        .unwrap();
        let spec = cfg.resolve_spec().unwrap();
        assert_eq!(spec.flow.epsilon, 1e-3);
        assert_eq!(spec.volume_fraction, 0.3);

        let bad = RunConfig::from_toml("problem = \"arc2d\"\n[overrides]\nepsilon = 2.0\n").unwrap();
        assert!(bad.resolve_spec().is_err());
    }

    #[test]
    fn mu_override_demands_multicriteria() {
        let cfg = RunConfig::from_toml("problem = \"lid\"\n[overrides]\nmu = 10.0\n").unwrap();
        assert!(cfg.resolve_spec().is_err());
        let cfg =
            RunConfig::from_toml("problem = \"inverter\"\n[overrides]\nmu = 10.0\n").unwrap();
        match cfg.resolve_spec().unwrap().objective {
            crate::sensitivity::ObjectiveKind::MultiCriteria { mu } => assert_eq!(mu, 10.0),
            _ => panic!(),
        }
    }

    #[test]
    fn resolution_dimensionality_is_checked() {
        let cfg =
            RunConfig { problem: Some("arc2d".into()), resolution: Some([30, 20, 10]), ..Default::default() };
        assert!(cfg.resolve_spec().is_err());
        let cfg =
            RunConfig { problem: Some("arc2d".into()), resolution: Some([30, 20, 0]), ..Default::default() };
        assert_eq!(cfg.resolve_spec().unwrap().elements, [30, 20, 0]);
    }
}
