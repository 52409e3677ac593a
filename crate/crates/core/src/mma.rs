//! Method of Moving Asymptotes update step for box-constrained
//! minimization with a single inequality constraint.
//!
//! The convex separable subproblem is solved in its dual form: with one
//! constraint the dual is one-dimensional and the primal minimizer per
//! variable has a closed form, so a safeguarded bisection on the dual
//! multiplier solves the subproblem to near machine precision.

use crate::error::Error;

/// Canonical MMA constants; the asymptote-adaptation and regularization
/// values published with the method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmaParams {
    /// Initial asymptote distance as a fraction of the box width.
    pub asy_init: f64,
    /// Asymptote expansion on monotone iterates.
    pub asy_incr: f64,
    /// Asymptote contraction on oscillating iterates.
    pub asy_decr: f64,
    /// Fraction of the variable-to-asymptote gap kept as margin.
    pub albefa: f64,
    /// Curvature regularization of the subproblem.
    pub raa0: f64,
    /// Linear penalty on the constraint-relaxation variable y.
    pub penalty_c: f64,
}

impl Default for MmaParams {
    fn default() -> Self {
        Self { asy_init: 0.5, asy_incr: 1.2, asy_decr: 0.7, albefa: 0.1, raa0: 1e-5, penalty_c: 1000.0 }
    }
}

/// Result of one MMA step.
#[derive(Debug, Clone)]
pub struct MmaStep {
    pub x: Vec<f64>,
    /// Dual multiplier of the constraint in the subproblem.
    pub lambda: f64,
    /// Complementarity residual of the subproblem KKT system.
    pub kkt_residual: f64,
    /// Decrease of the separable approximation, `W0(x_old) - W0(x_new)`.
    pub approx_decrease: f64,
}

/// Optimizer state: the two previous iterates and the moving asymptotes.
/// Variables live in the fixed box `[0, 1]`.
#[derive(Debug, Clone)]
pub struct MmaState {
    n: usize,
    iter: usize,
    xold1: Vec<f64>,
    xold2: Vec<f64>,
    low: Vec<f64>,
    upp: Vec<f64>,
    params: MmaParams,
}

impl MmaState {
    pub fn new(n: usize, params: MmaParams) -> Self {
        Self {
            n,
            iter: 0,
            xold1: vec![0.0; n],
            xold2: vec![0.0; n],
            low: vec![0.0; n],
            upp: vec![1.0; n],
            params,
        }
    }

    pub fn iteration(&self) -> usize {
        self.iter
    }

    pub fn asymptotes(&self) -> (&[f64], &[f64]) {
        (&self.low, &self.upp)
    }

    /// One MMA update. `df0`/`dg1` are the objective and constraint
    /// gradients at `x`, `g1` the constraint value, `move_limit` the
    /// external per-iteration move bound.
    pub fn update(
        &mut self,
        x: &[f64],
        df0: &[f64],
        g1: f64,
        dg1: &[f64],
        move_limit: f64,
    ) -> Result<MmaStep, Error> {
        let n = self.n;
        if x.len() != n || df0.len() != n || dg1.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                got: x.len().min(df0.len()).min(dg1.len()),
                what: "mma vectors",
            });
        }
        if !(0.0 < move_limit && move_limit <= 1.0) {
            return Err(Error::InvalidParameter(format!("move limit {move_limit} outside (0,1]")));
        }
        if df0.iter().chain(dg1).any(|v| !v.is_finite()) || !g1.is_finite() {
            return Err(Error::InvalidParameter("non-finite gradient entries".into()));
        }
        let p = self.params;

        // Moving asymptotes with oscillation detection.
        if self.iter < 2 {
            for j in 0..n {
                self.low[j] = x[j] - p.asy_init;
                self.upp[j] = x[j] + p.asy_init;
            }
        } else {
            for j in 0..n {
                let osc = (x[j] - self.xold1[j]) * (self.xold1[j] - self.xold2[j]);
                let factor = if osc > 0.0 {
                    p.asy_incr
                } else if osc < 0.0 {
                    p.asy_decr
                } else {
                    1.0
                };
                let low = x[j] - factor * (self.xold1[j] - self.low[j]);
                let upp = x[j] + factor * (self.upp[j] - self.xold1[j]);
                // Distances bounded within [0.01, 10] x (box width).
                self.low[j] = low.clamp(x[j] - 10.0, x[j] - 0.01);
                self.upp[j] = upp.clamp(x[j] + 0.01, x[j] + 10.0);
            }
        }

        // Inner bounds: asymptote margin, external move limit, box.
        let mut alfa = vec![0.0; n];
        let mut beta = vec![0.0; n];
        for j in 0..n {
            alfa[j] = (self.low[j] + p.albefa * (x[j] - self.low[j]))
                .max(x[j] - move_limit)
                .max(0.0);
            beta[j] = (self.upp[j] - p.albefa * (self.upp[j] - x[j]))
                .min(x[j] + move_limit)
                .min(1.0);
        }

        // Separable approximation coefficients.
        let mut p0 = vec![0.0; n];
        let mut q0 = vec![0.0; n];
        let mut pc = vec![0.0; n];
        let mut qc = vec![0.0; n];
        for j in 0..n {
            let ux = self.upp[j] - x[j];
            let xl = x[j] - self.low[j];
            let (ux2, xl2) = (ux * ux, xl * xl);
            let g0p = df0[j].max(0.0);
            let g0m = (-df0[j]).max(0.0);
            let reg0 = 1e-3 * (g0p + g0m) + p.raa0;
            p0[j] = ux2 * (g0p + reg0);
            q0[j] = xl2 * (g0m + reg0);
            let g1p = dg1[j].max(0.0);
            let g1m = (-dg1[j]).max(0.0);
            let reg1 = 1e-3 * (g1p + g1m) + p.raa0;
            pc[j] = ux2 * (g1p + reg1);
            qc[j] = xl2 * (g1m + reg1);
        }
        // Constraint right-hand side so the linearization matches g1 at x.
        let mut b = -g1;
        for j in 0..n {
            b += pc[j] / (self.upp[j] - x[j]) + qc[j] / (x[j] - self.low[j]);
        }

        let low = &self.low;
        let upp = &self.upp;
        let primal = |lambda: f64, out: &mut [f64]| {
            for j in 0..n {
                let pj = (p0[j] + lambda * pc[j]).sqrt();
                let qj = (q0[j] + lambda * qc[j]).sqrt();
                out[j] = ((low[j] * pj + upp[j] * qj) / (pj + qj)).clamp(alfa[j], beta[j]);
            }
        };
        let mut xt = vec![0.0; n];
        // Dual residual: subproblem constraint value minus b, minus the
        // relaxation variable y(lambda); non-increasing in lambda.
        let residual = |lambda: f64, xt: &mut [f64]| -> f64 {
            primal(lambda, xt);
            let mut s = -b;
            for j in 0..n {
                s += pc[j] / (upp[j] - xt[j]) + qc[j] / (xt[j] - low[j]);
            }
            s - (lambda - p.penalty_c).max(0.0)
        };

        let mut lambda = 0.0;
        let h0 = residual(0.0, &mut xt);
        if h0 > 0.0 {
            // Bracket, then bisect.
            let mut lo = 0.0;
            let mut hi = 1.0;
            let mut h_hi = residual(hi, &mut xt);
            let mut guard = 0;
            while h_hi > 0.0 && guard < 200 {
                lo = hi;
                hi *= 2.0;
                h_hi = residual(hi, &mut xt);
                guard += 1;
            }
            if h_hi > 0.0 {
                return Err(Error::InvalidParameter("mma dual failed to bracket".into()));
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if residual(mid, &mut xt) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if (hi - lo) <= 1e-14 * hi.max(1.0) {
                    break;
                }
            }
            lambda = hi;
        }
        let h_final = residual(lambda, &mut xt);
        let kkt_residual = if lambda > 0.0 { h_final.abs() } else { h_final.max(0.0) };

        // Approximation decrease certificate.
        let w0 = |xv: &[f64]| -> f64 {
            let mut s = 0.0;
            for j in 0..n {
                s += p0[j] / (upp[j] - xv[j]) + q0[j] / (xv[j] - low[j]);
            }
            s
        };
        let approx_decrease = w0(x) - w0(&xt);

        self.xold2 = std::mem::take(&mut self.xold1);
        self.xold1 = x.to_vec();
        self.iter += 1;

        Ok(MmaStep { x: xt, lambda, kkt_residual, approx_decrease })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_inactive_constraint_is_stationary() {
        let mut state = MmaState::new(3, MmaParams::default());
        let x = vec![0.3, 0.5, 0.8];
        let step = state
            .update(&x, &[0.0, 0.0, 0.0], -0.5, &[0.0, 0.0, 0.0], 0.1)
            .unwrap();
        assert_eq!(step.lambda, 0.0);
        for j in 0..3 {
            assert!((step.x[j] - x[j]).abs() < 1e-12, "{} vs {}", step.x[j], x[j]);
        }
    }

    #[test]
    fn scalar_quadratic_walks_to_the_minimum() {
        // f = (x - 0.9)^2 with an always-inactive constraint; iterates must
        // increase monotonically toward 0.9 with steps within the move limit.
        let mut state = MmaState::new(1, MmaParams::default());
        let mut x = 0.5;
        let move_limit = 0.1;
        for _ in 0..60 {
            let df = 2.0 * (x - 0.9);
            let step = state.update(&[x], &[df], -1.0, &[0.0], move_limit).unwrap();
            let xn = step.x[0];
            if x < 0.9 - 1e-3 {
                assert!(xn >= x - 1e-12, "iterates must not retreat: {x} -> {xn}");
            }
            assert!((xn - x).abs() <= move_limit + 1e-12);
            assert!(step.kkt_residual <= 1e-9);
            x = xn;
        }
        // With the 0.01 asymptote floor the iterates settle in a small band
        // around the minimizer rather than to machine precision.
        assert!((x - 0.9).abs() < 0.01, "converged to {x}");
    }

    /// Two-spring compliance toy: f = sum c_i / (e0 + x_i^3), volume
    /// constraint mean(x) <= vstar.
    fn toy(x: &[f64]) -> (f64, Vec<f64>) {
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
    }

    #[test]
    fn two_element_toy_matches_brute_force_grid_search() {
        let vstar = 0.4;
        // Oracle: exhaustive search over the 1e-3 grid.
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

        let mut state = MmaState::new(2, MmaParams::default());
        let mut x = vec![vstar, vstar];
        for _ in 0..200 {
            let (_, df) = toy(&x);
            let g1 = (x[0] + x[1]) / (2.0 * vstar) - 1.0;
            let dg1 = vec![1.0 / (2.0 * vstar); 2];
            let step = state.update(&x, &df, g1, &dg1, 0.1).unwrap();
            for j in 0..2 {
                assert!(step.x[j] >= (x[j] - 0.1 - 1e-12).max(0.0));
                assert!(step.x[j] <= (x[j] + 0.1 + 1e-12).min(1.0));
            }
            x = step.x;
        }
        let g_final = (x[0] + x[1]) / (2.0 * vstar) - 1.0;
        assert!(g_final <= 1e-6, "constraint violated: {g_final}");
        let (f_mma, _) = toy(&x);
        assert!(
            f_mma <= best.0 * (1.0 + 1e-3),
            "mma {f_mma} worse than brute force {} at {:?} vs {:?}",
            best.0,
            x,
            best.1
        );
        assert!((x[0] - best.1[0]).abs() < 5e-3 && (x[1] - best.1[1]).abs() < 5e-3);
    }

    #[test]
    fn approximation_value_decreases_when_feasible() {
        let mut state = MmaState::new(2, MmaParams::default());
        let mut x = vec![0.5, 0.5];
        for _ in 0..10 {
            let (_, df) = toy(&x);
            let g1 = (x[0] + x[1]) / 2.0 - 1.0; // loose constraint
            let step = state.update(&x, &df, g1, &[0.5, 0.5], 0.1).unwrap();
            assert!(step.approx_decrease >= -1e-9);
            x = step.x;
        }
    }

    #[test]
    fn updates_are_deterministic() {
        let run = || {
            let mut state = MmaState::new(2, MmaParams::default());
            let mut x = vec![0.4, 0.4];
            for _ in 0..20 {
                let (_, df) = toy(&x);
                let g1 = (x[0] + x[1]) / 0.8 - 1.0;
                x = state.update(&x, &df, g1, &[1.25, 1.25], 0.1).unwrap().x;
            }
            x
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradients_are_rejected() {
        let mut state = MmaState::new(1, MmaParams::default());
        assert!(state.update(&[0.5], &[f64::NAN], 0.0, &[0.0], 0.1).is_err());
    }
}
