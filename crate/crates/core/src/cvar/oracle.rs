//! Independent verification oracle: worst-case CVaR restricted to discrete
//! distributions on a finite support grid.
//!
//! For a distribution `p` on grid points `xi_j`, `CVaR_alpha` equals the
//! largest average loss over a sub-probability "tail" `u` with
//! `0 <= u <= p/(1-alpha)` and total mass one. Maximizing jointly over the
//! tail and over every grid distribution matching the first two moments is a
//! single linear program in the split variables `u_j` (tail mass scaled by
//! `1/(1-alpha)`) and `w_j` (the remainder):
//!
//! ```text
//! maximize   sum_j u_j * phi(xi_j)
//! subject to sum_j u_j              = 1
//!            sum_j (u_j + w_j)      = 1/(1-alpha)
//!            sum_j (u_j + w_j) z_j  = 0          (z standardized)
//!            sum_j (u_j + w_j) z_j^2 = 1/(1-alpha)... (see below)
//!            u, w >= 0
//! ```
//!
//! The moment rows are expressed in standardized coordinates
//! `z = (xi - mu)/sigma` and scaled to O(1) so the solver's feasibility
//! tolerance cannot leak into the optimum. The result is a lower bound on
//! the exact worst-case CVaR that converges to it as the grid refines.

use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome};

use super::QuadraticLoss;
use crate::error::{Error, Result};

/// Number of points in the default oracle support grid.
pub const DEFAULT_ORACLE_GRID_POINTS: usize = 201;

/// Equally spaced support grid on `[max(0, mu - 10*sigma), mu + 10*sigma]`.
pub fn default_support_grid(mu: f64, sigma2: f64, n_points: usize) -> Vec<f64> {
    let sigma = sigma2.max(0.0).sqrt();
    let lo = (mu - 10.0 * sigma).max(0.0);
    let hi = mu + 10.0 * sigma;
    if n_points <= 1 {
        return vec![lo];
    }
    (0..n_points)
        .map(|i| lo + (hi - lo) * i as f64 / (n_points - 1) as f64)
        .collect()
}

/// Maximum of `CVaR_alpha(phi(xi))` over all discrete distributions on
/// `support_grid` with mean `mu` and second moment `sigma2 + mu^2`.
///
/// Returns a lower bound on [`super::worst_case_cvar`] for the same moments;
/// the gap vanishes under grid refinement. Errors if the moments are not
/// representable on the grid.
pub fn cvar_oracle_discrete(
    loss: &QuadraticLoss,
    mu: f64,
    sigma2: f64,
    alpha: f64,
    support_grid: &[f64],
) -> Result<f64> {
    if loss.k() != 1 {
        return Err(Error::Domain(format!(
            "oracle supports scalar losses only (got k = {})",
            loss.k()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must be in (0, 1) (got {alpha})")));
    }
    if sigma2 < 0.0 || !sigma2.is_finite() || !mu.is_finite() {
        return Err(Error::Domain(format!(
            "moments must be finite with sigma2 >= 0 (got mu={mu}, sigma2={sigma2})"
        )));
    }
    if support_grid.is_empty() || support_grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("support grid must be nonempty and finite".into()));
    }

    if sigma2 == 0.0 {
        // point mass: feasible only if mu itself sits on the grid
        let scale = mu.abs().max(1.0);
        if support_grid.iter().any(|&g| (g - mu).abs() <= 1e-9 * scale) {
            return Ok(loss.eval(&[mu]));
        }
        return Err(Error::Domain(format!(
            "zero-variance moments require {mu} to be a grid point"
        )));
    }

    let kappa = 1.0 / (1.0 - alpha);
    let sigma = sigma2.sqrt();
    let z: Vec<f64> = support_grid.iter().map(|&x| (x - mu) / sigma).collect();

    let mut prob = Problem::new(OptimizationDirection::Maximize);
    let u: Vec<_> = support_grid
        .iter()
        .map(|&x| prob.add_var(loss.eval(&[x]), (0.0, f64::INFINITY)))
        .collect();
    let w: Vec<_> = support_grid
        .iter()
        .map(|_| prob.add_var(0.0, (0.0, f64::INFINITY)))
        .collect();

    // tail mass sums to one
    prob.add_constraint(u.iter().map(|&v| (v, 1.0)), ComparisonOp::Eq, 1.0);
    // total mass (scaled by 1/kappa): sum p_j = 1
    prob.add_constraint(
        u.iter().chain(&w).map(|&v| (v, 1.0 / kappa)),
        ComparisonOp::Eq,
        1.0,
    );
    // standardized first moment: sum p_j z_j = 0
    prob.add_constraint(
        u.iter().zip(&z).chain(w.iter().zip(&z)).map(|(&v, &zj)| (v, zj / kappa)),
        ComparisonOp::Eq,
        0.0,
    );
    // standardized second moment: sum p_j z_j^2 = 1
    prob.add_constraint(
        u.iter()
            .zip(&z)
            .chain(w.iter().zip(&z))
            .map(|(&v, &zj)| (v, zj * zj / kappa)),
        ComparisonOp::Eq,
        1.0,
    );

    match prob.solve() {
        Ok(SolveOutcome::Solution(sol)) => Ok(sol.objective()),
        Ok(SolveOutcome::Interrupted(_)) => Err(Error::Numeric {
            message: "oracle linear program interrupted before optimality".into(),
            residual: f64::NAN,
        }),
        Err(microlp::Error::Infeasible) => Err(Error::Domain(
            "moment constraints are infeasible on the support grid".into(),
        )),
        Err(e) => Err(Error::Numeric {
            message: format!("oracle linear program failed: {e}"),
            residual: f64::NAN,
        }),
    }
}
