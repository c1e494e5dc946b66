//! Worst-case CVaR machinery for the probabilistic delay constraints.
//!
//! Each delay constraint is encoded as a quadratic loss `phi(xi)` of the
//! random gain magnitude `xi`, negative exactly when the budget is met under
//! the linearized rate model. The distribution of `xi` is known only through
//! its mean and variance; [`worst_case_cvar`] computes the supremum of
//! `CVaR_alpha(phi(xi))` over every distribution with those moments, which
//! upper-bounds the chance of violation: driving it to zero or below
//! guarantees `P(phi <= 0) >= alpha` for the whole ambiguity set.
//!
//! [`cvar_oracle_discrete`] is an independent verification route: it solves
//! the same problem restricted to distributions supported on a finite grid,
//! producing a lower bound that converges to the exact value as the grid
//! refines. [`min_feasible_power`] searches for the smallest transmit power
//! that drives the bound to zero.

mod oracle;
mod power;
mod sdp;

pub use oracle::{cvar_oracle_discrete, default_support_grid, DEFAULT_ORACLE_GRID_POINTS};
pub use power::{min_feasible_power, DEFAULT_POWER_CAP_W};
pub use sdp::worst_case_cvar;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{offloaded_bits, AccessVector, Destination, LowerUavParams, ScenarioConfig};

/// A quadratic loss `phi(xi) = xi' * theta_mat * xi + theta_vec' * xi + theta0`
/// of a random vector `xi` of dimension `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticLoss {
    /// Symmetric `k x k` quadratic coefficient.
    pub theta_mat: DMatrix<f64>,
    /// Linear coefficient of length `k`.
    pub theta_vec: DVector<f64>,
    /// Constant term.
    pub theta0: f64,
}

impl QuadraticLoss {
    /// Build a loss, checking that `theta_mat` is square, symmetric, and
    /// dimensioned consistently with `theta_vec`.
    pub fn new(theta_mat: DMatrix<f64>, theta_vec: DVector<f64>, theta0: f64) -> Result<Self> {
        if theta_mat.nrows() != theta_mat.ncols() {
            return Err(Error::Domain(format!(
                "theta_mat must be square (got {}x{})",
                theta_mat.nrows(),
                theta_mat.ncols()
            )));
        }
        if theta_mat.nrows() != theta_vec.len() || theta_mat.is_empty() {
            return Err(Error::Domain(format!(
                "dimension mismatch: theta_mat is {}x{}, theta_vec has length {}",
                theta_mat.nrows(),
                theta_mat.ncols(),
                theta_vec.len()
            )));
        }
        let scale = theta_mat.amax().max(1.0);
        for i in 0..theta_mat.nrows() {
            for j in (i + 1)..theta_mat.ncols() {
                if (theta_mat[(i, j)] - theta_mat[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::Domain("theta_mat must be symmetric".into()));
                }
            }
        }
        Ok(QuadraticLoss {
            theta_mat,
            theta_vec,
            theta0,
        })
    }

    /// Convenience constructor for a scalar (`k = 1`) loss
    /// `phi(xi) = quad * xi^2 + lin * xi + constant`.
    pub fn scalar(quad: f64, lin: f64, constant: f64) -> Self {
        QuadraticLoss {
            theta_mat: DMatrix::from_element(1, 1, quad),
            theta_vec: DVector::from_element(1, lin),
            theta0: constant,
        }
    }

    /// Dimension of the random vector.
    pub fn k(&self) -> usize {
        self.theta_mat.nrows()
    }

    /// Evaluate the loss at a realization of `xi`.
    pub fn eval(&self, xi: &[f64]) -> f64 {
        assert_eq!(xi.len(), self.k(), "realization dimension mismatch");
        let v = DVector::from_column_slice(xi);
        (v.transpose() * &self.theta_mat * &v)[(0, 0)] + self.theta_vec.dot(&v) + self.theta0
    }
}

/// Second-order moment block matrix of a random vector `xi` with mean `mu`
/// and covariance `sigma`:
///
/// ```text
/// omega = [ sigma + mu*mu'   mu ]
///         [ mu'               1 ]
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct MomentMatrix {
    pub omega: DMatrix<f64>,
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

impl MomentMatrix {
    /// Dimension `k` of the random vector.
    pub fn k(&self) -> usize {
        self.mu.len()
    }

    /// Moments of a scalar gain with the given mean and variance.
    pub fn scalar_gain(mean: f64, variance: f64) -> Result<Self> {
        assemble_moment_matrix(
            DVector::from_element(1, mean),
            DMatrix::from_element(1, 1, variance),
        )
    }
}

/// Assemble the moment block matrix from a mean vector and covariance.
///
/// Rejects non-square, asymmetric, or indefinite `sigma`.
pub fn assemble_moment_matrix(mu: DVector<f64>, sigma: DMatrix<f64>) -> Result<MomentMatrix> {
    let k = mu.len();
    if sigma.nrows() != k || sigma.ncols() != k || k == 0 {
        return Err(Error::Domain(format!(
            "covariance must be {k}x{k} to match the mean (got {}x{})",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    if mu.iter().any(|v| !v.is_finite()) || sigma.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("moments must be finite".into()));
    }
    let scale = sigma.amax().max(1.0);
    for i in 0..k {
        for j in (i + 1)..k {
            if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::Domain("covariance must be symmetric".into()));
            }
        }
    }
    let min_eig = sigma
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min_eig < -1e-10 * scale {
        return Err(Error::Domain(format!(
            "covariance is not positive semidefinite (minimum eigenvalue {min_eig:.3e})"
        )));
    }
    let mut omega = DMatrix::zeros(k + 1, k + 1);
    let second = &sigma + &mu * mu.transpose();
    omega.view_mut((0, 0), (k, k)).copy_from(&second);
    for i in 0..k {
        omega[(i, k)] = mu[i];
        omega[(k, i)] = mu[i];
    }
    omega[(k, k)] = 1.0;
    Ok(MomentMatrix { omega, mu, sigma })
}

/// Optimal point of the worst-case CVaR program together with the auxiliary
/// variables certifying it.
///
/// `value = beta + <omega, h_mat> / (1 - alpha)` and the pair satisfies
/// `h_mat >= 0` and `h_mat - [[theta_mat, theta_vec/2], [theta_vec'/2,
/// theta0 - beta]] >= 0` in the positive-semidefinite order.
#[derive(Debug, Clone, PartialEq)]
pub struct WcCvarCertificate {
    /// The worst-case CVaR.
    pub value: f64,
    /// Optimal shift variable of the CVaR representation.
    pub beta: f64,
    /// Optimal `(k+1) x (k+1)` auxiliary matrix.
    pub h_mat: DMatrix<f64>,
    /// Difference between the certified value and a feasible point of the
    /// dual program; zero up to rounding for an exact solve.
    pub duality_gap: f64,
}

impl WcCvarCertificate {
    /// The matrix `h_mat` must dominate for the loss/beta pair:
    /// `[[theta_mat, theta_vec/2], [theta_vec'/2, theta0 - beta]]`.
    pub fn constraint_block(loss: &QuadraticLoss, beta: f64) -> DMatrix<f64> {
        let k = loss.k();
        let mut m = DMatrix::zeros(k + 1, k + 1);
        m.view_mut((0, 0), (k, k)).copy_from(&loss.theta_mat);
        for i in 0..k {
            m[(i, k)] = 0.5 * loss.theta_vec[i];
            m[(k, i)] = 0.5 * loss.theta_vec[i];
        }
        m[(k, k)] = loss.theta0 - beta;
        m
    }

    /// Minimum eigenvalues of `h_mat` and of `h_mat - constraint_block`;
    /// both must be `>= -1e-9` (up to solver tolerance) for a valid
    /// certificate.
    pub fn psd_residuals(&self, loss: &QuadraticLoss) -> (f64, f64) {
        let min_eig = |m: &DMatrix<f64>| {
            m.clone()
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min)
        };
        let slack = &self.h_mat - Self::constraint_block(loss, self.beta);
        (min_eig(&self.h_mat), min_eig(&slack))
    }
}

/// Loss of one lower-layer delay constraint at transmit power `power_w`:
///
/// `phi(xi) = L * noise - B * pathloss * p * t_max * xi^2`
///
/// Under the linearized rate model the budget is met exactly when
/// `phi(xi) <= 0`; the random variable `xi` is the realized gain magnitude.
pub fn build_loss_lower(
    params: &LowerUavParams,
    power_w: f64,
    dest: Destination,
    noise_var_w: f64,
) -> QuadraticLoss {
    QuadraticLoss::scalar(
        -params.bandwidth_hz * params.pathloss(dest) * power_w * params.delay_budget_s,
        0.0,
        params.data_len_bits * noise_var_w,
    )
}

/// Loss of the relay delay constraint: same shape as [`build_loss_lower`]
/// with the offloaded payloads summed.
pub fn build_loss_upper(cfg: &ScenarioConfig, x: &AccessVector, power_w: f64) -> QuadraticLoss {
    QuadraticLoss::scalar(
        -cfg.upper.bandwidth_hz * cfg.upper.pathloss_to_bs * power_w * cfg.upper.delay_budget_s,
        0.0,
        offloaded_bits(cfg, x) * cfg.noise_var_w,
    )
}
