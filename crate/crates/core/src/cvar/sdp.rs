//! Exact solver for the worst-case CVaR program of a scalar quadratic loss.
//!
//! The program over `beta` and a symmetric 2x2 matrix `H`,
//!
//! ```text
//! minimize   beta + <omega, H> / (1 - alpha)
//! subject to H >= 0
//!            H - [[t, s/2], [s/2, a - beta]] >= 0
//! ```
//!
//! (with `phi(xi) = t*xi^2 + s*xi + a` and `omega` the moment block of
//! `(mu, sigma^2)`) has the Lagrangian dual
//!
//! ```text
//! maximize   t*y11 + s*y12 + a
//! subject to 0 <= Y <= q*omega,  Y = [[y11, y12], [y12, 1]],  q = 1/(1-alpha).
//! ```
//!
//! Eliminating `y11` (it sits at `y12^2` when `t <= 0` and at the upper
//! envelope when `t > 0`) leaves a univariate concave parabola over the
//! interval `|y12 - mu| <= sigma*sqrt(alpha/(1-alpha))`, so the optimum is a
//! vertex-or-endpoint comparison and the primal optimizer follows from
//! complementary slackness. Both 2x2 blocks are tiny, which is what makes
//! this reduction preferable to a general-purpose conic solver here.

use nalgebra::DMatrix;

use super::{MomentMatrix, QuadraticLoss, WcCvarCertificate};
use crate::error::{Error, Result};

/// Worst-case `CVaR_alpha(phi(xi))` over every distribution of `xi` with the
/// moments in `omega`, together with the optimal `(beta, H)` pair.
///
/// Only scalar losses (`k = 1`) are supported; the returned value upper
/// bounds `CVaR_alpha` under every distribution matching `(mu, sigma^2)`.
pub fn worst_case_cvar(
    loss: &QuadraticLoss,
    omega: &MomentMatrix,
    alpha: f64,
) -> Result<WcCvarCertificate> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must be in (0, 1) (got {alpha})")));
    }
    if loss.k() != omega.k() {
        return Err(Error::Domain(format!(
            "loss dimension {} does not match moment dimension {}",
            loss.k(),
            omega.k()
        )));
    }
    if loss.k() != 1 {
        return Err(Error::Domain(format!(
            "only scalar random parameters are supported (got k = {})",
            loss.k()
        )));
    }
    let t = loss.theta_mat[(0, 0)];
    let s = loss.theta_vec[0];
    let a = loss.theta0;
    let mu = omega.mu[0];
    let sig2 = omega.sigma[(0, 0)].max(0.0);
    if ![t, s, a, mu, sig2].iter().all(|v| v.is_finite()) {
        return Err(Error::Domain("loss and moments must be finite".into()));
    }

    let q = 1.0 / (1.0 - alpha);
    let qm1 = alpha / (1.0 - alpha);

    // Constant loss: CVaR is the constant for every distribution.
    if t == 0.0 && s == 0.0 {
        return Ok(WcCvarCertificate {
            value: a,
            beta: a,
            h_mat: DMatrix::zeros(2, 2),
            duality_gap: 0.0,
        });
    }
    if sig2 == 0.0 {
        return Ok(point_mass_certificate(t, s, a, mu, q));
    }

    let half = (sig2 * qm1).sqrt();
    let (lo, hi) = (mu - half, mu + half);
    let m2 = sig2 + mu * mu;

    if t > 0.0 {
        // y11 sits on the upper envelope; the reduced objective is concave
        // with vertex at q*mu + s*(q-1)/(2t).
        let yv = q * mu + s * qm1 / (2.0 * t);
        if lo <= yv && yv <= hi {
            let beta = a - s * s / (4.0 * t);
            let h = DMatrix::from_row_slice(2, 2, &[t, 0.5 * s, 0.5 * s, s * s / (4.0 * t)]);
            let primal = beta + q * inner(omega, &h);
            let dual = q * (t * m2 + s * mu) + a + s * s * qm1 / (4.0 * t);
            return Ok(WcCvarCertificate {
                value: primal,
                beta,
                h_mat: h,
                duality_gap: (primal - dual).abs(),
            });
        }
        let y = better_endpoint(t, s, lo, hi);
        return Ok(endpoint_certificate(t, s, a, mu, sig2, q, y, omega));
    }

    // t <= 0: y11 sits at y12^2 and the reduced objective is t*y^2 + s*y + a.
    if t < 0.0 {
        let yv = -s / (2.0 * t);
        if lo <= yv && yv <= hi {
            // the loss's global maximum is attainable by the ambiguity set
            let beta = a - s * s / (4.0 * t);
            return Ok(WcCvarCertificate {
                value: beta,
                beta,
                h_mat: DMatrix::zeros(2, 2),
                duality_gap: 0.0,
            });
        }
    }
    let y = better_endpoint(t, s, lo, hi);
    Ok(endpoint_certificate(t, s, a, mu, sig2, q, y, omega))
}

/// Endpoint of the feasible interval with the larger reduced objective.
/// Both envelopes coincide with `t*y^2 + s*y` at the endpoints.
fn better_endpoint(t: f64, s: f64, lo: f64, hi: f64) -> f64 {
    if t * lo * lo + s * lo >= t * hi * hi + s * hi {
        lo
    } else {
        hi
    }
}

fn inner(omega: &MomentMatrix, h: &DMatrix<f64>) -> f64 {
    (omega.omega.clone() * h).trace()
}

/// Primal/dual pair when the dual optimum sits at an endpoint of the
/// feasible interval, where Y is the rank-one matrix of `u = (y, 1)` and the
/// optimal `H` is supported on the single direction `w` with
/// `(q*omega - u*u') w = 0`.
fn endpoint_certificate(
    t: f64,
    s: f64,
    a: f64,
    mu: f64,
    sig2: f64,
    q: f64,
    y: f64,
    omega: &MomentMatrix,
) -> WcCvarCertificate {
    let d = y - mu;
    let w1 = d;
    let w2 = sig2 - mu * d;
    // rho_t = rho * (w . u); beta solves (H - M(beta)) u = 0 in closed form.
    let rho_t = (t * y + 0.5 * s) / d;
    let beta = 0.5 * s * y + a - rho_t * w2;
    let rho = (rho_t / (q * sig2)).max(0.0);
    let h = DMatrix::from_row_slice(
        2,
        2,
        &[rho * w1 * w1, rho * w1 * w2, rho * w1 * w2, rho * w2 * w2],
    );
    let primal = beta + q * inner(omega, &h);
    let dual = t * y * y + s * y + a;
    WcCvarCertificate {
        value: primal,
        beta,
        h_mat: h,
        duality_gap: (primal - dual).abs(),
    }
}

/// Degenerate ambiguity set (variance zero): the only member is the point
/// mass at `mu`, so the worst-case CVaR is `phi(mu)`. The infimum is not
/// attained at that value, so the certificate backs off by a relative
/// `~1e-12` and scales `H` along the direction orthogonal to `(mu, 1)`,
/// which contributes nothing to the objective.
fn point_mass_certificate(t: f64, s: f64, a: f64, mu: f64, q: f64) -> WcCvarCertificate {
    let phi_mu = t * mu * mu + s * mu + a;
    let scale = [1.0, phi_mu.abs(), t.abs() * (1.0 + mu * mu), s.abs() * (1.0 + mu.abs())]
        .into_iter()
        .fold(0.0f64, f64::max);
    let delta = 1e-12 * scale;
    let beta = phi_mu + delta;

    // S = lambda * a1 * a1' - M(beta) with a1 = (1, -mu) must be PSD.
    let (m11, m12, m22) = (t, 0.5 * s, a - beta);
    let ma1 = (m11 - mu * m12, m12 - mu * m22);
    let c1 = mu * ma1.0 + ma1.1; // v' M a1 with v = (mu, 1)
    let a_m_a = m11 - 2.0 * mu * m12 + mu * mu * m22;
    let n2 = 1.0 + mu * mu;
    let lambda = (((c1 * c1 / delta + a_m_a) / (n2 * n2)).max(0.0)) * (1.0 + 1e-6) + delta;
    let h = DMatrix::from_row_slice(
        2,
        2,
        &[lambda, -lambda * mu, -lambda * mu, lambda * mu * mu],
    );
    // <omega, H> vanishes exactly: omega = v*v' and a1 is orthogonal to v.
    WcCvarCertificate {
        value: beta,
        beta,
        h_mat: h,
        duality_gap: delta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvar::MomentMatrix;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn solve(t: f64, s: f64, a: f64, mu: f64, sig2: f64, alpha: f64) -> WcCvarCertificate {
        let loss = QuadraticLoss::scalar(t, s, a);
        let omega = MomentMatrix::scalar_gain(mu, sig2).unwrap();
        worst_case_cvar(&loss, &omega, alpha).unwrap()
    }

    fn assert_valid_certificate(cert: &WcCvarCertificate, loss: &QuadraticLoss) {
        let (r_h, r_slack) = cert.psd_residuals(loss);
        assert!(r_h >= -1e-9, "H residual {r_h}");
        assert!(r_slack >= -1e-9, "slack residual {r_slack}");
        assert!(
            cert.duality_gap <= 1e-8 * cert.value.abs().max(1.0),
            "gap {} vs value {}",
            cert.duality_gap,
            cert.value
        );
    }

    #[test]
    fn constant_loss_returns_constant() {
        for alpha in [0.5, 0.9, 0.99] {
            let cert = solve(0.0, 0.0, 3.25, 2.0, 0.5, alpha);
            assert_eq!(cert.value, 3.25);
            assert_valid_certificate(&cert, &QuadraticLoss::scalar(0.0, 0.0, 3.25));
        }
    }

    #[test]
    fn point_mass_evaluates_loss_at_mean() {
        let cert = solve(-1.0, 0.0, 1.0, 2.0, 0.0, 0.95);
        assert_relative_eq!(cert.value, 1.0 - 4.0, max_relative = 1e-9);
        assert_valid_certificate(&cert, &QuadraticLoss::scalar(-1.0, 0.0, 1.0));
    }

    #[test]
    fn concave_loss_with_reachable_peak_returns_peak() {
        // interval [mu - sigma*sqrt(19), ...] contains 0, so the peak at
        // xi = 0 is the worst-case CVaR
        let cert = solve(-1.0, 0.0, 1.0, 1.0, 0.25, 0.95);
        assert_relative_eq!(cert.value, 1.0, epsilon = 1e-12);
        assert_eq!(cert.h_mat, DMatrix::zeros(2, 2));
    }

    #[test]
    fn linear_loss_recovers_classic_mean_deviation_bound() {
        // phi(xi) = -xi: worst-case CVaR = -mu + sigma * sqrt(alpha/(1-alpha))
        let cert = solve(0.0, -1.0, 0.0, 2.0, 0.25, 0.95);
        assert_relative_eq!(cert.value, 0.17944947177033654, max_relative = 1e-12);
        assert_valid_certificate(&cert, &QuadraticLoss::scalar(0.0, -1.0, 0.0));
    }

    #[test]
    fn convex_loss_tail_mass_construction() {
        // phi(xi) = xi^2, mean 1, variance 1, alpha = 1/2: the two-point
        // distribution (0 w.p. 1/2, 2 w.p. 1/2) realizes CVaR = 4.
        let cert = solve(1.0, 0.0, 0.0, 1.0, 1.0, 0.5);
        assert_relative_eq!(cert.value, 4.0, max_relative = 1e-12);
        assert_valid_certificate(&cert, &QuadraticLoss::scalar(1.0, 0.0, 0.0));
    }

    #[test]
    fn convex_loss_endpoint_case() {
        // phi(xi) = xi^2 with a tight ambiguity interval: worst-case CVaR is
        // (mu + sigma*sqrt(alpha/(1-alpha)))^2.
        let (mu, sig2, alpha) = (3.0, 0.01, 0.9);
        let cert = solve(1.0, 0.0, 0.0, mu, sig2, alpha);
        let edge = mu + (sig2 * alpha / (1.0 - alpha)).sqrt();
        assert_relative_eq!(cert.value, edge * edge, max_relative = 1e-12);
        assert_valid_certificate(&cert, &QuadraticLoss::scalar(1.0, 0.0, 0.0));
    }

    #[test]
    fn concave_endpoint_matches_reduction() {
        let (a, b, mu, sig2, alpha) = (0.0, 1.0, 5.0, 0.04, 0.95);
        let cert = solve(-b, 0.0, a, mu, sig2, alpha);
        let y = mu - (sig2 * alpha / (1.0 - alpha)).sqrt();
        assert_relative_eq!(cert.value, a - b * y * y, max_relative = 1e-12);
        assert_valid_certificate(&cert, &QuadraticLoss::scalar(-b, 0.0, a));
    }

    #[test]
    fn rejects_bad_alpha_and_dimension() {
        let loss = QuadraticLoss::scalar(-1.0, 0.0, 1.0);
        let omega = MomentMatrix::scalar_gain(1.0, 0.1).unwrap();
        assert!(worst_case_cvar(&loss, &omega, 0.0).is_err());
        assert!(worst_case_cvar(&loss, &omega, 1.0).is_err());
        let omega2 = crate::cvar::assemble_moment_matrix(
            nalgebra::DVector::from_column_slice(&[1.0, 1.0]),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let loss2 = QuadraticLoss::new(
            -DMatrix::identity(2, 2),
            nalgebra::DVector::zeros(2),
            1.0,
        )
        .unwrap();
        assert!(worst_case_cvar(&loss2, &omega2, 0.95).is_err());
    }

    proptest! {
        #[test]
        fn certificate_invariants_hold(
            t in -1.0..1.0f64,
            s in -1.0..1.0f64,
            a in -1.0..1.0f64,
            mu in 0.0..10.0f64,
            sig2 in 1e-6..1.0f64,
            alpha in 0.5..0.995f64,
        ) {
            let loss = QuadraticLoss::scalar(t, s, a);
            let omega = MomentMatrix::scalar_gain(mu, sig2).unwrap();
            let cert = worst_case_cvar(&loss, &omega, alpha).unwrap();
            let (r_h, r_slack) = cert.psd_residuals(&loss);
            prop_assert!(r_h >= -1e-9, "H residual {}", r_h);
            prop_assert!(r_slack >= -1e-9, "slack residual {}", r_slack);
            prop_assert!(cert.duality_gap <= 1e-8 * cert.value.abs().max(1.0));
            // value reproduces beta + q <omega, H>
            let q = 1.0 / (1.0 - alpha);
            let recomputed = cert.beta + q * (omega.omega.clone() * &cert.h_mat).trace();
            prop_assert!((recomputed - cert.value).abs() <= 1e-9 * cert.value.abs().max(1.0));
        }

        #[test]
        fn positive_homogeneity_and_translation(
            t in -1.0..0.0f64,
            a in 0.0..1.0f64,
            mu in 1.0..10.0f64,
            sig2 in 1e-4..1.0f64,
            alpha in 0.5..0.99f64,
            c in 1e-3..1e3f64,
            shift in -2.0..2.0f64,
        ) {
            let omega = MomentMatrix::scalar_gain(mu, sig2).unwrap();
            let base = worst_case_cvar(&QuadraticLoss::scalar(t, 0.0, a), &omega, alpha).unwrap();
            let scaled = worst_case_cvar(&QuadraticLoss::scalar(c * t, 0.0, c * a), &omega, alpha).unwrap();
            prop_assert!(
                (scaled.value - c * base.value).abs() <= 1e-9 * (c * base.value).abs().max(1e-300),
                "homogeneity: {} vs {}", scaled.value, c * base.value
            );
            let shifted = worst_case_cvar(&QuadraticLoss::scalar(t, 0.0, a + shift), &omega, alpha).unwrap();
            prop_assert!(
                (shifted.value - (base.value + shift)).abs() <= 1e-9 * base.value.abs().max(1.0),
                "translation: {} vs {}", shifted.value, base.value + shift
            );
        }

        #[test]
        fn value_nondecreasing_in_alpha(
            t in -1.0..0.0f64,
            a in 0.0..1.0f64,
            mu in 1.0..10.0f64,
            sig2 in 1e-4..1.0f64,
        ) {
            let omega = MomentMatrix::scalar_gain(mu, sig2).unwrap();
            let loss = QuadraticLoss::scalar(t, 0.0, a);
            let mut prev = f64::NEG_INFINITY;
            for alpha in [0.5, 0.7, 0.9, 0.95, 0.99] {
                let v = worst_case_cvar(&loss, &omega, alpha).unwrap().value;
                prop_assert!(v >= prev - 1e-12 * v.abs().max(1.0));
                prev = v;
            }
        }
    }
}
