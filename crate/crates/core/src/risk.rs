//! Robust-risk primitives: the entropy divergence, the worst-case jump
//! distortion, and the uncertainty-induced discount.
//!
//! The adversary reweights the jump measure by a positive field `phi`, paying
//! the divergence penalty
//!
//! ```text
//! D(phi) = phi ln phi - phi + 1,
//! ```
//!
//! and the inner maximization is attained at `phi_hat = exp(psi * omega)`,
//! where `omega` is the relative value increment under the jump. Plugging the
//! maximizer back turns the nonlocal term into an extra state-dependent
//! discount rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jump::JumpQuadrature;

/// Cap on the exponent `psi * omega` before exponentiation.
///
/// 690 keeps every downstream product (`D(phi)/psi`, `phi * F`) finite in f64
/// for `psi >= 1e-6`; anything beyond it is saturated and reported.
pub const PHI_EXP_CAP: f64 = 690.0;

/// Risk and uncertainty preferences of the decision maker.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskParams {
    /// Power exponent of the certainty equivalent, `p >= 1`.
    pub p: f64,
    /// Uncertainty aversion `psi > 0`; larger means more pessimistic.
    pub psi: f64,
    /// Exogenous discount rate `delta > 0` (1/time).
    pub delta: f64,
    /// Intensity of environmental jumps (1/time).
    pub lambda_n: f64,
    /// Intensity of intervention opportunities (1/time).
    pub lambda_z: f64,
}

impl RiskParams {
    /// Checks the admissible parameter ranges.
    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0) {
            return Err(Error::Config(format!("p must be >= 1, got {}", self.p)));
        }
        if !(self.psi > 0.0) {
            return Err(Error::Config(format!("psi must be > 0, got {}", self.psi)));
        }
        if !(self.delta > 0.0) {
            return Err(Error::Config(format!(
                "delta must be > 0, got {}",
                self.delta
            )));
        }
        if !(self.lambda_n >= 0.0) || !(self.lambda_z >= 0.0) {
            return Err(Error::Config(format!(
                "jump intensities must be >= 0, got lambda_n={} lambda_z={}",
                self.lambda_n, self.lambda_z
            )));
        }
        Ok(())
    }
}

/// Entropy divergence `D(phi) = phi ln phi - phi + 1`.
///
/// Nonnegative and convex on `phi > 0`, with its unique zero at `phi = 1`.
pub fn divergence(phi: f64) -> Result<f64> {
    if !(phi > 0.0) {
        return Err(Error::Domain(format!(
            "divergence requires phi > 0, got {phi}"
        )));
    }
    Ok(phi * phi.ln() - phi + 1.0)
}

/// Divergence evaluated from the log of `phi`, exact when `phi = exp(e)`.
#[inline]
pub(crate) fn divergence_from_log(phi: f64, log_phi: f64) -> f64 {
    phi * (log_phi - 1.0) + 1.0
}

/// Comparison kernel `rho(x, y) = x (1 - exp(y / x))`, defined for `x > 0`.
///
/// Nondecreasing in `x` and strictly decreasing in `y`; these monotonicities
/// drive the comparison argument behind uniqueness.
pub fn rho(x: f64, y: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("rho requires x > 0, got {x}")));
    }
    Ok(x * (1.0 - (y / x).exp()))
}

/// Relative value increment under a jump: `(F_jump - F_base) / F_base`.
///
/// The positivity of the value function is an assumption of the continuum
/// formulation; a non-positive base is an error here. The division guard used
/// by the discrete solver lives in the solver, not in this layer.
pub fn omega(f_jump: f64, f_base: f64) -> Result<f64> {
    if !(f_base > 0.0) {
        return Err(Error::Domain(format!(
            "omega requires a strictly positive base value, got {f_base}"
        )));
    }
    Ok((f_jump - f_base) / f_base)
}

/// Capped exponent for the distortion, with a saturation flag.
#[inline]
pub fn phi_exponent(omega_value: f64, psi: f64) -> (f64, bool) {
    let e = psi * omega_value;
    if e > PHI_EXP_CAP {
        (PHI_EXP_CAP, true)
    } else if e < -PHI_EXP_CAP {
        (-PHI_EXP_CAP, true)
    } else {
        (e, false)
    }
}

/// Worst-case distortion `phi_hat = exp(psi * omega)`.
///
/// Total on the reals; the exponent is saturated at `±PHI_EXP_CAP` so the
/// result stays finite for any input.
pub fn worst_case_phi(omega_value: f64, psi: f64) -> f64 {
    phi_exponent(omega_value, psi).0.exp()
}

/// Uncertainty-induced discount rate
/// `delta_hat = (lambda_n / psi) * sum_m (1 - exp(psi omega_m)) p_m`.
///
/// Evaluated on the jump quadrature; vanishes when every `omega_m` is zero and
/// is nonnegative whenever every `omega_m <= 0`.
pub fn robust_discount(
    omega_samples: &[f64],
    quadrature: &JumpQuadrature,
    params: &RiskParams,
) -> f64 {
    debug_assert_eq!(omega_samples.len(), quadrature.len());
    let sum: f64 = omega_samples
        .iter()
        .zip(quadrature.weights.iter())
        .map(|(&om, &w)| (1.0 - worst_case_phi(om, params.psi)) * w)
        .sum();
    params.lambda_n / params.psi * sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jump::{JumpDistribution, JumpQuadrature};
    use approx::assert_abs_diff_eq;

    #[test]
    fn divergence_reference_values() {
        assert_eq!(divergence(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            divergence(std::f64::consts::E).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            divergence(2.0).unwrap(),
            2.0 * 2.0f64.ln() - 1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(divergence(2.0).unwrap(), 0.386294, epsilon = 1e-6);
        assert!(divergence(0.0).is_err());
        assert!(divergence(-1.0).is_err());
    }

    #[test]
    fn rho_reference_values() {
        assert_eq!(rho(1.0, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(rho(1.0, 1.0).unwrap(), 1.0 - std::f64::consts::E, epsilon = 1e-15);
        assert_abs_diff_eq!(
            rho(2.0, -2.0).unwrap(),
            2.0 * (1.0 - (-1.0f64).exp()),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(rho(2.0, -2.0).unwrap(), 1.26424, epsilon = 1e-5);
        assert!(rho(0.0, 1.0).is_err());
    }

    #[test]
    fn omega_reference_values() {
        assert_eq!(omega(5.0, 5.0).unwrap(), 0.0);
        assert_eq!(omega(3.0, 6.0).unwrap(), -0.5);
        assert_abs_diff_eq!(omega(6.6, 6.0).unwrap(), 0.1, epsilon = 1e-15);
        assert!(omega(1.0, 0.0).is_err());
        assert!(omega(1.0, -2.0).is_err());
    }

    #[test]
    fn worst_case_phi_reference_values() {
        assert_eq!(worst_case_phi(0.0, 10.0), 1.0);
        assert_abs_diff_eq!(
            worst_case_phi(-0.75, 0.01),
            (-0.0075f64).exp(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(worst_case_phi(-0.75, 0.01), 0.992528, epsilon = 1e-6);
        assert_abs_diff_eq!(worst_case_phi(1.0, 1.0), std::f64::consts::E, epsilon = 1e-15);
    }

    #[test]
    fn worst_case_phi_saturates() {
        let v = worst_case_phi(1e12, 1.0);
        assert!(v.is_finite());
        assert_eq!(v, PHI_EXP_CAP.exp());
        assert!(phi_exponent(1e12, 1.0).1);
        assert!(!phi_exponent(1.0, 1.0).1);
        // D(phi)/psi stays finite at the cap even for small psi
        let phi = worst_case_phi(1e12, 1e-2);
        assert!((divergence(phi).unwrap() / 1e-2).is_finite());
    }

    #[test]
    fn robust_discount_reference_values() {
        let params = RiskParams {
            p: 2.0,
            psi: 0.01,
            delta: 0.1,
            lambda_n: 0.05,
            lambda_z: 0.0,
        };
        let dist = JumpDistribution::uniform(-1.0, 0.0).unwrap();
        let quad = JumpQuadrature::build(&dist, 4000).unwrap();
        let omegas: Vec<f64> = quad.nodes.iter().map(|&z| (1.0 + z) * (1.0 + z) - 1.0).collect();
        let dh = robust_discount(&omegas, &quad, &params);
        // adaptive-quadrature oracle value of (lam/psi) int (1 - e^{psi((1+z)^2-1)}) dz
        assert_abs_diff_eq!(dh, 0.0332, epsilon = 2e-4);

        // all omega = 0 kills the integrand
        let zeros = vec![0.0; quad.len()];
        assert_eq!(robust_discount(&zeros, &quad, &params), 0.0);

        // lambda_n = 0 kills the factor
        let off = RiskParams { lambda_n: 0.0, ..params };
        assert_eq!(robust_discount(&omegas, &quad, &off), 0.0);
    }

    #[test]
    fn robust_discount_reproduces_supremum() {
        // the sup of -D(phi)/psi * F + (F_jump - F) phi over phi, attained at
        // phi_hat, equals -delta_hat * F / lambda_n summed over the nodes
        let params = RiskParams {
            p: 2.0,
            psi: 0.7,
            delta: 0.1,
            lambda_n: 0.3,
            lambda_z: 0.0,
        };
        let dist = JumpDistribution::uniform(-0.8, 0.5).unwrap();
        let quad = JumpQuadrature::build(&dist, 37).unwrap();
        let f_base = 3.7;
        let omegas: Vec<f64> = quad.nodes.iter().map(|&z| 0.9 * z - 0.2 * z * z).collect();
        let dh = robust_discount(&omegas, &quad, &params);
        let mut sup = 0.0;
        for (&om, &w) in omegas.iter().zip(quad.weights.iter()) {
            let phi = worst_case_phi(om, params.psi);
            let d = divergence(phi).unwrap();
            sup += w * (-d / params.psi * f_base + om * f_base * phi);
        }
        sup *= params.lambda_n;
        assert_abs_diff_eq!(sup, -dh * f_base, epsilon = 1e-12 * f_base);
    }

    #[test]
    fn robust_discount_sign_for_nonpositive_omega() {
        let params = RiskParams {
            p: 2.0,
            psi: 0.5,
            delta: 0.1,
            lambda_n: 0.3,
            lambda_z: 0.0,
        };
        let dist = JumpDistribution::uniform(-0.9, 0.0).unwrap();
        let quad = JumpQuadrature::build(&dist, 64).unwrap();
        let omegas: Vec<f64> = quad.nodes.iter().map(|&z| z * 0.7).collect();
        assert!(robust_discount(&omegas, &quad, &params) >= 0.0);
    }
}
