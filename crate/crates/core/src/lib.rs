//! Solver suite for long-run robust control of jump-driven population
//! dynamics under a power certainty equivalent with an entropy ambiguity
//! penalty.
//!
//! The pieces fit together as follows:
//!
//! * [`risk`] — the distortion/divergence primitives and the
//!   uncertainty-induced discount;
//! * [`jump`] — jump-size distributions and their discretization;
//! * [`dynamics`] — coefficient bundles: two single-population benchmarks and
//!   the two-population macrophyte harvesting model;
//! * [`exact`] — the closed-form benchmark solution, its sensitivities, and
//!   the verification identities;
//! * [`grid`] — rectangular grids, fields, bilinear interpolation;
//! * [`solver`] — the monotone upwind discretization and the fast-sweeping
//!   Gauss-Seidel fixed point, with policy extraction;
//! * [`calibrate`] — least-squares station calibration of the growth model;
//! * [`mc`] — event-driven Monte Carlo evaluation of the long-run objective
//!   under nominal or distorted jump measures;
//! * [`verify`] — the randomized invariant suite behind the `verify` command.

// Parameter guards are written as `!(x > 0.0)` on purpose: the negated form
// also rejects NaN, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod dynamics;
pub mod error;
pub mod exact;
pub mod grid;
pub mod jump;
pub mod mc;
pub mod quadrature;
pub mod risk;
pub mod solver;
pub mod verify;

pub use dynamics::{
    chi_mu, verify_assumption1, CustomModel, Dynamics, LinearGrowth1d, Logistic1d,
    MacrophyteModel, StationParameters,
};
pub use error::{Error, Result};
pub use exact::{
    compute_a, exact_phi, exact_value, hjb_residual, identity_residual, sensitivity_signs,
    ExactSolution, LinearModelParams, SensitivityReport,
};
pub use grid::{jump_target, Field, Grid};
pub use jump::{JumpDensity, JumpDistribution, JumpQuadrature};
pub use risk::{divergence, omega, rho, robust_discount, worst_case_phi, RiskParams};
pub use solver::{solve, Discretization, PolicyBundle, SolveReport, SolverConfig};
