//! Coefficient bundles for the controlled jump system.
//!
//! A model supplies the drift `a_i`, the jump gain `b_i`, the intervention
//! response `c_i`, the running disutility `f`, and the intervention cost `g`.
//! Three built-ins cover the use cases: the exponential-growth and logistic
//! single-population benchmarks and the two-population macrophyte model. The
//! solver and simulator only see the [`Dynamics`] trait, so closure-backed
//! models can be added in code without touching either.

use crate::error::Result;
use crate::jump::JumpDistribution;

use serde::{Deserialize, Serialize};

/// Population state `(x1, x2)`; the second component is ignored by
/// one-dimensional models.
pub type State = [f64; 2];

/// Harvest control `(u1, u2)`.
pub type Control = [f64; 2];

/// Coefficient bundle of the controlled system.
pub trait Dynamics: Sync {
    /// Number of populations (1 or 2).
    fn dim(&self) -> usize;

    /// Drift `(a1, a2)`.
    fn drift(&self, s: State) -> [f64; 2];

    /// Jump gain `(b1, b2)`: the state moves by `b_i z` at an environmental
    /// jump of size `z`.
    fn jump_gain(&self, s: State) -> [f64; 2];

    /// Intervention response `(c1, c2)`: the state moves by `c_i` when the
    /// control `u` is applied at an intervention time.
    fn intervention(&self, s: State, u: Control) -> [f64; 2];

    /// Running disutility `f >= 0`.
    fn disutility(&self, s: State) -> f64;

    /// Cost `g >= 0` of applying control `u`.
    fn intervention_cost(&self, u: Control) -> f64;

    /// Jump-size distribution of the environmental noise.
    fn jumps(&self) -> &JumpDistribution;

    /// Upper bound of the compact control set per component.
    fn control_bound(&self) -> [f64; 2];

    /// Crude Lipschitz bound on the drift, used to pick integrator steps.
    fn drift_lipschitz(&self) -> f64;
}

/// Capacity truncation `chi_mu(x) = min{1, (1 - x/Q)/mu}`.
///
/// Equals 1 up to `Q(1 - mu)`, crosses zero at the capacity `Q`, and is
/// negative beyond it.
pub fn chi_mu(x: f64, q: f64, mu: f64) -> f64 {
    f64::min(1.0, (1.0 - x / q) / mu)
}

/// Fitted per-station growth parameters (all rates per day, densities
/// normalized by the surveyed area).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationParameters {
    /// Logistic growth coefficient: the growth term is `r x (Q - x)`.
    pub r: f64,
    /// Decay / transport rate.
    pub d: f64,
    /// External source rate.
    pub alpha_src: f64,
    /// Normalized carrying capacity, in (0, 1].
    pub q: f64,
    /// Capacity-truncation parameter of `chi_mu` (only the drifting
    /// population uses it).
    pub mu: f64,
}

impl StationParameters {
    /// Non-fatal regime checks: the fitted tables contain stations with
    /// `r q <= d`, so this only warns.
    pub fn regime_warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.r * self.q <= self.d {
            w.push(format!(
                "growth rate r*Q = {:.3e} does not exceed decay d = {:.3e}",
                self.r * self.q,
                self.d
            ));
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            w.push(format!("capacity Q = {} outside (0, 1]", self.q));
        }
        if !(self.mu > 0.0) {
            w.push(format!("truncation mu = {} must be positive", self.mu));
        }
        w
    }

    /// Growing-population drift shared between the calibration recursion and
    /// the solver model: `r x (Q - x) - d x + alpha max{Q - x, 0}`.
    #[inline]
    pub fn growth_drift(&self, x: f64) -> f64 {
        self.r * x * (self.q - x) - self.d * x + self.alpha_src * f64::max(self.q - x, 0.0)
    }
}

/// Two-population macrophyte harvesting model.
///
/// The growing population `x1` follows the fitted station dynamics; the
/// drifting population `x2` grows logistically, capped by `chi_mu`, and is
/// fed by transport `d x1`. Jumps wash both populations out proportionally
/// and interventions remove up to the control amount.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacrophyteModel {
    pub station: StationParameters,
    /// Fixed cost per intervention opportunity.
    pub cost_fixed: f64,
    /// Cost per unit of commanded harvest.
    pub cost_unit: f64,
    /// Optional cross-immigration coefficient (zero in the application).
    #[serde(default)]
    pub cross_immigration: f64,
    pub jumps: JumpDistribution,
}

/// Disutility target for the growing population.
const GROWING_TARGET: f64 = 0.25;

impl MacrophyteModel {
    /// Builds the model after validating the jump support.
    pub fn new(
        station: StationParameters,
        cost_fixed: f64,
        cost_unit: f64,
        jumps: JumpDistribution,
    ) -> Result<Self> {
        jumps.validate()?;
        Ok(Self {
            station,
            cost_fixed,
            cost_unit,
            cross_immigration: 0.0,
            jumps,
        })
    }

    /// Station 7 at the nominal application economics; the densest colony in
    /// the survey and the sensitivity-analysis baseline.
    pub fn station7() -> Self {
        Self {
            station: StationParameters {
                r: 4.01e-1,
                d: 2.31e-1,
                alpha_src: 1.73e-4,
                q: 9.98e-1,
                mu: 0.1,
            },
            cost_fixed: 1.0,
            cost_unit: 5.0,
            cross_immigration: 0.0,
            jumps: JumpDistribution::linear_down(0.0, 1.0).unwrap(),
        }
    }
}

impl Dynamics for MacrophyteModel {
    fn dim(&self) -> usize {
        2
    }

    fn drift(&self, s: State) -> [f64; 2] {
        let p = &self.station;
        let e = self.cross_immigration;
        let a1 = p.growth_drift(s[0]) + e * s[1];
        let bracket = p.r * s[1] * (p.q - s[1]) + p.d * s[0] + e * s[0];
        let a2 = chi_mu(s[1], p.q, p.mu) * bracket;
        [a1, a2]
    }

    fn jump_gain(&self, s: State) -> [f64; 2] {
        [-s[0], -s[1]]
    }

    fn intervention(&self, s: State, u: Control) -> [f64; 2] {
        [-f64::min(s[0], u[0]), -f64::min(s[1], u[1])]
    }

    fn disutility(&self, s: State) -> f64 {
        (s[0] - GROWING_TARGET).abs() + s[1]
    }

    fn intervention_cost(&self, u: Control) -> f64 {
        self.cost_fixed + self.cost_unit * (u[0] + u[1])
    }

    fn jumps(&self) -> &JumpDistribution {
        &self.jumps
    }

    fn control_bound(&self) -> [f64; 2] {
        [1.0, 1.0]
    }

    fn drift_lipschitz(&self) -> f64 {
        let p = &self.station;
        // |da/dx| <= r(2 + Q) + d + alpha + |chi'| terms, padded
        (p.r * (2.0 + p.q) + p.d + p.alpha_src) * (1.0 + 1.0 / p.mu)
            + self.cross_immigration.abs()
    }
}

/// Exponential-growth single-population benchmark: drift `a x`, no control.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearGrowth1d {
    pub a: f64,
    pub alpha: f64,
    pub jumps: JumpDistribution,
}

/// Logistic single-population benchmark on `[0, 1]`: drift `a x (1 - x)`,
/// no control; agrees with [`LinearGrowth1d`] asymptotically near the origin.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Logistic1d {
    pub a: f64,
    pub alpha: f64,
    pub jumps: JumpDistribution,
}

macro_rules! impl_benchmark_1d {
    ($ty:ty, $drift:expr) => {
        impl Dynamics for $ty {
            fn dim(&self) -> usize {
                1
            }
            fn drift(&self, s: State) -> [f64; 2] {
                #[allow(clippy::redundant_closure_call)]
                [($drift)(self.a, s[0]), 0.0]
            }
            fn jump_gain(&self, s: State) -> [f64; 2] {
                [s[0], 0.0]
            }
            fn intervention(&self, _s: State, _u: Control) -> [f64; 2] {
                [0.0, 0.0]
            }
            fn disutility(&self, s: State) -> f64 {
                guarded_pow(s[0], self.alpha)
            }
            fn intervention_cost(&self, _u: Control) -> f64 {
                0.0
            }
            fn jumps(&self) -> &JumpDistribution {
                &self.jumps
            }
            fn control_bound(&self) -> [f64; 2] {
                [0.0, 0.0]
            }
            fn drift_lipschitz(&self) -> f64 {
                self.a.abs() * 2.0 + 1e-12
            }
        }
    };
}

impl_benchmark_1d!(LinearGrowth1d, |a: f64, x: f64| a * x);
impl_benchmark_1d!(Logistic1d, |a: f64, x: f64| a * x * (1.0 - x));

/// `x^e` computed as `exp(e ln x)` with a hard zero below `x = 1e-30`;
/// fractional exponents near the washout boundary stay well defined.
#[inline]
pub fn guarded_pow(x: f64, e: f64) -> f64 {
    if x < 1e-30 {
        0.0
    } else {
        (e * x.ln()).exp()
    }
}

/// Closure-backed model for tests and ad-hoc experiments.
pub struct CustomModel {
    pub dim: usize,
    pub drift: Box<dyn Fn(State) -> [f64; 2] + Sync + Send>,
    pub jump_gain: Box<dyn Fn(State) -> [f64; 2] + Sync + Send>,
    pub intervention: Box<dyn Fn(State, Control) -> [f64; 2] + Sync + Send>,
    pub disutility: Box<dyn Fn(State) -> f64 + Sync + Send>,
    pub intervention_cost: Box<dyn Fn(Control) -> f64 + Sync + Send>,
    pub jumps: JumpDistribution,
    pub control_bound: [f64; 2],
    pub drift_lipschitz: f64,
}

impl CustomModel {
    /// All-zero coefficients with constant disutility; the pure-discounting
    /// fixed point of the solver.
    pub fn zero(dim: usize, f_const: f64, jumps: JumpDistribution) -> Self {
        Self {
            dim,
            drift: Box::new(|_| [0.0, 0.0]),
            jump_gain: Box::new(|_| [0.0, 0.0]),
            intervention: Box::new(|_, _| [0.0, 0.0]),
            disutility: Box::new(move |_| f_const),
            intervention_cost: Box::new(|_| 0.0),
            jumps,
            control_bound: [0.0, 0.0],
            drift_lipschitz: 1e-12,
        }
    }
}

impl Dynamics for CustomModel {
    fn dim(&self) -> usize {
        self.dim
    }
    fn drift(&self, s: State) -> [f64; 2] {
        (self.drift)(s)
    }
    fn jump_gain(&self, s: State) -> [f64; 2] {
        (self.jump_gain)(s)
    }
    fn intervention(&self, s: State, u: Control) -> [f64; 2] {
        (self.intervention)(s, u)
    }
    fn disutility(&self, s: State) -> f64 {
        (self.disutility)(s)
    }
    fn intervention_cost(&self, u: Control) -> f64 {
        (self.intervention_cost)(u)
    }
    fn jumps(&self) -> &JumpDistribution {
        &self.jumps
    }
    fn control_bound(&self) -> [f64; 2] {
        self.control_bound
    }
    fn drift_lipschitz(&self) -> f64 {
        self.drift_lipschitz
    }
}

/// One check of the compactness assumption on a sampled lattice.
#[derive(Debug, Clone, Serialize)]
pub struct Assumption1Report {
    /// Smallest lattice level beyond which both drifts are negative, if any.
    pub theta: Option<f64>,
    /// Maximum post-jump coordinate over the lattice and both support ends.
    pub b_bar: f64,
    /// Maximum post-intervention coordinate over the lattice.
    pub c_bar: f64,
    /// Human-readable violations; empty means the assumption held on the
    /// lattice.
    pub violations: Vec<String>,
}

impl Assumption1Report {
    /// True when no violation was recorded.
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Samples Assumption 1 on a `resolution`-per-axis lattice over
/// `[0, extent1] x [0, extent2]`.
///
/// Violations become report entries, never errors: the exponential-growth
/// benchmark is expected to fail the negativity clause.
pub fn verify_assumption1(
    model: &dyn Dynamics,
    extent: [f64; 2],
    resolution: usize,
) -> Assumption1Report {
    let n = resolution.max(2);
    let dim = model.dim();
    let coords = |k: usize, axis: usize| extent[axis] * k as f64 / (n - 1) as f64;
    let mut violations = Vec::new();

    let lattice: Vec<State> = if dim == 1 {
        (0..n).map(|i| [coords(i, 0), 0.0]).collect()
    } else {
        let mut v = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                v.push([coords(i, 0), coords(j, 1)]);
            }
        }
        v
    };

    // 1.1: inward drift at the axes and negativity beyond some theta.
    for s in &lattice {
        let a = model.drift(*s);
        if s[0] == 0.0 && a[0] < 0.0 {
            violations.push(format!("a1(0, {:.4}) = {:.3e} < 0", s[1], a[0]));
        }
        if dim == 2 && s[1] == 0.0 && a[1] < 0.0 {
            violations.push(format!("a2({:.4}, 0) = {:.3e} < 0", s[0], a[1]));
        }
    }
    // Smallest positive lattice level beyond which no drift component is
    // positive (the zero model passes trivially with any theta).
    let mut theta = None;
    'levels: for k in 1..n {
        let level = coords(k, 0);
        for s in &lattice {
            if s[0] >= level && (dim == 1 || s[1] >= level) {
                let a = model.drift(*s);
                if a[0] > 0.0 || (dim == 2 && a[1] > 0.0) {
                    continue 'levels;
                }
            }
        }
        theta = Some(level);
        break;
    }
    if theta.is_none() {
        violations.push(
            "no lattice level theta with a_i <= 0 beyond it (unbounded growth)".to_string(),
        );
    }

    // 1.2: post-jump states stay in [0, b_bar].
    let mut b_bar: f64 = 0.0;
    let dist = model.jumps();
    for s in &lattice {
        let b = model.jump_gain(*s);
        for z in [dist.z_lo, dist.z_hi] {
            for axis in 0..dim {
                let post = s[axis] + z * b[axis];
                if post < -1e-12 {
                    violations.push(format!(
                        "post-jump state component {axis} at x={s:?}, z={z}: {post:.3e} < 0"
                    ));
                }
                b_bar = b_bar.max(post);
            }
        }
    }

    // 1.3: post-intervention states stay in [0, c_bar].
    let mut c_bar: f64 = 0.0;
    let ub = model.control_bound();
    for s in &lattice {
        for ku in 0..n {
            let u = [
                ub[0] * ku as f64 / (n - 1) as f64,
                ub[1] * ku as f64 / (n - 1) as f64,
            ];
            let c = model.intervention(*s, u);
            for axis in 0..dim {
                let post = s[axis] + c[axis];
                if post < -1e-12 {
                    violations.push(format!(
                        "post-intervention component {axis} at x={s:?}, u={u:?}: {post:.3e} < 0"
                    ));
                }
                c_bar = c_bar.max(post);
            }
        }
    }

    Assumption1Report {
        theta,
        b_bar,
        c_bar,
        violations,
    }
}
