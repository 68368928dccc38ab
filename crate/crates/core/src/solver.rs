//! Monotone upwind discretization of the robust HJB equation and the
//! fast-sweeping Gauss-Seidel fixed point that solves it.
//!
//! Every vertex update assembles
//!
//! ```text
//! H = f^p + |a1|/h1 F_up1 + |a2|/h2 F_up2
//!       + lambda_z min_{k,l} { F_target + g^p(k h1, l h2) }
//!       + lambda_n sum_m phi_m p_m Fhat_m
//! C = delta + lambda_z + |a1|/h1 + |a2|/h2
//!       + lambda_n sum_m { D(phi_m)/psi + phi_m } p_m
//! ```
//!
//! with the distortion `phi_m = exp(psi (Fhat_m - F)/max{F, eps})` evaluated
//! at the pre-update center value, and relaxes `F <- gamma H/C + (1-gamma) F`
//! in a fixed sweep order (j outer, i inner, both ascending). `C >= delta > 0`
//! keeps every update well defined. The equivalent residual form `G(F) = f^p`
//! is evaluated on a separate arithmetic path and backs the monotonicity and
//! stability checks.

use serde::{Deserialize, Serialize};

use crate::dynamics::Dynamics;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::jump::JumpQuadrature;
use crate::risk::{divergence_from_log, phi_exponent, RiskParams};

/// Iteration controls of the fast-sweeping solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Relaxation factor in (0, 1).
    pub gamma: f64,
    /// Sup-norm iteration threshold.
    pub tol: f64,
    /// Division guard in the distortion exponent.
    pub eps_div: f64,
    /// Sweep cap; exceeding it is reported, not fatal.
    pub max_iters: usize,
    /// Truncation bound of the auxiliary residual form, when used.
    pub omega_trunc: Option<f64>,
    /// Subsampling stride of the control search (1 = exhaustive).
    pub control_stride: usize,
    /// Initial field constant; defaults to `max f^p / delta`, the top of the
    /// stability band, which keeps the distortion exponents moderate from the
    /// first sweep on.
    pub init_value: Option<f64>,
    /// Force `phi = 1`: the risk-only problem without ambiguity distortion.
    pub force_phi_one: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            tol: 1e-10,
            eps_div: 1e-12,
            max_iters: 20_000,
            omega_trunc: None,
            control_stride: 1,
            init_value: None,
            force_phi_one: false,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!(
                "gamma must lie in (0,1), got {}",
                self.gamma
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be > 0, got {}", self.tol)));
        }
        if !(self.eps_div > 0.0) {
            return Err(Error::Config(format!(
                "eps_div must be > 0, got {}",
                self.eps_div
            )));
        }
        if self.control_stride == 0 {
            return Err(Error::Config("control_stride must be >= 1".into()));
        }
        Ok(())
    }
}

/// Optimal controls, worst-case distortions and the induced extra discount,
/// all sampled on the grid.
#[derive(Debug, Clone)]
pub struct PolicyBundle {
    pub u1: Field,
    pub u2: Field,
    /// Distortion per vertex and quadrature node, vertex-major.
    pub phi: Vec<f64>,
    /// Number of quadrature nodes behind `phi`.
    pub m: usize,
    /// Extra discount `(lambda_n/psi) sum_m D(phi_m) p_m` per vertex.
    pub delta_tilde: Field,
}

/// Termination diagnostics of one solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_error: f64,
    pub converged: bool,
    /// Whether `min f^p <= delta F <= max f^p` held at every vertex.
    pub stability_ok: bool,
    /// Sup norm of the residual form `G(F) - f^p` at the final field.
    pub residual_inf: f64,
    /// Distortion-exponent saturations seen during the sweeps.
    pub saturation_events: u64,
    /// Upwind differences zeroed because the needed neighbor left the grid.
    pub boundary_flags: u64,
}

impl SolveReport {
    /// Flat `key=value` rendering.
    pub fn to_kv(&self) -> String {
        format!(
            "iterations={}\nfinal_error={:.16e}\nconverged={}\nstability_ok={}\nresidual_inf={:.16e}\nsaturation_events={}\nboundary_flags={}\n",
            self.iterations,
            self.final_error,
            self.converged,
            self.stability_ok,
            self.residual_inf,
            self.saturation_events,
            self.boundary_flags
        )
    }
}

/// Drift contribution of one vertex.
#[derive(Debug, Clone, Copy)]
pub struct DriftTerm {
    /// Neighbor part entering `H`.
    pub h_part: f64,
    /// Coefficient part entering `C`.
    pub c_part: f64,
    /// Upwind differences zeroed at this vertex.
    pub flagged: u32,
}

/// Jump contribution of one vertex.
#[derive(Debug, Clone)]
pub struct JumpTerm {
    /// `lambda_n sum phi p Fhat`.
    pub h_part: f64,
    /// `lambda_n sum {D(phi)/psi + phi} p`.
    pub c_part: f64,
    /// Distortion per quadrature node.
    pub phi: Vec<f64>,
    /// Whether any exponent saturated.
    pub saturated: bool,
}

/// Precomputed discretization of one problem instance.
pub struct Discretization<'a> {
    pub model: &'a dyn Dynamics,
    pub grid: Grid,
    pub quad: &'a JumpQuadrature,
    pub params: RiskParams,
    pub config: SolverConfig,
    fp: Vec<f64>,
    fp_min: f64,
    fp_max: f64,
    /// Upwind coefficient and flat-index neighbor offset per vertex and axis;
    /// a zero coefficient means no neighbor is consulted.
    drift: Vec<[(f64, isize); 2]>,
    jump_gain: Vec<[f64; 2]>,
    /// `g^p` at control `(k h1, l h2)`, indexed like vertices.
    gp: Vec<f64>,
    boundary_flags: u64,
}

impl<'a> Discretization<'a> {
    pub fn new(
        model: &'a dyn Dynamics,
        grid: Grid,
        quad: &'a JumpQuadrature,
        params: RiskParams,
        config: SolverConfig,
    ) -> Result<Self> {
        params.validate()?;
        config.validate()?;
        if model.dim() != grid.dim {
            return Err(Error::Config(format!(
                "model dimension {} does not match grid dimension {}",
                model.dim(),
                grid.dim
            )));
        }
        let count = grid.vertex_count();
        let stride_j = (grid.n[0] + 1) as isize;
        let mut fp = Vec::with_capacity(count);
        let mut drift = Vec::with_capacity(count);
        let mut jump_gain = Vec::with_capacity(count);
        let mut gp = Vec::with_capacity(count);
        let mut boundary_flags = 0u64;
        for j in 0..=grid.n[1] {
            for i in 0..=grid.n[0] {
                let s = grid.vertex(i, j);
                fp.push(model.disutility(s).powf(params.p));
                gp.push(model.intervention_cost([s[0], s[1]]).powf(params.p));
                jump_gain.push(model.jump_gain(s));
                let a = model.drift(s);
                let mut terms = [(0.0, 0isize); 2];
                // axis 0
                if a[0] > 0.0 {
                    if i < grid.n[0] {
                        terms[0] = (a[0] / grid.h[0], 1);
                    } else {
                        boundary_flags += 1;
                    }
                } else if a[0] < 0.0 {
                    if i > 0 {
                        terms[0] = (-a[0] / grid.h[0], -1);
                    } else {
                        boundary_flags += 1;
                    }
                }
                // axis 1
                if grid.dim == 2 {
                    if a[1] > 0.0 {
                        if j < grid.n[1] {
                            terms[1] = (a[1] / grid.h[1], stride_j);
                        } else {
                            boundary_flags += 1;
                        }
                    } else if a[1] < 0.0 {
                        if j > 0 {
                            terms[1] = (-a[1] / grid.h[1], -stride_j);
                        } else {
                            boundary_flags += 1;
                        }
                    }
                }
                drift.push(terms);
            }
        }
        let fp_min = fp.iter().copied().fold(f64::INFINITY, f64::min);
        let fp_max = fp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            model,
            grid,
            quad,
            params,
            config,
            fp,
            fp_min,
            fp_max,
            drift,
            jump_gain,
            gp,
            boundary_flags,
        })
    }

    /// Lower end of the stability band divided by the discount: the no-action
    /// value floor.
    pub fn fp_min(&self) -> f64 {
        self.fp_min
    }

    /// Upper end of the stability band (before dividing by the discount).
    pub fn fp_max(&self) -> f64 {
        self.fp_max
    }

    /// One-sided drift difference contributions at a vertex.
    pub fn upwind_drift_term(&self, field: &Field, i: usize, j: usize) -> DriftTerm {
        let idx = self.grid.idx(i, j);
        let mut h_part = 0.0;
        let mut c_part = 0.0;
        for &(coef, off) in &self.drift[idx] {
            if coef != 0.0 {
                h_part += coef * field.values[(idx as isize + off) as usize];
                c_part += coef;
            }
        }
        let a = self.model.drift(self.grid.vertex(i, j));
        let mut flagged = 0;
        if a[0] > 0.0 && i == self.grid.n[0] || a[0] < 0.0 && i == 0 {
            flagged += 1;
        }
        if self.grid.dim == 2 && (a[1] > 0.0 && j == self.grid.n[1] || a[1] < 0.0 && j == 0) {
            flagged += 1;
        }
        DriftTerm {
            h_part,
            c_part,
            flagged,
        }
    }

    /// Exact minimum of `F_target + g^p` over the (stride-subsampled) control
    /// set, with ties broken toward the smallest `k`, then the smallest `l`.
    ///
    /// The search is restricted to `k <= i`, `l <= j`: any `k >= i` reaches
    /// the same target row as `k = i` at no smaller cost, so the restriction
    /// loses nothing at stride 1.
    pub fn control_min(&self, field: &Field, i: usize, j: usize) -> (f64, (usize, usize)) {
        self.control_min_bounded(field, i, j, field.min())
    }

    fn control_min_bounded(
        &self,
        field: &Field,
        i: usize,
        j: usize,
        field_lower: f64,
    ) -> (f64, (usize, usize)) {
        let stride = self.config.control_stride;
        let n1p = self.grid.n[0] + 1;
        let mut best = f64::INFINITY;
        let mut arg = (0usize, 0usize);
        let mut k = 0usize;
        loop {
            // prune: every candidate in this column and beyond costs at least
            // field_lower + g^p(k, 0), and g^p increases along both axes
            if field_lower + self.gp[k] >= best {
                break;
            }
            let mut l = 0usize;
            loop {
                let cand = field.values[(j - l) * n1p + (i - k)] + self.gp[l * n1p + k];
                if cand < best {
                    best = cand;
                    arg = (k, l);
                }
                if l == j {
                    break;
                }
                l = (l + stride).min(j);
                if field_lower + self.gp[l * n1p + k] >= best {
                    // g^p increases along l: nothing further in this column,
                    // including the saturating index, can beat the incumbent
                    break;
                }
            }
            if k == i {
                break;
            }
            k = (k + stride).min(i);
        }
        (best, arg)
    }

    /// Distorted jump contributions at a vertex, with the distortion lagged
    /// at the supplied center value.
    pub fn robust_jump_term(&self, field: &Field, i: usize, j: usize) -> JumpTerm {
        let mut phi = vec![0.0; self.quad.len()];
        let idx = self.grid.idx(i, j);
        let center = field.values[idx];
        let (h_part, c_part, saturated) =
            self.jump_parts(field, i, j, center, Some(&mut phi));
        JumpTerm {
            h_part,
            c_part,
            phi,
            saturated,
        }
    }

    #[inline]
    fn jump_parts(
        &self,
        field: &Field,
        i: usize,
        j: usize,
        center: f64,
        mut phi_out: Option<&mut [f64]>,
    ) -> (f64, f64, bool) {
        let params = &self.params;
        if params.lambda_n == 0.0 {
            if let Some(ref mut p) = phi_out {
                p.fill(1.0);
            }
            return (0.0, 0.0, false);
        }
        let idx = self.grid.idx(i, j);
        let s = self.grid.vertex(i, j);
        let b = self.jump_gain[idx];
        let denom = f64::max(center, self.config.eps_div);
        let mut hj = 0.0;
        let mut cj = 0.0;
        let mut saturated = false;
        for (m, (&z, &w)) in self
            .quad
            .nodes
            .iter()
            .zip(self.quad.weights.iter())
            .enumerate()
        {
            let target = self.grid.clamp([s[0] + b[0] * z, s[1] + b[1] * z]);
            let fhat = field.interpolate(target);
            let (phi, d_over_psi) = if self.config.force_phi_one {
                (1.0, 0.0)
            } else {
                let om = (fhat - center) / denom;
                let (e, sat) = phi_exponent(om, params.psi);
                saturated |= sat;
                let phi = e.exp();
                (phi, divergence_from_log(phi, e) / params.psi)
            };
            if let Some(ref mut p) = phi_out {
                p[m] = phi;
            }
            hj += phi * w * fhat;
            cj += (d_over_psi + phi) * w;
        }
        (params.lambda_n * hj, params.lambda_n * cj, saturated)
    }

    /// Full `H/C` assembly at a vertex against the current field state.
    pub fn local_update(&self, field: &Field, i: usize, j: usize) -> f64 {
        let (value, _, _) = self.assemble(field, i, j, field.min());
        value
    }

    #[inline]
    fn assemble(
        &self,
        field: &Field,
        i: usize,
        j: usize,
        field_lower: f64,
    ) -> (f64, bool, f64) {
        let idx = self.grid.idx(i, j);
        let center = field.values[idx];
        let (hj, cj, saturated) = self.jump_parts(field, i, j, center, None);
        let mut h = self.fp[idx] + hj;
        let mut c = self.params.delta + cj;
        for &(coef, off) in &self.drift[idx] {
            if coef != 0.0 {
                h += coef * field.values[(idx as isize + off) as usize];
                c += coef;
            }
        }
        if self.params.lambda_z > 0.0 {
            let (ctrl, _) = self.control_min_bounded(field, i, j, field_lower);
            h += self.params.lambda_z * ctrl;
            c += self.params.lambda_z;
        }
        (h / c, saturated, center)
    }

    /// Runs the fast-sweeping iteration to the configured tolerance and
    /// extracts the policy bundle and diagnostics.
    pub fn solve(&self) -> Result<(Field, PolicyBundle, SolveReport)> {
        let init = self
            .config
            .init_value
            .unwrap_or(self.fp_max / self.params.delta);
        let mut field = Field::constant(self.grid, init);
        let gamma = self.config.gamma;
        let mut iterations = 0;
        let mut final_error = f64::INFINITY;
        let mut converged = false;
        let mut saturation_events = 0u64;
        let mut field_lower = field.min();

        for sweep in 0..self.config.max_iters {
            let mut err = 0.0f64;
            let mut new_lower = f64::INFINITY;
            for j in 0..=self.grid.n[1] {
                for i in 0..=self.grid.n[0] {
                    let (value, saturated, center) = self.assemble(&field, i, j, field_lower);
                    if saturated {
                        saturation_events += 1;
                    }
                    let updated = gamma * value + (1.0 - gamma) * center;
                    if !updated.is_finite() {
                        return Err(Error::NonFinite { i, j, sweep });
                    }
                    err = err.max((updated - center).abs());
                    new_lower = new_lower.min(updated);
                    // the safe running bound mixes old and new values
                    field_lower = field_lower.min(updated);
                    field.values[self.grid.idx(i, j)] = updated;
                }
            }
            field_lower = new_lower;
            iterations = sweep + 1;
            final_error = err;
            if err < self.config.tol {
                converged = true;
                break;
            }
        }

        let policy = self.extract_policy(&field);
        let delta = self.params.delta;
        let band_tol = 1e-12 * self.fp_max.max(1e-300);
        let stability_ok = field.values.iter().all(|&v| {
            delta * v >= self.fp_min - band_tol && delta * v <= self.fp_max + band_tol
        });
        let residual_inf = self
            .residual(&field)?
            .values
            .iter()
            .fold(0.0f64, |acc, &r| acc.max(r.abs()));

        Ok((
            field,
            policy,
            SolveReport {
                iterations,
                final_error,
                converged,
                stability_ok,
                residual_inf,
                saturation_events,
                boundary_flags: self.boundary_flags,
            },
        ))
    }

    /// Extracts controls, distortions and the extra discount from a field.
    pub fn extract_policy(&self, field: &Field) -> PolicyBundle {
        let m = self.quad.len();
        let mut u1 = Field::constant(self.grid, 0.0);
        let mut u2 = Field::constant(self.grid, 0.0);
        let mut delta_tilde = Field::constant(self.grid, 0.0);
        let mut phi = vec![0.0; self.grid.vertex_count() * m];
        let field_lower = field.min();
        for j in 0..=self.grid.n[1] {
            for i in 0..=self.grid.n[0] {
                let idx = self.grid.idx(i, j);
                if self.params.lambda_z > 0.0 {
                    let (_, (k, l)) = self.control_min_bounded(field, i, j, field_lower);
                    *u1.at_mut(i, j) = k as f64 * self.grid.h[0];
                    *u2.at_mut(i, j) = l as f64 * self.grid.h[1];
                }
                let center = field.values[idx];
                let slot = &mut phi[idx * m..(idx + 1) * m];
                self.jump_parts(field, i, j, center, Some(slot));
                let mut dt = 0.0;
                for (mi, &w) in self.quad.weights.iter().enumerate() {
                    let p = slot[mi];
                    dt += divergence_from_log(p, p.ln()) * w;
                }
                *delta_tilde.at_mut(i, j) = if self.params.lambda_n > 0.0 {
                    self.params.lambda_n / self.params.psi * dt
                } else {
                    0.0
                };
            }
        }
        PolicyBundle {
            u1,
            u2,
            phi,
            m,
            delta_tilde,
        }
    }

    /// Residual form `G(F) - f^p`, evaluated on its own arithmetic path.
    ///
    /// At the discrete solution this vanishes up to the difference between
    /// the `H/C` assembly and the exponential form, which are algebraically
    /// identical wherever the division guard is inactive.
    pub fn residual(&self, field: &Field) -> Result<Field> {
        self.residual_impl(field, None)
    }

    /// Truncated auxiliary residual: the center factor is `max{F, 0}` and the
    /// value differences in the exponent are clamped to `[-trunc, trunc]`.
    ///
    /// Admissible truncations must exceed `(max f^p - min f^p)/delta`.
    pub fn residual_truncated(&self, field: &Field, trunc: f64) -> Result<Field> {
        let floor = (self.fp_max - self.fp_min) / self.params.delta;
        if !(trunc > floor) {
            return Err(Error::Config(format!(
                "truncation {trunc} must exceed (max f^p - min f^p)/delta = {floor}"
            )));
        }
        self.residual_impl(field, Some(trunc))
    }

    fn residual_impl(&self, field: &Field, trunc: Option<f64>) -> Result<Field> {
        let mut out = Field::constant(self.grid, 0.0);
        let field_lower = field.min();
        for j in 0..=self.grid.n[1] {
            for i in 0..=self.grid.n[0] {
                *out.at_mut(i, j) = self.residual_at_impl(field, i, j, trunc, field_lower);
            }
        }
        Ok(out)
    }

    /// Residual `G(F) - f^p` at one vertex (untruncated form).
    pub fn residual_at(&self, field: &Field, i: usize, j: usize) -> f64 {
        self.residual_at_impl(field, i, j, None, field.min())
    }

    fn residual_at_impl(
        &self,
        field: &Field,
        i: usize,
        j: usize,
        trunc: Option<f64>,
        field_lower: f64,
    ) -> f64 {
        let params = &self.params;
        let idx = self.grid.idx(i, j);
        let center = field.values[idx];
        let denom = f64::max(center, self.config.eps_div);
        let s = self.grid.vertex(i, j);
        let b = self.jump_gain[idx];
        // jump coefficient of the center unknown
        let mut jump_coef = 0.0;
        if params.lambda_n > 0.0 {
            for (&z, &w) in self.quad.nodes.iter().zip(self.quad.weights.iter()) {
                let target = self.grid.clamp([s[0] + b[0] * z, s[1] + b[1] * z]);
                let fhat = field.interpolate(target);
                if self.config.force_phi_one {
                    jump_coef += params.lambda_n * w * (center - fhat) / denom;
                } else {
                    let mut diff = center - fhat;
                    if let Some(t) = trunc {
                        diff = diff.clamp(-t, t);
                    }
                    let (e, _) = phi_exponent(-diff / denom, params.psi);
                    jump_coef += params.lambda_n / params.psi * w * (1.0 - e.exp());
                }
            }
        }
        let centered = match trunc {
            Some(_) => center.max(0.0),
            None => center,
        };
        let mut g = (params.delta
            + if params.lambda_z > 0.0 {
                params.lambda_z
            } else {
                0.0
            }
            + jump_coef)
            * centered;
        for &(coef, off) in &self.drift[idx] {
            if coef != 0.0 {
                g += coef * (center - field.values[(idx as isize + off) as usize]);
            }
        }
        if params.lambda_z > 0.0 {
            let (ctrl, _) = self.control_min_bounded(field, i, j, field_lower);
            g -= params.lambda_z * ctrl;
        }
        g - self.fp[idx]
    }
}

/// Convenience entry point: discretize and solve in one call.
pub fn solve(
    model: &dyn Dynamics,
    grid: Grid,
    quad: &JumpQuadrature,
    params: &RiskParams,
    config: &SolverConfig,
) -> Result<(Field, PolicyBundle, SolveReport)> {
    Discretization::new(model, grid, quad, *params, config.clone())?.solve()
}
