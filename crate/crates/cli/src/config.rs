//! Strictly parsed run configuration.
//!
//! Unknown keys anywhere in the file are rejected, and each command checks
//! that exactly the blocks it needs are present before any computation
//! starts.

use serde::{Deserialize, Serialize};

use orlicz_hjb::calibrate::FitSettings;
use orlicz_hjb::{
    Dynamics, JumpDistribution, LinearGrowth1d, Logistic1d, MacrophyteModel, RiskParams,
    SolverConfig, StationParameters,
};

/// Top-level configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional command echo; must match the invoked subcommand when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    /// Output directory (the `--out` flag overrides it).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jumps: Option<JumpDistribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk: Option<RiskParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<QuadratureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_compare: Option<ExactCompareSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensitivity: Option<SensitivitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibrate: Option<CalibrateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySpec>,
}

/// Model selection by name plus its parameter block.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Two-population harvesting model with fitted station dynamics.
    Macrophyte {
        r: f64,
        d: f64,
        alpha_src: f64,
        q: f64,
        #[serde(default = "default_mu")]
        mu: f64,
        cost_fixed: f64,
        cost_unit: f64,
        #[serde(default)]
        cross_immigration: f64,
    },
    /// Single-population logistic benchmark, no control.
    #[serde(rename = "logistic-1d")]
    Logistic1d { a: f64, alpha: f64 },
    /// Single-population exponential-growth benchmark, no control.
    #[serde(rename = "linear-1d")]
    Linear1d { a: f64, alpha: f64 },
}

fn default_mu() -> f64 {
    0.1
}

impl ModelSpec {
    /// Instantiates the dynamics with the shared jump distribution.
    pub fn build(&self, jumps: &JumpDistribution) -> anyhow::Result<Box<dyn Dynamics>> {
        jumps
            .validate()
            .map_err(|e| anyhow::anyhow!("jump block: {e}"))?;
        Ok(match *self {
            ModelSpec::Macrophyte {
                r,
                d,
                alpha_src,
                q,
                mu,
                cost_fixed,
                cost_unit,
                cross_immigration,
            } => Box::new(MacrophyteModel {
                station: StationParameters {
                    r,
                    d,
                    alpha_src,
                    q,
                    mu,
                },
                cost_fixed,
                cost_unit,
                cross_immigration,
                jumps: jumps.clone(),
            }),
            ModelSpec::Logistic1d { a, alpha } => Box::new(Logistic1d {
                a,
                alpha,
                jumps: jumps.clone(),
            }),
            ModelSpec::Linear1d { a, alpha } => Box::new(LinearGrowth1d {
                a,
                alpha,
                jumps: jumps.clone(),
            }),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelSpec::Macrophyte { .. } => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub extent1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extent2: Option<f64>,
    pub n1: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n2: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub m: usize,
}

/// Simulation block; mirrors the simulator options field by field because
/// serde cannot combine `flatten` with strict unknown-key rejection.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_error: Option<f64>,
    pub paths: usize,
    #[serde(default)]
    pub seed: u64,
    pub state0: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
    #[serde(default)]
    pub record_events: bool,
    pub policy: PolicySpec,
}

impl SimSpec {
    pub fn to_config(&self) -> orlicz_hjb::mc::SimConfig {
        orlicz_hjb::mc::SimConfig {
            horizon: self.horizon,
            truncation_error: self.truncation_error,
            paths: self.paths,
            seed: self.seed,
            state0: self.state0,
            max_step: self.max_step,
            record_events: self.record_events,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum PolicySpec {
    /// No intervention, nominal measure.
    Null,
    /// Closed-form worst-case distortion; needs the `exact_compare`-style
    /// benchmark model (`linear-1d` / `logistic-1d`).
    ExactPhi,
    /// Value/policy produced by a previous `solve` run.
    FromSolve { dir: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactCompareSpec {
    pub resolutions: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensitivitySpec {
    pub rel_bump: f64,
}

impl Default for SensitivitySpec {
    fn default() -> Self {
        Self { rel_bump: 1e-4 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateSpec {
    /// Station CSV (`station_id,day_offset,observed`).
    pub input: String,
    /// Divisor applied to the third column (1.0 for already-normalized data).
    #[serde(default = "default_divisor")]
    pub divisor: f64,
    #[serde(default)]
    pub settings: FitSettings,
    /// Optional per-station warm starts `(station_id, [r, d, alpha, Q])`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warm_starts: Vec<(u32, [f64; 4])>,
}

fn default_divisor() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySpec {
    pub trials: u32,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fault: Option<FaultSpec>,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self {
            trials: 200,
            seed: 0xbead,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultSpec {
    DivergenceSignFlip,
}

impl RunConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        Ok(cfg)
    }

    /// Fails when a block the command relies on is missing.
    pub fn require(&self, blocks: &[&str], command: &str) -> anyhow::Result<()> {
        if let Some(declared) = &self.command {
            anyhow::ensure!(
                declared == command,
                "config declares command '{declared}' but '{command}' was invoked"
            );
        }
        for &b in blocks {
            let present = match b {
                "model" => self.model.is_some(),
                "jumps" => self.jumps.is_some(),
                "risk" => self.risk.is_some(),
                "grid" => self.grid.is_some(),
                "quadrature" => self.quadrature.is_some(),
                "solver" => self.solver.is_some(),
                "sim" => self.sim.is_some(),
                "exact_compare" => self.exact_compare.is_some(),
                "calibrate" => self.calibrate.is_some(),
                _ => unreachable!("unknown block {b}"),
            };
            anyhow::ensure!(present, "config block '{b}' is required for '{command}'");
        }
        Ok(())
    }

    pub fn build_grid(&self, dim: usize) -> anyhow::Result<orlicz_hjb::Grid> {
        let spec = self
            .grid
            .as_ref()
            .ok_or_else(|| anyhow::anyhow!("grid block missing"))?;
        let grid = if dim == 1 {
            anyhow::ensure!(
                spec.extent2.is_none() && spec.n2.is_none(),
                "one-dimensional model takes no extent2/n2"
            );
            orlicz_hjb::Grid::new_1d(spec.extent1, spec.n1)?
        } else {
            let e2 = spec
                .extent2
                .ok_or_else(|| anyhow::anyhow!("extent2 required for 2D grids"))?;
            let n2 = spec
                .n2
                .ok_or_else(|| anyhow::anyhow!("n2 required for 2D grids"))?;
            orlicz_hjb::Grid::new_2d([spec.extent1, e2], [spec.n1, n2])?
        };
        Ok(grid)
    }
}
