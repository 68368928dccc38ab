//! Jump-size distributions and their node/weight discretization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// Functional form of the jump-size density on its support.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum JumpDensity {
    /// Constant density `1 / (z_hi - z_lo)`.
    Uniform,
    /// Linearly decreasing density `2 (z_hi - z) / (z_hi - z_lo)^2`;
    /// on `[0, 1]` this is `2 (1 - z)`, favoring small disturbances.
    LinearDown,
    /// Piecewise-linear density through `(z, value)` samples; renormalized
    /// when discretized, so the samples only need to be proportional.
    Table { z: Vec<f64>, value: Vec<f64> },
}

/// Jump-size distribution with compact support `[z_lo, z_hi]`, `z_lo > -1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpDistribution {
    pub z_lo: f64,
    pub z_hi: f64,
    pub density: JumpDensity,
}

impl JumpDistribution {
    fn check_support(z_lo: f64, z_hi: f64) -> Result<()> {
        if !(z_lo >= -1.0) {
            return Err(Error::Config(format!(
                "jump support must satisfy z_lo >= -1, got {z_lo}"
            )));
        }
        if !(z_lo <= z_hi) {
            return Err(Error::Config(format!(
                "jump support must satisfy z_lo <= z_hi, got [{z_lo}, {z_hi}]"
            )));
        }
        Ok(())
    }

    /// Uniform density on `[z_lo, z_hi]`.
    pub fn uniform(z_lo: f64, z_hi: f64) -> Result<Self> {
        Self::check_support(z_lo, z_hi)?;
        Ok(Self { z_lo, z_hi, density: JumpDensity::Uniform })
    }

    /// Linearly decreasing density on `[z_lo, z_hi]`.
    pub fn linear_down(z_lo: f64, z_hi: f64) -> Result<Self> {
        Self::check_support(z_lo, z_hi)?;
        Ok(Self { z_lo, z_hi, density: JumpDensity::LinearDown })
    }

    /// Validates the support bounds (used when deserialized from config).
    pub fn validate(&self) -> Result<()> {
        Self::check_support(self.z_lo, self.z_hi)?;
        if let JumpDensity::Table { z, value } = &self.density {
            if z.len() != value.len() || z.len() < 2 {
                return Err(Error::Config(
                    "table density needs matching z/value lists of length >= 2".into(),
                ));
            }
            if z.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config("table density z values must increase".into()));
            }
            if value.iter().any(|&v| v < 0.0) {
                return Err(Error::Config("table density values must be >= 0".into()));
            }
        }
        Ok(())
    }

    /// Density value at `z` (zero outside the support).
    pub fn pdf(&self, z: f64) -> f64 {
        if z < self.z_lo || z > self.z_hi {
            return 0.0;
        }
        match &self.density {
            JumpDensity::Uniform => {
                if self.z_hi > self.z_lo {
                    1.0 / (self.z_hi - self.z_lo)
                } else {
                    1.0
                }
            }
            JumpDensity::LinearDown => {
                let w = self.z_hi - self.z_lo;
                2.0 * (self.z_hi - z) / (w * w)
            }
            JumpDensity::Table { z: zs, value } => {
                match zs.binary_search_by(|v| v.partial_cmp(&z).unwrap()) {
                    Ok(k) => value[k],
                    Err(0) => value[0],
                    Err(k) if k >= zs.len() => value[zs.len() - 1],
                    Err(k) => {
                        let t = (z - zs[k - 1]) / (zs[k] - zs[k - 1]);
                        value[k - 1] + t * (value[k] - value[k - 1])
                    }
                }
            }
        }
    }

    /// Total probability mass by adaptive quadrature; 1 within tolerance for
    /// the normalized built-ins.
    pub fn mass(&self) -> f64 {
        quadrature::integrate(|z| self.pdf(z), self.z_lo, self.z_hi, 1e-12)
    }
}

/// Discretization of the jump-size distribution: `m`-th node
/// `z_m = z_lo + (z_hi - z_lo) (m-1) / M` with left-node rectangle weights,
/// renormalized so the weights sum to one exactly.
#[derive(Debug, Clone)]
pub struct JumpQuadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl JumpQuadrature {
    /// Builds the `M`-node discretization of `dist`.
    pub fn build(dist: &JumpDistribution, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Config("quadrature needs at least one node".into()));
        }
        let width = dist.z_hi - dist.z_lo;
        let nodes: Vec<f64> = (0..m)
            .map(|k| dist.z_lo + width * k as f64 / m as f64)
            .collect();
        let mut weights: Vec<f64> = nodes.iter().map(|&z| dist.pdf(z)).collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::DegenerateDensity);
        }
        for w in &mut weights {
            *w /= total;
        }
        Ok(Self { nodes, weights })
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// True when there are no nodes (cannot happen for built quadratures).
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}
