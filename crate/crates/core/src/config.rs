use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Numerical tolerances shared by every module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceConfig {
    /// Max-norm bound on `H - H*` for a matrix to count as Hermitian.
    pub hermitian_tol: f64,
    /// Eigenvalues above `-psd_tol` count as nonnegative.
    pub psd_tol: f64,
    /// Relative off-diagonal mass at which Jacobi sweeps stop; also the
    /// relative singular-value cutoff of the pseudoinverse.
    pub eig_tol: f64,
    /// Eigenvalues closer than this (scaled by the matrix norm) form a cluster.
    pub degeneracy_tol: f64,
    /// Slack allowed in support-function comparisons.
    pub support_gap_tol: f64,
    /// Default number of directions in planar sweeps.
    pub sweep_samples: usize,
    pub max_sdp_iters: usize,
    pub sdp_conv_tol: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            hermitian_tol: 1e-12,
            psd_tol: 1e-9,
            eig_tol: 1e-14,
            degeneracy_tol: 1e-8,
            support_gap_tol: 1e-9,
            sweep_samples: 720,
            max_sdp_iters: 100_000,
            sdp_conv_tol: 1e-8,
        }
    }
}

impl ToleranceConfig {
    pub fn validate(&self) -> Result<()> {
        let tols = [
            ("hermitian_tol", self.hermitian_tol),
            ("psd_tol", self.psd_tol),
            ("eig_tol", self.eig_tol),
            ("degeneracy_tol", self.degeneracy_tol),
            ("support_gap_tol", self.support_gap_tol),
            ("sdp_conv_tol", self.sdp_conv_tol),
        ];
        for (name, v) in tols {
            if !(v.is_finite() && v > 0.0) {
                return invalid(format!("{name} must be a positive finite number, got {v}"));
            }
        }
        if self.sweep_samples < 90 {
            return invalid(format!("sweep_samples must be at least 90, got {}", self.sweep_samples));
        }
        if self.max_sdp_iters == 0 {
            return invalid("max_sdp_iters must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ToleranceConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_small_sweeps_and_zero_tolerances() {
        let cfg = ToleranceConfig { sweep_samples: 10, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = ToleranceConfig { psd_tol: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
