//! Optional JSON run configuration. Command-line flags override every value
//! read here.

use std::path::{Path, PathBuf};

use mkp_core::pde_solvers::SolverConfig;
use mkp_core::stable_forms::ConeSampleConfig;
use mkp_core::verification::VerifyConfig;
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub verify: Option<VerifyConfig>,
    pub cone: Option<ConeSampleConfig>,
    pub solver: Option<SolverConfig>,
    pub semiflat: SemiflatSection,
    pub legendre: LegendreSection,
    pub fit: FitSection,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemiflatSection {
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub eps: Option<f64>,
    pub stencil: Option<u8>,
    /// Diagonal of the quadratic part.
    pub q: Option<[f64; 3]>,
    pub rhs: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LegendreSection {
    pub function: Option<String>,
    pub subset: Option<Vec<usize>>,
    pub points: Option<usize>,
    pub half_width: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub t: Option<f64>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub cutoff: Option<usize>,
    pub target: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("bad config {}: {e}", path.display())))
    }
}

/// Fails unless `lo ≤ v ≤ hi`.
pub fn check_range<T: PartialOrd + std::fmt::Display>(name: &str, v: T, lo: T, hi: T) -> Result<T, CliError> {
    if v < lo || v > hi {
        return Err(CliError::Config(format!("{name} = {v} outside [{lo}, {hi}]")));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_sections_parse() {
        let c: RunConfig =
            serde_json::from_str(r#"{"seed": 3, "solver": {"newton_tol": 1e-9}, "semiflat": {"N": 32}}"#).unwrap();
        assert_eq!(c.seed, Some(3));
        assert_eq!(c.semiflat.n, Some(32));
        let s = c.solver.unwrap();
        assert_eq!(s.newton_tol, 1e-9);
        assert_eq!(s.restart, SolverConfig::default().restart);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sede": 3}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"fit": {"tt": 1}}"#).is_err());
    }

    #[test]
    fn ranges() {
        assert!(check_range("N", 8, 4, 64).is_ok());
        assert!(check_range("N", 2, 4, 64).is_err());
        assert!(check_range("t", 1.5, 0.0, 1.0).is_err());
    }
}
