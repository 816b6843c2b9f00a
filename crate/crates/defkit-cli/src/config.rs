//! Versioned JSON config documents. Unknown keys are rejected everywhere so
//! a stale or typo'd config fails instead of silently running with defaults.

use defkit::estimate::EstimatorConfig;
use defkit::refine::RefinementConfig;
use defkit::regularize::RegularizerConfig;
use defkit::simulate::SimulationSpec;
use defkit::{Error, Result};
use serde::{Deserialize, Serialize};

pub const CONFIG_VERSION: u32 = 1;

fn check_version(version: u32) -> Result<()> {
    if version != CONFIG_VERSION {
        return Err(Error::ConfigInvalid(format!(
            "unsupported config version {version} (expected {CONFIG_VERSION})"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateDoc {
    pub version: u32,
    pub simulation: SimulationSpec,
}

impl SimulateDoc {
    pub fn validate(&self) -> Result<()> {
        check_version(self.version)?;
        self.simulation.validate()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateDoc {
    pub version: u32,
    pub estimator: EstimatorConfig,
}

impl EstimateDoc {
    pub fn validate(&self) -> Result<()> {
        check_version(self.version)?;
        self.estimator.validate()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineDoc {
    pub version: u32,
    pub estimator: EstimatorConfig,
    pub refinement: RefinementConfig,
}

impl RefineDoc {
    pub fn validate(&self) -> Result<()> {
        check_version(self.version)?;
        self.estimator.validate()?;
        self.refinement.validate()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizeDoc {
    pub version: u32,
    pub regularizer: RegularizerConfig,
}

impl RegularizeDoc {
    pub fn validate(&self) -> Result<()> {
        check_version(self.version)?;
        self.regularizer.validate()
    }
}

/// Which artifact families a pipeline run writes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitFlags {
    #[serde(default = "yes")]
    pub fields: bool,
    #[serde(default = "yes")]
    pub rasters: bool,
    #[serde(default = "yes")]
    pub profiles: bool,
    #[serde(default = "yes")]
    pub report: bool,
}

fn yes() -> bool {
    true
}

impl Default for EmitFlags {
    fn default() -> Self {
        Self {
            fields: true,
            rasters: true,
            profiles: true,
            report: true,
        }
    }
}

/// Full end-to-end run: simulate, estimate with refinement, regularize,
/// evaluate.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    pub simulation: SimulationSpec,
    pub estimator: EstimatorConfig,
    pub refinement: RefinementConfig,
    pub regularizer: RegularizerConfig,
    /// Output directory; the `--out` flag overrides it.
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub emit: EmitFlags,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        check_version(self.version)?;
        self.simulation.validate()?;
        self.estimator.validate()?;
        self.refinement.validate()?;
        self.regularizer.validate()
    }
}
