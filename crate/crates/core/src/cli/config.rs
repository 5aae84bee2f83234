//! Analysis configuration file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::design::{CensoringModel, DesignKind, Hypothesis};
use crate::ensemble::validate_ensemble;
use crate::error::{Error, Result};
use crate::families::FamilyKind;
use crate::map_priors::Heterogeneity;
use crate::priors::ModelSpec;
use crate::sampler::SamplerSettings;
use crate::sequential::{DecisionThresholds, LookSchedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default)]
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub sampler: SamplerSettings,
    /// Master seed; `--seed` overrides it, and it overrides `sampler.seed`.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub thresholds: Option<DecisionThresholds>,
    #[serde(default)]
    pub schedule: Option<LookSchedule>,
    /// Evaluation times for model-averaged curves; defaults to 50 points up to the largest time.
    #[serde(default)]
    pub curve_times: Option<Vec<f64>>,
    #[serde(default)]
    pub bfda: Option<BfdaSection>,
    #[serde(default)]
    pub map_prior: Option<MapPriorSection>,
    #[serde(default)]
    pub simulate: Option<SimulateSection>,
    #[serde(default)]
    pub outputs: Outputs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BfdaSection {
    pub n_participants: usize,
    pub replications: usize,
    pub censoring: CensoringModel,
    pub design: DesignKind,
    #[serde(default)]
    pub leave_one_family_out: bool,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Evidence level counted as misleading.
    #[serde(default = "default_misleading")]
    pub misleading_threshold: f64,
    /// Defaults to the analysis models.
    #[serde(default)]
    pub generating_models: Option<Vec<ModelSpec>>,
    /// Sequential truncation bound and top of the calibration grid.
    #[serde(default = "default_truncate")]
    pub truncate: f64,
}

fn default_alpha() -> f64 {
    0.05
}
fn default_beta() -> f64 {
    0.10
}
fn default_misleading() -> f64 {
    10.0
}
fn default_truncate() -> f64 {
    crate::sequential::BFDA_TRUNCATION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapPriorSection {
    pub families: Vec<FamilyKind>,
    #[serde(default)]
    pub heterogeneity: Heterogeneity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub hypothesis: Hypothesis,
    pub n_participants: usize,
    pub censoring: CensoringModel,
    #[serde(default)]
    pub replication: usize,
    #[serde(default)]
    pub generating_models: Option<Vec<ModelSpec>>,
}

/// Optional side outputs; CSV series and logs are written only where a path is given.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default)]
    pub curves_csv: Option<PathBuf>,
    #[serde(default)]
    pub trajectory_csv: Option<PathBuf>,
    #[serde(default)]
    pub replication_log: Option<PathBuf>,
    #[serde(default)]
    pub histogram_csv: Option<PathBuf>,
}

impl AnalysisConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn master_seed(&self, cli_seed: Option<u64>) -> u64 {
        cli_seed.or(self.seed).unwrap_or(self.sampler.seed)
    }

    pub fn settings(&self, cli_seed: Option<u64>) -> SamplerSettings {
        self.sampler.with_seed(self.master_seed(cli_seed))
    }

    pub fn require_models(&self) -> Result<()> {
        validate_ensemble(&self.models)
    }
}

/// Every effect model must have free beta.
pub fn validate_estimation(models: &[ModelSpec]) -> Result<()> {
    validate_ensemble(models)?;
    if let Some(m) = models.iter().find(|m| m.prior_beta.is_spike()) {
        return Err(Error::Config(format!("estimation ensembles need a free treatment effect; got {}", m.label())));
    }
    Ok(())
}

/// Every family present must appear with both a spike-beta and a free-beta variant.
pub fn validate_testing(models: &[ModelSpec]) -> Result<()> {
    validate_ensemble(models)?;
    let mut seen: BTreeMap<FamilyKind, (bool, bool)> = BTreeMap::new();
    for m in models {
        let e = seen.entry(m.family).or_default();
        if m.prior_beta.is_spike() {
            e.0 = true;
        } else {
            e.1 = true;
        }
    }
    for (family, (null, effect)) in seen {
        if !(null && effect) {
            return Err(Error::Config(format!(
                "testing ensemble lists the {family} family without both a spike and a free treatment prior"
            )));
        }
    }
    Ok(())
}
