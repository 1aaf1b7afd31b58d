use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hbkmr::data::{build_variance_design, load_csv, standardize_exposures_with_shift, DropReport};
use hbkmr::sampler::{BlockAcceptance, ParamSummary};
use hbkmr::{Dataset, ParamLayout, PosteriorSamples, VarianceDesign};
use serde::{Deserialize, Serialize};

use crate::config::{file_hash, RunConfig};
use crate::error::{CliError, CliResult};

pub const CONFIG_FILE: &str = "config.json";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Input data prepared for fitting as a config describes it.
pub struct Study {
    pub config: RunConfig,
    pub data: Dataset,
    pub design: VarianceDesign,
    pub dropped: DropReport,
}

impl Study {
    pub fn load(config: RunConfig) -> CliResult<Self> {
        config.validate()?;
        let (raw, dropped) = load_csv::<f64>(&config.input, &config.outcome, &config.exposures, &config.covariates)
            .map_err(|e| with_path(e, &config.input))?;
        if dropped.dropped_rows > 0 {
            log::warn!("dropped {} of {} rows with missing values", dropped.dropped_rows, dropped.total_rows);
        }
        let data = standardize_exposures_with_shift(&raw, config.exposure_shift)?;
        let design = build_variance_design(&data, &config.variance)?;
        if !design.full_rank {
            log::warn!("variance design is rank deficient; γ is weakly identified");
        }
        Ok(Study { config, data, design, dropped })
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(&self.data, &self.design)
    }
}

fn with_path(e: hbkmr::Error, path: &Path) -> CliError {
    let mut err = CliError::from(e);
    err.message = format!("{}: {}", path.display(), err.message);
    err
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub input_hash: String,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub model: String,
    pub n_obs: usize,
    pub n_dropped: usize,
    pub n_draws: usize,
    pub seed: u64,
    pub acceptance: Vec<BlockAcceptance>,
    pub parameters: Vec<ParamSummary>,
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::user(format!("cannot write {}: {e}", path.display())))
}

pub fn read_json<S: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<S> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::user(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::user(format!("{}: {e}", path.display())))
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::user(format!("cannot create {}: {e}", dir.display())))
}

/// A finished fit directory reopened for post-processing.
pub struct FitArtifact {
    pub dir: PathBuf,
    pub study: Study,
    pub samples: PosteriorSamples,
    pub manifest: Manifest,
}

impl FitArtifact {
    pub fn open(dir: &Path) -> CliResult<Self> {
        if !dir.join(SAMPLES_FILE).is_file() {
            return Err(CliError::user(format!("{} is not a fit directory (no {SAMPLES_FILE})", dir.display())));
        }
        let config: RunConfig = read_json(&dir.join(CONFIG_FILE))?;
        let manifest: Manifest = read_json(&dir.join(MANIFEST_FILE))?;
        if file_hash(&config.input)? != manifest.input_hash {
            return Err(CliError::user(format!("{} changed since the fit in {}", config.input.display(), dir.display())));
        }
        let study = Study::load(config)?;
        let samples = PosteriorSamples::load_csv(dir.join(SAMPLES_FILE), study.layout(), study.config.prior)?;
        Ok(FitArtifact { dir: dir.to_path_buf(), study, samples, manifest })
    }

    pub fn label(&self) -> String {
        let name = self.dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        format!("{} ({name})", self.study.config.label())
    }

    /// Whether `other` was fitted to the same rows and columns.
    pub fn compatible(&self, other: &FitArtifact) -> CliResult<()> {
        let (a, b) = (&self.study, &other.study);
        if self.manifest.input_hash != other.manifest.input_hash
            || a.data.n() != b.data.n()
            || a.data.exposure_names != b.data.exposure_names
        {
            return Err(CliError::user(format!(
                "fits in {} and {} use different datasets",
                self.dir.display(),
                other.dir.display()
            )));
        }
        Ok(())
    }
}
