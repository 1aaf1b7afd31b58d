use std::path::{Path, PathBuf};

use hbkmr::{McmcConfig, PriorSpec, VarianceSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Everything a run needs, read from one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Study CSV; relative paths resolve against the config file.
    pub input: PathBuf,
    pub outcome: String,
    pub exposures: Vec<String>,
    #[serde(default)]
    pub covariates: Vec<String>,
    /// Variance predictors; empty gives BKMR.
    #[serde(default)]
    pub variance: Vec<VarianceSpec>,
    /// Exposures are standardized as `ln(z + shift)`.
    #[serde(default)]
    pub exposure_shift: f64,
    #[serde(default)]
    pub prior: PriorSpec,
    #[serde(default)]
    pub mcmc: McmcConfig,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("hbkmr-out")
}

/// Summaries computed right after sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    /// Predictors for residual diagnostics; `None` skips them, an empty list
    /// means all candidates.
    pub diagnostics: Option<Vec<String>>,
    pub sections: Option<SectionSpec>,
    /// CSV of new rows to predict.
    pub predict: Option<PathBuf>,
    pub waic: bool,
    pub stride: usize,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs { diagnostics: None, sections: None, predict: None, waic: false, stride: hbkmr::inference::DEFAULT_STRIDE }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SectionSpec {
    pub grid: usize,
    pub base: f64,
    pub targets: Vec<f64>,
    /// Quantiles the other exposures are held at for single-variable effects.
    pub fixed: Vec<f64>,
}

impl Default for SectionSpec {
    fn default() -> Self {
        SectionSpec {
            grid: 50,
            base: 0.25,
            targets: (0..17).map(|k| round4(0.10 + 0.05 * k as f64)).collect(),
            fixed: vec![0.25, 0.5, 0.75],
        }
    }
}

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

impl SectionSpec {
    pub fn validate(&self) -> CliResult<()> {
        let prob = |p: &f64| *p > 0.0 && *p < 1.0;
        if self.grid < 2 {
            return Err(CliError::user("sections grid needs at least 2 points"));
        }
        if !prob(&self.base) || !self.targets.iter().all(prob) || !self.fixed.iter().all(prob) {
            return Err(CliError::user("section quantiles must lie in (0, 1)"));
        }
        Ok(())
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::user(format!("cannot read {}: {e}", path.display())))?;
        let mut c: RunConfig = serde_json::from_str(&text).map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        c.input = resolve(base, &c.input);
        c.output_dir = resolve(base, &c.output_dir);
        if let Some(p) = &c.outputs.predict {
            c.outputs.predict = Some(resolve(base, p));
        }
        Ok(c)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.exposures.is_empty() {
            return Err(CliError::user("config lists no exposures"));
        }
        if !self.exposure_shift.is_finite() || self.exposure_shift < 0.0 {
            return Err(CliError::user("exposure_shift must be a nonnegative number"));
        }
        if self.outputs.stride == 0 {
            return Err(CliError::user("outputs.stride must be positive"));
        }
        if let Some(s) = &self.outputs.sections {
            s.validate()?;
        }
        self.mcmc.validate()?;
        self.prior.validate()?;
        Ok(())
    }

    /// Model label: BKMR without variance predictors, HBKMR otherwise.
    pub fn label(&self) -> &'static str {
        if self.variance.is_empty() {
            "BKMR"
        } else {
            "HBKMR"
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> CliResult<String> {
        Ok(sha256_hex(serde_json::to_string(self)?.as_bytes()))
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_hash(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::user(format!("cannot read {}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}
