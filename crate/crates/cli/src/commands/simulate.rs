use std::path::{Path, PathBuf};

use hbkmr::data::write_csv;
use hbkmr::simulate::{generate, CovariateGen, SimConfig};

use crate::artifact::{create_dir, write_json};
use crate::config::{Outputs, RunConfig};
use crate::error::{CliError, CliResult};

pub const DATA_FILE: &str = "data.csv";
pub const TRUTH_FILE: &str = "truth.json";
pub const RUN_FILE: &str = "run.json";

/// Writes a synthetic study CSV, its generating values and a run config
/// that fits the generating model to it.
pub fn simulate(config: &SimConfig, out: &Path) -> CliResult<PathBuf> {
    let sim = generate::<f64>(config)?;
    create_dir(out)?;
    let path = out.join(DATA_FILE);
    let file = std::fs::File::create(&path).map_err(|e| CliError::user(format!("cannot write {}: {e}", path.display())))?;
    write_csv(&sim.raw, std::io::BufWriter::new(file))?;
    write_json(&out.join(TRUTH_FILE), &sim.truth)?;

    let run = RunConfig {
        input: PathBuf::from(DATA_FILE),
        outcome: config.outcome_name.clone(),
        exposures: config.exposure_names.clone(),
        covariates: config
            .covariates
            .iter()
            .map(|c| match c {
                CovariateGen::Continuous { name, .. } | CovariateGen::Categorical { name, .. } => name.clone(),
            })
            .collect(),
        variance: config.variance.clone(),
        exposure_shift: 0.0,
        prior: Default::default(),
        mcmc: Default::default(),
        outputs: Outputs::default(),
        output_dir: PathBuf::from("fit"),
    };
    let run_path = out.join(RUN_FILE);
    write_json(&run_path, &run)?;
    Ok(run_path)
}
