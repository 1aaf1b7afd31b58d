use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use crate::artifact::{
    create_dir, write_json, FitArtifact, Manifest, Study, Summary, CONFIG_FILE, MANIFEST_FILE, SAMPLES_FILE, SUMMARY_FILE,
};
use crate::config::{file_hash, RunConfig};
use crate::error::CliResult;

/// Samples the posterior, writes the fit directory and any outputs the
/// config requests. Returns the directory.
pub fn fit(config: RunConfig) -> CliResult<PathBuf> {
    let mut timings = BTreeMap::new();
    let clock = Instant::now();
    let input_hash = file_hash(&config.input)?;
    let study = Study::load(config)?;
    timings.insert("load".to_string(), clock.elapsed().as_secs_f64());

    let dir = study.config.output_dir.clone();
    create_dir(&dir)?;
    log::info!(
        "fitting {} to {} rows ({} exposures, {} covariate columns, {} variance predictors)",
        study.config.label(),
        study.data.n(),
        study.data.m(),
        study.data.p(),
        study.design.q()
    );
    let clock = Instant::now();
    let samples = hbkmr::fit(&study.data, &study.design, &study.config.prior, &study.config.mcmc)?;
    timings.insert("sample".to_string(), clock.elapsed().as_secs_f64());

    samples.save_csv(dir.join(SAMPLES_FILE))?;
    write_json(&dir.join(CONFIG_FILE), &study.config)?;
    let summary = Summary {
        model: study.config.label().to_string(),
        n_obs: study.data.n(),
        n_dropped: study.dropped.dropped_rows,
        n_draws: samples.n_draws(),
        seed: study.config.mcmc.seed,
        acceptance: samples.acceptance.clone(),
        parameters: samples.summary()?,
    };
    write_json(&dir.join(SUMMARY_FILE), &summary)?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: study.config.mcmc.seed,
        config_hash: study.config.hash()?,
        input_hash,
        timings,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;

    let mut art = FitArtifact { dir: dir.clone(), study, samples, manifest };
    run_outputs(&mut art)?;
    Ok(dir)
}

fn run_outputs(art: &mut FitArtifact) -> CliResult<()> {
    let outputs = art.study.config.outputs.clone();
    let dir = art.dir.clone();
    let timed = |art: &FitArtifact, f: &dyn Fn(&FitArtifact) -> CliResult<()>| -> CliResult<f64> {
        let clock = Instant::now();
        f(art)?;
        Ok(clock.elapsed().as_secs_f64())
    };
    let mut extra = Vec::new();
    if let Some(preds) = &outputs.diagnostics {
        let preds = (!preds.is_empty()).then(|| preds.clone());
        let secs = timed(art, &|a| super::diagnose(a, preds.as_deref(), &dir).map(|t| print!("{t}")))?;
        extra.push(("diagnose", secs));
    }
    if let Some(spec) = &outputs.sections {
        let secs = timed(art, &|a| super::sections(a, None, spec, outputs.stride, &dir).map(|_| ()))?;
        extra.push(("sections", secs));
    }
    if let Some(input) = &outputs.predict {
        let secs = timed(art, &|a| super::predict(a, input, outputs.stride, &dir))?;
        extra.push(("predict", secs));
    }
    if outputs.waic {
        let secs = timed(art, &|a| {
            let (_, table) = super::waic(&[a], &[], outputs.stride, Some(&dir))?;
            print!("{table}");
            Ok(())
        })?;
        extra.push(("waic", secs));
    }
    if !extra.is_empty() {
        for (name, secs) in extra {
            art.manifest.timings.insert(name.to_string(), secs);
        }
        write_json(&dir.join(MANIFEST_FILE), &art.manifest)?;
    }
    Ok(())
}
