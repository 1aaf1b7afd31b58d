use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hbkmr::simulate::SimConfig;
use hbkmr::RUpdate;
use hbkmr_cli::artifact::{read_json, FitArtifact};
use hbkmr_cli::commands;
use hbkmr_cli::config::RunConfig;
use hbkmr_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "hbkmr", version, about = "Bayesian kernel machine regression with heteroscedastic errors")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum RUpdateArg {
    Componentwise,
    Block,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the posterior and write a fit directory.
    Fit {
        /// JSON run config.
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        burn: Option<usize>,
        #[arg(long)]
        keep: Option<usize>,
        #[arg(long)]
        thin: Option<usize>,
        #[arg(long, value_enum)]
        r_update: Option<RUpdateArg>,
        /// Input CSV, replacing the config's.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Output directory, replacing the config's.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Residual diagnostics for heteroscedasticity.
    Diagnose {
        fit: PathBuf,
        /// Comma-separated predictors; all exposures and covariates by default.
        #[arg(long, value_delimiter = ',')]
        predictors: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Univariate curves, joint and single-exposure effects.
    Sections {
        fit: PathBuf,
        /// Second fit on the same data to compare interval widths against.
        #[arg(long)]
        overlay: Option<PathBuf>,
        #[arg(long)]
        base: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        targets: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        fixed: Vec<f64>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Posterior predictive intervals for new rows.
    Predict {
        fit: PathBuf,
        /// CSV with the fitted columns.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank fits by WAIC.
    Waic {
        #[arg(required = true)]
        fits: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        labels: Vec<String>,
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic study from a JSON simulation config.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Fit { config, seed, burn, keep, thin, r_update, input, out } => {
            let mut c = RunConfig::load(&config)?;
            if let Some(v) = seed {
                c.mcmc.seed = v;
            }
            if let Some(v) = burn {
                c.mcmc.n_burn = v;
            }
            if let Some(v) = keep {
                c.mcmc.n_keep = v;
            }
            if let Some(v) = thin {
                c.mcmc.thin = v;
            }
            if let Some(v) = r_update {
                c.mcmc.r_update = match v {
                    RUpdateArg::Componentwise => RUpdate::Componentwise,
                    RUpdateArg::Block => RUpdate::Block,
                };
            }
            if let Some(v) = input {
                c.input = v;
            }
            if let Some(v) = out {
                c.output_dir = v;
            }
            let dir = commands::fit(c)?;
            println!("fit written to {}", dir.display());
        }
        Command::Diagnose { fit, predictors, out } => {
            let art = FitArtifact::open(&fit)?;
            let preds = (!predictors.is_empty()).then_some(predictors);
            let text = commands::diagnose(&art, preds.as_deref(), &out.unwrap_or(fit))?;
            print!("{text}");
        }
        Command::Sections { fit, overlay, base, targets, fixed, grid, stride, out } => {
            let art = FitArtifact::open(&fit)?;
            let other = overlay.as_deref().map(FitArtifact::open).transpose()?;
            let mut spec = art.study.config.outputs.sections.clone().unwrap_or_default();
            if let Some(v) = base {
                spec.base = v;
            }
            if !targets.is_empty() {
                spec.targets = targets;
            }
            if !fixed.is_empty() {
                spec.fixed = fixed;
            }
            if let Some(v) = grid {
                spec.grid = v;
            }
            let stride = stride.unwrap_or(art.study.config.outputs.stride);
            let rows = commands::sections(&art, other.as_ref(), &spec, stride, &out.unwrap_or(fit))?;
            if let Some(b) = &other {
                print!("{}", commands::overlay_text(&rows, &art.label(), &b.label()));
            }
        }
        Command::Predict { fit, input, stride, out } => {
            let art = FitArtifact::open(&fit)?;
            let stride = stride.unwrap_or(art.study.config.outputs.stride);
            commands::predict(&art, &input, stride, &out.unwrap_or(fit))?;
        }
        Command::Waic { fits, labels, stride, out } => {
            let arts = fits.iter().map(|f| FitArtifact::open(f)).collect::<CliResult<Vec<_>>>()?;
            let refs: Vec<&FitArtifact> = arts.iter().collect();
            let stride = stride.unwrap_or(1);
            let (_, text) = commands::waic(&refs, &labels, stride, out.as_deref())?;
            print!("{text}");
        }
        Command::Simulate { config, seed, n, out } => {
            let mut c: SimConfig = read_json(&config)?;
            if let Some(v) = seed {
                c.seed = v;
            }
            if let Some(v) = n {
                c.n = v;
            }
            let run = commands::simulate(&c, &out)?;
            println!("synthetic study written to {}; fit it with `hbkmr fit {}`", out.display(), run.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code as u8)
        }
    }
}
