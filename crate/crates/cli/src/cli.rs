//! Argument parsing.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use nnpi::Method;

use crate::commands::{self, Run};
use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "nnpi",
    version,
    about = "Train and compare prediction-interval networks"
)]
pub struct Cli {
    /// Run configuration (TOML). Defaults apply to every missing key.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override the training seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Use the producers' MSD train/test split.
    #[arg(long, global = true)]
    pub msd_standard_split: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one method and write its model bundle.
    Train {
        /// fixed, mle, ensemble, quantile or eim.
        #[arg(long)]
        method: String,
        /// Coverage target; required for eim and quantile.
        #[arg(long)]
        target: Option<f64>,
    },
    /// Recalibrate and score bundles on the configured dataset.
    Evaluate {
        /// Bundle directory; repeat for several.
        #[arg(long = "bundle", required = true)]
        bundles: Vec<PathBuf>,
        /// Comma-separated coverage targets (default: from the config).
        #[arg(long, value_delimiter = ',')]
        targets: Option<Vec<f64>>,
    },
    /// Train every method and write the comparison report and histograms.
    Compare {
        /// Report whether each EIM model is best at its own target.
        #[arg(long)]
        check_diagonal: bool,
    },
    /// Coverage-density histogram of one bundle on the test split.
    Histogram {
        /// Bundle directory.
        #[arg(long)]
        bundle: PathBuf,
        /// Number of bins over the test-target range (default: from the config).
        #[arg(long)]
        bins: Option<usize>,
        /// Coverage target to calibrate at (default: the bundle's own target).
        #[arg(long)]
        target: Option<f64>,
    },
    /// Write the configured dataset to CSV.
    GenData {
        /// Destination CSV (default: `<kind>.csv` in the output directory).
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

impl Cli {
    /// Config file plus command-line overrides.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        if self.msd_standard_split {
            cfg.data.msd_standard_split = true;
        }
        match &self.command {
            Command::Evaluate {
                targets: Some(t), ..
            } => cfg.targets = t.clone(),
            Command::Histogram { bins: Some(b), .. } => cfg.histogram.bins = *b,
            Command::Compare {
                check_diagonal: true,
            } => cfg.compare.diagonal_check = true,
            _ => {}
        }
        Ok(cfg)
    }

    pub fn run(self) -> Result<(), CliError> {
        let cfg = self.resolve()?;
        if cfg.threads > 0 {
            // Fails only if a pool already exists, in which case it is reused.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build_global();
        }
        let run = Run::new(cfg)?;
        match self.command {
            Command::Train { method, target } => {
                let method: Method = method
                    .parse()
                    .map_err(|e: nnpi::estimators::TrainError| CliError::Usage(e.to_string()))?;
                let dir = commands::train(&run, method, target)?;
                println!("{}", dir.display());
            }
            Command::Evaluate { bundles, .. } => {
                commands::evaluate_bundles(&run, &bundles)?;
                println!(
                    "{}",
                    run.cfg.output_dir.join(commands::REPORT_TXT).display()
                );
            }
            Command::Compare { .. } => {
                let result = commands::compare(&run);
                println!(
                    "{}",
                    run.cfg.output_dir.join(commands::REPORT_TXT).display()
                );
                result?;
            }
            Command::Histogram { bundle, target, .. } => {
                println!(
                    "{}",
                    commands::histogram_for(&run, &bundle, target)?.display()
                );
            }
            Command::GenData { output } => {
                println!("{}", commands::gen_data(&run, output)?.display());
            }
        }
        Ok(())
    }
}
