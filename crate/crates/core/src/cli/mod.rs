//! Command-line driver: `generate`, `discover`, `analyze`, `benchmark`.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 numerical
//! failure, 1 I/O failure.

pub mod benchmark;
pub mod config;
pub mod pipeline;

pub use benchmark::{run_benchmark, run_case, suite, Case, CaseResult, CriterionResult};
pub use config::{derive_seed, ChainLengths, NoiseSettings, RunConfig};
pub use pipeline::{analyze, cmd_analyze, cmd_discover, cmd_generate, discover, generate_dataset, sigma2_study, Discovery, Sigma2Case};

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::forward::MaterialName;

#[derive(Debug, Parser)]
#[command(name = "hyperlaw", version, about = "Bayesian discovery of hyperelastic strain-energy laws from full-field data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every command; each overrides the config file.
#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// JSON run configuration; omitted fields take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed for noise, subsampling and chains.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct DataFlags {
    /// Benchmark material, e.g. neo-hookean, ogden3, holzapfel.
    #[arg(long)]
    pub material: Option<MaterialName>,
    /// Displacement noise standard deviation.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Keep noisy displacements without smoothing.
    #[arg(long)]
    pub raw: bool,
    /// Explicit dynamic loading instead of quasi-static steps.
    #[arg(long)]
    pub dynamic: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a benchmark and write mesh, snapshots and manifest.
    Generate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataFlags,
    },
    /// Assemble the linear system and sample the posterior.
    Discover {
        #[command(flatten)]
        common: Common,
        /// Dataset directory; generated from the config when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        flags: DataFlags,
        /// Comma-separated 1-based features to exclude, e.g. 18,19,20.
        #[arg(long)]
        suppress: Option<String>,
    },
    /// Summaries, energy envelopes and figures from a posterior.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Directory written by `discover`.
        #[arg(long, required_unless_present = "sigma2_study")]
        posterior: Option<PathBuf>,
        /// Dataset directory whose manifest supplies ground truth.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Posterior noise variance across noise levels and smoothing.
        #[arg(long)]
        sigma2_study: bool,
    },
    /// The full generate → discover → analyze suite with a pass/fail table.
    Benchmark {
        #[command(flatten)]
        common: Common,
        /// Neo-Hookean and one-term Ogden at low noise only.
        #[arg(long)]
        quick: bool,
    },
}

fn base_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    Ok(cfg)
}

fn apply_data_flags(cfg: &mut RunConfig, flags: &DataFlags) {
    if let Some(m) = flags.material {
        cfg.material = m;
    }
    if let Some(n) = flags.noise {
        cfg.noise.sigma_u = n;
    }
    if flags.raw {
        cfg.noise.denoise = false;
    }
    if flags.dynamic {
        *cfg = cfg.clone().with_dynamic();
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { common, data } => {
            let mut cfg = base_config(&common)?;
            apply_data_flags(&mut cfg, &data);
            cmd_generate(&cfg)?;
        }
        Command::Discover {
            common,
            data,
            flags,
            suppress,
        } => {
            let mut cfg = base_config(&common)?;
            apply_data_flags(&mut cfg, &flags);
            if let Some(list) = suppress {
                cfg.suppress = RunConfig::parse_suppress(&list)?;
            }
            cmd_discover(&cfg, data.as_deref())?;
        }
        Command::Analyze {
            common,
            posterior,
            data,
            sigma2_study: study,
        } => {
            let cfg = base_config(&common)?;
            if study {
                let mut c = cfg.clone();
                if common.config.is_none() {
                    c.material = MaterialName::Ogden1;
                }
                let cases = sigma2_study(&c)?;
                pipeline::write_sigma2_study(&cases, &cfg.out)?;
                for case in &cases {
                    println!("{:<14} mean sigma2 {:.6e}", case.label, case.summary.mean);
                }
            } else {
                let posterior = posterior.ok_or_else(|| Error::Config("--posterior is required".into()))?;
                let out = common.out.clone().unwrap_or_else(|| posterior.join("report"));
                cmd_analyze(&posterior, data.as_deref(), &out)?;
            }
        }
        Command::Benchmark { common, quick } => {
            let cfg = base_config(&common)?;
            for row in run_benchmark(&cfg, quick, &cfg.out)? {
                println!("{}", row.line());
            }
        }
    }
    Ok(())
}

/// Parses arguments, runs, and maps the outcome to an exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
