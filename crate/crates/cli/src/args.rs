//! Command-line arguments. Every subcommand struct doubles as a section of
//! the optional TOML config file (keys are the long flag names), and flags
//! given on the command line override the file.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "ridgecast", version, about = "Ridge after model selection for mixed-frequency nowcasting")]
pub struct Cli {
    /// TOML file with defaults for any subcommand flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads for the data-parallel loops (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Repeat for more log output on standard error.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo study of in-sample and out-of-sample error ratios.
    Simulate(SimulateArgs),
    /// Screen candidate regressors against a set of official regressors.
    Screen(RegressArgs),
    /// Screen, then fit ridge with a GCV-chosen penalty.
    Fit(RegressArgs),
    /// Pseudo-real-time nowcast evaluation over week models M1..M13.
    Nowcast(NowcastArgs),
    /// Empirical checks of the screening, GCV and error-scaling results.
    Verify(VerifyArgs),
    /// Write a synthetic panel with a known bridge equation.
    SynthPanel(SynthArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Screen(_) => "screen",
            Command::Fit(_) => "fit",
            Command::Nowcast(_) => "nowcast",
            Command::Verify(_) => "verify",
            Command::SynthPanel(_) => "synth-panel",
        }
    }
}

/// Fills every field left unset on the command line from the file section.
pub trait Overlay {
    fn overlay(self, file: Self) -> Self;
}

macro_rules! overlay {
    ($ty:ty { $($field:ident),* $(,)? }) => {
        impl Overlay for $ty {
            fn overlay(self, file: Self) -> Self {
                Self { $($field: self.$field.or(file.$field)),* }
            }
        }
    };
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SimulateArgs {
    /// `paper-tables` (both covariance designs at delta 0.2 and 0.8) or `single`.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Drawn from the OS and recorded in the manifest when absent.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Candidate count of the `single` preset.
    #[arg(long)]
    pub n: Option<usize>,
    /// Training sample size of the `single` preset.
    #[arg(long)]
    pub t: Option<usize>,
    /// Active candidates of the `single` preset.
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// `identity` or `decreasing[:rho]`.
    #[arg(long)]
    pub psi: Option<String>,
    #[arg(long)]
    pub beta_floor: Option<f64>,
    #[arg(long)]
    pub oos_fraction: Option<f64>,
    /// Draw the coefficients once per configuration rather than per replication.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub fix_beta: Option<bool>,
    /// Smallest ridge penalty of the log-spaced grid.
    #[arg(long)]
    pub alpha_min: Option<f64>,
    #[arg(long)]
    pub alpha_max: Option<f64>,
    #[arg(long)]
    pub alpha_count: Option<usize>,
}

overlay!(SimulateArgs {
    preset, reps, seed, out, n, t, s, delta, psi, beta_floor, oos_fraction, fix_beta, alpha_min, alpha_max, alpha_count
});

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RegressArgs {
    /// Wide CSV with one named column per variable.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    /// Comma-separated columns kept in every regression.
    #[arg(long)]
    pub officials: Option<String>,
    /// Comma-separated columns to screen (default: every other column).
    #[arg(long)]
    pub candidates: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_intercept: Option<bool>,
    /// Screening level: threshold is the (1 - tau) normal quantile.
    #[arg(long, conflicts_with = "lambda")]
    pub tau: Option<f64>,
    /// Threshold on |t| given directly.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Fit on the design as given instead of standardizing columns.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub raw: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub unpenalized_intercept: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Smallest ridge penalty of the log-spaced grid.
    #[arg(long)]
    pub alpha_min: Option<f64>,
    #[arg(long)]
    pub alpha_max: Option<f64>,
    #[arg(long)]
    pub alpha_count: Option<usize>,
}

overlay!(RegressArgs {
    data, target, officials, candidates, no_intercept, tau, lambda, raw, unpenalized_intercept, seed, out, alpha_min, alpha_max, alpha_count
});

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct NowcastArgs {
    /// Long-format observations: date, series_id, value.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Series metadata: series_id, group, frequency, release_week.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// `ea`, `us`, `de`, `metadata`, or a CSV of series_id, obs_index, week.
    #[arg(long)]
    pub calendar: Option<String>,
    /// Comma-separated variants (default: the four standard rows).
    #[arg(long)]
    pub variant: Option<String>,
    /// Week models to evaluate, e.g. `5`, `1-13` or `5,9,13`.
    #[arg(long)]
    pub weeks: Option<String>,
    /// First evaluation quarter, e.g. `2015Q1`.
    #[arg(long)]
    pub oos_start: Option<String>,
    #[arg(long)]
    pub oos_end: Option<String>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// `mean` or `last` for weekly series.
    #[arg(long)]
    pub aggregation: Option<String>,
    /// Add the target lagged this many quarters as an official regressor.
    #[arg(long)]
    pub target_lag: Option<usize>,
    #[arg(long)]
    pub training_gap: Option<usize>,
    #[arg(long)]
    pub min_training: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Smallest ridge penalty of the log-spaced grid.
    #[arg(long)]
    pub alpha_min: Option<f64>,
    #[arg(long)]
    pub alpha_max: Option<f64>,
    #[arg(long)]
    pub alpha_count: Option<usize>,
}

overlay!(NowcastArgs {
    data, meta, calendar, variant, weeks, oos_start, oos_end, tau, aggregation, target_lag, training_gap, min_training, seed, out, alpha_min, alpha_max, alpha_count
});

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct VerifyArgs {
    /// Comma-separated subset of `sure-screening`, `gcv-oos`, `error-scaling`.
    #[arg(long)]
    pub only: Option<String>,
    /// Multiplier on the documented closeness tolerances; 0 demands exact limits.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Replications of the error-scaling tables.
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

overlay!(VerifyArgs { only, tolerance, reps, seed, out });

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SynthArgs {
    #[arg(long)]
    pub quarters: Option<usize>,
    #[arg(long)]
    pub n_alt: Option<usize>,
    #[arg(long)]
    pub n_signal: Option<usize>,
    /// First quarter, e.g. `2005Q1`.
    #[arg(long)]
    pub start: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

overlay!(SynthArgs { quarters, n_alt, n_signal, start, seed, out });

/// Layout of the config file: optional global keys plus one table per subcommand.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub threads: Option<usize>,
    /// Seed for any subcommand whose section does not set one.
    pub seed: Option<u64>,
    pub simulate: SimulateArgs,
    pub screen: RegressArgs,
    pub fit: RegressArgs,
    pub nowcast: NowcastArgs,
    pub verify: VerifyArgs,
    pub synth_panel: SynthArgs,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        toml::from_str(&text).map_err(|e| CliError::ConfigFile {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Applies the file section for the chosen subcommand under the flags.
pub fn merge(command: Command, file: FileConfig) -> Command {
    let seed = file.seed;
    match command {
        Command::Simulate(a) => {
            let mut m = a.overlay(file.simulate);
            m.seed = m.seed.or(seed);
            Command::Simulate(m)
        }
        Command::Screen(a) => {
            let mut m = a.overlay(file.screen);
            m.seed = m.seed.or(seed);
            Command::Screen(m)
        }
        Command::Fit(a) => {
            let mut m = a.overlay(file.fit);
            m.seed = m.seed.or(seed);
            Command::Fit(m)
        }
        Command::Nowcast(a) => {
            let mut m = a.overlay(file.nowcast);
            m.seed = m.seed.or(seed);
            Command::Nowcast(m)
        }
        Command::Verify(a) => {
            let mut m = a.overlay(file.verify);
            m.seed = m.seed.or(seed);
            Command::Verify(m)
        }
        Command::SynthPanel(a) => {
            let mut m = a.overlay(file.synth_panel);
            m.seed = m.seed.or(seed);
            Command::SynthPanel(m)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let file: FileConfig = toml::from_str(
            "seed = 3\n[simulate]\nreps = 20\npreset = \"single\"\nalpha-min = 0.001\n",
        )
        .unwrap();
        let cli = Cli::parse_from(["ridgecast", "simulate", "--reps", "5"]);
        let Command::Simulate(a) = merge(cli.command, file) else {
            panic!("wrong subcommand")
        };
        assert_eq!(a.reps, Some(5));
        assert_eq!(a.preset.as_deref(), Some("single"));
        assert_eq!(a.seed, Some(3));
        assert_eq!(a.alpha_min, Some(0.001));
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("[simulate]\nrepz = 3\n").is_err());
    }

    #[test]
    fn bare_boolean_flag_means_true() {
        let cli = Cli::parse_from(["ridgecast", "simulate", "--fix-beta"]);
        let Command::Simulate(a) = cli.command else { panic!() };
        assert_eq!(a.fix_beta, Some(true));
    }
}
