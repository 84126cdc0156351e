//! Flag layers (every field optional) and the resolved configurations echoed
//! into sidecars. Keys are the kebab-case flag names in both.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::config::Dt;

#[derive(Parser, Debug)]
#[command(name = "laserclock", version, about = "Quantum limits of a laser as a shared clock")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Monte Carlo phase tracking of a single beam.
    Track(TrackArgs),
    /// M-party synchronization from one split laser.
    Sync(SyncArgs),
    /// Linewidth of the noiseless-gain laser from its master equation.
    Linewidth(LinewidthArgs),
    /// Canonical phase variance of a coherent state, optionally split M ways.
    Phasevar(PhasevarArgs),
    /// Decoherence of a coherent state in the phase-space lattice basis.
    Channel(ChannelArgs),
    /// Closed-form synchronization limits.
    Limits(LimitsArgs),
    /// Tracking experiment repeated over one numeric axis.
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Default)]
pub struct IoArgs {
    /// JSON config file (flat keys named after flags, or a previous sidecar).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV output path; a JSON sidecar is written next to it. Defaults to stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(ValueEnum, Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Adaptive,
    Heterodyne,
}

#[derive(ValueEnum, Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum Gain {
    #[default]
    Stationary,
    Evolving,
    Fixed,
}

#[derive(ValueEnum, Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum RegimeArg {
    #[default]
    Hl,
    Sql,
}

#[derive(ValueEnum, Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Eigenvalue,
    Fit,
    #[default]
    Both,
}

#[derive(ValueEnum, Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Quality,
    Flux,
    Linewidth,
    Bandwidth,
}

// Boolean flags take an optional value so a config file can be overridden
// in either direction.
fn parse_bool(s: &str) -> Result<bool, String> {
    s.parse().map_err(|_| format!("expected true or false, got `{s}`"))
}

#[derive(Args, Serialize, Debug, Default)]
#[serde(rename_all = "kebab-case")]
pub struct TrackArgs {
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Adaptive gain schedule.
    #[arg(long, value_enum)]
    pub gain: Option<Gain>,
    /// Relaxation rate (1/s) for `--gain fixed`.
    #[arg(long)]
    pub gain_rate: Option<f64>,
    /// Heterodyne filter bandwidth (1/s); defaults to the optimum √(2fℓ).
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Photon flux f (1/s).
    #[arg(long)]
    pub flux: Option<f64>,
    /// Quality factor N = f/ℓ, as an alternative to --flux.
    #[arg(long)]
    pub quality: Option<f64>,
    /// Phase diffusion rate ℓ (rad/s).
    #[arg(long)]
    pub linewidth: Option<f64>,
    /// `auto` (one hundredth of the loop time constant) or seconds.
    #[arg(long)]
    pub dt: Option<Dt>,
    /// Divide the step by this factor.
    #[arg(long)]
    pub refine: Option<u32>,
    /// Noise increments summed per step.
    #[arg(long)]
    pub substeps: Option<u32>,
    /// Burn-in in loop time constants.
    #[arg(long)]
    pub burn_in_loops: Option<f64>,
    /// Total duration in loop time constants.
    #[arg(long)]
    pub duration_loops: Option<f64>,
    /// Burn-in in seconds; overrides --burn-in-loops.
    #[arg(long)]
    pub burn_in: Option<f64>,
    /// Duration in seconds; overrides --duration-loops.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub initial_phase: Option<f64>,
    /// Starting σ² for `--gain evolving`.
    #[arg(long)]
    pub initial_variance: Option<f64>,
    /// Also emit one row per trial.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_parser = parse_bool)]
    pub per_trial: Option<bool>,
    #[command(flatten)]
    #[serde(skip)]
    pub io: IoArgs,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct TrackConfig {
    pub mode: Mode,
    pub gain: Gain,
    pub gain_rate: Option<f64>,
    pub bandwidth: Option<f64>,
    pub flux: Option<f64>,
    pub quality: Option<f64>,
    pub linewidth: Option<f64>,
    pub dt: Dt,
    pub refine: u32,
    pub substeps: u32,
    pub burn_in_loops: f64,
    pub duration_loops: f64,
    pub burn_in: Option<f64>,
    pub duration: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub workers: usize,
    pub initial_phase: f64,
    pub initial_variance: Option<f64>,
    pub per_trial: bool,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Adaptive,
            gain: Gain::Stationary,
            gain_rate: None,
            bandwidth: None,
            flux: None,
            quality: None,
            linewidth: None,
            dt: Dt::Auto,
            refine: 1,
            substeps: 1,
            burn_in_loops: 10.0,
            duration_loops: 60.0,
            burn_in: None,
            duration: None,
            trials: 200,
            seed: 0,
            workers: 0,
            initial_phase: 0.0,
            initial_variance: None,
            per_trial: false,
        }
    }
}

#[derive(Args, Serialize, Debug, Default)]
#[serde(rename_all = "kebab-case")]
pub struct SyncArgs {
    /// Cavity loss rate κ (1/s).
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Mean photon number μ of the source.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Comma-separated party counts; more than one fits the scaling exponent.
    #[arg(long, value_delimiter = ',')]
    pub parties: Option<Vec<usize>>,
    /// hl: ℓ = κ/4μ with adaptive tracking; sql: ℓ = κ/2μ with heterodyne.
    #[arg(long, value_enum)]
    pub regime: Option<RegimeArg>,
    /// Override the regime's tracker.
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long, value_enum)]
    pub gain: Option<Gain>,
    #[arg(long)]
    pub gain_rate: Option<f64>,
    #[arg(long)]
    pub dt: Option<Dt>,
    #[arg(long)]
    pub refine: Option<u32>,
    #[arg(long)]
    pub substeps: Option<u32>,
    #[arg(long)]
    pub burn_in_loops: Option<f64>,
    #[arg(long)]
    pub duration_loops: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    #[serde(skip)]
    pub io: IoArgs,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct SyncRunConfig {
    pub kappa: f64,
    pub mu: Option<f64>,
    pub parties: Vec<usize>,
    pub regime: RegimeArg,
    pub mode: Option<Mode>,
    pub gain: Gain,
    pub gain_rate: Option<f64>,
    pub dt: Dt,
    pub refine: u32,
    pub substeps: u32,
    pub burn_in_loops: f64,
    pub duration_loops: f64,
    pub trials: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for SyncRunConfig {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            mu: None,
            parties: vec![1],
            regime: RegimeArg::Hl,
            mode: None,
            gain: Gain::Stationary,
            gain_rate: None,
            dt: Dt::Auto,
            refine: 1,
            substeps: 1,
            burn_in_loops: 10.0,
            duration_loops: 60.0,
            trials: 200,
            seed: 0,
            workers: 0,
        }
    }
}

#[derive(Args, Serialize, Debug, Default)]
#[serde(rename_all = "kebab-case")]
pub struct LinewidthArgs {
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    /// Fock-space truncation; defaults to μ + 10√μ + 10.
    #[arg(long)]
    pub truncation: Option<usize>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[command(flatten)]
    #[serde(skip)]
    pub io: IoArgs,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct LinewidthConfig {
    pub kappa: f64,
    pub mu: Option<f64>,
    pub truncation: Option<usize>,
    pub method: Method,
}

impl Default for LinewidthConfig {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            mu: None,
            truncation: None,
            method: Method::Both,
        }
    }
}

#[derive(Args, Serialize, Debug, Default)]
#[serde(rename_all = "kebab-case")]
pub struct PhasevarArgs {
    #[arg(long)]
    pub mu: Option<f64>,
    /// Split the state into this many equal parts first.
    #[arg(long)]
    pub parties: Option<usize>,
    /// Phase grid points.
    #[arg(long)]
    pub grid: Option<usize>,
    #[command(flatten)]
    #[serde(skip)]
    pub io: IoArgs,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct PhasevarConfig {
    pub mu: Option<f64>,
    pub parties: usize,
    pub grid: usize,
}

impl Default for PhasevarConfig {
    fn default() -> Self {
        Self {
            mu: None,
            parties: 1,
            grid: laserclock::fock::DEFAULT_GRID_SIZE,
        }
    }
}

#[derive(Args, Serialize, Debug, Default)]
#[serde(rename_all = "kebab-case")]
pub struct ChannelArgs {
    /// Modulus of the input amplitude α.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Phase of α (rad).
    #[arg(long, allow_hyphen_values = true)]
    pub phase: Option<f64>,
    /// Lattice spacing Δ.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Omit cells with probability below this from the table.
    #[arg(long)]
    pub min_prob: Option<f64>,
    #[command(flatten)]
    #[serde(skip)]
    pub io: IoArgs,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub alpha: f64,
    pub phase: f64,
    pub delta: f64,
    pub min_prob: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            alpha: 5.0,
            phase: 0.0,
            delta: 1.0,
            min_prob: 1e-12,
        }
    }
}

#[derive(Args, Serialize, Debug, Default)]
#[serde(rename_all = "kebab-case")]
pub struct LimitsArgs {
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub parties: Option<Vec<usize>>,
    /// Beam power (W) for the laboratory-units estimate.
    #[arg(long)]
    pub power: Option<f64>,
    /// Wavelength (m).
    #[arg(long)]
    pub wavelength: Option<f64>,
    /// Linewidth FWHM (Hz).
    #[arg(long)]
    pub linewidth_hz: Option<f64>,
    #[command(flatten)]
    #[serde(skip)]
    pub io: IoArgs,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct LimitsConfig {
    pub mu: Option<f64>,
    pub parties: Vec<usize>,
    pub power: Option<f64>,
    pub wavelength: Option<f64>,
    pub linewidth_hz: Option<f64>,
}

impl Default for LimitsConfig {
    fn default() -> Self {
        Self {
            mu: None,
            parties: vec![1],
            power: None,
            wavelength: None,
            linewidth_hz: None,
        }
    }
}

#[derive(Args, Serialize, Debug, Default)]
#[serde(rename_all = "kebab-case")]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub axis: Option<Axis>,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long, value_enum)]
    pub gain: Option<Gain>,
    #[arg(long)]
    pub gain_rate: Option<f64>,
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long)]
    pub flux: Option<f64>,
    #[arg(long)]
    pub quality: Option<f64>,
    #[arg(long)]
    pub linewidth: Option<f64>,
    #[arg(long)]
    pub dt: Option<Dt>,
    #[arg(long)]
    pub refine: Option<u32>,
    #[arg(long)]
    pub substeps: Option<u32>,
    #[arg(long)]
    pub burn_in_loops: Option<f64>,
    #[arg(long)]
    pub duration_loops: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    #[serde(skip)]
    pub io: IoArgs,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct SweepConfig {
    pub axis: Option<Axis>,
    pub values: Vec<f64>,
    pub mode: Mode,
    pub gain: Gain,
    pub gain_rate: Option<f64>,
    pub bandwidth: Option<f64>,
    pub flux: Option<f64>,
    pub quality: Option<f64>,
    pub linewidth: Option<f64>,
    pub dt: Dt,
    pub refine: u32,
    pub substeps: u32,
    pub burn_in_loops: f64,
    pub duration_loops: f64,
    pub trials: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            axis: None,
            values: Vec::new(),
            mode: Mode::Adaptive,
            gain: Gain::Stationary,
            gain_rate: None,
            bandwidth: None,
            flux: None,
            quality: None,
            linewidth: None,
            dt: Dt::Auto,
            refine: 1,
            substeps: 1,
            burn_in_loops: 10.0,
            duration_loops: 60.0,
            trials: 200,
            seed: 0,
            workers: 0,
        }
    }
}
