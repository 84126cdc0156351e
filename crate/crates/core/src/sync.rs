//! Sharing one laser among `M` parties.
//!
//! The source beam of flux `κμ` is split equally, so each party locks a local
//! oscillator to a beam of flux `f = κμ/M` whose phase diffuses at the source
//! linewidth. With `N = κμ/(Mℓ)` the per-party error is `√M/4μ` for the
//! noiseless-gain laser tracked adaptively and `√M/2μ` for a standard laser
//! tracked by dual-quadrature detection.

use crate::error::{invalid, require_positive, Result};
use crate::laserdyn::{hl_linewidth, linear_fit, sql_linewidth, LaserParams};
use crate::tracking::{
    derive_seed, run_tracking, BeamParams, RunSettings, TrackingConfig, TrackingMode, TrackingResult,
};

pub const HBAR: f64 = 1.054_571_817e-34;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// `√M/(4μ)`.
pub fn hl_sync_limit(mu: f64, parties: usize) -> Result<f64> {
    check_limits(mu, parties)?;
    Ok((parties as f64).sqrt() / (4.0 * mu))
}

/// `√M/(2μ)`, twice the Heisenberg value.
pub fn sql_sync_limit(mu: f64, parties: usize) -> Result<f64> {
    Ok(2.0 * hl_sync_limit(mu, parties)?)
}

/// `M/(4μ)`: phase variance of each of `M` coherent states obtained by
/// splitting one state of mean photon number `μ`. Grows as `M` rather than
/// `√M` because no fresh photons arrive.
pub fn split_variance_limit(mu: f64, parties: usize) -> Result<f64> {
    check_limits(mu, parties)?;
    Ok(parties as f64 / (4.0 * mu))
}

fn check_limits(mu: f64, parties: usize) -> Result<()> {
    require_positive("mu", mu)?;
    if parties == 0 {
        return Err(invalid("parties", "must be at least 1"));
    }
    Ok(())
}

/// A laser beam in laboratory units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalBeam {
    /// Watts.
    pub power: f64,
    /// Metres.
    pub wavelength: f64,
    /// Full width at half maximum in Hz.
    pub linewidth_hz: f64,
}

impl PhysicalBeam {
    pub fn new(power: f64, wavelength: f64, linewidth_hz: f64) -> Result<Self> {
        require_positive("power", power)?;
        require_positive("wavelength", wavelength)?;
        require_positive("linewidth_hz", linewidth_hz)?;
        Ok(Self {
            power,
            wavelength,
            linewidth_hz,
        })
    }

    pub fn angular_frequency(&self) -> f64 {
        2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / self.wavelength
    }

    pub fn photon_energy(&self) -> f64 {
        HBAR * self.angular_frequency()
    }

    /// Photons per second.
    pub fn photon_flux(&self) -> f64 {
        self.power / self.photon_energy()
    }

    /// `ℓ = 2π × FWHM`.
    pub fn linewidth_rate(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.linewidth_hz
    }
}

/// `√(ħωMℓ/P)`.
pub fn physical_units_mse(beam: &PhysicalBeam, parties: usize) -> Result<f64> {
    if parties == 0 {
        return Err(invalid("parties", "must be at least 1"));
    }
    Ok((beam.photon_energy() * parties as f64 * beam.linewidth_rate() / beam.power).sqrt())
}

/// Source linewidth and tracking strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `ℓ = κ/4μ`, adaptive tracking.
    Heisenberg,
    /// `ℓ = κ/2μ`, dual-quadrature tracking at optimal bandwidth.
    Standard,
}

impl Regime {
    pub fn linewidth(&self, laser: &LaserParams) -> f64 {
        match self {
            Regime::Heisenberg => hl_linewidth(laser),
            Regime::Standard => sql_linewidth(laser),
        }
    }

    pub fn default_mode(&self) -> TrackingMode {
        match self {
            Regime::Heisenberg => TrackingMode::ADAPTIVE,
            Regime::Standard => TrackingMode::HETERODYNE,
        }
    }

    pub fn limit(&self, mu: f64, parties: usize) -> Result<f64> {
        match self {
            Regime::Heisenberg => hl_sync_limit(mu, parties),
            Regime::Standard => sql_sync_limit(mu, parties),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncConfig {
    pub laser: LaserParams,
    pub parties: usize,
    pub regime: Regime,
    /// Overrides the regime's tracker, e.g. to mix a standard laser with
    /// adaptive tracking.
    pub mode: Option<TrackingMode>,
}

impl SyncConfig {
    pub fn new(laser: LaserParams, parties: usize, regime: Regime) -> Result<Self> {
        let config = Self {
            laser,
            parties,
            regime,
            mode: None,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.laser.validate()?;
        check_limits(self.laser.mu, self.parties)
    }

    pub fn mode(&self) -> TrackingMode {
        self.mode.unwrap_or_else(|| self.regime.default_mode())
    }

    /// Beam received by each party.
    pub fn party_beam(&self) -> Result<BeamParams> {
        BeamParams::new(
            self.laser.photon_flux() / self.parties as f64,
            self.regime.linewidth(&self.laser),
        )
    }

    pub fn predicted(&self) -> Result<f64> {
        self.regime.limit(self.laser.mu, self.parties)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncReport {
    pub parties: usize,
    pub beam: BeamParams,
    pub per_party: Vec<TrackingResult>,
    pub per_party_mse: Vec<f64>,
    pub mean_mse: f64,
    /// Standard error of `mean_mse`, combining the per-party errors.
    pub stderr: f64,
    pub predicted: f64,
    pub slips_significant: bool,
    /// Set by [`run_sync_sweep`].
    pub scaling_exponent: Option<f64>,
}

impl SyncReport {
    pub fn relative_error(&self) -> f64 {
        self.mean_mse / self.predicted - 1.0
    }
}

/// Runs an independent locking loop for every party. Party `j` of an
/// `M`-party experiment uses seed `derive_seed(seed, [M, j])`.
pub fn run_sync_experiment(config: &SyncConfig, settings: &RunSettings) -> Result<SyncReport> {
    config.validate()?;
    let beam = config.party_beam()?;
    let base = TrackingConfig::from_settings(beam, config.mode(), settings)?;
    let per_party = (0..config.parties)
        .map(|party| {
            let seed = derive_seed(settings.seed, &[config.parties as u64, party as u64]);
            run_tracking(&TrackingConfig { seed, ..base })
        })
        .collect::<Result<Vec<_>>>()?;
    let m = per_party.len() as f64;
    let per_party_mse: Vec<f64> = per_party.iter().map(|r| r.mse_wrapped).collect();
    let mean_mse = per_party_mse.iter().sum::<f64>() / m;
    let stderr = per_party.iter().map(|r| r.stderr * r.stderr).sum::<f64>().sqrt() / m;
    Ok(SyncReport {
        parties: config.parties,
        beam,
        slips_significant: per_party.iter().any(TrackingResult::slips_significant),
        per_party,
        per_party_mse,
        mean_mse,
        stderr,
        predicted: config.predicted()?,
        scaling_exponent: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncSweep {
    pub reports: Vec<SyncReport>,
    /// Slope of `ln mean_mse` against `ln M`; `None` for fewer than two values.
    pub scaling_exponent: Option<f64>,
}

/// Runs [`run_sync_experiment`] for each party count and fits the scaling
/// exponent.
pub fn run_sync_sweep(
    laser: LaserParams,
    regime: Regime,
    mode: Option<TrackingMode>,
    party_counts: &[usize],
    settings: &RunSettings,
) -> Result<SyncSweep> {
    if party_counts.is_empty() {
        return Err(invalid("parties", "sweep needs at least one party count"));
    }
    let mut reports = party_counts
        .iter()
        .map(|&parties| {
            let config = SyncConfig {
                laser,
                parties,
                regime,
                mode,
            };
            run_sync_experiment(&config, settings)
        })
        .collect::<Result<Vec<_>>>()?;
    let scaling_exponent = scaling_exponent(&reports);
    for r in &mut reports {
        r.scaling_exponent = scaling_exponent;
    }
    Ok(SyncSweep {
        reports,
        scaling_exponent,
    })
}

fn scaling_exponent(reports: &[SyncReport]) -> Option<f64> {
    let x: Vec<f64> = reports.iter().map(|r| (r.parties as f64).ln()).collect();
    if x.iter().all(|&v| v == x[0]) {
        return None;
    }
    let y: Vec<f64> = reports.iter().map(|r| r.mean_mse.ln()).collect();
    Some(linear_fit(&x, &y).0)
}
