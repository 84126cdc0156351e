//! Phase locking to a beam whose phase diffuses as `φ̇ = √ℓ ξ(t)`.
//!
//! Two estimators are simulated with Euler–Maruyama:
//!
//! * the adaptive homodyne loop: the local oscillator sits at `Φ = φ̌ + π/2`,
//!   the photocurrent is `I dt = 2α cos(Φ − φ) dt + dW` and the estimate
//!   moves by `dφ̌ = (ℓ/σ²) I dt / 2α`;
//! * the non-adaptive dual-quadrature baseline: the beam is split in two and
//!   both quadratures are measured, `dZ = √2 α e^{iφ} dt + dW_x + i dW_y`,
//!   and `φ̌ = arg A` for an exponential moving average `A` of `dZ/dt`.
//!
//! Here `α = √f` for a beam of `f` photons per second and `N = f/ℓ`. The
//! adaptive loop reaches a mean-square error of `1/(2√N)`, the baseline
//! `1/√(2N)` at its optimal bandwidth `λ = √(2fℓ)`.
//!
//! Trials are independent and run in parallel. Each trial owns a ChaCha
//! stream whose seed is derived from the master seed and the trial index, and
//! results are merged in trial order, so output is identical for any worker
//! count.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, require_finite, require_positive, Result};
use crate::fock::wrap_angle;

/// Default step as a fraction of the loop relaxation time.
pub const DT_FRACTION: f64 = 1e-2;

/// Fraction of the unwrapped MSE above which cycle slips are flagged.
pub const SLIP_FRACTION_LIMIT: f64 = 0.01;

/// Minimum measured span, in loop time constants, after burn-in.
pub const MIN_MEASURED_LOOP_TIMES: f64 = 20.0;

/// Minimum number of trials accepted by [`run_tracking`].
pub const MIN_TRIALS: usize = 100;

/// A coherent beam of photon flux `f` (1/s) and phase diffusion rate `ℓ` (1/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamParams {
    flux: f64,
    linewidth: f64,
}

impl BeamParams {
    pub fn new(flux: f64, linewidth: f64) -> Result<Self> {
        require_positive("flux", flux)?;
        require_finite("linewidth", linewidth)?;
        if linewidth < 0.0 {
            return Err(invalid("linewidth", "must be nonnegative"));
        }
        Ok(Self { flux, linewidth })
    }

    /// Beam with quality factor `N = f/ℓ`.
    pub fn from_quality(quality: f64, linewidth: f64) -> Result<Self> {
        require_positive("quality", quality)?;
        require_positive("linewidth", linewidth)?;
        Self::new(quality * linewidth, linewidth)
    }

    pub fn flux(&self) -> f64 {
        self.flux
    }

    pub fn linewidth(&self) -> f64 {
        self.linewidth
    }

    /// `α = √f`.
    pub fn amplitude(&self) -> f64 {
        self.flux.sqrt()
    }

    /// `N = f/ℓ`; `None` for a beam without phase diffusion.
    pub fn quality(&self) -> Option<f64> {
        (self.linewidth > 0.0).then(|| self.flux / self.linewidth)
    }

    /// Stationary estimator variance `σ² = 1/(2√N) = √(ℓ/4f)`.
    pub fn stationary_variance(&self) -> Option<f64> {
        (self.linewidth > 0.0).then(|| (self.linewidth / (4.0 * self.flux)).sqrt())
    }

    /// Error relaxation rate of the adaptive loop, `ℓ/σ² = 2√(fℓ)`.
    pub fn loop_rate(&self) -> Option<f64> {
        (self.linewidth > 0.0).then(|| 2.0 * (self.flux * self.linewidth).sqrt())
    }

    /// Default step `10⁻²/(2ℓ√N)`.
    pub fn auto_dt(&self) -> Option<f64> {
        self.loop_rate().map(|r| DT_FRACTION / r)
    }

    /// Bandwidth `√(2fℓ)` minimizing the dual-quadrature error.
    pub fn optimal_bandwidth(&self) -> Option<f64> {
        (self.linewidth > 0.0).then(|| (2.0 * self.flux * self.linewidth).sqrt())
    }
}

/// `1/(2√N)`.
pub fn adaptive_mse_limit(beam: &BeamParams) -> Option<f64> {
    beam.stationary_variance()
}

/// `1/√(2N)`.
pub fn heterodyne_mse_limit(beam: &BeamParams) -> Option<f64> {
    beam.quality().map(|n| 1.0 / (2.0 * n).sqrt())
}

/// Linearized adaptive-loop error at a fixed relaxation rate `k`: lag `ℓ/2k`
/// plus shot noise `k/8f`. Minimized at `k = 2√(fℓ)`, where it is `1/(2√N)`.
pub fn adaptive_mse_at(beam: &BeamParams, rate: f64) -> f64 {
    beam.linewidth / (2.0 * rate) + rate / (8.0 * beam.flux)
}

/// Linearized dual-quadrature error at bandwidth `λ`: lag `ℓ/2λ` plus noise `λ/4f`.
pub fn heterodyne_mse_at(beam: &BeamParams, bandwidth: f64) -> f64 {
    beam.linewidth / (2.0 * bandwidth) + bandwidth / (4.0 * beam.flux)
}

/// State of one adaptive phase-locking loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerState {
    /// Unwrapped signal phase φ.
    pub phi_true: f64,
    /// Unwrapped estimate φ̌.
    pub phi_est: f64,
    /// Local oscillator phase Φ.
    pub lo_phase: f64,
    /// Current error variance σ².
    pub sigma2: f64,
    pub t: f64,
}

impl TrackerState {
    /// Loop locked on `phase` with the oscillator at the null point.
    pub fn locked(phase: f64, sigma2: f64) -> Self {
        Self {
            phi_true: phase,
            phi_est: phase,
            lo_phase: phase + FRAC_PI_2,
            sigma2,
            t: 0.0,
        }
    }

    /// Unwrapped estimation error `φ̌ − φ`.
    pub fn error(&self) -> f64 {
        self.phi_est - self.phi_true
    }
}

/// Wiener increments for one step: one for the phase diffusion and two for
/// shot noise (the second is only used by dual-quadrature detection).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseStep {
    pub d_w_phase: f64,
    pub d_w_shot: [f64; 2],
}

impl NoiseStep {
    pub const ZERO: Self = Self {
        d_w_phase: 0.0,
        d_w_shot: [0.0, 0.0],
    };
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and a path of counters.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(master), |acc, &i| {
        mix64(acc ^ mix64(i.wrapping_add(0x632b_e59b_d9b4_e019)))
    })
}

/// Gaussian increments for one trial.
///
/// Each step of length `dt` is the sum of `substeps` finer increments, so a
/// run at `(dt, substeps = 2)` sees exactly the Brownian path of a run at
/// `(dt/2, substeps = 1)` with the same seed.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    substeps: u32,
}

impl NoiseStream {
    pub fn new(seed: u64, substeps: u32) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            substeps: substeps.max(1),
        }
    }

    pub fn next_step(&mut self, dt: f64) -> NoiseStep {
        let scale = (dt / self.substeps as f64).sqrt();
        let mut out = NoiseStep::ZERO;
        for _ in 0..self.substeps {
            let a: f64 = self.rng.sample(StandardNormal);
            let b: f64 = self.rng.sample(StandardNormal);
            let c: f64 = self.rng.sample(StandardNormal);
            out.d_w_phase += scale * a;
            out.d_w_shot[0] += scale * b;
            out.d_w_shot[1] += scale * c;
        }
        out
    }
}

/// Advances the signal phase: `φ += √ℓ dW`.
pub fn step_phase(state: TrackerState, beam: &BeamParams, noise: &NoiseStep) -> TrackerState {
    TrackerState {
        phi_true: state.phi_true + beam.linewidth.sqrt() * noise.d_w_phase,
        ..state
    }
}

/// Homodyne photocurrent integrated over `dt`: `2α cos(Φ − φ) dt + dW`.
pub fn photocurrent_increment(state: &TrackerState, beam: &BeamParams, dt: f64, noise: &NoiseStep) -> f64 {
    2.0 * beam.amplitude() * (state.lo_phase - state.phi_true).cos() * dt + noise.d_w_shot[0]
}

/// One Euler step of `σ̇² = ℓ − 4fσ⁴`.
pub fn variance_ode_step(sigma2: f64, beam: &BeamParams, dt: f64) -> f64 {
    sigma2 + (beam.linewidth - 4.0 * beam.flux * sigma2 * sigma2) * dt
}

/// How the adaptive loop sets its gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdaptiveGain {
    /// `ℓ/σ²` with σ² held at `1/(2√N)`.
    Stationary,
    /// Kalman gain `4fσ²` with σ² following the variance ODE from the state's
    /// initial value. Equals `ℓ/σ²` at the stationary point.
    Evolving,
    /// Constant relaxation rate (1/s).
    Fixed(f64),
}

/// One step of the adaptive loop, using the full nonlinear photocurrent.
pub fn adaptive_step(
    state: TrackerState,
    beam: &BeamParams,
    dt: f64,
    noise: &NoiseStep,
    gain: AdaptiveGain,
) -> TrackerState {
    let current = photocurrent_increment(&state, beam, dt, noise);
    let rate = match gain {
        AdaptiveGain::Stationary => beam.linewidth / state.sigma2,
        AdaptiveGain::Evolving => 4.0 * beam.flux * state.sigma2,
        AdaptiveGain::Fixed(k) => k,
    };
    let phi_est = state.phi_est + rate * current / (2.0 * beam.amplitude());
    let sigma2 = match gain {
        AdaptiveGain::Evolving => variance_ode_step(state.sigma2, beam, dt).max(f64::MIN_POSITIVE),
        _ => state.sigma2,
    };
    let moved = step_phase(state, beam, noise);
    TrackerState {
        phi_true: moved.phi_true,
        phi_est,
        lo_phase: phi_est + FRAC_PI_2,
        sigma2,
        t: state.t + dt,
    }
}

/// State of the dual-quadrature estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeterodyneState {
    pub phi_true: f64,
    pub phi_est: f64,
    /// Moving average of `dZ/dt`.
    pub filter: Complex64,
    pub t: f64,
}

impl HeterodyneState {
    pub fn locked(phase: f64, beam: &BeamParams) -> Self {
        Self {
            phi_true: phase,
            phi_est: phase,
            filter: Complex64::from_polar(SQRT_2 * beam.amplitude(), phase),
            t: 0.0,
        }
    }

    pub fn error(&self) -> f64 {
        self.phi_est - self.phi_true
    }
}

/// One step of dual-quadrature detection followed by the moving-average filter
/// of bandwidth `bandwidth` (1/s).
pub fn heterodyne_step(
    state: HeterodyneState,
    beam: &BeamParams,
    dt: f64,
    noise: &NoiseStep,
    bandwidth: f64,
) -> HeterodyneState {
    let signal = Complex64::from_polar(SQRT_2 * beam.amplitude(), state.phi_true) * dt;
    let dz = signal + Complex64::new(noise.d_w_shot[0], noise.d_w_shot[1]);
    let decay = (-bandwidth * dt).exp();
    let filter = state.filter * decay + dz * ((1.0 - decay) / dt);
    let phi_est = state.phi_est + wrap_angle(filter.arg() - state.phi_est);
    HeterodyneState {
        phi_true: state.phi_true + beam.linewidth.sqrt() * noise.d_w_phase,
        phi_est,
        filter,
        t: state.t + dt,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrackingMode {
    Adaptive(AdaptiveGain),
    /// Dual-quadrature baseline; `None` selects the optimal bandwidth `√(2fℓ)`.
    Heterodyne {
        bandwidth: Option<f64>,
    },
}

impl TrackingMode {
    pub const ADAPTIVE: Self = Self::Adaptive(AdaptiveGain::Stationary);
    pub const HETERODYNE: Self = Self::Heterodyne { bandwidth: None };
}

/// Step size choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    /// `10⁻²` loop time constants.
    Auto,
    Seconds(f64),
}

/// A time span either in seconds or in loop time constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Span {
    Seconds(f64),
    LoopTimes(f64),
}

impl Span {
    fn resolve(self, tau: f64) -> f64 {
        match self {
            Span::Seconds(s) => s,
            Span::LoopTimes(k) => k * tau,
        }
    }
}

/// Simulation budget independent of the beam, resolved per beam by
/// [`TrackingConfig::from_settings`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub dt: StepSize,
    /// Divides the resolved step; `refine = 2` halves it.
    pub refine: u32,
    pub substeps: u32,
    pub burn_in: Span,
    /// Total simulated time including burn-in.
    pub duration: Span,
    pub trials: usize,
    pub seed: u64,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            dt: StepSize::Auto,
            refine: 1,
            substeps: 1,
            burn_in: Span::LoopTimes(10.0),
            duration: Span::LoopTimes(60.0),
            trials: 200,
            seed: 0,
        }
    }
}

/// Fully resolved tracking experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingConfig {
    pub beam: BeamParams,
    pub mode: TrackingMode,
    pub dt: f64,
    pub duration: f64,
    pub burn_in: f64,
    pub trials: usize,
    pub seed: u64,
    pub substeps: u32,
    pub initial_phase: f64,
    /// Starting σ² for [`AdaptiveGain::Evolving`]; defaults to the stationary value.
    pub initial_variance: Option<f64>,
}

impl TrackingConfig {
    pub fn from_settings(beam: BeamParams, mode: TrackingMode, settings: &RunSettings) -> Result<Self> {
        let tau = loop_time_constant(&beam, &mode, None)?;
        let base_dt = match settings.dt {
            StepSize::Auto => DT_FRACTION * tau,
            StepSize::Seconds(s) => s,
        };
        let config = Self {
            beam,
            mode,
            dt: base_dt / settings.refine.max(1) as f64,
            duration: settings.duration.resolve(tau),
            burn_in: settings.burn_in.resolve(tau),
            trials: settings.trials,
            seed: settings.seed,
            substeps: settings.substeps.max(1),
            initial_phase: 0.0,
            initial_variance: None,
        };
        config.validate()?;
        Ok(config)
    }

    /// Relaxation time of the estimator.
    pub fn loop_time_constant(&self) -> Result<f64> {
        loop_time_constant(&self.beam, &self.mode, self.initial_variance)
    }

    pub fn bandwidth(&self) -> Option<f64> {
        match self.mode {
            TrackingMode::Heterodyne { bandwidth } => bandwidth.or(self.beam.optimal_bandwidth()),
            TrackingMode::Adaptive(_) => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("dt", self.dt)?;
        require_positive("duration", self.duration)?;
        require_finite("burn_in", self.burn_in)?;
        require_finite("initial_phase", self.initial_phase)?;
        if self.burn_in < 0.0 {
            return Err(invalid("burn_in", "must be nonnegative"));
        }
        if self.trials < MIN_TRIALS {
            return Err(invalid("trials", format!("must be at least {MIN_TRIALS}")));
        }
        let tau = self.loop_time_constant()?;
        if self.duration < self.burn_in + MIN_MEASURED_LOOP_TIMES * tau * (1.0 - 1e-12) {
            return Err(invalid(
                "duration",
                format!(
                    "must cover burn-in plus {MIN_MEASURED_LOOP_TIMES} loop time constants ({:.4e} s)",
                    self.burn_in + MIN_MEASURED_LOOP_TIMES * tau
                ),
            ));
        }
        if let TrackingMode::Adaptive(_) = self.mode {
            if self.dt > DT_FRACTION * tau * (1.0 + 1e-9) {
                return Err(invalid(
                    "dt",
                    format!("adaptive loop needs dt <= {:.4e} s", DT_FRACTION * tau),
                ));
            }
        }
        if let Some(bw) = self.bandwidth() {
            if self.dt * bw > 0.1 {
                return Err(invalid("dt", "must resolve the filter bandwidth (dt·λ <= 0.1)"));
            }
        }
        if let Some(v) = self.initial_variance {
            require_positive("initial_variance", v)?;
        }
        Ok(())
    }

    fn steps(&self) -> (usize, usize) {
        let total = (self.duration / self.dt).round() as usize;
        let burn = (self.burn_in / self.dt).round() as usize;
        (total, burn.min(total))
    }
}

fn loop_time_constant(beam: &BeamParams, mode: &TrackingMode, initial_variance: Option<f64>) -> Result<f64> {
    let rate = match mode {
        TrackingMode::Adaptive(AdaptiveGain::Stationary) => beam.loop_rate(),
        TrackingMode::Adaptive(AdaptiveGain::Evolving) => beam
            .loop_rate()
            .or_else(|| initial_variance.map(|v| 4.0 * beam.flux * v)),
        TrackingMode::Adaptive(AdaptiveGain::Fixed(k)) => Some(*k),
        TrackingMode::Heterodyne { bandwidth } => bandwidth.or(beam.optimal_bandwidth()),
    };
    match rate {
        Some(r) if r.is_finite() && r > 0.0 => Ok(1.0 / r),
        _ => Err(invalid(
            "mode",
            "loop rate undefined: zero linewidth needs an explicit gain or bandwidth",
        )),
    }
}

/// Aggregate Monte Carlo result.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingResult {
    /// Ensemble- and time-averaged `wrap(φ̌ − φ)²` after burn-in (rad²).
    pub mse_wrapped: f64,
    /// Same with the unwrapped error.
    pub mse_unwrapped: f64,
    /// Standard error of `mse_wrapped` across trials.
    pub stderr: f64,
    pub trials: usize,
    pub burn_in: f64,
    pub duration: f64,
    pub dt: f64,
    /// Branch changes of the unwrapped error per second of measured time.
    pub cycle_slip_rate: f64,
    /// Per-trial time-averaged wrapped MSE, in trial order.
    pub per_trial_mse: Vec<f64>,
}

impl TrackingResult {
    /// True when slips account for more than 1% of the unwrapped MSE.
    pub fn slips_significant(&self) -> bool {
        self.mse_unwrapped > 0.0 && (self.mse_unwrapped - self.mse_wrapped) / self.mse_unwrapped > SLIP_FRACTION_LIMIT
    }
}

#[derive(Debug, Clone, Copy)]
struct TrialOutcome {
    wrapped: f64,
    unwrapped: f64,
    slips: u64,
}

#[derive(Default)]
struct ErrorAccumulator {
    wrapped: f64,
    unwrapped: f64,
    count: u64,
    slips: u64,
    branch: i64,
}

impl ErrorAccumulator {
    fn record(&mut self, error: f64, measuring: bool) {
        let branch = (error / (2.0 * PI)).round() as i64;
        if branch != self.branch {
            if measuring {
                self.slips += 1;
            }
            self.branch = branch;
        }
        if measuring {
            let w = wrap_angle(error);
            self.wrapped += w * w;
            self.unwrapped += error * error;
            self.count += 1;
        }
    }

    fn finish(self) -> TrialOutcome {
        let n = self.count.max(1) as f64;
        TrialOutcome {
            wrapped: self.wrapped / n,
            unwrapped: self.unwrapped / n,
            slips: self.slips,
        }
    }
}

fn run_trial(config: &TrackingConfig, trial: usize) -> TrialOutcome {
    let mut noise = NoiseStream::new(derive_seed(config.seed, &[trial as u64]), config.substeps);
    let (total, burn) = config.steps();
    let beam = &config.beam;
    let dt = config.dt;
    let mut acc = ErrorAccumulator::default();
    match config.mode {
        TrackingMode::Adaptive(gain) => {
            let sigma2 = match gain {
                AdaptiveGain::Evolving => config.initial_variance.or(beam.stationary_variance()),
                _ => beam.stationary_variance(),
            }
            .unwrap_or(1.0);
            let mut state = TrackerState::locked(config.initial_phase, sigma2);
            for step in 0..total {
                state = adaptive_step(state, beam, dt, &noise.next_step(dt), gain);
                acc.record(state.error(), step >= burn);
            }
        }
        TrackingMode::Heterodyne { .. } => {
            let bandwidth = config.bandwidth().expect("validated bandwidth");
            let mut state = HeterodyneState::locked(config.initial_phase, beam);
            for step in 0..total {
                state = heterodyne_step(state, beam, dt, &noise.next_step(dt), bandwidth);
                acc.record(state.error(), step >= burn);
            }
        }
    }
    acc.finish()
}

/// Runs all trials and reports the steady-state mean-square error.
pub fn run_tracking(config: &TrackingConfig) -> Result<TrackingResult> {
    config.validate()?;
    let outcomes: Vec<TrialOutcome> = (0..config.trials)
        .into_par_iter()
        .map(|trial| run_trial(config, trial))
        .collect();

    let n = outcomes.len() as f64;
    let mse_wrapped = outcomes.iter().map(|o| o.wrapped).sum::<f64>() / n;
    let mse_unwrapped = outcomes.iter().map(|o| o.unwrapped).sum::<f64>() / n;
    let var = outcomes.iter().map(|o| (o.wrapped - mse_wrapped).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let (total, burn) = config.steps();
    let measured = (total - burn) as f64 * config.dt;
    let slips: u64 = outcomes.iter().map(|o| o.slips).sum();
    Ok(TrackingResult {
        mse_wrapped,
        mse_unwrapped,
        stderr: (var / n).sqrt().max(f64::MIN_POSITIVE),
        trials: config.trials,
        burn_in: config.burn_in,
        duration: config.duration,
        dt: config.dt,
        cycle_slip_rate: slips as f64 / (n * measured),
        per_trial_mse: outcomes.iter().map(|o| o.wrapped).collect(),
    })
}

/// Dual-quadrature baseline at a given filter bandwidth.
pub fn heterodyne_track(
    beam: BeamParams,
    dt: f64,
    duration: f64,
    trials: usize,
    seed: u64,
    filter_bandwidth: f64,
) -> Result<TrackingResult> {
    require_positive("filter_bandwidth", filter_bandwidth)?;
    let tau = 1.0 / filter_bandwidth;
    let config = TrackingConfig {
        beam,
        mode: TrackingMode::Heterodyne {
            bandwidth: Some(filter_bandwidth),
        },
        dt,
        duration,
        burn_in: (duration - MIN_MEASURED_LOOP_TIMES * tau).min(10.0 * tau).max(0.0),
        trials,
        seed,
        substeps: 1,
        initial_phase: 0.0,
        initial_variance: None,
    };
    run_tracking(&config)
}

/// One point of a bandwidth sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthPoint {
    pub bandwidth: f64,
    pub result: TrackingResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthSweep {
    pub points: Vec<BandwidthPoint>,
    /// Index of the smallest measured MSE.
    pub best: usize,
    /// Vertex of a parabola in `ln λ` through the best point and its neighbours.
    pub fitted_optimum: Option<f64>,
}

impl BandwidthSweep {
    pub fn min_mse(&self) -> f64 {
        self.points[self.best].result.mse_wrapped
    }
}

/// Logarithmic grid of `count` bandwidths spanning `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Sweeps the dual-quadrature filter bandwidth. All points share the seed,
/// step and time spans, so they see the same noise realizations and the
/// minimum is located with common random numbers. Spans given in loop times
/// refer to the narrowest filter; an automatic step to the widest.
pub fn sweep_bandwidth(beam: BeamParams, bandwidths: &[f64], settings: &RunSettings) -> Result<BandwidthSweep> {
    if bandwidths.is_empty() {
        return Err(invalid("bandwidths", "sweep needs at least one value"));
    }
    for &bw in bandwidths {
        require_positive("bandwidth", bw)?;
    }
    let narrowest = bandwidths.iter().copied().fold(f64::INFINITY, f64::min);
    let widest = bandwidths.iter().copied().fold(0.0, f64::max);
    let shared = RunSettings {
        dt: match settings.dt {
            StepSize::Auto => StepSize::Seconds(DT_FRACTION / widest),
            given => given,
        },
        ..*settings
    };
    let reference = TrackingConfig::from_settings(
        beam,
        TrackingMode::Heterodyne {
            bandwidth: Some(narrowest),
        },
        &shared,
    )?;
    let points = bandwidths
        .iter()
        .map(|&bw| {
            let config = TrackingConfig {
                mode: TrackingMode::Heterodyne { bandwidth: Some(bw) },
                ..reference
            };
            Ok(BandwidthPoint {
                bandwidth: bw,
                result: run_tracking(&config)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = points
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.result.mse_wrapped.total_cmp(&b.1.result.mse_wrapped))
        .map(|(i, _)| i)
        .expect("nonempty");
    let fitted_optimum = (best > 0 && best + 1 < points.len()).then(|| {
        let x: Vec<f64> = (best - 1..=best + 1).map(|i| points[i].bandwidth.ln()).collect();
        let y: Vec<f64> = (best - 1..=best + 1).map(|i| points[i].result.mse_wrapped).collect();
        parabola_vertex(&x, &y).exp()
    });
    Ok(BandwidthSweep {
        points,
        best,
        fitted_optimum,
    })
}

fn parabola_vertex(x: &[f64], y: &[f64]) -> f64 {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let curvature = (d2 - d1) / (x[2] - x[0]);
    if curvature <= 0.0 {
        return x[1];
    }
    0.5 * (x[0] + x[1]) - d1 / (2.0 * curvature)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beam(n: f64) -> BeamParams {
        BeamParams::from_quality(n, 1.0).unwrap()
    }

    #[test]
    fn beam_derived_quantities() {
        let b = beam(1e4);
        assert!((b.stationary_variance().unwrap() - 0.005).abs() < 1e-15);
        assert!((b.loop_rate().unwrap() - 200.0).abs() < 1e-9);
        assert!((b.auto_dt().unwrap() - 5e-5).abs() < 1e-15);
        assert!((heterodyne_mse_limit(&b).unwrap() - 1.0 / 2e4f64.sqrt()).abs() < 1e-15);
        let opt = b.optimal_bandwidth().unwrap();
        assert!((heterodyne_mse_at(&b, opt) - heterodyne_mse_limit(&b).unwrap()).abs() < 1e-15);
        assert!(BeamParams::new(0.0, 1.0).is_err());
        assert!(BeamParams::new(1.0, -1.0).is_err());
        assert!(BeamParams::new(1.0, 0.0).unwrap().quality().is_none());
    }

    #[test]
    fn no_diffusion_keeps_phase() {
        let b = BeamParams::new(100.0, 0.0).unwrap();
        let mut noise = NoiseStream::new(3, 1);
        let mut s = TrackerState::locked(0.3, 1.0);
        for _ in 0..1000 {
            s = step_phase(s, &b, &noise.next_step(0.01));
        }
        assert_eq!(s.phi_true, 0.3);
    }

    #[test]
    fn photocurrent_cases() {
        let b = BeamParams::new(400.0, 1.0).unwrap();
        let dt = 1e-3;
        let mut s = TrackerState::locked(0.2, 1.0);
        s.lo_phase = s.phi_true;
        assert!((photocurrent_increment(&s, &b, dt, &NoiseStep::ZERO) - 2.0 * 20.0 * dt).abs() < 1e-15);
        let locked = TrackerState::locked(0.2, 1.0);
        assert!(photocurrent_increment(&locked, &b, dt, &NoiseStep::ZERO).abs() < 1e-15);
        // Small offset e: I dt ≈ 2α e dt.
        let e = 1e-4;
        let mut off = locked;
        off.lo_phase += e;
        let i = photocurrent_increment(&off, &b, dt, &NoiseStep::ZERO);
        assert!((i + 2.0 * 20.0 * e * dt).abs() < 1e-12);
        off.lo_phase = off.phi_true + FRAC_PI_2 - e;
        let i = photocurrent_increment(&off, &b, dt, &NoiseStep::ZERO);
        assert!((i - 2.0 * 20.0 * e * dt).abs() < 1e-12);
    }

    #[test]
    fn adaptive_keeps_lo_at_null_point() {
        let b = beam(1e3);
        let mut noise = NoiseStream::new(11, 1);
        let mut s = TrackerState::locked(0.0, b.stationary_variance().unwrap());
        let dt = b.auto_dt().unwrap();
        for _ in 0..500 {
            s = adaptive_step(s, &b, dt, &noise.next_step(dt), AdaptiveGain::Stationary);
            assert!((s.lo_phase - s.phi_est - FRAC_PI_2).abs() < 1e-12);
            assert!(s.sigma2 > 0.0);
        }
    }

    #[test]
    fn noiseless_error_relaxes_at_loop_rate() {
        let b = beam(1e4);
        let dt = b.auto_dt().unwrap();
        let rate = b.loop_rate().unwrap();
        let mut s = TrackerState::locked(0.0, b.stationary_variance().unwrap());
        s.phi_est = 0.1;
        s.lo_phase = 0.1 + FRAC_PI_2;
        let steps = 200;
        for _ in 0..steps {
            s = adaptive_step(s, &b, dt, &NoiseStep::ZERO, AdaptiveGain::Stationary);
        }
        let t = steps as f64 * dt;
        // ė = −r sin e has tan(e/2) = tan(e₀/2) e^{−rt}.
        let exact = 2.0 * ((0.05f64).tan() * (-rate * t).exp()).atan();
        assert!((s.error() - exact).abs() / exact < 0.02);
        let fitted_rate = -(s.error() / 0.1).ln() / t;
        assert!((fitted_rate / rate - 1.0).abs() < 0.1);
    }

    #[test]
    fn variance_ode_fixed_point_and_decay() {
        let b = beam(1e4);
        let s = b.stationary_variance().unwrap();
        assert!((variance_ode_step(s, &b, 1e-3) - s).abs() < 1e-15);
        let still = BeamParams::new(100.0, 0.0).unwrap();
        let mut v = 1.0;
        for _ in 0..1000 {
            let next = variance_ode_step(v, &still, 1e-4);
            assert!(next < v && next > 0.0);
            v = next;
        }
    }

    #[test]
    fn variance_ode_converges_to_closed_form() {
        let b = beam(100.0);
        let s = b.stationary_variance().unwrap();
        let c = 4.0 * b.flux();
        let t_end = 10.0 / b.loop_rate().unwrap();
        let steps = 200_000;
        let dt = t_end / steps as f64;
        let mut v = 1.0;
        for _ in 0..steps {
            v = variance_ode_step(v, &b, dt);
        }
        // σ̇² = c(s² − σ⁴) from σ²(0) > s: σ² = s coth(cst + arcoth(σ²(0)/s)).
        let x0 = 0.5 * ((1.0 / s + 1.0) / (1.0 / s - 1.0)).ln();
        let exact = s / (c * s * t_end + x0).tanh();
        assert!((v - exact).abs() / exact < 1e-3);
        assert!((v / 0.05 - 1.0).abs() < 0.01);
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        assert_eq!(derive_seed(7, &[1, 2]), derive_seed(7, &[1, 2]));
        assert_ne!(derive_seed(7, &[1]), derive_seed(7, &[2]));
        assert_ne!(derive_seed(7, &[1]), derive_seed(8, &[1]));
        assert_ne!(derive_seed(7, &[0, 1]), derive_seed(7, &[1, 0]));
    }

    #[test]
    fn substeps_reproduce_fine_path() {
        let mut coarse = NoiseStream::new(5, 2);
        let mut fine = NoiseStream::new(5, 1);
        for _ in 0..50 {
            let c = coarse.next_step(0.02);
            let a = fine.next_step(0.01);
            let b = fine.next_step(0.01);
            assert!((c.d_w_phase - a.d_w_phase - b.d_w_phase).abs() < 1e-15);
            assert!((c.d_w_shot[1] - a.d_w_shot[1] - b.d_w_shot[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn config_validation() {
        let b = beam(1e3);
        let s = RunSettings {
            trials: 10,
            ..RunSettings::default()
        };
        assert!(TrackingConfig::from_settings(b, TrackingMode::ADAPTIVE, &s).is_err());
        let s = RunSettings {
            duration: Span::LoopTimes(15.0),
            ..RunSettings::default()
        };
        assert!(TrackingConfig::from_settings(b, TrackingMode::ADAPTIVE, &s).is_err());
        let s = RunSettings {
            dt: StepSize::Seconds(1.0),
            ..RunSettings::default()
        };
        assert!(TrackingConfig::from_settings(b, TrackingMode::ADAPTIVE, &s).is_err());
        let still = BeamParams::new(100.0, 0.0).unwrap();
        assert!(TrackingConfig::from_settings(still, TrackingMode::ADAPTIVE, &RunSettings::default()).is_err());
    }

    #[test]
    fn parabola_vertex_recovers_minimum() {
        let x = [0.0, 1.0, 2.0];
        let y: Vec<f64> = x.iter().map(|v| (v - 1.3f64).powi(2)).collect();
        assert!((parabola_vertex(&x, &y) - 1.3).abs() < 1e-12);
    }
}
