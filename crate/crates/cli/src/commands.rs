use std::path::PathBuf;

use laserclock::channel::{coherent_fidelity, decohere_auto, output_mean_amplitude};
use laserclock::fock::{clone_phase_variance, coherent_phase_variance, default_truncation};
use laserclock::laserdyn::{extract_linewidth, hl_linewidth, sql_linewidth, GainKind, LaserParams, LinewidthMethod};
use laserclock::num_complex::Complex64;
use laserclock::sync::{
    hl_sync_limit, physical_units_mse, run_sync_sweep, split_variance_limit, sql_sync_limit, PhysicalBeam, Regime,
};
use laserclock::tracking::{
    adaptive_mse_at, adaptive_mse_limit, derive_seed, heterodyne_mse_at, run_tracking, AdaptiveGain, BeamParams,
    RunSettings, Span, StepSize, TrackingConfig, TrackingMode, TrackingResult,
};

use crate::args::*;
use crate::config::{required, resolve, usage, Dt, Failure};
use crate::output::{emit, num, opt, Table};

fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| usage(format!("workers: {e}")))?;
    Ok(pool.install(f))
}

fn beam_from(flux: Option<f64>, quality: Option<f64>, linewidth: Option<f64>) -> Result<BeamParams, Failure> {
    match (flux, quality) {
        (Some(_), Some(_)) => Err(usage("give either --flux or --quality, not both")),
        (None, Some(q)) => Ok(BeamParams::from_quality(q, linewidth.unwrap_or(1.0))?),
        (Some(f), None) => Ok(BeamParams::new(f, required(linewidth, "linewidth")?)?),
        (None, None) => Err(usage("missing required --flux or --quality")),
    }
}

fn tracking_mode(
    mode: Mode,
    gain: Gain,
    gain_rate: Option<f64>,
    bandwidth: Option<f64>,
) -> Result<TrackingMode, Failure> {
    Ok(match mode {
        Mode::Adaptive => TrackingMode::Adaptive(match gain {
            Gain::Stationary => AdaptiveGain::Stationary,
            Gain::Evolving => AdaptiveGain::Evolving,
            Gain::Fixed => AdaptiveGain::Fixed(required(gain_rate, "gain-rate")?),
        }),
        Mode::Heterodyne => TrackingMode::Heterodyne { bandwidth },
    })
}

#[allow(clippy::too_many_arguments)]
fn settings(
    dt: Dt,
    refine: u32,
    substeps: u32,
    burn_in_loops: f64,
    duration_loops: f64,
    burn_in: Option<f64>,
    duration: Option<f64>,
    trials: usize,
    seed: u64,
) -> Result<RunSettings, Failure> {
    if refine == 0 || substeps == 0 {
        return Err(usage("refine and substeps must be at least 1"));
    }
    Ok(RunSettings {
        dt: match dt {
            Dt::Auto => StepSize::Auto,
            Dt::Seconds(s) => StepSize::Seconds(s),
        },
        refine,
        substeps,
        burn_in: burn_in.map_or(Span::LoopTimes(burn_in_loops), Span::Seconds),
        duration: duration.map_or(Span::LoopTimes(duration_loops), Span::Seconds),
        trials,
        seed,
    })
}

/// Linearized prediction for the configured estimator, if one exists.
fn predicted(config: &TrackingConfig) -> Option<f64> {
    match config.mode {
        TrackingMode::Adaptive(AdaptiveGain::Fixed(k)) => Some(adaptive_mse_at(&config.beam, k)),
        TrackingMode::Adaptive(_) => adaptive_mse_limit(&config.beam),
        TrackingMode::Heterodyne { .. } => config.bandwidth().map(|bw| heterodyne_mse_at(&config.beam, bw)),
    }
}

fn mode_name(mode: &TrackingMode) -> &'static str {
    match mode {
        TrackingMode::Adaptive(_) => "adaptive",
        TrackingMode::Heterodyne { .. } => "heterodyne",
    }
}

fn flag(b: bool) -> String {
    b.to_string()
}

const TRACK_HEADER: &[&str] = &[
    "kind",
    "trial",
    "seed",
    "mode",
    "flux_per_s",
    "linewidth_rad_per_s",
    "quality_n",
    "bandwidth_per_s",
    "dt_s",
    "trials",
    "burn_in_s",
    "duration_s",
    "mse_wrapped_rad2",
    "mse_unwrapped_rad2",
    "stderr_rad2",
    "predicted_rad2",
    "cycle_slip_rate_per_s",
    "slips_significant",
];

pub fn track(args: TrackArgs) -> Result<(), Failure> {
    let (cfg, output): (TrackConfig, Option<PathBuf>) =
        resolve("track", &args, args.io.config.as_deref(), args.io.output.clone())?;
    let beam = beam_from(cfg.flux, cfg.quality, cfg.linewidth)?;
    let mode = tracking_mode(cfg.mode, cfg.gain, cfg.gain_rate, cfg.bandwidth)?;
    let run = settings(
        cfg.dt,
        cfg.refine,
        cfg.substeps,
        cfg.burn_in_loops,
        cfg.duration_loops,
        cfg.burn_in,
        cfg.duration,
        cfg.trials,
        cfg.seed,
    )?;
    let mut tc = TrackingConfig::from_settings(beam, mode, &run)?;
    tc.initial_phase = cfg.initial_phase;
    tc.initial_variance = cfg.initial_variance;
    tc.validate()?;
    let result = with_workers(cfg.workers, || run_tracking(&tc))??;

    let mut table = Table::new(TRACK_HEADER);
    let common = |kind: &str, trial: String, seed: u64| {
        vec![
            kind.to_string(),
            trial,
            seed.to_string(),
            mode_name(&tc.mode).to_string(),
            num(beam.flux()),
            num(beam.linewidth()),
            opt(beam.quality()),
            opt(tc.bandwidth()),
            num(tc.dt),
            tc.trials.to_string(),
            num(tc.burn_in),
            num(tc.duration),
        ]
    };
    let mut row = common("aggregate", String::new(), tc.seed);
    row.extend(result_columns(&result, predicted(&tc)));
    table.push(row);
    if cfg.per_trial {
        for (i, mse) in result.per_trial_mse.iter().enumerate() {
            let mut row = common("trial", i.to_string(), derive_seed(tc.seed, &[i as u64]));
            row.extend([
                num(*mse),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ]);
            table.push(row);
        }
    }
    emit("track", &cfg, &table, output.as_deref())
}

fn result_columns(r: &TrackingResult, predicted: Option<f64>) -> [String; 6] {
    [
        num(r.mse_wrapped),
        num(r.mse_unwrapped),
        num(r.stderr),
        opt(predicted),
        num(r.cycle_slip_rate),
        flag(r.slips_significant()),
    ]
}

pub fn sync(args: SyncArgs) -> Result<(), Failure> {
    let (cfg, output): (SyncRunConfig, Option<PathBuf>) =
        resolve("sync", &args, args.io.config.as_deref(), args.io.output.clone())?;
    if cfg.parties.is_empty() {
        return Err(usage("--parties needs at least one value"));
    }
    let laser = LaserParams::new(cfg.kappa, required(cfg.mu, "mu")?, GainKind::Noiseless)?;
    let regime = match cfg.regime {
        RegimeArg::Hl => Regime::Heisenberg,
        RegimeArg::Sql => Regime::Standard,
    };
    let mode = cfg
        .mode
        .map(|m| tracking_mode(m, cfg.gain, cfg.gain_rate, None))
        .transpose()?;
    let run = settings(
        cfg.dt,
        cfg.refine,
        cfg.substeps,
        cfg.burn_in_loops,
        cfg.duration_loops,
        None,
        None,
        cfg.trials,
        cfg.seed,
    )?;
    let sweep = with_workers(cfg.workers, || run_sync_sweep(laser, regime, mode, &cfg.parties, &run))??;

    let mut table = Table::new(&[
        "parties",
        "kappa_per_s",
        "mu",
        "regime",
        "mode",
        "seed",
        "flux_per_s",
        "linewidth_rad_per_s",
        "quality_n",
        "dt_s",
        "trials",
        "mean_mse_rad2",
        "stderr_rad2",
        "min_party_mse_rad2",
        "max_party_mse_rad2",
        "predicted_rad2",
        "relative_error",
        "scaling_exponent",
        "slips_significant",
    ]);
    let regime_name = match cfg.regime {
        RegimeArg::Hl => "hl",
        RegimeArg::Sql => "sql",
    };
    let tracker = mode.unwrap_or_else(|| regime.default_mode());
    for r in &sweep.reports {
        let min = r.per_party_mse.iter().copied().fold(f64::INFINITY, f64::min);
        let max = r.per_party_mse.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        table.push(vec![
            r.parties.to_string(),
            num(laser.kappa),
            num(laser.mu),
            regime_name.to_string(),
            mode_name(&tracker).to_string(),
            cfg.seed.to_string(),
            num(r.beam.flux()),
            num(r.beam.linewidth()),
            opt(r.beam.quality()),
            num(r.per_party[0].dt),
            cfg.trials.to_string(),
            num(r.mean_mse),
            num(r.stderr),
            num(min),
            num(max),
            num(r.predicted),
            num(r.relative_error()),
            opt(r.scaling_exponent),
            flag(r.slips_significant),
        ]);
    }
    emit("sync", &cfg, &table, output.as_deref())
}

pub fn linewidth(args: LinewidthArgs) -> Result<(), Failure> {
    let (cfg, output): (LinewidthConfig, Option<PathBuf>) =
        resolve("linewidth", &args, args.io.config.as_deref(), args.io.output.clone())?;
    let laser = LaserParams::new(cfg.kappa, required(cfg.mu, "mu")?, GainKind::Noiseless)?;
    let truncation = cfg.truncation.unwrap_or_else(|| default_truncation(laser.mu));
    let methods: &[(LinewidthMethod, &str)] = match cfg.method {
        Method::Eigenvalue => &[(LinewidthMethod::SectorEigenvalue, "eigenvalue")],
        Method::Fit => &[(LinewidthMethod::RegressionDecayFit, "fit")],
        Method::Both => &[
            (LinewidthMethod::SectorEigenvalue, "eigenvalue"),
            (LinewidthMethod::RegressionDecayFit, "fit"),
        ],
    };
    let mut table = Table::new(&[
        "method",
        "kappa_per_s",
        "mu",
        "truncation",
        "linewidth_rad_per_s",
        "hl_rad_per_s",
        "sql_rad_per_s",
        "relative_deviation_hl",
    ]);
    let hl = hl_linewidth(&laser);
    for (method, name) in methods {
        let est = extract_linewidth(&laser, truncation, *method)?;
        table.push(vec![
            name.to_string(),
            num(laser.kappa),
            num(laser.mu),
            truncation.to_string(),
            num(est.value),
            num(hl),
            num(sql_linewidth(&laser)),
            num(est.value / hl - 1.0),
        ]);
    }
    let echo = LinewidthConfig {
        truncation: Some(truncation),
        ..cfg
    };
    emit("linewidth", &echo, &table, output.as_deref())
}

pub fn phasevar(args: PhasevarArgs) -> Result<(), Failure> {
    let (cfg, output): (PhasevarConfig, Option<PathBuf>) =
        resolve("phasevar", &args, args.io.config.as_deref(), args.io.output.clone())?;
    let mu = required(cfg.mu, "mu")?;
    let predicted = split_variance_limit(mu, cfg.parties)?;
    let amplitude = (mu / cfg.parties as f64).sqrt();
    let variance = coherent_phase_variance(Complex64::new(amplitude, 0.0), cfg.grid)?;
    let mut table = Table::new(&[
        "mu",
        "parties",
        "amplitude",
        "grid",
        "variance_rad2",
        "predicted_rad2",
        "ratio",
        "clone_variance_rad2",
    ]);
    table.push(vec![
        num(mu),
        cfg.parties.to_string(),
        num(amplitude),
        cfg.grid.to_string(),
        num(variance),
        num(predicted),
        num(variance / predicted),
        num(clone_phase_variance(mu, cfg.parties)?),
    ]);
    emit("phasevar", &cfg, &table, output.as_deref())
}

pub fn channel(args: ChannelArgs) -> Result<(), Failure> {
    let (cfg, output): (ChannelConfig, Option<PathBuf>) =
        resolve("channel", &args, args.io.config.as_deref(), args.io.output.clone())?;
    if !(cfg.alpha.is_finite() && cfg.alpha >= 0.0) {
        return Err(usage("--alpha must be a nonnegative modulus"));
    }
    let alpha = Complex64::from_polar(cfg.alpha, cfg.phase);
    let (spec, dist) = decohere_auto(alpha, cfg.delta)?;
    let out = output_mean_amplitude(&dist, &spec)?;
    let fidelity = coherent_fidelity(&dist, &spec, out)?;

    let mut table = Table::new(&[
        "kind",
        "n",
        "m",
        "q",
        "p",
        "probability",
        "captured_mass",
        "out_re",
        "out_im",
        "out_modulus",
        "out_phase_rad",
        "fidelity",
    ]);
    let blank = String::new;
    table.push(vec![
        "summary".into(),
        blank(),
        blank(),
        blank(),
        blank(),
        blank(),
        num(dist.captured_mass()),
        num(out.re),
        num(out.im),
        num(out.norm()),
        num(out.arg()),
        num(fidelity),
    ]);
    for (n, m, p) in dist.iter().filter(|&(_, _, p)| p >= cfg.min_prob) {
        table.push(vec![
            "cell".into(),
            n.to_string(),
            m.to_string(),
            num(spec.q(n)),
            num(spec.p(m)),
            num(p),
            blank(),
            blank(),
            blank(),
            blank(),
            blank(),
            blank(),
        ]);
    }
    emit("channel", &cfg, &table, output.as_deref())
}

pub fn limits(args: LimitsArgs) -> Result<(), Failure> {
    let (cfg, output): (LimitsConfig, Option<PathBuf>) =
        resolve("limits", &args, args.io.config.as_deref(), args.io.output.clone())?;
    let mu = required(cfg.mu, "mu")?;
    if cfg.parties.is_empty() {
        return Err(usage("--parties needs at least one value"));
    }
    let physical = match (cfg.power, cfg.wavelength, cfg.linewidth_hz) {
        (None, None, None) => None,
        (Some(p), Some(w), Some(l)) => Some(PhysicalBeam::new(p, w, l)?),
        _ => return Err(usage("--power, --wavelength and --linewidth-hz go together")),
    };
    let mut table = Table::new(&["mu", "parties", "hl_rad2", "sql_rad2", "split_rad2", "physical_rad2"]);
    for &m in &cfg.parties {
        let phys = physical.as_ref().map(|b| physical_units_mse(b, m)).transpose()?;
        table.push(vec![
            num(mu),
            m.to_string(),
            num(hl_sync_limit(mu, m)?),
            num(sql_sync_limit(mu, m)?),
            num(split_variance_limit(mu, m)?),
            opt(phys),
        ]);
    }
    emit("limits", &cfg, &table, output.as_deref())
}

pub fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let (cfg, output): (SweepConfig, Option<PathBuf>) =
        resolve("sweep", &args, args.io.config.as_deref(), args.io.output.clone())?;
    let axis = required(cfg.axis, "axis")?;
    if cfg.values.is_empty() {
        return Err(usage("sweep axis needs at least one value"));
    }
    let mode = if axis == Axis::Bandwidth {
        if cfg.mode != Mode::Heterodyne {
            return Err(usage("the bandwidth axis requires --mode heterodyne"));
        }
        Mode::Heterodyne
    } else {
        cfg.mode
    };

    // Validate every point before running any of them.
    let points = cfg
        .values
        .iter()
        .enumerate()
        .map(|(index, &value)| {
            let (beam, bandwidth) = match axis {
                Axis::Quality => (beam_from(None, Some(value), cfg.linewidth)?, cfg.bandwidth),
                Axis::Flux => (beam_from(Some(value), None, cfg.linewidth)?, cfg.bandwidth),
                Axis::Linewidth => (beam_from(cfg.flux, cfg.quality, Some(value))?, cfg.bandwidth),
                Axis::Bandwidth => (beam_from(cfg.flux, cfg.quality, cfg.linewidth)?, Some(value)),
            };
            let tracker = tracking_mode(mode, cfg.gain, cfg.gain_rate, bandwidth)?;
            let seed = derive_seed(cfg.seed, &[index as u64]);
            let run = settings(
                cfg.dt,
                cfg.refine,
                cfg.substeps,
                cfg.burn_in_loops,
                cfg.duration_loops,
                None,
                None,
                cfg.trials,
                seed,
            )?;
            Ok((index, value, TrackingConfig::from_settings(beam, tracker, &run)?))
        })
        .collect::<Result<Vec<_>, Failure>>()?;

    let results = with_workers(cfg.workers, || {
        points
            .iter()
            .map(|(_, _, tc)| run_tracking(tc))
            .collect::<laserclock::Result<Vec<_>>>()
    })??;
    let best = results
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.mse_wrapped.total_cmp(&b.1.mse_wrapped))
        .map(|(i, _)| i);

    let axis_name = match axis {
        Axis::Quality => "quality",
        Axis::Flux => "flux",
        Axis::Linewidth => "linewidth",
        Axis::Bandwidth => "bandwidth",
    };
    let mut table = Table::new(&[
        "axis",
        "index",
        "value",
        "seed",
        "mode",
        "flux_per_s",
        "linewidth_rad_per_s",
        "quality_n",
        "bandwidth_per_s",
        "dt_s",
        "trials",
        "mse_wrapped_rad2",
        "mse_unwrapped_rad2",
        "stderr_rad2",
        "predicted_rad2",
        "cycle_slip_rate_per_s",
        "slips_significant",
        "ratio_to_predicted",
        "is_min",
    ]);
    for ((index, value, tc), r) in points.iter().zip(&results) {
        let pred = predicted(tc);
        let mut row = vec![
            axis_name.to_string(),
            index.to_string(),
            num(*value),
            tc.seed.to_string(),
            mode_name(&tc.mode).to_string(),
            num(tc.beam.flux()),
            num(tc.beam.linewidth()),
            opt(tc.beam.quality()),
            opt(tc.bandwidth()),
            num(tc.dt),
            tc.trials.to_string(),
        ];
        row.extend(result_columns(r, pred));
        row.push(opt(pred.map(|p| r.mse_wrapped / p)));
        row.push(flag(best == Some(*index)));
        table.push(row);
    }
    emit("sweep", &cfg, &table, output.as_deref())
}
