use std::f64::consts::{FRAC_PI_2, PI};

use laserclock::fock::wrap_angle;
use laserclock::tracking::*;
use proptest::prelude::*;

fn beam(n: f64) -> BeamParams {
    BeamParams::from_quality(n, 1.0).unwrap()
}

fn settings(trials: usize, seed: u64) -> RunSettings {
    RunSettings {
        trials,
        seed,
        ..RunSettings::default()
    }
}

fn welch_t(a: &[f64], b: &[f64]) -> f64 {
    let stats = |x: &[f64]| {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let v = x.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v / n)
    };
    let (ma, va) = stats(a);
    let (mb, vb) = stats(b);
    (ma - mb) / (va + vb).sqrt()
}

#[test]
fn diffusion_ensemble_statistics() {
    let b = BeamParams::new(1.0, 0.01).unwrap();
    let dt = 0.1;
    let trials = 10_000;
    let mut phases = Vec::with_capacity(trials);
    for trial in 0..trials {
        let mut noise = NoiseStream::new(derive_seed(42, &[trial as u64]), 1);
        let mut s = TrackerState::locked(0.0, 1.0);
        for _ in 0..1000 {
            s = step_phase(s, &b, &noise.next_step(dt));
        }
        phases.push(s.phi_true);
    }
    let n = trials as f64;
    let mean = phases.iter().sum::<f64>() / n;
    let var = phases.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((var - 1.0).abs() < 0.05, "{var}");
    let (c, s) = phases.iter().fold((0.0, 0.0), |(c, s), p| (c + p.cos(), s + p.sin()));
    let coherence = (c * c + s * s).sqrt() / n;
    assert!((coherence / (-0.5f64).exp() - 1.0).abs() < 0.03, "{coherence}");
}

#[test]
fn adaptive_mse_scales_as_inverse_root_n() {
    let ns = [1e2, 1e3, 1e4];
    let logs: Vec<(f64, f64)> = ns
        .iter()
        .map(|&n| {
            let cfg = TrackingConfig::from_settings(beam(n), TrackingMode::ADAPTIVE, &settings(200, 5)).unwrap();
            let r = run_tracking(&cfg).unwrap();
            (n.ln(), r.mse_wrapped.ln())
        })
        .collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / 3.0;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / 3.0;
    let slope = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / logs.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope + 0.5).abs() < 0.05, "{slope}");
}

#[test]
fn evolving_variance_matches_stationary_point() {
    for n in [1e3, 1e4] {
        let b = beam(n);
        let mut cfg =
            TrackingConfig::from_settings(b, TrackingMode::Adaptive(AdaptiveGain::Evolving), &settings(200, 9))
                .unwrap();
        cfg.initial_variance = Some(1.0);
        let r = run_tracking(&cfg).unwrap();
        let s = b.stationary_variance().unwrap();
        assert!((r.mse_wrapped / s - 1.0).abs() < 0.1, "N={n}: {}", r.mse_wrapped / s);
    }
}

#[test]
fn phase_offset_does_not_matter() {
    let b = beam(1e3);
    let base = TrackingConfig::from_settings(b, TrackingMode::ADAPTIVE, &settings(200, 1)).unwrap();
    let shifted = TrackingConfig {
        initial_phase: 2.0,
        seed: 2,
        ..base
    };
    let a = run_tracking(&base).unwrap();
    let c = run_tracking(&shifted).unwrap();
    // Two-sided test at 1% significance.
    let t = welch_t(&a.per_trial_mse, &c.per_trial_mse);
    assert!(t.abs() < 2.576, "t = {t}");

    // With shared noise the runs differ only by rounding.
    let same_noise = TrackingConfig {
        initial_phase: 2.0,
        ..base
    };
    let d = run_tracking(&same_noise).unwrap();
    assert!((d.mse_wrapped / a.mse_wrapped - 1.0).abs() < 1e-6);
}

#[test]
fn only_the_quality_factor_matters() {
    let slow = BeamParams::new(1e3, 1.0).unwrap();
    let fast = BeamParams::new(1e4, 10.0).unwrap();
    for mode in [TrackingMode::ADAPTIVE, TrackingMode::HETERODYNE] {
        let a = run_tracking(&TrackingConfig::from_settings(slow, mode, &settings(200, 3)).unwrap()).unwrap();
        let cfg = TrackingConfig::from_settings(fast, mode, &settings(200, 4)).unwrap();
        assert!(
            (cfg.dt * 10.0 / TrackingConfig::from_settings(slow, mode, &settings(200, 3)).unwrap().dt - 1.0).abs()
                < 1e-12
        );
        let b = run_tracking(&cfg).unwrap();
        let z = (a.mse_wrapped - b.mse_wrapped) / (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        assert!(z.abs() < 3.0, "{mode:?}: z = {z}");
    }
}

#[test]
fn shot_noise_only_error_shrinks_with_gain() {
    let b = BeamParams::new(100.0, 0.0).unwrap();
    let mut last = f64::INFINITY;
    for rate in [10.0, 1.0, 0.1] {
        let tau = 1.0 / rate;
        let cfg = TrackingConfig {
            beam: b,
            mode: TrackingMode::Adaptive(AdaptiveGain::Fixed(rate)),
            dt: 1e-2 * tau,
            duration: 40.0 * tau,
            burn_in: 5.0 * tau,
            trials: 200,
            seed: 11,
            substeps: 1,
            initial_phase: 0.0,
            initial_variance: None,
        };
        let r = run_tracking(&cfg).unwrap();
        let expected = adaptive_mse_at(&b, rate);
        assert!(
            (r.mse_wrapped / expected - 1.0).abs() < 0.2,
            "rate {rate}: {} vs {expected}",
            r.mse_wrapped
        );
        assert!(r.mse_wrapped < last);
        last = r.mse_wrapped;
    }
}

#[test]
fn static_phase_heterodyne_error_vanishes_with_bandwidth() {
    let b = BeamParams::new(100.0, 0.0).unwrap();
    let mut last = f64::INFINITY;
    for bw in [10.0, 1.0, 0.1] {
        let r = heterodyne_track(b, 1e-2 / bw, 40.0 / bw, 200, 13, bw).unwrap();
        assert!((r.mse_wrapped / heterodyne_mse_at(&b, bw) - 1.0).abs() < 0.2);
        assert!(r.mse_wrapped < last);
        last = r.mse_wrapped;
    }
    assert!(last < 1e-3);
}

#[test]
fn heterodyne_optimum_sits_at_predicted_bandwidth() {
    let b = beam(1e4);
    let opt = b.optimal_bandwidth().unwrap();
    let sweep = sweep_bandwidth(b, &log_grid(opt / 4.0, opt * 4.0, 9), &settings(200, 21)).unwrap();
    for p in &sweep.points {
        let expected = heterodyne_mse_at(&b, p.bandwidth);
        assert!(
            (p.result.mse_wrapped / expected - 1.0).abs() < 0.1,
            "{}: {}",
            p.bandwidth,
            p.result.mse_wrapped / expected
        );
    }
    let fitted = sweep.fitted_optimum.unwrap();
    assert!(
        (fitted / opt).ln().abs() < 0.5f64.ln().abs(),
        "fitted {fitted} vs {opt}"
    );
    let limit = heterodyne_mse_limit(&b).unwrap();
    assert!((sweep.min_mse() / limit - 1.0).abs() < 0.15);
}

#[test]
fn reruns_are_bitwise_identical_for_any_worker_count() {
    let cfg = TrackingConfig::from_settings(beam(1e3), TrackingMode::ADAPTIVE, &settings(120, 77)).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_tracking(&cfg).unwrap())
    };
    let one = run(1);
    let many = run(5);
    assert_eq!(one, many);
    assert_eq!(one.mse_wrapped.to_bits(), run(2).mse_wrapped.to_bits());
}

#[test]
fn halving_dt_with_shared_noise_barely_moves_the_result() {
    for mode in [TrackingMode::ADAPTIVE, TrackingMode::HETERODYNE] {
        let coarse = RunSettings {
            substeps: 2,
            ..settings(200, 8)
        };
        let fine = RunSettings {
            refine: 2,
            ..settings(200, 8)
        };
        let a = run_tracking(&TrackingConfig::from_settings(beam(1e4), mode, &coarse).unwrap()).unwrap();
        let b = run_tracking(&TrackingConfig::from_settings(beam(1e4), mode, &fine).unwrap()).unwrap();
        assert!((a.mse_wrapped / b.mse_wrapped - 1.0).abs() < 0.02);
    }
}

#[test]
fn low_quality_beam_reports_slips() {
    let cfg = TrackingConfig::from_settings(beam(2.0), TrackingMode::ADAPTIVE, &settings(100, 4)).unwrap();
    let r = run_tracking(&cfg).unwrap();
    assert!(r.cycle_slip_rate > 0.0);
    assert!(r.mse_unwrapped >= r.mse_wrapped);
    assert!(r.slips_significant());
    assert!(r.mse_wrapped <= PI * PI / 3.0 + 0.1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn linearized_photocurrent(phase in -PI..PI, e in -1e-3f64..1e-3, flux in 1.0f64..1e6) {
        let b = BeamParams::new(flux, 1.0).unwrap();
        let dt = 1e-4;
        let mut s = TrackerState::locked(phase, 0.1);
        s.lo_phase = phase + FRAC_PI_2 - e;
        let i = photocurrent_increment(&s, &b, dt, &NoiseStep::ZERO);
        let lin = 2.0 * b.amplitude() * e * dt;
        prop_assert!((i - lin).abs() <= 1e-6 * lin.abs() + 1e-15);
    }

    #[test]
    fn adaptive_step_keeps_oscillator_at_null_point(
        phase in -10.0f64..10.0,
        offset in -0.5f64..0.5,
        w in prop::array::uniform3(-0.1f64..0.1),
        n in 10.0f64..1e5,
    ) {
        let b = beam(n);
        let mut s = TrackerState::locked(phase, b.stationary_variance().unwrap());
        s.phi_est += offset;
        s.lo_phase = s.phi_est + FRAC_PI_2;
        let noise = NoiseStep { d_w_phase: w[0], d_w_shot: [w[1], w[2]] };
        for gain in [AdaptiveGain::Stationary, AdaptiveGain::Evolving] {
            let next = adaptive_step(s, &b, b.auto_dt().unwrap(), &noise, gain);
            prop_assert!((next.lo_phase - next.phi_est - FRAC_PI_2).abs() < 1e-12);
            prop_assert!(next.sigma2 > 0.0);
            prop_assert!((next.phi_true - phase - w[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn variance_ode_moves_toward_stationary_point(n in 10.0f64..1e6, factor in 0.1f64..10.0) {
        let b = beam(n);
        let s = b.stationary_variance().unwrap();
        let v = s * factor;
        let next = variance_ode_step(v, &b, 1e-3 * b.auto_dt().unwrap());
        prop_assert!((next - s).abs() <= (v - s).abs() + 1e-18);
    }

    #[test]
    fn wrapped_error_is_in_range(x in -100.0f64..100.0) {
        let w = wrap_angle(x);
        prop_assert!(w > -PI && w <= PI);
        prop_assert!(((x - w) / (2.0 * PI)).fract().abs() < 1e-9 || ((x - w) / (2.0 * PI)).fract().abs() > 1.0 - 1e-9);
    }
}
