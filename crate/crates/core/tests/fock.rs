use std::f64::consts::PI;

use laserclock::fock::*;
use laserclock::num_complex::Complex64;
use proptest::prelude::*;

const GRID: usize = 512;

fn random_state(re: &[f64], im: &[f64]) -> FockVector {
    let amps: Vec<Complex64> = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    FockVector::new(amps.into_iter().map(|a| a / norm).collect()).unwrap()
}

fn cross_correlation_peak(a: &[f64], b: &[f64]) -> usize {
    let g = a.len();
    (0..g)
        .map(|s| (s, (0..g).map(|j| a[j] * b[(j + s) % g]).sum::<f64>()))
        .fold(
            (0, f64::NEG_INFINITY),
            |best, (s, c)| if c > best.1 { (s, c) } else { best },
        )
        .0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn coherent_populations_are_poisson(modulus in 0.0f64..7.0, phase in -PI..PI) {
        let alpha = Complex64::from_polar(modulus, phase);
        let mu = alpha.norm_sqr();
        let t = default_truncation(mu);
        let state = coherent_state(alpha, t).unwrap();
        let pmf = poisson_pmf(mu, t);
        for (p, q) in state.probabilities().iter().zip(&pmf) {
            prop_assert!((p - q).abs() <= 1e-12);
        }
    }

    #[test]
    fn rotation_translates_phase_distribution(
        re in prop::collection::vec(-1.0f64..1.0, 6..12),
        im in prop::collection::vec(-1.0f64..1.0, 12),
        shift in 0usize..GRID,
    ) {
        prop_assume!(re.iter().any(|x| x.abs() > 0.1));
        let state = random_state(&re, &im[..re.len()]);
        let chi = 2.0 * PI * shift as f64 / GRID as f64;
        let base = canonical_phase_distribution(&state, GRID).unwrap();
        let rotated = canonical_phase_distribution(&state.rotated(chi), GRID).unwrap();
        for j in 0..GRID {
            let moved = rotated.density()[(j + shift) % GRID];
            prop_assert!((moved - base.density()[j]).abs() < 1e-12);
        }
        // Ties are possible for a flat distribution, so compare the shapes at the peak.
        let peak = cross_correlation_peak(base.density(), rotated.density());
        let at = |s: usize| (0..GRID).map(|j| base.density()[j] * rotated.density()[(j + s) % GRID]).sum::<f64>();
        prop_assert!((at(peak) - at(shift)).abs() <= 1e-9 * at(peak).abs().max(1.0));
    }

    #[test]
    fn distribution_is_normalized_and_nonnegative(
        re in prop::collection::vec(-1.0f64..1.0, 4..10),
        im in prop::collection::vec(-1.0f64..1.0, 10),
    ) {
        prop_assume!(re.iter().any(|x| x.abs() > 0.1));
        let dist = canonical_phase_distribution(&random_state(&re, &im[..re.len()]), GRID).unwrap();
        prop_assert!((dist.integral() - 1.0).abs() < 1e-10);
        prop_assert!(dist.density().iter().all(|&p| p >= 0.0));
        prop_assert!(phase_variance(&dist, 0.3) <= PI * PI + 1e-9);
    }

    #[test]
    fn splitting_law(parties in 1usize..=4, per_party in 25.0f64..100.0) {
        let mu = per_party * parties as f64;
        let whole = coherent_phase_variance(Complex64::new(mu.sqrt(), 0.0), DEFAULT_GRID_SIZE).unwrap();
        let part = coherent_phase_variance(Complex64::new(per_party.sqrt(), 0.0), DEFAULT_GRID_SIZE).unwrap();
        prop_assert!((part / whole / parties as f64 - 1.0).abs() < 0.05);
    }
}

#[test]
fn coherent_variance_converges_to_quarter_inverse_mu() {
    let rel = |mu: f64| {
        let v = coherent_phase_variance(Complex64::new(mu.sqrt(), 0.0), DEFAULT_GRID_SIZE).unwrap();
        (4.0 * mu * v - 1.0).abs()
    };
    let (e25, e100, e400) = (rel(25.0), rel(100.0), rel(400.0));
    assert!(e25 < 0.05, "{e25}");
    assert!(e400 < 0.01, "{e400}");
    assert!(e25 > e100 && e100 > e400);
}

#[test]
fn frozen_variance_values() {
    // Independent oracle: direct sum of the canonical distribution on 2^16 points.
    let cases = [(25.0, 1.0212), (100.0, 1.00507), (400.0, 1.00125)];
    for (mu, scaled) in cases {
        let v = coherent_phase_variance(Complex64::new(f64::sqrt(mu), 0.0), DEFAULT_GRID_SIZE).unwrap();
        assert!((4.0 * mu * v / scaled - 1.0).abs() < 5e-4, "mu={mu}: {}", 4.0 * mu * v);
    }
}

#[test]
fn variance_is_about_the_mean_phase() {
    let alpha = Complex64::from_polar(5.0, 2.5);
    let v = coherent_phase_variance(alpha, DEFAULT_GRID_SIZE).unwrap();
    let real = coherent_phase_variance(Complex64::new(5.0, 0.0), DEFAULT_GRID_SIZE).unwrap();
    assert!((v - real).abs() < 1e-6);
}

#[test]
fn vacuum_has_no_phase() {
    let dist = canonical_phase_distribution(&coherent_state(Complex64::new(0.0, 0.0), 4).unwrap(), GRID).unwrap();
    assert!(dist.density().iter().all(|&p| (p - 0.5 / PI).abs() < 1e-14));
    assert!((phase_variance(&dist, 0.0) - PI * PI / 3.0).abs() < 1e-3);
}

#[test]
fn mixed_state_of_rotations_broadens() {
    let pure = coherent_state(Complex64::new(4.0, 0.0), 60).unwrap();
    let a = pure.rotated(0.2).to_density();
    let b = pure.rotated(-0.2).to_density();
    let rho = laserclock::fock::DensityOperator::new((a.matrix() + b.matrix()) * Complex64::new(0.5, 0.0)).unwrap();
    let v_mix = phase_variance(
        &canonical_phase_distribution_mixed(&rho, DEFAULT_GRID_SIZE).unwrap(),
        0.0,
    );
    let v_pure = phase_variance(&canonical_phase_distribution(&pure, DEFAULT_GRID_SIZE).unwrap(), 0.0);
    // Mixture of two shifted copies adds the spread of the shifts.
    assert!((v_mix - v_pure - 0.04).abs() < 2e-3, "{v_mix} {v_pure}");
}
