//! Truncated Fock-space states and canonical phase statistics.
//!
//! States are stored as amplitudes (pure) or dense matrices (mixed) over the
//! number basis `|0>, ..., |truncation>`. The canonical phase distribution is
//!
//! ```text
//! P(θ) = (1/2π) Σ_{n,m} ρ_{n,m} e^{-i(n-m)θ}
//! ```
//!
//! evaluated on a uniform grid over (-π, π] and integrated with the periodic
//! trapezoid rule.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, require_finite, require_positive, Error, Result};

/// Default number of grid points for phase distributions.
pub const DEFAULT_GRID_SIZE: usize = 4096;

/// Smallest grid accepted by [`canonical_phase_distribution`].
pub const MIN_GRID_SIZE: usize = 256;

/// Norm deficit above which a state is rejected as unnormalized.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// Wraps an angle into (-π, π].
pub fn wrap_angle(x: f64) -> f64 {
    let y = x - 2.0 * PI * (x / (2.0 * PI)).round();
    if y <= -PI {
        y + 2.0 * PI
    } else if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Truncation large enough that the Poisson(μ) tail is below ~1e-12.
pub fn default_truncation(mu: f64) -> usize {
    (mu + 10.0 * mu.sqrt() + 10.0).ceil() as usize
}

/// `ln(n!)` for `n = 0..=max`.
pub(crate) fn ln_factorials(max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(max + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=max {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Poisson probabilities `e^{-μ} μ^n / n!` for `n = 0..=max`, computed in log space.
pub fn poisson_pmf(mu: f64, max: usize) -> Vec<f64> {
    if mu == 0.0 {
        let mut p = vec![0.0; max + 1];
        p[0] = 1.0;
        return p;
    }
    let lnf = ln_factorials(max);
    let ln_mu = mu.ln();
    (0..=max).map(|n| (-mu + n as f64 * ln_mu - lnf[n]).exp()).collect()
}

/// Poisson mass strictly above `max`.
pub fn poisson_tail(mu: f64, max: usize) -> f64 {
    // Sum the tail directly so that tiny masses are not lost to cancellation.
    if mu == 0.0 {
        return 0.0;
    }
    let lnf_start = ln_factorials(max + 1)[max + 1];
    let mut log_term = -mu + (max + 1) as f64 * mu.ln() - lnf_start;
    let mut total = 0.0;
    let mut n = max + 1;
    loop {
        let term = log_term.exp();
        total += term;
        if (n as f64) > mu && term < total * 1e-17 {
            break;
        }
        n += 1;
        log_term += mu.ln() - (n as f64).ln();
        if n > max + 100_000 {
            break;
        }
    }
    total
}

/// Pure state over the truncated number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    amplitudes: Vec<Complex64>,
}

impl FockVector {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(invalid("truncation", "must be at least 1"));
        }
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(invalid("amplitudes", "must be finite"));
        }
        Ok(Self { amplitudes })
    }

    /// Highest retained number state.
    pub fn truncation(&self) -> usize {
        self.amplitudes.len() - 1
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(n, a)| n as f64 * a.norm_sqr())
            .sum()
    }

    /// Applies the phase shift `a_n -> a_n e^{inχ}`.
    pub fn rotated(&self, chi: f64) -> Self {
        let amplitudes = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(n, a)| a * Complex64::from_polar(1.0, n as f64 * chi))
            .collect();
        Self { amplitudes }
    }

    pub fn to_density(&self) -> DensityOperator {
        let d = self.amplitudes.len();
        let matrix = DMatrix::from_fn(d, d, |n, m| self.amplitudes[n] * self.amplitudes[m].conj());
        DensityOperator { matrix }
    }
}

/// Coherent state `|α>` truncated at `truncation`.
pub fn coherent_state(alpha: Complex64, truncation: usize) -> Result<FockVector> {
    require_finite("alpha", alpha.re)?;
    require_finite("alpha", alpha.im)?;
    if truncation < 1 {
        return Err(invalid("truncation", "must be at least 1"));
    }
    let mu = alpha.norm_sqr();
    if mu == 0.0 {
        return number_state(0, truncation);
    }
    let lnf = ln_factorials(truncation);
    let ln_r = alpha.norm().ln();
    let arg = alpha.arg();
    let amplitudes = (0..=truncation)
        .map(|n| {
            let log_mag = -0.5 * mu + n as f64 * ln_r - 0.5 * lnf[n];
            Complex64::from_polar(log_mag.exp(), n as f64 * arg)
        })
        .collect();
    FockVector::new(amplitudes)
}

/// Number state `|n>`.
pub fn number_state(n: usize, truncation: usize) -> Result<FockVector> {
    if truncation < 1 {
        return Err(invalid("truncation", "must be at least 1"));
    }
    if n > truncation {
        return Err(invalid("n", format!("{n} exceeds truncation {truncation}")));
    }
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); truncation + 1];
    amplitudes[n] = Complex64::new(1.0, 0.0);
    FockVector::new(amplitudes)
}

/// Mixed state over the truncated number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: DMatrix<Complex64>,
}

impl DensityOperator {
    /// Wraps a square matrix, checking Hermiticity to 1e-12.
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() < 2 {
            return Err(invalid("matrix", "must be square with dimension at least 2"));
        }
        let d = matrix.nrows();
        for n in 0..d {
            for m in n..d {
                if (matrix[(n, m)] - matrix[(m, n)].conj()).norm() > 1e-12 {
                    return Err(invalid("matrix", format!("not Hermitian at ({n}, {m})")));
                }
            }
        }
        Ok(Self { matrix })
    }

    /// Diagonal state with the given number-state populations.
    pub fn from_populations(populations: &[f64]) -> Result<Self> {
        let d = populations.len();
        if d < 2 {
            return Err(invalid("populations", "need at least two levels"));
        }
        let mut matrix = DMatrix::zeros(d, d);
        for (n, p) in populations.iter().enumerate() {
            matrix[(n, n)] = Complex64::new(*p, 0.0);
        }
        Ok(Self { matrix })
    }

    pub fn truncation(&self) -> usize {
        self.matrix.nrows() - 1
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.populations().iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_positive_semidefinite(&self) -> bool {
        self.min_eigenvalue() >= -1e-9
    }

    /// Sums `C_d = Σ_n ρ_{n+d, n}` for `d = 0..=truncation`.
    fn diagonal_sums(&self) -> Vec<Complex64> {
        let d = self.matrix.nrows();
        (0..d)
            .map(|k| (0..d - k).map(|n| self.matrix[(n + k, n)]).sum())
            .collect()
    }
}

/// Phase probability density on a uniform grid over (-π, π].
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDistribution {
    grid: Vec<f64>,
    density: Vec<f64>,
}

impl PhaseDistribution {
    /// Builds a distribution from density samples on the standard grid
    /// `θ_j = -π + 2π(j+1)/G`.
    pub fn from_density(density: Vec<f64>) -> Result<Self> {
        let g = density.len();
        if g < MIN_GRID_SIZE {
            return Err(invalid("grid_size", format!("must be at least {MIN_GRID_SIZE}")));
        }
        if density.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(invalid("density", "must be finite and nonnegative"));
        }
        let dist = Self {
            grid: phase_grid(g),
            density,
        };
        let deficit = (dist.integral() - 1.0).abs();
        if deficit > NORM_TOLERANCE {
            return Err(Error::Unnormalized { deficit });
        }
        Ok(dist)
    }

    /// Uniform density `1/2π`.
    pub fn uniform(grid_size: usize) -> Result<Self> {
        Self::from_density(vec![1.0 / (2.0 * PI); grid_size])
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn step(&self) -> f64 {
        2.0 * PI / self.grid.len() as f64
    }

    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.step()
    }

    /// Grid angle of the largest density sample.
    pub fn mode(&self) -> f64 {
        let (j, _) =
            self.density.iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |best, (j, &p)| if p > best.1 { (j, p) } else { best },
            );
        self.grid[j]
    }
}

fn phase_grid(g: usize) -> Vec<f64> {
    (0..g).map(|j| -PI + 2.0 * PI * (j + 1) as f64 / g as f64).collect()
}

fn distribution_from_sums(sums: &[Complex64], grid_size: usize) -> Result<PhaseDistribution> {
    if grid_size < MIN_GRID_SIZE {
        return Err(invalid("grid_size", format!("must be at least {MIN_GRID_SIZE}")));
    }
    let grid = phase_grid(grid_size);
    let density = grid
        .iter()
        .map(|&theta| {
            // Σ_d C_d e^{-idθ} + c.c. via a running phasor.
            let step = Complex64::from_polar(1.0, -theta);
            let mut phasor = step;
            let mut acc = 0.0;
            for c in &sums[1..] {
                acc += (c * phasor).re;
                phasor *= step;
            }
            ((sums[0].re + 2.0 * acc) / (2.0 * PI)).max(0.0)
        })
        .collect();
    PhaseDistribution::from_density(density)
}

/// Canonical phase distribution of a pure state.
pub fn canonical_phase_distribution(state: &FockVector, grid_size: usize) -> Result<PhaseDistribution> {
    let deficit = (1.0 - state.norm_sqr()).abs();
    if deficit > NORM_TOLERANCE {
        return Err(Error::Unnormalized { deficit });
    }
    let a = state.amplitudes();
    let d = a.len();
    let sums: Vec<Complex64> = (0..d)
        .map(|k| (0..d - k).map(|m| a[m + k] * a[m].conj()).sum())
        .collect();
    distribution_from_sums(&sums, grid_size)
}

/// Canonical phase distribution of a mixed state.
pub fn canonical_phase_distribution_mixed(rho: &DensityOperator, grid_size: usize) -> Result<PhaseDistribution> {
    let deficit = (1.0 - rho.trace()).abs();
    if deficit > NORM_TOLERANCE {
        return Err(Error::Unnormalized { deficit });
    }
    distribution_from_sums(&rho.diagonal_sums(), grid_size)
}

/// Wrapped second moment `∫ wrap(θ - reference)² P(θ) dθ`.
pub fn phase_variance(dist: &PhaseDistribution, reference: f64) -> f64 {
    let h = dist.step();
    dist.grid
        .iter()
        .zip(&dist.density)
        .map(|(&theta, &p)| wrap_angle(theta - reference).powi(2) * p)
        .sum::<f64>()
        * h
}

/// Wrapped phase variance of the coherent state `|α>` about `arg α`, using the
/// default truncation for `|α|²`.
pub fn coherent_phase_variance(alpha: Complex64, grid_size: usize) -> Result<f64> {
    let state = coherent_state(alpha, default_truncation(alpha.norm_sqr()).max(1))?;
    let dist = canonical_phase_distribution(&state, grid_size)?;
    Ok(phase_variance(&dist, alpha.arg()))
}

/// Phase variance `(3 - 2/M) / 4μ` of each of `M` optimal clones of `|√μ>`.
pub fn clone_phase_variance(mu: f64, copies: usize) -> Result<f64> {
    require_positive("mu", mu)?;
    if copies < 1 {
        return Err(invalid("copies", "must be at least 1"));
    }
    Ok((3.0 - 2.0 / copies as f64) / (4.0 * mu))
}
