//! Master-equation dynamics of a single laser mode with linear damping and an
//! optional phase-noiseless gain process.
//!
//! The generator is
//!
//! ```text
//! ρ̇ = κμ[E† ρ E − ρ] + κ(a ρ a† − ½{a†a, ρ}) − iω[a†a, ρ]
//! ```
//!
//! where `E† = a†(aa†)^{-1/2}` is the unit-weight raising operator
//! `|n> -> |n+1>`. Every term maps `ρ_{n,m}` onto elements with the same
//! offset `m − n`, so the dynamics splits into independent sectors, each a
//! small real matrix acting on the vector `(ρ_{0,k}, ρ_{1,1+k}, ...)`.
//!
//! In a truncated basis the raising jump out of the top level is removed and
//! the `−ρ` term becomes `−½{E E†, ρ}`, which keeps the truncated generator a
//! trace-preserving Lindblad form.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, require_finite, require_positive, Error, Result};
use crate::fock::{
    canonical_phase_distribution_mixed, coherent_state, default_truncation, phase_variance, poisson_tail,
    DensityOperator,
};

/// Largest truncation accepted by the dense solvers.
pub const MAX_TRUNCATION: usize = 512;

/// Largest stationary Poisson tail mass that may fall outside the truncation.
pub const STATIONARY_TAIL_LIMIT: f64 = 1e-9;

/// Largest RMS residual of the log-linear coherence fit accepted as exponential.
pub const DECAY_FIT_RESIDUAL_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainKind {
    /// `κμ[E† ρ E − ρ]`, which restores the photon number without adding phase noise.
    Noiseless,
    /// Pure damping.
    None,
}

/// Source laser description. Rates in 1/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserParams {
    pub kappa: f64,
    pub mu: f64,
    pub gain: GainKind,
    /// Optical angular frequency (rad/s). Only used for unit conversion and
    /// when a sector is explicitly moved out of the rotating frame.
    pub omega: f64,
}

impl LaserParams {
    pub fn new(kappa: f64, mu: f64, gain: GainKind) -> Result<Self> {
        let p = Self {
            kappa,
            mu,
            gain,
            omega: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("kappa", self.kappa)?;
        require_positive("mu", self.mu)?;
        require_finite("omega", self.omega)
    }

    /// Output power in photons per second, `κμ`.
    pub fn photon_flux(&self) -> f64 {
        self.kappa * self.mu
    }
}

/// Standard-quantum-limit linewidth `κ/2μ`.
pub fn sql_linewidth(params: &LaserParams) -> f64 {
    params.kappa / (2.0 * params.mu)
}

/// Heisenberg-limit linewidth `κ/4μ` of the noiseless-gain laser.
pub fn hl_linewidth(params: &LaserParams) -> f64 {
    params.kappa / (4.0 * params.mu)
}

/// Generator restricted to the elements `ρ_{n,n+k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiouvillianSector {
    offset: usize,
    truncation: usize,
    rates: DMatrix<f64>,
    /// Imaginary diagonal `+ωk` from free evolution; zero in the rotating frame.
    rotation: f64,
}

impl LiouvillianSector {
    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn dim(&self) -> usize {
        self.rates.nrows()
    }

    /// Real part of the generator.
    pub fn rates(&self) -> &DMatrix<f64> {
        &self.rates
    }

    /// Adds the free-evolution term `−iω[a†a, ρ]`, i.e. leaves the rotating frame.
    /// On `ρ_{n,n+k}` this is `+iωk`; the conjugate elements carry `−iωk`.
    pub fn with_free_evolution(mut self, omega: f64) -> Self {
        self.rotation = omega * self.offset as f64;
        self
    }

    pub fn matrix(&self) -> DMatrix<Complex64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| {
            let im = if i == j { self.rotation } else { 0.0 };
            Complex64::new(self.rates[(i, j)], im)
        })
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        let shift = Complex64::new(0.0, self.rotation);
        self.rates
            .clone()
            .complex_eigenvalues()
            .iter()
            .map(|z| z + shift)
            .collect()
    }

    /// Eigenvalue whose real part is smallest in magnitude.
    pub fn slowest_eigenvalue(&self) -> Complex64 {
        self.eigenvalues()
            .into_iter()
            .min_by(|a, b| a.re.abs().total_cmp(&b.re.abs()))
            .expect("sector is never empty")
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.rates.column_iter().map(|c| c.sum()).collect()
    }

    fn rk4_step(&self, h: f64) -> f64 {
        // Gershgorin bound on the spectral radius keeps RK4 inside its stability region.
        let radius = self
            .rates
            .row_iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
            + self.rotation.abs();
        if radius > 0.0 {
            h.min(0.5 / radius)
        } else {
            h
        }
    }

    /// Integrates `v̇ = L v` with classical RK4 up to time `t`.
    pub fn evolve(&self, v: &[Complex64], t: f64) -> Vec<Complex64> {
        assert_eq!(v.len(), self.dim(), "vector does not match sector dimension");
        if t <= 0.0 {
            return v.to_vec();
        }
        let h_max = self.rk4_step(t);
        let steps = (t / h_max).ceil() as usize;
        let h = t / steps as f64;
        let m = self.matrix();
        let mut x = DVector::from_column_slice(v);
        for _ in 0..steps {
            let k1 = &m * &x;
            let k2 = &m * (&x + &k1 * Complex64::from(0.5 * h));
            let k3 = &m * (&x + &k2 * Complex64::from(0.5 * h));
            let k4 = &m * (&x + &k3 * Complex64::from(h));
            x += (k1 + k2 * Complex64::from(2.0) + k3 * Complex64::from(2.0) + k4) * Complex64::from(h / 6.0);
        }
        x.iter().copied().collect()
    }
}

fn check_truncation(params: &LaserParams, truncation: usize) -> Result<()> {
    if truncation < 1 {
        return Err(invalid("truncation", "must be at least 1"));
    }
    if truncation > MAX_TRUNCATION {
        return Err(invalid(
            "truncation",
            format!("{truncation} exceeds the dense-solver cap {MAX_TRUNCATION}"),
        ));
    }
    if params.gain == GainKind::Noiseless {
        let tail_mass = poisson_tail(params.mu, truncation);
        if tail_mass > STATIONARY_TAIL_LIMIT {
            return Err(Error::TruncationTooSmall {
                truncation,
                tail_mass,
                limit: STATIONARY_TAIL_LIMIT,
            });
        }
    }
    Ok(())
}

/// Builds the rotating-frame generator acting on `ρ_{n,n+k}`, `n = 0..=truncation−k`.
pub fn build_liouvillian_sector(
    params: &LaserParams,
    sector_offset: usize,
    truncation: usize,
) -> Result<LiouvillianSector> {
    params.validate()?;
    check_truncation(params, truncation)?;
    if sector_offset > truncation {
        return Err(invalid(
            "sector_offset",
            format!("{sector_offset} exceeds truncation {truncation}"),
        ));
    }
    let k = sector_offset;
    let d = truncation + 1 - k;
    let kappa = params.kappa;
    let mut rates = DMatrix::zeros(d, d);
    for n in 0..d {
        let m = n + k;
        // a ρ a† feeds ρ_{n,m} from ρ_{n+1,m+1}; the anticommutator damps at (n+m)/2.
        rates[(n, n)] -= 0.5 * kappa * (n + m) as f64;
        if n + 1 < d {
            rates[(n, n + 1)] += kappa * (((n + 1) * (m + 1)) as f64).sqrt();
        }
        if params.gain == GainKind::Noiseless {
            let g = kappa * params.mu;
            if n >= 1 {
                rates[(n, n - 1)] += g;
            }
            let below_top = (n < truncation) as u8 + (m < truncation) as u8;
            rates[(n, n)] -= 0.5 * g * below_top as f64;
        }
    }
    Ok(LiouvillianSector {
        offset: k,
        truncation,
        rates,
        rotation: 0.0,
    })
}

/// Full superoperator on vec(ρ) (row-major index `n·(T+1) + m`), assembled
/// from operator products rather than from the sector formulas.
pub fn full_liouvillian(params: &LaserParams, truncation: usize) -> Result<DMatrix<Complex64>> {
    params.validate()?;
    if !(1..=30).contains(&truncation) {
        return Err(invalid("truncation", "full superoperator limited to 1..=30"));
    }
    let d = truncation + 1;
    let zero = Complex64::new(0.0, 0.0);
    let mut a = DMatrix::from_element(d, d, zero);
    let mut raise = DMatrix::from_element(d, d, zero);
    let mut number = DMatrix::from_element(d, d, zero);
    for n in 0..d {
        number[(n, n)] = Complex64::from(n as f64);
        if n + 1 < d {
            a[(n, n + 1)] = Complex64::from(((n + 1) as f64).sqrt());
        }
    }
    // E† = a† (a a†)^{-1/2}, built from the operators themselves.
    let ad = a.adjoint();
    let aad = &a * &ad;
    let inv_sqrt = DMatrix::from_fn(d, d, |i, j| {
        if i == j && aad[(i, i)].re > 0.0 {
            Complex64::from(1.0 / aad[(i, i)].re.sqrt())
        } else {
            zero
        }
    });
    raise.copy_from(&(&ad * &inv_sqrt));

    let dissipator = |jump: &DMatrix<Complex64>, rho: &DMatrix<Complex64>| {
        let jd = jump.adjoint();
        let jdj = &jd * jump;
        jump * rho * &jd - (&jdj * rho + rho * &jdj) * Complex64::from(0.5)
    };

    let dim = d * d;
    let mut sup = DMatrix::from_element(dim, dim, zero);
    for n in 0..d {
        for m in 0..d {
            let mut basis = DMatrix::from_element(d, d, zero);
            basis[(n, m)] = Complex64::from(1.0);
            let mut out = dissipator(&a, &basis) * Complex64::from(params.kappa);
            if params.gain == GainKind::Noiseless {
                out += dissipator(&raise, &basis) * Complex64::from(params.kappa * params.mu);
            }
            out -= (&number * &basis - &basis * &number) * Complex64::new(0.0, params.omega);
            let col = n * d + m;
            for i in 0..d {
                for j in 0..d {
                    sup[(i * d + j, col)] = out[(i, j)];
                }
            }
        }
    }
    Ok(sup)
}

/// Stationary state of the noiseless-gain laser: the normalized null vector of
/// the diagonal sector.
pub fn stationary_state(params: &LaserParams, truncation: usize) -> Result<DensityOperator> {
    if params.gain != GainKind::Noiseless {
        return Err(invalid("gain", "stationary_state requires noiseless gain"));
    }
    let sector = build_liouvillian_sector(params, 0, truncation)?;
    let d = sector.dim();
    // One balance equation is redundant; replace it by normalization.
    let mut system = sector.rates().clone();
    for j in 0..d {
        system[(0, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(d);
    rhs[0] = 1.0;
    let populations = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SingularSolve(format!("k=0 sector at truncation {truncation}")))?;
    let residual = (sector.rates() * &populations).amax();
    if !residual.is_finite() || residual > 1e-9 * params.kappa * params.mu.max(1.0) {
        return Err(Error::TruncationTooSmall {
            truncation,
            tail_mass: residual,
            limit: STATIONARY_TAIL_LIMIT,
        });
    }
    if populations.iter().any(|p| *p < -1e-12) {
        return Err(Error::SingularSolve("negative stationary population".into()));
    }
    let clipped: Vec<f64> = populations.iter().map(|p| p.max(0.0)).collect();
    DensityOperator::from_populations(&clipped)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinewidthMethod {
    /// `ℓ = −2 Re λ₁` for the slowest eigenvalue of the k=1 sector.
    SectorEigenvalue,
    /// Exponential fit to `|Tr(a† e^{Lt}(a ρ_ss))|` at late times.
    RegressionDecayFit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinewidthEstimate {
    /// Lorentzian FWHM (rad/s).
    pub value: f64,
    pub method: LinewidthMethod,
    pub truncation: usize,
}

/// Numerical linewidth of the noiseless-gain laser.
pub fn extract_linewidth(
    params: &LaserParams,
    truncation: usize,
    method: LinewidthMethod,
) -> Result<LinewidthEstimate> {
    if params.gain != GainKind::Noiseless {
        return Err(invalid("gain", "linewidth extraction requires noiseless gain"));
    }
    let sector = build_liouvillian_sector(params, 1, truncation)?;
    let value = match method {
        LinewidthMethod::SectorEigenvalue => -2.0 * sector.slowest_eigenvalue().re,
        LinewidthMethod::RegressionDecayFit => 2.0 * coherence_decay_rate(params, &sector, truncation)?,
    };
    if value.is_nan() || value <= 0.0 {
        return Err(Error::SingularSolve(format!("nonpositive linewidth {value}")));
    }
    Ok(LinewidthEstimate {
        value,
        method,
        truncation,
    })
}

/// Fits the late-time decay rate of the first-order coherence `g(t) = Tr(a† X(t))`
/// with `X(0) = a ρ_ss`.
fn coherence_decay_rate(params: &LaserParams, sector: &LiouvillianSector, truncation: usize) -> Result<f64> {
    let populations = stationary_state(params, truncation)?.populations();
    // (a ρ)_{n,n+1} = √(n+1) P(n+1)
    let x0: Vec<Complex64> = (0..truncation)
        .map(|n| Complex64::from(((n + 1) as f64).sqrt() * populations[n + 1]))
        .collect();
    let coherence = |x: &[Complex64]| -> f64 {
        x.iter()
            .enumerate()
            .map(|(n, v)| v * ((n + 1) as f64).sqrt())
            .sum::<Complex64>()
            .norm()
    };

    // Non-slowest modes decay at rates of order κ; start well after them.
    let t_start = 20.0 / params.kappa;
    let window = 40.0 / params.kappa;
    let samples = 201;
    let dt = window / (samples - 1) as f64;

    let mut x = sector.evolve(&x0, t_start);
    let mut times = Vec::with_capacity(samples);
    let mut logs = Vec::with_capacity(samples);
    for i in 0..samples {
        if i > 0 {
            x = sector.evolve(&x, dt);
        }
        times.push(t_start + i as f64 * dt);
        logs.push(coherence(&x).ln());
    }
    let (slope, _intercept, residual) = linear_fit(&times, &logs);
    if !residual.is_finite() || residual > DECAY_FIT_RESIDUAL_LIMIT {
        return Err(Error::NonExponentialDecay { residual });
    }
    Ok(-slope)
}

/// Least-squares line; returns (slope, intercept, RMS residual).
pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    (slope, intercept, (rss / n).sqrt())
}

/// Evolves a density operator for time `t` sector by sector.
pub fn evolve_density(params: &LaserParams, rho: &DensityOperator, t: f64) -> Result<DensityOperator> {
    let truncation = rho.truncation();
    let d = truncation + 1;
    let mut out = DMatrix::from_element(d, d, Complex64::new(0.0, 0.0));
    for k in 0..d {
        let sector = build_liouvillian_sector(params, k, truncation)?;
        let v: Vec<Complex64> = (0..d - k).map(|n| rho.matrix()[(n, n + k)]).collect();
        let w = sector.evolve(&v, t);
        for (n, value) in w.into_iter().enumerate() {
            out[(n, n + k)] = value;
            out[(n + k, n)] = value.conj();
        }
    }
    for n in 0..d {
        out[(n, n)].im = 0.0;
    }
    DensityOperator::new(out)
}

/// Phase-variance growth `κt/4μ` of a damped coherent state.
pub fn loss_only_variance_growth(mu: f64, kappa: f64, t: f64) -> Result<f64> {
    require_positive("mu", mu)?;
    require_positive("kappa", kappa)?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid("t", "must be finite and nonnegative"));
    }
    if kappa * t > 0.1 || mu < 25.0 {
        log::warn!(
            "variance growth κt/4μ used outside its validity regime (κt={}, μ={mu})",
            kappa * t
        );
    }
    Ok(kappa * t / (4.0 * mu))
}

/// Measures the growth of the canonical phase variance of `|√μ>` under pure
/// damping for time `t`.
pub fn simulate_loss_variance_growth(mu: f64, kappa: f64, t: f64, grid_size: usize) -> Result<f64> {
    let params = LaserParams::new(kappa, mu, GainKind::None)?;
    let truncation = default_truncation(mu);
    let rho0 = coherent_state(Complex64::from(mu.sqrt()), truncation)?.to_density();
    let rho_t = evolve_density(&params, &rho0, t)?;
    let v0 = phase_variance(&canonical_phase_distribution_mixed(&rho0, grid_size)?, 0.0);
    let vt = phase_variance(&canonical_phase_distribution_mixed(&rho_t, grid_size)?, 0.0);
    Ok(vt - v0)
}
