//! Phase-space lattice basis and the fully decohering channel built on it.
//!
//! Lattice states are boxcars in position carrying a plane wave:
//!
//! ```text
//! <q|q_n, p_m> = Δ^{-1/2} χ_[q_n − Δ/2, q_n + Δ/2](q) e^{i q p_m},   q_n = Δn,  p_m = 2πm/Δ
//! ```
//!
//! with `q̂ = (a + a†)/√2`. They form an orthonormal basis with
//! `<q_n,p_m| a |q_n,p_m> = (q_n + i p_m)/√2`. The channel projects any state
//! onto this basis, `ρ -> Σ |q_n,p_m><q_n,p_m| ρ |q_n,p_m><q_n,p_m|`, so a
//! coherent input `|α>` leaves as the mixture with weights `|<q_n,p_m|α>|²`.
//!
//! Overlaps with `|m|` small are computed by adaptive Gauss–Kronrod
//! quadrature. Far in the momentum tails the integrand oscillates too fast for
//! that to be practical, and the overlap is evaluated from the endpoint
//! (integration-by-parts) expansion of a Gaussian times a plane wave, which
//! converges to machine precision once `|p_m − p̄|` is a few tens.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;

use crate::error::{invalid, require_finite, require_positive, Error, Result};
use crate::quad::integrate;

/// Absolute tolerance of the overlap quadrature.
pub const OVERLAP_TOLERANCE: f64 = 1e-10;

/// Required captured probability for a decohered distribution.
pub const REQUIRED_MASS: f64 = 1.0 - 1e-6;

/// Rows whose centre is further than this from `q̄` carry less than 1e-27 mass.
const ROW_REACH: f64 = 8.5;

/// `|k|` above which the endpoint expansion is used instead of quadrature.
const ASYMPTOTIC_K: f64 = 60.0;

const MAX_HALF_WIDTH: i64 = 1 << 20;

/// Lattice spacing and a finite window of lattice indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSpec {
    delta: f64,
    n_range: (i64, i64),
    m_range: (i64, i64),
}

impl LatticeSpec {
    /// Both ranges are inclusive.
    pub fn new(delta: f64, n_range: (i64, i64), m_range: (i64, i64)) -> Result<Self> {
        require_positive("delta", delta)?;
        if n_range.0 > n_range.1 {
            return Err(invalid("n_range", "window is empty"));
        }
        if m_range.0 > m_range.1 {
            return Err(invalid("m_range", "window is empty"));
        }
        Ok(Self {
            delta,
            n_range,
            m_range,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn n_range(&self) -> (i64, i64) {
        self.n_range
    }

    pub fn m_range(&self) -> (i64, i64) {
        self.m_range
    }

    pub fn q(&self, n: i64) -> f64 {
        self.delta * n as f64
    }

    pub fn p(&self, m: i64) -> f64 {
        2.0 * PI * m as f64 / self.delta
    }

    pub fn contains(&self, n: i64, m: i64) -> bool {
        (self.n_range.0..=self.n_range.1).contains(&n) && (self.m_range.0..=self.m_range.1).contains(&m)
    }

    fn rows(&self) -> usize {
        (self.n_range.1 - self.n_range.0 + 1) as usize
    }

    fn cols(&self) -> usize {
        (self.m_range.1 - self.m_range.0 + 1) as usize
    }

    /// Box `[q_n − Δ/2, q_n + Δ/2]`.
    fn cell(&self, n: i64) -> (f64, f64) {
        let q = self.q(n);
        (q - 0.5 * self.delta, q + 0.5 * self.delta)
    }
}

/// `q̄ = √2 Re α`, `p̄ = √2 Im α`.
fn quadrature_means(alpha: Complex64) -> (f64, f64) {
    (SQRT_2 * alpha.re, SQRT_2 * alpha.im)
}

/// Position wavefunction of `|α>`:
/// `π^{-1/4} exp(−(q − q̄)²/2 + i p̄ q − i q̄ p̄/2)`.
pub fn coherent_wavefunction(alpha: Complex64, q: f64) -> Complex64 {
    let (qb, pb) = quadrature_means(alpha);
    let x = q - qb;
    Complex64::from_polar(PI.powf(-0.25) * (-0.5 * x * x).exp(), pb * q - 0.5 * qb * pb)
}

fn validate_alpha(alpha: Complex64) -> Result<()> {
    require_finite("alpha", alpha.re)?;
    require_finite("alpha", alpha.im)
}

/// `<q_n, p_m | α>` by adaptive quadrature over the cell.
pub fn lattice_overlap(alpha: Complex64, spec: &LatticeSpec, n: i64, m: i64) -> Result<Complex64> {
    validate_alpha(alpha)?;
    if !spec.contains(n, m) {
        return Err(invalid("(n, m)", format!("({n}, {m}) outside the lattice window")));
    }
    quadrature_overlap(alpha, spec, n, m)
}

fn quadrature_overlap(alpha: Complex64, spec: &LatticeSpec, n: i64, m: i64) -> Result<Complex64> {
    let (a, b) = spec.cell(n);
    let p = spec.p(m);
    let integrand = |q: f64| Complex64::from_polar(1.0, -q * p) * coherent_wavefunction(alpha, q);
    let scale = spec.delta.sqrt();
    Ok(integrate(&integrand, a, b, OVERLAP_TOLERANCE * scale)? / scale)
}

/// `<q_n, p_m | q_n', p_m'>` by quadrature of the product of the two lattice
/// wavefunctions over the intersection of their cells.
pub fn lattice_inner_product(spec: &LatticeSpec, left: (i64, i64), right: (i64, i64)) -> Result<Complex64> {
    let (a1, b1) = spec.cell(left.0);
    let (a2, b2) = spec.cell(right.0);
    let (a, b) = (a1.max(a2), b1.min(b2));
    if b <= a {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let dp = spec.p(right.1) - spec.p(left.1);
    let integrand = |q: f64| Complex64::from_polar(1.0 / spec.delta, q * dp);
    integrate(&integrand, a, b, 1e-13)
}

/// Mean coherent amplitude `(q_n + i p_m)/√2` of a lattice state.
pub fn lattice_mean_amplitude(spec: &LatticeSpec, n: i64, m: i64) -> Complex64 {
    Complex64::new(spec.q(n), spec.p(m)) / SQRT_2
}

/// Evaluates `<q_n, p_m | α>` for many `(n, m)`, switching to the endpoint
/// expansion in the momentum tails.
#[derive(Debug, Clone, Copy)]
pub struct OverlapEvaluator {
    alpha: Complex64,
    qbar: f64,
    pbar: f64,
    delta: f64,
}

impl OverlapEvaluator {
    pub fn new(alpha: Complex64, delta: f64) -> Result<Self> {
        validate_alpha(alpha)?;
        require_positive("delta", delta)?;
        let (qbar, pbar) = quadrature_means(alpha);
        Ok(Self {
            alpha,
            qbar,
            pbar,
            delta,
        })
    }

    pub fn overlap(&self, n: i64, m: i64) -> Result<Complex64> {
        let spec = LatticeSpec {
            delta: self.delta,
            n_range: (n, n),
            m_range: (m, m),
        };
        let k = self.pbar - spec.p(m);
        if k.abs() >= ASYMPTOTIC_K {
            if let Some(v) = self.endpoint_expansion(&spec, n, k) {
                return Ok(v);
            }
        }
        quadrature_overlap(self.alpha, &spec, n, m)
    }

    /// `Δ^{-1/2} e^{−i q̄ p̄/2} Σ_j [He_j(x) h(q) e^{ikq}]_a^b / (ik)^{j+1}` with
    /// `h(q) = π^{-1/4} e^{−(q−q̄)²/2}`, `x = q − q̄` and `k = p̄ − p_m`.
    fn endpoint_expansion(&self, spec: &LatticeSpec, n: i64, k: f64) -> Option<Complex64> {
        let (a, b) = spec.cell(n);
        let norm = PI.powf(-0.25);
        let ik = Complex64::new(0.0, k);
        let mut sum = Complex64::new(0.0, 0.0);
        for (q, sign) in [(b, 1.0), (a, -1.0)] {
            let x = q - self.qbar;
            let h = norm * (-0.5 * x * x).exp();
            if h == 0.0 {
                continue;
            }
            let boundary = Complex64::from_polar(sign * h, k * q);
            let mut he_prev = 0.0;
            let mut he = 1.0;
            let mut denom = ik;
            let mut last = f64::INFINITY;
            let mut converged = false;
            for j in 0..64 {
                let term = boundary * he / denom;
                let size = term.norm();
                if size > last && j > 2 {
                    return None;
                }
                sum += term;
                if size < 1e-18 {
                    converged = true;
                    break;
                }
                last = size;
                let next = x * he - j as f64 * he_prev;
                he_prev = he;
                he = next;
                denom *= ik;
            }
            if !converged {
                return None;
            }
        }
        let phase = Complex64::from_polar(1.0, -0.5 * self.qbar * self.pbar);
        Some(phase * sum / self.delta.sqrt())
    }
}

/// Output of the decohering channel for a coherent input: the weights of the
/// lattice-state mixture over a finite window.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeDistribution {
    n_range: (i64, i64),
    m_range: (i64, i64),
    probabilities: Vec<f64>,
    captured_mass: f64,
}

impl LatticeDistribution {
    pub fn n_range(&self) -> (i64, i64) {
        self.n_range
    }

    pub fn m_range(&self) -> (i64, i64) {
        self.m_range
    }

    pub fn captured_mass(&self) -> f64 {
        self.captured_mass
    }

    fn cols(&self) -> usize {
        (self.m_range.1 - self.m_range.0 + 1) as usize
    }

    pub fn probability(&self, n: i64, m: i64) -> Option<f64> {
        if n < self.n_range.0 || n > self.n_range.1 || m < self.m_range.0 || m > self.m_range.1 {
            return None;
        }
        let i = (n - self.n_range.0) as usize;
        let j = (m - self.m_range.0) as usize;
        Some(self.probabilities[i * self.cols() + j])
    }

    /// `(n, m, P(n, m))` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, i64, f64)> + '_ {
        let cols = self.cols();
        let (n0, m0) = (self.n_range.0, self.m_range.0);
        self.probabilities
            .iter()
            .enumerate()
            .map(move |(idx, &p)| (n0 + (idx / cols) as i64, m0 + (idx % cols) as i64, p))
    }

    /// Lattice index with the largest weight.
    pub fn argmax(&self) -> (i64, i64) {
        let (n, m, _) = self.iter().fold(
            (0, 0, f64::NEG_INFINITY),
            |best, cur| if cur.2 > best.2 { cur } else { best },
        );
        (n, m)
    }
}

fn fill_window(eval: &OverlapEvaluator, spec: &LatticeSpec) -> Result<Vec<f64>> {
    let cols = spec.cols();
    let mut probabilities = Vec::with_capacity(spec.rows() * cols);
    for n in spec.n_range.0..=spec.n_range.1 {
        for m in spec.m_range.0..=spec.m_range.1 {
            probabilities.push(eval.overlap(n, m)?.norm_sqr());
        }
    }
    Ok(probabilities)
}

/// Decoheres `|α>` in the lattice basis over the window of `spec`.
pub fn decohere(alpha: Complex64, spec: &LatticeSpec) -> Result<LatticeDistribution> {
    let eval = OverlapEvaluator::new(alpha, spec.delta)?;
    let probabilities = fill_window(&eval, spec)?;
    let captured_mass: f64 = probabilities.iter().sum();
    if captured_mass < REQUIRED_MASS {
        return Err(Error::InsufficientWindow {
            captured: captured_mass,
            required: REQUIRED_MASS,
        });
    }
    Ok(LatticeDistribution {
        n_range: spec.n_range,
        m_range: spec.m_range,
        probabilities,
        captured_mass,
    })
}

/// Window covering every row with non-negligible mass and a momentum window of
/// half-width `half_width` centred on the lattice point nearest `p̄`.
pub fn window_for(alpha: Complex64, delta: f64, half_width: i64) -> Result<LatticeSpec> {
    validate_alpha(alpha)?;
    require_positive("delta", delta)?;
    let (qb, pb) = quadrature_means(alpha);
    let n_lo = ((qb - ROW_REACH) / delta).floor() as i64;
    let n_hi = ((qb + ROW_REACH) / delta).ceil() as i64;
    let m_mid = (pb * delta / (2.0 * PI)).round() as i64;
    LatticeSpec::new(delta, (n_lo, n_hi), (m_mid - half_width, m_mid + half_width))
}

/// Decoheres `|α>`, doubling the momentum window until the captured mass
/// reaches [`REQUIRED_MASS`]. Returns the window used.
pub fn decohere_auto(alpha: Complex64, delta: f64) -> Result<(LatticeSpec, LatticeDistribution)> {
    let eval = OverlapEvaluator::new(alpha, delta)?;
    let mut half_width = 64;
    let base = window_for(alpha, delta, 0)?;
    let m_mid = base.m_range.0;
    let rows = base.rows();

    // Per-row weights stored by momentum index, grown symmetrically.
    let mut row_data: Vec<std::collections::VecDeque<f64>> = vec![Default::default(); rows];
    let mut current = -1i64;
    loop {
        for (i, row) in row_data.iter_mut().enumerate() {
            let n = base.n_range.0 + i as i64;
            if current < 0 {
                row.push_back(eval.overlap(n, m_mid)?.norm_sqr());
            }
            for r in (current.max(0) + 1)..=half_width {
                row.push_front(eval.overlap(n, m_mid - r)?.norm_sqr());
                row.push_back(eval.overlap(n, m_mid + r)?.norm_sqr());
            }
        }
        current = half_width;
        let captured: f64 = row_data.iter().map(|r| r.iter().sum::<f64>()).sum();
        if captured >= REQUIRED_MASS {
            let spec = LatticeSpec::new(delta, base.n_range, (m_mid - half_width, m_mid + half_width))?;
            let probabilities: Vec<f64> = row_data.into_iter().flatten().collect();
            let dist = LatticeDistribution {
                n_range: spec.n_range,
                m_range: spec.m_range,
                probabilities,
                captured_mass: captured,
            };
            return Ok((spec, dist));
        }
        if half_width >= MAX_HALF_WIDTH {
            return Err(Error::InsufficientWindow {
                captured,
                required: REQUIRED_MASS,
            });
        }
        half_width *= 2;
    }
}

/// Coherent amplitude carried by the channel output, `Σ P(n,m) (q_n + i p_m)/√2`.
pub fn output_mean_amplitude(dist: &LatticeDistribution, spec: &LatticeSpec) -> Result<Complex64> {
    if dist.captured_mass < REQUIRED_MASS {
        return Err(Error::InsufficientWindow {
            captured: dist.captured_mass,
            required: REQUIRED_MASS,
        });
    }
    // Accumulate q and p separately so symmetric momentum tails cancel cleanly.
    let mut q_sum = 0.0;
    let mut p_sum = 0.0;
    for (n, m, p) in dist.iter() {
        q_sum += p * spec.q(n);
        p_sum += p * spec.p(m);
    }
    Ok(Complex64::new(q_sum, p_sum) / SQRT_2)
}

/// Fidelity `<β| O(ρ) |β> = Σ P(n,m) |<q_n,p_m|β>|²` of the channel output with
/// the coherent state `|β>`. Diagnostic only.
pub fn coherent_fidelity(dist: &LatticeDistribution, spec: &LatticeSpec, beta: Complex64) -> Result<f64> {
    let eval = OverlapEvaluator::new(beta, spec.delta)?;
    let mut total = 0.0;
    for (n, m, p) in dist.iter() {
        if p > 1e-14 {
            total += p * eval.overlap(n, m)?.norm_sqr();
        }
    }
    Ok(total)
}
