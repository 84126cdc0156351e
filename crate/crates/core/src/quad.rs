//! Adaptive Gauss–Kronrod (7, 15) quadrature for complex integrands.

use num_complex::Complex64;

use crate::error::{Error, Result};

// Tabulated nodes and weights keep their published digits.

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_DEPTH: u32 = 48;

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += pair * WGK[j];
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    let kronrod = kronrod * half;
    let gauss = gauss * half;
    (kronrod, (kronrod - gauss).norm())
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol` by recursive bisection.
pub fn integrate<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64, tol: f64) -> Result<Complex64> {
    if a == b {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mut total = Complex64::new(0.0, 0.0);
    let mut stack = vec![(a, b, tol, 0u32)];
    while let Some((lo, hi, local_tol, depth)) = stack.pop() {
        let (value, err) = gk15(f, lo, hi);
        if err <= local_tol || (hi - lo).abs() < 1e-14 * (1.0 + lo.abs()) {
            total += value;
            continue;
        }
        if depth >= MAX_DEPTH {
            return Err(Error::QuadratureNotConverged {
                a: lo,
                b: hi,
                estimate: err,
            });
        }
        let mid = 0.5 * (lo + hi);
        stack.push((mid, hi, 0.5 * local_tol, depth + 1));
        stack.push((lo, mid, 0.5 * local_tol, depth + 1));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let v = integrate(&|x: f64| Complex64::new(x.powi(6), 0.0), 0.0, 2.0, 1e-14).unwrap();
        assert!((v.re - 128.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn oscillatory() {
        let k = 250.0;
        let v = integrate(&|x: f64| Complex64::from_polar(1.0, k * x), 0.0, 1.0, 1e-12).unwrap();
        let exact = (Complex64::from_polar(1.0, k) - 1.0) / Complex64::new(0.0, k);
        assert!((v - exact).norm() < 1e-11);
    }

    #[test]
    fn gaussian() {
        let v = integrate(&|x: f64| Complex64::from((-x * x).exp()), -10.0, 10.0, 1e-13).unwrap();
        assert!((v.re - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }
}
