//! Gamma and modified Bessel functions needed by the extension profiles
//! and their closed-form scalar references.

use std::f64::consts::PI;

// Lanczos coefficients, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function for real non-pole arguments.
///
/// Reflection is applied for x < 0.5, so negative non-integer arguments are
/// supported; poles at 0, -1, -2, ... return infinity.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        if x == x.floor() {
            return f64::INFINITY;
        }
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let z = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * acc
}

/// Modified Bessel function of the first kind by its power series.
/// Adequate for x up to roughly 9 before cancellation in the K formula bites.
fn bessel_i_series(nu: f64, x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = (0.5 * x).powf(nu) / gamma(nu + 1.0);
    let mut sum = term;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * (kf + nu));
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Modified Bessel function of the second kind, real order in (0, 1).
///
/// Series route below the crossover, asymptotic expansion above; both are
/// accurate to ~1e-7 relative near the crossover and much better away from it.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    assert!(nu > 0.0 && nu < 1.0, "order must lie in (0,1), got {nu}");
    assert!(x > 0.0, "argument must be positive, got {x}");
    const CROSSOVER: f64 = 8.0;
    if x <= CROSSOVER {
        let s = (PI * nu).sin();
        0.5 * PI * (bessel_i_series(-nu, x) - bessel_i_series(nu, x)) / s
    } else {
        // K_nu(x) ~ sqrt(pi/2x) e^{-x} sum a_k, a_k = a_{k-1} (4nu^2-(2k-1)^2)/(8kx)
        let mut a = 1.0;
        let mut sum = 1.0;
        let mut prev = f64::INFINITY;
        for k in 1..40 {
            let kf = k as f64;
            let num = 4.0 * nu * nu - (2.0 * kf - 1.0) * (2.0 * kf - 1.0);
            a *= num / (8.0 * kf * x);
            if a.abs() > prev {
                break; // semiconvergent: stop at the smallest term
            }
            sum += a;
            prev = a.abs();
            if a.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        (0.5 * PI / x).sqrt() * (-x).exp() * sum
    }
}

/// Scalar extension profile: for T = lam > 0 the profile with x(0) = 1 is
/// (2^{1-s}/Gamma(s)) (sqrt(lam) y)^s K_s(sqrt(lam) y).
pub fn scalar_profile(sigma: f64, lam: f64, y: f64) -> f64 {
    assert!(sigma > 0.0 && sigma < 1.0);
    assert!(lam >= 0.0 && y >= 0.0);
    if y == 0.0 || lam == 0.0 {
        return 1.0;
    }
    let z = lam.sqrt() * y;
    2f64.powf(1.0 - sigma) / gamma(sigma) * z.powf(sigma) * bessel_k(sigma, z)
}
