//! Resolvent applications, ray scans of the resolvent bound outside a
//! sector, and holomorphic functions of the operator through a contour
//! integral of the resolvent.

use crate::error::{CoreError, Result};
use crate::operator::AssembledOperator;
use ndarray::{Array1, Array2};
use ndarray_linalg::{c64, Factorize, OperationNorm, Solve};
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI};

/// Which way the resolvent difference is written. Both appear in the
/// literature; they differ by an overall sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignConvention {
    /// (z - T)^{-1}, the default.
    ZMinusT,
    /// (T - z)^{-1}.
    TMinusZ,
}

fn complex_shift(op: &AssembledOperator, z: c64, conv: SignConvention) -> Array2<c64> {
    let n = op.n();
    let mut a = Array2::<c64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let m = c64::new(op.matrix[[i, j]], 0.0);
            a[[i, j]] = match conv {
                SignConvention::ZMinusT => -m,
                SignConvention::TMinusZ => m,
            };
        }
        a[[i, i]] += match conv {
            SignConvention::ZMinusT => z,
            SignConvention::TMinusZ => -z,
        };
    }
    a
}

/// Applies the resolvent at the complex point z to a real vector.
pub fn resolvent_apply(
    op: &AssembledOperator,
    z: c64,
    v: &Array1<f64>,
    conv: SignConvention,
) -> Result<Array1<c64>> {
    if v.len() != op.n() {
        return Err(CoreError::DimensionMismatch(format!(
            "vector has {} entries, operator has {}",
            v.len(),
            op.n()
        )));
    }
    let a = complex_shift(op, z, conv);
    let vc: Array1<c64> = v.iter().map(|&x| c64::new(x, 0.0)).collect();
    let x = a
        .solve(&vc)
        .map_err(|e| CoreError::SingularSystem(format!("resolvent at {z}: {e}")))?;
    if !x.iter().all(|w| w.re.is_finite() && w.im.is_finite()) {
        return Err(CoreError::SingularSystem(format!(
            "resolvent at {z} produced non-finite values"
        )));
    }
    Ok(x)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RayScan {
    pub angle: f64,
    pub sup_c: f64,
    pub worst_radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectorialityReport {
    /// Sector half-angle whose boundary rays were scanned.
    pub theta: f64,
    /// sup of |z| * ||(z - T)^{-1}|| over all sampled z.
    pub c_theta: f64,
    pub rays: Vec<RayScan>,
    /// Sample points where the shifted system could not be solved, meaning
    /// spectrum sits on the scanned ray.
    pub failures: usize,
}

/// Estimates ||A^{-1}||_2 by power iteration with a fixed factorization.
fn inverse_norm_est(a: &Array2<c64>) -> Result<f64> {
    let n = a.nrows();
    let lu = a.factorize()?;
    let mut x: Array1<c64> = (0..n)
        .map(|i| c64::new(1.0 + 0.3 * ((i as f64) * 0.83).sin(), 0.2 * ((i as f64) * 1.7).cos()))
        .collect();
    let nx = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    x.mapv_inplace(|z| z / nx);
    let mut est = 0.0;
    for _ in 0..30 {
        let y = lu.solve(&x)?;
        let ny = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let mut w = lu.solve_h(&y)?;
        let nw = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(ny.is_finite() && nw.is_finite()) {
            return Err(CoreError::SingularSystem(
                "inverse norm estimate diverged".into(),
            ));
        }
        if nw == 0.0 {
            return Ok(ny);
        }
        w.mapv_inplace(|z| z / nw);
        x = w;
        if (ny - est).abs() <= 1e-8 * ny.max(1e-300) {
            return Ok(ny);
        }
        est = ny;
    }
    Ok(est)
}

/// Scans |z|*||(z-T)^{-1}|| along the rays at angles +theta, -theta and pi,
/// with `per_decade` logarithmic samples across twelve decades around the
/// operator scale.
pub fn sectoriality_scan(
    op: &AssembledOperator,
    theta: f64,
    per_decade: usize,
) -> Result<SectorialityReport> {
    if !(theta > 0.0 && theta < PI) {
        return Err(CoreError::InvalidArgument(format!(
            "sector half-angle {theta} must lie in (0, pi)"
        )));
    }
    if per_decade == 0 {
        return Err(CoreError::InvalidArgument(
            "need at least one sample per decade".into(),
        ));
    }
    let scale = op.matrix.opnorm_one()?.max(1e-300);
    let mut rays = Vec::new();
    let mut failures = 0usize;
    let mut c_theta: f64 = 0.0;
    for angle in [theta, -theta, PI] {
        let mut sup_c: f64 = 0.0;
        let mut worst_radius = 0.0;
        let steps = 12 * per_decade;
        for k in 0..=steps {
            let expo = -6.0 + k as f64 / per_decade as f64;
            let r = scale * 10f64.powf(expo);
            let z = c64::from_polar(r, angle);
            let a = complex_shift(op, z, SignConvention::ZMinusT);
            match inverse_norm_est(&a) {
                Ok(nrm) => {
                    let c = r * nrm;
                    if c > sup_c {
                        sup_c = c;
                        worst_radius = r;
                    }
                }
                Err(_) => failures += 1,
            }
        }
        c_theta = c_theta.max(sup_c);
        rays.push(RayScan {
            angle,
            sup_c,
            worst_radius,
        });
    }
    Ok(SectorialityReport {
        theta,
        c_theta,
        rays,
        failures,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ContourOpts {
    /// Angle of the integration ray, strictly between the spectral sector
    /// and pi.
    pub angle: f64,
    /// Relative stagnation target between density doublings.
    pub rtol: f64,
    pub initial_per_octave: usize,
    pub max_per_octave: usize,
}

impl Default for ContourOpts {
    fn default() -> Self {
        ContourOpts {
            angle: 3.0 * PI / 4.0,
            rtol: 1e-8,
            initial_per_octave: 2,
            max_per_octave: 16,
        }
    }
}

/// One trapezoid pass at fixed density: sum of Im[phi(z) e^{i mu} x(z)] r
/// over log-spaced radii, extended an octave at a time until both ends'
/// contributions are negligible.
fn contour_pass(
    op: &AssembledOperator,
    phi: &dyn Fn(c64) -> c64,
    v: &Array1<f64>,
    mu: f64,
    density: usize,
    rtol: f64,
) -> Result<Array1<f64>> {
    let n = op.n();
    let scale = op.matrix.opnorm_one()?.max(1e-300);
    let h = LN_2 / density as f64;
    let octave = |j: i64| -> Result<Array1<f64>> {
        let mut acc = Array1::zeros(n);
        for m in 0..density {
            let r = scale * 2f64.powf(j as f64 + m as f64 / density as f64);
            let z = c64::from_polar(r, mu);
            let x = resolvent_apply(op, z, v, SignConvention::ZMinusT)?;
            let f = phi(z) * c64::from_polar(1.0, mu);
            for i in 0..n {
                acc[i] += (f * x[i]).im * r;
            }
        }
        Ok(acc * h)
    };
    let mut acc = Array1::zeros(n);
    for j in -27..27 {
        acc = acc + octave(j)?;
    }
    let nrm = |x: &Array1<f64>| x.dot(x).sqrt();
    let mut lo = -28i64;
    loop {
        let c = octave(lo)?;
        let stop = nrm(&c) <= 0.01 * rtol * nrm(&acc).max(1e-300);
        acc = acc + c;
        if stop {
            break;
        }
        lo -= 1;
        if lo < -80 {
            return Err(CoreError::QuadratureNonconvergence(
                "contour integrand does not decay toward zero".into(),
            ));
        }
    }
    let mut hi = 27i64;
    loop {
        let c = octave(hi)?;
        let stop = nrm(&c) <= 0.01 * rtol * nrm(&acc).max(1e-300);
        acc = acc + c;
        if stop {
            break;
        }
        hi += 1;
        if hi > 80 {
            return Err(CoreError::QuadratureNonconvergence(
                "contour integrand does not decay toward infinity".into(),
            ));
        }
    }
    // counterclockwise traversal around the spectrum enters along the upper
    // ray, which flips the orientation of the r integral
    Ok(acc / -PI)
}

/// phi(T) v for a function holomorphic on the spectral sector with two-sided
/// power decay, via a single-ray contour representation valid for real T and
/// phi real on the positive axis.
pub fn phi_of_t(
    op: &AssembledOperator,
    phi: impl Fn(c64) -> c64,
    v: &Array1<f64>,
    opts: &ContourOpts,
) -> Result<Array1<f64>> {
    if v.len() != op.n() {
        return Err(CoreError::DimensionMismatch(format!(
            "vector has {} entries, operator has {}",
            v.len(),
            op.n()
        )));
    }
    if !(opts.angle > 0.0 && opts.angle < PI) {
        return Err(CoreError::InvalidArgument(format!(
            "contour angle {} must lie in (0, pi)",
            opts.angle
        )));
    }
    let mut density = opts.initial_per_octave.max(1);
    let mut prev = contour_pass(op, &phi, v, opts.angle, density, opts.rtol)?;
    while density < opts.max_per_octave {
        density *= 2;
        let cur = contour_pass(op, &phi, v, opts.angle, density, opts.rtol)?;
        let diff = (&cur - &prev).dot(&(&cur - &prev)).sqrt();
        let scale = cur.dot(&cur).sqrt();
        if diff <= opts.rtol * scale || scale == 0.0 {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(CoreError::QuadratureNonconvergence(format!(
        "contour quadrature still moving at {density} nodes per octave"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::fracpow::frac_power_apply_balakrishnan;
    use crate::calculus::spectral::frac_power_apply_spectral;
    use crate::grid::{Boundary, GridSpec};
    use crate::operator::OperatorFamily;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn wrap(m: Array2<f64>) -> AssembledOperator {
        let n = m.nrows();
        let grid = GridSpec::line(0.0, 1.0, n, Boundary::DirichletEliminated).unwrap();
        AssembledOperator::from_matrix(m, grid, OperatorFamily::WeightedElliptic).unwrap()
    }

    fn spd() -> AssembledOperator {
        wrap(array![
            [2.0, -1.0, 0.0],
            [-1.0, 2.0, -1.0],
            [0.0, -1.0, 2.0]
        ])
    }

    #[test]
    fn first_resolvent_identity() {
        let op = spd();
        let v = array![1.0, -0.5, 2.0];
        let z1 = c64::new(-1.0, 2.0);
        let z2 = c64::new(3.0, -0.7);
        let r1 = resolvent_apply(&op, z1, &v, SignConvention::ZMinusT).unwrap();
        let r2 = resolvent_apply(&op, z2, &v, SignConvention::ZMinusT).unwrap();
        // R(z1) - R(z2) = (z2 - z1) R(z1) R(z2): apply the left side to v and
        // compare against feeding R(z2) v through R(z1)
        let a1 = complex_shift(&op, z1, SignConvention::ZMinusT);
        let rhs = a1.solve(&r2).unwrap().mapv(|w| w * (z2 - z1));
        for i in 0..3 {
            let lhs = r1[i] - r2[i];
            assert_relative_eq!(lhs.re, rhs[i].re, max_relative = 1e-11, epsilon = 1e-12);
            assert_relative_eq!(lhs.im, rhs[i].im, max_relative = 1e-11, epsilon = 1e-12);
        }
    }

    #[test]
    fn convention_flip_changes_only_the_sign() {
        let op = spd();
        let v = array![0.3, 0.6, -1.0];
        let z = c64::new(0.5, 1.5);
        let a = resolvent_apply(&op, z, &v, SignConvention::ZMinusT).unwrap();
        let b = resolvent_apply(&op, z, &v, SignConvention::TMinusZ).unwrap();
        for i in 0..3 {
            assert_relative_eq!(a[i].re, -b[i].re, max_relative = 1e-13);
            assert_relative_eq!(a[i].im, -b[i].im, max_relative = 1e-13);
        }
    }

    #[test]
    fn resolvent_at_an_eigenvalue_fails() {
        let op = wrap(Array2::from_diag(&array![1.0, 2.0, 3.0]));
        let v = array![1.0, 1.0, 1.0];
        assert!(resolvent_apply(&op, c64::new(2.0, 0.0), &v, SignConvention::ZMinusT).is_err());
    }

    #[test]
    fn identity_operator_sector_bounds() {
        let op = wrap(Array2::eye(3));
        // on the imaginary axis and the negative axis, |z|/|z-1| <= 1
        let rep = sectoriality_scan(&op, PI / 2.0, 3).unwrap();
        assert_eq!(rep.failures, 0);
        assert!(rep.c_theta <= 1.0 + 1e-6, "c = {}", rep.c_theta);
        // on the 45-degree ray the sup is sqrt(2), attained near |z| = sqrt(2)
        let rep = sectoriality_scan(&op, PI / 4.0, 5).unwrap();
        assert!(
            rep.c_theta <= 2.0f64.sqrt() + 1e-9 && rep.c_theta >= 1.30,
            "c = {}",
            rep.c_theta
        );
    }

    #[test]
    fn symmetric_positive_definite_is_sectorial_with_constant_one() {
        let rep = sectoriality_scan(&spd(), PI / 2.0, 3).unwrap();
        assert_eq!(rep.failures, 0);
        assert!(rep.c_theta <= 1.0 + 1e-6, "c = {}", rep.c_theta);
        assert_eq!(rep.rays.len(), 3);
    }

    #[test]
    fn nonnormal_triangular_stays_bounded() {
        let op = wrap(array![[2.0, 1.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 1.0]]);
        let rep = sectoriality_scan(&op, PI / 2.0, 3).unwrap();
        assert_eq!(rep.failures, 0);
        assert!(rep.c_theta >= 0.9 && rep.c_theta <= 10.0, "c = {}", rep.c_theta);
    }

    #[test]
    fn contour_function_matches_closed_form() {
        // phi(z) = z/(1+z)^2 equals M (I+M)^{-2}
        let op = spd();
        let v = array![1.0, 2.0, -1.0];
        let got = phi_of_t(
            &op,
            |z| z / ((z + 1.0) * (z + 1.0)),
            &v,
            &Default::default(),
        )
        .unwrap();
        let eye: Array2<f64> = Array2::eye(3);
        let a = &op.matrix + &eye;
        let x1 = a.solve(&v).unwrap();
        let x2 = a.solve(&x1).unwrap();
        let want = op.matrix.dot(&x2);
        for i in 0..3 {
            assert_relative_eq!(got[i], want[i], max_relative = 1e-7, epsilon = 1e-9);
        }
    }

    #[test]
    fn contour_matches_spectral_for_fractional_functions() {
        let op = spd();
        let v = array![0.5, -1.0, 0.25];
        let sigma = 0.4;
        let got = phi_of_t(
            &op,
            move |z: c64| z.powf(sigma) / (z + 1.0),
            &v,
            &Default::default(),
        )
        .unwrap();
        // spectral oracle: T^0.4 (I+T)^{-1} v
        let eye: Array2<f64> = Array2::eye(3);
        let a = &op.matrix + &eye;
        let u = a.solve(&v).unwrap();
        let want = frac_power_apply_spectral(&op, sigma, &u).unwrap();
        for i in 0..3 {
            assert_relative_eq!(got[i], want[i], max_relative = 1e-6, epsilon = 1e-9);
        }
    }

    #[test]
    fn contour_agrees_with_singular_integral_route() {
        let op = spd();
        let v = array![1.0, 0.0, -2.0];
        let sigma = 0.3;
        let got = phi_of_t(
            &op,
            move |z: c64| z.powf(sigma) / (z + 1.0),
            &v,
            &Default::default(),
        )
        .unwrap();
        let eye: Array2<f64> = Array2::eye(3);
        let a = &op.matrix + &eye;
        let u = a.solve(&v).unwrap();
        let want = frac_power_apply_balakrishnan(&op, sigma, &u, &Default::default()).unwrap();
        for i in 0..3 {
            assert_relative_eq!(got[i], want[i], max_relative = 1e-6, epsilon = 1e-9);
        }
    }
}
