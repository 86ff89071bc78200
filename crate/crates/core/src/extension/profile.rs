//! Half-space extension profiles x(y) of a boundary vector x0: the solution
//! of x'' + ((1-2s)/y) x' = M x on y > 0 with x(0) = x0, evaluated through
//! three routes that must agree:
//!
//! * a kernel integral of the semigroup against e^{-y^2/4t} t^{-1-s},
//! * a subordinated form that first computes g = M^s x0 and then integrates
//!   e^{-tM} g t^{s-1} (e^{-y^2/4t} - 1) dt on top of x0 — an exact
//!   rearrangement of the same identity that passes kernel components of x0
//!   through untouched, and
//! * diagonalization with the closed-form scalar profile (self-adjoint
//!   operators only).

use crate::calculus::fracpow::{check_sigma_open, frac_power_apply_balakrishnan, QuadratureOpts};
use crate::calculus::semigroup::SemigroupSamples;
use crate::error::{CoreError, Result};
use crate::operator::AssembledOperator;
use crate::special::{gamma, scalar_profile};
use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, OperationNorm, UPLO};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtensionRoute {
    /// Kernel integral against the boundary vector.
    Poisson,
    /// Kernel integral against the fractional power of the boundary vector.
    Subordination,
    /// Diagonalization with the closed-form scalar profile.
    Spectral,
}

#[derive(Debug, Clone, Copy)]
pub struct ExtensionOpts {
    /// Smallest positive height, in units of the fastest decay scale.
    pub y_min_factor: f64,
    /// Largest height, in the same units.
    pub y_max_factor: f64,
    /// Geometric spacing of the height ladder.
    pub ratio: f64,
    pub quad: QuadratureOpts,
}

impl Default for ExtensionOpts {
    fn default() -> Self {
        ExtensionOpts {
            y_min_factor: 1e-4,
            y_max_factor: 10.0,
            ratio: 1.25,
            quad: QuadratureOpts::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExtensionProfile {
    pub sigma: f64,
    /// Heights, ascending; ys[0] = 0 when the boundary value is included.
    pub ys: Vec<f64>,
    /// x(y) for each height; values[0] is x0 itself when ys starts at 0.
    pub values: Vec<Array1<f64>>,
    /// Common ratio of the positive heights when they form a geometric
    /// ladder; None for irregular height lists.
    pub ratio: Option<f64>,
    pub route: ExtensionRoute,
    /// The operator the profile extends; scans differentiate against it.
    pub base: AssembledOperator,
}

impl ExtensionProfile {
    /// Index of the first strictly positive height.
    pub fn first_positive(&self) -> usize {
        self.ys.iter().position(|&y| y > 0.0).unwrap_or(self.ys.len())
    }

    /// CSV rendering: header `y,component_0,...`, one row per height
    /// including y = 0, full float precision.
    pub fn to_csv(&self) -> String {
        let n = self.values.first().map_or(0, |v| v.len());
        let mut out = String::from("y");
        for i in 0..n {
            let _ = write!(out, ",component_{i}");
        }
        out.push('\n');
        for (y, v) in self.ys.iter().zip(self.values.iter()) {
            let _ = write!(out, "{y:.16e}");
            for x in v.iter() {
                let _ = write!(out, ",{x:.16e}");
            }
            out.push('\n');
        }
        out
    }
}

fn detect_ratio(ys: &[f64]) -> Option<f64> {
    let pos: Vec<f64> = ys.iter().copied().filter(|&y| y > 0.0).collect();
    if pos.len() < 3 {
        return None;
    }
    let r = pos[1] / pos[0];
    for k in 1..pos.len() - 1 {
        if ((pos[k + 1] / pos[k]) / r - 1.0).abs() > 1e-9 {
            return None;
        }
    }
    Some(r)
}

/// Geometric height ladder [0, y_min, y_min*ratio, ...], scaled by the
/// fastest decay scale 1/sqrt(||M||).
pub fn default_y_ladder(op: &AssembledOperator, opts: &ExtensionOpts) -> Result<Vec<f64>> {
    if !(opts.ratio > 1.0 && opts.ratio <= 2.0) {
        return Err(CoreError::InvalidArgument(format!(
            "ladder ratio {} must lie in (1, 2]",
            opts.ratio
        )));
    }
    if !(opts.y_min_factor > 0.0 && opts.y_max_factor > opts.y_min_factor) {
        return Err(CoreError::InvalidArgument(
            "height ladder factors must satisfy 0 < min < max".into(),
        ));
    }
    let scale = crate::dense::matrix_2norm_est(&op.matrix).max(1e-300).sqrt();
    let mut ys = vec![0.0];
    let mut y = opts.y_min_factor / scale;
    let top = opts.y_max_factor / scale;
    while y <= top * (1.0 + 1e-12) {
        ys.push(y);
        y *= opts.ratio;
    }
    Ok(ys)
}

fn check_inputs(op: &AssembledOperator, sigma: f64, x0: &Array1<f64>, ys: &[f64]) -> Result<()> {
    check_sigma_open(sigma)?;
    if x0.len() != op.n() {
        return Err(CoreError::DimensionMismatch(format!(
            "boundary vector has {} entries, operator has {}",
            x0.len(),
            op.n()
        )));
    }
    if ys.is_empty() {
        return Err(CoreError::InvalidArgument("empty height ladder".into()));
    }
    let mut prev = -1.0;
    for &y in ys {
        if !(y.is_finite() && y >= 0.0) {
            return Err(CoreError::InvalidArgument(format!("invalid height {y}")));
        }
        if y <= prev {
            return Err(CoreError::InvalidArgument(
                "heights must be strictly increasing".into(),
            ));
        }
        prev = y;
    }
    Ok(())
}

/// Lowest semigroup time needed so the e^{-y^2/4t} factor has already cut
/// off everything below the sampled range, for the smallest positive height.
fn kernel_t_lo(norm1: f64, ys: &[f64]) -> f64 {
    let y_min = ys.iter().copied().find(|&y| y > 0.0).unwrap_or(1.0);
    (1e-8 / norm1).min(y_min * y_min / 150.0)
}

/// One kernel-quadrature pass at fixed sample density, producing for each
/// height the lattice sum of u(t) * t^power * phi(y, t) against d(ln t),
/// where phi is e^{-y^2/4t} for the plain kernel (`complement` false) and
/// e^{-y^2/4t} - 1 for the subordinated one (`complement` true). Both modes
/// continue the lattice above the stabilized top with u frozen; complement
/// mode also continues it below the lowest node, where phi = -1 to machine
/// precision and u(t) follows its power series.
fn kernel_eval(
    samples: &SemigroupSamples,
    power: f64,
    ys_pos: &[f64],
    complement: bool,
) -> Vec<Array1<f64>> {
    let h = samples.log_step;
    let n = samples.v.len();
    let t_lo = samples.t[0];
    let t_top = samples.t_top();
    let mut out = Vec::with_capacity(ys_pos.len());
    for &y in ys_pos {
        let phi = |t: f64| {
            let e = (-y * y / (4.0 * t)).exp();
            if complement {
                e - 1.0
            } else {
                e
            }
        };
        let mut acc: Array1<f64> = Array1::zeros(n);
        for (t, u) in samples.t.iter().zip(samples.u.iter()) {
            let w = t.powf(power) * phi(*t);
            if w != 0.0 {
                acc.scaled_add(w, u);
            }
        }
        acc *= h;
        let mut coef = 0.0;
        let mut j = 1usize;
        loop {
            let t = t_top * ((j as f64) * h).exp();
            let term = t.powf(power) * phi(t);
            coef += term;
            if term.abs() < 1e-16 * coef.abs().max(1e-300) || j > 200_000 {
                break;
            }
            j += 1;
        }
        acc.scaled_add(h * coef, samples.u_top());
        if complement {
            for (k, mv) in samples.taylor.iter().enumerate() {
                let q = (-(power + k as f64) * h).exp();
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let fact: f64 = (1..=k).product::<usize>().max(1) as f64;
                let coef = -(sign / fact) * t_lo.powf(power + k as f64) * h * q / (1.0 - q);
                acc.scaled_add(coef, mv);
            }
        }
        out.push(acc);
    }
    out
}

fn profile_with_doubling(
    op: &AssembledOperator,
    vector: &Array1<f64>,
    power: f64,
    ys_pos: &[f64],
    complement: bool,
    quad: &QuadratureOpts,
) -> Result<Vec<Array1<f64>>> {
    let norm1 = op.matrix.opnorm_one()?;
    if norm1 == 0.0 {
        return Err(CoreError::InvalidArgument(
            "zero operator has no nontrivial extension".into(),
        ));
    }
    if ys_pos.is_empty() {
        return Ok(Vec::new());
    }
    let t_lo = kernel_t_lo(norm1, ys_pos);
    let mut density = quad.initial_density.max(1);
    let mut prev = kernel_eval(
        &SemigroupSamples::build(op, vector, t_lo, density)?,
        power,
        ys_pos,
        complement,
    );
    let vscale = vector.dot(vector).sqrt().max(1e-300);
    let tscale = norm1.powf(-power.abs());
    while density < quad.max_density {
        density *= 2;
        let cur = kernel_eval(
            &SemigroupSamples::build(op, vector, t_lo, density)?,
            power,
            ys_pos,
            complement,
        );
        let mut worst: f64 = 0.0;
        for (a, b) in cur.iter().zip(prev.iter()) {
            let d = (a - b).dot(&(a - b)).sqrt();
            let s = a.dot(a).sqrt().max(1e-10 * vscale * tscale);
            worst = worst.max(d / s);
        }
        if worst <= quad.rtol {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(CoreError::QuadratureNonconvergence(format!(
        "extension profile still moving at {density} nodes per octave"
    )))
}

/// Extension through the kernel integral of the semigroup at the boundary
/// vector, evaluated at the given heights. Needs no fractional power of x0.
pub fn extend_poisson_at(
    op: &AssembledOperator,
    sigma: f64,
    x0: &Array1<f64>,
    ys: &[f64],
    opts: &ExtensionOpts,
) -> Result<ExtensionProfile> {
    check_inputs(op, sigma, x0, ys)?;
    let ys_pos: Vec<f64> = ys.iter().copied().filter(|&y| y > 0.0).collect();
    let raw = profile_with_doubling(op, x0, -sigma, &ys_pos, false, &opts.quad)?;
    let norm = 1.0 / (4.0f64.powf(sigma) * gamma(sigma));
    let mut values = Vec::with_capacity(ys.len());
    let mut k = 0;
    for &y in ys {
        if y == 0.0 {
            values.push(x0.clone());
        } else {
            values.push(&raw[k] * (y.powf(2.0 * sigma) * norm));
            k += 1;
        }
    }
    Ok(ExtensionProfile {
        sigma,
        ys: ys.to_vec(),
        values,
        ratio: detect_ratio(ys),
        route: ExtensionRoute::Poisson,
        base: op.clone(),
    })
}

pub fn extend_poisson(
    op: &AssembledOperator,
    sigma: f64,
    x0: &Array1<f64>,
    opts: &ExtensionOpts,
) -> Result<ExtensionProfile> {
    let ys = default_y_ladder(op, opts)?;
    extend_poisson_at(op, sigma, x0, &ys, opts)
}

/// Extension through the subordinated route: the fractional power
/// g = M^s x0 is computed first by the singular-integral route, and the
/// profile is x0 + (1/Gamma(s)) * integral of e^{-tM} g t^{s-1}
/// (e^{-y^2/4t} - 1) dt. This rearrangement of the subordinated kernel
/// integral is exact and stays valid when x0 has a kernel component: the
/// component rides along inside x0 instead of being lost to a divergent
/// integral.
pub fn extend_subordination_at(
    op: &AssembledOperator,
    sigma: f64,
    x0: &Array1<f64>,
    ys: &[f64],
    opts: &ExtensionOpts,
) -> Result<ExtensionProfile> {
    check_inputs(op, sigma, x0, ys)?;
    let g = frac_power_apply_balakrishnan(op, sigma, x0, &opts.quad)?;
    let ys_pos: Vec<f64> = ys.iter().copied().filter(|&y| y > 0.0).collect();
    let raw = profile_with_doubling(op, &g, sigma, &ys_pos, true, &opts.quad)?;
    let norm = 1.0 / gamma(sigma);
    let mut values = Vec::with_capacity(ys.len());
    let mut k = 0;
    for &y in ys {
        if y == 0.0 {
            values.push(x0.clone());
        } else {
            values.push(x0 + &(&raw[k] * norm));
            k += 1;
        }
    }
    Ok(ExtensionProfile {
        sigma,
        ys: ys.to_vec(),
        values,
        ratio: detect_ratio(ys),
        route: ExtensionRoute::Subordination,
        base: op.clone(),
    })
}

pub fn extend_subordination(
    op: &AssembledOperator,
    sigma: f64,
    x0: &Array1<f64>,
    opts: &ExtensionOpts,
) -> Result<ExtensionProfile> {
    let ys = default_y_ladder(op, opts)?;
    extend_subordination_at(op, sigma, x0, &ys, opts)
}

/// Extension by diagonalization; restricted to operators self-adjoint in
/// their weighted inner product.
pub fn extend_spectral_at(
    op: &AssembledOperator,
    sigma: f64,
    x0: &Array1<f64>,
    ys: &[f64],
) -> Result<ExtensionProfile> {
    check_inputs(op, sigma, x0, ys)?;
    if !op.symmetric {
        return Err(CoreError::NotApplicable(
            "the closed-form profile route needs a self-adjoint operator".into(),
        ));
    }
    let n = op.n();
    let sqrt_w = op.inner_weight.mapv(f64::sqrt);
    let mut b = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            b[[i, j]] = sqrt_w[i] * op.matrix[[i, j]] / sqrt_w[j];
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (b[[i, j]] + b[[j, i]]);
            b[[i, j]] = m;
            b[[j, i]] = m;
        }
    }
    let (vals, q) = b.eigh(UPLO::Upper)?;
    let scale = vals.iter().fold(0.0f64, |m, l| m.max(l.abs())).max(1e-300);
    for &l in vals.iter() {
        if l < -1e-10 * scale {
            return Err(CoreError::SpectrumOutOfSector(format!(
                "negative eigenvalue {l}"
            )));
        }
    }
    let y0 = q.t().dot(&(&sqrt_w * x0));
    let mut values = Vec::with_capacity(ys.len());
    for &y in ys {
        let mut coeffs = Array1::zeros(n);
        for i in 0..n {
            coeffs[i] = scalar_profile(sigma, vals[i].max(0.0), y) * y0[i];
        }
        values.push(&q.dot(&coeffs) / &sqrt_w);
    }
    Ok(ExtensionProfile {
        sigma,
        ys: ys.to_vec(),
        values,
        ratio: detect_ratio(ys),
        route: ExtensionRoute::Spectral,
        base: op.clone(),
    })
}

pub fn extend_spectral(
    op: &AssembledOperator,
    sigma: f64,
    x0: &Array1<f64>,
    opts: &ExtensionOpts,
) -> Result<ExtensionProfile> {
    let ys = default_y_ladder(op, opts)?;
    extend_spectral_at(op, sigma, x0, &ys)
}

/// Largest relative height-wise distance between two profiles on the same
/// ladder (positive heights only).
pub fn profile_distance(a: &ExtensionProfile, b: &ExtensionProfile) -> Result<f64> {
    if a.ys.len() != b.ys.len() || a.values.len() != b.values.len() {
        return Err(CoreError::DimensionMismatch(
            "profiles sampled on different ladders".into(),
        ));
    }
    let scale = a.values[0].dot(&a.values[0]).sqrt().max(1e-300);
    let mut worst: f64 = 0.0;
    for k in 0..a.ys.len() {
        if (a.ys[k] - b.ys[k]).abs() > 1e-12 * (1.0 + a.ys[k]) {
            return Err(CoreError::DimensionMismatch(
                "profiles sampled on different ladders".into(),
            ));
        }
        let d = (&a.values[k] - &b.values[k])
            .dot(&(&a.values[k] - &b.values[k]))
            .sqrt();
        let s = a.values[k].dot(&a.values[k]).sqrt().max(1e-9 * scale);
        worst = worst.max(d / s);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assemble::assemble_weighted_elliptic;
    use crate::field::{CoeffField, WeightField};
    use crate::grid::{Boundary, GridSpec};
    use crate::operator::OperatorFamily;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn wrap(m: Array2<f64>) -> AssembledOperator {
        let n = m.nrows();
        let grid = GridSpec::line(0.0, 1.0, n, Boundary::DirichletEliminated).unwrap();
        AssembledOperator::from_matrix(m, grid, OperatorFamily::WeightedElliptic).unwrap()
    }

    #[test]
    fn kernel_route_reproduces_the_scalar_closed_form() {
        let d = [0.5, 2.0, 7.0];
        let op = wrap(Array2::from_diag(&Array1::from(d.to_vec())));
        let x0 = array![1.0, -1.5, 2.0];
        let ys = [0.0, 0.05, 0.3, 1.0, 2.5];
        for sigma in [0.25, 0.3, 0.5, 0.75] {
            let p = extend_poisson_at(&op, sigma, &x0, &ys, &Default::default()).unwrap();
            for (k, &y) in ys.iter().enumerate() {
                for i in 0..3 {
                    let want = x0[i] * scalar_profile(sigma, d[i], y);
                    assert_relative_eq!(
                        p.values[k][i],
                        want,
                        max_relative = 3e-7,
                        epsilon = 1e-10
                    );
                }
            }
        }
    }

    #[test]
    fn half_power_profile_is_a_plain_exponential() {
        // bounded solution of x'' = x with x(0) = 1 is e^{-y}; at y = 1 both
        // routes must give e^{-1} = 0.36787944...
        let op = wrap(Array2::from_diag(&array![1.0, 4.0, 9.0]));
        let x0 = array![1.0, 1.0, 1.0];
        let ys = [0.0, 0.2, 1.0, 3.0];
        let p = extend_poisson_at(&op, 0.5, &x0, &ys, &Default::default()).unwrap();
        let s = extend_subordination_at(&op, 0.5, &x0, &ys, &Default::default()).unwrap();
        for (k, &y) in ys.iter().enumerate() {
            for (i, rate) in [1.0f64, 2.0, 3.0].iter().enumerate() {
                assert_relative_eq!(
                    p.values[k][i],
                    (-y * rate).exp(),
                    max_relative = 1e-7,
                    epsilon = 1e-10
                );
                assert_relative_eq!(
                    s.values[k][i],
                    (-y * rate).exp(),
                    max_relative = 1e-6,
                    epsilon = 1e-9
                );
            }
        }
        assert_relative_eq!(p.values[2][0], (-1.0f64).exp(), max_relative = 1e-7);
    }

    #[test]
    fn boundary_value_is_exact_and_small_heights_return_to_it() {
        let op = wrap(Array2::from_diag(&array![1.0, 2.0, 3.0]));
        let x0 = array![0.3, -0.7, 1.1];
        let p = extend_poisson(&op, 0.4, &x0, &Default::default()).unwrap();
        assert_eq!(p.ys[0], 0.0);
        assert_eq!(p.values[0], x0);
        // refining the smallest height drives the state back to x0, below
        // 1e-4 relative once the height is small enough
        let scale = x0.dot(&x0).sqrt();
        let ys = [0.0, 2e-6, 2e-5, 2e-4];
        let q = extend_poisson_at(&op, 0.4, &x0, &ys, &Default::default()).unwrap();
        let dev: Vec<f64> = (1..ys.len())
            .map(|k| (&q.values[k] - &x0).dot(&(&q.values[k] - &x0)).sqrt())
            .collect();
        assert!(dev[0] < dev[1] && dev[1] < dev[2], "no refinement gain: {dev:?}");
        assert!(dev[0] < 1e-4 * scale, "smallest height drifted {}", dev[0]);
    }

    #[test]
    fn kernel_and_subordinated_routes_agree() {
        let m = array![
            [2.0, -1.0, 0.0, 0.0],
            [-1.0, 2.0, -1.0, 0.0],
            [0.0, -1.0, 2.0, -1.0],
            [0.0, 0.0, -1.0, 2.0]
        ];
        let op = wrap(m);
        let x0 = array![1.0, 0.2, -0.5, 0.8];
        for sigma in [0.3, 0.5, 0.7] {
            let ys = default_y_ladder(&op, &Default::default()).unwrap();
            let a = extend_poisson_at(&op, sigma, &x0, &ys, &Default::default()).unwrap();
            let b = extend_subordination_at(&op, sigma, &x0, &ys, &Default::default()).unwrap();
            let d = profile_distance(&a, &b).unwrap();
            assert!(d < 1e-6, "sigma {sigma}: distance {d}");
        }
    }

    #[test]
    fn kernel_vector_rides_through_the_subordinated_route() {
        // periodic assembly annihilates constants; their subordinated profile
        // must stay exactly constant at every height
        let g = GridSpec::line(0.0, 1.0, 8, Boundary::Periodic).unwrap();
        let a = CoeffField::identity(&g);
        let w = WeightField::unit(&g);
        let op = assemble_weighted_elliptic(&g, &a, &w).unwrap();
        let x0 = Array1::from_elem(8, 1.0);
        let ys = [0.0, 0.01, 0.1, 1.0, 5.0];
        let p = extend_subordination_at(&op, 0.45, &x0, &ys, &Default::default()).unwrap();
        for v in &p.values {
            for &x in v.iter() {
                assert!((x - 1.0).abs() < 1e-9, "constant drifted to {x}");
            }
        }
    }

    #[test]
    fn kernel_and_spectral_routes_agree_on_a_weighted_assembly() {
        let g = GridSpec::line(0.0, 1.0, 10, Boundary::DirichletEliminated).unwrap();
        let a = CoeffField::identity(&g);
        let w = WeightField::exp_clipped(&g, 10.0).unwrap();
        let op = assemble_weighted_elliptic(&g, &a, &w).unwrap();
        let x0: Array1<f64> = (0..10).map(|i| 1.0 + ((i as f64) * 0.6).sin()).collect();
        let ys = default_y_ladder(&op, &Default::default()).unwrap();
        let p = extend_poisson_at(&op, 0.6, &x0, &ys, &Default::default()).unwrap();
        let s = extend_spectral_at(&op, 0.6, &x0, &ys).unwrap();
        let d = profile_distance(&p, &s).unwrap();
        assert!(d < 1e-6, "distance {d}");
    }

    #[test]
    fn profile_norm_decays_in_height() {
        let op = wrap(Array2::from_diag(&array![1.0, 3.0, 10.0]));
        let x0 = array![1.0, 1.0, 1.0];
        let p = extend_poisson(&op, 0.35, &x0, &Default::default()).unwrap();
        let mut prev = f64::INFINITY;
        for v in &p.values {
            let n = v.dot(v).sqrt();
            assert!(n <= prev * (1.0 + 1e-10));
            prev = n;
        }
        // far field is essentially gone
        assert!(prev < 0.2 * 3.0f64.sqrt());
    }

    #[test]
    fn nonnegative_boundary_data_gives_nonnegative_profiles() {
        // positivity-preserving assembly: the kernel integral has a positive
        // integrand, so states inherit the sign of the boundary vector
        let g = GridSpec::line(0.0, 1.0, 9, Boundary::DirichletEliminated).unwrap();
        let a = CoeffField::identity(&g);
        let w = WeightField::unit(&g);
        let op = assemble_weighted_elliptic(&g, &a, &w).unwrap();
        let x0: Array1<f64> = (0..9)
            .map(|i| (std::f64::consts::PI * (i as f64 + 1.0) / 10.0).sin())
            .collect();
        let p = extend_poisson(&op, 0.3, &x0, &Default::default()).unwrap();
        let floor = -1e-10 * x0.dot(&x0).sqrt();
        for v in &p.values {
            for &x in v.iter() {
                assert!(x >= floor, "negative state {x}");
            }
        }
    }

    #[test]
    fn rescaling_the_operator_rescales_the_heights() {
        // replacing M by c M and y by y / sqrt(c) leaves the profile alone
        let m = array![[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]];
        let c = 5.0;
        let op = wrap(m.clone());
        let op_scaled = wrap(&m * c);
        let x0 = array![1.0, -0.4, 0.7];
        let ys = [0.0, 0.08, 0.4, 1.6];
        let ys_scaled: Vec<f64> = ys.iter().map(|y| y / c.sqrt()).collect();
        let p = extend_poisson_at(&op, 0.6, &x0, &ys, &Default::default()).unwrap();
        let q = extend_poisson_at(&op_scaled, 0.6, &x0, &ys_scaled, &Default::default()).unwrap();
        for k in 0..ys.len() {
            let d = (&p.values[k] - &q.values[k])
                .dot(&(&p.values[k] - &q.values[k]))
                .sqrt();
            assert!(d < 1e-7, "height {k} moved by {d}");
        }
    }

    #[test]
    fn nonsymmetric_operator_is_rejected_by_the_spectral_route() {
        let op = wrap(array![[2.0, 1.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 1.0]]);
        let x0 = array![1.0, 1.0, 1.0];
        assert!(matches!(
            extend_spectral(&op, 0.5, &x0, &Default::default()),
            Err(CoreError::NotApplicable(_))
        ));
    }

    #[test]
    fn csv_export_has_header_heights_and_full_precision() {
        let op = wrap(Array2::from_diag(&array![1.0, 2.0, 3.0]));
        let x0 = array![0.25, -0.5, 1.0];
        let p = extend_poisson_at(&op, 0.5, &x0, &[0.0, 0.5, 1.0], &Default::default()).unwrap();
        let csv = p.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "y,component_0,component_1,component_2");
        assert_eq!(csv.lines().count(), 4);
        // round trip of a computed value keeps all bits
        let last = csv.lines().last().unwrap();
        let cell: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(cell, p.values[2][0]);
    }

    #[test]
    fn geometric_ladders_are_recognized() {
        let op = wrap(Array2::from_diag(&array![1.0, 2.0, 3.0]));
        let x0 = array![1.0, 1.0, 1.0];
        let p = extend_poisson(&op, 0.5, &x0, &Default::default()).unwrap();
        let r = p.ratio.expect("default ladder is geometric");
        assert_relative_eq!(r, 1.25, max_relative = 1e-9);
        let q =
            extend_poisson_at(&op, 0.5, &x0, &[0.0, 0.1, 0.2, 0.7], &Default::default()).unwrap();
        assert!(q.ratio.is_none());
    }
}
