//! Boundary behavior of extension profiles: the weighted one-sided limits
//! that recover the fractional power at y = 0, interior residuals of the
//! governing two-point equation, and the scale-invariant bounds the profile
//! obeys in the interior.

use crate::calculus::fracpow::{frac_power_apply_balakrishnan, QuadratureOpts};
use crate::error::{CoreError, Result};
use crate::extension::profile::{ExtensionOpts, ExtensionProfile};
use crate::operator::AssembledOperator;
use crate::special::gamma;
use ndarray::{Array1, Array2};

/// Coefficient in front of the fractional power in the small-height law
/// (x(y) - x0) / y^{2s} -> coef * T^s x0. Negative for s in (0,1).
pub fn quotient_coefficient(sigma: f64) -> f64 {
    gamma(-sigma) / (4.0f64.powf(sigma) * gamma(sigma))
}

/// Finite-difference weights on arbitrary nodes `xs` for derivatives of
/// order 0..=m at the point `z`. Row k of the result holds the weights of
/// the k-th derivative.
pub fn fornberg_weights(z: f64, xs: &[f64], m: usize) -> Array2<f64> {
    let n = xs.len();
    assert!(n > m, "need more nodes than the derivative order");
    let mut c = Array2::<f64>::zeros((m + 1, n));
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    c[[0, 0]] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[[k, i]] = c1 * ((k as f64) * c[[k - 1, i - 1]] - c5 * c[[k, i - 1]]) / c2;
                }
                c[[0, i]] = -c1 * c5 * c[[0, i - 1]] / c2;
            }
            for k in (1..=mn).rev() {
                c[[k, j]] = (c4 * c[[k, j]] - (k as f64) * c[[k - 1, j]]) / c3;
            }
            c[[0, j]] = c4 * c[[0, j]] / c3;
        }
        c1 = c2;
    }
    c
}

/// Derivative of given order at each requested node index, using sliding
/// windows of `width` nodes from the node/value lists. Values are taken
/// relative to the value at the expansion node so stencil-weight roundoff
/// never leaks a multiple of the state itself into the derivative (constant
/// profiles differentiate to exactly zero).
fn window_derivatives(
    xs: &[f64],
    values: &[Array1<f64>],
    order: usize,
    width: usize,
    at: &[usize],
) -> Vec<Array1<f64>> {
    let n = xs.len();
    let dim = values[0].len();
    let mut out = Vec::with_capacity(at.len());
    for &j in at {
        let lo = j.saturating_sub(width / 2).min(n - width);
        let w = fornberg_weights(xs[j], &xs[lo..lo + width], order);
        let mut d = Array1::<f64>::zeros(dim);
        for (c, v) in w.row(order).iter().zip(&values[lo..lo + width]) {
            if order == 0 {
                d.scaled_add(*c, v);
            } else {
                d.scaled_add(*c, &(v - &values[j]));
            }
        }
        out.push(d);
    }
    out
}

#[derive(Debug, Clone)]
pub struct OdeResidualReport {
    /// Heights where the interior equation was tested.
    pub ys: Vec<f64>,
    /// Residual of -Mx + ((1-2s)/y) x' + x'' at each height, relative to the
    /// sum of the magnitudes of its three terms.
    pub rel: Vec<f64>,
    /// Largest relative residual over the middle half of the ladder.
    pub max_rel_mid: f64,
}

/// Checks that a profile satisfies the interior two-point equation, using
/// five-node stencils in y on the profile's own ladder.
pub fn ode_residual(profile: &ExtensionProfile) -> Result<OdeResidualReport> {
    let op = &profile.base;
    let p0 = profile.first_positive();
    let ys = &profile.ys[p0..];
    let vals = &profile.values[p0..];
    if ys.len() < 7 {
        return Err(CoreError::GridTooCoarse(
            "need at least seven positive heights for interior residuals".into(),
        ));
    }
    let idx: Vec<usize> = (2..ys.len() - 2).collect();
    let d1 = window_derivatives(ys, vals, 1, 5, &idx);
    let d2 = window_derivatives(ys, vals, 2, 5, &idx);
    let coef = 1.0 - 2.0 * profile.sigma;
    let mut out_ys = Vec::new();
    let mut rel = Vec::new();
    for (k, &j) in idx.iter().enumerate() {
        let y = ys[j];
        let mu = op.apply(&vals[j]);
        let t1 = &d1[k] * (coef / y);
        let r = &t1 + &d2[k] - &mu;
        let denom = op.weighted_norm(&mu) + op.weighted_norm(&t1) + op.weighted_norm(&d2[k]);
        out_ys.push(y);
        rel.push(op.weighted_norm(&r) / denom.max(1e-300));
    }
    let q = rel.len() / 4;
    let max_rel_mid = rel[q..rel.len() - q].iter().fold(0.0f64, |m, &r| m.max(r));
    Ok(OdeResidualReport {
        ys: out_ys,
        rel,
        max_rel_mid,
    })
}

/// One stage of sequence acceleration on a geometric ladder: removes the
/// y^e term from values sampled at y_k = y_0 ratio^k.
fn richardson_stage(table: &[Array1<f64>], ratio: f64, e: f64) -> Vec<Array1<f64>> {
    let r = ratio.powf(e);
    let mut out = Vec::with_capacity(table.len().saturating_sub(1));
    for k in 0..table.len().saturating_sub(1) {
        out.push((&table[k] * r - &table[k + 1]) / (r - 1.0));
    }
    out
}

/// Runs the three-exponent acceleration ladder and returns the entry where
/// consecutive accelerated values stabilize.
fn accelerate(seq: &[Array1<f64>], ratio: f64, exps: &[f64; 3]) -> Result<Array1<f64>> {
    if seq.len() < 5 {
        return Err(CoreError::GridTooCoarse(
            "need at least five ladder points to accelerate".into(),
        ));
    }
    let mut table = seq.to_vec();
    for &e in exps {
        table = richardson_stage(&table, ratio, e);
    }
    let mut best = 0;
    let mut best_gap = f64::INFINITY;
    for k in 0..table.len() - 1 {
        let d = &table[k + 1] - &table[k];
        let gap = d.dot(&d).sqrt();
        if gap < best_gap {
            best_gap = gap;
            best = k;
        }
    }
    Ok(table[best].clone())
}

/// Median empirical convergence order of a sequence sampled on a geometric
/// ladder (ascending toward larger y; the limit sits at the small-y end),
/// together with the largest consecutive jump for judging significance.
fn observed_order(seq: &[Array1<f64>], ratio: f64) -> (f64, f64) {
    let mut diffs = Vec::with_capacity(seq.len().saturating_sub(1));
    for k in 0..seq.len().saturating_sub(1) {
        let d = &seq[k + 1] - &seq[k];
        diffs.push(d.dot(&d).sqrt());
    }
    let dmax = diffs.iter().fold(0.0f64, |m, &d| m.max(d));
    let mut ords: Vec<f64> = diffs
        .windows(2)
        .filter(|w| w[0] > 0.0 && w[1] > 0.0)
        .map(|w| (w[1] / w[0]).ln() / ratio.ln())
        .collect();
    if ords.is_empty() {
        return (0.0, dmax);
    }
    ords.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (ords[ords.len() / 2], dmax)
}

#[derive(Debug, Clone)]
pub struct LimitReport {
    pub sigma: f64,
    /// Predicted quotient/flux limit: quotient_coefficient(sigma) times the
    /// independently supplied fractional power of x0.
    pub target: Array1<f64>,
    /// Predicted second-form limit: (2s-1) times `target`.
    pub target_second: Array1<f64>,
    /// Extrapolated limit of (x(y) - x0) / y^{2s}.
    pub estimate_quotient: Array1<f64>,
    /// Extrapolated limit of y^{1-2s} x'(y) / 2s, computed as dx/dz at z = 0
    /// with z = y^{2s}.
    pub estimate_flux: Array1<f64>,
    /// Extrapolated limit of y^{2-2s} x''(y) / 2s, computed as
    /// (2s-1) x_z + 2s z x_zz.
    pub estimate_second: Array1<f64>,
    /// Median empirical convergence orders of the three raw sequences before
    /// extrapolation (quotient, flux, second); 0 for sequences already at
    /// roundoff level.
    pub richardson_orders: [f64; 3],
    /// quotient_coefficient(sigma).
    pub coefficient: f64,
    /// Relative errors against the targets, measured in the base operator's
    /// weighted norm on the scale |coefficient| * ||oracle||.
    pub rel_quotient: f64,
    pub rel_flux: f64,
    pub rel_second: f64,
    /// Mutual agreement of the quotient and flux estimates on the same scale.
    pub rel_mutual: f64,
}

/// Extracts the three weighted boundary limits of the extension profile
/// and compares them with an independently computed fractional power
/// `oracle` = T^s x0 (for example from the singular-integral route). Errors
/// when the ladder is not geometric, does not reach small enough heights,
/// or produces sequences that fail to settle monotonically.
pub fn neumann_limits(profile: &ExtensionProfile, oracle: &Array1<f64>) -> Result<LimitReport> {
    let op = &profile.base;
    let sigma = profile.sigma;
    let x0 = &profile.values[0];
    if oracle.len() != x0.len() {
        return Err(CoreError::DimensionMismatch(format!(
            "oracle has {} entries, profile has {}",
            oracle.len(),
            x0.len()
        )));
    }
    let ratio = profile.ratio.ok_or_else(|| {
        CoreError::InvalidArgument(
            "boundary limits need a geometric height ladder with a stored ratio".into(),
        )
    })?;
    let p0 = profile.first_positive();
    let npos = profile.ys.len() - p0;
    if npos < 8 {
        return Err(CoreError::GridTooCoarse(
            "need at least eight positive heights for boundary limits".into(),
        ));
    }
    let lam_max = crate::dense::matrix_2norm_est(&op.matrix).max(1e-300);
    if profile.ys[p0] > 1e-3 / lam_max.sqrt() {
        return Err(CoreError::GridTooCoarse(format!(
            "smallest height {} does not resolve the boundary layer; need <= {}",
            profile.ys[p0],
            1e-3 / lam_max.sqrt()
        )));
    }
    // use the lower part of the ladder, where the small-height expansion rules
    let keep = (npos * 3 / 4).max(8).min(npos);
    let ys: Vec<f64> = profile.ys[p0..p0 + keep].to_vec();
    let vals: Vec<Array1<f64>> = profile.values[p0..p0 + keep].to_vec();
    let exps = [2.0 - 2.0 * sigma, 2.0, 4.0 - 2.0 * sigma];

    // quotient estimator: no differentiation involved
    let quot_seq: Vec<Array1<f64>> = ys
        .iter()
        .zip(vals.iter())
        .map(|(&y, v)| (v - x0) / y.powf(2.0 * sigma))
        .collect();

    // derivative estimators in the flattening coordinate z = y^{2s}, with the
    // exact boundary value anchored at z = 0
    let mut zs = vec![0.0];
    zs.extend(ys.iter().map(|&y| y.powf(2.0 * sigma)));
    let mut zvals = vec![x0.clone()];
    zvals.extend(vals.iter().cloned());
    let idx: Vec<usize> = (1..zs.len()).collect();
    let dz1 = window_derivatives(&zs, &zvals, 1, 5, &idx);
    let dz2 = window_derivatives(&zs, &zvals, 2, 5, &idx);
    let second_seq: Vec<Array1<f64>> = idx
        .iter()
        .enumerate()
        .map(|(k, &j)| &dz1[k] * (2.0 * sigma - 1.0) + &dz2[k] * (2.0 * sigma * zs[j]))
        .collect();

    let coefficient = quotient_coefficient(sigma);
    let oracle_norm = op.weighted_norm(oracle);
    let scale = (coefficient.abs() * oracle_norm).max(1e-300);
    let noise_floor = 1e-7
        * (coefficient.abs() * oracle_norm).max(op.weighted_norm(x0))
        + 1e-300;
    let mut richardson_orders = [0.0f64; 3];
    for (slot, seq) in [&quot_seq, &dz1, &second_seq].into_iter().enumerate() {
        let (ord, dmax) = observed_order(seq, ratio);
        if dmax <= noise_floor {
            continue;
        }
        if ord <= 0.05 {
            return Err(CoreError::QuadratureNonconvergence(format!(
                "boundary-limit sequence {slot} is not settling (observed order {ord:.3})"
            )));
        }
        richardson_orders[slot] = ord;
    }

    let estimate_quotient = accelerate(&quot_seq, ratio, &exps)?;
    // dz1[k] is sampled at z_{k+1} = y_k^{2s}; in terms of y its deviation
    // from the limit runs through the same exponents as the quotient, because
    // z^{e/2s} = y^e, so the same acceleration ladder applies
    let estimate_flux = accelerate(&dz1, ratio, &exps)?;
    let estimate_second = accelerate(&second_seq, ratio, &exps)?;

    let target = oracle * coefficient;
    let target_second = &target * (2.0 * sigma - 1.0);
    let rel_quotient = op.weighted_norm(&(&estimate_quotient - &target)) / scale;
    let rel_flux = op.weighted_norm(&(&estimate_flux - &target)) / scale;
    let rel_second = op.weighted_norm(&(&estimate_second - &target_second)) / scale;
    let rel_mutual = op.weighted_norm(&(&estimate_quotient - &estimate_flux)) / scale;
    Ok(LimitReport {
        sigma,
        target,
        target_second,
        estimate_quotient,
        estimate_flux,
        estimate_second,
        richardson_orders,
        coefficient,
        rel_quotient,
        rel_flux,
        rel_second,
        rel_mutual,
    })
}

/// Convenience wrapper: builds the kernel-route profile and the
/// singular-integral oracle, then extracts the limits.
pub fn neumann_limits_poisson(
    op: &AssembledOperator,
    sigma: f64,
    x0: &Array1<f64>,
    opts: &ExtensionOpts,
) -> Result<LimitReport> {
    let profile = crate::extension::profile::extend_poisson(op, sigma, x0, opts)?;
    let oracle = frac_power_apply_balakrishnan(op, sigma, x0, &opts.quad)?;
    neumann_limits(&profile, &oracle)
}

#[derive(Debug, Clone)]
pub struct DerivativeBoundReport {
    /// Orders of differentiation covered, starting at 0.
    pub orders: Vec<usize>,
    /// sup over the ladder of y^n ||x^(n)(y)|| / ||x0|| for each order.
    pub sup_scaled: Vec<f64>,
    /// Height attaining each sup.
    pub argmax_y: Vec<f64>,
}

/// Scale-invariant interior derivative bounds: for each order n up to
/// `max_order` (at most 3), the profile must keep y^n ||x^(n)(y)|| below a
/// fixed multiple of ||x0||. Order 0 is the plain norm bound sup ||x(y)||.
pub fn derivative_bound_scan(
    profile: &ExtensionProfile,
    max_order: usize,
) -> Result<DerivativeBoundReport> {
    if max_order > 3 {
        return Err(CoreError::InvalidArgument(
            "derivative orders 0..=3 are supported".into(),
        ));
    }
    let op = &profile.base;
    let p0 = profile.first_positive();
    let ys = &profile.ys[p0..];
    let vals = &profile.values[p0..];
    if ys.is_empty() || (max_order >= 1 && ys.len() < 9) {
        return Err(CoreError::GridTooCoarse(
            "need at least nine positive heights for derivative bounds".into(),
        ));
    }
    let x0_norm = op.weighted_norm(&profile.values[0]).max(1e-300);
    let mut orders = Vec::new();
    let mut sup_scaled = Vec::new();
    let mut argmax_y = Vec::new();
    {
        let mut sup = 0.0f64;
        let mut arg = ys[0];
        for (&y, v) in ys.iter().zip(vals.iter()) {
            let r = op.weighted_norm(v) / x0_norm;
            if r > sup {
                sup = r;
                arg = y;
            }
        }
        orders.push(0);
        sup_scaled.push(sup);
        argmax_y.push(arg);
    }
    if max_order >= 1 {
        let idx: Vec<usize> = (2..ys.len() - 2).collect();
        for n in 1..=max_order {
            let d = window_derivatives(ys, vals, n, 5, &idx);
            let mut sup = 0.0f64;
            let mut arg = ys[idx[0]];
            for (k, &j) in idx.iter().enumerate() {
                let v = ys[j].powi(n as i32) * op.weighted_norm(&d[k]) / x0_norm;
                if v > sup {
                    sup = v;
                    arg = ys[j];
                }
            }
            orders.push(n);
            sup_scaled.push(sup);
            argmax_y.push(arg);
        }
    }
    Ok(DerivativeBoundReport {
        orders,
        sup_scaled,
        argmax_y,
    })
}

#[derive(Debug, Clone)]
pub struct FracNormReport {
    pub ys: Vec<f64>,
    /// ||T^s x(y)|| / ||T^s x0|| at each height.
    pub ratios: Vec<f64>,
    pub sup: f64,
}

/// Checks that the fractional power of each profile state stays bounded by
/// the fractional power of the boundary vector, uniformly in height. Not
/// applicable when x0 lies in the kernel (the reference norm vanishes).
pub fn frac_norm_scan(profile: &ExtensionProfile, quad: &QuadratureOpts) -> Result<FracNormReport> {
    let op = &profile.base;
    let sigma = profile.sigma;
    let g0 = frac_power_apply_balakrishnan(op, sigma, &profile.values[0], quad)?;
    let gnorm = op.weighted_norm(&g0);
    if gnorm <= 1e-13 * op.weighted_norm(&profile.values[0]) {
        return Err(CoreError::NotApplicable(
            "fractional power of the boundary vector vanishes; nothing to bound against".into(),
        ));
    }
    let mut ratios = Vec::with_capacity(profile.ys.len());
    for v in &profile.values {
        let g = frac_power_apply_balakrishnan(op, sigma, v, quad)?;
        ratios.push(op.weighted_norm(&g) / gnorm);
    }
    let sup = ratios.iter().fold(0.0f64, |m, &r| m.max(r));
    Ok(FracNormReport {
        ys: profile.ys.clone(),
        ratios,
        sup,
    })
}

#[derive(Debug, Clone)]
pub struct StrongLimitReport {
    pub ys: Vec<f64>,
    /// ||M x(y) - M x0|| / ||M x0|| at each height (positive heights only).
    pub errs: Vec<f64>,
    /// The error at the smallest positive height.
    pub at_min: f64,
}

/// Checks that M applied to the profile converges back to M x0 at the
/// boundary. For kernel vectors both sides vanish and the report is all
/// zeros.
pub fn strong_limit_check(profile: &ExtensionProfile) -> Result<StrongLimitReport> {
    let op = &profile.base;
    let mx0 = op.apply(&profile.values[0]);
    // kernel vectors give M x0 = 0; measure the (also vanishing) deviation
    // against the roundoff scale ||M|| ||x0|| instead of dividing by zero
    let floor = 1e-13
        * crate::dense::matrix_2norm_est(&op.matrix)
        * op.weighted_norm(&profile.values[0]);
    let scale = op.weighted_norm(&mx0).max(floor).max(1e-300);
    let p0 = profile.first_positive();
    if p0 >= profile.ys.len() {
        return Err(CoreError::GridTooCoarse(
            "profile has no positive heights".into(),
        ));
    }
    let mut ys = Vec::new();
    let mut errs = Vec::new();
    for k in p0..profile.ys.len() {
        let e = op.weighted_norm(&(op.apply(&profile.values[k]) - &mx0)) / scale;
        ys.push(profile.ys[k]);
        errs.push(e);
    }
    let at_min = errs[0];
    Ok(StrongLimitReport { ys, errs, at_min })
}
