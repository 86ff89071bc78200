//! Calderon-Zygmund-style diagnostics for nondivergence-form operators:
//! a global scan of the discrete second-derivative norm against the
//! graph norm, and a gradient-oscillation probe for first-derivative
//! smoothness of fractional solutions at small powers.

use crate::error::{CoreError, Result};
use crate::grid::GridSpec;
use crate::operator::{AssembledOperator, OperatorFamily};
use crate::verify::holder::loglog_fit;
use crate::verify::solve::FractionalSolve;
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use std::io::Write;

/// Forward difference quotient along one axis. Missing neighbors on
/// eliminated-boundary grids difference against the implicit zero exterior.
fn forward_quotient(grid: &GridSpec, u: &Array1<f64>, axis: usize) -> Array1<f64> {
    let h = grid.h(axis);
    (0..grid.n_nodes())
        .map(|i| match grid.neighbor(i, axis, 1) {
            Some(q) => (u[q] - u[i]) / h,
            None => (0.0 - u[i]) / h,
        })
        .collect()
}

fn lp_norm(grid: &GridSpec, u: &Array1<f64>, p: f64) -> f64 {
    let vol = grid.cell_volume();
    u.iter()
        .map(|v| v.abs().powf(p) * vol)
        .sum::<f64>()
        .powf(1.0 / p)
}

/// Discrete W^{2,p} norm: p-th roots of the summed p-th powers of the
/// function, all first quotients, and all second quotients.
fn w2p_norm(grid: &GridSpec, u: &Array1<f64>, p: f64) -> f64 {
    let mut total = lp_norm(grid, u, p).powf(p);
    for a in 0..grid.dim {
        let da = forward_quotient(grid, u, a);
        total += lp_norm(grid, &da, p).powf(p);
        for b in 0..grid.dim {
            let dba = forward_quotient(grid, &da, b);
            total += lp_norm(grid, &dba, p).powf(p);
        }
    }
    total.powf(1.0 / p)
}

#[derive(Debug, Clone, Serialize)]
pub struct W2pReport {
    pub p: f64,
    /// Per-sample quotient of the second-derivative norm by the graph norm.
    pub ratios: Vec<f64>,
    /// Largest observed quotient.
    pub c: f64,
}

impl W2pReport {
    pub fn to_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "sample,ratio")?;
        for (k, r) in self.ratios.iter().enumerate() {
            writeln!(out, "{k},{:.16e}", r)?;
        }
        Ok(())
    }
}

/// Scans samples for the largest quotient
/// `|u|_{W^{2,p}} / (|u|_p + |T u|_p)` of a nondivergence operator.
pub fn w2p_global_scan(
    op: &AssembledOperator,
    p: f64,
    samples: &[Array1<f64>],
) -> Result<W2pReport> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(CoreError::InvalidArgument(format!(
            "integrability exponent must be finite and > 1, got {p}"
        )));
    }
    if op.family != OperatorFamily::Nondivergence {
        return Err(CoreError::InvalidArgument(
            "second-derivative scan applies to nondivergence-form operators only".into(),
        ));
    }
    if samples.is_empty() {
        return Err(CoreError::InvalidArgument("no samples supplied".into()));
    }
    let grid = &op.grid;
    let mut ratios = Vec::with_capacity(samples.len());
    for (k, u) in samples.iter().enumerate() {
        if u.len() != op.n() {
            return Err(CoreError::DimensionMismatch(format!(
                "sample {k} has {} entries, operator has {}",
                u.len(),
                op.n()
            )));
        }
        let unorm = lp_norm(grid, u, p);
        if !(unorm > 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "sample {k} is identically zero"
            )));
        }
        let tu = op.apply(u);
        ratios.push(w2p_norm(grid, u, p) / (unorm + lp_norm(grid, &tu, p)));
    }
    let c = ratios.iter().fold(0.0f64, |m, &r| m.max(r));
    Ok(W2pReport { p, ratios, c })
}

/// Product of one sine per axis with the given integer frequencies.
pub fn fourier_mode(grid: &GridSpec, k: &[usize], phase: f64) -> Result<Array1<f64>> {
    if k.len() != grid.dim {
        return Err(CoreError::DimensionMismatch(format!(
            "{} frequencies for a {}-dimensional grid",
            k.len(),
            grid.dim
        )));
    }
    let n = grid.points_per_axis as f64;
    Ok((0..grid.n_nodes())
        .map(|i| {
            let mi = grid.multi_index(i);
            (0..grid.dim)
                .map(|a| {
                    (std::f64::consts::TAU * k[a] as f64 * mi[a] as f64 / n + phase).sin()
                })
                .product()
        })
        .collect())
}

/// Random superposition of modes with per-axis frequency at most `cutoff`.
pub fn low_pass_noise(grid: &GridSpec, cutoff: usize, seed: u64) -> Array1<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut u = Array1::zeros(grid.n_nodes());
    let mut freqs = vec![0usize; grid.dim];
    loop {
        // advance the multi-frequency odometer over [0, cutoff]^dim
        let mut axis = 0;
        loop {
            if axis == grid.dim {
                return u;
            }
            if freqs[axis] < cutoff {
                freqs[axis] += 1;
                break;
            }
            freqs[axis] = 0;
            axis += 1;
        }
        let weight = rng.gen_range(-1.0..1.0)
            / (1.0 + freqs.iter().map(|&f| (f * f) as f64).sum::<f64>());
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        let mode = fourier_mode(grid, &freqs, phase).expect("frequencies match the grid");
        u.scaled_add(weight, &mode);
    }
}

/// Unit impulse at one node.
pub fn point_mass(grid: &GridSpec, node: usize) -> Result<Array1<f64>> {
    if node >= grid.n_nodes() {
        return Err(CoreError::InvalidArgument(format!(
            "node {node} out of range ({} nodes)",
            grid.n_nodes()
        )));
    }
    let mut u = Array1::zeros(grid.n_nodes());
    u[node] = 1.0;
    Ok(u)
}

#[derive(Debug, Clone, Serialize)]
pub struct C1AlphaReport {
    pub sigma: f64,
    pub p: f64,
    /// Largest power admitted for this p.
    pub sigma_bound: f64,
    pub alphas: Vec<f64>,
    /// Fitted decay exponent of the gradient oscillation.
    pub gradient_decay: f64,
    /// Margin `gradient_decay - alpha` per requested alpha.
    pub exponents: Vec<f64>,
    pub radii: Vec<f64>,
    pub oscillations: Vec<f64>,
    pub pass: bool,
    /// Vanishing gradient oscillation passes without a fit.
    pub trivial: bool,
}

impl C1AlphaReport {
    pub fn to_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "alpha,exponent,pass")?;
        for (a, e) in self.alphas.iter().zip(&self.exponents) {
            writeln!(out, "{:.16e},{:.16e},{}", a, e, u8::from(*e > 0.0))?;
        }
        Ok(())
    }
}

/// Probes first-derivative smoothness of a fractional solution: fits the
/// decay of the gradient oscillation over dyadic balls around the domain
/// center and requires a positive margin over every requested exponent.
/// Powers at or above p/(p+1) are outside the admitted range and refused.
pub fn c1alpha_probe(solve: &FractionalSolve, alphas: &[f64], p: f64) -> Result<C1AlphaReport> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(CoreError::InvalidArgument(format!(
            "integrability exponent must be finite and > 1, got {p}"
        )));
    }
    if alphas.is_empty() {
        return Err(CoreError::InvalidArgument("no exponents requested".into()));
    }
    for &a in alphas {
        if !(a > 0.0 && a < 1.0) {
            return Err(CoreError::InvalidArgument(format!(
                "requested exponent {a} must lie in (0, 1)"
            )));
        }
    }
    let bound = p / (p + 1.0);
    if solve.sigma >= bound - 1e-12 {
        return Err(CoreError::InvalidArgument(format!(
            "power {} is outside the admitted range (0, {:.6}) for p = {p}",
            solve.sigma, bound
        )));
    }

    let grid = &solve.grid;
    let grads: Vec<Array1<f64>> = (0..grid.dim)
        .map(|a| forward_quotient(grid, &solve.solution, a))
        .collect();
    let gradscale = grads
        .iter()
        .flat_map(|g| g.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let trivial_report = |radii: Vec<f64>, oscs: Vec<f64>| C1AlphaReport {
        sigma: solve.sigma,
        p,
        sigma_bound: bound,
        alphas: alphas.to_vec(),
        gradient_decay: 0.0,
        exponents: Vec::new(),
        radii,
        oscillations: oscs,
        pass: true,
        trivial: true,
    };
    // solver noise on a constant solution leaves O(eps/h) quotients, so the
    // trivial branch compares the gradient against the solution scale
    let uscale = solve
        .solution
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let hmin = (0..grid.dim)
        .map(|a| grid.h(a))
        .fold(f64::INFINITY, f64::min);
    if gradscale * hmin <= 1e-13 * uscale {
        return Ok(trivial_report(Vec::new(), Vec::new()));
    }

    // dyadic radii from 2h around the node nearest the domain center, while
    // the ball stays inside the interior set
    let mid: Vec<f64> = grid.extents.iter().map(|e| 0.5 * (e[0] + e[1])).collect();
    let center = (0..grid.n_nodes())
        .min_by(|&a, &b| {
            let da: f64 = grid
                .coord(a)
                .iter()
                .zip(&mid)
                .map(|(c, m)| (c - m) * (c - m))
                .sum();
            let db: f64 = grid
                .coord(b)
                .iter()
                .zip(&mid)
                .map(|(c, m)| (c - m) * (c - m))
                .sum();
            da.total_cmp(&db)
        })
        .expect("grids are nonempty");
    if !solve.is_interior(center) {
        return Err(CoreError::InvalidArgument(format!(
            "domain-center node {center} is not in the interior set"
        )));
    }
    let hmax = (0..grid.dim).map(|a| grid.h(a)).fold(0.0f64, f64::max);
    let mut radii = Vec::new();
    let mut r = 2.0 * hmax;
    loop {
        let members: Vec<usize> = (0..grid.n_nodes())
            .filter(|&q| grid.dist(center, q) <= r * (1.0 + 1e-12))
            .collect();
        if !members.iter().all(|&q| solve.is_interior(q)) {
            break;
        }
        radii.push(r);
        r *= 2.0;
    }
    if radii.len() < 4 {
        return Err(CoreError::GridTooCoarse(format!(
            "only {} dyadic gradient radii fit inside the interior set; need 4",
            radii.len()
        )));
    }

    let mut oscs = Vec::with_capacity(radii.len());
    for &rho in &radii {
        let members: Vec<usize> = (0..grid.n_nodes())
            .filter(|&q| grid.dist(center, q) <= rho * (1.0 + 1e-12))
            .collect();
        let osc = grads
            .iter()
            .map(|g| {
                let max = members.iter().map(|&q| g[q]).fold(f64::NEG_INFINITY, f64::max);
                let min = members.iter().map(|&q| g[q]).fold(f64::INFINITY, f64::min);
                max - min
            })
            .fold(0.0f64, f64::max);
        oscs.push(osc);
    }
    if oscs.iter().all(|&o| o <= 1e-13 * gradscale) {
        return Ok(trivial_report(radii, oscs));
    }
    let points: Vec<(f64, f64)> = radii
        .iter()
        .zip(&oscs)
        .filter(|(_, &o)| o > 1e-13 * gradscale)
        .map(|(&rho, &o)| (rho, o))
        .collect();
    if points.len() < 3 {
        return Err(CoreError::NotApplicable(format!(
            "only {} radii carry gradient oscillation; decay exponent undefined",
            points.len()
        )));
    }
    let (beta, _, _) = loglog_fit(&points);
    let exponents: Vec<f64> = alphas.iter().map(|a| beta - a).collect();
    let pass = exponents.iter().all(|&e| e > 0.0);
    Ok(C1AlphaReport {
        sigma: solve.sigma,
        p,
        sigma_bound: bound,
        alphas: alphas.to_vec(),
        gradient_decay: beta,
        exponents,
        radii,
        oscillations: oscs,
        pass,
        trivial: false,
    })
}
