//! Suite runners behind the command-line interface.
//!
//! Each runner assembles the operator described by a JSON run description,
//! exercises one family of checks, and returns pass/fail lines plus CSV
//! artifacts. Configuration problems (bad sigma ranges, wrong assembly
//! families, grids too coarse for a scan) surface as `Err(String)` and map
//! to exit code 2; genuine check failures stay inside the returned report.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_4, TAU};
use std::path::Path;

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde_json::{json, Value};

use fracext_core::balls::BallFamily;
use fracext_core::calculus::{
    dirichlet_form_check, frac_power_apply_balakrishnan, frac_power_apply_spectral,
    sectoriality_scan, QuadratureOpts,
};
use fracext_core::error::CoreError;
use fracext_core::extension::{
    extend_poisson, extend_poisson_at, extend_spectral, extend_subordination,
    derivative_bound_scan, frac_norm_scan, neumann_limits_poisson, ode_residual,
    profile_distance, quotient_coefficient, strong_limit_check, ExtensionOpts,
};
use fracext_core::grid::{Boundary, GridSpec};
use fracext_core::metric::{metric_balls, subunit_distance};
use fracext_core::verify::{
    c1alpha_probe, flag_condition_check, fourier_mode, harnack_ensemble, harnack_ratio,
    holder_fit, boundary_holder_check, low_pass_noise, point_mass, solve_fractional_dirichlet,
    w2p_global_scan, FractionalSolve,
};

use crate::ingest::{load_spec_value, refined_value, AssemblyKind, LoadedSpec};
use crate::report::{json_num, Check};

/// Named check families selectable with `verify --suite`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Limits,
    PoissonEquivalence,
    DerivativeBounds,
    Harnack,
    Holder,
    BoundaryHolder,
    Sectoriality,
    FormCheck,
    Subelliptic,
    Nondivergence,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Limits => "limits",
            Suite::PoissonEquivalence => "poisson-equivalence",
            Suite::DerivativeBounds => "derivative-bounds",
            Suite::Harnack => "harnack",
            Suite::Holder => "holder",
            Suite::BoundaryHolder => "boundary-holder",
            Suite::Sectoriality => "sectoriality",
            Suite::FormCheck => "form-check",
            Suite::Subelliptic => "subelliptic",
            Suite::Nondivergence => "nondivergence",
        }
    }
}

/// Default tolerance table for a suite; every entry can be overridden on the
/// command line with `--tol name=value`.
pub fn suite_defaults(suite: Suite) -> &'static [(&'static str, f64)] {
    match suite {
        Suite::Limits => &[("limit-rel", 1e-3), ("min-order", 0.5)],
        Suite::PoissonEquivalence => &[("route-rel", 1e-6)],
        Suite::DerivativeBounds => &[("sup-cap", 50.0), ("drift", 0.05), ("frac-slack", 1e-6)],
        Suite::Harnack => &[("samples", 20.0), ("scale-tol", 1e-12), ("drift", 0.2)],
        Suite::Holder => &[("drift", 0.2), ("classical-slack", 0.05)],
        Suite::BoundaryHolder => &[("classical-slack", 0.05)],
        Suite::Sectoriality => &[("per-decade", 3.0)],
        Suite::FormCheck => &[("pairs", 10000.0), ("angle-slack", 0.05)],
        Suite::Subelliptic => &[("samples", 10.0), ("scale-tol", 1e-12)],
        Suite::Nondivergence => &[("exponent-p", 2.0), ("quotient-cap", 10.0), ("drift", 0.25)],
    }
}

pub const ASSEMBLE_DEFAULTS: &[(&str, f64)] = &[];
pub const FRACPOW_DEFAULTS: &[(&str, f64)] = &[("route-rel", 1e-6)];
pub const EXTEND_DEFAULTS: &[(&str, f64)] = &[("ode-rel", 5e-3), ("trace-rel", 0.1)];

/// Everything a runner needs: the parsed run description (raw JSON kept for
/// mesh-refinement rebuilds), resolved tolerances, and the output directory
/// for CSV artifacts.
pub struct RunCtx<'a> {
    pub raw: &'a Value,
    pub spec: &'a LoadedSpec,
    pub sigma: Option<f64>,
    pub seed: u64,
    pub tols: &'a BTreeMap<String, f64>,
    pub out_dir: &'a Path,
}

pub struct SuiteOutcome {
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
}

impl RunCtx<'_> {
    fn tol(&self, name: &str) -> f64 {
        *self
            .tols
            .get(name)
            .unwrap_or_else(|| panic!("tolerance {name} missing from resolved table"))
    }

    /// Power required strictly inside (0, 1).
    fn sigma_strict(&self) -> Result<f64, String> {
        match self.sigma {
            Some(s) if s > 0.0 && s < 1.0 => Ok(s),
            Some(s) => Err(format!(
                "sigma {s} is outside the open interval (0, 1) required here"
            )),
            None => Err("this run needs --sigma strictly between 0 and 1".into()),
        }
    }

    /// Power in (0, 1]; the classical endpoint sigma = 1 is admitted.
    fn sigma_closed_top(&self) -> Result<f64, String> {
        match self.sigma {
            Some(s) if s > 0.0 && s <= 1.0 => Ok(s),
            Some(s) => Err(format!(
                "sigma {s} is outside the admitted range (0, 1] for this suite"
            )),
            None => Err("this suite needs --sigma in (0, 1]".into()),
        }
    }
}

fn save_artifact(
    ctx: &RunCtx,
    name: &str,
    contents: &str,
    artifacts: &mut Vec<String>,
) -> Result<(), String> {
    let path = ctx.out_dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| format!("cannot write artifact {}: {e}", path.display()))?;
    artifacts.push(name.to_string());
    Ok(())
}

fn csv_string(
    f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
) -> Result<String, String> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| format!("cannot render CSV: {e}"))?;
    String::from_utf8(buf).map_err(|e| format!("CSV is not UTF-8: {e}"))
}

/// A check that records a computation the suite could not finish; the error
/// text goes into the detail column so the report stays self-explanatory.
fn failed(name: &str, err: &CoreError) -> Check {
    Check::holds(name, false, Value::Null, &err.to_string())
}

fn refined_spec(ctx: &RunCtx) -> Result<(Value, LoadedSpec), String> {
    let rv = refined_value(ctx.raw).map_err(|e| e.to_string())?;
    let loaded = load_spec_value(&rv).map_err(|e| e.to_string())?;
    Ok((rv, loaded))
}

/// Splits nodes into the interior set used for constrained solves and its
/// complement carrying the prescribed data: the geometric shell for
/// eliminated-boundary grids, the first cross-section for periodic ones.
fn edge_split(grid: &GridSpec) -> (Vec<usize>, Vec<usize>) {
    let mut interior = Vec::new();
    let mut boundary = Vec::new();
    for i in 0..grid.n_nodes() {
        let mi = grid.multi_index(i);
        let on_edge = match grid.boundary {
            Boundary::DirichletEliminated => {
                (0..grid.dim).any(|a| mi[a] == 0 || mi[a] + 1 == grid.points_per_axis)
            }
            Boundary::Periodic => mi[0] == 0,
        };
        if on_edge {
            boundary.push(i);
        } else {
            interior.push(i);
        }
    }
    (interior, boundary)
}

fn axis_fraction(grid: &GridSpec, node: usize, axis: usize) -> f64 {
    let [lo, hi] = grid.extents[axis];
    (grid.coord(node)[axis] - lo) / (hi - lo)
}

/// Strictly positive data with genuine variation: values stay inside
/// [0.5, 1.0] so every nonnegative-solution scan has room on both sides.
fn positive_boundary_data(grid: &GridSpec, nodes: &[usize]) -> Vec<f64> {
    nodes
        .iter()
        .map(|&b| {
            let t = axis_fraction(grid, b, 0);
            let s = if grid.dim > 1 {
                axis_fraction(grid, b, 1)
            } else {
                0.25
            };
            0.75 + 0.2 * (TAU * t).sin() + 0.05 * (TAU * s).cos()
        })
        .collect()
}

/// Linearly growing data used by the regularity suites; its classical
/// harmonic continuation is the ramp itself. On periodic grids the
/// constrained set is the first cross-section, where the leading axis is
/// constant, so the ramp runs along the last axis there instead.
fn ramp_boundary_data(grid: &GridSpec, nodes: &[usize]) -> Vec<f64> {
    let axis = match grid.boundary {
        Boundary::DirichletEliminated => 0,
        Boundary::Periodic => grid.dim - 1,
    };
    nodes.iter().map(|&b| axis_fraction(grid, b, axis)).collect()
}

/// Node closest to the midpoint of the extents.
fn center_node(grid: &GridSpec) -> usize {
    let mid: Vec<f64> = (0..grid.dim)
        .map(|a| 0.5 * (grid.extents[a][0] + grid.extents[a][1]))
        .collect();
    let dist2 = |i: usize| -> f64 {
        let c = grid.coord(i);
        (0..grid.dim).map(|a| (c[a] - mid[a]).powi(2)).sum()
    };
    (0..grid.n_nodes())
        .min_by(|&i, &j| dist2(i).total_cmp(&dist2(j)))
        .expect("grids always carry at least one node")
}

/// Smooth boundary vector for the half-space extension runs: a mix of low
/// modes compatible with the boundary condition, so its spectral content
/// decays fast and height scans converge under mesh refinement. On
/// eliminated-boundary grids the modes vanish at the walls (a wall jump
/// would smear energy across all frequencies); on periodic grids they are
/// mean-free, staying clear of the constant flat direction.
fn extension_boundary_vector(grid: &GridSpec) -> Array1<f64> {
    use std::f64::consts::PI;
    Array1::from_iter((0..grid.n_nodes()).map(|i| {
        let t = axis_fraction(grid, i, 0);
        match grid.boundary {
            Boundary::DirichletEliminated => {
                let mut v = (PI * t).sin() + 0.4 * (2.0 * PI * t).sin();
                if grid.dim > 1 {
                    let u = axis_fraction(grid, i, 1);
                    v *= (PI * u).sin();
                }
                v
            }
            Boundary::Periodic => {
                let mut v = (TAU * t).sin() + 0.3 * (2.0 * TAU * t).cos();
                if grid.dim > 1 {
                    let u = axis_fraction(grid, i, 1);
                    v *= 1.0 + 0.5 * (TAU * u).sin();
                }
                v
            }
        }
    }))
}

fn weighted_rel_err(
    op: &fracext_core::operator::AssembledOperator,
    got: &Array1<f64>,
    want: &Array1<f64>,
) -> f64 {
    let denom = op.weighted_norm(want).max(1e-300);
    op.weighted_norm(&(got - want)) / denom
}

/// Rescales a constrained solve by a positive factor; every stored field is
/// homogeneous of degree one in the data.
fn scaled_solve(s: &FractionalSolve, factor: f64) -> FractionalSolve {
    FractionalSolve {
        sigma: s.sigma,
        interior: s.interior.clone(),
        boundary: s.boundary.clone(),
        boundary_values: s.boundary_values.iter().map(|v| v * factor).collect(),
        solution: &s.solution * factor,
        residual: s.residual * factor,
        grid: s.grid.clone(),
    }
}

// ---------------------------------------------------------------------------
// verify suites
// ---------------------------------------------------------------------------

pub fn run_suite(suite: Suite, ctx: &RunCtx) -> Result<SuiteOutcome, String> {
    match suite {
        Suite::Limits => run_limits(ctx),
        Suite::PoissonEquivalence => run_poisson_equivalence(ctx),
        Suite::DerivativeBounds => run_derivative_bounds(ctx),
        Suite::Harnack => run_harnack(ctx),
        Suite::Holder => run_holder(ctx),
        Suite::BoundaryHolder => run_boundary_holder(ctx),
        Suite::Sectoriality => run_sectoriality(ctx),
        Suite::FormCheck => run_form_check(ctx),
        Suite::Subelliptic => run_subelliptic(ctx),
        Suite::Nondivergence => run_nondivergence(ctx),
    }
}

fn run_limits(ctx: &RunCtx) -> Result<SuiteOutcome, String> {
    let sigma = ctx.sigma_strict()?;
    let op = &ctx.spec.op;
    let x0 = extension_boundary_vector(&ctx.spec.grid);
    let opts = ExtensionOpts::default();
    let mut checks = Vec::new();
    let mut artifacts = Vec::new();

    let rep = match neumann_limits_poisson(op, sigma, &x0, &opts) {
        Ok(r) => r,
        Err(e) => {
            checks.push(failed("limit-extraction", &e));
            return Ok(SuiteOutcome { checks, artifacts });
        }
    };

    let tol = ctx.tol("limit-rel");
    checks.push(
        Check::pass(
            "scalar-mode-coefficient",
            json_num(rep.coefficient),
            json_num(quotient_coefficient(sigma)),
        )
        .with_detail("factor multiplying the fractional power in the boundary limits; -1 at sigma = 1/2"),
    );
    checks.push(Check::bounded(
        "quotient-limit",
        rep.rel_quotient,
        tol,
        "relative error of the extrapolated difference quotient against the fractional power",
    ));
    checks.push(Check::bounded(
        "flux-limit",
        rep.rel_flux,
        tol,
        "relative error of the extrapolated weighted flux against the fractional power",
    ));
    checks.push(Check::bounded(
        "second-form-limit",
        rep.rel_second,
        tol,
        "relative error of the scaled second-derivative limit; its target carries the extra factor 2 sigma - 1",
    ));
    checks.push(Check::bounded(
        "route-agreement",
        rep.rel_mutual,
        tol,
        "mutual distance between the quotient and flux extrapolations",
    ));
    let min_order = rep
        .richardson_orders
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    checks.push(Check::holds(
        "extrapolation-order",
        min_order >= ctx.tol("min-order"),
        json!(rep.richardson_orders.to_vec()),
        "fitted convergence orders of the three extrapolated limits",
    ));

    let mut csv = String::from("node,quotient,flux,second,target,target_second\n");
    for i in 0..rep.target.len() {
        csv.push_str(&format!(
            "{i},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            rep.estimate_quotient[i],
            rep.estimate_flux[i],
            rep.estimate_second[i],
            rep.target[i],
            rep.target_second[i],
        ));
    }
    save_artifact(ctx, "limits.csv", &csv, &mut artifacts)?;
    Ok(SuiteOutcome { checks, artifacts })
}

fn run_poisson_equivalence(ctx: &RunCtx) -> Result<SuiteOutcome, String> {
    let sigma = ctx.sigma_strict()?;
    let op = &ctx.spec.op;
    let x0 = extension_boundary_vector(&ctx.spec.grid);
    let opts = ExtensionOpts::default();
    let mut checks = Vec::new();
    let mut artifacts = Vec::new();

    let pa = match extend_poisson(op, sigma, &x0, &opts) {
        Ok(p) => p,
        Err(e) => {
            checks.push(failed("kernel-route", &e));
            return Ok(SuiteOutcome { checks, artifacts });
        }
    };
    let tol = ctx.tol("route-rel");
    match extend_subordination(op, sigma, &x0, &opts) {
        Ok(su) => {
            let d = profile_distance(&pa, &su).map_err(|e| e.to_string())?;
            checks.push(Check::bounded(
                "kernel-vs-subordination",
                d,
                tol,
                "largest relative gap between the kernel-integral and semigroup-average profiles",
            ));
        }
        Err(e) => checks.push(failed("kernel-vs-subordination", &e)),
    }
    if op.symmetric {
        match extend_spectral(op, sigma, &x0, &opts) {
            Ok(sp) => {
                let d = profile_distance(&pa, &sp).map_err(|e| e.to_string())?;
                checks.push(Check::bounded(
                    "kernel-vs-diagonalization",
                    d,
                    tol,
                    "largest relative gap between the kernel-integral and scalar-profile-per-mode routes",
                ));
            }
            Err(e) => checks.push(failed("kernel-vs-diagonalization", &e)),
        }
    } else {
        checks.push(Check::not_applicable(
            "kernel-vs-diagonalization",
            "the per-mode route needs an operator that is self-adjoint in the weighted inner product",
        ));
    }

    save_artifact(ctx, "profile.csv", &pa.to_csv(), &mut artifacts)?;
    Ok(SuiteOutcome { checks, artifacts })
}

/// Height ladder anchored on the domain geometry alone, so two resolutions
/// of the same run description sample identical heights and their sups can
/// be compared: 0, then a geometric sweep from diameter/1000 to 2x the
/// diameter.
fn physical_ladder(grid: &GridSpec) -> Vec<f64> {
    let diam = grid.diameter();
    let mut ys = vec![0.0];
    let mut y = 1e-3 * diam;
    while y <= 2.0 * diam {
        ys.push(y);
        y *= 1.25;
    }
    ys
}

fn run_derivative_bounds(ctx: &RunCtx) -> Result<SuiteOutcome, String> {
    let sigma = ctx.sigma_strict()?;
    let op = &ctx.spec.op;
    let x0 = extension_boundary_vector(&ctx.spec.grid);
    let opts = ExtensionOpts::default();
    let ys = physical_ladder(&ctx.spec.grid);
    let mut checks = Vec::new();
    let mut artifacts = Vec::new();

    let profile = match extend_poisson_at(op, sigma, &x0, &ys, &opts) {
        Ok(p) => p,
        Err(e) => {
            checks.push(failed("derivative-scan", &e));
            return Ok(SuiteOutcome { checks, artifacts });
        }
    };
    let scan = match derivative_bound_scan(&profile, 2) {
        Ok(s) => s,
        Err(e) => {
            checks.push(failed("derivative-scan", &e));
            return Ok(SuiteOutcome { checks, artifacts });
        }
    };
    let cap = ctx.tol("sup-cap");
    for (&n, &sup) in scan.orders.iter().zip(scan.sup_scaled.iter()) {
        checks.push(
            Check::holds(
                &format!("scaled-derivative-n{n}"),
                sup.is_finite() && sup <= cap,
                json_num(sup),
                "sup over heights of y^n ||x^(n)(y)|| / ||x0||",
            )
            .with_tolerance(cap),
        );
    }

    let (_, fine) = refined_spec(ctx)?;
    let x0f = extension_boundary_vector(&fine.grid);
    match extend_poisson_at(&fine.op, sigma, &x0f, &physical_ladder(&fine.grid), &opts)
        .and_then(|p| derivative_bound_scan(&p, 2))
    {
        Ok(scan2) => {
            let drift = scan
                .sup_scaled
                .iter()
                .zip(scan2.sup_scaled.iter())
                .map(|(&a, &b)| (a - b).abs() / a.abs().max(b.abs()).max(1e-300))
                .fold(0.0f64, f64::max);
            checks.push(Check::bounded(
                "refinement-drift",
                drift,
                ctx.tol("drift"),
                "relative change of each scaled sup after one mesh doubling",
            ));
        }
        Err(e) => checks.push(failed("refinement-drift", &e)),
    }

    if op.symmetric {
        match frac_norm_scan(&profile, &opts.quad) {
            Ok(fr) => checks.push(
                Check::holds(
                    "fractional-norm-contraction",
                    fr.sup <= 1.0 + ctx.tol("frac-slack"),
                    json_num(fr.sup),
                    "sup over heights of ||T^s x(y)|| / ||T^s x0||; at most 1 for self-adjoint generators",
                )
                .with_tolerance(1.0 + ctx.tol("frac-slack")),
            ),
            Err(CoreError::NotApplicable(msg)) => {
                checks.push(Check::not_applicable("fractional-norm-contraction", &msg))
            }
            Err(e) => checks.push(failed("fractional-norm-contraction", &e)),
        }
    } else {
        checks.push(Check::not_applicable(
            "fractional-norm-contraction",
            "the uniform fractional-norm bound is only asserted for self-adjoint operators",
        ));
    }

    let mut csv = String::from("order,sup_scaled,argmax_y\n");
    for ((&n, &s), &y) in scan
        .orders
        .iter()
        .zip(scan.sup_scaled.iter())
        .zip(scan.argmax_y.iter())
    {
        csv.push_str(&format!("{n},{s:.16e},{y:.16e}\n"));
    }
    save_artifact(ctx, "derivative-bounds.csv", &csv, &mut artifacts)?;
    Ok(SuiteOutcome { checks, artifacts })
}

fn run_harnack(ctx: &RunCtx) -> Result<SuiteOutcome, String> {
    let sigma = ctx.sigma_closed_top()?;
    let op = &ctx.spec.op;
    let grid = &ctx.spec.grid;
    let (interior, boundary) = edge_split(grid);
    if interior.is_empty() || boundary.is_empty() {
        return Err("the grid leaves no interior/boundary split to solve on".into());
    }
    let samples = ctx.tol("samples").max(1.0) as usize;
    let radius = grid.diameter() / 8.0;
    let family = BallFamily::euclidean(grid, &[radius]);
    let mut checks = Vec::new();
    let mut artifacts = Vec::new();

    let ens = match harnack_ensemble(op, sigma, &interior, &family, samples, ctx.seed) {
        Ok(e) => e,
        Err(e) => {
            checks.push(failed("ratio-finite", &e));
            return Ok(SuiteOutcome { checks, artifacts });
        }
    };
    checks.push(Check::holds(
        "ratio-finite",
        ens.overall_max.is_finite(),
        json_num(ens.overall_max),
        &format!(
            "largest sup/inf over doubled interior balls of radius {radius:.4e} across {samples} random nonnegative solves"
        ),
    ));

    let data = positive_boundary_data(grid, &boundary);
    match solve_fractional_dirichlet(op, sigma, &interior, &data) {
        Ok(solve) => {
            let r1 = harnack_ratio(&solve, &family).map_err(|e| e.to_string())?;
            let r2 =
                harnack_ratio(&scaled_solve(&solve, 10.0), &family).map_err(|e| e.to_string())?;
            let rel = (r1.max_ratio - r2.max_ratio).abs() / r1.max_ratio.abs().max(1e-300);
            checks.push(Check::bounded(
                "scaling-invariance",
                rel,
                ctx.tol("scale-tol"),
                "relative change of the worst ratio when the solution is multiplied by 10",
            ));
        }
        Err(e) => checks.push(failed("scaling-invariance", &e)),
    }

    match refined_spec(ctx) {
        Ok((_, fine)) => {
            let (fi, _) = edge_split(&fine.grid);
            let ffam = BallFamily::euclidean(&fine.grid, &[radius]);
            match harnack_ensemble(&fine.op, sigma, &fi, &ffam, samples, ctx.seed) {
                Ok(e2) => {
                    let drift = (ens.overall_max - e2.overall_max).abs()
                        / ens.overall_max.abs().max(e2.overall_max.abs()).max(1e-300);
                    checks.push(Check::bounded(
                        "refinement-drift",
                        drift,
                        ctx.tol("drift"),
                        "relative change of the ensemble maximum after one mesh doubling",
                    ));
                }
                Err(e) => checks.push(failed("refinement-drift", &e)),
            }
        }
        Err(e) => return Err(e),
    }

    let csv = csv_string(|buf| ens.to_csv(buf))?;
    save_artifact(ctx, "ensemble.csv", &csv, &mut artifacts)?;
    Ok(SuiteOutcome { checks, artifacts })
}

/// Dyadic sample radii for the pointwise regularity fits: 2h, 4h, 8h, 16h.
fn holder_radii(grid: &GridSpec) -> Vec<f64> {
    let h = (0..grid.dim).map(|a| grid.h(a)).fold(0.0f64, f64::max);
    vec![2.0 * h, 4.0 * h, 8.0 * h, 16.0 * h]
}

fn run_holder(ctx: &RunCtx) -> Result<SuiteOutcome, String> {
    let sigma = ctx.sigma_closed_top()?;
    let op = &ctx.spec.op;
    let grid = &ctx.spec.grid;
    let (interior, boundary) = edge_split(grid);
    if interior.is_empty() || boundary.is_empty() {
        return Err("the grid leaves no interior/boundary split to solve on".into());
    }
    let data = ramp_boundary_data(grid, &boundary);
    let center = center_node(grid);
    let radii = holder_radii(grid);
    let mut checks = Vec::new();
    let mut artifacts = Vec::new();

    let solve =
        solve_fractional_dirichlet(op, sigma, &interior, &data).map_err(|e| e.to_string())?;
    let fit = match holder_fit(&solve, center, &radii) {
        Ok(f) => f,
        Err(CoreError::NotApplicable(msg)) => {
            checks.push(Check::not_applicable("interior-exponent", &msg));
            return Ok(SuiteOutcome { checks, artifacts });
        }
        Err(e) => return Err(e.to_string()),
    };
    checks.push(Check::holds(
        "interior-exponent",
        fit.alpha.is_finite() && fit.alpha > 0.0,
        json_num(fit.alpha),
        "log-log slope of ball oscillations of the solution around the domain center",
    ));

    let (_, fine) = refined_spec(ctx)?;
    let (fi, fb) = edge_split(&fine.grid);
    let fdata = ramp_boundary_data(&fine.grid, &fb);
    match solve_fractional_dirichlet(&fine.op, sigma, &fi, &fdata)
        .and_then(|s| holder_fit(&s, center_node(&fine.grid), &radii))
    {
        Ok(f2) => {
            let drift = (fit.alpha - f2.alpha).abs() / fit.alpha.abs().max(1e-300);
            checks.push(Check::bounded(
                "refinement-drift",
                drift,
                ctx.tol("drift"),
                "relative change of the fitted exponent after one mesh doubling at fixed physical radii",
            ));
        }
        Err(CoreError::NotApplicable(msg)) => {
            checks.push(Check::not_applicable("refinement-drift", &msg))
        }
        Err(e) => checks.push(failed("refinement-drift", &e)),
    }

    match solve_fractional_dirichlet(op, 1.0, &interior, &data)
        .and_then(|s| holder_fit(&s, center, &radii))
    {
        Ok(cf) => checks.push(Check::bounded(
            "classical-exponent-gap",
            cf.alpha - 1.0,
            ctx.tol("classical-slack"),
            "distance of the sigma = 1 exponent from the Lipschitz value 1",
        )),
        Err(CoreError::NotApplicable(msg)) => {
            checks.push(Check::not_applicable("classical-exponent-gap", &msg))
        }
        Err(e) => checks.push(failed("classical-exponent-gap", &e)),
    }

    let csv = csv_string(|buf| fit.to_csv(buf))?;
    save_artifact(ctx, "oscillations.csv", &csv, &mut artifacts)?;
    Ok(SuiteOutcome { checks, artifacts })
}

fn run_boundary_holder(ctx: &RunCtx) -> Result<SuiteOutcome, String> {
    let sigma = ctx.sigma_closed_top()?;
    let op = &ctx.spec.op;
    let grid = &ctx.spec.grid;
    if grid.dim != 1 {
        return Err("the interface scan needs a one-dimensional run description".into());
    }
    let n = grid.n_nodes();
    let m = n / 2;
    if m < 20 || n - m < 20 {
        return Err(format!(
            "grid with {n} nodes is too coarse for the interface scan; need at least 40"
        ));
    }
    // Right half is the solve region; the left half carries zero data so the
    // solution meets a flat interface, and the far right end lifts it.
    let interior: Vec<usize> = (m..n - 1).collect();
    let mut values = vec![0.0; m];
    values.push(1.0);
    let h = grid.h(0);
    let radii = vec![h, 2.0 * h, 4.0 * h, 8.0 * h];
    let center = m - 1;
    let mut checks = Vec::new();
    let mut artifacts = Vec::new();

    let solve =
        solve_fractional_dirichlet(op, sigma, &interior, &values).map_err(|e| e.to_string())?;
    let fit = match boundary_holder_check(&solve, center, &radii, &ctx.spec.weight) {
        Ok(f) => f,
        Err(CoreError::NotApplicable(msg)) => {
            checks.push(Check::not_applicable("interface-exponent", &msg));
            return Ok(SuiteOutcome { checks, artifacts });
        }
        Err(e) => return Err(e.to_string()),
    };
    checks.push(Check::holds(
        "interface-exponent",
        fit.alpha.is_finite() && fit.alpha > 0.0,
        json_num(fit.alpha),
        "log-log slope of oscillations in balls straddling the flat interface",
    ));
    checks.push(Check::holds(
        "interface-prefactor",
        fit.prefactor.is_finite() && fit.prefactor > 0.0,
        json_num(fit.prefactor),
        "oscillation prefactor normalized by the weighted L2 size of the solution near the interface",
    ));

    match solve_fractional_dirichlet(op, 1.0, &interior, &values)
        .and_then(|s| boundary_holder_check(&s, center, &radii, &ctx.spec.weight))
    {
        Ok(cf) => checks.push(Check::bounded(
            "classical-exponent-gap",
            cf.alpha - 1.0,
            ctx.tol("classical-slack"),
            "distance of the sigma = 1 interface exponent from the Lipschitz value 1",
        )),
        Err(CoreError::NotApplicable(msg)) => {
            checks.push(Check::not_applicable("classical-exponent-gap", &msg))
        }
        Err(e) => checks.push(failed("classical-exponent-gap", &e)),
    }

    let csv = csv_string(|buf| fit.to_csv(buf))?;
    save_artifact(ctx, "interface-oscillations.csv", &csv, &mut artifacts)?;
    Ok(SuiteOutcome { checks, artifacts })
}

fn run_sectoriality(ctx: &RunCtx) -> Result<SuiteOutcome, String> {
    let op = &ctx.spec.op;
    let theta = op.sector_angle_hint.max(FRAC_PI_4) + 0.1;
    let per_decade = ctx.tol("per-decade").max(1.0) as usize;
    let mut checks = Vec::new();
    let mut artifacts = Vec::new();

    let scan = match sectoriality_scan(op, theta, per_decade) {
        Ok(s) => s,
        Err(e) => {
            checks.push(failed("resolvent-bound", &e));
            return Ok(SuiteOutcome { checks, artifacts });
        }
    };
    checks.push(Check::holds(
        "resolvent-bound",
        scan.c_theta.is_finite() && scan.failures == 0,
        json_num(scan.c_theta),
        &format!(
            "sup of |z| ||(z - T)^-1|| along the rays at +/-{theta:.4} and pi radians, {} unsolvable sample points",
            scan.failures
        ),
    ));

    let mut csv = String::from("angle,sup_c,worst_radius\n");
    for r in &scan.rays {
        csv.push_str(&format!(
            "{:.16e},{:.16e},{:.16e}\n",
            r.angle, r.sup_c, r.worst_radius
        ));
    }
    save_artifact(ctx, "rays.csv", &csv, &mut artifacts)?;
    Ok(SuiteOutcome { checks, artifacts })
}

fn run_form_check(ctx: &RunCtx) -> Result<SuiteOutcome, String> {
    let op = &ctx.spec.op;
    let pairs = ctx.tol("pairs").max(1.0) as usize;
    let mut checks = Vec::new();

    match dirichlet_form_check(op, pairs, ctx.seed) {
        Ok(rep) => {
            checks.push(
                Check::pass("energy-lower-bound", json_num(0.0), json_num(0.0)).with_detail(
                    &format!(
                        "no negative energies among {} sampled pairs; the quadratic form admits the lower bound 0",
                        rep.pairs_checked
                    ),
                ),
            );
            let hint = op.sector_angle_hint.max(FRAC_PI_4);
            let slack = ctx.tol("angle-slack");
            checks.push(
                Check::holds(
                    "sector-constant",
                    rep.k_bound.is_finite() && rep.angle <= hint + slack,
                    json!({"k": json_num(rep.k_bound), "angle": json_num(rep.angle)}),
                    &format!(
                        "extremal skew/symmetric ratio K and its half-angle arctan K against the coefficient bound {hint:.4} + {slack}"
                    ),
                )
                .with_tolerance(hint + slack),
            );
            checks.push(Check::holds(
                "sampled-extremal-consistency",
                rep.k_sampled <= rep.k_bound * (1.0 + 1e-9),
                json!({"sampled": json_num(rep.k_sampled), "extremal": json_num(rep.k_bound)}),
                "the randomized lower bound for K never exceeds the power-iteration value",
            ));
        }
        Err(CoreError::SpectrumOutOfSector(msg)) => {
            checks.push(Check::holds(
                "energy-lower-bound",
                false,
                Value::Null,
                &format!("a sampled pair produced nonpositive energy: {msg}"),
            ));
        }
        Err(e) => checks.push(failed("energy-lower-bound", &e)),
    }
    Ok(SuiteOutcome {
        checks,
        artifacts: Vec::new(),
    })
}

fn run_subelliptic(ctx: &RunCtx) -> Result<SuiteOutcome, String> {
    if ctx.spec.assembly != AssemblyKind::SubellipticDiagonal {
        return Err(
            "this suite needs \"assembly\": \"subelliptic-diagonal\" in the run description".into(),
        );
    }
    let sigma = match ctx.sigma {
        None => 0.5,
        Some(s) if (s - 0.5).abs() <= 1e-12 => 0.5,
        Some(s) => {
            return Err(format!(
                "the degenerate-geometry suite runs at the half power only, got sigma {s}"
            ))
        }
    };
    let op = &ctx.spec.op;
    let grid = &ctx.spec.grid;
    let mut checks = Vec::new();
    let mut artifacts = Vec::new();

    match flag_condition_check(&ctx.spec.coeff, grid) {
        Ok(flag) => checks.push(Check::holds(
            "span-chain",
            flag.pass,
            json!({"checked": flag.n_checked, "failed": flag.n_failed}),
            "every sampled node reaches all axes through iterated neighborhoods of coefficient support",
        )),
        Err(e) => checks.push(failed("span-chain", &e)),
    }

    let (interior, _) = edge_split(grid);
    if interior.is_empty() {
        return Err("the grid leaves no interior nodes to solve on".into());
    }
    let is_interior = {
        let mut mask = vec![false; grid.n_nodes()];
        for &i in &interior {
            mask[i] = true;
        }
        mask
    };
    // Scan centers sit deep inside the domain; each gets a radius small
    // enough that even its doubled travel-time ball cannot reach the shell,
    // so every ball of the family is admissible by construction.
    let fractions: &[[f64; 2]] = &[
        [0.5, 0.5],
        [0.35, 0.35],
        [0.65, 0.35],
        [0.35, 0.65],
        [0.65, 0.65],
    ];
    let mut picked: Vec<(usize, f64)> = Vec::new();
    for f in fractions {
        let target: Vec<f64> = (0..grid.dim)
            .map(|a| grid.extents[a][0] + f[a] * (grid.extents[a][1] - grid.extents[a][0]))
            .collect();
        let dist2 = |i: usize| -> f64 {
            let c = grid.coord(i);
            (0..grid.dim).map(|a| (c[a] - target[a]).powi(2)).sum()
        };
        let c = (0..grid.n_nodes())
            .min_by(|&i, &j| dist2(i).total_cmp(&dist2(j)))
            .expect("grids always carry at least one node");
        if !is_interior[c] || picked.iter().any(|&(p, _)| p == c) {
            continue;
        }
        let dist = subunit_distance(grid, &ctx.spec.coeff, c).map_err(|e| e.to_string())?;
        let to_shell = (0..grid.n_nodes())
            .filter(|&q| !is_interior[q])
            .map(|q| dist[q])
            .fold(f64::INFINITY, f64::min);
        if to_shell.is_finite() && to_shell > 0.0 {
            picked.push((c, 0.45 * to_shell));
        }
    }
    if picked.is_empty() {
        checks.push(Check::holds(
            "ratio-finite",
            false,
            Value::Null,
            "the degenerate travel-time metric leaves no interior scan center with a reachable ball",
        ));
        return Ok(SuiteOutcome { checks, artifacts });
    }
    let mut balls = Vec::new();
    for &(c, r) in &picked {
        let fam = metric_balls(grid, &ctx.spec.coeff, &[c], &[r, 2.0 * r])
            .map_err(|e| e.to_string())?;
        balls.extend(fam.balls);
    }
    let family = BallFamily {
        metric: fracext_core::balls::BallMetric::Subunit,
        balls,
    };
    let n_centers = picked.len();

    let samples = ctx.tol("samples").max(1.0) as usize;
    match harnack_ensemble(op, sigma, &interior, &family, samples, ctx.seed) {
        Ok(ens) => {
            checks.push(Check::holds(
                "ratio-finite",
                ens.overall_max.is_finite(),
                json_num(ens.overall_max),
                &format!(
                    "largest sup/inf over doubled travel-time balls around {n_centers} interior centers across {samples} random nonnegative solves"
                ),
            ));
            let (_, bnd) = edge_split(grid);
            let data = positive_boundary_data(grid, &bnd);
            match solve_fractional_dirichlet(op, sigma, &interior, &data) {
                Ok(solve) => {
                    let r1 = harnack_ratio(&solve, &family).map_err(|e| e.to_string())?;
                    let r2 = harnack_ratio(&scaled_solve(&solve, 10.0), &family)
                        .map_err(|e| e.to_string())?;
                    let rel =
                        (r1.max_ratio - r2.max_ratio).abs() / r1.max_ratio.abs().max(1e-300);
                    checks.push(Check::bounded(
                        "scaling-invariance",
                        rel,
                        ctx.tol("scale-tol"),
                        "relative change of the worst ratio when the solution is multiplied by 10",
                    ));
                }
                Err(e) => checks.push(failed("scaling-invariance", &e)),
            }
            let csv = csv_string(|buf| ens.to_csv(buf))?;
            save_artifact(ctx, "ensemble.csv", &csv, &mut artifacts)?;
        }
        Err(e) => checks.push(failed("ratio-finite", &e)),
    }
    Ok(SuiteOutcome { checks, artifacts })
}

/// Probe functions for the strong-solution quotient scan: two smooth modes,
/// band-limited noise, and a single impulse.
fn quotient_samples(grid: &GridSpec, seed: u64) -> Result<Vec<Array1<f64>>, String> {
    let ones = vec![1usize; grid.dim];
    let twos: Vec<usize> = if grid.dim == 1 { vec![2] } else { vec![2, 3] };
    Ok(vec![
        fourier_mode(grid, &ones, 0.3).map_err(|e| e.to_string())?,
        fourier_mode(grid, &twos, 1.1).map_err(|e| e.to_string())?,
        low_pass_noise(grid, 3, seed),
        point_mass(grid, center_node(grid)).map_err(|e| e.to_string())?,
    ])
}

fn run_nondivergence(ctx: &RunCtx) -> Result<SuiteOutcome, String> {
    if ctx.spec.assembly != AssemblyKind::Nondivergence {
        return Err(
            "this suite needs \"assembly\": \"nondivergence\" in the run description".into(),
        );
    }
    let p = ctx.tol("exponent-p");
    if !(p > 1.0 && p.is_finite()) {
        return Err(format!("integrability exponent must be finite and > 1, got {p}"));
    }
    let bound = p / (p + 1.0);
    let sigma = match ctx.sigma {
        None => (0.6 * bound).min(0.4),
        Some(s) if s > 0.0 && s < bound - 1e-12 => s,
        Some(s) => {
            return Err(format!(
                "power {s} is outside the admitted range (0, {bound:.6}) for p = {p}"
            ))
        }
    };
    let op = &ctx.spec.op;
    let grid = &ctx.spec.grid;
    let mut checks = Vec::new();
    let mut artifacts = Vec::new();

    let samples = quotient_samples(grid, ctx.seed)?;
    let scan = match w2p_global_scan(op, p, &samples) {
        Ok(s) => s,
        Err(e) => {
            checks.push(failed("second-derivative-quotient", &e));
            return Ok(SuiteOutcome { checks, artifacts });
        }
    };
    checks.push(
        Check::holds(
            "second-derivative-quotient",
            scan.c.is_finite() && scan.c <= ctx.tol("quotient-cap"),
            json_num(scan.c),
            "worst ratio of the full second-order seminorm against ||u||_p + ||Tu||_p over the probe set",
        )
        .with_tolerance(ctx.tol("quotient-cap")),
    );

    let (_, fine) = refined_spec(ctx)?;
    let fsamples = quotient_samples(&fine.grid, ctx.seed)?;
    match w2p_global_scan(&fine.op, p, &fsamples) {
        Ok(s2) => {
            let drift = (scan.c - s2.c).abs() / scan.c.abs().max(s2.c.abs()).max(1e-300);
            checks.push(Check::bounded(
                "refinement-drift",
                drift,
                ctx.tol("drift"),
                "relative change of the worst quotient after one mesh doubling",
            ));
        }
        Err(e) => checks.push(failed("refinement-drift", &e)),
    }

    let (interior, boundary) = edge_split(grid);
    if interior.is_empty() || boundary.is_empty() {
        return Err("the grid leaves no interior/boundary split to solve on".into());
    }
    let data = ramp_boundary_data(grid, &boundary);
    match solve_fractional_dirichlet(op, sigma, &interior, &data)
        .and_then(|s| c1alpha_probe(&s, &[0.25, 0.5, 0.75], p))
    {
        Ok(rep) => checks.push(Check::holds(
            "gradient-smoothness",
            rep.pass,
            json!({
                "exponents": rep.exponents.iter().map(|&e| json_num(e)).collect::<Vec<_>>(),
                "trivial": rep.trivial,
            }),
            "positive gain of the fitted gradient-oscillation decay over each tested exponent",
        )),
        Err(CoreError::NotApplicable(msg)) => {
            checks.push(Check::not_applicable("gradient-smoothness", &msg))
        }
        Err(CoreError::SizeCapExceeded { n, cap }) => {
            checks.push(Check::not_applicable(
                "gradient-smoothness",
                &format!("constrained solve needs a self-adjoint operator beyond {cap} nodes, got {n}"),
            ))
        }
        Err(CoreError::Defective(msg)) | Err(CoreError::Backend(msg)) => {
            checks.push(Check::not_applicable(
                "gradient-smoothness",
                &format!("the fractional solve is unavailable for this operator: {msg}"),
            ))
        }
        Err(e) => checks.push(failed("gradient-smoothness", &e)),
    }

    let csv = csv_string(|buf| scan.to_csv(buf))?;
    save_artifact(ctx, "quotients.csv", &csv, &mut artifacts)?;
    Ok(SuiteOutcome { checks, artifacts })
}

// ---------------------------------------------------------------------------
// non-verify commands
// ---------------------------------------------------------------------------

pub fn run_assemble(ctx: &RunCtx) -> Result<SuiteOutcome, String> {
    let op = &ctx.spec.op;
    let mut checks = Vec::new();
    let mut artifacts = Vec::new();

    let nonfinite = op.matrix.iter().filter(|v| !v.is_finite()).count();
    checks.push(Check::holds(
        "matrix-entries-finite",
        nonfinite == 0,
        json!(nonfinite),
        "count of non-finite entries in the assembled matrix",
    ));
    checks.push(
        Check::pass("node-count", json!(op.n()), json!(ctx.spec.grid.n_nodes()))
            .with_detail("one matrix row per grid node"),
    );
    checks.push(
        Check::pass("self-adjoint", json!(op.symmetric), json!(op.symmetric)).with_detail(
            "symmetry detected in the weighted inner product; informational, both outcomes pass",
        ),
    );

    let csv = csv_string(|buf| op.export_coo(buf))?;
    save_artifact(ctx, "operator.coo.csv", &csv, &mut artifacts)?;
    Ok(SuiteOutcome { checks, artifacts })
}

pub fn run_fracpow(ctx: &RunCtx) -> Result<SuiteOutcome, String> {
    let sigma = ctx.sigma_strict()?;
    let op = &ctx.spec.op;
    let mut rng = ChaCha12Rng::seed_from_u64(ctx.seed);
    let v = Array1::from_iter((0..op.n()).map(|_| rng.gen_range(-1.0..1.0)));
    let mut checks = Vec::new();
    let mut artifacts = Vec::new();

    let quad = QuadratureOpts::default();
    let b = match frac_power_apply_balakrishnan(op, sigma, &v, &quad) {
        Ok(b) => b,
        Err(e) => {
            checks.push(failed("singular-integral-route", &e));
            return Ok(SuiteOutcome { checks, artifacts });
        }
    };
    checks.push(Check::holds(
        "singular-integral-route",
        b.iter().all(|x| x.is_finite()),
        json_num(op.weighted_norm(&b)),
        "weighted norm of T^sigma applied to a seeded probe vector through the resolvent integral",
    ));

    let mut spectral = None;
    if op.symmetric {
        match frac_power_apply_spectral(op, sigma, &v) {
            Ok(s) => {
                let rel = weighted_rel_err(op, &b, &s);
                checks.push(Check::bounded(
                    "route-agreement",
                    rel,
                    ctx.tol("route-rel"),
                    "relative distance between the resolvent-integral and diagonalization routes",
                ));
                spectral = Some(s);
            }
            Err(e) => checks.push(failed("route-agreement", &e)),
        }
    } else {
        checks.push(Check::not_applicable(
            "route-agreement",
            "the diagonalization route needs an operator that is self-adjoint in the weighted inner product",
        ));
    }

    let mut csv = String::from(if spectral.is_some() {
        "node,input,singular_integral,diagonalization\n"
    } else {
        "node,input,singular_integral\n"
    });
    for i in 0..op.n() {
        match &spectral {
            Some(s) => csv.push_str(&format!(
                "{i},{:.16e},{:.16e},{:.16e}\n",
                v[i], b[i], s[i]
            )),
            None => csv.push_str(&format!("{i},{:.16e},{:.16e}\n", v[i], b[i])),
        }
    }
    save_artifact(ctx, "power.csv", &csv, &mut artifacts)?;
    Ok(SuiteOutcome { checks, artifacts })
}

pub fn run_extend(ctx: &RunCtx) -> Result<SuiteOutcome, String> {
    let sigma = ctx.sigma_strict()?;
    let op = &ctx.spec.op;
    let x0 = extension_boundary_vector(&ctx.spec.grid);
    let opts = ExtensionOpts::default();
    let mut checks = Vec::new();
    let mut artifacts = Vec::new();

    let profile = match extend_poisson(op, sigma, &x0, &opts) {
        Ok(p) => p,
        Err(e) => {
            checks.push(failed("interior-equation-residual", &e));
            return Ok(SuiteOutcome { checks, artifacts });
        }
    };
    match ode_residual(&profile) {
        Ok(ode) => checks.push(Check::bounded(
            "interior-equation-residual",
            ode.max_rel_mid,
            ctx.tol("ode-rel"),
            "worst relative residual of the degenerate two-point equation over the middle of the height ladder",
        )),
        Err(e) => checks.push(failed("interior-equation-residual", &e)),
    }
    match strong_limit_check(&profile) {
        Ok(st) => checks.push(Check::bounded(
            "boundary-recovery",
            st.at_min,
            ctx.tol("trace-rel"),
            "relative distance of T x(y) from T x0 at the smallest positive height",
        )),
        Err(e) => checks.push(failed("boundary-recovery", &e)),
    }

    save_artifact(ctx, "profile.csv", &profile.to_csv(), &mut artifacts)?;
    Ok(SuiteOutcome { checks, artifacts })
}
