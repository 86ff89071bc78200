//! Direct solver for the degenerate half-strip problem: find U(x, y) on
//! base x (0, Y] with U(x, 0) = boundary data, no flux at y = Y, satisfying
//! the weighted balance in which every horizontal stiffness row is the
//! assembled base operator and the vertical direction carries the degenerate
//! weight y^{1-2s}.
//!
//! The vertical mesh is geometric, graded toward y = 0, and vertical
//! conductances are exact integrals of the resistivity y^{2s-1}, so the
//! leading boundary behavior (linear in y^{2s}) is represented exactly and
//! the degenerate weight is never evaluated at y = 0. Even reflection across
//! y = 0 and its weak-form defect are provided for the weak-solution
//! characterization of the boundary fractional power.

use crate::assemble::assemble_weighted_elliptic;
use crate::calculus::fracpow::{check_sigma_open, frac_power_apply_balakrishnan, QuadratureOpts};
use crate::error::{CoreError, Result};
use crate::extension::limits::quotient_coefficient;
use crate::field::{CoeffField, WeightField};
use crate::grid::GridSpec;
use crate::operator::AssembledOperator;
use ndarray::{Array1, Array2};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy)]
pub struct BvpOpts {
    /// Geometric spacing ratio of the vertical mesh; 1 gives a uniform mesh.
    pub ratio: f64,
    pub cg_rtol: f64,
    pub max_unknowns: usize,
}

impl Default for BvpOpts {
    fn default() -> Self {
        BvpOpts {
            ratio: 1.25,
            cg_rtol: 1e-11,
            max_unknowns: 200_000,
        }
    }
}

/// The discrete half-strip operator in factored form: one horizontal
/// stiffness block shared by every row, vertical conductances, and the
/// dual-cell masses of the degenerate weight. Kept in factored form because
/// the assembled block matrix would be (nx*ny)^2 dense.
#[derive(Debug, Clone)]
pub struct BlockOperator {
    /// Weighted symmetric form of the horizontal operator, w*vol scaled.
    pub stiff: Array2<f64>,
    /// Vertical conductances between consecutive heights, from exact
    /// resistivity integrals of y^{2s-1}; g[0] couples to the boundary row.
    pub g: Vec<f64>,
    /// Vertical extent of each unknown row's dual cell under y^{1-2s}.
    pub d: Vec<f64>,
    /// Horizontal node masses w(x) * cell volume.
    pub wv: Array1<f64>,
    /// Whether the block form is symmetric (it is when the base is).
    pub symmetric: bool,
}

impl BlockOperator {
    pub fn nx(&self) -> usize {
        self.wv.len()
    }

    pub fn ny(&self) -> usize {
        self.d.len()
    }

    pub fn n_unknowns(&self) -> usize {
        self.nx() * self.ny()
    }

    fn row(v: &Array1<f64>, m: usize, nx: usize) -> Array1<f64> {
        v.slice(ndarray::s![m * nx..(m + 1) * nx]).to_owned()
    }

    /// Applies the block operator to the stacked interior unknowns
    /// (row m holds the states at height y_{m+1}).
    pub fn apply(&self, v: &Array1<f64>) -> Array1<f64> {
        let nx = self.nx();
        let ny = self.ny();
        let mut out = Array1::<f64>::zeros(self.n_unknowns());
        for m in 0..ny {
            let um = Self::row(v, m, nx);
            let mut acc = self.stiff.dot(&um) * self.d[m];
            let below = self.g[m]
                * if m == 0 {
                    um.clone()
                } else {
                    &um - &Self::row(v, m - 1, nx)
                };
            acc += &(&below * &self.wv);
            if m + 1 < ny {
                let above = self.g[m + 1] * (&um - &Self::row(v, m + 1, nx));
                acc += &(&above * &self.wv);
            }
            out.slice_mut(ndarray::s![m * nx..(m + 1) * nx]).assign(&acc);
        }
        out
    }

    /// Right-hand side induced by the boundary row.
    pub fn rhs(&self, x0: &Array1<f64>) -> Array1<f64> {
        let nx = self.nx();
        let mut b = Array1::<f64>::zeros(self.n_unknowns());
        b.slice_mut(ndarray::s![0..nx])
            .assign(&(&(x0 * self.g[0]) * &self.wv));
        b
    }

    /// Main diagonal, for Jacobi preconditioning.
    pub fn diagonal(&self) -> Array1<f64> {
        let nx = self.nx();
        let ny = self.ny();
        let mut diag = Array1::<f64>::zeros(self.n_unknowns());
        for m in 0..ny {
            let gsum = self.g[m] + if m + 1 < ny { self.g[m + 1] } else { 0.0 };
            for i in 0..nx {
                diag[m * nx + i] = self.d[m] * self.stiff[[i, i]] + gsum * self.wv[i];
            }
        }
        diag
    }
}

/// A solved (or reflected) half-strip field.
#[derive(Debug, Clone)]
pub struct ExtensionBvpField {
    pub sigma: f64,
    /// Heights, ascending. A half solve spans 0 = y_0 < ... < y_ny = Y;
    /// after reflection the list runs -Y..Y.
    pub ys: Vec<f64>,
    /// Field rows, one per height; the y = 0 row holds the boundary data.
    pub u: Array2<f64>,
    /// Samples of the extended weight w(x) |y|^{1-2s} at every (y, x) node.
    /// The y = 0 row is the literal degenerate value (0, 1, or infinity
    /// depending on s); the solver never uses it.
    pub extended_weight: Array2<f64>,
    /// The factored discrete operator of the half problem.
    pub block: BlockOperator,
    /// The assembled base operator the strip was built over.
    pub base: AssembledOperator,
    /// Discrete degenerate flux at the boundary, per base node:
    /// 2s (U(z_1) - U(0)) / z_1 with z = y^{2s}. Its limit under refinement
    /// is 2s * quotient_coefficient(s) * T^s x0.
    pub trace: Array1<f64>,
    pub cg_iters: usize,
    pub cg_rel_residual: f64,
}

impl ExtensionBvpField {
    /// Index of the y = 0 row.
    pub fn boundary_row(&self) -> usize {
        self.ys
            .iter()
            .position(|&y| y == 0.0)
            .expect("every field carries its boundary row")
    }

    pub fn is_reflected(&self) -> bool {
        self.ys[0] < 0.0
    }

    /// CSV rendering: header `x_index,y_value,U`, one row per node, x-major.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_index,y_value,U\n");
        for i in 0..self.u.ncols() {
            for (m, &y) in self.ys.iter().enumerate() {
                let _ = writeln!(out, "{i},{y:.16e},{:.16e}", self.u[[m, i]]);
            }
        }
        out
    }
}

/// Diagonally preconditioned conjugate gradients with a closure matvec.
fn cg<F>(
    apply: F,
    b: &Array1<f64>,
    diag: &Array1<f64>,
    rtol: f64,
    maxit: usize,
) -> Result<(Array1<f64>, usize, f64)>
where
    F: Fn(&Array1<f64>) -> Array1<f64>,
{
    let mut x = Array1::<f64>::zeros(b.len());
    let mut r = b.clone();
    let bnorm = b.dot(b).sqrt();
    if bnorm == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let mut z = &r / diag;
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    for it in 1..=maxit {
        let ap = apply(&p);
        let pap = p.dot(&ap);
        if !(pap > 0.0) {
            return Err(CoreError::SingularSystem(format!(
                "conjugate gradients met a nonpositive curvature {pap:.3e}"
            )));
        }
        let alpha = rz / pap;
        x.scaled_add(alpha, &p);
        r.scaled_add(-alpha, &ap);
        let rnorm = r.dot(&r).sqrt();
        if rnorm <= rtol * bnorm {
            return Ok((x, it, rnorm / bnorm));
        }
        z = &r / diag;
        let rz_new = r.dot(&z);
        let beta = rz_new / rz;
        rz = rz_new;
        p = &z + &(&p * beta);
    }
    Err(CoreError::SingularSystem(
        "conjugate gradients did not reach the requested residual".into(),
    ))
}

struct Mesh {
    ys: Vec<f64>,
    g: Vec<f64>,
    d: Vec<f64>,
}

fn build_mesh(sigma: f64, height: f64, ny: usize, ratio: f64) -> Mesh {
    let mut ys = Vec::with_capacity(ny + 1);
    ys.push(0.0);
    let first = if (ratio - 1.0).abs() < 1e-12 {
        height / ny as f64
    } else {
        height * (ratio - 1.0) / (ratio.powi(ny as i32) - 1.0)
    };
    let mut step = first;
    for m in 1..=ny {
        ys.push(ys[m - 1] + step);
        step *= ratio;
    }
    ys[ny] = height;
    let two_s = 2.0 * sigma;
    let g: Vec<f64> = (0..ny)
        .map(|m| two_s / (ys[m + 1].powf(two_s) - ys[m].powf(two_s)))
        .collect();
    let p = 2.0 - two_s;
    let cw = |y: f64| y.powf(p) / p;
    let d: Vec<f64> = (1..=ny)
        .map(|m| {
            let lo = 0.5 * (ys[m - 1] + ys[m]);
            let hi = if m == ny {
                ys[ny]
            } else {
                0.5 * (ys[m] + ys[m + 1])
            };
            cw(hi) - cw(lo)
        })
        .collect();
    Mesh { ys, g, d }
}

/// Solves the half-strip problem above an already assembled base operator.
pub fn solve_extension_bvp_operator(
    op: &AssembledOperator,
    sigma: f64,
    boundary_data: &Array1<f64>,
    y_extent: f64,
    y_points: usize,
    opts: &BvpOpts,
) -> Result<ExtensionBvpField> {
    check_sigma_open(sigma)?;
    if !op.symmetric {
        return Err(CoreError::NotApplicable(
            "the half-strip solver needs a base operator self-adjoint in its weight".into(),
        ));
    }
    let nx = op.n();
    if boundary_data.len() != nx {
        return Err(CoreError::DimensionMismatch(format!(
            "boundary vector has {} entries, operator has {nx}",
            boundary_data.len()
        )));
    }
    if y_points < 8 {
        return Err(CoreError::GridTooCoarse(
            "need at least eight vertical cells".into(),
        ));
    }
    if !(y_extent > 0.0 && y_extent.is_finite()) {
        return Err(CoreError::InvalidArgument(format!(
            "strip height {y_extent} must be positive"
        )));
    }
    if !(opts.ratio >= 1.0 && opts.ratio <= 2.0) {
        return Err(CoreError::InvalidArgument(format!(
            "vertical mesh ratio {} must lie in [1, 2]",
            opts.ratio
        )));
    }
    let n_unknowns = nx * y_points;
    if n_unknowns > opts.max_unknowns {
        return Err(CoreError::SizeCapExceeded {
            n: n_unknowns,
            cap: opts.max_unknowns,
        });
    }
    let mesh = build_mesh(sigma, y_extent, y_points, opts.ratio);
    let ny = y_points;

    // horizontal stiffness: symmetric weak form of the base operator
    let vol = op.grid.cell_volume();
    let wv: Array1<f64> = op.inner_weight.mapv(|w| w * vol);
    let mut stiff = op.matrix.clone();
    for i in 0..nx {
        for j in 0..nx {
            stiff[[i, j]] *= wv[i];
        }
    }
    // enforce exact symmetry so conjugate gradients sees a clean form
    for i in 0..nx {
        for j in (i + 1)..nx {
            let m = 0.5 * (stiff[[i, j]] + stiff[[j, i]]);
            stiff[[i, j]] = m;
            stiff[[j, i]] = m;
        }
    }
    let block = BlockOperator {
        stiff,
        g: mesh.g,
        d: mesh.d,
        wv,
        symmetric: op.symmetric,
    };

    let b = block.rhs(boundary_data);
    let diag = block.diagonal();
    for (k, &dk) in diag.iter().enumerate() {
        if !(dk > 0.0) {
            return Err(CoreError::SingularSystem(format!(
                "nonpositive pivot {dk:.3e} at unknown {k}"
            )));
        }
    }
    let maxit = (8 * n_unknowns).max(4000);
    let (sol, cg_iters, cg_rel_residual) =
        cg(|v| block.apply(v), &b, &diag, opts.cg_rtol, maxit)?;

    let mut u = Array2::<f64>::zeros((ny + 1, nx));
    u.row_mut(0).assign(boundary_data);
    for m in 0..ny {
        u.row_mut(m + 1)
            .assign(&sol.slice(ndarray::s![m * nx..(m + 1) * nx]));
    }
    let trace = (&u.row(1).to_owned() - boundary_data) * block.g[0];
    let mut extended_weight = Array2::<f64>::zeros((ny + 1, nx));
    for (m, &y) in mesh.ys.iter().enumerate() {
        let yt = y.abs().powf(1.0 - 2.0 * sigma);
        for i in 0..nx {
            extended_weight[[m, i]] = op.inner_weight[i] * yt;
        }
    }
    Ok(ExtensionBvpField {
        sigma,
        ys: mesh.ys,
        u,
        extended_weight,
        block,
        base: op.clone(),
        trace,
        cg_iters,
        cg_rel_residual,
    })
}

/// Assembles the divergence-form base operator from its ingredients and
/// solves the half-strip problem over it.
#[allow(clippy::too_many_arguments)]
pub fn solve_extension_bvp(
    grid: &GridSpec,
    a: &CoeffField,
    w: &WeightField,
    sigma: f64,
    boundary_data: &Array1<f64>,
    y_extent: f64,
    y_points: usize,
    opts: &BvpOpts,
) -> Result<ExtensionBvpField> {
    let op = assemble_weighted_elliptic(grid, a, w)?;
    solve_extension_bvp_operator(&op, sigma, boundary_data, y_extent, y_points, opts)
}

/// Even reflection of a half-strip field across y = 0; the result is the
/// same kind of field, with mirrored heights, states, and weight samples.
pub fn reflect_even(field: &ExtensionBvpField) -> Result<ExtensionBvpField> {
    if field.is_reflected() {
        return Err(CoreError::InvalidArgument(
            "field already spans negative heights".into(),
        ));
    }
    let ny = field.ys.len() - 1;
    let nx = field.u.ncols();
    let mut ys = Vec::with_capacity(2 * ny + 1);
    let mut u = Array2::<f64>::zeros((2 * ny + 1, nx));
    let mut ew = Array2::<f64>::zeros((2 * ny + 1, nx));
    for m in (1..=ny).rev() {
        ys.push(-field.ys[m]);
    }
    ys.extend(field.ys.iter().copied());
    for m in 0..=2 * ny {
        let src = (m as isize - ny as isize).unsigned_abs();
        u.row_mut(m).assign(&field.u.row(src));
        ew.row_mut(m).assign(&field.extended_weight.row(src));
    }
    Ok(ExtensionBvpField {
        sigma: field.sigma,
        ys,
        u,
        extended_weight: ew,
        block: field.block.clone(),
        base: field.base.clone(),
        trace: field.trace.clone(),
        cg_iters: field.cg_iters,
        cg_rel_residual: field.cg_rel_residual,
    })
}

#[derive(Debug, Clone)]
pub struct ReflectionReport {
    /// Weak residual of the reflected field in its y = 0 row, per base
    /// node. All other rows satisfy the half-strip equations by symmetry.
    pub residual_row: Array1<f64>,
    /// Residual paired against a smooth bump on the base.
    pub pairing: f64,
    /// The pairing the boundary fractional power predicts:
    /// -2 * 2s * quotient_coefficient(s) * <bump, w T^s x0>.
    pub reference_pairing: f64,
    /// pairing / reference_pairing; near 1 exactly when the reflected field
    /// is a weak solution up to the boundary defect carried by T^s x0.
    pub ratio: f64,
}

/// Measures how far the even reflection is from being a weak solution
/// across y = 0, pairing the y = 0 defect against a smooth bump centered at
/// `center` with radius `radius` on a one-dimensional base. The defect is
/// proportional to the fractional power of the boundary vector, so the
/// pairing vanishes (to discretization error) wherever that power does.
pub fn reflection_residual_with_probe(
    field: &ExtensionBvpField,
    quad: &QuadratureOpts,
    center: f64,
    radius: f64,
) -> Result<ReflectionReport> {
    let op = &field.base;
    let nx = op.n();
    let sigma = field.sigma;
    let two_s = 2.0 * sigma;
    let m0 = field.boundary_row();
    if m0 + 1 >= field.ys.len() {
        return Err(CoreError::GridTooCoarse(
            "no height above the boundary row".into(),
        ));
    }
    let x0 = field.u.row(m0).to_owned();
    let u1 = field.u.row(m0 + 1).to_owned();
    let y1 = field.ys[m0 + 1];
    let y_half = 0.5 * y1;
    let g0 = two_s / y1.powf(two_s);
    // boundary cell extent under |y|^{1-2s}, both sides
    let d0 = 2.0 * y_half.powf(2.0 - two_s) / (2.0 - two_s);
    let vol = op.grid.cell_volume();
    let wv: Array1<f64> = op.inner_weight.mapv(|w| w * vol);
    let stiff_x0 = &op.apply(&x0) * &wv;
    let residual_row = &stiff_x0 * d0 + &(&(&x0 - &u1) * &wv) * (2.0 * g0);

    if op.grid.dim != 1 {
        return Err(CoreError::NotApplicable(
            "reflection pairing is defined over a one-dimensional base".into(),
        ));
    }
    let mut bump = Array1::<f64>::zeros(nx);
    for i in 0..nx {
        let s = (op.grid.axis_coord(0, i) - center) / radius;
        bump[i] = (1.0 - s * s).max(0.0).powi(2);
    }
    let pairing = bump.dot(&residual_row);

    let frac = frac_power_apply_balakrishnan(op, sigma, &x0, quad)?;
    let coef = quotient_coefficient(sigma);
    let reference_pairing = -2.0 * two_s * coef * bump.dot(&(&frac * &wv));
    let ratio = if reference_pairing != 0.0 {
        pairing / reference_pairing
    } else if pairing == 0.0 {
        1.0
    } else {
        f64::INFINITY
    };
    Ok(ReflectionReport {
        residual_row,
        pairing,
        reference_pairing,
        ratio,
    })
}

/// Reflection defect against the default bump spanning the middle of the
/// base domain.
pub fn reflection_residual(
    field: &ExtensionBvpField,
    quad: &QuadratureOpts,
) -> Result<ReflectionReport> {
    let lo = field.base.grid.extents[0][0];
    let hi = field.base.grid.extents[0][1];
    reflection_residual_with_probe(field, quad, 0.5 * (lo + hi), 0.35 * (hi - lo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::spectral::frac_power_matrix_spectral;
    use crate::grid::Boundary;
    use crate::special::scalar_profile;
    use ndarray::Array1;
    use ndarray_linalg::{Eigh, Solve, UPLO};

    fn unit_line(n: usize, boundary: Boundary) -> (GridSpec, CoeffField, WeightField) {
        let g = GridSpec::line(0.0, 1.0, n, boundary).unwrap();
        let a = CoeffField::identity(&g);
        let w = WeightField::unit(&g);
        (g, a, w)
    }

    fn dirichlet_op(n: usize) -> AssembledOperator {
        let (g, a, w) = unit_line(n, Boundary::DirichletEliminated);
        assemble_weighted_elliptic(&g, &a, &w).unwrap()
    }

    fn sine_vector(op: &AssembledOperator) -> Array1<f64> {
        (0..op.n())
            .map(|i| (std::f64::consts::PI * op.grid.axis_coord(0, i)).sin())
            .collect()
    }

    #[test]
    fn half_power_solution_has_the_discrete_mean_value_property() {
        // s = 1/2, unit weight, uniform vertical mesh equal to the base step:
        // interior unknowns equal the average of their four neighbors
        let (g, a, w) = unit_line(15, Boundary::DirichletEliminated);
        let op = assemble_weighted_elliptic(&g, &a, &w).unwrap();
        let h = op.grid.h(0);
        let ny = 12;
        let opts = BvpOpts {
            ratio: 1.0,
            cg_rtol: 1e-13,
            ..Default::default()
        };
        let x0 = sine_vector(&op);
        let sol = solve_extension_bvp(&g, &a, &w, 0.5, &x0, h * ny as f64, ny, &opts).unwrap();
        let u = &sol.u;
        let mut worst: f64 = 0.0;
        for m in 2..ny {
            for i in 1..op.n() - 1 {
                let avg = 0.25 * (u[[m - 1, i]] + u[[m + 1, i]] + u[[m, i - 1]] + u[[m, i + 1]]);
                worst = worst.max((u[[m, i]] - avg).abs());
            }
        }
        assert!(worst < 1e-10, "mean-value defect {worst}");
    }

    #[test]
    fn constant_boundary_data_on_a_periodic_base_stays_constant() {
        let (g, a, w) = unit_line(12, Boundary::Periodic);
        let x0 = Array1::from_elem(12, 1.0);
        let sol =
            solve_extension_bvp(&g, &a, &w, 0.4, &x0, 0.8, 16, &BvpOpts::default()).unwrap();
        for &v in sol.u.iter() {
            assert!((v - 1.0).abs() < 1e-9, "constant drifted to {v}");
        }
    }

    #[test]
    fn modal_profile_matches_the_scalar_closed_form_and_improves_under_refinement() {
        let op = dirichlet_op(23);
        let (vals, vecs) = op.matrix.eigh(UPLO::Upper).unwrap();
        let lam = vals[0];
        let mode = vecs.column(0).to_owned();
        let sigma = 0.6;
        let y_extent = 10.0 / lam.sqrt();
        let err_for = |ny: usize| {
            let sol = solve_extension_bvp_operator(
                &op,
                sigma,
                &mode,
                y_extent,
                ny,
                &BvpOpts::default(),
            )
            .unwrap();
            let norm2 = mode.dot(&mode);
            let mut worst: f64 = 0.0;
            for m in 1..=ny / 2 {
                let c = sol.u.row(m).dot(&mode) / norm2;
                let want = scalar_profile(sigma, lam, sol.ys[m]);
                worst = worst.max((c - want).abs());
            }
            worst
        };
        let coarse = err_for(24);
        let fine = err_for(64);
        assert!(coarse < 0.05, "coarse modal error {coarse}");
        assert!(fine < 0.7 * coarse, "no refinement gain: {coarse} -> {fine}");
    }

    #[test]
    fn field_error_decays_under_vertical_refinement() {
        let op = dirichlet_op(17);
        let x0 = sine_vector(&op);
        let sigma = 0.7;
        let y_extent = 10.0 / std::f64::consts::PI;
        let err_for = |ny: usize| {
            let sol = solve_extension_bvp_operator(
                &op,
                sigma,
                &x0,
                y_extent,
                ny,
                &BvpOpts::default(),
            )
            .unwrap();
            let rows: Vec<usize> = (2..=ny / 2).collect();
            let ys: Vec<f64> = rows.iter().map(|&m| sol.ys[m]).collect();
            let profile =
                crate::extension::profile::extend_poisson_at(&op, sigma, &x0, &ys, &Default::default())
                    .unwrap();
            let scale = op.weighted_norm(&x0);
            let mut worst: f64 = 0.0;
            for (k, &m) in rows.iter().enumerate() {
                let d = op.weighted_norm(&(&sol.u.row(m).to_owned() - &profile.values[k]));
                worst = worst.max(d / scale);
            }
            worst
        };
        let coarse = err_for(16);
        let fine = err_for(32);
        assert!(fine < coarse / 2.0, "refinement gave {coarse} -> {fine}");
    }

    #[test]
    fn boundary_trace_approaches_the_scaled_fractional_power() {
        let op = dirichlet_op(19);
        let x0 = sine_vector(&op);
        let sigma = 0.3;
        let y_extent = 10.0 / std::f64::consts::PI;
        let sol = solve_extension_bvp_operator(
            &op,
            sigma,
            &x0,
            y_extent,
            96,
            &BvpOpts::default(),
        )
        .unwrap();
        let frac =
            frac_power_apply_balakrishnan(&op, sigma, &x0, &QuadratureOpts::default()).unwrap();
        let want = &frac * (2.0 * sigma * quotient_coefficient(sigma));
        let rel = op.weighted_norm(&(&sol.trace - &want)) / op.weighted_norm(&want);
        assert!(rel < 0.05, "trace error {rel}");
    }

    #[test]
    fn half_power_solution_obeys_the_maximum_principle() {
        let (g, a, w) = unit_line(12, Boundary::Periodic);
        let x0: Array1<f64> = (0..12)
            .map(|i| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * (i as f64) / 12.0).sin())
            .collect();
        let lo = x0.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = x0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sol =
            solve_extension_bvp(&g, &a, &w, 0.5, &x0, 1.5, 24, &BvpOpts::default()).unwrap();
        for &v in sol.u.iter() {
            assert!(v >= lo - 1e-9 && v <= hi + 1e-9, "{v} escapes [{lo}, {hi}]");
        }
    }

    #[test]
    fn block_operator_is_symmetric_when_the_base_is() {
        let op = dirichlet_op(9);
        let x0 = sine_vector(&op);
        let sol =
            solve_extension_bvp_operator(&op, 0.45, &x0, 2.0, 10, &BvpOpts::default()).unwrap();
        assert!(sol.block.symmetric);
        let n = sol.block.n_unknowns();
        let mut v = Array1::<f64>::zeros(n);
        let mut w = Array1::<f64>::zeros(n);
        for k in 0..n {
            v[k] = ((k * 2654435761) % 1000) as f64 / 1000.0 - 0.5;
            w[k] = ((k * 40503 + 7) % 1000) as f64 / 1000.0 - 0.5;
        }
        let a = w.dot(&sol.block.apply(&v));
        let b = v.dot(&sol.block.apply(&w));
        assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1e-300));
    }

    #[test]
    fn reflection_of_a_kernel_vector_is_an_exact_weak_solution() {
        // periodic base: constants are annihilated, so the reflected field of
        // a constant boundary vector must satisfy every weak equation
        let (g, a, w) = unit_line(16, Boundary::Periodic);
        let x0 = Array1::from_elem(16, 1.3);
        let sol =
            solve_extension_bvp(&g, &a, &w, 0.4, &x0, 1.0, 24, &BvpOpts::default()).unwrap();
        let rep = reflection_residual(&sol, &QuadratureOpts::default()).unwrap();
        let scale = sol.base.weighted_norm(&x0);
        let rnorm = rep.residual_row.dot(&rep.residual_row).sqrt();
        assert!(rnorm < 1e-8 * scale, "kernel reflection defect {rnorm}");
    }

    #[test]
    fn reflection_defect_matches_the_fractional_power_pairing() {
        let op = dirichlet_op(31);
        let x0 = sine_vector(&op);
        let y_extent = 10.0 / std::f64::consts::PI;
        let sol = solve_extension_bvp_operator(
            &op,
            0.35,
            &x0,
            y_extent,
            96,
            &BvpOpts::default(),
        )
        .unwrap();
        let rep = reflection_residual(&sol, &QuadratureOpts::default()).unwrap();
        assert!((rep.ratio - 1.0).abs() < 0.05, "pairing ratio {}", rep.ratio);
    }

    #[test]
    fn interior_fractional_harmonicity_shrinks_the_reflection_defect_under_refinement() {
        // boundary data engineered so the fractional power vanishes on the
        // interior node set: the weak defect paired with a bump inside that
        // set is pure discretization error and must at least halve per
        // vertical doubling
        let (g, a, w) = unit_line(16, Boundary::Periodic);
        let op = assemble_weighted_elliptic(&g, &a, &w).unwrap();
        let sigma = 0.35;
        let s = frac_power_matrix_spectral(&op, sigma).unwrap();
        let nb = 4;
        let ni = 12;
        let ub = ndarray::array![1.0, 0.6, -0.4, 0.3];
        let mut sii = Array2::<f64>::zeros((ni, ni));
        let mut rhs = Array1::<f64>::zeros(ni);
        for i in 0..ni {
            for j in 0..ni {
                sii[[i, j]] = s[[nb + i, nb + j]];
            }
            for jb in 0..nb {
                rhs[i] -= s[[nb + i, jb]] * ub[jb];
            }
        }
        let ui = sii.solve_into(rhs).unwrap();
        let mut u = Array1::<f64>::zeros(16);
        for j in 0..nb {
            u[j] = ub[j];
        }
        for i in 0..ni {
            u[nb + i] = ui[i];
        }
        let su = s.dot(&u);
        let interior_defect = su.slice(ndarray::s![nb..]).iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        assert!(interior_defect < 1e-10, "engineered data defect {interior_defect}");

        let opts = BvpOpts {
            ratio: 1.1,
            cg_rtol: 1e-13,
            ..Default::default()
        };
        let quad = QuadratureOpts::default();
        let pairing = |ny: usize| {
            let f = solve_extension_bvp(&g, &a, &w, sigma, &u, 1.0, ny, &opts).unwrap();
            reflection_residual_with_probe(&f, &quad, 0.625, 0.18)
                .unwrap()
                .pairing
                .abs()
        };
        let scale = op.weighted_norm(&u);
        let p48 = pairing(48);
        let p96 = pairing(96);
        assert!(p48 < 5e-3 * scale, "coarse defect {p48}");
        assert!(p96 < 0.5 * p48, "defect did not halve: {p48} -> {p96}");
    }

    #[test]
    fn reflected_field_is_even_and_matches_the_half_solution() {
        let op = dirichlet_op(9);
        let x0 = sine_vector(&op);
        let sol =
            solve_extension_bvp_operator(&op, 0.5, &x0, 2.0, 8, &BvpOpts::default()).unwrap();
        let refl = reflect_even(&sol).unwrap();
        let ny = 8;
        assert!(refl.is_reflected());
        assert_eq!(refl.ys.len(), 2 * ny + 1);
        assert_eq!(refl.boundary_row(), ny);
        for m in 0..=2 * ny {
            let src = (m as isize - ny as isize).unsigned_abs();
            assert_eq!(refl.u.row(m), sol.u.row(src));
            assert_eq!(refl.extended_weight.row(m), sol.extended_weight.row(src));
            assert!((refl.ys[m].abs() - sol.ys[src]).abs() < 1e-15);
        }
        // reflecting twice is refused
        assert!(reflect_even(&refl).is_err());
    }

    #[test]
    fn csv_export_lists_every_node_with_full_precision() {
        let op = dirichlet_op(5);
        let x0 = sine_vector(&op);
        let sol =
            solve_extension_bvp_operator(&op, 0.5, &x0, 1.0, 8, &BvpOpts::default()).unwrap();
        let csv = sol.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "x_index,y_value,U");
        assert_eq!(csv.lines().count(), 1 + 5 * 9);
        let probe = csv.lines().nth(1).unwrap();
        let mut cells = probe.split(',');
        assert_eq!(cells.next().unwrap(), "0");
        let y: f64 = cells.next().unwrap().parse().unwrap();
        assert_eq!(y, 0.0);
        let v: f64 = cells.next().unwrap().parse().unwrap();
        assert_eq!(v, sol.u[[0, 0]]);
    }

    #[test]
    fn oversized_problems_are_refused() {
        let op = dirichlet_op(40);
        let x0 = sine_vector(&op);
        let opts = BvpOpts {
            max_unknowns: 1000,
            ..Default::default()
        };
        assert!(matches!(
            solve_extension_bvp_operator(&op, 0.5, &x0, 1.0, 48, &opts),
            Err(CoreError::SizeCapExceeded { .. })
        ));
    }

    #[test]
    fn underresolved_vertical_axes_are_refused() {
        let op = dirichlet_op(6);
        let x0 = sine_vector(&op);
        assert!(matches!(
            solve_extension_bvp_operator(&op, 0.5, &x0, 1.0, 5, &BvpOpts::default()),
            Err(CoreError::GridTooCoarse(_))
        ));
    }

    #[test]
    fn nonsymmetric_base_is_refused() {
        use crate::operator::OperatorFamily;
        let g = GridSpec::line(0.0, 1.0, 4, Boundary::DirichletEliminated).unwrap();
        let m = ndarray::array![
            [2.0, -1.0, 0.0, 0.0],
            [0.0, 2.0, -1.0, 0.0],
            [0.0, 0.0, 2.0, -1.0],
            [0.0, 0.0, 0.0, 2.0]
        ];
        let op = AssembledOperator::from_matrix(m, g, OperatorFamily::Nondivergence).unwrap();
        let x0 = Array1::ones(4);
        assert!(matches!(
            solve_extension_bvp_operator(&op, 0.5, &x0, 1.0, 8, &BvpOpts::default()),
            Err(CoreError::NotApplicable(_))
        ));
    }
}
