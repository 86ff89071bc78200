use crate::error::{CoreError, Result};
use crate::field::{CoeffField, CoeffKind, WeightField};
use crate::grid::GridSpec;
use crate::operator::{AssembledOperator, OperatorFamily};
use ndarray::{Array1, Array2};

/// Sector half-angle arctan(Lambda/lambda) of the ellipticity cone.
pub fn sector_angle(lambda: f64, big_lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && big_lambda >= lambda && big_lambda.is_finite()) {
        return Err(CoreError::InvalidArgument(format!(
            "need 0 < lambda <= Lambda < inf, got ({lambda}, {big_lambda})"
        )));
    }
    Ok((big_lambda / lambda).atan())
}

fn check_sizes(grid: &GridSpec, coeff: &CoeffField, w: Option<&WeightField>) -> Result<()> {
    if coeff.n_nodes() != grid.n_nodes() {
        return Err(CoreError::DimensionMismatch(format!(
            "coefficient field has {} nodes, grid has {}",
            coeff.n_nodes(),
            grid.n_nodes()
        )));
    }
    if let Some(w) = w {
        if w.len() != grid.n_nodes() {
            return Err(CoreError::DimensionMismatch(format!(
                "weight has {} nodes, grid has {}",
                w.len(),
                grid.n_nodes()
            )));
        }
    }
    Ok(())
}

/// Tangential difference across the face (i, q) along axis `k`, as a list of
/// (node, coefficient) pairs approximating d_k u at the face center.
/// Missing neighbors are eliminated Dirichlet zeros.
fn face_tangential(
    grid: &GridSpec,
    i: usize,
    q: Option<usize>,
    k: usize,
    row: &mut [f64],
    scale: f64,
) {
    let hk = grid.h(k);
    let mut add = |node: Option<usize>, s: f64| {
        if let Some(n) = node {
            row[n] += s * scale / (4.0 * hk);
        }
    };
    add(grid.neighbor(i, k, 1), 1.0);
    add(grid.neighbor(i, k, -1), -1.0);
    if let Some(q) = q {
        add(grid.neighbor(q, k, 1), 1.0);
        add(grid.neighbor(q, k, -1), -1.0);
    } else {
        // boundary face: repeat the one-sided pair so the face value is still
        // an average of two samples
        add(grid.neighbor(i, k, 1), 1.0);
        add(grid.neighbor(i, k, -1), -1.0);
    }
}

/// Weighted divergence-form assembly of -(1/w) div(w A grad u) by finite
/// volumes with face-averaged coefficients (3-point stencil in 1D, 5-point
/// plus cross terms in 2D).
pub fn assemble_weighted_elliptic(
    grid: &GridSpec,
    a: &CoeffField,
    w: &WeightField,
) -> Result<AssembledOperator> {
    if a.kind != CoeffKind::MatrixA {
        return Err(CoreError::InvalidCoefficient(
            "weighted elliptic assembly needs a full-matrix coefficient field".into(),
        ));
    }
    check_sizes(grid, a, Some(w))?;
    let n = grid.n_nodes();
    let vol = grid.cell_volume();
    let mut m = Array2::<f64>::zeros((n, n));
    let mut row = vec![0.0; n];
    for i in 0..n {
        row.iter_mut().for_each(|v| *v = 0.0);
        let ai = a.at(i);
        let wi = w.values[i];
        for axis in 0..grid.dim {
            let hj = grid.h(axis);
            let area = vol / hj;
            for dir in [1i64, -1i64] {
                let q = grid.neighbor(i, axis, dir);
                let (wf, af) = match q {
                    Some(q) => {
                        let aq = a.at(q);
                        let mut af = [[0.0; 2]; 2];
                        for r in 0..2 {
                            for c in 0..2 {
                                af[r][c] = 0.5 * (ai[r][c] + aq[r][c]);
                            }
                        }
                        (0.5 * (wi + w.values[q]), af)
                    }
                    None => (wi, ai),
                };
                // outward flux through this face is w (A grad u) . (dir e_axis);
                // the row accumulates -sum_faces flux_out * area
                let diag_c = wf * af[axis][axis] * area / hj;
                // normal derivative (u_q - u_i)/h * dir
                if let Some(q) = q {
                    row[q] -= diag_c;
                    row[i] += diag_c;
                } else {
                    row[i] += diag_c;
                }
                if grid.dim == 2 {
                    let k = 1 - axis;
                    let cross = -(dir as f64) * wf * af[axis][k] * area;
                    if cross != 0.0 {
                        face_tangential(grid, i, q, k, &mut row, cross);
                    }
                }
            }
        }
        let s = 1.0 / (wi * vol);
        for j in 0..n {
            if row[j] != 0.0 {
                m[[i, j]] = row[j] * s;
            }
        }
    }
    let iw = w.values.clone();
    let symmetric = AssembledOperator::detect_symmetry(&m, &iw);
    Ok(AssembledOperator {
        matrix: m,
        inner_weight: iw,
        family: OperatorFamily::WeightedElliptic,
        symmetric,
        sector_angle_hint: sector_angle(a.lambda, a.big_lambda)?,
        grid: grid.clone(),
    })
}

/// Degenerate diagonal assembly of -div(diag(a_j^2) grad u). Face speeds are
/// arithmetic means of the nodal a_j; a vanishing face mean gives a
/// disconnected (zero-conductance) edge.
pub fn assemble_subelliptic_diagonal(grid: &GridSpec, a: &CoeffField) -> Result<AssembledOperator> {
    if a.kind != CoeffKind::DiagonalA {
        return Err(CoreError::InvalidCoefficient(
            "subelliptic assembly needs a diagonal coefficient field".into(),
        ));
    }
    check_sizes(grid, a, None)?;
    let n = grid.n_nodes();
    let mut m = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for axis in 0..grid.dim {
            let hj = grid.h(axis);
            for dir in [1i64, -1i64] {
                let q = grid.neighbor(i, axis, dir);
                let face = match q {
                    Some(q) => 0.5 * (a.diag_at(i)[axis] + a.diag_at(q)[axis]),
                    None => a.diag_at(i)[axis],
                };
                let g = face * face / (hj * hj);
                if g == 0.0 {
                    continue;
                }
                m[[i, i]] += g;
                if let Some(q) = q {
                    m[[i, q]] -= g;
                }
            }
        }
    }
    let iw = Array1::ones(n);
    let symmetric = AssembledOperator::detect_symmetry(&m, &iw);
    Ok(AssembledOperator {
        matrix: m,
        inner_weight: iw,
        family: OperatorFamily::SubellipticDiagonal,
        symmetric,
        sector_angle_hint: 0.0,
        grid: grid.clone(),
    })
}

/// Nondivergence assembly: row i is -a^{jk}(x_i) contracted with second
/// difference stencils (central for pure, four-corner for mixed terms).
pub fn assemble_nondivergence(grid: &GridSpec, a: &CoeffField) -> Result<AssembledOperator> {
    if a.kind != CoeffKind::NondivA {
        return Err(CoreError::InvalidCoefficient(
            "nondivergence assembly needs a full-matrix coefficient field".into(),
        ));
    }
    check_sizes(grid, a, None)?;
    let n = grid.n_nodes();
    let mut m = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let ai = a.at(i);
        for axis in 0..grid.dim {
            let h2 = grid.h(axis) * grid.h(axis);
            let c = ai[axis][axis] / h2;
            m[[i, i]] += 2.0 * c;
            for dir in [1i64, -1i64] {
                if let Some(q) = grid.neighbor(i, axis, dir) {
                    m[[i, q]] -= c;
                }
            }
        }
        if grid.dim == 2 {
            let cxy = (ai[0][1] + ai[1][0]) / (4.0 * grid.h(0) * grid.h(1));
            if cxy != 0.0 {
                for (dx, dy, s) in [(1, 1, 1.0), (-1, -1, 1.0), (1, -1, -1.0), (-1, 1, -1.0)] {
                    if let Some(p) = grid
                        .neighbor(i, 0, dx)
                        .and_then(|p| grid.neighbor(p, 1, dy))
                    {
                        m[[i, p]] -= s * cxy;
                    }
                }
            }
        }
    }
    let iw = Array1::ones(n);
    let symmetric = AssembledOperator::detect_symmetry(&m, &iw);
    Ok(AssembledOperator {
        matrix: m,
        inner_weight: iw,
        family: OperatorFamily::Nondivergence,
        symmetric,
        sector_angle_hint: sector_angle(a.lambda, a.big_lambda)?,
        grid: grid.clone(),
    })
}
