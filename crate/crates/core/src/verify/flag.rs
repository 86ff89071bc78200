//! Degeneracy-direction scan for diagonal coefficient fields. At each
//! sampled node the scan looks for an ordering of the axes such that every
//! coefficient is not identically zero on the slice spanned by the axes
//! admitted so far, within a small index box around the node. Fields whose
//! degenerate directions cannot be exhausted this way fail the scan.

use crate::error::{CoreError, Result};
use crate::field::{CoeffField, CoeffKind};
use crate::grid::{Boundary, GridSpec};
use serde::Serialize;
use std::io::Write;

/// Index half-width of the neighborhood box around each sampled node.
const BOX_HALF_WIDTH: usize = 2;

/// Above this many nodes the scan samples a stride instead of every node.
const MAX_SAMPLED: usize = 4096;

#[derive(Debug, Clone, Serialize)]
pub struct PointFlag {
    pub node: usize,
    pub pass: bool,
    /// Axis ordering that exhausts the degeneracy, empty on failure.
    pub chain: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlagReport {
    pub pass: bool,
    pub n_checked: usize,
    pub n_failed: usize,
    pub points: Vec<PointFlag>,
}

impl FlagReport {
    pub fn to_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "node,pass,chain")?;
        for p in &self.points {
            let chain = p
                .chain
                .iter()
                .map(|a| a.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            writeln!(out, "{},{},{}", p.node, u8::from(p.pass), chain)?;
        }
        Ok(())
    }
}

fn index_dist(points: usize, a: usize, b: usize, periodic: bool) -> usize {
    let d = a.abs_diff(b);
    if periodic {
        d.min(points - d)
    } else {
        d
    }
}

fn axis_orders(dim: usize) -> Vec<Vec<usize>> {
    match dim {
        1 => vec![vec![0]],
        _ => vec![vec![0, 1], vec![1, 0]],
    }
}

/// Scans sampled nodes for an axis ordering whose spanned slices all carry a
/// nonvanishing coefficient. Only diagonal fields have well-defined
/// degeneracy directions, so other kinds are rejected.
pub fn flag_condition_check(a: &CoeffField, grid: &GridSpec) -> Result<FlagReport> {
    if a.kind != CoeffKind::DiagonalA {
        return Err(CoreError::InvalidCoefficient(
            "degeneracy-direction scan needs a diagonal coefficient field".into(),
        ));
    }
    if a.n_nodes() != grid.n_nodes() {
        return Err(CoreError::DimensionMismatch(format!(
            "field has {} nodes, grid has {}",
            a.n_nodes(),
            grid.n_nodes()
        )));
    }
    let n = grid.n_nodes();
    let periodic = grid.boundary == Boundary::Periodic;
    let stride = n.div_ceil(MAX_SAMPLED).max(1);
    let orders = axis_orders(grid.dim);

    let mut points = Vec::new();
    let mut n_failed = 0usize;
    for node in (0..n).step_by(stride) {
        let mi = grid.multi_index(node);
        let in_box: Vec<usize> = (0..n)
            .filter(|&q| {
                let mq = grid.multi_index(q);
                (0..grid.dim).all(|ax| {
                    index_dist(grid.points_per_axis, mi[ax], mq[ax], periodic) <= BOX_HALF_WIDTH
                })
            })
            .collect();
        let mut chain = Vec::new();
        'orders: for order in &orders {
            let mut spanned = [false; 2];
            for &axis in order {
                spanned[axis] = true;
                // the slice spans the admitted axes; the rest stay centered
                let alive = in_box.iter().any(|&q| {
                    let mq = grid.multi_index(q);
                    let on_slice =
                        (0..grid.dim).all(|ax| spanned[ax] || mq[ax] == mi[ax]);
                    on_slice && a.diag_at(q)[axis].abs() > 0.0
                });
                if !alive {
                    continue 'orders;
                }
            }
            chain = order.clone();
            break;
        }
        let pass = !chain.is_empty();
        if !pass {
            n_failed += 1;
        }
        points.push(PointFlag { node, pass, chain });
    }
    Ok(FlagReport {
        pass: n_failed == 0,
        n_checked: points.len(),
        n_failed,
        points,
    })
}
