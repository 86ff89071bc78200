use crate::balls::{Ball, BallFamily, BallMetric};
use crate::error::{CoreError, Result};
use crate::field::{CoeffField, CoeffKind};
use crate::grid::GridSpec;
use ndarray::Array1;
use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Travel time across the face between two adjacent nodes along `axis`:
/// h / (mean of the axis coefficient at the endpoints). A vanishing mean
/// disconnects the face entirely.
fn face_time(grid: &GridSpec, coeff: &CoeffField, i: usize, j: usize, axis: usize) -> Option<f64> {
    let abar = 0.5 * (coeff.diag_at(i)[axis] + coeff.diag_at(j)[axis]);
    if abar > 0.0 {
        Some(grid.h(axis) / abar)
    } else {
        None
    }
}

/// Shortest travel times from `from` to every node, where movement along an
/// axis is admissible at the local speed of that axis coefficient. Nodes cut
/// off by vanishing coefficients come back as infinity.
pub fn subunit_distance(
    grid: &GridSpec,
    coeff: &CoeffField,
    from: usize,
) -> Result<Array1<f64>> {
    if coeff.kind != CoeffKind::DiagonalA {
        return Err(CoreError::InvalidArgument(
            "degenerate travel times need a diagonal coefficient field".into(),
        ));
    }
    let n = grid.n_nodes();
    if coeff.n_nodes() != n {
        return Err(CoreError::DimensionMismatch(format!(
            "coefficient field has {} nodes, grid has {n}",
            coeff.n_nodes()
        )));
    }
    if from >= n {
        return Err(CoreError::InvalidArgument(format!(
            "source node {from} out of range ({n} nodes)"
        )));
    }
    let mut dist = Array1::from_elem(n, f64::INFINITY);
    dist[from] = 0.0;
    // nonnegative finite costs order correctly by their IEEE bit patterns
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
    heap.push(Reverse((0.0_f64.to_bits(), from)));
    while let Some(Reverse((dbits, i))) = heap.pop() {
        let d = f64::from_bits(dbits);
        if d > dist[i] {
            continue;
        }
        for axis in 0..grid.dim {
            for dir in [-1_i64, 1] {
                if let Some(j) = grid.neighbor(i, axis, dir) {
                    if let Some(t) = face_time(grid, coeff, i, j, axis) {
                        let nd = d + t;
                        if nd < dist[j] {
                            dist[j] = nd;
                            heap.push(Reverse((nd.to_bits(), j)));
                        }
                    }
                }
            }
        }
    }
    Ok(dist)
}

/// Strict sublevel sets {q : d(c, q) < r} of the degenerate travel-time
/// metric around the given centers.
pub fn metric_balls(
    grid: &GridSpec,
    coeff: &CoeffField,
    centers: &[usize],
    radii: &[f64],
) -> Result<BallFamily> {
    if centers.is_empty() || radii.is_empty() {
        return Err(CoreError::InvalidArgument(
            "need at least one center and one radius".into(),
        ));
    }
    for &r in radii {
        if !(r > 0.0 && r.is_finite()) {
            return Err(CoreError::InvalidArgument(format!(
                "ball radius {r} must be positive and finite"
            )));
        }
    }
    let mut balls = Vec::with_capacity(centers.len() * radii.len());
    for &c in centers {
        let dist = subunit_distance(grid, coeff, c)?;
        for &r in radii {
            let members: Vec<usize> = (0..grid.n_nodes()).filter(|&q| dist[q] < r).collect();
            balls.push(Ball {
                center: c,
                radius: r,
                members,
            });
        }
    }
    Ok(BallFamily {
        metric: BallMetric::Subunit,
        balls,
    })
}
