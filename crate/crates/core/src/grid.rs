use crate::error::{CoreError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Homogeneous Dirichlet, boundary nodes eliminated from the unknowns.
    DirichletEliminated,
    Periodic,
}

/// Uniform tensor grid in one or two dimensions.
///
/// `points_per_axis` counts the retained nodes per axis. For eliminated
/// Dirichlet boundaries the nodes are the interior points of a partition of
/// the extent into `points_per_axis + 1` cells; for periodic boundaries the
/// nodes tile the extent with spacing `len / points_per_axis`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub extents: Vec<[f64; 2]>,
    pub points_per_axis: usize,
    pub boundary: Boundary,
}

impl GridSpec {
    pub fn new(
        dim: usize,
        extents: Vec<[f64; 2]>,
        points_per_axis: usize,
        boundary: Boundary,
    ) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(CoreError::InvalidArgument(format!(
                "grid dim must be 1 or 2, got {dim}"
            )));
        }
        if extents.len() != dim {
            return Err(CoreError::DimensionMismatch(format!(
                "expected {dim} extents, got {}",
                extents.len()
            )));
        }
        for e in &extents {
            if !(e[1] > e[0]) || !e[0].is_finite() || !e[1].is_finite() {
                return Err(CoreError::InvalidArgument(format!(
                    "extent [{}, {}] is not an increasing finite interval",
                    e[0], e[1]
                )));
            }
        }
        if points_per_axis < 3 {
            return Err(CoreError::GridTooCoarse(format!(
                "need at least 3 points per axis, got {points_per_axis}"
            )));
        }
        Ok(GridSpec {
            dim,
            extents,
            points_per_axis,
            boundary,
        })
    }

    pub fn line(lo: f64, hi: f64, points: usize, boundary: Boundary) -> Result<Self> {
        Self::new(1, vec![[lo, hi]], points, boundary)
    }

    pub fn square(lo: f64, hi: f64, points: usize, boundary: Boundary) -> Result<Self> {
        Self::new(2, vec![[lo, hi], [lo, hi]], points, boundary)
    }

    pub fn n_nodes(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    /// Mesh width along `axis`.
    pub fn h(&self, axis: usize) -> f64 {
        let len = self.extents[axis][1] - self.extents[axis][0];
        match self.boundary {
            Boundary::DirichletEliminated => len / (self.points_per_axis + 1) as f64,
            Boundary::Periodic => len / self.points_per_axis as f64,
        }
    }

    /// Cell volume h_1 * ... * h_dim.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.h(a)).product()
    }

    pub fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        let lo = self.extents[axis][0];
        match self.boundary {
            Boundary::DirichletEliminated => lo + (i as f64 + 1.0) * self.h(axis),
            Boundary::Periodic => lo + i as f64 * self.h(axis),
        }
    }

    /// Multi-index of a flat node id (row-major, axis 0 slowest).
    pub fn multi_index(&self, flat: usize) -> [usize; 2] {
        match self.dim {
            1 => [flat, 0],
            _ => [flat / self.points_per_axis, flat % self.points_per_axis],
        }
    }

    pub fn flat_index(&self, mi: [usize; 2]) -> usize {
        match self.dim {
            1 => mi[0],
            _ => mi[0] * self.points_per_axis + mi[1],
        }
    }

    pub fn coord(&self, flat: usize) -> [f64; 2] {
        let mi = self.multi_index(flat);
        let mut c = [0.0; 2];
        for a in 0..self.dim {
            c[a] = self.axis_coord(a, mi[a]);
        }
        c
    }

    /// Neighbor of `flat` one step along `axis` in direction `dir` (+1/-1).
    /// `None` encodes an eliminated Dirichlet boundary node (value 0).
    pub fn neighbor(&self, flat: usize, axis: usize, dir: i64) -> Option<usize> {
        let mut mi = self.multi_index(flat);
        let n = self.points_per_axis as i64;
        let next = mi[axis] as i64 + dir;
        match self.boundary {
            Boundary::DirichletEliminated => {
                if next < 0 || next >= n {
                    None
                } else {
                    mi[axis] = next as usize;
                    Some(self.flat_index(mi))
                }
            }
            Boundary::Periodic => {
                mi[axis] = next.rem_euclid(n) as usize;
                Some(self.flat_index(mi))
            }
        }
    }

    /// Euclidean distance between two nodes (no periodic wrap shortcut;
    /// ball families on periodic grids use the embedded coordinates).
    pub fn dist(&self, p: usize, q: usize) -> f64 {
        let a = self.coord(p);
        let b = self.coord(q);
        let mut s = 0.0;
        for axis in 0..self.dim {
            s += (a[axis] - b[axis]).powi(2);
        }
        s.sqrt()
    }

    pub fn diameter(&self) -> f64 {
        let mut s = 0.0;
        for e in &self.extents {
            s += (e[1] - e[0]).powi(2);
        }
        s.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_specs() {
        assert!(GridSpec::line(0.0, 1.0, 2, Boundary::Periodic).is_err());
        assert!(GridSpec::line(1.0, 1.0, 5, Boundary::Periodic).is_err());
        assert!(GridSpec::new(3, vec![[0.0, 1.0]; 3], 5, Boundary::Periodic).is_err());
    }

    #[test]
    fn dirichlet_line_nodes_are_interior() {
        let g = GridSpec::line(0.0, 4.0, 3, Boundary::DirichletEliminated).unwrap();
        assert_eq!(g.h(0), 1.0);
        assert_eq!(g.axis_coord(0, 0), 1.0);
        assert_eq!(g.axis_coord(0, 2), 3.0);
        assert_eq!(g.neighbor(0, 0, -1), None);
        assert_eq!(g.neighbor(2, 0, 1), None);
        assert_eq!(g.neighbor(1, 0, 1), Some(2));
    }

    #[test]
    fn periodic_wraps() {
        let g = GridSpec::line(0.0, 1.0, 4, Boundary::Periodic).unwrap();
        assert_eq!(g.h(0), 0.25);
        assert_eq!(g.neighbor(0, 0, -1), Some(3));
        assert_eq!(g.neighbor(3, 0, 1), Some(0));
    }

    #[test]
    fn square_indexing_round_trips() {
        let g = GridSpec::square(0.0, 1.0, 5, Boundary::DirichletEliminated).unwrap();
        for flat in 0..g.n_nodes() {
            assert_eq!(g.flat_index(g.multi_index(flat)), flat);
        }
        let c = g.coord(g.flat_index([2, 3]));
        assert!((c[0] - 0.5).abs() < 1e-15);
        assert!((c[1] - 4.0 / 6.0).abs() < 1e-15);
    }
}
