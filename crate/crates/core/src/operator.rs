use crate::grid::GridSpec;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorFamily {
    WeightedElliptic,
    SubellipticDiagonal,
    Nondivergence,
}

/// Dense matrix realization of an assembled operator together with the
/// inner-product weight it is self-adjoint against (when it is).
#[derive(Debug, Clone)]
pub struct AssembledOperator {
    pub matrix: Array2<f64>,
    /// Nodal weight of the natural inner product; identically 1 for
    /// nondivergence assemblies.
    pub inner_weight: Array1<f64>,
    pub family: OperatorFamily,
    pub symmetric: bool,
    /// arctan(Lambda/lambda) for elliptic families, 0 for symmetric ones.
    pub sector_angle_hint: f64,
    pub grid: GridSpec,
}

impl AssembledOperator {
    /// Wraps a plain square matrix as an operator with unit inner weight on
    /// the given grid; self-adjointness is detected from the entries.
    pub fn from_matrix(
        matrix: Array2<f64>,
        grid: GridSpec,
        family: OperatorFamily,
    ) -> crate::error::Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() != grid.n_nodes() {
            return Err(crate::error::CoreError::DimensionMismatch(format!(
                "matrix is {}x{}, grid has {} nodes",
                matrix.nrows(),
                matrix.ncols(),
                grid.n_nodes()
            )));
        }
        let inner_weight = Array1::ones(matrix.nrows());
        let symmetric = Self::detect_symmetry(&matrix, &inner_weight);
        Ok(AssembledOperator {
            matrix,
            inner_weight,
            family,
            symmetric,
            sector_angle_hint: 0.0,
            grid,
        })
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, v: &Array1<f64>) -> Array1<f64> {
        self.matrix.dot(v)
    }

    /// Weighted inner product sum_i u_i v_i w_i h^d.
    pub fn weighted_dot(&self, u: &Array1<f64>, v: &Array1<f64>) -> f64 {
        let vol = self.grid.cell_volume();
        u.iter()
            .zip(v.iter())
            .zip(self.inner_weight.iter())
            .map(|((a, b), w)| a * b * w)
            .sum::<f64>()
            * vol
    }

    pub fn weighted_norm(&self, u: &Array1<f64>) -> f64 {
        self.weighted_dot(u, u).sqrt()
    }

    /// Detects self-adjointness in the weighted inner product, i.e. symmetry
    /// of diag(w) M.
    pub(crate) fn detect_symmetry(matrix: &Array2<f64>, w: &Array1<f64>) -> bool {
        let n = matrix.nrows();
        let mut scale: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                scale = scale.max((w[i] * matrix[[i, j]]).abs());
            }
        }
        if scale == 0.0 {
            return true;
        }
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((w[i] * matrix[[i, j]] - w[j] * matrix[[j, i]]).abs());
            }
        }
        worst <= 1e-12 * scale
    }

    /// Coordinate-format export: one "row col value" line per structural
    /// nonzero, 0-based indices, 17 significant digits.
    pub fn export_coo(&self, out: &mut impl Write) -> std::io::Result<()> {
        for ((i, j), v) in self.matrix.indexed_iter() {
            if *v != 0.0 {
                writeln!(out, "{} {} {:.16e}", i, j, v)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;
    use ndarray::array;

    fn toy() -> AssembledOperator {
        AssembledOperator {
            matrix: array![[2.0, -1.0], [-1.0, 2.0]],
            inner_weight: array![1.0, 1.0],
            family: OperatorFamily::WeightedElliptic,
            symmetric: true,
            sector_angle_hint: 0.0,
            grid: GridSpec::line(0.0, 3.0, 2.max(3), Boundary::DirichletEliminated).unwrap(),
        }
    }

    #[test]
    fn export_is_plain_coordinate_text() {
        let op = AssembledOperator {
            matrix: array![[2.0, -1.0], [0.0, 2.0]],
            ..toy()
        };
        let mut buf = Vec::new();
        op.export_coo(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "0 0 2.0000000000000000e0");
        assert_eq!(lines[1], "0 1 -1.0000000000000000e0");
        assert_eq!(lines[2], "1 1 2.0000000000000000e0");
    }

    #[test]
    fn weighted_symmetry_detection() {
        let w = array![2.0, 1.0];
        // M = diag(1/w) S with S symmetric => detect true
        let m = array![[1.0, -0.5], [-1.0, 1.0]];
        assert!(AssembledOperator::detect_symmetry(&m, &w));
        let m2 = array![[1.0, -0.6], [-1.0, 1.0]];
        assert!(!AssembledOperator::detect_symmetry(&m2, &w));
    }
}
