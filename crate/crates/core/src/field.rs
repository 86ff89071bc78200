use crate::error::{CoreError, Result};
use crate::grid::GridSpec;
use ndarray::Array1;

/// Strictly positive scalar weight sampled at grid nodes.
#[derive(Debug, Clone)]
pub struct WeightField {
    pub values: Array1<f64>,
}

impl WeightField {
    pub fn from_values(values: Array1<f64>) -> Result<Self> {
        for (i, v) in values.iter().enumerate() {
            if !(v.is_finite() && *v > 0.0) {
                return Err(CoreError::NonpositiveWeight(format!(
                    "node {i} has weight {v}"
                )));
            }
        }
        Ok(WeightField { values })
    }

    pub fn from_fn(grid: &GridSpec, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let vals = (0..grid.n_nodes())
            .map(|i| {
                let c = grid.coord(i);
                f(&c[..grid.dim])
            })
            .collect::<Array1<f64>>();
        Self::from_values(vals)
    }

    pub fn unit(grid: &GridSpec) -> Self {
        WeightField {
            values: Array1::ones(grid.n_nodes()),
        }
    }

    /// |x|^p + eps, the standard degenerate test weight.
    pub fn abs_pow(grid: &GridSpec, p: f64, eps: f64) -> Result<Self> {
        Self::from_fn(grid, |x| {
            let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
            r.powf(p) + eps
        })
    }

    /// e^{x_1} clipped to [1/cap, cap].
    pub fn exp_clipped(grid: &GridSpec, cap: f64) -> Result<Self> {
        Self::from_fn(grid, |x| x[0].exp().clamp(1.0 / cap, cap))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoeffKind {
    /// Full (possibly non-symmetric) matrix A(x) for divergence-form assembly.
    MatrixA,
    /// Diagonal entries a_j(x) of a degenerate operator -div(diag(a_j^2) grad).
    DiagonalA,
    /// Full matrix a^{jk}(x) contracted against second differences.
    NondivA,
}

/// Coefficient field sampled at grid nodes. Matrix entries are stored as
/// 2x2 blocks per node; one-dimensional grids use the (0,0) entry.
#[derive(Debug, Clone)]
pub struct CoeffField {
    pub kind: CoeffKind,
    pub matrices: Vec<[[f64; 2]; 2]>,
    pub diagonals: Vec<[f64; 2]>,
    pub lambda: f64,
    pub big_lambda: f64,
    /// Optional homogeneity orders of the diagonal entries' isolated zeroes,
    /// carried as metadata for degenerate-field diagnostics.
    pub homogeneity_orders: Option<Vec<f64>>,
}

/// 2x2 symmetric-part eigen bounds: returns (min, max) eigenvalue of (A+A^T)/2
/// and the spectral norm of A.
fn matrix_bounds(a: &[[f64; 2]; 2], dim: usize) -> (f64, f64, f64) {
    if dim == 1 {
        let v = a[0][0];
        return (v, v, v.abs());
    }
    let s01 = 0.5 * (a[0][1] + a[1][0]);
    let tr = a[0][0] + a[1][1];
    let det_s = a[0][0] * a[1][1] - s01 * s01;
    let disc = (0.25 * tr * tr - det_s).max(0.0).sqrt();
    let smin = 0.5 * tr - disc;
    let smax = 0.5 * tr + disc;
    // ||A||_2 via A^T A (2x2 closed form)
    let g00 = a[0][0] * a[0][0] + a[1][0] * a[1][0];
    let g01 = a[0][0] * a[0][1] + a[1][0] * a[1][1];
    let g11 = a[0][1] * a[0][1] + a[1][1] * a[1][1];
    let trg = g00 + g11;
    let detg = g00 * g11 - g01 * g01;
    let dg = (0.25 * trg * trg - detg).max(0.0).sqrt();
    let norm = (0.5 * trg + dg).max(0.0).sqrt();
    (smin, smax, norm)
}

impl CoeffField {
    /// Full-matrix field with declared ellipticity bounds. Validates
    /// A xi . xi >= lambda |xi|^2 and |A xi . eta| <= Lambda |xi||eta| nodewise.
    pub fn matrix(
        grid: &GridSpec,
        kind: CoeffKind,
        f: impl Fn(&[f64]) -> [[f64; 2]; 2],
        lambda: f64,
        big_lambda: f64,
    ) -> Result<Self> {
        if kind == CoeffKind::DiagonalA {
            return Err(CoreError::InvalidCoefficient(
                "matrix constructor cannot build a diagonal field".into(),
            ));
        }
        if !(lambda > 0.0 && big_lambda >= lambda) {
            return Err(CoreError::InvalidCoefficient(format!(
                "need 0 < lambda <= Lambda, got ({lambda}, {big_lambda})"
            )));
        }
        let mut matrices = Vec::with_capacity(grid.n_nodes());
        let slack = 1e-10 * big_lambda.max(1.0);
        for i in 0..grid.n_nodes() {
            let c = grid.coord(i);
            let a = f(&c[..grid.dim]);
            for row in &a {
                for v in row {
                    if !v.is_finite() {
                        return Err(CoreError::InvalidCoefficient(format!(
                            "non-finite entry at node {i}"
                        )));
                    }
                }
            }
            let (smin, _smax, norm) = matrix_bounds(&a, grid.dim);
            if smin < lambda - slack {
                return Err(CoreError::InvalidCoefficient(format!(
                    "node {i}: symmetric part eigenvalue {smin} below lambda = {lambda}"
                )));
            }
            if norm > big_lambda + slack {
                return Err(CoreError::InvalidCoefficient(format!(
                    "node {i}: operator norm {norm} above Lambda = {big_lambda}"
                )));
            }
            matrices.push(a);
        }
        Ok(CoeffField {
            kind,
            matrices,
            diagonals: Vec::new(),
            lambda,
            big_lambda,
            homogeneity_orders: None,
        })
    }

    pub fn constant_matrix(
        grid: &GridSpec,
        kind: CoeffKind,
        a: [[f64; 2]; 2],
        lambda: f64,
        big_lambda: f64,
    ) -> Result<Self> {
        Self::matrix(grid, kind, |_| a, lambda, big_lambda)
    }

    pub fn identity(grid: &GridSpec) -> Self {
        Self::constant_matrix(grid, CoeffKind::MatrixA, [[1.0, 0.0], [0.0, 1.0]], 1.0, 1.0)
            .expect("identity field is always valid")
    }

    /// Diagonal degenerate field; entries may vanish. The declared bounds
    /// describe the envelope of a_j^2 and are not enforced pointwise.
    pub fn diagonal(grid: &GridSpec, f: impl Fn(&[f64]) -> [f64; 2]) -> Result<Self> {
        let mut diagonals = Vec::with_capacity(grid.n_nodes());
        let mut amax: f64 = 0.0;
        for i in 0..grid.n_nodes() {
            let c = grid.coord(i);
            let d = f(&c[..grid.dim]);
            for v in &d[..grid.dim] {
                if !v.is_finite() || *v < 0.0 {
                    return Err(CoreError::InvalidCoefficient(format!(
                        "diagonal entry {v} at node {i} must be finite and nonnegative"
                    )));
                }
            }
            amax = amax.max(d[0].abs()).max(if grid.dim > 1 { d[1].abs() } else { 0.0 });
            diagonals.push(d);
        }
        Ok(CoeffField {
            kind: CoeffKind::DiagonalA,
            matrices: Vec::new(),
            diagonals,
            lambda: 0.0,
            big_lambda: amax * amax,
            homogeneity_orders: None,
        })
    }

    /// Grushin-type field (1, |x_1|^k).
    pub fn grushin(grid: &GridSpec, k: f64) -> Result<Self> {
        let mut f = Self::diagonal(grid, |x| [1.0, x[0].abs().powf(k)])?;
        f.homogeneity_orders = Some(vec![0.0, k]);
        Ok(f)
    }

    pub fn at(&self, node: usize) -> [[f64; 2]; 2] {
        match self.kind {
            CoeffKind::DiagonalA => {
                let d = self.diagonals[node];
                [[d[0], 0.0], [0.0, d[1]]]
            }
            _ => self.matrices[node],
        }
    }

    pub fn diag_at(&self, node: usize) -> [f64; 2] {
        self.diagonals[node]
    }

    pub fn n_nodes(&self) -> usize {
        match self.kind {
            CoeffKind::DiagonalA => self.diagonals.len(),
            _ => self.matrices.len(),
        }
    }
}
