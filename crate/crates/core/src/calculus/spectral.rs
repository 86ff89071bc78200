//! Eigendecomposition route: spectrum reports and fractional powers through
//! diagonalization. Self-adjoint operators (in their weighted inner product)
//! go through a symmetric eigensolve after a similarity transform; general
//! operators go through the complex eigensolve with an eigenvector
//! conditioning check.

use crate::error::{CoreError, Result};
use crate::operator::AssembledOperator;
use ndarray::{Array1, Array2};
use ndarray_linalg::{c64, Eig, Eigh, Inverse, OperationNorm, Solve, UPLO};

use super::fracpow::check_sigma_open;

/// Eigenvector-matrix condition number beyond which the decomposition is
/// treated as numerically defective.
const DEFECTIVE_COND: f64 = 1e8;

/// Relative slack below zero tolerated before an eigenvalue counts as
/// genuinely negative.
const NEG_TOL: f64 = 1e-10;

/// Relative magnitude below which an eigenvalue is treated as an exact
/// kernel direction.
const ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    /// Eigenvalues sorted by real part, then imaginary part.
    pub eigenvalues: Vec<c64>,
    pub min_real: f64,
    pub max_real: f64,
    pub max_imag_abs: f64,
    /// 1-norm condition estimate of the eigenvector matrix (1 for
    /// self-adjoint operators).
    pub eigvec_cond: f64,
    pub defective: bool,
}

/// Similarity transform making a weighted-self-adjoint matrix symmetric:
/// B = D^{1/2} M D^{-1/2} with D = diag(inner weight).
fn symmetrized(op: &AssembledOperator) -> Array2<f64> {
    let n = op.n();
    let sqrt_w: Vec<f64> = op.inner_weight.iter().map(|w| w.sqrt()).collect();
    let mut b = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            b[[i, j]] = sqrt_w[i] * op.matrix[[i, j]] / sqrt_w[j];
        }
    }
    // enforce exact symmetry against roundoff
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (b[[i, j]] + b[[j, i]]);
            b[[i, j]] = m;
            b[[j, i]] = m;
        }
    }
    b
}

pub fn spectrum(op: &AssembledOperator) -> Result<SpectrumReport> {
    if op.symmetric {
        let (vals, _) = symmetrized(op).eigh(UPLO::Upper)?;
        let mut eigenvalues: Vec<c64> = vals.iter().map(|&l| c64::new(l, 0.0)).collect();
        eigenvalues.sort_by(|a, b| a.re.total_cmp(&b.re));
        let min_real = eigenvalues.first().map_or(0.0, |z| z.re);
        let max_real = eigenvalues.last().map_or(0.0, |z| z.re);
        return Ok(SpectrumReport {
            eigenvalues,
            min_real,
            max_real,
            max_imag_abs: 0.0,
            eigvec_cond: 1.0,
            defective: false,
        });
    }
    let (vals, vecs) = op.matrix.eig()?;
    let cond = match vecs.inv() {
        Ok(inv) => vecs.opnorm_one()? * inv.opnorm_one()?,
        Err(_) => f64::INFINITY,
    };
    let mut eigenvalues: Vec<c64> = vals.to_vec();
    eigenvalues.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let min_real = eigenvalues.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    let max_real = eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let max_imag_abs = eigenvalues.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    Ok(SpectrumReport {
        eigenvalues,
        min_real,
        max_real,
        max_imag_abs,
        eigvec_cond: cond,
        defective: !cond.is_finite() || cond > DEFECTIVE_COND,
    })
}

/// Clamps a real eigenvalue for the power map: tiny values become exact
/// kernel directions, genuinely negative ones are an error.
fn clamp_real(l: f64, scale: f64) -> Result<f64> {
    if l < -NEG_TOL * scale {
        return Err(CoreError::SpectrumOutOfSector(format!(
            "negative eigenvalue {l}"
        )));
    }
    Ok(if l.abs() <= ZERO_TOL * scale { 0.0 } else { l.max(0.0) })
}

/// T^s v by diagonalization.
pub fn frac_power_apply_spectral(
    op: &AssembledOperator,
    sigma: f64,
    v: &Array1<f64>,
) -> Result<Array1<f64>> {
    check_sigma_open(sigma)?;
    if v.len() != op.n() {
        return Err(CoreError::DimensionMismatch(format!(
            "vector has {} entries, operator has {}",
            v.len(),
            op.n()
        )));
    }
    if op.symmetric {
        let b = symmetrized(op);
        let (vals, q) = b.eigh(UPLO::Upper)?;
        let scale = vals.iter().fold(0.0f64, |m, l| m.max(l.abs()));
        let mut powered = Array1::zeros(vals.len());
        for (i, &l) in vals.iter().enumerate() {
            let lc = clamp_real(l, scale.max(1e-300))?;
            powered[i] = if lc == 0.0 { 0.0 } else { lc.powf(sigma) };
        }
        let sqrt_w = op.inner_weight.mapv(f64::sqrt);
        let y = q.t().dot(&(&sqrt_w * v));
        let z = q.dot(&(&powered * &y));
        return Ok(&z / &sqrt_w);
    }
    let (vals, vecs) = op.matrix.eig()?;
    let cond = match vecs.inv() {
        Ok(inv) => vecs.opnorm_one()? * inv.opnorm_one()?,
        Err(_) => f64::INFINITY,
    };
    if !cond.is_finite() || cond > DEFECTIVE_COND {
        return Err(CoreError::Defective(format!(
            "eigenvector condition estimate {cond:.3e}"
        )));
    }
    let scale = vals.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(1e-300);
    let vc: Array1<c64> = v.iter().map(|&x| c64::new(x, 0.0)).collect();
    let c = vecs.solve(&vc)?;
    let mut scaled = Array1::<c64>::zeros(c.len());
    for i in 0..c.len() {
        let z = vals[i];
        if z.re < -NEG_TOL * scale && z.im.abs() <= NEG_TOL * scale {
            return Err(CoreError::SpectrumOutOfSector(format!(
                "eigenvalue {z} lies on the negative real axis"
            )));
        }
        let p = if z.norm() <= ZERO_TOL * scale {
            c64::new(0.0, 0.0)
        } else {
            z.powf(sigma)
        };
        scaled[i] = p * c[i];
    }
    let y = vecs.dot(&scaled);
    let imag = y.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
    let real_norm = y.iter().map(|z| z.re * z.re).sum::<f64>().sqrt();
    if imag > 1e-8 * real_norm.max(1e-300) {
        return Err(CoreError::Backend(format!(
            "complex residue {imag:.3e} in a real fractional power"
        )));
    }
    Ok(y.mapv(|z| z.re))
}

/// One-time spectral factorization of a weighted-self-adjoint operator for
/// repeated fractional-power applications: the eigensolve runs once and each
/// `apply` costs two dense matrix-vector products.
#[derive(Debug, Clone)]
pub struct SpectralPowerAction {
    sqrt_w: Array1<f64>,
    q: Array2<f64>,
    powered: Array1<f64>,
}

impl SpectralPowerAction {
    pub fn new(op: &AssembledOperator, sigma: f64) -> Result<Self> {
        check_sigma_open(sigma)?;
        if !op.symmetric {
            return Err(CoreError::NotApplicable(
                "precomputed power actions need a weighted-self-adjoint operator".into(),
            ));
        }
        let b = symmetrized(op);
        let (vals, q) = b.eigh(UPLO::Upper)?;
        let scale = vals.iter().fold(0.0f64, |m, l| m.max(l.abs())).max(1e-300);
        let mut powered = Array1::zeros(vals.len());
        for (i, &l) in vals.iter().enumerate() {
            let lc = clamp_real(l, scale)?;
            powered[i] = if lc == 0.0 { 0.0 } else { lc.powf(sigma) };
        }
        Ok(SpectralPowerAction {
            sqrt_w: op.inner_weight.mapv(f64::sqrt),
            q,
            powered,
        })
    }

    pub fn n(&self) -> usize {
        self.powered.len()
    }

    /// T^s v through the stored factorization.
    pub fn apply(&self, v: &Array1<f64>) -> Result<Array1<f64>> {
        if v.len() != self.n() {
            return Err(CoreError::DimensionMismatch(format!(
                "vector has {} entries, operator has {}",
                v.len(),
                self.n()
            )));
        }
        let y = self.q.t().dot(&(&self.sqrt_w * v));
        let z = self.q.dot(&(&self.powered * &y));
        Ok(&z / &self.sqrt_w)
    }
}

/// Full matrix T^s by diagonalization.
pub fn frac_power_matrix_spectral(op: &AssembledOperator, sigma: f64) -> Result<Array2<f64>> {
    check_sigma_open(sigma)?;
    let n = op.n();
    if op.symmetric {
        let b = symmetrized(op);
        let (vals, q) = b.eigh(UPLO::Upper)?;
        let scale = vals.iter().fold(0.0f64, |m, l| m.max(l.abs())).max(1e-300);
        let mut powered = Array1::zeros(n);
        for (i, &l) in vals.iter().enumerate() {
            let lc = clamp_real(l, scale)?;
            powered[i] = if lc == 0.0 { 0.0 } else { lc.powf(sigma) };
        }
        let core = q.dot(&Array2::from_diag(&powered)).dot(&q.t());
        let sqrt_w = op.inner_weight.mapv(f64::sqrt);
        let mut out = core;
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] *= sqrt_w[j] / sqrt_w[i];
            }
        }
        return Ok(out);
    }
    let mut out = Array2::zeros((n, n));
    for j in 0..n {
        let mut e: Array1<f64> = Array1::zeros(n);
        e[j] = 1.0;
        let col = frac_power_apply_spectral(op, sigma, &e)?;
        out.column_mut(j).assign(&col);
    }
    Ok(out)
}
