//! Sector check for the bilinear form of an assembled operator: bounds the
//! ratio of the skew part against the symmetric part, which controls the
//! half-angle of the form's numerical range.

use crate::error::{CoreError, Result};
use crate::operator::AssembledOperator;
use ndarray::{Array1, Array2};
use ndarray_linalg::{Factorize, Solve};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FormReport {
    /// Extremal ratio K = sup |skew(u,v)| / sqrt(sym(u,u) sym(v,v)).
    pub k_bound: f64,
    /// Largest ratio seen over the random sample pairs (a lower bound).
    pub k_sampled: f64,
    /// Half-angle arctan(K) of the form's numerical range.
    pub angle: f64,
    pub symmetric: bool,
    pub pairs_checked: usize,
}

/// Checks the sector condition of the form u, v -> u^T diag(w) M v * h^d:
/// random pairs probe the skew/symmetric ratio, and a power iteration on the
/// symmetric-whitened skew part certifies the extremal value.
pub fn dirichlet_form_check(
    op: &AssembledOperator,
    pairs: usize,
    seed: u64,
) -> Result<FormReport> {
    let n = op.n();
    let vol = op.grid.cell_volume();
    let mut wm = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            wm[[i, j]] = op.inner_weight[i] * op.matrix[[i, j]] * vol;
        }
    }
    let sym = 0.5 * (&wm + &wm.t());
    let skew = 0.5 * (&wm - &wm.t());
    let sym_scale = sym.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let skew_scale = skew.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if sym_scale == 0.0 {
        return Err(CoreError::InvalidArgument(
            "form is identically zero".into(),
        ));
    }
    if skew_scale <= 1e-13 * sym_scale {
        return Ok(FormReport {
            k_bound: 0.0,
            k_sampled: 0.0,
            angle: 0.0,
            symmetric: true,
            pairs_checked: 0,
        });
    }

    // random probe pairs
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let mut k_sampled: f64 = 0.0;
    for _ in 0..pairs {
        let a: Array1<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        let b: Array1<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        let qa = a.dot(&sym.dot(&a));
        let qb = b.dot(&sym.dot(&b));
        if qa <= 0.0 || qb <= 0.0 {
            return Err(CoreError::SpectrumOutOfSector(
                "symmetric part of the form is not positive definite".into(),
            ));
        }
        let s = a.dot(&skew.dot(&b)).abs();
        k_sampled = k_sampled.max(s / (qa * qb).sqrt());
    }

    // extremizer: K^2 is the top eigenvalue of S^{-1} A^T S^{-1} A
    let lu = sym
        .factorize()
        .map_err(|e| CoreError::SingularSystem(format!("symmetric part: {e}")))?;
    let mut x: Array1<f64> = (0..n)
        .map(|i| 1.0 + 0.31 * ((i as f64) * 1.11).sin())
        .collect();
    let nx = x.dot(&x).sqrt();
    x.mapv_inplace(|v| v / nx);
    let mut k2 = 0.0;
    for _ in 0..300 {
        let y = lu
            .solve(&skew.dot(&x))
            .map_err(|e| CoreError::SingularSystem(format!("whitening solve: {e}")))?;
        let z = lu
            .solve(&skew.t().dot(&y))
            .map_err(|e| CoreError::SingularSystem(format!("whitening solve: {e}")))?;
        // Rayleigh quotient in the S-metric
        let num = x.dot(&skew.t().dot(&y));
        let new_k2 = num.max(0.0);
        let nz = z.dot(&sym.dot(&z)).sqrt();
        if nz == 0.0 {
            break;
        }
        let z = z / nz;
        x = z;
        if (new_k2 - k2).abs() <= 1e-12 * new_k2.max(1e-300) {
            k2 = new_k2;
            break;
        }
        k2 = new_k2;
    }
    let k_bound = k2.sqrt().max(k_sampled);
    Ok(FormReport {
        k_bound,
        k_sampled,
        angle: k_bound.atan(),
        symmetric: false,
        pairs_checked: pairs,
    })
}
