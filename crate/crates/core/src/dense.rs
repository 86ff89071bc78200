//! Dense linear-algebra support: matrix exponential, norm estimates, and
//! extreme-eigenvalue estimates shared by the quadrature and scan routines.

use crate::error::{CoreError, Result};
use ndarray::{Array1, Array2};
use ndarray_linalg::{Factorize, OperationNorm, Solve};

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const PADE9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.539398330063230e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068;
const THETA13: f64 = 5.371920351148152;

fn eye(n: usize) -> Array2<f64> {
    Array2::eye(n)
}

/// Solves (V - U) X = (V + U) with a single factorization.
fn pade_solve(u: Array2<f64>, v: Array2<f64>) -> Result<Array2<f64>> {
    let n = u.nrows();
    let lhs = &v - &u;
    let rhs = &v + &u;
    let lu = lhs.factorize()?;
    let mut out = Array2::zeros((n, n));
    for j in 0..n {
        let col = lu.solve(&rhs.column(j).to_owned())?;
        out.column_mut(j).assign(&col);
    }
    Ok(out)
}

/// Matrix exponential by Pade approximation with scaling and squaring,
/// selecting the cheapest order whose accuracy bound covers the 1-norm.
pub fn expm(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(CoreError::DimensionMismatch(format!(
            "expm needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    for v in a.iter() {
        if !v.is_finite() {
            return Err(CoreError::InvalidArgument(
                "expm input has non-finite entries".into(),
            ));
        }
    }
    if n == 0 {
        return Ok(Array2::zeros((0, 0)));
    }
    let d1 = a.opnorm_one()?;
    let a2 = a.dot(a);
    if d1 <= THETA3 {
        let u = a.dot(&(&a2 * PADE3[3] + &(eye(n) * PADE3[1])));
        let v = &a2 * PADE3[2] + &(eye(n) * PADE3[0]);
        return pade_solve(u, v);
    }
    let a4 = a2.dot(&a2);
    if d1 <= THETA5 {
        let u = a.dot(&(&a4 * PADE5[5] + &(&a2 * PADE5[3]) + &(eye(n) * PADE5[1])));
        let v = &a4 * PADE5[4] + &(&a2 * PADE5[2]) + &(eye(n) * PADE5[0]);
        return pade_solve(u, v);
    }
    let a6 = a2.dot(&a4);
    if d1 <= THETA7 {
        let u = a.dot(
            &(&a6 * PADE7[7] + &(&a4 * PADE7[5]) + &(&a2 * PADE7[3]) + &(eye(n) * PADE7[1])),
        );
        let v = &a6 * PADE7[6] + &(&a4 * PADE7[4]) + &(&a2 * PADE7[2]) + &(eye(n) * PADE7[0]);
        return pade_solve(u, v);
    }
    if d1 <= THETA9 {
        let a8 = a4.dot(&a4);
        let u = a.dot(
            &(&a8 * PADE9[9]
                + &(&a6 * PADE9[7])
                + &(&a4 * PADE9[5])
                + &(&a2 * PADE9[3])
                + &(eye(n) * PADE9[1])),
        );
        let v = &a8 * PADE9[8]
            + &(&a6 * PADE9[6])
            + &(&a4 * PADE9[4])
            + &(&a2 * PADE9[2])
            + &(eye(n) * PADE9[0]);
        return pade_solve(u, v);
    }
    // order 13 with scaling and repeated squaring
    let s = ((d1 / THETA13).log2().ceil()).max(0.0) as u32;
    let scale = 0.5_f64.powi(s as i32);
    let asc = a * scale;
    let a2 = asc.dot(&asc);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);
    let w1 = &a6 * PADE13[13] + &(&a4 * PADE13[11]) + &(&a2 * PADE13[9]);
    let w = a6.dot(&w1)
        + &(&a6 * PADE13[7])
        + &(&a4 * PADE13[5])
        + &(&a2 * PADE13[3])
        + &(eye(n) * PADE13[1]);
    let u = asc.dot(&w);
    let z1 = &a6 * PADE13[12] + &(&a4 * PADE13[10]) + &(&a2 * PADE13[8]);
    let v = a6.dot(&z1)
        + &(&a6 * PADE13[6])
        + &(&a4 * PADE13[4])
        + &(&a2 * PADE13[2])
        + &(eye(n) * PADE13[0]);
    let mut r = pade_solve(u, v)?;
    for _ in 0..s {
        r = r.dot(&r);
    }
    Ok(r)
}

/// Deterministic starting vector for the power iterations.
fn seed_vector(n: usize) -> Array1<f64> {
    let mut x: Array1<f64> = (0..n)
        .map(|i| 1.0 + 0.37 * ((i as f64 + 1.0) * 0.7391).sin())
        .collect();
    let nrm = x.dot(&x).sqrt();
    x.mapv_inplace(|v| v / nrm);
    x
}

/// Spectral-norm estimate by power iteration on A^T A.
pub fn matrix_2norm_est(a: &Array2<f64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    let mut x = seed_vector(a.ncols());
    let mut est = 0.0;
    for _ in 0..200 {
        let y = a.dot(&x);
        let new_est = y.dot(&y).sqrt();
        let mut z = a.t().dot(&y);
        let zn = z.dot(&z).sqrt();
        if zn == 0.0 {
            return new_est;
        }
        z.mapv_inplace(|v| v / zn);
        x = z;
        if (new_est - est).abs() <= 1e-12 * new_est.max(1e-300) {
            return new_est;
        }
        est = new_est;
    }
    est
}

/// Smallest eigenvalue magnitude estimate by inverse power iteration with a
/// single factorization. Returns 0 for exactly singular matrices.
pub fn min_eigen_abs_est(a: &Array2<f64>) -> Result<f64> {
    let n = a.nrows();
    if a.ncols() != n || n == 0 {
        return Err(CoreError::DimensionMismatch(
            "eigenvalue estimate needs a nonempty square matrix".into(),
        ));
    }
    let lu = match a.factorize() {
        Ok(lu) => lu,
        // an exact zero pivot means an exactly singular matrix
        Err(_) => return Ok(0.0),
    };
    let mut x = seed_vector(n);
    let mut mu = 0.0;
    for _ in 0..200 {
        let y = match lu.solve(&x) {
            Ok(y) => y,
            Err(_) => return Ok(0.0),
        };
        let yn = y.dot(&y).sqrt();
        if !yn.is_finite() {
            return Ok(0.0);
        }
        if yn == 0.0 {
            break;
        }
        let new_mu = 1.0 / yn; // |lambda|_min estimate since x is unit
        x = y / yn;
        if (new_mu - mu).abs() <= 1e-10 * new_mu.max(1e-300) {
            return Ok(new_mu);
        }
        mu = new_mu;
    }
    Ok(mu)
}
