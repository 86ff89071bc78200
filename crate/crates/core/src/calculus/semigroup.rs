//! Semigroup evaluation: single applications of e^{-tM} and bulk sampling of
//! t -> e^{-tM} v on grids uniform in ln t.
//!
//! Samples split at t* = 1/(2 ||M||_1). Below t*, e^{-tM} v is summed from
//! its power series (cheap, cancellation-free at that scale). At and above
//! t*, one matrix exponential per sub-octave offset is squared repeatedly,
//! so a ladder of K octaves costs one exponential plus K multiplications.

use crate::dense::expm;
use crate::error::{CoreError, Result};
use crate::operator::AssembledOperator;
use ndarray::{Array1, Array2};
use ndarray_linalg::OperationNorm;
use std::f64::consts::LN_2;

/// Number of power-series terms kept below the switch time; the truncation
/// error at t ||M|| <= 1/2 is below 1e-16 relative.
const SERIES_TERMS: usize = 15;

/// Squaring cap: semigroups that have not stabilized 64 octaves above the
/// switch time are treated as non-decaying.
const MAX_OCTAVES: usize = 64;

/// Relative stagnation threshold declaring the semigroup flat at the top.
const FLAT_TOL: f64 = 1e-13;

/// e^{-tM} v for a single time.
pub fn semigroup_apply(op: &AssembledOperator, t: f64, v: &Array1<f64>) -> Result<Array1<f64>> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(CoreError::InvalidArgument(format!(
            "semigroup time {t} must be finite and nonnegative"
        )));
    }
    if v.len() != op.n() {
        return Err(CoreError::DimensionMismatch(format!(
            "vector has {} entries, operator has {}",
            v.len(),
            op.n()
        )));
    }
    let e = expm(&(&op.matrix * (-t)))?;
    Ok(e.dot(v))
}

/// Samples of e^{-tM} v on a geometric time grid with `density` nodes per
/// octave, extending from `t_lo` up to where the semigroup has stabilized.
#[derive(Debug, Clone)]
pub struct SemigroupSamples {
    /// ln-spacing between consecutive nodes.
    pub log_step: f64,
    /// Node times, ascending, uniform in ln t.
    pub t: Vec<f64>,
    /// e^{-tM} v at each node.
    pub u: Vec<Array1<f64>>,
    /// The sampled vector.
    pub v: Array1<f64>,
    /// M^k v for k = 0..3, for series tail corrections below the grid.
    pub taylor: Vec<Array1<f64>>,
    /// Nodes per octave.
    pub density: usize,
    /// Octaves of squaring above the switch time.
    pub octaves: usize,
}

impl SemigroupSamples {
    /// Time of the highest node.
    pub fn t_top(&self) -> f64 {
        *self.t.last().expect("samples are never empty")
    }

    /// Stabilized top value e^{-t_max M} v.
    pub fn u_top(&self) -> &Array1<f64> {
        self.u.last().expect("samples are never empty")
    }

    pub fn build(
        op: &AssembledOperator,
        v: &Array1<f64>,
        t_lo: f64,
        density: usize,
    ) -> Result<Self> {
        let n = op.n();
        if v.len() != n {
            return Err(CoreError::DimensionMismatch(format!(
                "vector has {} entries, operator has {n}",
                v.len()
            )));
        }
        if density == 0 {
            return Err(CoreError::InvalidArgument(
                "need at least one node per octave".into(),
            ));
        }
        let norm1 = op.matrix.opnorm_one()?;
        if norm1 == 0.0 {
            return Err(CoreError::InvalidArgument(
                "the zero operator has a constant semigroup; no sampling needed".into(),
            ));
        }
        if !(t_lo > 0.0 && t_lo.is_finite()) {
            return Err(CoreError::InvalidArgument(format!(
                "lowest sample time {t_lo} must be positive and finite"
            )));
        }
        let t_switch = 0.5 / norm1;
        let h = LN_2 / density as f64;
        let n_down = if t_lo < t_switch {
            ((t_switch / t_lo).ln() / h).ceil() as usize
        } else {
            0
        };

        // power series vectors M^j v
        let mut taylor_full: Vec<Array1<f64>> = Vec::with_capacity(SERIES_TERMS);
        taylor_full.push(v.clone());
        for j in 1..SERIES_TERMS {
            let next = op.matrix.dot(&taylor_full[j - 1]);
            taylor_full.push(next);
        }

        // probe ladder at offset 0 decides how many octaves are needed
        let vnorm = norm2(v);
        let base0 = expm(&(&op.matrix * (-t_switch)))?;
        let mut ladder0 = vec![base0.dot(v)];
        let mut e = base0;
        let mut flats = 0;
        let mut octaves = 0;
        while flats < 2 {
            if octaves >= MAX_OCTAVES {
                return Err(CoreError::QuadratureNonconvergence(
                    "semigroup never stabilized; the spectrum must lie in the right half-plane"
                        .into(),
                ));
            }
            e = e.dot(&e);
            let u = e.dot(v);
            if !u.iter().all(|x| x.is_finite()) {
                return Err(CoreError::QuadratureNonconvergence(
                    "semigroup grows without bound; the spectrum must lie in the right half-plane"
                        .into(),
                ));
            }
            let prev = ladder0.last().expect("ladder has a base entry");
            let diff = norm2(&(&u - prev));
            // repeated squaring can resolve the plateau no better than its
            // own compounded roundoff, which doubles per octave; operators
            // with a kernel ride an exactly-unit eigenvalue and would drift
            // past any fixed tolerance
            let drift = (2.0f64).powi(octaves as i32 + 1) * (n as f64) * f64::EPSILON;
            if diff <= (FLAT_TOL + drift) * (norm2(&u) + vnorm) {
                flats += 1;
            } else {
                flats = 0;
            }
            ladder0.push(u);
            octaves += 1;
        }

        // remaining ladders at sub-octave offsets 2^{m/density}
        let mut ladders: Vec<Vec<Array1<f64>>> = vec![ladder0];
        for m in 1..density {
            let frac = m as f64 / density as f64;
            let base = expm(&(&op.matrix * (-t_switch * 2.0f64.powf(frac))))?;
            let mut lad = vec![base.dot(v)];
            let mut e: Array2<f64> = base;
            for _ in 0..octaves {
                e = e.dot(&e);
                lad.push(e.dot(v));
            }
            ladders.push(lad);
        }

        let total = n_down + density * (octaves + 1);
        let mut t = Vec::with_capacity(total);
        let mut u = Vec::with_capacity(total);
        // series region: global indices -n_down..-1
        for g in -(n_down as i64)..0 {
            let tg = t_switch * (g as f64 * h).exp();
            let mut acc = Array1::zeros(n);
            let mut coef = 1.0;
            for (j, w) in taylor_full.iter().enumerate() {
                if j > 0 {
                    coef *= -tg / j as f64;
                }
                acc = acc + &(w * coef);
            }
            t.push(tg);
            u.push(acc);
        }
        // ladder region: global index g = k * density + m
        for k in 0..=octaves {
            for m in 0..density {
                let tg = t_switch * ((k * density + m) as f64 * h).exp();
                t.push(tg);
                u.push(ladders[m][k].clone());
            }
        }
        Ok(SemigroupSamples {
            log_step: h,
            t,
            u,
            v: v.clone(),
            taylor: taylor_full.into_iter().take(4).collect(),
            density,
            octaves,
        })
    }
}

fn norm2(x: &Array1<f64>) -> f64 {
    x.dot(x).sqrt()
}
