//! Small dense linear-algebra helpers: Perron root estimation for nonnegative
//! matrices and the LU-backed solve used by policy evaluation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance on successive Perron root estimates.
pub const POWER_REL_TOL: f64 = 1e-12;
/// Power iteration budget per unit of dimension (total `10 * n * 100`).
pub const POWER_BUDGET_PER_DIM: usize = 1000;
/// Gap required between the Perron root and 1 before stability is certified.
pub const STABILITY_MARGIN: f64 = 1e-10;

const STEADY_STEPS: usize = 5;

/// Outcome of a Perron root computation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerronEstimate {
    pub rho: f64,
    /// Collatz–Wielandt bracket at the final iterate; `lower <= rho <= upper` in exact arithmetic.
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn norm_inf(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn max_abs_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn check_nonnegative_matrix(m: &DMatrix<f64>, field: &str) -> Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if !v.is_finite() {
                return Err(Error::invalid(format!("{field}[{i}][{j}]"), format!("{v} is not finite")));
            }
            if v < 0.0 {
                return Err(Error::invalid(format!("{field}[{i}][{j}]"), format!("{v} is negative")));
            }
        }
    }
    Ok(())
}

pub fn check_nonnegative_vector(v: &DVector<f64>, field: &str) -> Result<()> {
    for (i, &x) in v.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::invalid(format!("{field}[{i}]"), format!("{x} is not finite")));
        }
        if x < 0.0 {
            return Err(Error::invalid(format!("{field}[{i}]"), format!("{x} is negative")));
        }
    }
    Ok(())
}

pub fn check_finite_matrix(m: &DMatrix<f64>, field: &str) -> Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if !m[(i, j)].is_finite() {
                return Err(Error::invalid(format!("{field}[{i}][{j}]"), "entry is not finite"));
            }
        }
    }
    Ok(())
}

pub fn check_finite_vector(v: &DVector<f64>, field: &str) -> Result<()> {
    for (i, x) in v.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::invalid(format!("{field}[{i}]"), "entry is not finite"));
        }
    }
    Ok(())
}

/// Probability vector check: entries nonnegative, sum within `1e-12` of one.
pub fn check_probability_vector(v: &[f64], field: &str) -> Result<()> {
    for (i, &p) in v.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::invalid(format!("{field}[{i}]"), format!("{p} is not a probability")));
        }
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(field, format!("entries sum to {sum}, expected 1")));
    }
    Ok(())
}

/// Dominant eigenvalue of a nonnegative square matrix.
///
/// Runs a few unshifted products first: with a strictly positive start vector,
/// `M^k 1 = 0` happens exactly when `M` is nilpotent, and then the root is 0.
/// Otherwise iterates on `M + sI` (which has the same Perron vector and is
/// aperiodic), tracking the Collatz–Wielandt bracket `min (Mx)_i/x_i <= rho <= max (Mx)_i/x_i`.
pub fn perron_root(m: &DMatrix<f64>) -> PerronEstimate {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "perron_root needs a square matrix");
    if n == 0 {
        return PerronEstimate { rho: 0.0, lower: 0.0, upper: 0.0, iterations: 0, converged: true };
    }

    let mut probe = DVector::from_element(n, 1.0);
    for k in 0..n {
        probe = m * &probe;
        if probe.iter().all(|&v| v == 0.0) {
            return PerronEstimate { rho: 0.0, lower: 0.0, upper: 0.0, iterations: k + 1, converged: true };
        }
    }

    let row_max = (0..n)
        .map(|i| m.row(i).iter().sum::<f64>())
        .fold(0.0_f64, f64::max);
    let shift = 0.5 * row_max;
    let budget = POWER_BUDGET_PER_DIM * n;

    let mut x = DVector::from_element(n, 1.0);
    let mut est_prev = f64::NAN;
    let mut steady = 0usize;
    let mut lower = 0.0;
    let mut upper = f64::INFINITY;
    let mut est = row_max;

    for it in 1..=budget {
        let y = m * &x;
        let z = &y + &x * shift;
        let zmax = z.iter().fold(0.0_f64, |a, &b| a.max(b));
        // x has unit max-norm, so ||z|| / ||x|| - s estimates the root.
        est = (zmax - shift).max(0.0);

        if x.iter().all(|&v| v > f64::MIN_POSITIVE) {
            lower = f64::INFINITY;
            upper = 0.0;
            for i in 0..n {
                let r = y[i] / x[i];
                lower = lower.min(r);
                upper = upper.max(r);
            }
        }

        let scale = est.max(f64::EPSILON * shift);
        let gap_closed = upper.is_finite() && upper - lower <= POWER_REL_TOL * upper.max(f64::MIN_POSITIVE);
        if (est - est_prev).abs() <= POWER_REL_TOL * scale {
            steady += 1;
        } else {
            steady = 0;
        }
        if gap_closed || steady >= STEADY_STEPS {
            let rho = if upper.is_finite() { est.clamp(lower, upper) } else { est };
            return PerronEstimate { rho, lower, upper, iterations: it, converged: true };
        }
        est_prev = est;
        x = z / zmax;
    }

    PerronEstimate { rho: est, lower, upper, iterations: budget, converged: false }
}

/// Stability verdict for `alpha * A`: `(is_stable, rho)`.
///
/// If the power iteration does not settle within its budget, the verdict is
/// still returned when the Collatz–Wielandt bracket decides it on one side of
/// 1; otherwise the result is an indeterminate-stability error.
pub fn certify_stability(a: &DMatrix<f64>, alpha: f64) -> Result<(bool, f64)> {
    if a.nrows() != a.ncols() {
        return Err(Error::dims("certify_stability (square matrix)", a.nrows(), a.ncols()));
    }
    check_nonnegative_matrix(a, "A")?;
    let scaled = a * alpha;
    let est = perron_root(&scaled);
    if est.converged {
        return Ok((est.rho < 1.0 - STABILITY_MARGIN, est.rho));
    }
    if est.upper < 1.0 - STABILITY_MARGIN {
        return Ok((true, est.rho.min(est.upper)));
    }
    if est.lower >= 1.0 {
        return Ok((false, est.rho.max(est.lower)));
    }
    Err(Error::IndeterminateStability {
        iterations: est.iterations,
        lower: est.lower,
        upper: est.upper,
    })
}

/// Dense LU solve with partial pivoting; `None` when the matrix is singular.
pub fn lu_solve(m: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    m.clone().lu().solve(b)
}
