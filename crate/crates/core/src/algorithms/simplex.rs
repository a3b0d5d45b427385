//! Dense tableau simplex for `max c'x s.t. A x <= b, x >= 0` with `b >= 0`.
//!
//! The slack basis is feasible, so no phase one is needed. Pivoting follows
//! Bland's rule, which rules out cycling.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-11;

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64, pivots: usize },
    Unbounded,
    PivotLimit,
}

pub fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64], max_pivots: usize) -> Result<LpOutcome> {
    let n = c.len();
    let m = a.len();
    if b.len() != m {
        return Err(Error::dims("simplex right-hand side", m, b.len()));
    }
    for (i, row) in a.iter().enumerate() {
        if row.len() != n {
            return Err(Error::dims(format!("simplex row {i}"), n, row.len()));
        }
        if !(b[i] >= 0.0) {
            return Err(Error::invalid(format!("b[{i}]"), "right-hand side must be >= 0"));
        }
    }

    let width = n + m;
    let mut t = vec![vec![0.0; width + 1]; m];
    for i in 0..m {
        t[i][..n].copy_from_slice(&a[i]);
        t[i][n + i] = 1.0;
        t[i][width] = b[i];
    }
    let mut z = vec![0.0; width + 1];
    for j in 0..n {
        z[j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let mut pivots = 0;
    loop {
        let Some(enter) = (0..width).find(|&j| z[j] < -PIVOT_EPS) else {
            break;
        };
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if t[i][enter] > PIVOT_EPS {
                let ratio = t[i][width] / t[i][enter];
                let better = match leave {
                    None => true,
                    Some(l) => ratio < best - PIVOT_EPS * best.abs().max(1.0)
                        || (ratio <= best + PIVOT_EPS * best.abs().max(1.0) && basis[i] < basis[l]),
                };
                if better {
                    best = best.min(ratio);
                    leave = Some(i);
                }
            }
        }
        let Some(r) = leave else {
            return Ok(LpOutcome::Unbounded);
        };
        if pivots >= max_pivots {
            return Ok(LpOutcome::PivotLimit);
        }
        pivot(&mut t, &mut z, r, enter);
        basis[r] = enter;
        pivots += 1;
    }

    let x = resolve_basis(a, b, &basis, n).unwrap_or_else(|| {
        let mut x = vec![0.0; n];
        for (i, &bv) in basis.iter().enumerate() {
            if bv < n {
                x[bv] = t[i][width];
            }
        }
        x
    });
    let objective = x.iter().zip(c).map(|(xi, ci)| xi * ci).sum();
    Ok(LpOutcome::Optimal { x, objective, pivots })
}

fn pivot(t: &mut [Vec<f64>], z: &mut [f64], r: usize, s: usize) {
    let p = t[r][s];
    for v in t[r].iter_mut() {
        *v /= p;
    }
    let row = t[r].clone();
    for (i, ti) in t.iter_mut().enumerate() {
        if i != r && ti[s] != 0.0 {
            let f = ti[s];
            for (v, rv) in ti.iter_mut().zip(&row) {
                *v -= f * rv;
            }
            ti[s] = 0.0;
        }
    }
    let f = z[s];
    if f != 0.0 {
        for (v, rv) in z.iter_mut().zip(&row) {
            *v -= f * rv;
        }
        z[s] = 0.0;
    }
}

/// Recomputes the basic solution from the original data to shed tableau roundoff.
fn resolve_basis(a: &[Vec<f64>], b: &[f64], basis: &[usize], n: usize) -> Option<Vec<f64>> {
    let m = a.len();
    let bm = DMatrix::from_fn(m, m, |i, k| {
        let j = basis[k];
        if j < n {
            a[i][j]
        } else if j - n == i {
            1.0
        } else {
            0.0
        }
    });
    let sol = bm.lu().solve(&DVector::from_column_slice(b))?;
    let mut x = vec![0.0; n];
    for (k, &j) in basis.iter().enumerate() {
        if j < n {
            x[j] = sol[k];
        }
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}
