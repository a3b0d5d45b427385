use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{check_finite_matrix, check_finite_vector, check_nonnegative_matrix, check_nonnegative_vector};
use crate::operators::{check_alpha, g_mu_raw, SemilinearModel};
use crate::types::{component_value, CostVector, PolicyControl, StructuredPolicy, ROUNDOFF_CLAMP};

/// Largest input dimension for which [`SemilinearModel::policies`] enumerates sign patterns.
pub const MAX_ENUMERATED_INPUTS: usize = 20;

/// Positive linear system `x' = A x + B u`, stage cost `q'x + r'u`, constraint `|u| <= H x`.
#[derive(Clone, Debug)]
pub struct PositiveLinearModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    q: DVector<f64>,
    r: DVector<f64>,
    h: DMatrix<f64>,
    alpha: f64,
}

impl PositiveLinearModel {
    /// Validates that every admissible control keeps the state and the stage cost nonnegative.
    ///
    /// The worst case over the `2^m` vertex gains `L = -diag(s) H` is attained entrywise
    /// by `A - |B| H` and `q - H'|r|`, so those two are checked instead of enumerating.
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, q: DVector<f64>, r: DVector<f64>, h: DMatrix<f64>, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let n = q.len();
        let m = r.len();
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::dims("a", n, if a.nrows() != n { a.nrows() } else { a.ncols() }));
        }
        if b.nrows() != n || b.ncols() != m {
            return Err(Error::dims("b", if b.nrows() != n { n } else { m }, if b.nrows() != n { b.nrows() } else { b.ncols() }));
        }
        if h.nrows() != m || h.ncols() != n {
            return Err(Error::dims("h", if h.nrows() != m { m } else { n }, if h.nrows() != m { h.nrows() } else { h.ncols() }));
        }
        check_finite_matrix(&a, "a")?;
        check_finite_matrix(&b, "b")?;
        check_finite_vector(&r, "r")?;
        check_nonnegative_vector(&q, "q")?;
        check_nonnegative_matrix(&h, "h")?;

        let worst_a = &a - b.abs() * &h;
        let scale = a.iter().chain(b.iter()).fold(1.0_f64, |s, v| s.max(v.abs()));
        for i in 0..n {
            for j in 0..n {
                if worst_a[(i, j)] < -ROUNDOFF_CLAMP * scale {
                    return Err(Error::invalid(
                        format!("a[{i}][{j}]"),
                        format!("closed loop can reach A + BL = {} < 0 for some |L| <= H; the model leaves the nonnegative orthant", worst_a[(i, j)]),
                    ));
                }
            }
        }
        let worst_q = &q - h.transpose() * r.abs();
        let scale = q.iter().chain(r.iter()).fold(1.0_f64, |s, v| s.max(v.abs()));
        for i in 0..n {
            if worst_q[i] < -ROUNDOFF_CLAMP * scale {
                return Err(Error::invalid(
                    format!("q[{i}]"),
                    format!("stage cost q + L'r can reach {} < 0 for some |L| <= H", worst_q[i]),
                ));
            }
        }
        Ok(PositiveLinearModel { a, b, q, r, h, alpha })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn q(&self) -> &DVector<f64> {
        &self.q
    }
    pub fn r(&self) -> &DVector<f64> {
        &self.r
    }
    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }
    pub fn inputs(&self) -> usize {
        self.r.len()
    }

    /// Vertex gain with row `j` equal to `-s_j h_j'`; `signs[j] == true` means `s_j = +1`.
    pub fn gain_from_signs(&self, signs: &[bool]) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.r.len(), self.q.len());
        for (j, &s) in signs.iter().enumerate() {
            let f = if s { -1.0 } else { 1.0 };
            for k in 0..self.q.len() {
                l[(j, k)] = f * self.h[(j, k)];
            }
        }
        l
    }

    /// Closed-loop pair of the linear policy `u = L x`; requires `|L| <= H`.
    pub fn policy_for_gain(&self, l: DMatrix<f64>) -> Result<StructuredPolicy> {
        let (m, n) = (self.r.len(), self.q.len());
        if l.nrows() != m || l.ncols() != n {
            return Err(Error::dims("gain L", m * n, l.nrows() * l.ncols()));
        }
        for j in 0..m {
            for k in 0..n {
                let h = self.h[(j, k)];
                if !l[(j, k)].is_finite() || l[(j, k)].abs() > h + ROUNDOFF_CLAMP * h.max(1.0) {
                    return Err(Error::invalid(format!("gain[{j}][{k}]"), format!("|{}| exceeds H = {h}", l[(j, k)])));
                }
            }
        }
        let a = &self.a + &self.b * &l;
        let q = &self.q + l.transpose() * &self.r;
        StructuredPolicy::new(PolicyControl::Gain(l), a, q)
    }

    /// `r_j + alpha b_j' c` for every input `j`.
    pub fn switching_values(&self, c: &CostVector) -> DVector<f64> {
        DVector::from_iterator(
            self.r.len(),
            (0..self.r.len()).map(|j| component_value(self.r[j], self.b.column(j).as_slice(), c.as_slice(), self.alpha)),
        )
    }

    /// Greedy vertex signs at `c` (sign of zero is +1).
    pub fn greedy_signs(&self, c: &CostVector) -> Vec<bool> {
        self.switching_values(c).iter().map(|&s| s >= 0.0).collect()
    }
}

impl SemilinearModel for PositiveLinearModel {
    fn dim(&self) -> usize {
        self.q.len()
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn family(&self) -> &'static str {
        "positive_linear"
    }

    fn bellman(&self, c: &CostVector) -> Result<(CostVector, StructuredPolicy)> {
        let signs = self.greedy_signs(c);
        let policy = self.policy_for_gain(self.gain_from_signs(&signs))?;
        let c_hat = g_mu_raw(policy.a(), policy.q(), c.as_slice(), self.alpha);
        Ok((CostVector::from_computed(c_hat)?, policy))
    }

    fn policy_count(&self) -> Option<u128> {
        if self.r.len() <= MAX_ENUMERATED_INPUTS {
            Some(1u128 << self.r.len())
        } else {
            None
        }
    }

    /// All `2^m` vertex policies, or nothing when `m > MAX_ENUMERATED_INPUTS`.
    fn policies(&self) -> Box<dyn Iterator<Item = StructuredPolicy> + '_> {
        let m = self.r.len();
        if m > MAX_ENUMERATED_INPUTS {
            return Box::new(std::iter::empty());
        }
        Box::new((0u64..(1u64 << m)).filter_map(move |bits| {
            let signs: Vec<bool> = (0..m).map(|j| bits >> j & 1 == 0).collect();
            self.policy_for_gain(self.gain_from_signs(&signs)).ok()
        }))
    }
}
