//! The parameter-space Bellman operators `G_mu` and `G`, policy evaluation and
//! stability certification.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::types::{component_value, CostVector, StructuredPolicy};

/// Relative residual accepted after the policy-evaluation linear solve.
pub const EVAL_RESIDUAL_TOL: f64 = 1e-9;

/// A positive semilinear problem, seen through its Bellman oracle.
///
/// `bellman(c)` returns `(c_hat, mu)` where `c_hat' x = min_u [g(x,u) + alpha c' f(x,u)]`
/// and `mu` attains the minimum. Implementations must return `c_hat >= 0` for
/// `c >= 0`, satisfy `apply_g_mu(mu, c, alpha) == c_hat`, and be monotone in `c`.
pub trait SemilinearModel: Send + Sync {
    fn dim(&self) -> usize;

    fn alpha(&self) -> f64;

    fn bellman(&self, c: &CostVector) -> Result<(CostVector, StructuredPolicy)>;

    fn family(&self) -> &'static str {
        "custom"
    }

    /// Size of the (componentwise closure of the) policy class, when finite and known.
    fn policy_count(&self) -> Option<u128> {
        None
    }

    /// Enumerates the policy class when it is finite. Empty for continuous families.
    fn policies(&self) -> Box<dyn Iterator<Item = StructuredPolicy> + '_> {
        Box::new(std::iter::empty())
    }
}

impl<M: SemilinearModel + ?Sized> SemilinearModel for &M {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn alpha(&self) -> f64 {
        (**self).alpha()
    }
    fn bellman(&self, c: &CostVector) -> Result<(CostVector, StructuredPolicy)> {
        (**self).bellman(c)
    }
    fn family(&self) -> &'static str {
        (**self).family()
    }
    fn policy_count(&self) -> Option<u128> {
        (**self).policy_count()
    }
    fn policies(&self) -> Box<dyn Iterator<Item = StructuredPolicy> + '_> {
        (**self).policies()
    }
}

impl<M: SemilinearModel + ?Sized> SemilinearModel for Box<M> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn alpha(&self) -> f64 {
        (**self).alpha()
    }
    fn bellman(&self, c: &CostVector) -> Result<(CostVector, StructuredPolicy)> {
        (**self).bellman(c)
    }
    fn family(&self) -> &'static str {
        (**self).family()
    }
    fn policy_count(&self) -> Option<u128> {
        (**self).policy_count()
    }
    fn policies(&self) -> Box<dyn Iterator<Item = StructuredPolicy> + '_> {
        (**self).policies()
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid("alpha", format!("{alpha} is outside (0, 1]")));
    }
    Ok(())
}

/// `G_mu(c) = q_mu + alpha * A_mu' c`.
pub fn apply_g_mu(policy: &StructuredPolicy, c: &CostVector, alpha: f64) -> Result<CostVector> {
    let n = policy.dim();
    if c.len() != n {
        return Err(Error::dims("apply_g_mu", n, c.len()));
    }
    Ok(CostVector::from_computed(g_mu_raw(policy.a(), policy.q(), c.as_slice(), alpha))?)
}

pub(crate) fn g_mu_raw(a: &DMatrix<f64>, q: &DVector<f64>, c: &[f64], alpha: f64) -> DVector<f64> {
    DVector::from_iterator(
        q.len(),
        (0..q.len()).map(|i| component_value(q[i], a.column(i).as_slice(), c, alpha)),
    )
}

/// `G(c)` and a policy attaining it.
pub fn apply_g<M: SemilinearModel + ?Sized>(model: &M, c: &CostVector) -> Result<(CostVector, StructuredPolicy)> {
    if c.len() != model.dim() {
        return Err(Error::dims("apply_g", model.dim(), c.len()));
    }
    model.bellman(c)
}

/// `||c - G(c)||_inf`
pub fn bellman_residual<M: SemilinearModel + ?Sized>(model: &M, c: &CostVector) -> Result<f64> {
    let (g, _) = apply_g(model, c)?;
    Ok(c.max_abs_diff(&g))
}

/// Perron root of `alpha * A` and whether it is below `1 - STABILITY_MARGIN`.
pub fn certify_stability(a: &DMatrix<f64>, alpha: f64) -> Result<(bool, f64)> {
    linalg::certify_stability(a, alpha)
}

/// Cost parameter of a stable policy: `c' = q' (I - alpha A)^{-1}`,
/// i.e. `(I - alpha A') c = q`.
pub fn evaluate_policy(policy: &StructuredPolicy, alpha: f64) -> Result<CostVector> {
    let (stable, rho) = certify_stability(policy.a(), alpha)?;
    if !stable {
        return Err(Error::Unstable { rho });
    }
    let n = policy.dim();
    let m = DMatrix::identity(n, n) - policy.a().transpose() * alpha;
    let c = linalg::lu_solve(&m, policy.q())
        .ok_or_else(|| Error::TheoryViolation(format!("I - alpha A' is singular although rho = {rho}")))?;

    let scale = linalg::norm_inf(&c).max(1.0);
    if let Some((i, v)) = c.iter().enumerate().find(|(_, v)| **v < -crate::types::ROUNDOFF_CLAMP * scale) {
        return Err(Error::TheoryViolation(format!(
            "policy evaluation produced negative cost c[{i}] = {v}; the model data are inconsistent"
        )));
    }
    let c = CostVector::from_computed(c)?;
    let back = apply_g_mu(policy, &c, alpha)?;
    let res = c.max_abs_diff(&back);
    if res > EVAL_RESIDUAL_TOL * scale {
        return Err(Error::TheoryViolation(format!(
            "policy evaluation residual {res:e} exceeds {EVAL_RESIDUAL_TOL:e} (relative)"
        )));
    }
    Ok(c)
}
