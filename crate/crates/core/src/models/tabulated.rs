use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::operators::{check_alpha, SemilinearModel};
use crate::types::{CostVector, PolicyControl, StructuredPolicy};

use super::{argmin_columns, policy_from_choice, product_policies, Candidate};

/// A finite list of policies given directly by their pairs `(A_mu, q_mu)`.
///
/// The oracle minimizes componentwise across the list, so the effective policy
/// class is the mixing closure: component `i` may follow any listed policy's
/// column `i` independently of the other components.
#[derive(Clone, Debug)]
pub struct TabulatedModel {
    listed: Vec<StructuredPolicy>,
    alpha: f64,
    candidates: Vec<Vec<Candidate>>,
}

impl TabulatedModel {
    pub fn new(pairs: Vec<(DMatrix<f64>, DVector<f64>)>, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if pairs.is_empty() {
            return Err(Error::invalid("policies", "policy list is empty"));
        }
        let n = pairs[0].1.len();
        if n == 0 {
            return Err(Error::invalid("policies[0].q", "dimension must be at least 1"));
        }
        let mut listed = Vec::with_capacity(pairs.len());
        for (k, (a, q)) in pairs.into_iter().enumerate() {
            if q.len() != n {
                return Err(Error::dims(format!("policies[{k}].q"), n, q.len()));
            }
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::dims(format!("policies[{k}].a"), n, if a.nrows() != n { a.nrows() } else { a.ncols() }));
            }
            crate::linalg::check_nonnegative_matrix(&a, &format!("policies[{k}].a"))?;
            crate::linalg::check_nonnegative_vector(&q, &format!("policies[{k}].q"))?;
            listed.push(StructuredPolicy::new(PolicyControl::Selection(vec![k; n]), a, q)?);
        }
        let candidates = (0..n)
            .map(|i| {
                listed
                    .iter()
                    .map(|p| Candidate { column: p.a().column(i).iter().copied().collect(), q: p.q()[i] })
                    .collect()
            })
            .collect();
        Ok(TabulatedModel { listed, alpha, candidates })
    }

    /// The policies as listed (each with a uniform selection).
    pub fn listed(&self) -> &[StructuredPolicy] {
        &self.listed
    }

    /// Composite policy taking column `i` from listed policy `selection[i]`.
    pub fn policy_for(&self, selection: &[usize]) -> Result<StructuredPolicy> {
        policy_from_choice(&self.candidates, selection, PolicyControl::Selection(selection.to_vec()))
    }
}

impl SemilinearModel for TabulatedModel {
    fn dim(&self) -> usize {
        self.candidates.len()
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn family(&self) -> &'static str {
        "tabulated"
    }

    fn bellman(&self, c: &CostVector) -> Result<(CostVector, StructuredPolicy)> {
        let (values, choice) = argmin_columns(&self.candidates, c.as_slice(), self.alpha);
        Ok((CostVector::from_computed(values)?, self.policy_for(&choice)?))
    }

    fn policy_count(&self) -> Option<u128> {
        super::grid_count(&self.candidates)
    }

    fn policies(&self) -> Box<dyn Iterator<Item = StructuredPolicy> + '_> {
        Box::new(product_policies(&self.candidates, PolicyControl::Selection))
    }
}
