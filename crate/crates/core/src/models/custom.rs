use crate::error::{Error, Result};
use crate::operators::{check_alpha, SemilinearModel};
use crate::types::{CostVector, StructuredPolicy};

/// A model backed by a user-supplied minimizer, e.g. for continuous control sets.
///
/// The callback must honor the oracle contract: nonnegative output, monotone in
/// `c`, and a returned policy whose `G_mu(c)` equals the output.
pub struct FnModel<F> {
    n: usize,
    alpha: f64,
    oracle: F,
}

impl<F> FnModel<F>
where
    F: Fn(&CostVector) -> Result<(CostVector, StructuredPolicy)> + Send + Sync,
{
    pub fn new(n: usize, alpha: f64, oracle: F) -> Result<Self> {
        check_alpha(alpha)?;
        if n == 0 {
            return Err(Error::invalid("n", "dimension must be at least 1"));
        }
        Ok(FnModel { n, alpha, oracle })
    }
}

impl<F> SemilinearModel for FnModel<F>
where
    F: Fn(&CostVector) -> Result<(CostVector, StructuredPolicy)> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.n
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn bellman(&self, c: &CostVector) -> Result<(CostVector, StructuredPolicy)> {
        let (c_hat, mu) = (self.oracle)(c)?;
        if c_hat.len() != self.n || mu.dim() != self.n {
            return Err(Error::ModelInfeasible(format!(
                "custom oracle returned dimension {} / {} for n = {}",
                c_hat.len(),
                mu.dim(),
                self.n
            )));
        }
        Ok((c_hat, mu))
    }
}
