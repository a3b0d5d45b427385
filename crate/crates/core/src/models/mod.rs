//! Built-in semilinear model families with closed-form Bellman oracles.

mod bilinear;
mod custom;
mod distribution;
mod positive_linear;
mod tabulated;

pub use bilinear::{control_term, BilinearControl, BilinearModel};
pub use custom::FnModel;
pub use distribution::{DistributionControl, DistributionMdpModel};
pub use positive_linear::{PositiveLinearModel, MAX_ENUMERATED_INPUTS};
pub use tabulated::TabulatedModel;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::operators::SemilinearModel;
use crate::types::{component_value, CostVector, PolicyControl, StructuredPolicy};

/// A candidate column of `A_mu` together with the matching entry of `q_mu`.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Candidate {
    pub column: Vec<f64>,
    pub q: f64,
}

/// Componentwise minimization over per-component candidate lists; ties go to
/// the lowest index.
pub(crate) fn argmin_columns(candidates: &[Vec<Candidate>], c: &[f64], alpha: f64) -> (DVector<f64>, Vec<usize>) {
    let n = candidates.len();
    let mut values = DVector::zeros(n);
    let mut choice = vec![0usize; n];
    for (i, cands) in candidates.iter().enumerate() {
        let mut best = f64::INFINITY;
        for (k, cand) in cands.iter().enumerate() {
            let v = component_value(cand.q, &cand.column, c, alpha);
            if v < best {
                best = v;
                choice[i] = k;
            }
        }
        values[i] = best;
    }
    (values, choice)
}

pub(crate) fn policy_from_choice(
    candidates: &[Vec<Candidate>],
    choice: &[usize],
    control: PolicyControl,
) -> Result<StructuredPolicy> {
    let n = candidates.len();
    if choice.len() != n {
        return Err(Error::dims("control choice", n, choice.len()));
    }
    let mut a = DMatrix::zeros(n, n);
    let mut q = DVector::zeros(n);
    for (i, (&k, cands)) in choice.iter().zip(candidates).enumerate() {
        let cand = cands
            .get(k)
            .ok_or_else(|| Error::invalid(format!("control[{i}]"), format!("index {k} out of range ({} options)", cands.len())))?;
        a.column_mut(i).copy_from_slice(&cand.column);
        q[i] = cand.q;
    }
    StructuredPolicy::new(control, a, q)
}

pub(crate) fn grid_count(candidates: &[Vec<Candidate>]) -> Option<u128> {
    candidates
        .iter()
        .try_fold(1u128, |acc, c| acc.checked_mul(c.len() as u128))
}

/// Odometer over the product of per-component grids.
pub(crate) fn product_policies<'a>(
    candidates: &'a [Vec<Candidate>],
    wrap: fn(Vec<usize>) -> PolicyControl,
) -> impl Iterator<Item = StructuredPolicy> + 'a {
    let n = candidates.len();
    let mut next: Option<Vec<usize>> = if candidates.iter().all(|c| !c.is_empty()) {
        Some(vec![0; n])
    } else {
        None
    };
    std::iter::from_fn(move || {
        let current = next.take()?;
        let mut succ = current.clone();
        let mut carried = true;
        for i in 0..n {
            succ[i] += 1;
            if succ[i] < candidates[i].len() {
                carried = false;
                break;
            }
            succ[i] = 0;
        }
        if !carried {
            next = Some(succ);
        }
        policy_from_choice(candidates, &current, wrap(current.clone())).ok()
    })
}

/// Any built-in deterministic family.
#[derive(Clone, Debug)]
pub enum Model {
    Bilinear(BilinearModel),
    PositiveLinear(PositiveLinearModel),
    DistributionMdp(DistributionMdpModel),
    Tabulated(TabulatedModel),
}

impl Model {
    fn inner(&self) -> &dyn SemilinearModel {
        match self {
            Model::Bilinear(m) => m,
            Model::PositiveLinear(m) => m,
            Model::DistributionMdp(m) => m,
            Model::Tabulated(m) => m,
        }
    }
}

impl SemilinearModel for Model {
    fn dim(&self) -> usize {
        self.inner().dim()
    }
    fn alpha(&self) -> f64 {
        self.inner().alpha()
    }
    fn bellman(&self, c: &CostVector) -> Result<(CostVector, StructuredPolicy)> {
        self.inner().bellman(c)
    }
    fn family(&self) -> &'static str {
        self.inner().family()
    }
    fn policy_count(&self) -> Option<u128> {
        self.inner().policy_count()
    }
    fn policies(&self) -> Box<dyn Iterator<Item = StructuredPolicy> + '_> {
        self.inner().policies()
    }
}

impl From<BilinearModel> for Model {
    fn from(m: BilinearModel) -> Self {
        Model::Bilinear(m)
    }
}

impl From<PositiveLinearModel> for Model {
    fn from(m: PositiveLinearModel) -> Self {
        Model::PositiveLinear(m)
    }
}

impl From<DistributionMdpModel> for Model {
    fn from(m: DistributionMdpModel) -> Self {
        Model::DistributionMdp(m)
    }
}

impl From<TabulatedModel> for Model {
    fn from(m: TabulatedModel) -> Self {
        Model::Tabulated(m)
    }
}
