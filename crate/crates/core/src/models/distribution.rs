use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::check_probability_vector;
use crate::operators::SemilinearModel;
use crate::types::{CostVector, PolicyControl, StructuredPolicy};

use super::{argmin_columns, policy_from_choice, product_policies, Candidate};

/// A control for one component of the distribution: where its mass goes and what it costs per unit.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionControl {
    pub label: Option<String>,
    pub p: DVector<f64>,
    pub g: f64,
}

impl DistributionControl {
    pub fn new(p: DVector<f64>, g: f64) -> Self {
        DistributionControl { label: None, p, g }
    }
}

/// Finite MDP whose state is the probability distribution over its n underlying states.
#[derive(Clone, Debug)]
pub struct DistributionMdpModel {
    components: Vec<Vec<DistributionControl>>,
    alpha: f64,
    candidates: Vec<Vec<Candidate>>,
}

impl DistributionMdpModel {
    pub fn new(components: Vec<Vec<DistributionControl>>, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid("alpha", format!("{alpha} is outside (0, 1)")));
        }
        let n = components.len();
        if n == 0 {
            return Err(Error::invalid("components", "at least one state is required"));
        }
        let mut candidates = Vec::with_capacity(n);
        for (i, grid) in components.iter().enumerate() {
            if grid.is_empty() {
                return Err(Error::invalid(format!("components[{i}]"), "control grid is empty"));
            }
            let mut cands = Vec::with_capacity(grid.len());
            for (k, u) in grid.iter().enumerate() {
                let field = format!("components[{i}].controls[{k}]");
                if u.p.len() != n {
                    return Err(Error::dims(format!("{field}.p"), n, u.p.len()));
                }
                check_probability_vector(u.p.as_slice(), &format!("{field}.p"))?;
                if !u.g.is_finite() || u.g < 0.0 {
                    return Err(Error::invalid(format!("{field}.g"), format!("{} must be finite and >= 0", u.g)));
                }
                cands.push(Candidate { column: u.p.iter().copied().collect(), q: u.g });
            }
            candidates.push(cands);
        }
        Ok(DistributionMdpModel { components, alpha, candidates })
    }

    pub fn components(&self) -> &[Vec<DistributionControl>] {
        &self.components
    }

    pub fn policy_for(&self, choice: &[usize]) -> Result<StructuredPolicy> {
        policy_from_choice(&self.candidates, choice, PolicyControl::Grid(choice.to_vec()))
    }
}

impl SemilinearModel for DistributionMdpModel {
    fn dim(&self) -> usize {
        self.components.len()
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn family(&self) -> &'static str {
        "distribution_mdp"
    }

    fn bellman(&self, c: &CostVector) -> Result<(CostVector, StructuredPolicy)> {
        let (values, choice) = argmin_columns(&self.candidates, c.as_slice(), self.alpha);
        Ok((CostVector::from_computed(values)?, self.policy_for(&choice)?))
    }

    fn policy_count(&self) -> Option<u128> {
        super::grid_count(&self.candidates)
    }

    fn policies(&self) -> Box<dyn Iterator<Item = StructuredPolicy> + '_> {
        Box::new(product_policies(&self.candidates, PolicyControl::Grid))
    }
}
