//! Problems with i.i.d. multiplicative parameters drawn from a finite set:
//! certainty-equivalent reduction and Monte Carlo validation.

use nalgebra::{DMatrix, DVector};
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::algorithms::{solve, SolverConfig};
use crate::error::{Error, Result};
use crate::linalg::check_probability_vector;
use crate::models::{Model, PositiveLinearModel, TabulatedModel};
use crate::operators::{check_alpha, evaluate_policy};
use crate::types::{Engine, PolicyControl, SolveReport, StructuredPolicy};

/// Identifier of the random number generator recorded with rollout statistics.
pub const RNG_ALGORITHM: &str = "chacha8-stream";

/// Relative size of the neglected tail targeted by [`rollout_horizon`].
pub const HORIZON_TAIL_REL: f64 = 1e-6;

const MAX_HORIZON: usize = 10_000_000;

/// Data of the positive linear family under one parameter value.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaPositiveLinear {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DVector<f64>,
    pub r: DVector<f64>,
}

#[derive(Clone, Debug)]
pub enum StochasticData {
    /// `x' = A^t x + B^t u`, cost `q_t'x + r_t'u`, shared constraint `|u| <= H x`.
    PositiveLinear { h: DMatrix<f64>, per_theta: Vec<ThetaPositiveLinear> },
    /// `per_theta[t][k]` is the pair `(A, q)` of listed policy `k` under parameter `t`.
    Tabulated { per_theta: Vec<Vec<(DMatrix<f64>, DVector<f64>)>> },
}

#[derive(Clone, Debug)]
pub struct StochasticModel {
    labels: Vec<String>,
    probs: Vec<f64>,
    data: StochasticData,
    alpha: f64,
    /// Per-parameter deterministic models, kept for validation and realized dynamics.
    realized: Vec<Model>,
}

impl StochasticModel {
    pub fn new(labels: Vec<String>, probs: Vec<f64>, data: StochasticData, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if probs.is_empty() {
            return Err(Error::invalid("theta_probs", "at least one parameter value is required"));
        }
        if labels.len() != probs.len() {
            return Err(Error::dims("theta_values", probs.len(), labels.len()));
        }
        check_probability_vector(&probs, "theta_probs")?;
        let realized: Vec<Model> = match &data {
            StochasticData::PositiveLinear { h, per_theta } => {
                if per_theta.len() != probs.len() {
                    return Err(Error::dims("per_theta", probs.len(), per_theta.len()));
                }
                per_theta
                    .iter()
                    .enumerate()
                    .map(|(t, d)| {
                        PositiveLinearModel::new(d.a.clone(), d.b.clone(), d.q.clone(), d.r.clone(), h.clone(), alpha)
                            .map(Model::from)
                            .map_err(|e| e.in_field(&format!("per_theta[{t}]")))
                    })
                    .collect::<Result<_>>()?
            }
            StochasticData::Tabulated { per_theta } => {
                if per_theta.len() != probs.len() {
                    return Err(Error::dims("per_theta", probs.len(), per_theta.len()));
                }
                let k = per_theta[0].len();
                per_theta
                    .iter()
                    .enumerate()
                    .map(|(t, list)| {
                        if list.len() != k {
                            return Err(Error::dims(format!("per_theta[{t}].policies"), k, list.len()));
                        }
                        TabulatedModel::new(list.clone(), alpha)
                            .map(Model::from)
                            .map_err(|e| e.in_field(&format!("per_theta[{t}]")))
                    })
                    .collect::<Result<_>>()?
            }
        };
        let n = crate::operators::SemilinearModel::dim(&realized[0]);
        if let Some(t) = realized.iter().position(|m| crate::operators::SemilinearModel::dim(m) != n) {
            return Err(Error::dims(format!("per_theta[{t}]"), n, crate::operators::SemilinearModel::dim(&realized[t])));
        }
        Ok(StochasticModel { labels, probs, data, alpha, realized })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn data(&self) -> &StochasticData {
        &self.data
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        crate::operators::SemilinearModel::dim(&self.realized[0])
    }

    /// Closed-loop pair `(A_mu^t, q_mu^t)` realized under parameter `t` by a policy's control.
    pub fn realized_policy(&self, control: &PolicyControl, t: usize) -> Result<StructuredPolicy> {
        match (&self.realized[t], control) {
            (Model::PositiveLinear(m), PolicyControl::Gain(l)) => m.policy_for_gain(l.clone()),
            (Model::Tabulated(m), PolicyControl::Selection(sel)) => m.policy_for(sel),
            _ => Err(Error::invalid("policy.control", "control does not match the model family")),
        }
    }
}

fn expectation<T>(probs: &[f64], items: &[T], get: impl Fn(&T) -> DMatrix<f64>) -> DMatrix<f64> {
    let first = get(&items[0]);
    let mut acc = DMatrix::zeros(first.nrows(), first.ncols());
    for (p, it) in probs.iter().zip(items) {
        acc += get(it) * *p;
    }
    acc
}

fn expectation_vec<T>(probs: &[f64], items: &[T], get: impl Fn(&T) -> DVector<f64>) -> DVector<f64> {
    let mut acc = DVector::zeros(get(&items[0]).len());
    for (p, it) in probs.iter().zip(items) {
        acc += get(it) * *p;
    }
    acc
}

/// The deterministic model obtained by replacing every random datum with its expectation.
pub fn certainty_equivalent(model: &StochasticModel) -> Result<Model> {
    let probs = &model.probs;
    match &model.data {
        StochasticData::PositiveLinear { h, per_theta } => {
            if per_theta.len() == 1 {
                return Ok(model.realized[0].clone());
            }
            let a = expectation(probs, per_theta, |d| d.a.clone());
            let b = expectation(probs, per_theta, |d| d.b.clone());
            let q = expectation_vec(probs, per_theta, |d| d.q.clone());
            let r = expectation_vec(probs, per_theta, |d| d.r.clone());
            Ok(PositiveLinearModel::new(a, b, q, r, h.clone(), model.alpha)?.into())
        }
        StochasticData::Tabulated { per_theta } => {
            if per_theta.len() == 1 {
                return Ok(model.realized[0].clone());
            }
            let k = per_theta[0].len();
            let pairs = (0..k)
                .map(|j| {
                    let a = expectation(probs, per_theta, |list| list[j].0.clone());
                    let q = expectation_vec(probs, per_theta, |list| list[j].1.clone());
                    (a, q)
                })
                .collect();
            Ok(TabulatedModel::new(pairs, model.alpha)?.into())
        }
    }
}

/// Solves the certainty-equivalent model; its `c*` and policy are optimal for the stochastic problem.
pub fn solve_stochastic(model: &StochasticModel, engine: Engine, config: &SolverConfig) -> Result<SolveReport> {
    let ce = certainty_equivalent(model)?;
    solve(&ce, engine, config)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutStats {
    pub mean_cost: f64,
    pub std_error: f64,
    pub num_paths: usize,
    pub horizon: usize,
    pub seed: u64,
    pub rng: &'static str,
}

/// Compensated sum in index order.
pub(crate) fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Sample mean and standard error of the mean.
pub(crate) fn summarize(costs: &[f64], horizon: usize, seed: u64) -> RolloutStats {
    let n = costs.len();
    let first = costs.first().copied().unwrap_or(0.0);
    let (mean_cost, std_error) = if costs.iter().all(|c| *c == first) {
        (first, 0.0)
    } else {
        let mean = kahan_sum(costs.iter().copied()) / n as f64;
        let ss = kahan_sum(costs.iter().map(|c| (c - mean) * (c - mean)));
        let var = if n > 1 { ss / (n - 1) as f64 } else { 0.0 };
        (mean, (var / n as f64).sqrt())
    };
    RolloutStats { mean_cost, std_error, num_paths: n, horizon, seed, rng: RNG_ALGORITHM }
}

/// Generator of path `path`: ChaCha8 keyed by `seed`, stream number `path`.
pub(crate) fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

pub(crate) fn check_state(x0: &DVector<f64>, n: usize) -> Result<()> {
    if x0.len() != n {
        return Err(Error::dims("x0", n, x0.len()));
    }
    crate::linalg::check_nonnegative_vector(x0, "x0")
}

/// Simulates `x_{k+1} = A_mu^{t_k} x_k` with `t_k` i.i.d., accumulating
/// `sum_k alpha^k (q_mu^{t_k})' x_k` over `horizon` stages, for `num_paths` paths.
pub fn monte_carlo_rollout(
    model: &StochasticModel,
    control: &PolicyControl,
    x0: &DVector<f64>,
    horizon: usize,
    num_paths: usize,
    seed: u64,
) -> Result<RolloutStats> {
    if num_paths == 0 {
        return Err(Error::Config("num_paths must be >= 1".into()));
    }
    let costs = rollout_path_costs(model, control, x0, horizon, num_paths, seed)?;
    Ok(summarize(&costs, horizon, seed))
}

/// Horizon `N` such that the expected tail `c_mu' (alpha A_mu)^N x0` of a stable
/// policy is at most [`HORIZON_TAIL_REL`] times its total cost `c_mu' x0`.
///
/// Under i.i.d. parameters `E[x_N] = A_mu^N x0` with `A_mu` the expected matrix,
/// so the tail is tracked by iterating the expected dynamics.
pub fn rollout_horizon(expected: &StructuredPolicy, alpha: f64, x0: &DVector<f64>) -> Result<usize> {
    let c = evaluate_policy(expected, alpha)?;
    tail_horizon(expected.a(), c.as_vector(), alpha, x0, HORIZON_TAIL_REL)
}

pub(crate) fn tail_horizon(a: &DMatrix<f64>, c: &DVector<f64>, alpha: f64, x0: &DVector<f64>, rel: f64) -> Result<usize> {
    check_state(x0, a.nrows())?;
    let total = c.dot(x0);
    if total <= 0.0 {
        return Ok(1);
    }
    let mut x = x0.clone();
    for n in 0..MAX_HORIZON {
        if c.dot(&x) <= rel * total {
            return Ok(n.max(1));
        }
        x = a * &x * alpha;
    }
    Err(Error::Refused(format!("tail does not fall below {rel:e} within {MAX_HORIZON} stages")))
}

/// Expected pair of a policy control under the parameter distribution.
pub fn expected_policy(model: &StochasticModel, control: &PolicyControl) -> Result<StructuredPolicy> {
    let realized: Vec<StructuredPolicy> =
        (0..model.probs.len()).map(|t| model.realized_policy(control, t)).collect::<Result<_>>()?;
    let a = expectation(&model.probs, &realized, |p| p.a().clone());
    let q = expectation_vec(&model.probs, &realized, |p| p.q().clone());
    StructuredPolicy::new(control.clone(), a, q)
}

/// Costs of every path, for statistics files.
pub fn rollout_path_costs(
    model: &StochasticModel,
    control: &PolicyControl,
    x0: &DVector<f64>,
    horizon: usize,
    num_paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let realized: Vec<StructuredPolicy> =
        (0..model.probs.len()).map(|t| model.realized_policy(control, t)).collect::<Result<_>>()?;
    check_state(x0, model.dim())?;
    let dist = WeightedIndex::new(&model.probs).map_err(|e| Error::invalid("theta_probs", e.to_string()))?;
    let alpha = model.alpha;
    Ok((0..num_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = path_rng(seed, path);
            let mut x = x0.clone();
            let mut discount = 1.0;
            let mut total = 0.0;
            for _ in 0..horizon {
                let p = &realized[dist.sample(&mut rng)];
                total += discount * p.q().dot(&x);
                x = p.a() * &x;
                discount *= alpha;
            }
            total
        })
        .collect())
}
