//! Markov jump problems: the parameter follows a finite Markov chain and is
//! observed before each control. The problem reduces to a deterministic one on
//! `rn`-dimensional stacked cost vectors `c = (c(1), ..., c(r))`, mode-major.

use nalgebra::{DMatrix, DVector};
use rand::distributions::{Distribution, WeightedIndex};
use rayon::prelude::*;

use crate::algorithms::{solve, SolverConfig};
use crate::error::{Error, Result};
use crate::linalg::check_probability_vector;
use crate::models::PositiveLinearModel;
use crate::operators::{check_alpha, g_mu_raw, SemilinearModel};
use crate::stochastic::{check_state, path_rng, summarize, RolloutStats};
use crate::types::{component_value, CostVector, Engine, PolicyControl, SolveReport, StructuredPolicy};

/// One listed policy of a tabulated jump mode: `a[w]`, `q[w]` are the pair used
/// when the next mode is `w`.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpTabulatedPolicy {
    pub a: Vec<DMatrix<f64>>,
    pub q: Vec<DVector<f64>>,
}

#[derive(Clone, Debug)]
pub enum JumpData {
    /// Per mode `t`: `x' = A^t x + B^t u`, cost `q_t'x + r_t'u`, `|u| <= H_t x`; the
    /// pair does not depend on the next mode.
    PositiveLinear { modes: Vec<PositiveLinearModel> },
    /// Per mode, a list of policies; componentwise mixing within a mode is allowed.
    Tabulated { modes: Vec<Vec<JumpTabulatedPolicy>> },
}

#[derive(Clone, Debug)]
pub struct JumpProblem {
    p: DMatrix<f64>,
    data: JumpData,
    alpha: f64,
    n: usize,
}

/// Per-mode cost vectors `c(1), ..., c(r)`.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpCostVector(pub Vec<CostVector>);

impl JumpCostVector {
    pub fn stack(&self) -> CostVector {
        let v: Vec<f64> = self.0.iter().flat_map(|c| c.to_vec()).collect();
        CostVector::new(DVector::from_vec(v)).expect("stacked nonnegative vectors stay nonnegative")
    }

    pub fn unstack(c: &CostVector, r: usize) -> Result<Self> {
        if r == 0 || c.len() % r != 0 {
            return Err(Error::dims("stacked jump cost vector", r, c.len()));
        }
        let n = c.len() / r;
        Ok(JumpCostVector(
            (0..r).map(|t| CostVector::from_slice(&c.as_slice()[t * n..(t + 1) * n])).collect::<Result<_>>()?,
        ))
    }

    pub fn mode(&self, t: usize) -> &CostVector {
        &self.0[t]
    }
}

impl JumpProblem {
    pub fn new(p: DMatrix<f64>, data: JumpData, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let r = p.nrows();
        if r == 0 || p.ncols() != r {
            return Err(Error::dims("p (r x r)", r, p.ncols()));
        }
        for t in 0..r {
            let row: Vec<f64> = p.row(t).iter().copied().collect();
            check_probability_vector(&row, &format!("p[{t}]"))?;
        }
        let n = match &data {
            JumpData::PositiveLinear { modes } => {
                if modes.len() != r {
                    return Err(Error::dims("modes", r, modes.len()));
                }
                if let Some(t) = modes.iter().position(|m| m.alpha() != alpha) {
                    return Err(Error::invalid(format!("modes[{t}].alpha"), "must equal the problem discount"));
                }
                let n = modes[0].dim();
                if let Some(t) = modes.iter().position(|m| m.dim() != n) {
                    return Err(Error::dims(format!("modes[{t}].q"), n, modes[t].dim()));
                }
                n
            }
            JumpData::Tabulated { modes } => {
                if modes.len() != r {
                    return Err(Error::dims("modes", r, modes.len()));
                }
                let n = modes
                    .iter()
                    .flat_map(|m| m.first())
                    .flat_map(|pol| pol.q.first())
                    .map(|q| q.len())
                    .next()
                    .ok_or_else(|| Error::invalid("modes[0].policies", "policy list is empty"))?;
                for (t, list) in modes.iter().enumerate() {
                    if list.is_empty() {
                        return Err(Error::invalid(format!("modes[{t}].policies"), "policy list is empty"));
                    }
                    for (k, pol) in list.iter().enumerate() {
                        let field = format!("modes[{t}].policies[{k}]");
                        if pol.a.len() != r || pol.q.len() != r {
                            return Err(Error::dims(format!("{field} (one pair per next mode)"), r, pol.a.len().min(pol.q.len())));
                        }
                        for w in 0..r {
                            if pol.a[w].nrows() != n || pol.a[w].ncols() != n {
                                return Err(Error::dims(format!("{field}.a[{w}]"), n, pol.a[w].nrows()));
                            }
                            if pol.q[w].len() != n {
                                return Err(Error::dims(format!("{field}.q[{w}]"), n, pol.q[w].len()));
                            }
                            crate::linalg::check_nonnegative_matrix(&pol.a[w], &format!("{field}.a[{w}]"))?;
                            crate::linalg::check_nonnegative_vector(&pol.q[w], &format!("{field}.q[{w}]"))?;
                        }
                    }
                }
                n
            }
        };
        Ok(JumpProblem { p, data, alpha, n })
    }

    pub fn modes(&self) -> usize {
        self.p.nrows()
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn data(&self) -> &JumpData {
        &self.data
    }

    /// Pairs `(A_mu^{t w}, q_mu^{t w})` for every next mode `w`, under the control used in mode `t`.
    pub fn mode_pairs(&self, t: usize, control: &PolicyControl) -> Result<Vec<(DMatrix<f64>, DVector<f64>)>> {
        let r = self.modes();
        match (&self.data, control) {
            (JumpData::PositiveLinear { modes }, PolicyControl::Gain(l)) => {
                let pol = modes[t].policy_for_gain(l.clone()).map_err(|e| e.in_field(&format!("policy[{t}]")))?;
                Ok(vec![(pol.a().clone(), pol.q().clone()); r])
            }
            (JumpData::Tabulated { modes }, PolicyControl::Selection(sel)) => {
                let list = &modes[t];
                if sel.len() != self.n {
                    return Err(Error::dims(format!("policy[{t}] selection"), self.n, sel.len()));
                }
                (0..r)
                    .map(|w| {
                        let mut a = DMatrix::zeros(self.n, self.n);
                        let mut q = DVector::zeros(self.n);
                        for (i, &k) in sel.iter().enumerate() {
                            let pol = list.get(k).ok_or_else(|| {
                                Error::invalid(format!("policy[{t}][{i}]"), format!("index {k} out of range ({} policies)", list.len()))
                            })?;
                            a.set_column(i, &pol.a[w].column(i));
                            q[i] = pol.q[w][i];
                        }
                        Ok((a, q))
                    })
                    .collect()
            }
            _ => Err(Error::invalid(format!("policy[{t}]"), "control does not match the problem family")),
        }
    }
}

/// `barA` with block (row `w`, column `t`) equal to `p_{tw} A_mu^{tw}`, and
/// `barq` with block `t` equal to `sum_w p_{tw} q_mu^{tw}`.
pub fn build_bar_matrices(problem: &JumpProblem, policy: &[PolicyControl]) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let r = problem.modes();
    let n = problem.n;
    if policy.len() != r {
        return Err(Error::dims("mode-dependent policy", r, policy.len()));
    }
    let mut bar_a = DMatrix::zeros(r * n, r * n);
    let mut bar_q = DVector::zeros(r * n);
    for (t, control) in policy.iter().enumerate() {
        let pairs = problem.mode_pairs(t, control)?;
        for (w, (a, q)) in pairs.iter().enumerate() {
            let p = problem.p[(t, w)];
            bar_a.view_mut((w * n, t * n), (n, n)).copy_from(&(a * p));
            for i in 0..n {
                bar_q[t * n + i] += p * q[i];
            }
        }
    }
    Ok((bar_a, bar_q))
}

/// The `rn`-dimensional deterministic equivalent.
#[derive(Clone, Debug)]
pub struct JumpEquivalent {
    problem: JumpProblem,
}

/// Builds the deterministic equivalent. Its oracle minimizes mode by mode,
/// never over the `rn`-dimensional control product.
pub fn deterministic_equivalent(problem: &JumpProblem) -> JumpEquivalent {
    JumpEquivalent { problem: problem.clone() }
}

impl JumpEquivalent {
    pub fn problem(&self) -> &JumpProblem {
        &self.problem
    }

    /// `sum_w p_{tw} c(w)`
    fn mixed_cost(&self, c: &[f64], t: usize) -> CostVector {
        let n = self.problem.n;
        let mut v = DVector::zeros(n);
        for w in 0..self.problem.modes() {
            let p = self.problem.p[(t, w)];
            for i in 0..n {
                v[i] += p * c[w * n + i];
            }
        }
        CostVector::from_computed(v).expect("mixture of nonnegative vectors")
    }

    fn greedy_controls(&self, c: &CostVector) -> Vec<PolicyControl> {
        let r = self.problem.modes();
        let n = self.problem.n;
        let p = &self.problem.p;
        match &self.problem.data {
            JumpData::PositiveLinear { modes } => (0..r)
                .map(|t| {
                    let signs = modes[t].greedy_signs(&self.mixed_cost(c.as_slice(), t));
                    PolicyControl::Gain(modes[t].gain_from_signs(&signs))
                })
                .collect(),
            JumpData::Tabulated { modes } => (0..r)
                .map(|t| {
                    let sel = (0..n)
                        .map(|i| {
                            let mut best = (f64::INFINITY, 0);
                            for (k, pol) in modes[t].iter().enumerate() {
                                let mut col = Vec::with_capacity(r * n);
                                let mut qi = 0.0;
                                for w in 0..r {
                                    col.extend(pol.a[w].column(i).iter().map(|v| p[(t, w)] * v));
                                    qi += p[(t, w)] * pol.q[w][i];
                                }
                                let v = component_value(qi, &col, c.as_slice(), self.problem.alpha);
                                if v < best.0 {
                                    best = (v, k);
                                }
                            }
                            best.1
                        })
                        .collect();
                    PolicyControl::Selection(sel)
                })
                .collect(),
        }
    }
}

impl SemilinearModel for JumpEquivalent {
    fn dim(&self) -> usize {
        self.problem.modes() * self.problem.n
    }

    fn alpha(&self) -> f64 {
        self.problem.alpha
    }

    fn family(&self) -> &'static str {
        match self.problem.data {
            JumpData::PositiveLinear { .. } => "jump_positive_linear",
            JumpData::Tabulated { .. } => "jump_tabulated",
        }
    }

    fn bellman(&self, c: &CostVector) -> Result<(CostVector, StructuredPolicy)> {
        let controls = self.greedy_controls(c);
        let (bar_a, bar_q) = build_bar_matrices(&self.problem, &controls)?;
        let c_hat = g_mu_raw(&bar_a, &bar_q, c.as_slice(), self.problem.alpha);
        let policy = StructuredPolicy::new(PolicyControl::Modes(controls), bar_a, bar_q)?;
        Ok((CostVector::from_computed(c_hat)?, policy))
    }

    fn policy_count(&self) -> Option<u128> {
        let r = self.problem.modes();
        match &self.problem.data {
            JumpData::PositiveLinear { modes } => {
                modes.iter().try_fold(1u128, |acc, m| acc.checked_mul(m.policy_count()?))
            }
            JumpData::Tabulated { modes } => (0..r).try_fold(1u128, |acc, t| {
                (0..self.problem.n).try_fold(acc, |a, _| a.checked_mul(modes[t].len() as u128))
            }),
        }
    }

    /// Enumerates mode-dependent policies (product over modes of each mode's class).
    fn policies(&self) -> Box<dyn Iterator<Item = StructuredPolicy> + '_> {
        let r = self.problem.modes();
        let n = self.problem.n;
        let per_mode: Vec<Vec<PolicyControl>> = match &self.problem.data {
            JumpData::PositiveLinear { modes } => modes
                .iter()
                .map(|m| {
                    m.policies()
                        .map(|p| p.control)
                        .collect::<Vec<_>>()
                })
                .collect(),
            JumpData::Tabulated { modes } => modes
                .iter()
                .map(|list| {
                    let k = list.len();
                    let total = (k as u128).checked_pow(n as u32).unwrap_or(u128::MAX).min(1 << 20) as usize;
                    (0..total)
                        .map(|mut code| {
                            PolicyControl::Selection(
                                (0..n)
                                    .map(|_| {
                                        let d = code % k;
                                        code /= k;
                                        d
                                    })
                                    .collect(),
                            )
                        })
                        .collect()
                })
                .collect(),
        };
        if per_mode.iter().any(|v| v.is_empty()) {
            return Box::new(std::iter::empty());
        }
        let mut idx: Option<Vec<usize>> = Some(vec![0; r]);
        Box::new(std::iter::from_fn(move || {
            let cur = idx.take()?;
            let mut succ = cur.clone();
            for t in 0..r {
                succ[t] += 1;
                if succ[t] < per_mode[t].len() {
                    idx = Some(succ);
                    break;
                }
                succ[t] = 0;
            }
            let controls: Vec<PolicyControl> = cur.iter().enumerate().map(|(t, &k)| per_mode[t][k].clone()).collect();
            let (a, q) = build_bar_matrices(&self.problem, &controls).ok()?;
            StructuredPolicy::new(PolicyControl::Modes(controls), a, q).ok()
        }))
    }
}

#[derive(Clone, Debug)]
pub struct JumpSolution {
    pub report: SolveReport,
    pub c_star: JumpCostVector,
    /// Control applied in each mode.
    pub policy: Vec<PolicyControl>,
}

/// Solves the deterministic equivalent and maps the result back to modes.
pub fn solve_jump(problem: &JumpProblem, engine: Engine, config: &SolverConfig) -> Result<JumpSolution> {
    let eq = deterministic_equivalent(problem);
    let report = solve(&eq, engine, config)?;
    let c_star = JumpCostVector::unstack(&report.c_star, problem.modes())?;
    let policy = match &report.policy.control {
        PolicyControl::Modes(m) => m.clone(),
        _ => return Err(Error::TheoryViolation("jump solve returned a policy without per-mode controls".into())),
    };
    Ok(JumpSolution { report, c_star, policy })
}

/// Simulates the mode chain and `x_{k+1} = A_mu^{t_k t_{k+1}} x_k`, accumulating
/// `sum_k alpha^k (q_mu^{t_k t_{k+1}})' x_k`.
pub fn jump_rollout(
    problem: &JumpProblem,
    policy: &[PolicyControl],
    x0: &DVector<f64>,
    theta0: usize,
    horizon: usize,
    num_paths: usize,
    seed: u64,
) -> Result<RolloutStats> {
    Ok(summarize(&jump_path_costs(problem, policy, x0, theta0, horizon, num_paths, seed)?, horizon, seed))
}

pub fn jump_path_costs(
    problem: &JumpProblem,
    policy: &[PolicyControl],
    x0: &DVector<f64>,
    theta0: usize,
    horizon: usize,
    num_paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let r = problem.modes();
    check_state(x0, problem.n)?;
    if theta0 >= r {
        return Err(Error::invalid("theta0", format!("{theta0} is not a mode index (r = {r})")));
    }
    if num_paths == 0 {
        return Err(Error::Config("num_paths must be >= 1".into()));
    }
    if policy.len() != r {
        return Err(Error::dims("mode-dependent policy", r, policy.len()));
    }
    let pairs: Vec<Vec<(DMatrix<f64>, DVector<f64>)>> =
        (0..r).map(|t| problem.mode_pairs(t, &policy[t])).collect::<Result<_>>()?;
    let chains: Vec<WeightedIndex<f64>> = (0..r)
        .map(|t| {
            WeightedIndex::new(problem.p.row(t).iter().copied())
                .map_err(|e| Error::invalid(format!("p[{t}]"), e.to_string()))
        })
        .collect::<Result<_>>()?;
    let alpha = problem.alpha;
    Ok((0..num_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = path_rng(seed, path);
            let mut x = x0.clone();
            let mut t = theta0;
            let mut discount = 1.0;
            let mut total = 0.0;
            for _ in 0..horizon {
                let w = chains[t].sample(&mut rng);
                let (a, q) = &pairs[t][w];
                total += discount * q.dot(&x);
                x = a * &x;
                discount *= alpha;
                t = w;
            }
            total
        })
        .collect())
}

/// Horizon making the expected tail of a stable mode-dependent policy at most
/// `rel` of its total cost from `(x0, theta0)`.
pub fn jump_rollout_horizon(problem: &JumpProblem, policy: &[PolicyControl], x0: &DVector<f64>, theta0: usize) -> Result<usize> {
    let (bar_a, bar_q) = build_bar_matrices(problem, policy)?;
    let pol = StructuredPolicy::new(PolicyControl::Modes(policy.to_vec()), bar_a.clone(), bar_q)?;
    let c = crate::operators::evaluate_policy(&pol, problem.alpha)?;
    let n = problem.n;
    check_state(x0, n)?;
    let mut x_bar = DVector::zeros(problem.modes() * n);
    x_bar.rows_mut(theta0 * n, n).copy_from(x0);
    crate::stochastic::tail_horizon(&bar_a, c.as_vector(), problem.alpha, &x_bar, crate::stochastic::HORIZON_TAIL_REL)
}
