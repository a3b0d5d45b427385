//! Brute-force finite-horizon dynamic programming on unit basis states.
//!
//! Every stage enumerates the full control grid with plain loops. Nothing here
//! calls the model oracles, so the results can be used to check them.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::markovjump::{JumpData, JumpProblem};
use crate::models::{BilinearModel, DistributionMdpModel, Model, PositiveLinearModel, TabulatedModel};
use crate::types::CostVector;

/// Default cap on control combinations enumerated per stage.
pub const DEFAULT_BUDGET: u128 = 10_000;

#[derive(Clone, Copy, Debug)]
pub enum OracleTarget<'a> {
    Bilinear(&'a BilinearModel),
    PositiveLinear(&'a PositiveLinearModel),
    DistributionMdp(&'a DistributionMdpModel),
    Tabulated(&'a TabulatedModel),
    Jump(&'a JumpProblem),
}

impl<'a> From<&'a Model> for OracleTarget<'a> {
    fn from(m: &'a Model) -> Self {
        match m {
            Model::Bilinear(m) => OracleTarget::Bilinear(m),
            Model::PositiveLinear(m) => OracleTarget::PositiveLinear(m),
            Model::DistributionMdp(m) => OracleTarget::DistributionMdp(m),
            Model::Tabulated(m) => OracleTarget::Tabulated(m),
        }
    }
}

impl<'a> From<&'a JumpProblem> for OracleTarget<'a> {
    fn from(p: &'a JumpProblem) -> Self {
        OracleTarget::Jump(p)
    }
}

#[derive(Clone, Debug)]
pub struct FiniteHorizonSpec<'a> {
    pub target: OracleTarget<'a>,
    pub horizon: usize,
    /// Maximum control combinations per stage before refusing.
    pub budget: u128,
    /// Terminal cost parameter; zero when absent.
    pub terminal: Option<CostVector>,
}

impl<'a> FiniteHorizonSpec<'a> {
    pub fn new(target: impl Into<OracleTarget<'a>>, horizon: usize) -> Self {
        FiniteHorizonSpec { target: target.into(), horizon, budget: DEFAULT_BUDGET, terminal: None }
    }

    pub fn with_terminal(mut self, c: CostVector) -> Self {
        self.terminal = Some(c);
        self
    }

    fn dim(&self) -> usize {
        match self.target {
            OracleTarget::Bilinear(m) => m.q().len(),
            OracleTarget::PositiveLinear(m) => m.q().len(),
            OracleTarget::DistributionMdp(m) => m.components().len(),
            OracleTarget::Tabulated(m) => m.listed()[0].dim(),
            OracleTarget::Jump(p) => p.modes() * p.state_dim(),
        }
    }

    fn alpha(&self) -> f64 {
        match self.target {
            OracleTarget::Bilinear(m) => crate::SemilinearModel::alpha(m),
            OracleTarget::PositiveLinear(m) => crate::SemilinearModel::alpha(m),
            OracleTarget::DistributionMdp(m) => crate::SemilinearModel::alpha(m),
            OracleTarget::Tabulated(m) => crate::SemilinearModel::alpha(m),
            OracleTarget::Jump(p) => p.alpha(),
        }
    }

    /// Control combinations enumerated per stage.
    pub fn combinations(&self) -> u128 {
        let sat = |it: &mut dyn Iterator<Item = u128>| it.fold(1u128, |a, b| a.saturating_mul(b));
        match self.target {
            OracleTarget::Bilinear(m) => sat(&mut m.components().iter().map(|g| g.len() as u128)),
            OracleTarget::DistributionMdp(m) => sat(&mut m.components().iter().map(|g| g.len() as u128)),
            OracleTarget::PositiveLinear(m) => (m.q().len() as u128).saturating_mul(pow2(m.r().len())),
            OracleTarget::Tabulated(m) => (m.listed().len() as u128).saturating_pow(m.listed()[0].dim() as u32),
            OracleTarget::Jump(p) => {
                let n = p.state_dim();
                match p.data() {
                    JumpData::PositiveLinear { modes } => modes
                        .iter()
                        .map(|m| (n as u128).saturating_mul(pow2(m.r().len())))
                        .fold(0u128, |a, b| a.saturating_add(b)),
                    JumpData::Tabulated { modes } => modes
                        .iter()
                        .map(|l| (l.len() as u128).saturating_pow(n as u32))
                        .fold(0u128, |a, b| a.saturating_add(b)),
                }
            }
        }
    }
}

fn pow2(m: usize) -> u128 {
    if m >= 127 {
        u128::MAX
    } else {
        1u128 << m
    }
}

/// Mixed-radix digits of `code`.
fn digits(mut code: u128, radices: &[usize]) -> Vec<usize> {
    radices
        .iter()
        .map(|&r| {
            let d = (code % r as u128) as usize;
            code /= r as u128;
            d
        })
        .collect()
}

fn stage(spec: &FiniteHorizonSpec, c: &[f64]) -> Vec<f64> {
    let alpha = spec.alpha();
    let n = spec.dim();
    let mut best = vec![f64::INFINITY; n];
    match spec.target {
        OracleTarget::Bilinear(m) => {
            let grids = m.components();
            let radices: Vec<usize> = grids.iter().map(|g| g.len()).collect();
            let total: u128 = radices.iter().map(|&r| r as u128).product();
            for code in 0..total {
                let u = digits(code, &radices);
                for i in 0..n {
                    // from e_i: next state A e_i + f_i(u^i), cost q_i + g_i(u^i)
                    let ctl = &grids[i][u[i]];
                    let mut future = 0.0;
                    for j in 0..n {
                        future += c[j] * (m.a()[(j, i)] + ctl.f[j]);
                    }
                    let v = m.q()[i] + ctl.g + alpha * future;
                    if v < best[i] {
                        best[i] = v;
                    }
                }
            }
        }
        OracleTarget::DistributionMdp(m) => {
            let grids = m.components();
            let radices: Vec<usize> = grids.iter().map(|g| g.len()).collect();
            let total: u128 = radices.iter().map(|&r| r as u128).product();
            for code in 0..total {
                let u = digits(code, &radices);
                for i in 0..n {
                    let ctl = &grids[i][u[i]];
                    let mut future = 0.0;
                    for j in 0..n {
                        future += c[j] * ctl.p[j];
                    }
                    let v = ctl.g + alpha * future;
                    if v < best[i] {
                        best[i] = v;
                    }
                }
            }
        }
        OracleTarget::PositiveLinear(m) => {
            for i in 0..n {
                best[i] = pl_vertex_min(m, i, &[(1.0, c)], alpha);
            }
        }
        OracleTarget::Tabulated(m) => {
            let listed = m.listed();
            let radices = vec![listed.len(); n];
            let total = (listed.len() as u128).pow(n as u32);
            for code in 0..total {
                let sel = digits(code, &radices);
                for i in 0..n {
                    let p = &listed[sel[i]];
                    let mut future = 0.0;
                    for j in 0..n {
                        future += c[j] * p.a()[(j, i)];
                    }
                    let v = p.q()[i] + alpha * future;
                    if v < best[i] {
                        best[i] = v;
                    }
                }
            }
        }
        OracleTarget::Jump(problem) => {
            let r = problem.modes();
            let k = problem.state_dim();
            let p = problem.transition();
            let blocks: Vec<&[f64]> = (0..r).map(|w| &c[w * k..(w + 1) * k]).collect();
            match problem.data() {
                JumpData::PositiveLinear { modes } => {
                    for t in 0..r {
                        let mix: Vec<(f64, &[f64])> = (0..r).map(|w| (p[(t, w)], blocks[w])).collect();
                        for i in 0..k {
                            best[t * k + i] = pl_vertex_min(&modes[t], i, &mix, alpha);
                        }
                    }
                }
                JumpData::Tabulated { modes } => {
                    for t in 0..r {
                        let list = &modes[t];
                        let radices = vec![list.len(); k];
                        let total = (list.len() as u128).pow(k as u32);
                        for code in 0..total {
                            let sel = digits(code, &radices);
                            for i in 0..k {
                                let pol = &list[sel[i]];
                                let mut v = 0.0;
                                for w in 0..r {
                                    let mut future = 0.0;
                                    for j in 0..k {
                                        future += blocks[w][j] * pol.a[w][(j, i)];
                                    }
                                    v += p[(t, w)] * (pol.q[w][i] + alpha * future);
                                }
                                if v < best[t * k + i] {
                                    best[t * k + i] = v;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    best
}

/// Minimum over the vertices `u = -s * H e_i` of the expected one-stage cost from
/// `e_i`, where `mix` lists `(probability, cost-to-go)` of the next stage.
fn pl_vertex_min(m: &PositiveLinearModel, i: usize, mix: &[(f64, &[f64])], alpha: f64) -> f64 {
    let n = m.q().len();
    let inputs = m.r().len();
    let mut best = f64::INFINITY;
    for bits in 0u64..(1u64 << inputs) {
        let u: Vec<f64> = (0..inputs)
            .map(|j| if bits >> j & 1 == 1 { m.h()[(j, i)] } else { -m.h()[(j, i)] })
            .collect();
        let mut cost = m.q()[i];
        for j in 0..inputs {
            cost += m.r()[j] * u[j];
        }
        let next: Vec<f64> = (0..n)
            .map(|row| {
                let mut x = m.a()[(row, i)];
                for j in 0..inputs {
                    x += m.b()[(row, j)] * u[j];
                }
                x
            })
            .collect();
        let mut v = 0.0;
        for (p, c) in mix {
            let mut future = 0.0;
            for row in 0..n {
                future += c[row] * next[row];
            }
            v += p * (cost + alpha * future);
        }
        if v < best {
            best = v;
        }
    }
    best
}

/// Backward recursion from the terminal cost, returning every stage `G^k(terminal)`, `k = 0..=N`.
pub fn finite_horizon_sequence(spec: &FiniteHorizonSpec) -> Result<Vec<CostVector>> {
    if spec.horizon == 0 {
        return Err(Error::invalid("horizon", "must be >= 1"));
    }
    let combos = spec.combinations();
    if combos > spec.budget {
        return Err(Error::Refused(format!(
            "{combos} control combinations per stage exceed the oracle budget of {}",
            spec.budget
        )));
    }
    let n = spec.dim();
    let mut c = match &spec.terminal {
        Some(t) if t.len() != n => return Err(Error::dims("terminal cost", n, t.len())),
        Some(t) => t.clone(),
        None => CostVector::zeros(n),
    };
    let mut out = vec![c.clone()];
    for _ in 0..spec.horizon {
        c = CostVector::from_computed(DVector::from_vec(stage(spec, c.as_slice())))?;
        out.push(c.clone());
    }
    Ok(out)
}

/// `G^N(terminal)`: the parameter vector of the optimal `N`-stage cost.
pub fn finite_horizon_value(spec: &FiniteHorizonSpec) -> Result<CostVector> {
    Ok(finite_horizon_sequence(spec)?.pop().expect("at least one stage"))
}

/// Whether the optimal `N`-stage cost from every unit basis state is strictly positive.
pub fn check_assumption_d(spec: &FiniteHorizonSpec) -> Result<bool> {
    let mut zero_terminal = spec.clone();
    zero_terminal.terminal = None;
    Ok(finite_horizon_value(&zero_terminal)?.as_slice().iter().all(|v| *v > 0.0))
}
