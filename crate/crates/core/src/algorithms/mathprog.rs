use std::collections::HashSet;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::operators::{certify_stability, evaluate_policy, SemilinearModel};
use crate::types::{CostVector, Engine, SolveReport, StructuredPolicy, TracePoint};

use super::simplex::{maximize, LpOutcome};
use super::{finish_report, find_stable_policy, SolverConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct LpOptions {
    /// Add the constraints of every enumerated policy before the first solve.
    pub exhaustive_cuts: bool,
    /// Cap on enumerated policies in exhaustive mode.
    pub exhaustive_limit: usize,
    pub max_pivots: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions { exhaustive_cuts: false, exhaustive_limit: 1 << 12, max_pivots: 200_000 }
    }
}

struct Cuts {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    seen: HashSet<Vec<u64>>,
}

impl Cuts {
    /// Row `i` of `c <= q_mu + alpha A_mu' c`, i.e. `c_i - alpha A_mu[:, i]' c <= q_mu[i]`.
    fn add(&mut self, policy: &StructuredPolicy, i: usize, alpha: f64) -> bool {
        let n = policy.dim();
        let mut row: Vec<f64> = (0..n).map(|j| -alpha * policy.a()[(j, i)]).collect();
        row[i] += 1.0;
        let rhs = policy.q()[i];
        let mut key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
        key.push(rhs.to_bits());
        if !self.seen.insert(key) {
            return false;
        }
        self.rows.push(row);
        self.rhs.push(rhs);
        true
    }
}

/// Cutting-plane solution of `max sum(c) s.t. c <= G(c), c >= 0`.
///
/// Each round solves the LP over the cuts collected so far plus the box
/// `c <= c_hat` from a stable policy's cost, then adds the constraint rows of
/// the greedy policy wherever the LP optimum violates `c <= G(c)`.
pub fn solve_mathprog<M: SemilinearModel + ?Sized>(model: &M, config: &SolverConfig) -> Result<SolveReport> {
    let n = model.dim();
    let alpha = model.alpha();
    config.validate(n)?;
    let mut diagnostics = Vec::new();

    let (bound_policy, bound) = match &config.initial_policy {
        Some(p) if certify_stability(p.a(), alpha)?.0 => (p.clone(), evaluate_policy(p, alpha)?),
        _ => find_stable_policy(model)?,
    };
    let upper: Vec<f64> = bound.as_slice().iter().map(|v| v * (1.0 + 1e-6) + 1e-9).collect();

    let mut cuts = Cuts { rows: Vec::new(), rhs: Vec::new(), seen: HashSet::new() };
    for i in 0..n {
        cuts.add(&bound_policy, i, alpha);
    }
    if config.lp.exhaustive_cuts {
        let mut count = 0;
        for p in model.policies().take(config.lp.exhaustive_limit) {
            for i in 0..n {
                cuts.add(&p, i, alpha);
            }
            count += 1;
        }
        if count == 0 {
            diagnostics.push("exhaustive cuts requested but the model does not enumerate its policies".into());
        }
        if model.policy_count().map_or(true, |k| k > config.lp.exhaustive_limit as u128) {
            diagnostics.push(format!("exhaustive cuts truncated at {} policies", config.lp.exhaustive_limit));
        }
    }

    let objective = vec![1.0; n];
    let mut trace = Vec::new();
    let mut round = 0;
    let c = loop {
        let mut rows = cuts.rows.clone();
        let mut rhs = cuts.rhs.clone();
        for (i, &u) in upper.iter().enumerate() {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            rows.push(e);
            rhs.push(u);
        }
        let x = match maximize(&objective, &rows, &rhs, config.lp.max_pivots)? {
            LpOutcome::Optimal { x, .. } => x,
            LpOutcome::Unbounded => {
                return Err(Error::TheoryViolation("cutting-plane LP unbounded despite the box constraint".into()))
            }
            LpOutcome::PivotLimit => {
                diagnostics.push(format!("simplex pivot limit {} reached", config.lp.max_pivots));
                break trace.last().map(|t: &TracePoint| t.c.clone()).unwrap_or_else(|| CostVector::zeros(n));
            }
        };
        let c = CostVector::from_computed(DVector::from_vec(x))?;
        let (g, mu) = model.bellman(&c)?;
        let residual = c.max_abs_diff(&g);
        trace.push(TracePoint { iteration: round, c: c.clone(), residual });
        if residual <= config.tolerance || round >= config.max_iterations {
            break c;
        }
        let mut added = false;
        for i in 0..n {
            if c[i] > g[i] {
                added |= cuts.add(&mu, i, alpha);
            }
        }
        if !added {
            diagnostics.push(format!(
                "no new cut separates the LP optimum (residual {residual:e}); stopping at round {round}"
            ));
            break c;
        }
        round += 1;
    };
    diagnostics.push(format!("{} cuts in the final LP", cuts.rows.len()));
    finish_report(model, Engine::MathProgram, c, trace, round, config, diagnostics)
}
