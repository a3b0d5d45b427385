use crate::error::{Error, Result};
use crate::operators::{apply_g_mu, SemilinearModel};
use crate::types::{Engine, SolveReport, TracePoint};

use super::{finish_report, find_stable_policy, SolverConfig};

/// Relative slack for the starting condition `c_0 >= G(c_0)`.
pub const START_SLACK: f64 = 1e-12;

/// Optimistic policy iteration: `mu^k` greedy at `c_k`, then
/// `c_{k+1} = G_{mu^k}^{l_k}(c_k)` by repeated application.
pub fn solve_optimistic_pi<M: SemilinearModel + ?Sized>(model: &M, config: &SolverConfig) -> Result<SolveReport> {
    let n = model.dim();
    let alpha = model.alpha();
    config.validate(n)?;
    let mut diagnostics = Vec::new();

    let mut c = match &config.initial_c {
        Some(c0) => c0.clone(),
        None => {
            let (_, c_mu) = find_stable_policy(model)?;
            diagnostics.push("starting vector is the cost of a stable policy found by search".to_string());
            c_mu
        }
    };
    let (g0, _) = model.bellman(&c)?;
    let scale = c.as_slice().iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    if !g0.le_with(&c, START_SLACK * scale) {
        let i = (0..n).find(|&i| g0[i] > c[i] + START_SLACK * scale).unwrap_or(0);
        return Err(Error::Precondition(format!(
            "optimistic PI needs c_0 >= G(c_0), but G(c_0)[{i}] = {} > c_0[{i}] = {}; \
             start from the cost vector of a stable policy, or scale one up",
            g0[i], c[i]
        )));
    }

    let mut trace = Vec::new();
    let mut k = 0;
    loop {
        let (g, mu) = model.bellman(&c)?;
        let residual = c.max_abs_diff(&g);
        trace.push(TracePoint { iteration: k, c: c.clone(), residual });
        if residual <= config.tolerance || k >= config.max_iterations {
            break;
        }
        let mut next = g;
        for _ in 1..config.lookahead_at(k) {
            next = apply_g_mu(&mu, &next, alpha)?;
        }
        c = next;
        k += 1;
    }
    finish_report(model, Engine::OptimisticPolicyIteration, c, trace, k, config, diagnostics)
}
