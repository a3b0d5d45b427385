use crate::error::{Error, Result};
use crate::operators::{certify_stability, evaluate_policy, SemilinearModel};
use crate::types::{Engine, SolveReport, TracePoint};

use super::{finish_report, find_stable_policy, SolverConfig};

/// Relative slack when checking that successive policy costs do not increase.
pub const MONOTONE_SLACK: f64 = 1e-9;

/// Policy iteration: exact evaluation of `mu^k`, then the greedy improvement at `c_{mu^k}`.
///
/// The trace records `c_{mu^k}`, which must be nonincreasing; an unstable or
/// costlier successor is reported as a theory violation.
pub fn solve_pi<M: SemilinearModel + ?Sized>(model: &M, config: &SolverConfig) -> Result<SolveReport> {
    let n = model.dim();
    let alpha = model.alpha();
    config.validate(n)?;
    let mut diagnostics = Vec::new();

    let (mut policy, mut c) = match &config.initial_policy {
        Some(p) => {
            let (stable, rho) = certify_stability(p.a(), alpha)?;
            if !stable {
                return Err(Error::Unstable { rho });
            }
            (p.clone(), evaluate_policy(p, alpha)?)
        }
        None => {
            let found = find_stable_policy(model)?;
            diagnostics.push("initial policy found by stable-policy search".to_string());
            found
        }
    };

    let mut trace = Vec::new();
    let mut k = 0;
    loop {
        let (g, next) = model.bellman(&c)?;
        let residual = c.max_abs_diff(&g);
        trace.push(TracePoint { iteration: k, c: c.clone(), residual });
        if residual <= config.tolerance || k >= config.max_iterations {
            break;
        }
        if next == policy {
            diagnostics.push(format!(
                "policy repeated with residual {residual:e} above tolerance; evaluation accuracy limits progress"
            ));
            break;
        }
        let c_next = match evaluate_policy(&next, alpha) {
            Ok(v) => v,
            Err(Error::Unstable { rho }) => {
                return Err(Error::TheoryViolation(format!(
                    "improved policy at iteration {} is unstable (rho = {rho}); the model oracle is inconsistent",
                    k + 1
                )))
            }
            Err(e) => return Err(e),
        };
        let scale = c.as_slice().iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        if !c_next.le_with(&c, MONOTONE_SLACK * scale) {
            return Err(Error::TheoryViolation(format!(
                "policy cost increased at iteration {}: {} is not <= {}",
                k + 1,
                c_next,
                c
            )));
        }
        policy = next;
        c = c_next;
        k += 1;
    }
    finish_report(model, Engine::PolicyIteration, c, trace, k, config, diagnostics)
}
