use crate::error::Result;
use crate::operators::SemilinearModel;
use crate::types::{CostVector, Engine, SolveReport, TracePoint};

use super::{finish_report, SolverConfig};

/// Synchronous value iteration `c_{k+1} = G(c_k)`.
///
/// The trace records `(k, c_k, ||c_k - G(c_k)||)`; with this stopping rule the
/// residual is also the successive change.
pub fn solve_vi<M: SemilinearModel + ?Sized>(model: &M, config: &SolverConfig) -> Result<SolveReport> {
    let n = model.dim();
    config.validate(n)?;
    let mut c = config.initial_c.clone().unwrap_or_else(|| CostVector::zeros(n));
    let (trace, iterations) = vi_loop(model, &mut c, config)?;
    finish_report(model, Engine::ValueIteration, c, trace, iterations, config, Vec::new())
}

pub(crate) fn vi_loop<M: SemilinearModel + ?Sized>(
    model: &M,
    c: &mut CostVector,
    config: &SolverConfig,
) -> Result<(Vec<TracePoint>, usize)> {
    let mut trace = Vec::new();
    let mut k = 0;
    loop {
        let (g, _) = model.bellman(c)?;
        let residual = c.max_abs_diff(&g);
        trace.push(TracePoint { iteration: k, c: c.clone(), residual });
        if residual <= config.tolerance || k >= config.max_iterations {
            return Ok((trace, k));
        }
        *c = g;
        k += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::tests::two_policy;

    #[test]
    fn scalar_two_policy_fixed_point() {
        let r = solve_vi(&two_policy(), &SolverConfig::default().with_tolerance(1e-12)).unwrap();
        assert!(r.converged);
        assert!((r.c_star[0] - 1.0 / 0.55).abs() < 1e-10);
        assert!(r.stable);
        assert!((r.spectral_radius - 0.45).abs() < 1e-10);
    }

    #[test]
    fn starting_at_fixed_point_takes_zero_iterations() {
        let m = two_policy();
        let first = solve_vi(&m, &SolverConfig::default().with_tolerance(1e-13)).unwrap();
        let mut cfg = SolverConfig::default();
        cfg.initial_c = Some(first.c_star.clone());
        let again = solve_vi(&m, &cfg).unwrap();
        assert_eq!(again.iterations, 0);
        assert!(again.converged);
    }

    #[test]
    fn iterates_from_zero_are_nondecreasing() {
        let r = solve_vi(&two_policy(), &SolverConfig::default()).unwrap();
        for w in r.trace.windows(2) {
            assert!(w[1].c[0] >= w[0].c[0]);
        }
    }

    #[test]
    fn empty_budget_is_not_converged() {
        let r = solve_vi(&two_policy(), &SolverConfig::default().with_max_iterations(0)).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.trace.len(), 1);
    }
}
