//! Solve engines: value iteration (synchronous and asynchronous), policy
//! iteration (exact and optimistic) and a cutting-plane linear program.

mod async_vi;
mod mathprog;
mod opi;
mod pi;
pub mod simplex;
mod vi;

pub use async_vi::{solve_async_vi, AsyncSchedule, AsyncStep, ScheduleKind};
pub use mathprog::{solve_mathprog, LpOptions};
pub use opi::solve_optimistic_pi;
pub use pi::solve_pi;
pub use vi::solve_vi;

use std::io::Write;

use crate::error::{Error, Result};
use crate::operators::{certify_stability, evaluate_policy, SemilinearModel};
use crate::types::{CostVector, Engine, SolveReport, StructuredPolicy, TracePoint};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_MAX_ITERATIONS: usize = 100_000;
pub const DEFAULT_LOOKAHEAD: usize = 5;

/// Number of policies from the enumerated class tried by [`find_stable_policy`].
pub const STABLE_SEARCH_BUDGET: usize = 10_000;

#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Stop once `||c - G(c)||_inf <= tolerance`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Starting vector; zero for VI when absent, a stable policy's cost for optimistic PI.
    pub initial_c: Option<CostVector>,
    /// Starting policy for PI; found by [`find_stable_policy`] when absent.
    pub initial_policy: Option<StructuredPolicy>,
    /// Lookahead `l_k` of optimistic PI; the last entry repeats.
    pub lookahead: Vec<usize>,
    pub schedule: AsyncSchedule,
    pub lp: LpOptions,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            initial_c: None,
            initial_policy: None,
            lookahead: vec![DEFAULT_LOOKAHEAD],
            schedule: AsyncSchedule::default(),
            lp: LpOptions::default(),
        }
    }
}

impl SolverConfig {
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn with_max_iterations(mut self, k: usize) -> Self {
        self.max_iterations = k;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::Config(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.lookahead.is_empty() || self.lookahead.contains(&0) {
            return Err(Error::Config("lookahead schedule entries must be >= 1".into()));
        }
        if let Some(c) = &self.initial_c {
            if c.len() != n {
                return Err(Error::dims("initial_c", n, c.len()));
            }
        }
        if let Some(p) = &self.initial_policy {
            if p.dim() != n {
                return Err(Error::dims("initial_policy", n, p.dim()));
            }
        }
        Ok(())
    }

    pub(crate) fn lookahead_at(&self, k: usize) -> usize {
        *self.lookahead.get(k).unwrap_or_else(|| self.lookahead.last().expect("validated nonempty"))
    }
}

/// Runs `engine` on `model`.
pub fn solve<M: SemilinearModel + ?Sized>(model: &M, engine: Engine, config: &SolverConfig) -> Result<SolveReport> {
    match engine {
        Engine::ValueIteration => solve_vi(model, config),
        Engine::AsyncValueIteration => solve_async_vi(model, config),
        Engine::PolicyIteration => solve_pi(model, config),
        Engine::OptimisticPolicyIteration => solve_optimistic_pi(model, config),
        Engine::MathProgram => solve_mathprog(model, config),
    }
}

/// Searches for a policy with `alpha A_mu` stable and returns it with its cost vector.
///
/// Tries the greedy policies at `c = 0` and at large uniform `c`, then greedy
/// policies along value iteration from zero, then the enumerated policy class.
pub fn find_stable_policy<M: SemilinearModel + ?Sized>(model: &M) -> Result<(StructuredPolicy, CostVector)> {
    let n = model.dim();
    let alpha = model.alpha();
    let try_policy = |p: &StructuredPolicy| -> Option<CostVector> {
        match certify_stability(p.a(), alpha) {
            Ok((true, _)) => evaluate_policy(p, alpha).ok(),
            _ => None,
        }
    };

    let mut c = CostVector::zeros(n);
    for _ in 0..50 {
        let (next, p) = model.bellman(&c)?;
        if let Some(cp) = try_policy(&p) {
            return Ok((p, cp));
        }
        c = next;
    }
    for scale in [1.0, 1e3, 1e6] {
        let big = CostVector::new(nalgebra::DVector::from_element(n, scale))?;
        let (_, p) = model.bellman(&big)?;
        if let Some(cp) = try_policy(&p) {
            return Ok((p, cp));
        }
    }
    for p in model.policies().take(STABLE_SEARCH_BUDGET) {
        if let Some(cp) = try_policy(&p) {
            return Ok((p, cp));
        }
    }
    Err(Error::NoStablePolicy(format!(
        "no policy with alpha*A stable among greedy candidates and the first {STABLE_SEARCH_BUDGET} enumerated policies"
    )))
}

/// Builds the report for a final iterate: extracts the greedy policy, certifies
/// its stability and flags zero entries of `c*`.
pub(crate) fn finish_report<M: SemilinearModel + ?Sized>(
    model: &M,
    engine: Engine,
    c: CostVector,
    trace: Vec<TracePoint>,
    iterations: usize,
    config: &SolverConfig,
    mut diagnostics: Vec<String>,
) -> Result<SolveReport> {
    let (g, policy) = model.bellman(&c)?;
    let residual = c.max_abs_diff(&g);
    let converged = residual <= config.tolerance;
    let (stable, spectral_radius) = match certify_stability(policy.a(), model.alpha()) {
        Ok(v) => v,
        Err(Error::IndeterminateStability { iterations, lower, upper }) => {
            diagnostics.push(format!(
                "stability of the returned policy is indeterminate after {iterations} power iterations (bounds [{lower}, {upper}])"
            ));
            (false, f64::NAN)
        }
        Err(e) => return Err(e),
    };
    if converged {
        let zeros: Vec<usize> = (0..c.len()).filter(|&i| c[i] <= 0.0).collect();
        if !zeros.is_empty() {
            diagnostics.push(format!(
                "c* has zero entries at {zeros:?}: N-stage cost positivity likely violated, optimal policy may be unstable"
            ));
        }
    }
    if !stable && converged {
        diagnostics.push(format!("returned policy is not certified stable (rho = {spectral_radius})"));
    }
    Ok(SolveReport { engine, c_star: c, policy, trace, residual, stable, spectral_radius, iterations, converged, diagnostics })
}

/// Formats a float with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the iteration trace as CSV: `iter,residual,c_0,...,c_{n-1}`.
pub fn write_trace_csv<W: Write>(report: &SolveReport, mut out: W) -> std::io::Result<()> {
    let n = report.c_star.len();
    let mut header = String::from("iter,residual");
    for i in 0..n {
        header.push_str(&format!(",c_{i}"));
    }
    writeln!(out, "{header}")?;
    for tp in &report.trace {
        let mut line = format!("{},{}", tp.iteration, format_f64(tp.residual));
        for v in tp.c.as_slice() {
            line.push(',');
            line.push_str(&format_f64(*v));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::TabulatedModel;
    use nalgebra::{dmatrix, DVector};

    pub(crate) fn two_policy() -> TabulatedModel {
        TabulatedModel::new(
            vec![(dmatrix![0.5], DVector::from_vec(vec![1.0])), (dmatrix![0.9], DVector::from_vec(vec![0.5]))],
            0.9,
        )
        .unwrap()
    }

    #[test]
    fn trace_csv_has_header_and_17_digits() {
        let r = solve_vi(&two_policy(), &SolverConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "iter,residual,c_0");
        let row: Vec<&str> = lines.nth(1).unwrap().split(',').collect();
        assert_eq!(row[0], "1");
        let parsed: f64 = row[2].parse().unwrap();
        assert_eq!(parsed, r.trace[1].c[0]);
        assert_eq!(format_f64(0.1), "1.0000000000000001e-1");
    }

    #[test]
    fn stable_search_finds_a_policy() {
        let (p, c) = find_stable_policy(&two_policy()).unwrap();
        assert!(certify_stability(p.a(), 0.9).unwrap().0);
        assert!(c[0] > 0.0);
    }

    #[test]
    fn stable_search_fails_when_every_policy_explodes() {
        let m = TabulatedModel::new(vec![(dmatrix![1.5], DVector::from_vec(vec![1.0]))], 1.0).unwrap();
        assert!(matches!(find_stable_policy(&m), Err(Error::NoStablePolicy(_))));
    }

    #[test]
    fn config_rejects_bad_values() {
        assert!(SolverConfig::default().with_tolerance(0.0).validate(1).is_err());
        let mut c = SolverConfig::default();
        c.lookahead = vec![3, 0];
        assert!(c.validate(1).is_err());
    }
}
