//! Domain types shared by every solver: linear cost parameters, structured
//! policies and solve reports.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Entries in `[-ROUNDOFF_CLAMP, 0)` are treated as roundoff and clamped to zero.
pub const ROUNDOFF_CLAMP: f64 = 1e-12;

/// Nonnegative parameter vector `c` of a linear cost function `J(x) = c'x`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostVector(DVector<f64>);

impl CostVector {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::invalid(format!("c[{i}]"), format!("{v} is not finite")));
            }
            if v < 0.0 {
                return Err(Error::invalid(format!("c[{i}]"), format!("{v} is negative")));
            }
        }
        Ok(CostVector(values))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(values))
    }

    pub fn zeros(n: usize) -> Self {
        CostVector(DVector::zeros(n))
    }

    /// Like [`CostVector::new`] but clamps roundoff-sized negative entries to zero.
    pub(crate) fn from_computed(mut values: DVector<f64>) -> Result<Self> {
        let scale = values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for v in values.iter_mut() {
            if *v < 0.0 && *v >= -ROUNDOFF_CLAMP * scale {
                *v = 0.0;
            }
        }
        Self::new(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.iter().copied().collect()
    }

    /// `c'x`
    pub fn cost_at(&self, x: &DVector<f64>) -> f64 {
        self.0.dot(x)
    }

    pub fn max_abs_diff(&self, other: &CostVector) -> f64 {
        crate::linalg::max_abs_diff(&self.0, &other.0)
    }

    /// Entrywise `self <= other + slack`.
    pub fn le_with(&self, other: &CostVector, slack: f64) -> bool {
        self.0.iter().zip(other.0.iter()).all(|(a, b)| *a <= *b + slack)
    }

    pub fn scaled(&self, s: f64) -> Result<CostVector> {
        CostVector::new(&self.0 * s)
    }
}

impl std::ops::Index<usize> for CostVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl fmt::Display for CostVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}

/// Model-specific description of the controls a policy applies.
#[derive(Clone, Debug, PartialEq)]
pub enum PolicyControl {
    /// Per-component control index into each component's grid (bilinear, distribution MDP).
    Grid(Vec<usize>),
    /// Linear feedback `u = L x` (positive linear systems).
    Gain(DMatrix<f64>),
    /// Per-component index of the listed policy whose column is used (tabulated models).
    Selection(Vec<usize>),
    /// One control per Markov mode (deterministic equivalent of a jump problem).
    Modes(Vec<PolicyControl>),
    /// Anything else; the pair `(A, q)` carries all the information.
    Opaque,
}

/// A policy in the structured class together with its closed-loop pair `(A_mu, q_mu)`:
/// under the policy the state moves as `x -> A x` and pays `q'x` per stage.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuredPolicy {
    pub control: PolicyControl,
    a: DMatrix<f64>,
    q: DVector<f64>,
}

impl StructuredPolicy {
    pub fn new(control: PolicyControl, a: DMatrix<f64>, q: DVector<f64>) -> Result<Self> {
        let n = q.len();
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::dims("policy matrix A", n, if a.nrows() != n { a.nrows() } else { a.ncols() }));
        }
        let mut a = a;
        let mut q = q;
        let a_scale = a.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for v in a.iter_mut() {
            if *v < 0.0 && *v >= -ROUNDOFF_CLAMP * a_scale {
                *v = 0.0;
            }
        }
        let q_scale = q.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for v in q.iter_mut() {
            if *v < 0.0 && *v >= -ROUNDOFF_CLAMP * q_scale {
                *v = 0.0;
            }
        }
        crate::linalg::check_nonnegative_matrix(&a, "A")?;
        crate::linalg::check_nonnegative_vector(&q, "q")?;
        Ok(StructuredPolicy { control, a, q })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn q(&self) -> &DVector<f64> {
        &self.q
    }
}

/// `q_i + alpha * sum_j col_j c_j`, summed in index order.
///
/// Every oracle and `apply_g_mu` evaluate components through this one routine,
/// so an oracle's output matches `G_mu(c)` of its returned policy bit for bit.
#[inline]
pub(crate) fn component_value(q_i: f64, col: &[f64], c: &[f64], alpha: f64) -> f64 {
    let mut s = 0.0;
    for (a, x) in col.iter().zip(c) {
        s += a * x;
    }
    q_i + alpha * s
}

/// The solve engines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Engine {
    ValueIteration,
    AsyncValueIteration,
    PolicyIteration,
    OptimisticPolicyIteration,
    MathProgram,
}

impl Engine {
    pub const ALL: [Engine; 5] = [
        Engine::ValueIteration,
        Engine::AsyncValueIteration,
        Engine::PolicyIteration,
        Engine::OptimisticPolicyIteration,
        Engine::MathProgram,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Engine::ValueIteration => "vi",
            Engine::AsyncValueIteration => "async-vi",
            Engine::PolicyIteration => "pi",
            Engine::OptimisticPolicyIteration => "opi",
            Engine::MathProgram => "lp",
        }
    }

    pub fn parse(s: &str) -> Option<Engine> {
        Engine::ALL.into_iter().find(|e| e.name() == s)
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub c: CostVector,
    /// `||c - G(c)||_inf`
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub engine: Engine,
    pub c_star: CostVector,
    pub policy: StructuredPolicy,
    pub trace: Vec<TracePoint>,
    pub residual: f64,
    pub stable: bool,
    /// Perron root of `alpha * A` for the returned policy; NaN when it could not be certified.
    pub spectral_radius: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Non-fatal findings, e.g. zero entries in `c*`.
    pub diagnostics: Vec<String>,
}
