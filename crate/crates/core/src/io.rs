//! Problem, config and result files (TOML), plus the statistics CSV.
//!
//! Matrices are nested arrays in row-major order. Every problem file starts with
//! `version`, `kind` and `alpha`; optional `[solver]` and `[rollout]` tables
//! override the run settings.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::algorithms::format_f64;
use crate::error::{Error, Result};
use crate::markovjump::{JumpData, JumpProblem, JumpTabulatedPolicy};
use crate::models::{
    BilinearControl, BilinearModel, DistributionControl, DistributionMdpModel, Model, PositiveLinearModel, TabulatedModel,
};
use crate::operators::SemilinearModel;
use crate::stochastic::{RolloutStats, StochasticData, StochasticModel, ThetaPositiveLinear};
use crate::types::{PolicyControl, SolveReport, StructuredPolicy};

pub const FORMAT_VERSION: u32 = 1;

type Mat = Vec<Vec<f64>>;

/// Optional solver overrides, in a problem file or a config file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engine: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    /// Lookahead schedule of optimistic PI; the last entry repeats.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lookahead: Option<Vec<usize>>,
    /// Delay bound of the asynchronous engine's random schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub staleness: Option<usize>,
}

impl SolverSection {
    /// Fields set here win over `base`.
    pub fn over(&self, base: &SolverSection) -> SolverSection {
        SolverSection {
            engine: self.engine.clone().or_else(|| base.engine.clone()),
            tolerance: self.tolerance.or(base.tolerance),
            max_iterations: self.max_iterations.or(base.max_iterations),
            lookahead: self.lookahead.clone().or_else(|| base.lookahead.clone()),
            staleness: self.staleness.or(base.staleness),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// Initial mode of jump problems.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl RolloutSection {
    pub fn over(&self, base: &RolloutSection) -> RolloutSection {
        RolloutSection {
            x0: self.x0.clone().or_else(|| base.x0.clone()),
            theta0: self.theta0.or(base.theta0),
            paths: self.paths.or(base.paths),
            horizon: self.horizon.or(base.horizon),
            seed: self.seed.or(base.seed),
        }
    }
}

/// Config file: defaults for runs, below problem-file overrides and flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub rollout: RolloutSection,
}

#[derive(Clone, Debug)]
pub enum Problem {
    Deterministic(Model),
    Stochastic(StochasticModel),
    Jump(JumpProblem),
}

impl Problem {
    pub fn kind(&self) -> &'static str {
        match self {
            Problem::Deterministic(Model::Bilinear(_)) => "bilinear",
            Problem::Deterministic(Model::PositiveLinear(_)) => "positive_linear",
            Problem::Deterministic(Model::DistributionMdp(_)) => "distribution_mdp",
            Problem::Deterministic(Model::Tabulated(_)) => "tabulated",
            Problem::Stochastic(_) => "stochastic_positive_linear",
            Problem::Jump(p) => match p.data() {
                JumpData::PositiveLinear { .. } => "jump_positive_linear",
                JumpData::Tabulated { .. } => "jump_tabulated",
            },
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            Problem::Deterministic(m) => m.alpha(),
            Problem::Stochastic(m) => m.alpha(),
            Problem::Jump(p) => p.alpha(),
        }
    }

    /// Dimension of the state `x` (per mode for jump problems).
    pub fn state_dim(&self) -> usize {
        match self {
            Problem::Deterministic(m) => m.dim(),
            Problem::Stochastic(m) => m.dim(),
            Problem::Jump(p) => p.state_dim(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LoadedProblem {
    pub problem: Problem,
    pub solver: SolverSection,
    pub rollout: RolloutSection,
}

macro_rules! problem_doc {
    ($name:ident { $($field:ident : $ty:ty),* $(,)? }) => {
        #[derive(Clone, Debug, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        struct $name {
            version: u32,
            kind: String,
            alpha: f64,
            $($field: $ty,)*
            #[serde(default, skip_serializing_if = "Option::is_none")]
            solver: Option<SolverSection>,
            #[serde(default, skip_serializing_if = "Option::is_none")]
            rollout: Option<RolloutSection>,
        }
    };
}

problem_doc!(BilinearDoc { a: Mat, q: Vec<f64>, components: Vec<GridDoc<BilinearControlDoc>> });
problem_doc!(PositiveLinearDoc { a: Mat, b: Mat, q: Vec<f64>, r: Vec<f64>, h: Mat });
problem_doc!(DistributionDoc { components: Vec<GridDoc<DistributionControlDoc>> });
problem_doc!(TabulatedDoc { policies: Vec<PairDoc> });
problem_doc!(StochasticDoc { h: Mat, theta: Vec<ThetaDoc> });
problem_doc!(JumpPlDoc { p: Mat, modes: Vec<PlModeDoc> });
problem_doc!(JumpTabDoc { p: Mat, modes: Vec<JumpModeDoc> });

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridDoc<C> {
    controls: Vec<C>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BilinearControlDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    f: Vec<f64>,
    g: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistributionControlDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    p: Vec<f64>,
    g: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairDoc {
    a: Mat,
    q: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThetaDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    prob: f64,
    a: Mat,
    b: Mat,
    q: Vec<f64>,
    r: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlModeDoc {
    a: Mat,
    b: Mat,
    q: Vec<f64>,
    r: Vec<f64>,
    h: Mat,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JumpModeDoc {
    policies: Vec<JumpPolicyDoc>,
}

/// `a[w]`, `q[w]`: the pair used when the next mode is `w`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JumpPolicyDoc {
    a: Vec<Mat>,
    q: Vec<Vec<f64>>,
}

/// Row-major nested array to matrix. An empty list means zero rows of width `empty_cols`.
fn matrix(field: &str, rows: &[Vec<f64>], empty_cols: usize) -> Result<DMatrix<f64>> {
    let Some(first) = rows.first() else {
        return Ok(DMatrix::zeros(0, empty_cols));
    };
    let ncols = first.len();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(Error::dims(format!("{field}[{i}] (row length)"), ncols, row.len()));
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("{field}[{i}][{j}]"), "must be finite"));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn vector(field: &str, v: &[f64]) -> Result<DVector<f64>> {
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("{field}[{i}]"), "must be finite"));
    }
    Ok(DVector::from_column_slice(v))
}

fn rows_of(m: &DMatrix<f64>) -> Mat {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn positive_linear(prefix: &str, a: &Mat, b: &Mat, q: &[f64], r: &[f64], h: &Mat, alpha: f64) -> Result<PositiveLinearModel> {
    let f = |s: &str| if prefix.is_empty() { s.to_string() } else { format!("{prefix}.{s}") };
    let n = q.len();
    let m = r.len();
    let model = PositiveLinearModel::new(
        matrix(&f("a"), a, n)?,
        matrix(&f("b"), b, m)?,
        vector(&f("q"), q)?,
        vector(&f("r"), r)?,
        matrix(&f("h"), h, n)?,
        alpha,
    );
    if prefix.is_empty() {
        model
    } else {
        model.map_err(|e| e.in_field(prefix))
    }
}

fn parse_doc<T: for<'de> Deserialize<'de>>(text: &str, origin: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Parse { path: origin.to_string(), message: e.to_string() })
}

/// Parses and validates a problem document.
pub fn parse_problem(text: &str, origin: &str) -> Result<LoadedProblem> {
    let table: toml::Table = parse_doc(text, origin)?;
    let version = match table.get("version") {
        Some(toml::Value::Integer(v)) => *v,
        Some(_) => return Err(Error::invalid("version", "must be an integer")),
        None => return Err(Error::invalid("version", "missing")),
    };
    if version != FORMAT_VERSION as i64 {
        return Err(Error::UnsupportedVersion { found: version.clamp(0, u32::MAX as i64) as u32, supported: FORMAT_VERSION });
    }
    let kind = match table.get("kind") {
        Some(toml::Value::String(k)) => k.clone(),
        Some(_) => return Err(Error::invalid("kind", "must be a string")),
        None => return Err(Error::invalid("kind", "missing")),
    };
    let (problem, solver, rollout) = match kind.as_str() {
        "bilinear" => {
            let d: BilinearDoc = parse_doc(text, origin)?;
            let n = d.q.len();
            let components = d
                .components
                .iter()
                .enumerate()
                .map(|(i, g)| {
                    g.controls
                        .iter()
                        .enumerate()
                        .map(|(k, u)| {
                            Ok(BilinearControl {
                                label: u.label.clone(),
                                f: vector(&format!("components[{i}].controls[{k}].f"), &u.f)?,
                                g: u.g,
                            })
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            let m = BilinearModel::new(matrix("a", &d.a, n)?, vector("q", &d.q)?, components, d.alpha)?;
            (Problem::Deterministic(m.into()), d.solver, d.rollout)
        }
        "positive_linear" => {
            let d: PositiveLinearDoc = parse_doc(text, origin)?;
            let m = positive_linear("", &d.a, &d.b, &d.q, &d.r, &d.h, d.alpha)?;
            (Problem::Deterministic(m.into()), d.solver, d.rollout)
        }
        "distribution_mdp" => {
            let d: DistributionDoc = parse_doc(text, origin)?;
            let components = d
                .components
                .iter()
                .enumerate()
                .map(|(i, g)| {
                    g.controls
                        .iter()
                        .enumerate()
                        .map(|(k, u)| {
                            Ok(DistributionControl {
                                label: u.label.clone(),
                                p: vector(&format!("components[{i}].controls[{k}].p"), &u.p)?,
                                g: u.g,
                            })
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            let m = DistributionMdpModel::new(components, d.alpha)?;
            (Problem::Deterministic(m.into()), d.solver, d.rollout)
        }
        "tabulated" => {
            let d: TabulatedDoc = parse_doc(text, origin)?;
            let pairs = d
                .policies
                .iter()
                .enumerate()
                .map(|(k, p)| {
                    Ok((matrix(&format!("policies[{k}].a"), &p.a, p.q.len())?, vector(&format!("policies[{k}].q"), &p.q)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let m = TabulatedModel::new(pairs, d.alpha)?;
            (Problem::Deterministic(m.into()), d.solver, d.rollout)
        }
        "stochastic_positive_linear" => {
            let d: StochasticDoc = parse_doc(text, origin)?;
            let n = d.theta.first().map_or(0, |t| t.q.len());
            let h = matrix("h", &d.h, n)?;
            let mut labels = Vec::new();
            let mut probs = Vec::new();
            let mut per_theta = Vec::new();
            for (t, th) in d.theta.iter().enumerate() {
                let f = |s: &str| format!("theta[{t}].{s}");
                labels.push(th.label.clone().unwrap_or_else(|| format!("theta{t}")));
                probs.push(th.prob);
                per_theta.push(ThetaPositiveLinear {
                    a: matrix(&f("a"), &th.a, n)?,
                    b: matrix(&f("b"), &th.b, h.nrows())?,
                    q: vector(&f("q"), &th.q)?,
                    r: vector(&f("r"), &th.r)?,
                });
            }
            let m = StochasticModel::new(labels, probs, StochasticData::PositiveLinear { h, per_theta }, d.alpha)
                .map_err(rename_theta_fields)?;
            (Problem::Stochastic(m), d.solver, d.rollout)
        }
        "jump_positive_linear" => {
            let d: JumpPlDoc = parse_doc(text, origin)?;
            let r = d.p.len();
            let modes = d
                .modes
                .iter()
                .enumerate()
                .map(|(t, m)| positive_linear(&format!("modes[{t}]"), &m.a, &m.b, &m.q, &m.r, &m.h, d.alpha))
                .collect::<Result<Vec<_>>>()?;
            let p = JumpProblem::new(matrix("p", &d.p, r)?, JumpData::PositiveLinear { modes }, d.alpha)?;
            (Problem::Jump(p), d.solver, d.rollout)
        }
        "jump_tabulated" => {
            let d: JumpTabDoc = parse_doc(text, origin)?;
            let r = d.p.len();
            let modes = d
                .modes
                .iter()
                .enumerate()
                .map(|(t, m)| {
                    m.policies
                        .iter()
                        .enumerate()
                        .map(|(k, pol)| {
                            let field = format!("modes[{t}].policies[{k}]");
                            Ok(JumpTabulatedPolicy {
                                a: pol
                                    .a
                                    .iter()
                                    .enumerate()
                                    .map(|(w, a)| matrix(&format!("{field}.a[{w}]"), a, 0))
                                    .collect::<Result<_>>()?,
                                q: pol
                                    .q
                                    .iter()
                                    .enumerate()
                                    .map(|(w, q)| vector(&format!("{field}.q[{w}]"), q))
                                    .collect::<Result<_>>()?,
                            })
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            let p = JumpProblem::new(matrix("p", &d.p, r)?, JumpData::Tabulated { modes }, d.alpha)?;
            (Problem::Jump(p), d.solver, d.rollout)
        }
        other => {
            return Err(Error::invalid(
                "kind",
                format!(
                    "unknown kind `{other}` (expected bilinear, positive_linear, distribution_mdp, tabulated, \
                     stochastic_positive_linear, jump_positive_linear or jump_tabulated)"
                ),
            ))
        }
    };
    Ok(LoadedProblem { problem, solver: solver.unwrap_or_default(), rollout: rollout.unwrap_or_default() })
}

// The stochastic model names its fields after its own layout; files use `theta[t]`.
fn rename_theta_fields(e: Error) -> Error {
    let fix = |s: String| s.replace("per_theta", "theta").replace("theta_probs", "theta[].prob");
    match e {
        Error::Invalid { field, reason } => Error::Invalid { field: fix(field), reason },
        Error::DimensionMismatch { context, expected, actual } => Error::DimensionMismatch { context: fix(context), expected, actual },
        other => other,
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

pub fn load_problem(path: &Path) -> Result<LoadedProblem> {
    parse_problem(&read(path)?, &path.display().to_string())
}

pub fn load_config(path: &Path) -> Result<ConfigFile> {
    parse_doc(&read(path)?, &path.display().to_string())
}

fn to_toml<T: Serialize>(doc: &T) -> Result<String> {
    toml::to_string(doc).map_err(|e| Error::Parse { path: "<serializer>".into(), message: e.to_string() })
}

fn problem_table(lp: &LoadedProblem) -> Result<toml::Table> {
    let version = FORMAT_VERSION;
    let kind = lp.problem.kind().to_string();
    let alpha = lp.problem.alpha();
    let solver = (lp.solver != SolverSection::default()).then(|| lp.solver.clone());
    let rollout = (lp.rollout != RolloutSection::default()).then(|| lp.rollout.clone());
    let table = |v: std::result::Result<toml::Table, toml::ser::Error>| {
        v.map_err(|e| Error::Parse { path: "<serializer>".into(), message: e.to_string() })
    };
    match &lp.problem {
        Problem::Deterministic(Model::Bilinear(m)) => table(toml::Table::try_from(BilinearDoc {
            version,
            kind,
            alpha,
            a: rows_of(m.a()),
            q: m.q().iter().copied().collect(),
            components: m
                .components()
                .iter()
                .map(|g| GridDoc {
                    controls: g
                        .iter()
                        .map(|u| BilinearControlDoc { label: u.label.clone(), f: u.f.iter().copied().collect(), g: u.g })
                        .collect(),
                })
                .collect(),
            solver,
            rollout,
        })),
        Problem::Deterministic(Model::PositiveLinear(m)) => table(toml::Table::try_from(PositiveLinearDoc {
            version,
            kind,
            alpha,
            a: rows_of(m.a()),
            b: rows_of(m.b()),
            q: m.q().iter().copied().collect(),
            r: m.r().iter().copied().collect(),
            h: rows_of(m.h()),
            solver,
            rollout,
        })),
        Problem::Deterministic(Model::DistributionMdp(m)) => table(toml::Table::try_from(DistributionDoc {
            version,
            kind,
            alpha,
            components: m
                .components()
                .iter()
                .map(|g| GridDoc {
                    controls: g
                        .iter()
                        .map(|u| DistributionControlDoc { label: u.label.clone(), p: u.p.iter().copied().collect(), g: u.g })
                        .collect(),
                })
                .collect(),
            solver,
            rollout,
        })),
        Problem::Deterministic(Model::Tabulated(m)) => table(toml::Table::try_from(TabulatedDoc {
            version,
            kind,
            alpha,
            policies: m.listed().iter().map(|p| PairDoc { a: rows_of(p.a()), q: p.q().iter().copied().collect() }).collect(),
            solver,
            rollout,
        })),
        Problem::Stochastic(m) => {
            let StochasticData::PositiveLinear { h, per_theta } = m.data() else {
                return Err(Error::Refused("only stochastic positive linear models have a file format".into()));
            };
            table(toml::Table::try_from(StochasticDoc {
                version,
                kind,
                alpha,
                h: rows_of(h),
                theta: per_theta
                    .iter()
                    .enumerate()
                    .map(|(t, d)| ThetaDoc {
                        label: Some(m.labels()[t].clone()),
                        prob: m.probs()[t],
                        a: rows_of(&d.a),
                        b: rows_of(&d.b),
                        q: d.q.iter().copied().collect(),
                        r: d.r.iter().copied().collect(),
                    })
                    .collect(),
                solver,
                rollout,
            }))
        }
        Problem::Jump(p) => match p.data() {
            JumpData::PositiveLinear { modes } => table(toml::Table::try_from(JumpPlDoc {
                version,
                kind,
                alpha,
                p: rows_of(p.transition()),
                modes: modes
                    .iter()
                    .map(|m| PlModeDoc {
                        a: rows_of(m.a()),
                        b: rows_of(m.b()),
                        q: m.q().iter().copied().collect(),
                        r: m.r().iter().copied().collect(),
                        h: rows_of(m.h()),
                    })
                    .collect(),
                solver,
                rollout,
            })),
            JumpData::Tabulated { modes } => table(toml::Table::try_from(JumpTabDoc {
                version,
                kind,
                alpha,
                p: rows_of(p.transition()),
                modes: modes
                    .iter()
                    .map(|list| JumpModeDoc {
                        policies: list
                            .iter()
                            .map(|pol| JumpPolicyDoc {
                                a: pol.a.iter().map(rows_of).collect(),
                                q: pol.q.iter().map(|q| q.iter().copied().collect()).collect(),
                            })
                            .collect(),
                    })
                    .collect(),
                solver,
                rollout,
            })),
        },
    }
}

/// Serializes a problem so that [`parse_problem`] reproduces it exactly.
pub fn write_problem(lp: &LoadedProblem) -> Result<String> {
    to_toml(&problem_table(lp)?)
}

pub fn save_problem(path: &Path, lp: &LoadedProblem) -> Result<()> {
    write_file(path, &write_problem(lp)?)
}

/// Serialized policy control.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlDoc {
    Grid(Vec<usize>),
    Gain(Mat),
    Selection(Vec<usize>),
    Modes(Vec<ControlDoc>),
    Opaque(bool),
}

impl From<&PolicyControl> for ControlDoc {
    fn from(c: &PolicyControl) -> Self {
        match c {
            PolicyControl::Grid(v) => ControlDoc::Grid(v.clone()),
            PolicyControl::Gain(l) => ControlDoc::Gain(rows_of(l)),
            PolicyControl::Selection(v) => ControlDoc::Selection(v.clone()),
            PolicyControl::Modes(m) => ControlDoc::Modes(m.iter().map(ControlDoc::from).collect()),
            PolicyControl::Opaque => ControlDoc::Opaque(true),
        }
    }
}

impl ControlDoc {
    pub fn to_control(&self) -> Result<PolicyControl> {
        Ok(match self {
            ControlDoc::Grid(v) => PolicyControl::Grid(v.clone()),
            ControlDoc::Gain(rows) => PolicyControl::Gain(matrix("policy.control.gain", rows, 0)?),
            ControlDoc::Selection(v) => PolicyControl::Selection(v.clone()),
            ControlDoc::Modes(m) => PolicyControl::Modes(m.iter().map(|c| c.to_control()).collect::<Result<_>>()?),
            ControlDoc::Opaque(_) => PolicyControl::Opaque,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyDoc {
    pub control: ControlDoc,
    pub a: Mat,
    pub q: Vec<f64>,
}

/// Output of `solve`. Embeds the problem so rollouts need nothing else.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultFile {
    pub version: u32,
    pub kind: String,
    pub engine: String,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub spectral_radius: f64,
    pub stable: bool,
    /// Stacked over modes for jump problems.
    pub c_star: Vec<f64>,
    #[serde(default)]
    pub diagnostics: Vec<String>,
    pub policy: PolicyDoc,
    pub problem: toml::Table,
}

impl ResultFile {
    pub fn new(report: &SolveReport, problem: &LoadedProblem) -> Result<Self> {
        Ok(ResultFile {
            version: FORMAT_VERSION,
            kind: problem.problem.kind().to_string(),
            engine: report.engine.name().to_string(),
            converged: report.converged,
            iterations: report.iterations,
            residual: report.residual,
            spectral_radius: report.spectral_radius,
            stable: report.stable,
            c_star: report.c_star.to_vec(),
            diagnostics: report.diagnostics.clone(),
            policy: PolicyDoc {
                control: ControlDoc::from(&report.policy.control),
                a: rows_of(report.policy.a()),
                q: report.policy.q().iter().copied().collect(),
            },
            problem: problem_table(problem)?,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        to_toml(self)
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let r: ResultFile = parse_doc(text, origin)?;
        if r.version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion { found: r.version, supported: FORMAT_VERSION });
        }
        Ok(r)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read(path)?, &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_toml()?)
    }

    /// The embedded problem.
    pub fn problem(&self) -> Result<LoadedProblem> {
        parse_problem(&to_toml(&self.problem)?, "result file [problem]")
    }

    pub fn policy(&self) -> Result<StructuredPolicy> {
        StructuredPolicy::new(
            self.policy.control.to_control()?,
            matrix("policy.a", &self.policy.a, self.policy.q.len())?,
            vector("policy.q", &self.policy.q)?,
        )
    }
}

pub const STATS_HEADER: &str = "mean_cost,std_error,num_paths,horizon,seed,rng,predicted_cost";

/// One-row statistics CSV; `predicted` is the solved cost `c*'x0` at the start state.
pub fn write_stats_csv<W: Write>(stats: &RolloutStats, predicted: f64, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{STATS_HEADER}")?;
    writeln!(
        out,
        "{},{},{},{},{},{},{}",
        format_f64(stats.mean_cost),
        format_f64(stats.std_error),
        stats.num_paths,
        stats.horizon,
        stats.seed,
        stats.rng,
        format_f64(predicted)
    )
}
