use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::operators::SemilinearModel;
use crate::types::{CostVector, Engine, SolveReport, TracePoint};

use super::vi::vi_loop;
use super::{finish_report, SolverConfig};

/// One step of an explicit schedule: the blocks updated at this time and, for
/// each, the per-component delay `t - tau_{l j}(t)` of the values it reads.
#[derive(Clone, Debug, PartialEq)]
pub struct AsyncStep {
    pub updates: Vec<(usize, Vec<usize>)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScheduleKind {
    /// Every block at every step with fresh values; reproduces synchronous VI.
    Synchronous,
    /// One block per step in cyclic order, reading values exactly `staleness` steps old.
    RoundRobin { staleness: usize },
    /// Each block updated with probability `update_prob` per step, and at least once
    /// every `window` steps; delays drawn uniformly from `0..=staleness`.
    Random { seed: u64, update_prob: f64, staleness: usize, window: usize },
    /// A user-supplied cycle of steps, repeated; delays must not exceed `staleness`.
    Explicit { staleness: usize, steps: Vec<AsyncStep> },
    /// One thread per block writing into shared memory. A write is discarded and
    /// recomputed when more than `staleness` block writes landed since its read began.
    Parallel { staleness: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct AsyncSchedule {
    /// Partition of `0..n`; singletons when absent.
    pub blocks: Option<Vec<Vec<usize>>>,
    pub kind: ScheduleKind,
    /// Steps between residual checks; one sweep's worth when absent.
    pub check_every: Option<usize>,
}

impl Default for AsyncSchedule {
    fn default() -> Self {
        AsyncSchedule { blocks: None, kind: ScheduleKind::Synchronous, check_every: None }
    }
}

impl AsyncSchedule {
    pub fn new(kind: ScheduleKind) -> Self {
        AsyncSchedule { kind, ..Default::default() }
    }

    pub fn with_blocks(mut self, blocks: Vec<Vec<usize>>) -> Self {
        self.blocks = Some(blocks);
        self
    }

    fn partition(&self, n: usize) -> Result<Vec<Vec<usize>>> {
        let blocks = match &self.blocks {
            None => return Ok((0..n).map(|i| vec![i]).collect()),
            Some(b) => b.clone(),
        };
        let mut seen = vec![false; n];
        for (l, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::Config(format!("schedule block {l} is empty")));
            }
            for &i in block {
                if i >= n {
                    return Err(Error::Config(format!("schedule block {l} contains index {i} >= n = {n}")));
                }
                if seen[i] {
                    return Err(Error::Config(format!("index {i} appears in more than one schedule block")));
                }
                seen[i] = true;
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Config(format!("schedule blocks do not cover index {i}")));
        }
        Ok(blocks)
    }

    fn staleness(&self) -> usize {
        match &self.kind {
            ScheduleKind::Synchronous => 0,
            ScheduleKind::RoundRobin { staleness }
            | ScheduleKind::Random { staleness, .. }
            | ScheduleKind::Explicit { staleness, .. }
            | ScheduleKind::Parallel { staleness } => *staleness,
        }
    }

    fn validate(&self, n: usize, blocks: &[Vec<usize>]) -> Result<()> {
        if self.check_every == Some(0) {
            return Err(Error::Config("check_every must be >= 1".into()));
        }
        match &self.kind {
            ScheduleKind::Random { update_prob, window, .. } => {
                if !(*update_prob > 0.0 && *update_prob <= 1.0) {
                    return Err(Error::Config(format!("update_prob {update_prob} is outside (0, 1]")));
                }
                if *window == 0 {
                    return Err(Error::Config("update window must be >= 1".into()));
                }
            }
            ScheduleKind::Explicit { staleness, steps } => {
                if steps.is_empty() {
                    return Err(Error::Config("explicit schedule has no steps".into()));
                }
                let mut updated = vec![false; blocks.len()];
                for (t, step) in steps.iter().enumerate() {
                    for (l, delays) in &step.updates {
                        if *l >= blocks.len() {
                            return Err(Error::Config(format!("step {t} updates unknown block {l}")));
                        }
                        if delays.len() != n {
                            return Err(Error::Config(format!("step {t}, block {l}: expected {n} delays, got {}", delays.len())));
                        }
                        if let Some(d) = delays.iter().find(|d| **d > *staleness) {
                            return Err(Error::Config(format!(
                                "step {t}, block {l}: delay {d} exceeds the staleness bound {staleness}"
                            )));
                        }
                        updated[*l] = true;
                    }
                }
                if let Some(l) = updated.iter().position(|u| !u) {
                    return Err(Error::Config(format!("block {l} is never updated in the schedule cycle")));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Totally asynchronous value iteration: blocks of `c` are updated from
/// possibly outdated copies of the other components.
pub fn solve_async_vi<M: SemilinearModel + ?Sized>(model: &M, config: &SolverConfig) -> Result<SolveReport> {
    let n = model.dim();
    config.validate(n)?;
    let schedule = &config.schedule;
    let blocks = schedule.partition(n)?;
    schedule.validate(n, &blocks)?;
    let mut c = config.initial_c.clone().unwrap_or_else(|| CostVector::zeros(n));

    let (trace, iterations) = match &schedule.kind {
        ScheduleKind::Synchronous => vi_loop(model, &mut c, config)?,
        ScheduleKind::Parallel { staleness } => run_parallel(model, &blocks, *staleness, &mut c, config)?,
        _ => simulate(model, &blocks, schedule, &mut c, config)?,
    };
    finish_report(model, Engine::AsyncValueIteration, c, trace, iterations, config, Vec::new())
}

/// Per-step update plan of a simulated schedule.
struct Planner<'a> {
    schedule: &'a AsyncSchedule,
    m: usize,
    n: usize,
    rng: Option<ChaCha8Rng>,
    last_update: Vec<usize>,
}

impl Planner<'_> {
    fn plan(&mut self, t: usize) -> Vec<(usize, Vec<usize>)> {
        let d_max = self.schedule.staleness().min(t);
        match &self.schedule.kind {
            ScheduleKind::RoundRobin { .. } => vec![(t % self.m, vec![d_max; self.n])],
            ScheduleKind::Random { update_prob, window, .. } => {
                let rng = self.rng.as_mut().expect("random schedule has a generator");
                let mut out = Vec::new();
                for l in 0..self.m {
                    let forced = t + 1 >= self.last_update[l] + window;
                    if forced || rng.gen_bool(*update_prob) {
                        let delays = (0..self.n).map(|_| rng.gen_range(0..=d_max)).collect();
                        out.push((l, delays));
                        self.last_update[l] = t + 1;
                    }
                }
                out
            }
            ScheduleKind::Explicit { steps, .. } => steps[t % steps.len()]
                .updates
                .iter()
                .map(|(l, d)| (*l, d.iter().map(|&x| x.min(t)).collect()))
                .collect(),
            ScheduleKind::Synchronous | ScheduleKind::Parallel { .. } => unreachable!("not simulated"),
        }
    }
}

fn simulate<M: SemilinearModel + ?Sized>(
    model: &M,
    blocks: &[Vec<usize>],
    schedule: &AsyncSchedule,
    c: &mut CostVector,
    config: &SolverConfig,
) -> Result<(Vec<TracePoint>, usize)> {
    let n = model.dim();
    let m = blocks.len();
    let d = schedule.staleness();
    let check_every = schedule.check_every.unwrap_or(match &schedule.kind {
        ScheduleKind::Explicit { steps, .. } => steps.len(),
        _ => m,
    });
    let rng = match &schedule.kind {
        ScheduleKind::Random { seed, .. } => Some(ChaCha8Rng::seed_from_u64(*seed)),
        _ => None,
    };
    let mut planner = Planner { schedule, m, n, rng, last_update: vec![0; m] };

    // history[0] is the current iterate, history[k] the one k steps earlier.
    let mut history: VecDeque<CostVector> = VecDeque::with_capacity(d + 1);
    history.push_front(c.clone());
    let mut trace = Vec::new();
    let mut t = 0usize;
    loop {
        if t % check_every == 0 || t >= config.max_iterations {
            let (g, _) = model.bellman(&history[0])?;
            let residual = history[0].max_abs_diff(&g);
            trace.push(TracePoint { iteration: t, c: history[0].clone(), residual });
            if residual <= config.tolerance || t >= config.max_iterations {
                break;
            }
        }
        let mut next = history[0].clone().into_vector();
        let mut cached: Option<(Vec<usize>, CostVector)> = None;
        for (l, delays) in planner.plan(t) {
            let fresh = match &cached {
                Some((key, g)) if *key == delays => g.clone(),
                _ => {
                    let x = DVector::from_iterator(n, (0..n).map(|j| history[delays[j]][j]));
                    let (g, _) = model.bellman(&CostVector::from_computed(x)?)?;
                    cached = Some((delays.clone(), g.clone()));
                    g
                }
            };
            for &i in &blocks[l] {
                next[i] = fresh[i];
            }
        }
        if history.len() > d {
            history.pop_back();
        }
        history.push_front(CostVector::from_computed(next)?);
        t += 1;
    }
    *c = history[0].clone();
    Ok((trace, t))
}

fn snapshot(values: &[AtomicU64]) -> CostVector {
    let v = DVector::from_iterator(values.len(), values.iter().map(|a| f64::from_bits(a.load(Ordering::Acquire))));
    CostVector::from_computed(v).expect("shared iterate stays nonnegative")
}

fn run_parallel<M: SemilinearModel + ?Sized>(
    model: &M,
    blocks: &[Vec<usize>],
    staleness: usize,
    c: &mut CostVector,
    config: &SolverConfig,
) -> Result<(Vec<TracePoint>, usize)> {
    let values: Vec<AtomicU64> = c.as_slice().iter().map(|v| AtomicU64::new(v.to_bits())).collect();
    let version = AtomicU64::new(0);
    let budget = config.max_iterations as u64;
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let mut trace = Vec::new();

    loop {
        let stop = AtomicBool::new(version.load(Ordering::Acquire) >= budget);
        std::thread::scope(|scope| {
            for block in blocks {
                let (values, version, stop, failure) = (&values, &version, &stop, &failure);
                scope.spawn(move || {
                    while !stop.load(Ordering::Acquire) {
                        let v0 = version.load(Ordering::Acquire);
                        let x = snapshot(values);
                        let g = match model.bellman(&x) {
                            Ok((g, _)) => g,
                            Err(e) => {
                                *failure.lock().expect("failure slot") = Some(e);
                                stop.store(true, Ordering::Release);
                                return;
                            }
                        };
                        if version.load(Ordering::Acquire) - v0 > staleness as u64 {
                            continue;
                        }
                        if block.iter().all(|&i| g[i] == x[i]) {
                            // Nothing new to publish until another block moves.
                            std::thread::yield_now();
                            continue;
                        }
                        for &i in block {
                            values[i].store(g[i].to_bits(), Ordering::Release);
                        }
                        if version.fetch_add(1, Ordering::AcqRel) + 1 >= budget {
                            stop.store(true, Ordering::Release);
                        }
                        std::thread::yield_now();
                    }
                });
            }
            while !stop.load(Ordering::Acquire) {
                let x = snapshot(&values);
                match model.bellman(&x) {
                    Ok((g, _)) if x.max_abs_diff(&g) <= config.tolerance => stop.store(true, Ordering::Release),
                    Ok(_) => std::thread::yield_now(),
                    Err(e) => {
                        *failure.lock().expect("failure slot") = Some(e);
                        stop.store(true, Ordering::Release);
                    }
                }
            }
        });
        if let Some(e) = failure.lock().expect("failure slot").take() {
            return Err(e);
        }
        let x = snapshot(&values);
        let (g, _) = model.bellman(&x)?;
        let residual = x.max_abs_diff(&g);
        let done = version.load(Ordering::Acquire);
        trace.push(TracePoint { iteration: done as usize, c: x.clone(), residual });
        if residual <= config.tolerance || done >= budget {
            *c = x;
            return Ok((trace, done as usize));
        }
    }
}
