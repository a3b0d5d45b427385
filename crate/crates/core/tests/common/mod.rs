//! Seeded random instances shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semilinear::algorithms::find_stable_policy;
use semilinear::markovjump::{JumpData, JumpProblem, JumpTabulatedPolicy};
use semilinear::models::{
    BilinearControl, BilinearModel, DistributionControl, DistributionMdpModel, Model, PositiveLinearModel, TabulatedModel,
};
use semilinear::stochastic::{StochasticData, StochasticModel, ThetaPositiveLinear};

pub const FAMILIES: [&str; 4] = ["bilinear", "positive_linear", "distribution_mdp", "tabulated"];

/// Per-stage control combinations stay under the oracle budget.
pub const MAX_COMBINATIONS: u64 = 10_000;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn nonneg_matrix(rng: &mut ChaCha8Rng, n: usize, m: usize, density: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, m, |_, _| if rng.gen_bool(density) { rng.gen_range(0.0..1.0) } else { 0.0 })
}

/// Scales columns so each sums to at most `target`.
fn cap_column_sums(a: &mut DMatrix<f64>, target: f64) {
    for mut col in a.column_iter_mut() {
        let s: f64 = col.iter().sum();
        if s > target {
            col *= target / s;
        }
    }
}

fn probability_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    let mut p = DVector::from_fn(n, |_, _| if rng.gen_bool(0.7) { rng.gen_range(0.0..1.0) } else { 0.0 });
    if p.sum() == 0.0 {
        p[rng.gen_range(0..n)] = 1.0;
    }
    let s = p.sum();
    p / s
}

/// Grid sizes with product within the oracle budget.
fn grid_sizes(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut sizes: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=8)).collect();
    while sizes.iter().map(|&s| s as u64).product::<u64>() > MAX_COMBINATIONS {
        let i = sizes.iter().enumerate().max_by_key(|(_, s)| **s).unwrap().0;
        sizes[i] -= 1;
    }
    sizes
}

/// Every tenth instance has a state whose stage cost is zero under every control.
fn zero_cost_state(seed: u64, n: usize) -> Option<usize> {
    (seed % 10 == 9).then_some(seed as usize % n)
}

pub fn bilinear(seed: u64) -> BilinearModel {
    let mut r = rng(seed ^ 0xB111);
    let n = r.gen_range(1..=5);
    let alpha = r.gen_range(0.5..0.95);
    let mut a = nonneg_matrix(&mut r, n, n, 0.6);
    cap_column_sums(&mut a, r.gen_range(0.3..1.0));
    let mut q = DVector::from_fn(n, |_, _| r.gen_range(0.05..1.0));
    let zero = zero_cost_state(seed, n);
    if let Some(i) = zero {
        q[i] = 0.0;
    }
    let sizes = grid_sizes(&mut r, n);
    let components = (0..n)
        .map(|i| {
            (0..sizes[i])
                .map(|k| {
                    // cheaper controls push more mass forward; control 0 adds nothing
                    let spread = if k == 0 { 0.0 } else { r.gen_range(0.0..0.8) };
                    let f = DVector::from_fn(n, |_, _| if r.gen_bool(0.5) { spread * r.gen_range(0.0..1.0) } else { 0.0 });
                    let g = if Some(i) == zero { 0.0 } else { (0.8 - spread) * r.gen_range(0.0..1.0) };
                    BilinearControl::new(f, g)
                })
                .collect()
        })
        .collect();
    BilinearModel::new(a, q, components, alpha).expect("generated bilinear model is valid")
}

pub fn positive_linear(seed: u64) -> PositiveLinearModel {
    let mut r = rng(seed ^ 0x9111);
    let n = r.gen_range(1..=5);
    let m = r.gen_range(0..=3);
    let alpha = r.gen_range(0.5..0.95);
    let mut a = nonneg_matrix(&mut r, n, n, 0.7);
    for i in 0..n {
        a[(i, i)] += 0.05;
    }
    cap_column_sums(&mut a, r.gen_range(0.3..1.2));
    let h = nonneg_matrix(&mut r, m, n, 0.6);
    let mut b = DMatrix::from_fn(n, m, |_, _| r.gen_range(-1.0..1.0));
    // keep A - |B| H >= 0
    let mut scale: f64 = 1.0;
    let abs_bh = b.abs() * &h;
    for i in 0..n {
        for j in 0..n {
            if abs_bh[(i, j)] > 0.0 {
                scale = scale.min(0.9 * a[(i, j)] / abs_bh[(i, j)]);
            }
        }
    }
    b *= scale;
    let mut q = DVector::from_fn(n, |_, _| r.gen_range(0.05..1.0));
    if let Some(i) = zero_cost_state(seed, n) {
        q[i] = 0.0;
    }
    let mut rr = DVector::from_fn(m, |_, _| r.gen_range(-1.0..1.0));
    // keep q - H'|r| >= 0
    let mut rs: f64 = 1.0;
    let ht_r = h.transpose() * rr.abs();
    for i in 0..n {
        if ht_r[i] > 0.0 {
            rs = rs.min(0.9 * q[i] / ht_r[i]);
        }
    }
    rr *= rs;
    PositiveLinearModel::new(a, b, q, rr, h, alpha).expect("generated positive linear model is valid")
}

pub fn distribution_mdp(seed: u64) -> DistributionMdpModel {
    let mut r = rng(seed ^ 0xD157);
    let n = r.gen_range(1..=5);
    let alpha = r.gen_range(0.5..0.95);
    let sizes = grid_sizes(&mut r, n);
    let zero = zero_cost_state(seed, n);
    let components = (0..n)
        .map(|i| {
            (0..sizes[i])
                .map(|_| {
                    let g = if Some(i) == zero { 0.0 } else { r.gen_range(0.05..1.0) };
                    DistributionControl::new(probability_vector(&mut r, n), g)
                })
                .collect()
        })
        .collect();
    DistributionMdpModel::new(components, alpha).expect("generated distribution model is valid")
}

pub fn tabulated(seed: u64) -> TabulatedModel {
    let mut r = rng(seed ^ 0x7AB0);
    let n = r.gen_range(1..=5);
    let alpha = r.gen_range(0.5..0.95);
    let mut k = r.gen_range(1..=8usize);
    while (k as u64).pow(n as u32) > MAX_COMBINATIONS {
        k -= 1;
    }
    let zero = zero_cost_state(seed, n);
    let pairs = (0..k)
        .map(|p| {
            let mut a = nonneg_matrix(&mut r, n, n, 0.6);
            // the first policy is stable; later ones may not be
            cap_column_sums(&mut a, if p == 0 { 0.9 } else { r.gen_range(0.3..1.6) });
            let mut q = DVector::from_fn(n, |_, _| r.gen_range(0.05..1.0));
            if let Some(i) = zero {
                q[i] = 0.0;
            }
            (a, q)
        })
        .collect();
    TabulatedModel::new(pairs, alpha).expect("generated tabulated model is valid")
}

pub fn instance(family: &str, seed: u64) -> Model {
    match family {
        "bilinear" => bilinear(seed).into(),
        "positive_linear" => positive_linear(seed).into(),
        "distribution_mdp" => distribution_mdp(seed).into(),
        "tabulated" => tabulated(seed).into(),
        other => panic!("unknown family {other}"),
    }
}

/// First `count` instances of a family that admit a stable policy.
pub fn corpus(family: &str, count: usize) -> Vec<(u64, Model)> {
    let mut out = Vec::with_capacity(count);
    let mut seed = 0u64;
    while out.len() < count {
        let m = instance(family, seed);
        if find_stable_policy(&m).is_ok() {
            out.push((seed, m));
        }
        seed += 1;
        assert!(seed < 100 * count as u64, "generator for {family} rarely yields feasible instances");
    }
    out
}

pub fn stochastic_positive_linear(seed: u64) -> StochasticModel {
    let mut r = rng(seed ^ 0x5700);
    let n = r.gen_range(1..=4);
    let m = r.gen_range(0..=2);
    let k = r.gen_range(1..=3);
    let alpha = r.gen_range(0.5..0.9);
    let h = nonneg_matrix(&mut r, m, n, 0.6);
    let mut per_theta = Vec::new();
    for _ in 0..k {
        let mut a = nonneg_matrix(&mut r, n, n, 0.7);
        for i in 0..n {
            a[(i, i)] += 0.05;
        }
        cap_column_sums(&mut a, r.gen_range(0.3..1.0));
        let mut b = DMatrix::from_fn(n, m, |_, _| r.gen_range(-1.0..1.0));
        let abs_bh = b.abs() * &h;
        let mut s: f64 = 1.0;
        for i in 0..n {
            for j in 0..n {
                if abs_bh[(i, j)] > 0.0 {
                    s = s.min(0.9 * a[(i, j)] / abs_bh[(i, j)]);
                }
            }
        }
        b *= s;
        let q = DVector::from_fn(n, |_, _| r.gen_range(0.05..1.0));
        let mut rr = DVector::from_fn(m, |_, _| r.gen_range(-1.0..1.0));
        let ht_r = h.transpose() * rr.abs();
        let mut rs: f64 = 1.0;
        for i in 0..n {
            if ht_r[i] > 0.0 {
                rs = rs.min(0.9 * q[i] / ht_r[i]);
            }
        }
        rr *= rs;
        per_theta.push(ThetaPositiveLinear { a, b, q, r: rr });
    }
    let probs = probability_vector(&mut r, k).iter().copied().collect::<Vec<_>>();
    // drop zero-probability values by bumping them
    let probs: Vec<f64> = {
        let bumped: Vec<f64> = probs.iter().map(|p| p + 0.05).collect();
        let s: f64 = bumped.iter().sum();
        bumped.iter().map(|p| p / s).collect()
    };
    let labels = (0..k).map(|t| format!("theta{t}")).collect();
    StochasticModel::new(labels, probs, StochasticData::PositiveLinear { h, per_theta }, alpha)
        .expect("generated stochastic model is valid")
}

/// Random `r x r` row-stochastic matrix.
pub fn transition(r_: &mut ChaCha8Rng, r: usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(r, r);
    for t in 0..r {
        let row = probability_vector(r_, r);
        p.row_mut(t).copy_from(&row.transpose());
    }
    p
}

pub fn jump_tabulated(seed: u64, r: usize, n: usize, identity: bool) -> JumpProblem {
    let mut g = rng(seed ^ 0x1A7B);
    let alpha = g.gen_range(0.5..0.9);
    let p = if identity { DMatrix::identity(r, r) } else { transition(&mut g, r) };
    let modes = (0..r)
        .map(|_| {
            let k = g.gen_range(1..=4);
            (0..k)
                .map(|_| JumpTabulatedPolicy {
                    a: (0..r)
                        .map(|_| {
                            let mut a = nonneg_matrix(&mut g, n, n, 0.7);
                            cap_column_sums(&mut a, 1.0);
                            a
                        })
                        .collect(),
                    q: (0..r).map(|_| DVector::from_fn(n, |_, _| g.gen_range(0.05..1.0))).collect(),
                })
                .collect()
        })
        .collect();
    JumpProblem::new(p, JumpData::Tabulated { modes }, alpha).expect("generated jump problem is valid")
}

pub fn jump_positive_linear(seed: u64, r: usize, n: usize, identity: bool) -> JumpProblem {
    let mut g = rng(seed ^ 0x1A79);
    let alpha = g.gen_range(0.5..0.9);
    let p = if identity { DMatrix::identity(r, r) } else { transition(&mut g, r) };
    let modes = (0..r)
        .map(|_| {
            let m = g.gen_range(0..=2);
            let mut a = nonneg_matrix(&mut g, n, n, 0.7);
            for i in 0..n {
                a[(i, i)] += 0.05;
            }
            cap_column_sums(&mut a, 0.5);
            let h = nonneg_matrix(&mut g, m, n, 0.6);
            let mut b = DMatrix::from_fn(n, m, |_, _| g.gen_range(-1.0..1.0));
            let abs_bh = b.abs() * &h;
            let mut s: f64 = 1.0;
            for i in 0..n {
                for j in 0..n {
                    if abs_bh[(i, j)] > 0.0 {
                        s = s.min(0.9 * a[(i, j)] / abs_bh[(i, j)]);
                    }
                }
            }
            b *= s;
            let q = DVector::from_fn(n, |_, _| g.gen_range(0.05..1.0));
            let mut rr = DVector::from_fn(m, |_, _| g.gen_range(-1.0..1.0));
            let ht_r = h.transpose() * rr.abs();
            let mut rs: f64 = 1.0;
            for i in 0..n {
                if ht_r[i] > 0.0 {
                    rs = rs.min(0.9 * q[i] / ht_r[i]);
                }
            }
            rr *= rs;
            PositiveLinearModel::new(a, b, q, rr, h, alpha).expect("mode model is valid")
        })
        .collect();
    JumpProblem::new(p, JumpData::PositiveLinear { modes }, alpha).expect("generated jump problem is valid")
}

/// Cost vector with entries in `[0, scale)`.
pub fn random_cost(r: &mut ChaCha8Rng, n: usize, scale: f64) -> semilinear::CostVector {
    semilinear::CostVector::new(DVector::from_fn(n, |_, _| r.gen_range(0.0..scale))).unwrap()
}
