use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{check_nonnegative_matrix, check_nonnegative_vector};
use crate::operators::{check_alpha, SemilinearModel};
use crate::types::{component_value, CostVector, PolicyControl, StructuredPolicy};

use super::{argmin_columns, product_policies, Candidate};

/// One admissible value of a control component `u^i`, tabulated by its effect:
/// the state column `f_i(u^i) >= 0` it adds and its unit cost `g_i(u^i) >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct BilinearControl {
    pub label: Option<String>,
    pub f: DVector<f64>,
    pub g: f64,
}

impl BilinearControl {
    pub fn new(f: DVector<f64>, g: f64) -> Self {
        BilinearControl { label: None, f, g }
    }
}

/// Positive bilinear system `x' = A x + sum_i f_i(u^i) x^i` with stage cost
/// `q'x + sum_i g_i(u^i) x^i`, over finite control grids.
#[derive(Clone, Debug)]
pub struct BilinearModel {
    a: DMatrix<f64>,
    q: DVector<f64>,
    components: Vec<Vec<BilinearControl>>,
    alpha: f64,
    candidates: Vec<Vec<Candidate>>,
}

impl BilinearModel {
    pub fn new(
        a: DMatrix<f64>,
        q: DVector<f64>,
        components: Vec<Vec<BilinearControl>>,
        alpha: f64,
    ) -> Result<Self> {
        let n = q.len();
        check_alpha(alpha)?;
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::dims("A (n x n)", n, a.nrows().max(a.ncols())));
        }
        if components.len() != n {
            return Err(Error::dims("components", n, components.len()));
        }
        check_nonnegative_matrix(&a, "A")?;
        check_nonnegative_vector(&q, "q")?;

        let mut candidates = Vec::with_capacity(n);
        for (i, grid) in components.iter().enumerate() {
            if grid.is_empty() {
                return Err(Error::invalid(format!("components[{i}]"), "control grid is empty"));
            }
            let mut cands = Vec::with_capacity(grid.len());
            for (k, u) in grid.iter().enumerate() {
                let field = format!("components[{i}].controls[{k}]");
                if u.f.len() != n {
                    return Err(Error::dims(format!("{field}.f"), n, u.f.len()));
                }
                check_nonnegative_vector(&u.f, &format!("{field}.f"))?;
                if !u.g.is_finite() || u.g < 0.0 {
                    return Err(Error::invalid(format!("{field}.g"), format!("{} must be finite and >= 0", u.g)));
                }
                let column: Vec<f64> = (0..n).map(|j| a[(j, i)] + u.f[j]).collect();
                cands.push(Candidate { column, q: q[i] + u.g });
            }
            candidates.push(cands);
        }
        Ok(BilinearModel { a, q, components, alpha, candidates })
    }

    /// Grid for a component whose control has been eliminated (`f_i = 0`, `g_i = 0`).
    pub fn eliminated(n: usize) -> Vec<BilinearControl> {
        vec![BilinearControl::new(DVector::zeros(n), 0.0)]
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn q(&self) -> &DVector<f64> {
        &self.q
    }

    pub fn components(&self) -> &[Vec<BilinearControl>] {
        &self.components
    }

    /// The constant-in-state policy applying `choice[i]` to component `i`.
    pub fn policy_for(&self, choice: &[usize]) -> Result<StructuredPolicy> {
        super::policy_from_choice(&self.candidates, choice, PolicyControl::Grid(choice.to_vec()))
    }
}

impl SemilinearModel for BilinearModel {
    fn dim(&self) -> usize {
        self.q.len()
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn family(&self) -> &'static str {
        "bilinear"
    }

    fn bellman(&self, c: &CostVector) -> Result<(CostVector, StructuredPolicy)> {
        let (values, choice) = argmin_columns(&self.candidates, c.as_slice(), self.alpha);
        let policy = self.policy_for(&choice)?;
        Ok((CostVector::from_computed(values)?, policy))
    }

    fn policy_count(&self) -> Option<u128> {
        super::grid_count(&self.candidates)
    }

    fn policies(&self) -> Box<dyn Iterator<Item = StructuredPolicy> + '_> {
        Box::new(product_policies(&self.candidates, PolicyControl::Grid))
    }
}

/// `d_i(c) = min_u [g_i(u) + alpha c' f_i(u)]` with the lowest-index minimizer.
pub fn control_term(model: &BilinearModel, i: usize, c: &CostVector) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for (k, u) in model.components[i].iter().enumerate() {
        let v = component_value(u.g, u.f.as_slice(), c.as_slice(), model.alpha);
        if v < best.0 {
            best = (v, k);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::apply_g_mu;
    use nalgebra::dmatrix;

    fn scalar_two_control() -> BilinearModel {
        BilinearModel::new(
            dmatrix![0.0],
            DVector::from_vec(vec![0.0]),
            vec![vec![
                BilinearControl::new(DVector::from_vec(vec![0.5]), 1.0),
                BilinearControl::new(DVector::from_vec(vec![0.9]), 0.5),
            ]],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn picks_cheaper_control_at_c2() {
        let m = scalar_two_control();
        let (c_hat, mu) = m.bellman(&CostVector::from_slice(&[2.0]).unwrap()).unwrap();
        // 1 + 0.5*2 = 2.0 versus 0.5 + 0.9*2 = 2.3
        assert!((c_hat[0] - 2.0).abs() < 1e-15);
        assert_eq!(mu.control, PolicyControl::Grid(vec![0]));
        assert_eq!(control_term(&m, 0, &CostVector::from_slice(&[2.0]).unwrap()).1, 0);
    }

    #[test]
    fn eliminated_controls_reduce_to_uncontrolled() {
        let a = dmatrix![0.2, 0.1; 0.3, 0.4];
        let q = DVector::from_vec(vec![1.0, 2.0]);
        let m = BilinearModel::new(a.clone(), q.clone(), vec![BilinearModel::eliminated(2), BilinearModel::eliminated(2)], 0.9)
            .unwrap();
        let c = CostVector::from_slice(&[1.0, 3.0]).unwrap();
        let (c_hat, _) = m.bellman(&c).unwrap();
        let expect = &q + a.transpose() * c.as_vector() * 0.9;
        assert!(crate::linalg::max_abs_diff(c_hat.as_vector(), &expect) < 1e-14);
    }

    #[test]
    fn zero_cost_vector_selects_by_stage_cost() {
        let m = scalar_two_control();
        let (c_hat, mu) = m.bellman(&CostVector::zeros(1)).unwrap();
        assert_eq!(c_hat[0], 0.5);
        assert_eq!(mu.control, PolicyControl::Grid(vec![1]));
    }

    #[test]
    fn oracle_agrees_with_its_policy_bitwise() {
        let m = scalar_two_control();
        let c = CostVector::from_slice(&[1.7]).unwrap();
        let (c_hat, mu) = m.bellman(&c).unwrap();
        assert_eq!(apply_g_mu(&mu, &c, m.alpha()).unwrap(), c_hat);
    }

    #[test]
    fn empty_grid_is_a_construction_error() {
        let err = BilinearModel::new(dmatrix![0.0], DVector::from_vec(vec![1.0]), vec![vec![]], 0.9).unwrap_err();
        assert!(matches!(err, Error::Invalid { .. }));
    }

    #[test]
    fn negative_column_rejected() {
        let err = BilinearModel::new(
            dmatrix![0.0],
            DVector::from_vec(vec![1.0]),
            vec![vec![BilinearControl::new(DVector::from_vec(vec![-0.1]), 0.0)]],
            0.9,
        )
        .unwrap_err();
        assert!(err.to_string().contains("components[0].controls[0].f[0]"));
    }
}
