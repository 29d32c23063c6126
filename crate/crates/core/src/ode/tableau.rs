use crate::scalar::Scalar;

use super::OdeError;

/// Coefficients of an explicit Runge–Kutta scheme with `s` stages.
///
/// `coupling[i]` holds the `i` coefficients `β_{i,0..i}` feeding stage `i`,
/// so the first row is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau<T> {
    weights: Vec<T>,
    nodes: Vec<T>,
    coupling: Vec<Vec<T>>,
}

const TABLEAU_TOL: f64 = 1e-12;

impl<T: Scalar> ButcherTableau<T> {
    /// Builds a tableau, rejecting anything that is not a consistent explicit scheme:
    /// weights must sum to one, every node must equal its coupling row sum and the
    /// first node must be zero.
    pub fn new(weights: Vec<T>, nodes: Vec<T>, coupling: Vec<Vec<T>>) -> Result<Self, OdeError> {
        let s = weights.len();
        if s == 0 {
            return Err(OdeError::InvalidTableau(
                "tableau needs at least one stage".into(),
            ));
        }
        if nodes.len() != s || coupling.len() != s {
            return Err(OdeError::InvalidTableau(format!(
                "stage count mismatch: {} weights, {} nodes, {} coupling rows",
                s,
                nodes.len(),
                coupling.len()
            )));
        }
        let all_finite = weights
            .iter()
            .chain(&nodes)
            .chain(coupling.iter().flatten())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(OdeError::InvalidTableau("non-finite coefficient".into()));
        }
        let tol = T::lit(TABLEAU_TOL);
        let weight_sum: T = weights.iter().copied().sum();
        if (weight_sum - T::one()).abs() > tol {
            return Err(OdeError::InvalidTableau(format!(
                "weights sum to {weight_sum}, expected 1"
            )));
        }
        if nodes[0] != T::zero() {
            return Err(OdeError::InvalidTableau(format!(
                "first node is {}, expected 0",
                nodes[0]
            )));
        }
        for (i, row) in coupling.iter().enumerate() {
            if row.len() != i {
                return Err(OdeError::InvalidTableau(format!(
                    "coupling row {} has {} entries, expected {} (strictly lower triangular)",
                    i + 1,
                    row.len(),
                    i
                )));
            }
            let row_sum: T = row.iter().copied().sum();
            if (row_sum - nodes[i]).abs() > tol {
                return Err(OdeError::InvalidTableau(format!(
                    "coupling row {} sums to {row_sum} but node is {}",
                    i + 1,
                    nodes[i]
                )));
            }
        }
        Ok(Self {
            weights,
            nodes,
            coupling,
        })
    }

    /// Forward Euler as a one-stage tableau.
    pub fn euler() -> Self {
        Self::new(vec![T::one()], vec![T::zero()], vec![vec![]]).expect("valid tableau")
    }

    /// Two-stage scheme with equal weights and a full-step second node; this is the
    /// trapezoidal (Heun) update.
    pub fn rk2() -> Self {
        let half = T::lit(0.5);
        Self::new(
            vec![half, half],
            vec![T::zero(), T::one()],
            vec![vec![], vec![T::one()]],
        )
        .expect("valid tableau")
    }

    /// Midpoint (modified Euler) scheme.
    pub fn midpoint() -> Self {
        let half = T::lit(0.5);
        Self::new(
            vec![T::zero(), T::one()],
            vec![T::zero(), half],
            vec![vec![], vec![half]],
        )
        .expect("valid tableau")
    }

    /// Classical fourth-order scheme.
    pub fn rk4() -> Self {
        let sixth = T::one() / T::lit(6.0);
        let third = T::one() / T::lit(3.0);
        let half = T::lit(0.5);
        let zero = T::zero();
        Self::new(
            vec![sixth, third, third, sixth],
            vec![zero, half, half, T::one()],
            vec![
                vec![],
                vec![half],
                vec![zero, half],
                vec![zero, zero, T::one()],
            ],
        )
        .expect("valid tableau")
    }

    pub fn stages(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn coupling(&self) -> &[Vec<T>] {
        &self.coupling
    }
}
