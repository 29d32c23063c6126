//! Basic reproduction number by the next-generation-matrix method.
//!
//! With `A` the Jacobian of new-infection inflows and `B` the Jacobian of
//! transition outflows (both restricted to infectious compartments and evaluated
//! at a disease-free equilibrium), `R0 = ρ(A·B⁻¹)`.

use nalgebra::{DMatrix, RealField};
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::{check_population, CompartmentState, ModelError, SlirParams};

/// Spectral radius of `A·B⁻¹`.
pub fn r0_next_generation<T: Scalar + RealField>(
    f_jac: &DMatrix<T>,
    v_jac: &DMatrix<T>,
) -> Result<T, ModelError> {
    if !f_jac.is_square() || f_jac.shape() != v_jac.shape() {
        return Err(ModelError::Dimension(format!(
            "F and V Jacobians must be square and equal-sized, got {:?} and {:?}",
            f_jac.shape(),
            v_jac.shape()
        )));
    }
    if f_jac.nrows() == 0 {
        return Err(ModelError::Dimension("no infectious compartments".into()));
    }
    let v_inv = v_jac
        .clone()
        .try_inverse()
        .filter(|m| m.iter().all(|v| Float::is_finite(*v)))
        .ok_or_else(|| ModelError::Singular("transition Jacobian V is not invertible".into()))?;
    let ngm = f_jac * v_inv;
    let radius = ngm
        .complex_eigenvalues()
        .iter()
        .map(|z| Float::sqrt(z.re * z.re + z.im * z.im))
        .fold(T::zero(), Float::max);
    Ok(radius)
}

use num_traits::Float;

/// Central-difference Jacobian of `f` at `x` with respect to the coordinates in `wrt`.
pub fn jacobian_fd<T, F>(f: F, x: &[T], wrt: &[usize]) -> DMatrix<T>
where
    T: Scalar + RealField,
    F: Fn(&[T]) -> Vec<T>,
{
    let base = f(x);
    let rows = base.len();
    let mut jac = DMatrix::zeros(rows, wrt.len());
    let rel = Float::cbrt(<T as Float>::epsilon());
    let two = T::lit(2.0);
    for (col, &j) in wrt.iter().enumerate() {
        let h = rel * Float::max(T::one(), Float::abs(x[j]));
        let mut up = x.to_vec();
        let mut dn = x.to_vec();
        up[j] += h;
        dn[j] -= h;
        let (fu, fd) = (f(&up), f(&dn));
        for row in 0..rows {
            jac[(row, col)] = (fu[row] - fd[row]) / (two * h);
        }
    }
    jac
}

/// R0 from user-supplied inflow (`new_infections`) and outflow (`transitions`) maps.
///
/// Both maps take the full state and return one rate per infectious compartment;
/// they are linearised numerically at `dfe` with respect to `infectious`.
pub fn next_generation_from_flows<T, F, V>(
    new_infections: F,
    transitions: V,
    dfe: &[T],
    infectious: &[usize],
) -> Result<T, ModelError>
where
    T: Scalar + RealField,
    F: Fn(&[T]) -> Vec<T>,
    V: Fn(&[T]) -> Vec<T>,
{
    if let Some(&bad) = infectious.iter().find(|&&i| i >= dfe.len()) {
        return Err(ModelError::Dimension(format!(
            "infectious index {bad} out of range for state of length {}",
            dfe.len()
        )));
    }
    let a = jacobian_fd(new_infections, dfe, infectious);
    let b = jacobian_fd(transitions, dfe, infectious);
    r0_next_generation(&a, &b)
}

/// SIR at the disease-free equilibrium `(N, 0, 0)`: `A = (β)`, `B = (γ)`.
pub fn sir_next_generation<T: Scalar + RealField>(beta: T, gamma: T) -> Result<T, ModelError> {
    r0_next_generation(
        &DMatrix::from_element(1, 1, beta),
        &DMatrix::from_element(1, 1, gamma),
    )
}

/// Which disease-free state of the SLIR system to linearise about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiseaseFreeEquilibrium {
    /// `(N, 0, 0, 0)`: the initial condition's susceptible pool, before any lockdown.
    FullySusceptible,
    /// `(bN/(a+b), aN/(a+b), 0, 0)`: the equilibrium of the S ⇄ L exchange.
    LockdownBalanced,
}

pub fn slir_disease_free_state<T: Scalar>(
    params: &SlirParams<T>,
    n: T,
    kind: DiseaseFreeEquilibrium,
) -> CompartmentState<T> {
    let z = T::zero();
    match kind {
        DiseaseFreeEquilibrium::FullySusceptible => CompartmentState::new(n, z, z, z),
        DiseaseFreeEquilibrium::LockdownBalanced => {
            let total = params.a + params.b;
            if total == z {
                CompartmentState::new(n, z, z, z)
            } else {
                CompartmentState::new(params.b * n / total, params.a * n / total, z, z)
            }
        }
    }
}

/// SLIR has a single infectious compartment, so `A = (β S*/N)` and `B = (γ)`.
/// At the fully susceptible state this gives `R0`; at the lockdown-balanced state
/// it gives `R0·b/(a+b)`.
pub fn slir_next_generation<T: Scalar + RealField>(
    params: &SlirParams<T>,
    n: T,
    kind: DiseaseFreeEquilibrium,
) -> Result<T, ModelError> {
    check_population(n)?;
    params.validate()?;
    let dfe = slir_disease_free_state(params, n, kind);
    let a = DMatrix::from_element(1, 1, params.beta() * dfe.s / n);
    let b = DMatrix::from_element(1, 1, params.gamma);
    r0_next_generation(&a, &b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sir_ratio_for_random_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let beta: f64 = rng.random_range(0.01..5.0);
            let gamma: f64 = rng.random_range(0.01..2.0);
            let r0 = sir_next_generation(beta, gamma).unwrap();
            assert!((r0 - beta / gamma).abs() <= 1e-12 * (beta / gamma).max(1.0));
        }
    }

    #[test]
    fn identical_matrices_give_one() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.3, 1.0]);
        assert_relative_eq!(r0_next_generation(&m, &m).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn singular_outflow_is_an_error() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            r0_next_generation(&a, &b),
            Err(ModelError::Singular(_))
        ));
        let mismatch = DMatrix::from_element(1, 1, 1.0);
        assert!(matches!(
            r0_next_generation(&a, &mismatch),
            Err(ModelError::Dimension(_))
        ));
    }

    #[test]
    fn two_compartment_seir_style_model() {
        // Exposed/infectious chain: A = [[0, β],[0, 0]], B = [[σ+μ, 0],[−σ, γ+μ]].
        let (beta, sigma, gamma, mu) = (0.9, 0.25, 0.2, 0.01);
        let a = DMatrix::from_row_slice(2, 2, &[0.0, beta, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 2, &[sigma + mu, 0.0, -sigma, gamma + mu]);
        let expected = beta * sigma / ((sigma + mu) * (gamma + mu));
        assert_relative_eq!(
            r0_next_generation(&a, &b).unwrap(),
            expected,
            epsilon = 1e-12
        );
    }

    #[allow(clippy::type_complexity)]
    fn slir_flows(
        p: SlirParams<f64>,
        n: f64,
    ) -> (impl Fn(&[f64]) -> Vec<f64>, impl Fn(&[f64]) -> Vec<f64>) {
        let f = move |x: &[f64]| vec![p.beta() * x[0] * x[2] / n];
        let v = move |x: &[f64]| vec![p.gamma * x[2]];
        (f, v)
    }

    #[test]
    fn slir_fully_susceptible_state_reproduces_r0() {
        let p = SlirParams::new(5.0, 0.1, 0.05, 0.02);
        let n = 1e4;
        let analytic =
            slir_next_generation(&p, n, DiseaseFreeEquilibrium::FullySusceptible).unwrap();
        assert!((analytic - 5.0).abs() <= 1e-10);
        let (f, v) = slir_flows(p, n);
        let dfe =
            slir_disease_free_state(&p, n, DiseaseFreeEquilibrium::FullySusceptible).to_array();
        let numeric = next_generation_from_flows(f, v, &dfe, &[2]).unwrap();
        assert!((numeric - 5.0).abs() <= 1e-10, "numeric {numeric}");
    }

    #[test]
    fn slir_balanced_state_scales_by_return_share() {
        let p = SlirParams::new(5.0, 0.1, 0.05, 0.02);
        let n = 1e4;
        let expected = 5.0 * 0.02 / 0.07;
        let analytic =
            slir_next_generation(&p, n, DiseaseFreeEquilibrium::LockdownBalanced).unwrap();
        assert_relative_eq!(analytic, expected, epsilon = 1e-12);
        let (f, v) = slir_flows(p, n);
        let dfe =
            slir_disease_free_state(&p, n, DiseaseFreeEquilibrium::LockdownBalanced).to_array();
        assert_relative_eq!(
            next_generation_from_flows(f, v, &dfe, &[2]).unwrap(),
            expected,
            epsilon = 1e-9
        );
    }

    #[test]
    fn out_of_range_infectious_index() {
        let (f, v) = slir_flows(SlirParams::new(2.0, 0.1, 0.0, 0.0), 10.0);
        assert!(matches!(
            next_generation_from_flows(f, v, &[10.0, 0.0, 0.0, 0.0], &[4]),
            Err(ModelError::Dimension(_))
        ));
    }

    #[test]
    fn single_precision_path() {
        let r0 = sir_next_generation(0.5f32, 0.25f32).unwrap();
        assert!((r0 - 2.0).abs() < 1e-6);
    }
}
