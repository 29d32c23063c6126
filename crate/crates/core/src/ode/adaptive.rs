use crate::scalar::Scalar;

use super::{check_times, eval_checked, OdeError, OdeRhs, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    /// Cap on attempted steps (accepted plus rejected).
    pub max_steps: usize,
}

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

// Dormand–Prince 5(4) coefficients. The fifth-order solution is propagated.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Difference between fifth- and fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Coefficients<T> {
    c: [T; 7],
    a: [[T; 6]; 7],
    e: [T; 7],
}

impl<T: Scalar> Coefficients<T> {
    fn new() -> Self {
        Self {
            c: C.map(T::lit),
            a: A.map(|row| row.map(T::lit)),
            e: E.map(T::lit),
        }
    }
}

/// Integrates with the Dormand–Prince 4(5) embedded pair.
///
/// A step is accepted when every component satisfies
/// `|err_i| <= abs_tol + rel_tol * max(|x_i|, |x_new_i|)`. Steps are truncated so
/// that they land exactly on each entry of `output_times`; no interpolation is
/// performed. `output_times[0]` is the initial time.
pub fn integrate_adaptive<T: Scalar, F: OdeRhs<T> + ?Sized>(
    rhs: &F,
    x0: &[T],
    output_times: &[T],
    opts: &AdaptiveOptions<T>,
) -> Result<Trajectory<T>, OdeError> {
    if !(opts.rel_tol > T::zero() && opts.abs_tol > T::zero()) {
        return Err(OdeError::InvalidConfig(
            "tolerances must be positive".into(),
        ));
    }
    check_times(output_times)?;
    let d = x0.len();
    let co = Coefficients::<T>::new();
    let safety = T::lit(SAFETY);
    let min_factor = T::lit(MIN_FACTOR);
    let max_factor = T::lit(MAX_FACTOR);
    let fifth = T::lit(0.2);

    let mut states = Vec::with_capacity(output_times.len());
    states.push(x0.to_vec());
    if output_times.len() == 1 {
        return Ok(Trajectory {
            times: output_times.to_vec(),
            states,
        });
    }

    let mut t = output_times[0];
    let t_end = *output_times.last().expect("non-empty");
    let mut x = x0.to_vec();
    let mut k: [Vec<T>; 7] = std::array::from_fn(|_| vec![T::zero(); d]);
    let mut stage = vec![T::zero(); d];
    let mut x_new = vec![T::zero(); d];
    eval_checked(rhs, t, &x, &mut k[0])?;

    let mut h = initial_step(&x, &k[0], t_end - t, opts);
    let mut attempts = 0usize;
    let mut next_out = 1usize;

    while next_out < output_times.len() {
        let target = output_times[next_out];
        let remaining = target - t;
        let landing = h >= remaining;
        let h_step = if landing { remaining } else { h };
        if h_step <= T::epsilon() * t.abs().max(T::one()) {
            return Err(OdeError::StepSizeUnderflow {
                t: t.to_f64_lossy(),
            });
        }
        attempts += 1;
        if attempts > opts.max_steps {
            return Err(OdeError::MaxStepsExceeded {
                max_steps: opts.max_steps,
                t: t.to_f64_lossy(),
            });
        }

        let mut stage_ok = true;
        for s in 1..7 {
            for n in 0..d {
                let mut acc = T::zero();
                for j in 0..s {
                    acc = acc + co.a[s][j] * k[j][n];
                }
                stage[n] = x[n] + h_step * acc;
            }
            let (_, rest) = k.split_at_mut(s);
            if eval_checked(rhs, t + co.c[s] * h_step, &stage, &mut rest[0]).is_err() {
                stage_ok = false;
                break;
            }
        }
        // Stage 7 is evaluated at the fifth-order solution, which is `stage` after s = 6.
        let err_norm = if stage_ok {
            x_new.copy_from_slice(&stage);
            let mut worst = T::zero();
            for n in 0..d {
                let mut err = T::zero();
                for s in 0..7 {
                    err = err + co.e[s] * k[s][n];
                }
                err = (err * h_step).abs();
                let scale = opts.abs_tol + opts.rel_tol * x[n].abs().max(x_new[n].abs());
                worst = worst.max(err / scale);
            }
            worst
        } else {
            T::infinity()
        };

        if err_norm.is_finite() && err_norm <= T::one() {
            t = if landing { target } else { t + h_step };
            std::mem::swap(&mut x, &mut x_new);
            // First-same-as-last: the last stage derivative is f(x_new, t_new).
            let (first, rest) = k.split_at_mut(6);
            first[0].copy_from_slice(&rest[0]);
            let factor = if err_norm == T::zero() {
                max_factor
            } else {
                (safety * err_norm.powf(-fifth))
                    .max(min_factor)
                    .min(max_factor)
            };
            // Grow from the proposed step, not the truncated one, so landing does not shrink h.
            h = h.max(h_step) * factor;
            if landing {
                states.push(x.clone());
                next_out += 1;
            }
        } else {
            let factor = if err_norm.is_finite() {
                (safety * err_norm.powf(-fifth))
                    .max(min_factor)
                    .min(T::one())
            } else {
                min_factor
            };
            h = h_step * factor;
        }
    }
    Ok(Trajectory {
        times: output_times.to_vec(),
        states,
    })
}

fn initial_step<T: Scalar>(x: &[T], f0: &[T], span: T, opts: &AdaptiveOptions<T>) -> T {
    let mut d0 = T::zero();
    let mut d1 = T::zero();
    for (xi, fi) in x.iter().zip(f0) {
        let scale = opts.abs_tol + opts.rel_tol * xi.abs();
        d0 = d0.max(xi.abs() / scale);
        d1 = d1.max(fi.abs() / scale);
    }
    let small = T::lit(1e-5);
    if d1 <= small {
        return span;
    }
    let h = if d0 <= small {
        T::lit(1e-6) * span.max(T::one())
    } else {
        T::lit(0.01) * d0 / d1
    };
    h.min(span)
}
