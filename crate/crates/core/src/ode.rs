//! Adaptive Dormand-Prince 5(4) integrator for autonomous systems `y' = f(y)`.
//!
//! Step control is error-per-unit-step: a step of size `h` is accepted when the
//! max-norm of the embedded error estimate is at most `tol * h`.

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
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
/// Fifth-order minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub tol: f64,
    pub h_init: f64,
    pub h_max: f64,
    /// Smallest step relative to `1 + |t|` before giving up.
    pub h_min_rel: f64,
}

impl StepControl {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            h_init: 1e-2,
            h_max: 1.0,
            h_min_rel: 1e-13,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Underflow {
    pub time: f64,
    pub step: f64,
}

/// Integrates from `t = 0` to `t_end`, calling `on_step(t, y)` after every
/// accepted step. `f` may fail; its error is propagated unchanged.
pub fn integrate<F, S, E2>(
    y0: &[f64],
    t_end: f64,
    ctl: StepControl,
    mut f: F,
    mut on_step: S,
) -> Result<Vec<f64>, OdeError<E2>>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<(), E2>,
    S: FnMut(f64, &[f64]),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = 0.0;
    let mut h = ctl.h_init.min(t_end);
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    f(&y, &mut k[0]).map_err(OdeError::Rhs)?;

    while t < t_end {
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        for s in 1..7 {
            stage.copy_from_slice(&y);
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    for (st, kv) in stage.iter_mut().zip(kj) {
                        *st += h * a * kv;
                    }
                }
            }
            f(&stage, &mut k[s]).map_err(OdeError::Rhs)?;
        }
        // stage 7 was evaluated at the fifth-order solution
        y_new.copy_from_slice(&stage);
        let mut err: f64 = 0.0;
        for i in 0..n {
            let e: f64 = (0..7).map(|s| E[s] * k[s][i]).sum::<f64>() * h;
            err = err.max(e.abs());
        }
        let allowed = ctl.tol * h;
        if err <= allowed {
            t = if last { t_end } else { t + h };
            std::mem::swap(&mut y, &mut y_new);
            let k6 = std::mem::take(&mut k[6]);
            k[0] = k6;
            k[6] = vec![0.0; n];
            on_step(t, &y);
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * (allowed / err).powf(0.25)).clamp(0.2, 5.0)
            };
            h = (h * factor).min(ctl.h_max);
        } else {
            let factor = if err.is_finite() {
                (0.9 * (allowed / err).powf(0.25)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            h *= factor;
            if h < ctl.h_min_rel * (1.0 + t.abs()) {
                return Err(OdeError::Underflow(Underflow { time: t, step: h }));
            }
        }
    }
    Ok(y)
}

#[derive(Debug)]
pub enum OdeError<E> {
    Underflow(Underflow),
    Rhs(E),
}
