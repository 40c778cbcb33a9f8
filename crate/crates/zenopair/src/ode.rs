//! Adaptive Dormand-Prince 5(4) integrator over fixed-size complex state
//! vectors, with cubic Hermite dense output at requested sample times.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Integrator tolerances. The error norm is a scaled RMS over the real and
/// imaginary parts of every state component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-9,
            atol: 1e-12,
        }
    }
}

impl Tolerances {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Tolerances { rtol, atol }
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
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
// Fifth-order weights are row 7 of A (FSAL); the error weights are the
// difference between the fifth- and fourth-order solutions.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn axpy<const N: usize>(y: &mut [C64; N], a: f64, x: &[C64; N]) {
    for i in 0..N {
        y[i] += a * x[i];
    }
}

/// Integrate `dy/dt = f(t, y)` from `t0` to `t1 >= t0`, returning the state at
/// each requested sample time. Sample times must be sorted ascending and lie
/// within `[t0, t1]` (up to rounding).
pub fn integrate<const N: usize, F>(
    f: F,
    t0: f64,
    t1: f64,
    y0: [C64; N],
    sample_times: &[f64],
    tol: &Tolerances,
) -> Result<Vec<[C64; N]>>
where
    F: Fn(f64, &[C64; N]) -> [C64; N],
{
    let span = t1 - t0;
    if span < 0.0 {
        return Err(Error::IntegratorFailure {
            t: t0,
            msg: "negative time span".into(),
        });
    }
    let mut out = Vec::with_capacity(sample_times.len());
    if span == 0.0 {
        out.resize(sample_times.len(), y0);
        return Ok(out);
    }

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut h = (span / 100.0).min(span);
    let h_min = span * 1e-14;
    let mut sample_idx = 0;

    // Samples exactly at (or before) t0.
    while sample_idx < sample_times.len() && sample_times[sample_idx] <= t0 {
        out.push(y0);
        sample_idx += 1;
    }

    let max_steps = 50_000_000usize;
    let mut steps = 0usize;
    while t < t1 {
        steps += 1;
        if steps > max_steps {
            return Err(Error::IntegratorFailure {
                t,
                msg: "step limit exceeded".into(),
            });
        }
        if t + h > t1 {
            h = t1 - t;
        }

        let mut k = [[C64::new(0.0, 0.0); N]; 7];
        k[0] = k1;
        for s in 1..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                if A[s][j] != 0.0 {
                    axpy(&mut ys, h * A[s][j], kj);
                }
            }
            k[s] = f(t + C[s] * h, &ys);
        }
        // k[6] was evaluated at the fifth-order solution point (FSAL).
        let mut y_new = y;
        for (j, kj) in k.iter().enumerate().take(6) {
            if A[6][j] != 0.0 {
                axpy(&mut y_new, h * A[6][j], kj);
            }
        }

        let mut err_sq = 0.0;
        for i in 0..N {
            let mut e = C64::new(0.0, 0.0);
            for (j, kj) in k.iter().enumerate() {
                if E[j] != 0.0 {
                    e += h * E[j] * kj[i];
                }
            }
            let scale = tol.atol + tol.rtol * y[i].norm().max(y_new[i].norm());
            err_sq += (e / scale).norm_sqr();
        }
        let err = (err_sq / N as f64).sqrt();

        if err <= 1.0 {
            // Accept; emit dense output for samples inside (t, t + h].
            let k_new = k[6];
            while sample_idx < sample_times.len() && sample_times[sample_idx] <= t + h + h_min {
                let ts = sample_times[sample_idx].min(t + h);
                out.push(hermite(t, h, &y, &y_new, &k1, &k_new, ts));
                sample_idx += 1;
            }
            t += h;
            y = y_new;
            k1 = k_new;
        }

        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= factor;
        if h < h_min && t < t1 {
            return Err(Error::IntegratorFailure {
                t,
                msg: format!("step size underflow (h = {h:.3e})"),
            });
        }
    }

    // Any samples numerically past t1 get the final state.
    while sample_idx < sample_times.len() {
        out.push(y);
        sample_idx += 1;
    }
    Ok(out)
}

/// Cubic Hermite interpolation on one accepted step.
fn hermite<const N: usize>(
    t: f64,
    h: f64,
    y0: &[C64; N],
    y1: &[C64; N],
    f0: &[C64; N],
    f1: &[C64; N],
    ts: f64,
) -> [C64; N] {
    let s = ((ts - t) / h).clamp(0.0, 1.0);
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let mut out = [C64::new(0.0, 0.0); N];
    for i in 0..N {
        out[i] = h00 * y0[i] + (h10 * h) * f0[i] + h01 * y1[i] + (h11 * h) * f1[i];
    }
    out
}
