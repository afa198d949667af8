//! Embedded adaptive Runge-Kutta integration for matrix-valued ODEs.
//!
//! Dormand-Prince 5(4) pair with the classic quartic dense-output
//! interpolant (Hairer, Nørsett & Wanner, "Solving Ordinary Differential
//! Equations I", DOPRI5). The state is a complex matrix; step size adapts to
//! a mixed absolute/relative tolerance and requested grid points are filled
//! from the interpolant, so stiff rate regimes (large dephasing or sink
//! rates) do not force the output grid onto the integrator. The right-hand
//! side is autonomous, which is all the Lindblad generators here need.

use crate::error::{Error, Result};
use crate::linalg::CMat;

#[derive(Debug, Clone)]
pub struct OdeOptions {
    /// Relative tolerance on the per-step local error.
    pub rtol: f64,
    /// Absolute tolerance floor.
    pub atol: f64,
    /// Hard cap on accepted + rejected steps.
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 20_000_000,
        }
    }
}

// Dormand-Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the 5th- and 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Dense-output coefficients (DOPRI5 continuous extension).
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Weighted RMS norm of the error estimate against the tolerance profile.
fn error_norm(err: &CMat, y0: &CMat, y1: &CMat, atol: f64, rtol: f64) -> f64 {
    let n = err.len() as f64;
    let mut acc = 0.0;
    for ((e, a), b) in err.iter().zip(y0.iter()).zip(y1.iter()) {
        let sc = atol + rtol * a.norm().max(b.norm());
        let r = e.norm() / sc;
        acc += r * r;
    }
    (acc / n).sqrt()
}

/// Integrate dy/dt = f(y) from `t_grid[0]`, delivering the dense-output
/// solution at every grid point through `observe(index, t, y)`.
///
/// The grid must be strictly increasing. Local error per step is controlled
/// to `opts.rtol`/`opts.atol`; step-size underflow is reported with the
/// offending time.
pub fn integrate_dense<F, O>(
    f: F,
    y0: &CMat,
    t_grid: &[f64],
    opts: &OdeOptions,
    mut observe: O,
) -> Result<()>
where
    F: Fn(&CMat) -> CMat,
    O: FnMut(usize, f64, &CMat),
{
    if t_grid.is_empty() {
        return Err(Error::Integration {
            time: 0.0,
            reason: "empty time grid".into(),
        });
    }
    for w in t_grid.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Integration {
                time: w[0],
                reason: "time grid must be strictly increasing".into(),
            });
        }
    }

    let mut t = t_grid[0];
    observe(0, t, y0);
    if t_grid.len() == 1 {
        return Ok(());
    }
    let t_end = *t_grid.last().expect("grid checked nonempty");
    let mut next_out = 1;

    let mut y = y0.clone();
    let mut k1 = f(&y);

    // Initial step from the scale of y and f(y).
    let span = t_end - t;
    let mut h = {
        let ynorm = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let fnorm = k1.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let guess = if fnorm > 1e-300 {
            0.01 * (ynorm.max(opts.atol) / fnorm)
        } else {
            span / 100.0
        };
        guess.min(span / 10.0).max(span * 1e-12)
    };

    let mut steps = 0usize;
    while t < t_end {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::Integration {
                time: t,
                reason: format!("step limit {} exceeded", opts.max_steps),
            });
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::Integration {
                time: t,
                reason: format!("step size underflow (h = {h:.3e})"),
            });
        }
        if t + h > t_end {
            h = t_end - t;
        }

        let k2 = f(&(&y + &(&k1 * (A21 * h))));
        let k3 = f(&(&y + &(&k1 * (A31 * h)) + &(&k2 * (A32 * h))));
        let k4 = f(&(&y + &(&k1 * (A41 * h)) + &(&k2 * (A42 * h)) + &(&k3 * (A43 * h))));
        let k5 = f(&(&y
            + &(&k1 * (A51 * h))
            + &(&k2 * (A52 * h))
            + &(&k3 * (A53 * h))
            + &(&k4 * (A54 * h))));
        let k6 = f(&(&y
            + &(&k1 * (A61 * h))
            + &(&k2 * (A62 * h))
            + &(&k3 * (A63 * h))
            + &(&k4 * (A64 * h))
            + &(&k5 * (A65 * h))));
        let y_new = &y
            + &(&k1 * (B1 * h))
            + &(&k3 * (B3 * h))
            + &(&k4 * (B4 * h))
            + &(&k5 * (B5 * h))
            + &(&k6 * (B6 * h));
        let k7 = f(&y_new);

        let err_mat = (&k1 * E1 + &k3 * E3 + &k4 * E4 + &k5 * E5 + &k6 * E6 + &k7 * E7) * h;
        let err = error_norm(&err_mat, &y, &y_new, opts.atol, opts.rtol);

        if err <= 1.0 {
            // Dense output for grid points inside (t, t + h].
            let needs_interp = next_out < t_grid.len() && t_grid[next_out] <= t + h + 1e-14;
            if needs_interp {
                let ydiff = &y_new - &y;
                let bspl = &(&k1 * h) - &ydiff;
                let cont4 = &ydiff - &(&k7 * h) - &bspl;
                let cont5 =
                    (&k1 * D1 + &k3 * D3 + &k4 * D4 + &k5 * D5 + &k6 * D6 + &k7 * D7) * h;
                while next_out < t_grid.len() && t_grid[next_out] <= t + h + 1e-14 {
                    let tg = t_grid[next_out].min(t + h);
                    let theta = ((tg - t) / h).clamp(0.0, 1.0);
                    let inner2 = &cont4 + &(&cont5 * (1.0 - theta));
                    let inner1 = &bspl + &(&inner2 * theta);
                    let yg = &y + &((&ydiff + &(&inner1 * (1.0 - theta))) * theta);
                    observe(next_out, t_grid[next_out], &yg);
                    next_out += 1;
                }
            }
            t += h;
            y = y_new;
            k1 = k7; // first-same-as-last
            let factor = if err < 1e-30 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= factor;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
        }
    }
    Ok(())
}
