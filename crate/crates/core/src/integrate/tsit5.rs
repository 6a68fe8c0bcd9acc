//! Tsitouras' 5(4) embedded Runge-Kutta pair with PI step control and the
//! free 4th-order continuous extension.
//!
//! Coefficients follow Ch. Tsitouras, "Runge-Kutta pairs of order 5(4)
//! satisfying only the first column simplifying assumption", Comput. Math.
//! Appl. 62 (2011).

use crate::error::{Error, Result};

/// Smallest step the controller may take before giving up.
pub const MIN_STEP: f64 = 1e-12;

pub(crate) const C2: f64 = 0.161;
pub(crate) const C3: f64 = 0.327;
pub(crate) const C4: f64 = 0.9;
pub(crate) const C5: f64 = 0.980_025_540_904_509_7;

pub(crate) const A21: f64 = 0.161;
pub(crate) const A31: f64 = -0.008_480_655_492_356_989;
pub(crate) const A32: f64 = 0.335_480_655_492_357;
pub(crate) const A41: f64 = 2.897_153_057_105_493;
pub(crate) const A42: f64 = -6.359_448_489_975_075;
pub(crate) const A43: f64 = 4.362_295_432_869_581_5;
pub(crate) const A51: f64 = 5.325_864_828_439_257;
pub(crate) const A52: f64 = -11.748_883_564_062_828;
pub(crate) const A53: f64 = 7.495_539_342_889_836_5;
pub(crate) const A54: f64 = -0.092_495_066_361_755_25;
pub(crate) const A61: f64 = 5.861_455_442_946_42;
pub(crate) const A62: f64 = -12.920_969_317_847_11;
pub(crate) const A63: f64 = 8.159_367_898_576_159;
pub(crate) const A64: f64 = -0.071_584_973_281_401;
pub(crate) const A65: f64 = -0.028_269_050_394_068_383;
// 5th-order weights; also the last stage row (FSAL).
pub(crate) const B1: f64 = 0.096_460_766_818_065_23;
pub(crate) const B2: f64 = 0.01;
pub(crate) const B3: f64 = 0.479_889_650_414_499_6;
pub(crate) const B4: f64 = 1.379_008_574_103_742;
pub(crate) const B5: f64 = -3.290_069_515_436_081;
pub(crate) const B6: f64 = 2.324_710_524_099_774;

// Difference between the 5th- and 4th-order weights.
pub(crate) const E1: f64 = -0.001_780_011_052_225_777_14;
pub(crate) const E2: f64 = -0.000_816_434_459_656_746_9;
pub(crate) const E3: f64 = 0.007_880_878_010_261_995;
pub(crate) const E4: f64 = -0.144_711_007_173_262_9;
pub(crate) const E5: f64 = 0.582_357_165_452_555_2;
pub(crate) const E6: f64 = -0.458_082_105_929_186_97;
pub(crate) const E7: f64 = 1.0 / 66.0;

/// Weights of the continuous extension at `theta` in [0, 1].
pub(crate) fn dense_weights(theta: f64) -> [f64; 7] {
    let t = theta;
    let poly = |r1: f64, r2: f64, r3: f64, r4: f64| t * (r1 + t * (r2 + t * (r3 + t * r4)));
    [
        poly(1.0, -2.763_706_197_274_826, 2.913_255_461_821_912_6, -1.053_088_497_729_021_6),
        poly(0.0, 0.131_699_999_999_999_98, -0.2234, 0.1017),
        poly(0.0, 3.930_296_236_894_751_6, -5.941_033_872_131_505, 2.490_627_285_651_253),
        poly(0.0, -12.411_077_166_933_676, 30.338_188_630_282_32, -16.548_102_889_244_902),
        poly(0.0, 37.509_313_416_511_04, -88.178_904_894_766_4, 47.379_521_962_819_28),
        poly(0.0, -27.896_526_289_197_286, 65.091_894_674_793_66, -34.870_657_861_496_61),
        poly(0.0, 1.5, -4.0, 2.5),
    ]
}

/// A first-order system `y' = F(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]);

    /// Called on the new state after every accepted step.
    fn after_step(&self, _y: &mut [f64]) {}
}

/// Step-size controller and tolerance settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub initial_step: f64,
    pub max_step: f64,
}

/// Counters reported after a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - 0.75 * BETA;

/// Integrates `sys` from `(t0, y0)` to `t_end`.
///
/// `on_step(t, h, y, y_new, k)` is called after every accepted step with the
/// stage derivatives `k`, so the caller can interpolate with [`interpolate`].
pub fn solve<S, F>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    control: StepControl,
    mut on_step: F,
) -> Result<SolveStats>
where
    S: OdeSystem,
    F: FnMut(f64, f64, &[f64], &[f64], &[Vec<f64>; 7]),
{
    let n = sys.dim();
    if y0.len() != n {
        return Err(Error::contract("initial vector has wrong length"));
    }
    let mut stats = SolveStats::default();
    let mut y = y0.to_vec();
    let mut y_new = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);

    let mut t = t0;
    let mut h = control.initial_step.min(control.max_step);
    let mut err_old: f64 = 1e-4;
    let mut last_rejected = false;

    sys.eval(t, &y, &mut k[0]);
    stats.rhs_evals += 1;

    while t < t_end {
        let mut final_step = false;
        if t + h >= t_end {
            h = t_end - t;
            final_step = true;
        }

        // Stages 2-6.
        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k[0][i];
        }
        sys.eval(t + C2 * h, &tmp, &mut k[1]);
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k[0][i] + A32 * k[1][i]);
        }
        sys.eval(t + C3 * h, &tmp, &mut k[2]);
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
        }
        sys.eval(t + C4 * h, &tmp, &mut k[3]);
        for i in 0..n {
            tmp[i] =
                y[i] + h * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
        }
        sys.eval(t + C5 * h, &tmp, &mut k[4]);
        for i in 0..n {
            tmp[i] = y[i]
                + h * (A61 * k[0][i]
                    + A62 * k[1][i]
                    + A63 * k[2][i]
                    + A64 * k[3][i]
                    + A65 * k[4][i]);
        }
        let t_new = if final_step { t_end } else { t + h };
        sys.eval(t_new, &tmp, &mut k[5]);
        for i in 0..n {
            y_new[i] = y[i]
                + h * (B1 * k[0][i]
                    + B2 * k[1][i]
                    + B3 * k[2][i]
                    + B4 * k[3][i]
                    + B5 * k[4][i]
                    + B6 * k[5][i]);
        }
        sys.eval(t_new, &y_new, &mut k[6]);
        stats.rhs_evals += 6;

        let mut acc = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k[0][i]
                    + E2 * k[1][i]
                    + E3 * k[2][i]
                    + E4 * k[3][i]
                    + E5 * k[4][i]
                    + E6 * k[5][i]
                    + E7 * k[6][i]);
            let scale = control.abs_tol + control.rel_tol * y[i].abs().max(y_new[i].abs());
            let r = e / scale;
            acc += r * r;
        }
        let err = (acc / n as f64).sqrt();

        if !err.is_finite() {
            // Treat as a hard rejection; the state may be diverging.
            stats.rejected += 1;
            h *= MIN_FACTOR;
            last_rejected = true;
            if h < MIN_STEP {
                return Err(Error::BlowUp { time: t });
            }
            continue;
        }

        let fac_err = err.powf(EXPO);
        if err <= 1.0 {
            let mut fac = fac_err / err_old.powf(BETA);
            fac = (fac / SAFETY).clamp(1.0 / MAX_FACTOR, 1.0 / MIN_FACTOR);
            let mut h_next = h / fac;
            if last_rejected {
                h_next = h_next.min(h);
            }
            err_old = err.max(1e-4);
            stats.accepted += 1;
            last_rejected = false;

            on_step(t, h, &y, &y_new, &k);

            std::mem::swap(&mut y, &mut y_new);
            sys.after_step(&mut y);
            let (first, rest) = k.split_at_mut(1);
            std::mem::swap(&mut first[0], &mut rest[5]);
            t = t_new;
            h = h_next.min(control.max_step);
            if final_step {
                break;
            }
        } else {
            stats.rejected += 1;
            h /= (fac_err / SAFETY).min(1.0 / MIN_FACTOR);
            last_rejected = true;
            if h < MIN_STEP {
                return Err(Error::StepUnderflow { time: t, step: h });
            }
        }
    }

    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::BlowUp { time: t });
    }
    Ok(stats)
}

/// Continuous extension on the last step: `y(t + theta h)`.
pub fn interpolate(theta: f64, h: f64, y: &[f64], k: &[Vec<f64>; 7], out: &mut [f64]) {
    let w = dense_weights(theta);
    for i in 0..y.len() {
        out[i] = y[i]
            + h * (w[0] * k[0][i]
                + w[1] * k[1][i]
                + w[2] * k[2][i]
                + w[3] * k[3][i]
                + w[4] * k[4][i]
                + w[5] * k[5][i]
                + w[6] * k[6][i]);
    }
}
