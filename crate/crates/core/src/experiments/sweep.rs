use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::{FcrCurve, SupraSweep};
use crate::analysis::{detect_fcr, linear_fit, CriterionConfig, DfAccumulator, LinearFit, SweepResult};
use crate::error::{Error, Result};
use crate::integrate::{integrate_ode_with, IntegratorConfig};
use crate::lattice::{BoundaryDrive, LatticeParams, LatticeState, ModelKind};

/// `D_f` of one noise-free run from rest at amplitude `f`, frequency `omega`.
pub fn deterministic_df(
    model: ModelKind,
    params: &LatticeParams,
    amplitude: f64,
    frequency: f64,
    criterion: &CriterionConfig,
    integrator: &IntegratorConfig,
) -> Result<f64> {
    let drive = BoundaryDrive::Sinusoidal {
        amplitude,
        frequency,
    };
    let mut acc = DfAccumulator::new(params.n_sites, criterion);
    let mut finite = true;
    integrate_ode_with(
        model,
        params,
        &drive,
        &LatticeState::rest(params.n_sites),
        integrator,
        |s| {
            finite &= s.positions.iter().all(|x| x.is_finite());
            acc.push(s.time, s.positions);
        },
    )
    .map_err(|e| tag(amplitude, e))?;
    if !finite {
        return Err(tag(amplitude, Error::BlowUp { time: integrator.t_end }));
    }
    acc.finish()
}

fn tag(amplitude: f64, e: Error) -> Error {
    match e {
        Error::Contract(_) => e,
        other => Error::AtAmplitude {
            amplitude,
            source: Box::new(other),
        },
    }
}

/// `D_f` at every amplitude, in grid order. The runs are independent and
/// execute on the current rayon pool.
pub fn sweep_values(
    model: ModelKind,
    params: &LatticeParams,
    frequency: f64,
    amplitudes: &[f64],
    criterion: &CriterionConfig,
    integrator: &IntegratorConfig,
) -> Result<Vec<f64>> {
    amplitudes
        .par_iter()
        .map(|&f| deterministic_df(model, params, f, frequency, criterion, integrator))
        .collect()
}

/// Sweeps upward and stops at the first jump, evaluating one pool-sized
/// batch of amplitudes at a time. Returns the evaluated prefix.
///
/// Detection only looks at consecutive pairs, so the detected amplitude is
/// the same as for the full grid.
pub fn sweep_until_threshold(
    model: ModelKind,
    params: &LatticeParams,
    frequency: f64,
    amplitudes: &[f64],
    criterion: &CriterionConfig,
    integrator: &IntegratorConfig,
) -> Result<(Vec<f64>, Option<f64>)> {
    let batch = rayon::current_num_threads().max(1);
    let mut values: Vec<f64> = Vec::with_capacity(amplitudes.len());
    while values.len() < amplitudes.len() {
        let lo = values.len();
        let hi = (lo + batch).min(amplitudes.len());
        let chunk = sweep_values(model, params, frequency, &amplitudes[lo..hi], criterion, integrator)?;
        for d in chunk {
            let i = values.len();
            values.push(d);
            if i > 0 && values[i] - values[i - 1] > criterion.delta_threshold {
                return Ok((values, Some(amplitudes[i])));
            }
        }
    }
    Ok((values, None))
}

/// Full amplitude sweep at one frequency.
pub fn run_supra_sweep(spec: &SupraSweep) -> Result<SweepResult> {
    let amplitudes = spec.amplitudes.values();
    let d_values = sweep_values(
        spec.model,
        &spec.params,
        spec.frequency,
        &amplitudes,
        &spec.criterion,
        &spec.integrator,
    )?;
    let points: Vec<(f64, f64)> = amplitudes.iter().copied().zip(d_values.iter().copied()).collect();
    let f_critical = detect_fcr(&points, spec.criterion.delta_threshold)?;
    Ok(SweepResult {
        amplitudes,
        d_values,
        f_critical,
        model: spec.model,
        params: spec.params,
        frequency: spec.frequency,
    })
}

/// Threshold curve `f_cr(omega)` with its least-squares line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcrCurveResult {
    /// One sweep per frequency, in grid order. Early-stopped sweeps hold
    /// only the amplitudes actually evaluated.
    pub sweeps: Vec<SweepResult>,
    /// `(omega, f_cr)` for the frequencies where a jump was found.
    pub points: Vec<(f64, f64)>,
    /// Frequencies with no jump inside the amplitude grid.
    pub absent: Vec<f64>,
    /// `None` when fewer than two points are available.
    pub fit: Option<LinearFit>,
}

pub fn run_fcr_curve(spec: &FcrCurve) -> Result<FcrCurveResult> {
    let amplitudes = spec.amplitudes.values();
    let mut sweeps = Vec::new();
    for w in spec.frequencies.values() {
        let (d_values, f_critical) = if spec.stop_at_threshold {
            sweep_until_threshold(spec.model, &spec.params, w, &amplitudes, &spec.criterion, &spec.integrator)?
        } else {
            let d = sweep_values(spec.model, &spec.params, w, &amplitudes, &spec.criterion, &spec.integrator)?;
            let pts: Vec<(f64, f64)> = amplitudes.iter().copied().zip(d.iter().copied()).collect();
            let fc = detect_fcr(&pts, spec.criterion.delta_threshold)?;
            (d, fc)
        };
        sweeps.push(SweepResult {
            amplitudes: amplitudes[..d_values.len()].to_vec(),
            d_values,
            f_critical,
            model: spec.model,
            params: spec.params,
            frequency: w,
        });
    }
    let points: Vec<(f64, f64)> = sweeps
        .iter()
        .filter_map(|s| s.f_critical.map(|f| (s.frequency, f)))
        .collect();
    let absent = sweeps
        .iter()
        .filter(|s| s.f_critical.is_none())
        .map(|s| s.frequency)
        .collect();
    let fit = if points.len() >= 2 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
        Some(linear_fit(&xs, &ys)?)
    } else {
        None
    };
    Ok(FcrCurveResult {
        sweeps,
        points,
        absent,
        fit,
    })
}
