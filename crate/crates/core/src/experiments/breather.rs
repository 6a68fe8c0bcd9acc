use serde::{Deserialize, Serialize};

use super::spec::Breather;
use super::EnergyMap;
use crate::error::{Error, Result};
use crate::integrate::{integrate_ode_with, IntegratorSettings, Trajectory, TrajectoryMeta};
use crate::lattice::LatticeState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreatherResult {
    pub trajectory: Trajectory,
    /// The same run restricted to the observed sites.
    pub observed: Trajectory,
    pub energy: EnergyMap,
}

/// Impulsive kick from rest.
pub fn run_breather(spec: &Breather) -> Result<BreatherResult> {
    let drive = spec.drive();
    let n = spec.params.n_sites;
    let mut energy = EnergyMap::new();
    let mut states = Vec::new();
    let mut failure = None;
    integrate_ode_with(
        spec.model,
        &spec.params,
        &drive,
        &LatticeState::rest(n),
        &spec.integrator,
        |s| {
            if failure.is_some() {
                return;
            }
            match energy.push(&spec.params, s) {
                Ok(()) => states.push(s.to_state()),
                Err(e) => failure = Some(e),
            }
        },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let trajectory = Trajectory {
        sample_times: energy.sample_times.clone(),
        states,
        meta: TrajectoryMeta {
            model: spec.model,
            params: spec.params,
            drive,
            integrator: IntegratorSettings::Adaptive(spec.integrator),
        },
    };
    let observed = trajectory.restrict_sites(spec.observed_range())?;
    Ok(BreatherResult {
        trajectory,
        observed,
        energy,
    })
}

/// Envelope of `max_j |x_j(t)|` over the sites of `traj`, taken as the
/// maximum over consecutive time blocks of length `block`. Returns
/// `(block start, envelope)` pairs.
pub fn block_envelope(traj: &Trajectory, block: f64) -> Result<Vec<(f64, f64)>> {
    if !(block > 0.0 && block.is_finite()) {
        return Err(Error::contract("block length must be finite and > 0"));
    }
    let Some(t0) = traj.sample_times.first().copied() else {
        return Ok(Vec::new());
    };
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (t, s) in traj.sample_times.iter().zip(&traj.states) {
        let b = ((t - t0) / block).floor();
        let start = t0 + b * block;
        let amp = s.positions.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        match out.last_mut() {
            Some(last) if last.0 == start => last.1 = last.1.max(amp),
            _ => out.push((start, amp)),
        }
    }
    Ok(out)
}

/// Interior local maxima of a sampled curve: points strictly above their
/// left neighbour and not below their right one. Plateaus count once.
pub fn envelope_maxima(curve: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < curve.len() {
        if curve[i].1 > curve[i - 1].1 {
            let mut j = i;
            while j + 1 < curve.len() && curve[j + 1].1 == curve[i].1 {
                j += 1;
            }
            if j + 1 < curve.len() && curve[j + 1].1 < curve[i].1 {
                out.push(curve[i]);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Energy-weighted mean site index (1-based) over `sites` (0-based range)
/// at every sample. Samples with no energy in the window give `NaN`.
pub fn energy_centroid(map: &EnergyMap, sites: std::ops::Range<usize>) -> Vec<(f64, f64)> {
    map.sample_times
        .iter()
        .zip(&map.site_energy)
        .map(|(&t, row)| {
            let (mut w, mut m) = (0.0, 0.0);
            for j in sites.clone() {
                w += row[j];
                m += row[j] * (j + 1) as f64;
            }
            (t, if w > 0.0 { m / w } else { f64::NAN })
        })
        .collect()
}

/// Time at which the excitation, after its first penetration into the chain,
/// is pushed back closest to the driven end: the minimum of the energy
/// centroid over `sites` after the centroid's first maximum. `None` when the
/// centroid never turns back.
pub fn reflection_time(centroid: &[(f64, f64)], smoothing: usize) -> Option<f64> {
    let smooth = moving_average(centroid, smoothing.max(1));
    let peak = envelope_maxima(&smooth).into_iter().next()?;
    smooth
        .iter()
        .filter(|(t, _)| *t > peak.0)
        .filter(|(_, c)| c.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|p| p.0)
}

fn moving_average(curve: &[(f64, f64)], width: usize) -> Vec<(f64, f64)> {
    if width <= 1 {
        return curve.to_vec();
    }
    curve
        .windows(width)
        .map(|w| {
            let t = w[width / 2].0;
            let v = w.iter().map(|p| p.1).sum::<f64>() / width as f64;
            (t, v)
        })
        .collect()
}
