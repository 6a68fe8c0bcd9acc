//! Experiment drivers: amplitude sweeps, threshold curves, wave packets,
//! impulsive breathers and stochastic ensembles.
//!
//! Independent runs (grid points, realizations) fan out over the current
//! rayon pool and are gathered in index order, so results never depend on
//! scheduling.

mod breather;
mod spec;
mod stochastic;
mod sweep;
mod wavepacket;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{site_energies_into, LatticeParams, LatticeState};
use crate::integrate::Sample;

pub use breather::{
    block_envelope, envelope_maxima, energy_centroid, reflection_time, run_breather, BreatherResult,
};
pub use spec::{
    default_amplitudes, Breather, CutoffRule, ExperimentSpec, FcrCurve, FcrDistribution, Grid, SdeSettings,
    Single, StochasticEnsemble, SupraSweep, WavePacket, LINEAR_BAND_EDGE,
};
pub use stochastic::{
    resolve_cutoff, run_fcr_distribution, run_stochastic_ensemble, FcrDistributionResult, FcrSample,
};
pub use sweep::{
    deterministic_df, run_fcr_curve, run_supra_sweep, sweep_until_threshold, sweep_values, FcrCurveResult,
};
pub use wavepacket::{packet_state, run_wavepacket, WavePacketResult};

/// Site energies over time, plus full states at selected times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyMap {
    pub sample_times: Vec<f64>,
    /// One row of `N` site energies per sample time.
    pub site_energy: Vec<Vec<f64>>,
    pub snapshots: Vec<LatticeState>,
}

impl EnergyMap {
    pub(crate) fn new() -> Self {
        Self {
            sample_times: Vec::new(),
            site_energy: Vec::new(),
            snapshots: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, params: &LatticeParams, s: &Sample<'_>) -> Result<()> {
        let mut row = vec![0.0; s.positions.len()];
        site_energies_into(params, s.positions, s.velocities, s.boundary, &mut row);
        if row.iter().any(|e| !e.is_finite()) {
            return Err(Error::BlowUp { time: s.time });
        }
        self.sample_times.push(s.time);
        self.site_energy.push(row);
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.site_energy.first().map_or(0, Vec::len)
    }

    /// Total energy per sample.
    pub fn totals(&self) -> Vec<f64> {
        self.site_energy.iter().map(|r| r.iter().sum()).collect()
    }
}

/// Output of any experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentOutput {
    Single(crate::integrate::Trajectory),
    SupraSweep(crate::analysis::SweepResult),
    FcrCurve(FcrCurveResult),
    WavePacket(WavePacketResult),
    Breather(BreatherResult),
    StochasticEnsemble(crate::analysis::EnsembleResult),
    FcrDistribution(FcrDistributionResult),
}

/// Runs a validated spec.
pub fn run(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    Ok(match spec {
        ExperimentSpec::Single(s) => ExperimentOutput::Single(run_single(s)?),
        ExperimentSpec::SupraSweep(s) => ExperimentOutput::SupraSweep(run_supra_sweep(s)?),
        ExperimentSpec::FcrCurve(s) => ExperimentOutput::FcrCurve(run_fcr_curve(s)?),
        ExperimentSpec::WavePacket(s) => ExperimentOutput::WavePacket(run_wavepacket(s)?),
        ExperimentSpec::Breather(s) => ExperimentOutput::Breather(run_breather(s)?),
        ExperimentSpec::StochasticEnsemble(s) => {
            ExperimentOutput::StochasticEnsemble(run_stochastic_ensemble(s)?)
        }
        ExperimentSpec::FcrDistribution(s) => ExperimentOutput::FcrDistribution(run_fcr_distribution(s)?),
    })
}

/// One trajectory from rest; stochastic drives go through Euler-Heun.
pub fn run_single(spec: &Single) -> Result<crate::integrate::Trajectory> {
    let rest = LatticeState::rest(spec.params.n_sites);
    if spec.drive.is_stochastic() {
        crate::integrate::integrate_sde(spec.model, &spec.params, &spec.drive, &rest, &spec.sde.with_seed(spec.seed))
    } else {
        crate::integrate::integrate_ode(spec.model, &spec.params, &spec.drive, &rest, &spec.integrator)
    }
}
