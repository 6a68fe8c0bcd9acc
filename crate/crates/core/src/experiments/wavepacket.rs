use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::spec::WavePacket;
use super::EnergyMap;
use crate::error::Result;
use crate::integrate::integrate_ode_with;
use crate::lattice::LatticeState;

/// Energy map of a spreading packet together with its starting state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavePacketResult {
    pub initial: LatticeState,
    pub energy: EnergyMap,
}

/// Rest state with the `length` central sites set to `+-amplitude` by fair
/// coin flips drawn from `seed`.
pub fn packet_state(n_sites: usize, length: usize, amplitude: f64, seed: u64) -> LatticeState {
    let mut state = LatticeState::rest(n_sites);
    let start = (n_sites - length) / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for x in &mut state.positions[start..start + length] {
        *x = if rng.random_bool(0.5) { amplitude } else { -amplitude };
    }
    state
}

pub fn run_wavepacket(spec: &WavePacket) -> Result<WavePacketResult> {
    let initial = packet_state(spec.params.n_sites, spec.packet_length, spec.packet_amplitude, spec.seed);
    let dts = spec.integrator.sample_interval;
    let snapshot_index: Vec<usize> = spec
        .snapshot_times
        .iter()
        .map(|t| (t / dts).round() as usize)
        .collect();
    let mut energy = EnergyMap::new();
    let mut failure = None;
    integrate_ode_with(spec.model, &spec.params, &spec.drive, &initial, &spec.integrator, |s| {
        if failure.is_some() {
            return;
        }
        if let Err(e) = energy.push(&spec.params, s) {
            failure = Some(e);
            return;
        }
        if snapshot_index.contains(&s.index) {
            energy.snapshots.push(s.to_state());
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(WavePacketResult { initial, energy })
}
