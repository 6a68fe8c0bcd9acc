use serde::{Deserialize, Serialize};

use crate::analysis::CriterionConfig;
use crate::error::{Error, Result};
use crate::integrate::{IntegratorConfig, SdeConfig};
use crate::lattice::{BoundaryDrive, LatticeParams, ModelKind};

/// Lower edge of the driving band; below it the linear chain has normal modes.
pub const LINEAR_BAND_EDGE: f64 = 2.0;

/// An increasing list of values, given explicitly or as `start:step:stop`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Range { start: f64, stop: f64, step: f64 },
    Values(Vec<f64>),
}

impl Grid {
    pub fn range(start: f64, stop: f64, step: f64) -> Self {
        Grid::Range { start, stop, step }
    }

    /// Materialised values; range points are rounded to 12 decimals so that
    /// `0.2 + 26 * 0.1` comes out as `2.8`.
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::Values(v) => v.clone(),
            Grid::Range { start, stop, step } => {
                if !(*step > 0.0) || stop < start {
                    return Vec::new();
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                (0..count)
                    .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
                    .collect()
            }
        }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if let Grid::Range { start, stop, step } = self {
            if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
                return Err(Error::contract(format!("{name}: bounds must be finite")));
            }
            if *step <= 0.0 {
                return Err(Error::contract(format!("{name}: step must be > 0")));
            }
            if stop < start {
                return Err(Error::contract(format!("{name}: stop must be >= start")));
            }
        }
        let v = self.values();
        if v.is_empty() {
            return Err(Error::contract(format!("{name} is empty")));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::contract(format!("{name} contains non-finite values")));
        }
        if !v.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::contract(format!("{name} must be strictly increasing")));
        }
        Ok(())
    }
}

/// Default amplitude grid `0.2:0.1:3.0`.
pub fn default_amplitudes() -> Grid {
    Grid::range(0.2, 3.0, 0.1)
}

fn default_sweep_integrator() -> IntegratorConfig {
    IntegratorConfig::with_t_end(200.0)
}

fn default_true() -> bool {
    true
}

/// How stochastic runs are split into transmitting / quiet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum CutoffRule {
    /// Fixed threshold on `log10(D_f)`.
    Fixed { log10_cutoff: f64 },
    /// Midpoint (in `log10`) between the noise-free `D_f` just below and at
    /// the deterministic threshold, found by sweeping `0.2:0.1:max_amplitude`.
    DeterministicMidpoint {
        #[serde(default = "default_cutoff_max_amplitude")]
        max_amplitude: f64,
    },
}

fn default_cutoff_max_amplitude() -> f64 {
    20.0
}

impl Default for CutoffRule {
    fn default() -> Self {
        CutoffRule::DeterministicMidpoint {
            max_amplitude: default_cutoff_max_amplitude(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupraSweep {
    pub model: ModelKind,
    pub params: LatticeParams,
    pub frequency: f64,
    #[serde(default = "default_amplitudes")]
    pub amplitudes: Grid,
    #[serde(default)]
    pub criterion: CriterionConfig,
    #[serde(default = "default_sweep_integrator")]
    pub integrator: IntegratorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FcrCurve {
    pub model: ModelKind,
    pub params: LatticeParams,
    pub frequencies: Grid,
    #[serde(default = "default_amplitudes")]
    pub amplitudes: Grid,
    #[serde(default)]
    pub criterion: CriterionConfig,
    #[serde(default = "default_sweep_integrator")]
    pub integrator: IntegratorConfig,
    /// Stop each sweep at its first detected jump.
    #[serde(default = "default_true")]
    pub stop_at_threshold: bool,
}

fn default_packet_length() -> usize {
    11
}
fn default_packet_amplitude() -> f64 {
    1.0
}
fn default_snapshots() -> Vec<f64> {
    vec![0.0, 4000.0, 8000.0]
}
fn default_wavepacket_integrator() -> IntegratorConfig {
    IntegratorConfig {
        sample_interval: 5.0,
        ..IntegratorConfig::with_t_end(10_000.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavePacket {
    pub model: ModelKind,
    pub params: LatticeParams,
    #[serde(default = "clamped")]
    pub drive: BoundaryDrive,
    #[serde(default = "default_packet_length")]
    pub packet_length: usize,
    #[serde(default = "default_packet_amplitude")]
    pub packet_amplitude: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_snapshots")]
    pub snapshot_times: Vec<f64>,
    #[serde(default = "default_wavepacket_integrator")]
    pub integrator: IntegratorConfig,
}

fn clamped() -> BoundaryDrive {
    BoundaryDrive::Clamped
}

fn default_breather_integrator() -> IntegratorConfig {
    IntegratorConfig {
        sample_interval: 0.05,
        ..IntegratorConfig::with_t_end(500.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Breather {
    pub model: ModelKind,
    pub params: LatticeParams,
    pub amplitude: f64,
    pub frequency: f64,
    /// First and last observed oscillator, 1-based and inclusive.
    pub observed_sites: [usize; 2],
    #[serde(default = "default_breather_integrator")]
    pub integrator: IntegratorConfig,
}

impl Breather {
    pub fn drive(&self) -> BoundaryDrive {
        BoundaryDrive::Impulsive {
            amplitude: self.amplitude,
            frequency: self.frequency,
        }
    }

    /// Observed sites as a 0-based half-open range.
    pub fn observed_range(&self) -> std::ops::Range<usize> {
        self.observed_sites[0] - 1..self.observed_sites[1]
    }
}

/// Per-run settings shared by the stochastic experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeSettings {
    #[serde(default = "default_sde_step")]
    pub step: f64,
    #[serde(default = "default_sde_t_end")]
    pub t_end: f64,
    #[serde(default = "default_sde_sample_interval")]
    pub sample_interval: f64,
}

fn default_sde_step() -> f64 {
    1e-3
}
fn default_sde_t_end() -> f64 {
    200.0
}
fn default_sde_sample_interval() -> f64 {
    0.1
}

impl Default for SdeSettings {
    fn default() -> Self {
        Self {
            step: default_sde_step(),
            t_end: default_sde_t_end(),
            sample_interval: default_sde_sample_interval(),
        }
    }
}

impl SdeSettings {
    pub fn with_seed(&self, seed: u64) -> SdeConfig {
        SdeConfig {
            step: self.step,
            t_end: self.t_end,
            seed,
            sample_interval: self.sample_interval,
        }
    }
}

fn model_i() -> ModelKind {
    ModelKind::ModelI
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StochasticEnsemble {
    #[serde(default = "model_i")]
    pub model: ModelKind,
    pub params: LatticeParams,
    pub amplitude: f64,
    pub frequency: f64,
    pub noise_intensity: f64,
    pub realizations: usize,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default)]
    pub sde: SdeSettings,
    #[serde(default)]
    pub criterion: CriterionConfig,
    #[serde(default)]
    pub cutoff: CutoffRule,
}

impl StochasticEnsemble {
    pub fn drive(&self) -> BoundaryDrive {
        BoundaryDrive::StochasticSinusoidal {
            amplitude: self.amplitude,
            frequency: self.frequency,
            noise_intensity: self.noise_intensity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FcrDistribution {
    #[serde(default = "model_i")]
    pub model: ModelKind,
    pub params: LatticeParams,
    pub frequency: f64,
    pub noise_intensity: f64,
    pub amplitudes: Grid,
    pub realizations: usize,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default)]
    pub sde: SdeSettings,
    #[serde(default)]
    pub criterion: CriterionConfig,
    #[serde(default)]
    pub cutoff: CutoffRule,
}

/// One integration from rest, written out as a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Single {
    pub model: ModelKind,
    pub params: LatticeParams,
    pub drive: BoundaryDrive,
    #[serde(default = "default_sweep_integrator")]
    pub integrator: IntegratorConfig,
    /// Used only by stochastic drives.
    #[serde(default)]
    pub sde: SdeSettings,
    #[serde(default)]
    pub seed: u64,
}

/// Every experiment the tool can run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentSpec {
    Single(Single),
    #[serde(rename = "sweep")]
    SupraSweep(SupraSweep),
    FcrCurve(FcrCurve),
    #[serde(rename = "wavepacket")]
    WavePacket(WavePacket),
    Breather(Breather),
    #[serde(rename = "ensemble")]
    StochasticEnsemble(StochasticEnsemble),
    #[serde(rename = "fcr-dist")]
    FcrDistribution(FcrDistribution),
}

impl ExperimentSpec {
    /// Subcommand name of this experiment.
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentSpec::Single(_) => "single",
            ExperimentSpec::SupraSweep(_) => "sweep",
            ExperimentSpec::FcrCurve(_) => "fcr-curve",
            ExperimentSpec::WavePacket(_) => "wavepacket",
            ExperimentSpec::Breather(_) => "breather",
            ExperimentSpec::StochasticEnsemble(_) => "ensemble",
            ExperimentSpec::FcrDistribution(_) => "fcr-dist",
        }
    }

    /// Checks every invariant; returns the warnings that do not block a run.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        let check_band = |w: f64, warnings: &mut Vec<String>| {
            if w <= LINEAR_BAND_EDGE {
                warnings.push(format!(
                    "frequency {w} lies inside the linear band (0, {LINEAR_BAND_EDGE}]"
                ));
            }
        };
        match self {
            ExperimentSpec::Single(s) => {
                s.params.validate()?;
                s.drive.validate()?;
                if s.drive.is_stochastic() {
                    s.sde.with_seed(s.seed).validate()?;
                } else {
                    s.integrator.validate()?;
                }
            }
            ExperimentSpec::SupraSweep(s) => {
                s.params.validate()?;
                positive_frequency(s.frequency)?;
                check_band(s.frequency, &mut warnings);
                s.amplitudes.validate("amplitudes")?;
                if s.amplitudes.values().len() < 2 {
                    return Err(Error::contract("amplitudes needs at least two values"));
                }
                s.criterion.validate()?;
                s.integrator.validate()?;
            }
            ExperimentSpec::FcrCurve(s) => {
                s.params.validate()?;
                s.frequencies.validate("frequencies")?;
                for w in s.frequencies.values() {
                    positive_frequency(w)?;
                    check_band(w, &mut warnings);
                }
                s.amplitudes.validate("amplitudes")?;
                if s.amplitudes.values().len() < 2 {
                    return Err(Error::contract("amplitudes needs at least two values"));
                }
                s.criterion.validate()?;
                s.integrator.validate()?;
            }
            ExperimentSpec::WavePacket(s) => {
                s.params.validate()?;
                s.drive.validate()?;
                if !matches!(
                    s.drive,
                    BoundaryDrive::Clamped | BoundaryDrive::Sinusoidal { .. }
                ) {
                    return Err(Error::contract(
                        "wave packets take a clamped or sinusoidal drive",
                    ));
                }
                if s.packet_length % 2 == 0 || s.packet_length == 0 {
                    return Err(Error::contract("packet_length must be odd"));
                }
                if s.packet_length > s.params.n_sites {
                    return Err(Error::contract("packet_length must not exceed n_sites"));
                }
                if !s.packet_amplitude.is_finite() {
                    return Err(Error::contract("packet_amplitude must be finite"));
                }
                s.integrator.validate()?;
                for &t in &s.snapshot_times {
                    let k = t / s.integrator.sample_interval;
                    if t < 0.0 || t > s.integrator.t_end || (k - k.round()).abs() > 1e-9 {
                        return Err(Error::contract(format!(
                            "snapshot time {t} is not on the sample grid"
                        )));
                    }
                }
            }
            ExperimentSpec::Breather(s) => {
                s.params.validate()?;
                s.drive().validate()?;
                let [a, b] = s.observed_sites;
                if a < 1 || b < a || b > s.params.n_sites {
                    return Err(Error::contract(format!(
                        "observed_sites must satisfy 1 <= first <= last <= {}",
                        s.params.n_sites
                    )));
                }
                s.integrator.validate()?;
            }
            ExperimentSpec::StochasticEnsemble(s) => {
                s.params.validate()?;
                s.drive().validate()?;
                check_band(s.frequency, &mut warnings);
                if s.realizations < 1 {
                    return Err(Error::contract("realizations must be >= 1"));
                }
                s.sde.with_seed(s.seed_base).validate()?;
                s.criterion.validate()?;
            }
            ExperimentSpec::FcrDistribution(s) => {
                s.params.validate()?;
                positive_frequency(s.frequency)?;
                check_band(s.frequency, &mut warnings);
                if !(s.noise_intensity >= 0.0 && s.noise_intensity.is_finite()) {
                    return Err(Error::contract("noise_intensity must be finite and >= 0"));
                }
                s.amplitudes.validate("amplitudes")?;
                if s.realizations < 1 {
                    return Err(Error::contract("realizations must be >= 1"));
                }
                s.sde.with_seed(s.seed_base).validate()?;
                s.criterion.validate()?;
            }
        }
        Ok(warnings)
    }
}

fn positive_frequency(w: f64) -> Result<()> {
    if w > 0.0 && w.is_finite() {
        Ok(())
    } else {
        Err(Error::contract("frequency must be finite and > 0"))
    }
}
