//! Time stepping for the chain: adaptive Tsitouras 5(4) for deterministic
//! drives, fixed-step Euler-Heun for the noisy boundary.
//!
//! Both integrators emit states on the uniform grid `{0, dt_s, 2 dt_s, ...}`
//! through a sink callback; [`integrate_ode`] and [`integrate_sde`] collect
//! those samples into a [`Trajectory`].

mod heun;
pub mod tsit5;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{accelerations, flush_tiny, BoundaryDrive, BoundarySample, LatticeParams, LatticeState, ModelKind};

pub use heun::{integrate_sde, integrate_sde_with, noise_path};
pub use tsit5::{OdeSystem, SolveStats, StepControl};

/// Settings for the adaptive deterministic integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    #[serde(default = "default_initial_step")]
    pub initial_step: f64,
    #[serde(default = "default_max_step")]
    pub max_step: f64,
    #[serde(default = "default_sample_interval")]
    pub sample_interval: f64,
    pub t_end: f64,
}

fn default_rel_tol() -> f64 {
    1e-6
}
fn default_abs_tol() -> f64 {
    1e-8
}
fn default_initial_step() -> f64 {
    1e-3
}
fn default_max_step() -> f64 {
    1.0
}
fn default_sample_interval() -> f64 {
    0.1
}

impl IntegratorConfig {
    /// Default tolerances and sampling up to `t_end`.
    pub fn with_t_end(t_end: f64) -> Self {
        Self {
            rel_tol: default_rel_tol(),
            abs_tol: default_abs_tol(),
            initial_step: default_initial_step(),
            max_step: default_max_step(),
            sample_interval: default_sample_interval(),
            t_end,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::contract(format!("{name} must be finite and > 0")))
            }
        };
        positive("rel_tol", self.rel_tol)?;
        positive("abs_tol", self.abs_tol)?;
        positive("initial_step", self.initial_step)?;
        positive("max_step", self.max_step)?;
        positive("sample_interval", self.sample_interval)?;
        positive("t_end", self.t_end)?;
        if self.sample_interval > self.t_end {
            return Err(Error::contract("sample_interval must not exceed t_end"));
        }
        Ok(())
    }

    fn control(&self) -> StepControl {
        StepControl {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            initial_step: self.initial_step,
            max_step: self.max_step,
        }
    }
}

/// Settings for the fixed-step stochastic integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeConfig {
    #[serde(default = "default_sde_step")]
    pub step: f64,
    pub t_end: f64,
    pub seed: u64,
    #[serde(default = "default_sample_interval")]
    pub sample_interval: f64,
}


fn default_sde_step() -> f64 {
    1e-3
}

impl SdeConfig {
    pub fn new(t_end: f64, seed: u64) -> Self {
        Self {
            step: default_sde_step(),
            t_end,
            seed,
            sample_interval: default_sample_interval(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("step", self.step),
            ("t_end", self.t_end),
            ("sample_interval", self.sample_interval),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::contract(format!("{name} must be finite and > 0")));
            }
        }
        if self.sample_interval > self.t_end {
            return Err(Error::contract("sample_interval must not exceed t_end"));
        }
        let ratio = self.sample_interval / self.step;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
            return Err(Error::contract(
                "sample_interval must be a whole multiple of step",
            ));
        }
        Ok(())
    }

    /// Number of fixed steps to reach `t_end` (rounded to the nearest step).
    pub fn n_steps(&self) -> u64 {
        (self.t_end / self.step).round() as u64
    }

    pub(crate) fn steps_per_sample(&self) -> u64 {
        (self.sample_interval / self.step).round() as u64
    }
}

/// How a trajectory was produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum IntegratorSettings {
    Adaptive(IntegratorConfig),
    EulerHeun(SdeConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub model: ModelKind,
    pub params: LatticeParams,
    pub drive: BoundaryDrive,
    pub integrator: IntegratorSettings,
}

impl TrajectoryMeta {
    pub fn seed(&self) -> Option<u64> {
        match self.integrator {
            IntegratorSettings::EulerHeun(c) => Some(c.seed),
            IntegratorSettings::Adaptive(_) => None,
        }
    }
}

/// Time-sampled history of the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub sample_times: Vec<f64>,
    pub states: Vec<LatticeState>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Sites per stored state; smaller than `meta.params.n_sites` after
    /// [`Trajectory::restrict_sites`].
    pub fn n_sites(&self) -> usize {
        self.states.first().map_or(self.meta.params.n_sites, |s| s.positions.len())
    }

    pub fn last(&self) -> Option<&LatticeState> {
        self.states.last()
    }

    /// Keeps only sites `range` (0-based, half-open) in every state.
    pub fn restrict_sites(&self, range: std::ops::Range<usize>) -> Result<Trajectory> {
        if range.start >= range.end || range.end > self.n_sites() {
            return Err(Error::contract(format!(
                "site range {range:?} outside 0..{}",
                self.n_sites()
            )));
        }
        let states = self
            .states
            .iter()
            .map(|s| LatticeState {
                time: s.time,
                positions: s.positions[range.clone()].to_vec(),
                velocities: s.velocities[range.clone()].to_vec(),
            })
            .collect();
        Ok(Trajectory {
            sample_times: self.sample_times.clone(),
            states,
            meta: self.meta.clone(),
        })
    }
}

/// One emitted grid sample, borrowed from the integrator's buffers.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub index: usize,
    pub time: f64,
    pub positions: &'a [f64],
    pub velocities: &'a [f64],
    /// Boundary displacement in force at this instant.
    pub boundary: f64,
}

impl Sample<'_> {
    pub fn to_state(&self) -> LatticeState {
        LatticeState {
            time: self.time,
            positions: self.positions.to_vec(),
            velocities: self.velocities.to_vec(),
        }
    }
}

/// `k dt_s` for every grid point up to `t_end` (inclusive up to rounding).
pub fn sample_grid_len(sample_interval: f64, t_end: f64) -> usize {
    ((t_end / sample_interval) * (1.0 + 1e-12)).floor() as usize + 1
}

/// The chain as a first-order system `y = [x, v]`.
pub struct LatticeSystem {
    pub model: ModelKind,
    pub params: LatticeParams,
    pub drive: BoundaryDrive,
}

impl OdeSystem for LatticeSystem {
    fn dim(&self) -> usize {
        2 * self.params.n_sites
    }

    #[inline]
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.params.n_sites;
        let (x, v) = y.split_at(n);
        let (dx, dv) = dy.split_at_mut(n);
        dx.copy_from_slice(v);
        let boundary = BoundarySample {
            displacement: self.drive.deterministic_value(t),
            velocity: self.drive.boundary_velocity(t),
        };
        accelerations(self.model, &self.params, x, v, boundary, dv);
    }

    fn after_step(&self, y: &mut [f64]) {
        flush_tiny(y);
    }
}

fn check_inputs(params: &LatticeParams, drive: &BoundaryDrive, initial: &LatticeState) -> Result<()> {
    params.validate()?;
    drive.validate()?;
    initial.validate(params)
}

/// Runs the adaptive integrator and hands every grid sample to `sink`.
pub fn integrate_ode_with<F>(
    model: ModelKind,
    params: &LatticeParams,
    drive: &BoundaryDrive,
    initial: &LatticeState,
    config: &IntegratorConfig,
    mut sink: F,
) -> Result<SolveStats>
where
    F: FnMut(&Sample<'_>),
{
    check_inputs(params, drive, initial)?;
    config.validate()?;
    if drive.is_stochastic() {
        return Err(Error::contract(
            "stochastic drives need the Euler-Heun integrator",
        ));
    }
    let n = params.n_sites;
    let system = LatticeSystem {
        model,
        params: *params,
        drive: *drive,
    };
    let t0 = initial.time;
    let mut y0 = Vec::with_capacity(2 * n);
    y0.extend_from_slice(&initial.positions);
    y0.extend_from_slice(&initial.velocities);

    let dts = config.sample_interval;
    let n_samples = sample_grid_len(dts, config.t_end - t0);
    let grid = |i: usize| t0 + i as f64 * dts;

    sink(&Sample {
        index: 0,
        time: t0,
        positions: &y0[..n],
        velocities: &y0[n..],
        boundary: drive.deterministic_value(t0),
    });
    let mut next = 1;
    let mut buf = vec![0.0; 2 * n];

    let stats = tsit5::solve(&system, t0, &y0, config.t_end, config.control(), |t, h, y, y_new, k| {
        let t_new = t + h;
        while next < n_samples {
            let ts = grid(next);
            if ts > t_new * (1.0 + 1e-14) {
                break;
            }
            let out: &[f64] = if ts >= t_new {
                y_new
            } else {
                tsit5::interpolate((ts - t) / h, h, y, k, &mut buf);
                &buf
            };
            sink(&Sample {
                index: next,
                time: ts,
                positions: &out[..n],
                velocities: &out[n..],
                boundary: drive.deterministic_value(ts),
            });
            next += 1;
        }
    })?;
    debug_assert_eq!(next, n_samples);
    Ok(stats)
}

/// Collects a sink into a trajectory, rejecting non-finite samples.
pub(crate) struct Collector {
    pub times: Vec<f64>,
    pub states: Vec<LatticeState>,
    pub blown_up_at: Option<f64>,
}

impl Collector {
    pub fn new() -> Self {
        Self {
            times: Vec::new(),
            states: Vec::new(),
            blown_up_at: None,
        }
    }

    pub fn push(&mut self, s: &Sample<'_>) {
        let state = s.to_state();
        if self.blown_up_at.is_none() && !state.is_finite() {
            self.blown_up_at = Some(s.time);
        }
        self.times.push(s.time);
        self.states.push(state);
    }
}

/// Adaptive integration of a deterministic drive, sampled on the uniform grid.
pub fn integrate_ode(
    model: ModelKind,
    params: &LatticeParams,
    drive: &BoundaryDrive,
    initial: &LatticeState,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    let mut c = Collector::new();
    integrate_ode_with(model, params, drive, initial, config, |s| c.push(s))?;
    if let Some(time) = c.blown_up_at {
        return Err(Error::BlowUp { time });
    }
    Ok(Trajectory {
        sample_times: c.times,
        states: c.states,
        meta: TrajectoryMeta {
            model,
            params: *params,
            drive: *drive,
            integrator: IntegratorSettings::Adaptive(*config),
        },
    })
}
