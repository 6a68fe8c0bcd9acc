//! Equations of motion for chains of Reid-type oscillators.
//!
//! Site `j` (1-based in the physics, 0-based in storage) couples to its
//! neighbours through the quartic bond potential
//! `U(d) = k d^2 / 2 + eps d^4 / 4`. Particle 0 is a prescribed boundary
//! displacement supplied by a [`BoundaryDrive`]; particle `N + 1` is pinned at 0.
//!
//! Two damping laws are provided:
//!
//! * [`ModelKind::ModelI`]: local hysteretic damping `c |x_j| tanh(tau v_j)`.
//! * [`ModelKind::ModelII`]: one hysteretic term per bond,
//!   `c d tanh(tau d d')` with `d` the bond stretch seen from site `j` and
//!   `d'` its rate of change.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Beyond this argument `tanh` rounds to exactly +-1 in double precision.
const TANH_SATURATION: f64 = 20.0;

/// `tanh(sharpness * u)`, the smooth stand-in for `sgn(u)`.
#[inline]
pub fn smooth_sign(u: f64, sharpness: f64) -> f64 {
    let z = sharpness * u;
    if z > TANH_SATURATION {
        1.0
    } else if z < -TANH_SATURATION {
        -1.0
    } else {
        z.tanh()
    }
}

/// State entries smaller than this are set to zero between steps. The
/// evanescent far field of a driven chain otherwise decays into subnormal
/// numbers, which are very slow on common hardware.
pub const FLUSH_BELOW: f64 = 1e-100;

/// Zeroes every entry with magnitude below [`FLUSH_BELOW`].
#[inline]
pub fn flush_tiny(values: &mut [f64]) {
    for q in values {
        if q.abs() < FLUSH_BELOW {
            *q = 0.0;
        }
    }
}

/// Physical constants of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeParams {
    pub n_sites: usize,
    #[serde(default = "default_mass")]
    pub mass: f64,
    pub damping: f64,
    pub stiffness: f64,
    pub nonlinearity: f64,
    #[serde(default = "default_sharpness")]
    pub sign_sharpness: f64,
}

fn default_mass() -> f64 {
    1.0
}

fn default_sharpness() -> f64 {
    1000.0
}

impl LatticeParams {
    /// Unit mass and `tau = 1000`.
    pub fn new(n_sites: usize, damping: f64, stiffness: f64, nonlinearity: f64) -> Self {
        Self {
            n_sites,
            mass: default_mass(),
            damping,
            stiffness,
            nonlinearity,
            sign_sharpness: default_sharpness(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, rule: &str| Err(Error::contract(format!("{field} must be {rule}")));
        if self.n_sites < 1 {
            return bad("n_sites", ">= 1");
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return bad("mass", "finite and > 0");
        }
        if !(self.stiffness > 0.0 && self.stiffness.is_finite()) {
            return bad("stiffness", "finite and > 0");
        }
        if !(self.damping >= 0.0 && self.damping.is_finite()) {
            return bad("damping", "finite and >= 0");
        }
        if !(self.nonlinearity >= 0.0 && self.nonlinearity.is_finite()) {
            return bad("nonlinearity", "finite and >= 0");
        }
        if !(self.sign_sharpness > 0.0 && self.sign_sharpness.is_finite()) {
            return bad("sign_sharpness", "finite and > 0");
        }
        Ok(())
    }

    /// Potential energy stored in one bond of stretch `d`.
    #[inline]
    pub fn bond_energy(&self, d: f64) -> f64 {
        let d2 = d * d;
        0.5 * self.stiffness * d2 + 0.25 * self.nonlinearity * d2 * d2
    }
}

/// Which hysteretic damping law the chain uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// Damping depends only on the site's own displacement and velocity.
    #[serde(rename = "I", alias = "model_i", alias = "ModelI")]
    ModelI,
    /// Damping acts on the two bond stretches around the site.
    #[serde(rename = "II", alias = "model_ii", alias = "ModelII")]
    ModelII,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::ModelI => f.write_str("I"),
            ModelKind::ModelII => f.write_str("II"),
        }
    }
}

/// Prescribed motion of the left end (particle 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryDrive {
    /// `f sin(omega t)` for all time.
    Sinusoidal { amplitude: f64, frequency: f64 },
    /// First half cycle of `f sin(omega t)`, zero afterwards.
    Impulsive { amplitude: f64, frequency: f64 },
    /// `f sin(omega t) + sigma xi(t)` with Gaussian white noise `xi`.
    StochasticSinusoidal {
        amplitude: f64,
        frequency: f64,
        noise_intensity: f64,
    },
    /// Left end pinned at zero.
    Clamped,
}

impl BoundaryDrive {
    pub fn is_stochastic(&self) -> bool {
        matches!(self, BoundaryDrive::StochasticSinusoidal { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let check = |f: f64, w: f64| -> Result<()> {
            if !f.is_finite() {
                return Err(Error::contract("drive amplitude must be finite"));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::contract("drive frequency must be finite and > 0"));
            }
            Ok(())
        };
        match *self {
            BoundaryDrive::Sinusoidal { amplitude, frequency }
            | BoundaryDrive::Impulsive { amplitude, frequency } => check(amplitude, frequency),
            BoundaryDrive::StochasticSinusoidal {
                amplitude,
                frequency,
                noise_intensity,
            } => {
                check(amplitude, frequency)?;
                if !(noise_intensity >= 0.0 && noise_intensity.is_finite()) {
                    return Err(Error::contract("noise_intensity must be finite and >= 0"));
                }
                Ok(())
            }
            BoundaryDrive::Clamped => Ok(()),
        }
    }

    /// Deterministic part of the boundary displacement at `t`.
    #[inline]
    pub fn deterministic_value(&self, t: f64) -> f64 {
        match *self {
            BoundaryDrive::Sinusoidal { amplitude, frequency }
            | BoundaryDrive::StochasticSinusoidal {
                amplitude, frequency, ..
            } => amplitude * (frequency * t).sin(),
            BoundaryDrive::Impulsive { amplitude, frequency } => {
                if (0.0..=PI / frequency).contains(&t) {
                    amplitude * (frequency * t).sin()
                } else {
                    0.0
                }
            }
            BoundaryDrive::Clamped => 0.0,
        }
    }

    /// Time derivative of [`Self::deterministic_value`]; the noise term has none.
    #[inline]
    pub fn boundary_velocity(&self, t: f64) -> f64 {
        match *self {
            BoundaryDrive::Sinusoidal { amplitude, frequency }
            | BoundaryDrive::StochasticSinusoidal {
                amplitude, frequency, ..
            } => amplitude * frequency * (frequency * t).cos(),
            BoundaryDrive::Impulsive { amplitude, frequency } => {
                if (0.0..=PI / frequency).contains(&t) {
                    amplitude * frequency * (frequency * t).cos()
                } else {
                    0.0
                }
            }
            BoundaryDrive::Clamped => 0.0,
        }
    }

    /// Boundary displacement `x_0(t)`.
    ///
    /// `noise_increment` is the discretised white-noise sample of the current
    /// step and must be given exactly when the drive is stochastic.
    pub fn boundary_value(&self, t: f64, noise_increment: Option<f64>) -> Result<f64> {
        match (*self, noise_increment) {
            (
                BoundaryDrive::StochasticSinusoidal {
                    noise_intensity, ..
                },
                Some(xi),
            ) => Ok(self.deterministic_value(t) + noise_intensity * xi),
            (BoundaryDrive::StochasticSinusoidal { .. }, None) => Err(Error::contract(
                "stochastic drive needs a noise increment",
            )),
            (_, Some(_)) => Err(Error::contract(
                "noise increment given for a deterministic drive",
            )),
            (_, None) => Ok(self.deterministic_value(t)),
        }
    }
}

/// What the left end is doing at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundarySample {
    pub displacement: f64,
    /// Only Model II reads this (through the first bond's stretch rate).
    pub velocity: f64,
}

impl BoundarySample {
    pub fn at_rest(displacement: f64) -> Self {
        Self {
            displacement,
            velocity: 0.0,
        }
    }
}

/// Phase-space snapshot of the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeState {
    pub time: f64,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
}

impl LatticeState {
    pub fn rest(n_sites: usize) -> Self {
        Self {
            time: 0.0,
            positions: vec![0.0; n_sites],
            velocities: vec![0.0; n_sites],
        }
    }

    pub fn n_sites(&self) -> usize {
        self.positions.len()
    }

    pub fn is_finite(&self) -> bool {
        self.time.is_finite()
            && self.positions.iter().all(|x| x.is_finite())
            && self.velocities.iter().all(|v| v.is_finite())
    }

    /// Checks lengths against `params` and that every entry is finite.
    pub fn validate(&self, params: &LatticeParams) -> Result<()> {
        if self.positions.len() != params.n_sites || self.velocities.len() != params.n_sites {
            return Err(Error::contract(format!(
                "state has {} positions / {} velocities, lattice has {} sites",
                self.positions.len(),
                self.velocities.len(),
                params.n_sites
            )));
        }
        if !self.is_finite() {
            return Err(Error::contract("state contains non-finite entries"));
        }
        Ok(())
    }
}

/// Writes the accelerations of all sites into `out`.
///
/// This is the hot loop behind both integrators; slices must all have the
/// lattice length (checked in debug builds only).
pub fn accelerations(
    model: ModelKind,
    params: &LatticeParams,
    x: &[f64],
    v: &[f64],
    boundary: BoundarySample,
    out: &mut [f64],
) {
    let n = x.len();
    debug_assert_eq!(v.len(), n);
    debug_assert_eq!(out.len(), n);
    let LatticeParams {
        mass,
        damping: c,
        stiffness: k,
        nonlinearity: eps,
        sign_sharpness: tau,
        ..
    } = *params;
    let inv_m = 1.0 / mass;

    // Left neighbour of site 0 is the driven boundary.
    let mut x_prev = boundary.displacement;
    let mut v_prev = boundary.velocity;
    match model {
        ModelKind::ModelI => {
            for j in 0..n {
                let xj = x[j];
                let x_next = if j + 1 < n { x[j + 1] } else { 0.0 };
                let dm = xj - x_prev;
                let dp = xj - x_next;
                let damp = c * xj.abs() * smooth_sign(v[j], tau);
                let force = -damp - k * (dm + dp) - eps * (dm * dm * dm + dp * dp * dp);
                out[j] = force * inv_m;
                x_prev = xj;
            }
        }
        ModelKind::ModelII => {
            for j in 0..n {
                let (xj, vj) = (x[j], v[j]);
                let (x_next, v_next) = if j + 1 < n { (x[j + 1], v[j + 1]) } else { (0.0, 0.0) };
                let dm = xj - x_prev;
                let dp = xj - x_next;
                let dvm = vj - v_prev;
                let dvp = vj - v_next;
                let damp = c * (dm * smooth_sign(dm * dvm, tau) + dp * smooth_sign(dp * dvp, tau));
                let force = -damp - k * (dm + dp) - eps * (dm * dm * dm + dp * dp * dp);
                out[j] = force * inv_m;
                x_prev = xj;
                v_prev = vj;
            }
        }
    }
}

/// Accelerations for `state` with the left end at `boundary_sample`.
///
/// The boundary velocity (needed by Model II) is taken from `drive`.
pub fn rhs(
    model: ModelKind,
    state: &LatticeState,
    params: &LatticeParams,
    drive: &BoundaryDrive,
    boundary_sample: f64,
) -> Result<Vec<f64>> {
    state.validate(params)?;
    let boundary = BoundarySample {
        displacement: boundary_sample,
        velocity: drive.boundary_velocity(state.time),
    };
    let mut out = vec![0.0; params.n_sites];
    accelerations(
        model,
        params,
        &state.positions,
        &state.velocities,
        boundary,
        &mut out,
    );
    Ok(out)
}

/// Model I right-hand side (local damping).
pub fn rhs_model_i(
    state: &LatticeState,
    params: &LatticeParams,
    drive: &BoundaryDrive,
    boundary_sample: f64,
) -> Result<Vec<f64>> {
    rhs(ModelKind::ModelI, state, params, drive, boundary_sample)
}

/// Model II right-hand side (bond damping).
pub fn rhs_model_ii(
    state: &LatticeState,
    params: &LatticeParams,
    drive: &BoundaryDrive,
    boundary_sample: f64,
) -> Result<Vec<f64>> {
    rhs(ModelKind::ModelII, state, params, drive, boundary_sample)
}

/// Per-site energy: kinetic term plus half of every adjacent bond's potential.
pub fn site_energies_into(params: &LatticeParams, x: &[f64], v: &[f64], x0: f64, out: &mut [f64]) {
    let n = x.len();
    let mut left_bond = params.bond_energy(x[0] - x0);
    for j in 0..n {
        let x_next = if j + 1 < n { x[j + 1] } else { 0.0 };
        let right_bond = params.bond_energy(x[j] - x_next);
        out[j] = 0.5 * params.mass * v[j] * v[j] + 0.5 * (left_bond + right_bond);
        left_bond = right_bond;
    }
}

pub fn site_energies(
    state: &LatticeState,
    params: &LatticeParams,
    boundary_sample: f64,
) -> Result<Vec<f64>> {
    state.validate(params)?;
    let mut out = vec![0.0; params.n_sites];
    site_energies_into(
        params,
        &state.positions,
        &state.velocities,
        boundary_sample,
        &mut out,
    );
    Ok(out)
}

/// Kinetic energy plus the full potential of all `N + 1` bonds.
pub fn total_energy(params: &LatticeParams, x: &[f64], v: &[f64], x0: f64) -> f64 {
    let n = x.len();
    let kinetic: f64 = v.iter().map(|vj| 0.5 * params.mass * vj * vj).sum();
    let mut potential = params.bond_energy(x[0] - x0) + params.bond_energy(x[n - 1]);
    potential += x.windows(2).map(|w| params.bond_energy(w[1] - w[0])).sum::<f64>();
    kinetic + potential
}
