use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Collector, IntegratorSettings, Sample, SdeConfig, Trajectory, TrajectoryMeta};
use crate::error::{Error, Result};
use crate::lattice::{accelerations, flush_tiny, BoundaryDrive, BoundarySample, LatticeParams, LatticeState, ModelKind};

/// Generator behind realization `seed`.
pub(crate) fn noise_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The first `n` standard normal draws `Z_0, Z_1, ...` of realization `seed`.
pub fn noise_path(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = noise_rng(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Fixed-step Euler-Heun integration with white noise on the boundary,
/// handing every grid sample to `sink`.
///
/// Step `n` draws `Z_n`, sets `xi_n = Z_n / sqrt(dt)` and holds
/// `x_0 = f sin(omega t) + sigma xi_n` for both the Euler predictor and the
/// trapezoidal corrector.
pub fn integrate_sde_with<F>(
    model: ModelKind,
    params: &LatticeParams,
    drive: &BoundaryDrive,
    initial: &LatticeState,
    config: &SdeConfig,
    mut sink: F,
) -> Result<()>
where
    F: FnMut(&Sample<'_>),
{
    params.validate()?;
    drive.validate()?;
    initial.validate(params)?;
    config.validate()?;
    let sigma = match *drive {
        BoundaryDrive::StochasticSinusoidal {
            noise_intensity, ..
        } => noise_intensity,
        _ => {
            return Err(Error::contract(
                "Euler-Heun integration expects a stochastic sinusoidal drive",
            ))
        }
    };

    let n = params.n_sites;
    let dt = config.step;
    let sqrt_dt = dt.sqrt();
    let t0 = initial.time;
    let n_steps = config.n_steps();
    let every = config.steps_per_sample();

    let mut x = initial.positions.clone();
    let mut v = initial.velocities.clone();
    let mut a1 = vec![0.0; n];
    let mut a2 = vec![0.0; n];
    let mut xp = vec![0.0; n];
    let mut vp = vec![0.0; n];
    let mut rng = noise_rng(config.seed);

    sink(&Sample {
        index: 0,
        time: t0,
        positions: &x,
        velocities: &v,
        boundary: drive.deterministic_value(t0),
    });

    for step in 0..n_steps {
        let t = t0 + step as f64 * dt;
        let t_next = t0 + (step + 1) as f64 * dt;
        let z: f64 = StandardNormal.sample(&mut rng);
        let kick = sigma * z / sqrt_dt;

        let b1 = BoundarySample {
            displacement: drive.deterministic_value(t) + kick,
            velocity: drive.boundary_velocity(t),
        };
        let b2 = BoundarySample {
            displacement: drive.deterministic_value(t_next) + kick,
            velocity: drive.boundary_velocity(t_next),
        };

        accelerations(model, params, &x, &v, b1, &mut a1);
        for j in 0..n {
            xp[j] = x[j] + dt * v[j];
            vp[j] = v[j] + dt * a1[j];
        }
        accelerations(model, params, &xp, &vp, b2, &mut a2);
        let half = 0.5 * dt;
        for j in 0..n {
            x[j] += half * (v[j] + vp[j]);
            v[j] += half * (a1[j] + a2[j]);
        }
        flush_tiny(&mut x);
        flush_tiny(&mut v);

        if (step + 1) % every == 0 {
            if !(x.iter().all(|q| q.is_finite()) && v.iter().all(|q| q.is_finite())) {
                return Err(Error::BlowUp { time: t_next });
            }
            sink(&Sample {
                index: ((step + 1) / every) as usize,
                time: t0 + ((step + 1) / every) as f64 * config.sample_interval,
                positions: &x,
                velocities: &v,
                boundary: b2.displacement,
            });
        }
    }
    if !(x.iter().all(|q| q.is_finite()) && v.iter().all(|q| q.is_finite())) {
        return Err(Error::BlowUp {
            time: t0 + n_steps as f64 * dt,
        });
    }
    Ok(())
}

/// Stochastic trajectory for `drive`, seeded by `config.seed`.
pub fn integrate_sde(
    model: ModelKind,
    params: &LatticeParams,
    drive: &BoundaryDrive,
    initial: &LatticeState,
    config: &SdeConfig,
) -> Result<Trajectory> {
    let mut c = Collector::new();
    integrate_sde_with(model, params, drive, initial, config, |s| c.push(s))?;
    Ok(Trajectory {
        sample_times: c.times,
        states: c.states,
        meta: TrajectoryMeta {
            model,
            params: *params,
            drive: *drive,
            integrator: IntegratorSettings::EulerHeun(*config),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drive(sigma: f64) -> BoundaryDrive {
        BoundaryDrive::StochasticSinusoidal {
            amplitude: 1.0,
            frequency: 3.0,
            noise_intensity: sigma,
        }
    }

    #[test]
    fn noise_path_is_reproducible() {
        assert_eq!(noise_path(11, 50), noise_path(11, 50));
        assert_ne!(noise_path(11, 50), noise_path(12, 50));
    }

    #[test]
    fn negative_sigma_rejected() {
        let p = LatticeParams::new(2, 0.1, 0.1, 0.1);
        let r = integrate_sde(
            ModelKind::ModelI,
            &p,
            &drive(-0.1),
            &LatticeState::rest(2),
            &SdeConfig::new(1.0, 0),
        );
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn deterministic_drive_rejected() {
        let p = LatticeParams::new(2, 0.1, 0.1, 0.1);
        let r = integrate_sde(
            ModelKind::ModelI,
            &p,
            &BoundaryDrive::Clamped,
            &LatticeState::rest(2),
            &SdeConfig::new(1.0, 0),
        );
        assert!(r.is_err());
    }

    #[test]
    fn grid_and_determinism() {
        let p = LatticeParams::new(4, 0.1, 0.1, 0.1);
        let cfg = SdeConfig {
            step: 1e-3,
            t_end: 2.0,
            seed: 99,
            sample_interval: 0.05,
        };
        let a = integrate_sde(ModelKind::ModelI, &p, &drive(0.1), &LatticeState::rest(4), &cfg).unwrap();
        let b = integrate_sde(ModelKind::ModelI, &p, &drive(0.1), &LatticeState::rest(4), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 41);
        for (i, t) in a.sample_times.iter().enumerate() {
            assert_eq!(*t, i as f64 * 0.05);
        }
        let c = integrate_sde(
            ModelKind::ModelI,
            &p,
            &drive(0.1),
            &LatticeState::rest(4),
            &SdeConfig { seed: 100, ..cfg },
        )
        .unwrap();
        assert_ne!(a.states.last(), c.states.last());
    }
}
