//! Integrator checks against exact solutions, invariants and convergence rates.

use hystchain::integrate::tsit5::{solve, StepControl};
use hystchain::integrate::{integrate_ode, integrate_sde, IntegratorConfig, LatticeSystem, SdeConfig};
use hystchain::lattice::{total_energy, BoundaryDrive, LatticeParams, LatticeState, ModelKind};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn tight(t_end: f64) -> IntegratorConfig {
    IntegratorConfig {
        rel_tol: 1e-10,
        abs_tol: 1e-12,
        ..IntegratorConfig::with_t_end(t_end)
    }
}

fn energy_of(p: &LatticeParams, s: &LatticeState) -> f64 {
    total_energy(p, &s.positions, &s.velocities, 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn undamped_chain_conserves_energy(
        n in 2usize..12,
        k in 0.05f64..0.5,
        eps in 0.0f64..0.2,
        model2 in any::<bool>(),
        x in prop::collection::vec(-1.0f64..1.0, 12),
        v in prop::collection::vec(-0.5f64..0.5, 12),
    ) {
        let p = LatticeParams::new(n, 0.0, k, eps);
        let model = if model2 { ModelKind::ModelII } else { ModelKind::ModelI };
        let init = LatticeState { time: 0.0, positions: x[..n].to_vec(), velocities: v[..n].to_vec() };
        let cfg = IntegratorConfig { sample_interval: 10.0, ..tight(1000.0) };
        let traj = integrate_ode(model, &p, &BoundaryDrive::Clamped, &init, &cfg).unwrap();
        let e0 = energy_of(&p, &init);
        let drift = traj.states.iter().map(|s| (energy_of(&p, s) - e0).abs()).fold(0.0, f64::max);
        prop_assert!(drift / e0 < 1e-5, "relative drift {}", drift / e0);
    }
}

#[test]
fn harmonic_oscillator_returns_after_one_period() {
    // One mass between two springs of stiffness 1/2: x'' = -x.
    let p = LatticeParams::new(1, 0.0, 0.5, 0.0);
    let init = LatticeState {
        time: 0.0,
        positions: vec![1.0],
        velocities: vec![0.0],
    };
    let period = 2.0 * std::f64::consts::PI;
    let cfg = IntegratorConfig {
        sample_interval: period,
        ..tight(period)
    };
    let traj = integrate_ode(ModelKind::ModelI, &p, &BoundaryDrive::Clamped, &init, &cfg).unwrap();
    let last = traj.last().unwrap();
    assert!((last.positions[0] - 1.0).abs() < 1e-5, "{}", last.positions[0]);
    assert!(last.velocities[0].abs() < 1e-5);
}

/// Final state of a fixed-step run: the step is capped at `h` and the
/// tolerances are so loose that every step is accepted.
fn fixed_step(sys: &LatticeSystem, y0: &[f64], t_end: f64, h: f64) -> Vec<f64> {
    let control = StepControl {
        rel_tol: 1e10,
        abs_tol: 1e10,
        initial_step: h,
        max_step: h,
    };
    let mut last = y0.to_vec();
    let stats = solve(sys, 0.0, y0, t_end, control, |_, _, _, y_new, _| last.copy_from_slice(y_new)).unwrap();
    assert_eq!(stats.rejected, 0);
    last
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn fixed_step_self_convergence_is_fifth_order() {
    let n = 6;
    let sys = LatticeSystem {
        model: ModelKind::ModelI,
        params: LatticeParams::new(n, 0.0, 0.3, 0.1),
        drive: BoundaryDrive::Sinusoidal {
            amplitude: 0.8,
            frequency: 2.5,
        },
    };
    let y0 = vec![0.0; 2 * n];
    let t_end = 8.0;
    let reference = fixed_step(&sys, &y0, t_end, 1.0 / 640.0);
    let errors: Vec<f64> = [1.0 / 10.0, 1.0 / 20.0, 1.0 / 40.0]
        .iter()
        .map(|&h| max_diff(&fixed_step(&sys, &y0, t_end, h), &reference))
        .collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((4.5..5.6).contains(&order), "observed order {order}, errors {errors:?}");
    }
}

#[test]
fn time_reversal_recovers_the_initial_state() {
    let p = LatticeParams::new(8, 0.0, 0.3, 0.1);
    let init = LatticeState {
        time: 0.0,
        positions: vec![0.3, -0.2, 0.5, 0.0, 0.1, -0.4, 0.2, 0.0],
        velocities: vec![0.0, 0.1, 0.0, -0.2, 0.0, 0.0, 0.1, 0.0],
    };
    for model in [ModelKind::ModelI, ModelKind::ModelII] {
        let fwd = integrate_ode(model, &p, &BoundaryDrive::Clamped, &init, &tight(50.0)).unwrap();
        let mut back = fwd.last().unwrap().clone();
        back.time = 0.0;
        back.velocities.iter_mut().for_each(|v| *v = -*v);
        let rev = integrate_ode(model, &p, &BoundaryDrive::Clamped, &back, &tight(50.0)).unwrap();
        let end = rev.last().unwrap();
        assert!(max_diff(&end.positions, &init.positions) < 1e-4);
        let neg: Vec<f64> = end.velocities.iter().map(|v| -v).collect();
        assert!(max_diff(&neg, &init.velocities) < 1e-4);
    }
}

#[test]
fn single_driven_oscillator_settles_on_a_periodic_orbit() {
    let p = LatticeParams::new(1, 0.1, 0.5, 0.0);
    let w = 2.5;
    let period = 2.0 * std::f64::consts::PI / w;
    let drive = BoundaryDrive::Sinusoidal {
        amplitude: 0.5,
        frequency: w,
    };
    let t_end = 1000.0 * period;
    let cfg = IntegratorConfig {
        sample_interval: period / 20.0,
        ..tight(t_end)
    };
    let traj = integrate_ode(ModelKind::ModelI, &p, &drive, &LatticeState::rest(1), &cfg).unwrap();
    let m = traj.len();
    let a = &traj.states[m - 1];
    let b = &traj.states[m - 21];
    assert!((a.positions[0] - b.positions[0]).abs() < 1e-3);
    assert!((a.velocities[0] - b.velocities[0]).abs() < 1e-3);
    let swing = traj.states[m - 21..].iter().map(|s| s.positions[0].abs()).fold(0.0, f64::max);
    assert!(swing > 1e-2, "response should not vanish");
}

fn noise_free(f: f64) -> BoundaryDrive {
    BoundaryDrive::StochasticSinusoidal {
        amplitude: f,
        frequency: 2.5,
        noise_intensity: 0.0,
    }
}

#[test]
fn noise_free_heun_tracks_the_adaptive_solution() {
    let p = LatticeParams::new(10, 0.0, 0.3, 0.1);
    let t_end = 20.0;
    let ode = integrate_ode(
        ModelKind::ModelI,
        &p,
        &BoundaryDrive::Sinusoidal {
            amplitude: 1.0,
            frequency: 2.5,
        },
        &LatticeState::rest(10),
        &tight(t_end),
    )
    .unwrap();
    let err = |dt: f64| {
        let cfg = SdeConfig {
            step: dt,
            t_end,
            seed: 1,
            sample_interval: 0.1,
        };
        let sde = integrate_sde(ModelKind::ModelI, &p, &noise_free(1.0), &LatticeState::rest(10), &cfg).unwrap();
        assert_eq!(sde.len(), ode.len());
        sde.states
            .iter()
            .zip(&ode.states)
            .map(|(a, b)| max_diff(&a.positions, &b.positions))
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (err(2e-3), err(1e-3));
    // Second-order global error: halving the step quarters the deviation.
    assert!(e1 < 1e-3, "{e1}");
    let order = (e1 / e2).log2();
    assert!((1.7..2.3).contains(&order), "order {order} ({e1}, {e2})");
}

#[test]
fn identical_seeds_give_identical_paths() {
    let p = LatticeParams::new(20, 0.1, 0.1, 0.1);
    let drive = BoundaryDrive::StochasticSinusoidal {
        amplitude: 2.0,
        frequency: 3.0,
        noise_intensity: 0.1,
    };
    let cfg = SdeConfig::new(5.0, 77);
    let a = integrate_sde(ModelKind::ModelI, &p, &drive, &LatticeState::rest(20), &cfg).unwrap();
    let b = integrate_sde(ModelKind::ModelI, &p, &drive, &LatticeState::rest(20), &cfg).unwrap();
    for (x, y) in a.states.iter().zip(&b.states) {
        for (u, v) in x.positions.iter().zip(&y.positions) {
            assert_eq!(u.to_bits(), v.to_bits());
        }
    }
}

/// `Var x(t)` for `x'' = -W^2 x + s xi` from rest.
fn exact_variance(s: f64, w: f64, t: f64) -> f64 {
    s * s / (w * w) * (t / 2.0 - (2.0 * w * t).sin() / (4.0 * w))
}

/// Independent Euler-Maruyama for the same linear oscillator.
fn euler_maruyama_variance(s: f64, w: f64, t_end: f64, dt: f64, runs: usize) -> f64 {
    let steps = (t_end / dt).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(12345);
    let mut sum2 = 0.0;
    for _ in 0..runs {
        let (mut x, mut v) = (0.0f64, 0.0f64);
        for _ in 0..steps {
            let z: f64 = StandardNormal.sample(&mut rng);
            let nx = x + dt * v;
            v += -w * w * x * dt + s * dt.sqrt() * z;
            x = nx;
        }
        sum2 += x * x;
    }
    sum2 / runs as f64
}

#[test]
fn boundary_noise_variance_matches_linear_theory() {
    // One undamped linear site: x'' = -2k x + k x_0 with x_0 = sigma xi.
    let k = 0.5;
    let sigma = 0.2;
    let p = LatticeParams::new(1, 0.0, k, 0.0);
    let drive = BoundaryDrive::StochasticSinusoidal {
        amplitude: 0.0,
        frequency: 1.0,
        noise_intensity: sigma,
    };
    let t_end = 10.0;
    let dt = 1e-3;
    let runs = 500;
    let mut sum2 = 0.0;
    for seed in 0..runs {
        let cfg = SdeConfig {
            step: dt,
            t_end,
            seed,
            sample_interval: 1.0,
        };
        let traj = integrate_sde(ModelKind::ModelI, &p, &drive, &LatticeState::rest(1), &cfg).unwrap();
        let x = traj.last().unwrap().positions[0];
        sum2 += x * x;
    }
    let heun = sum2 / runs as f64;
    let w = (2.0 * k).sqrt();
    let exact = exact_variance(k * sigma, w, t_end);
    let em = euler_maruyama_variance(k * sigma, w, t_end, dt / 10.0, runs as usize);
    // A variance estimate from 500 Gaussian samples has relative spread ~6%.
    assert!((heun / exact - 1.0).abs() < 0.25, "heun {heun} exact {exact}");
    assert!((em / exact - 1.0).abs() < 0.25, "em {em} exact {exact}");
}
