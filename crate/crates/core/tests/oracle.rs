//! Independent re-evaluations of the equations of motion and of the
//! post-processing, compared with the library.

use hystchain::analysis::{compute_df, detect_fcr, CriterionConfig};
use hystchain::integrate::IntegratorConfig;
use hystchain::lattice::{rhs, BoundaryDrive, LatticeParams, LatticeState, ModelKind};
use hystchain::{integrate_ode, integrate_sde, SdeConfig};
use proptest::prelude::*;

/// Padded positions `[x_0, x_1, .., x_N, 0]` with the same layout for velocities.
fn padded(inner: &[f64], left: f64) -> Vec<f64> {
    let mut p = vec![left];
    p.extend_from_slice(inner);
    p.push(0.0);
    p
}

/// Direct substitution into the local-damping law.
fn model_i_oracle(p: &LatticeParams, x: &[f64], v: &[f64], x0: f64) -> Vec<f64> {
    let xs = padded(x, x0);
    (1..=x.len())
        .map(|j| {
            let damping = p.damping * xs[j].abs() * (p.sign_sharpness * v[j - 1]).tanh();
            let linear = p.stiffness * (-xs[j - 1] + 2.0 * xs[j] - xs[j + 1]);
            let cubic = p.nonlinearity * (-(xs[j + 1] - xs[j]).powi(3) + (xs[j] - xs[j - 1]).powi(3));
            (-damping - linear - cubic) / p.mass
        })
        .collect()
}

/// Direct substitution into the bond-damping law.
fn model_ii_oracle(p: &LatticeParams, x: &[f64], v: &[f64], x0: f64, v0: f64) -> Vec<f64> {
    let xs = padded(x, x0);
    let vs = padded(v, v0);
    (1..=x.len())
        .map(|j| {
            let left = xs[j] - xs[j - 1];
            let right = xs[j] - xs[j + 1];
            let damping = p.damping
                * (left * (p.sign_sharpness * left * (vs[j] - vs[j - 1])).tanh()
                    + right * (p.sign_sharpness * right * (vs[j] - vs[j + 1])).tanh());
            let linear = p.stiffness * (-xs[j - 1] + 2.0 * xs[j] - xs[j + 1]);
            let cubic = p.nonlinearity * (-(xs[j + 1] - xs[j]).powi(3) + (xs[j] - xs[j - 1]).powi(3));
            (-damping - linear - cubic) / p.mass
        })
        .collect()
}

fn small_state() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..=3).prop_flat_map(|n| {
        (
            prop::collection::vec(-2.0f64..2.0, n),
            prop::collection::vec(-2.0f64..2.0, n),
        )
    })
}

fn params_strategy() -> impl Strategy<Value = LatticeParams> {
    (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.5f64..2.0, 1.0f64..2000.0).prop_map(|(c, k, e, m, tau)| {
        LatticeParams {
            mass: m,
            sign_sharpness: tau,
            ..LatticeParams::new(1, c, k, e)
        }
    })
}

proptest! {
    #[test]
    fn model_i_matches_direct_substitution(
        (x, v) in small_state(),
        p in params_strategy(),
        t in 0.0f64..10.0,
        f in -3.0f64..3.0,
        w in 0.5f64..5.0,
    ) {
        let p = LatticeParams { n_sites: x.len(), ..p };
        let drive = BoundaryDrive::Sinusoidal { amplitude: f, frequency: w };
        let x0 = drive.deterministic_value(t);
        let state = LatticeState { time: t, positions: x.clone(), velocities: v.clone() };
        let got = rhs(ModelKind::ModelI, &state, &p, &drive, x0).unwrap();
        let want = model_i_oracle(&p, &x, &v, x0);
        for (a, b) in got.iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn model_ii_matches_direct_substitution(
        (x, v) in small_state(),
        p in params_strategy(),
        t in 0.0f64..10.0,
        f in -3.0f64..3.0,
        w in 0.5f64..5.0,
    ) {
        let p = LatticeParams { n_sites: x.len(), ..p };
        let drive = BoundaryDrive::Sinusoidal { amplitude: f, frequency: w };
        let x0 = drive.deterministic_value(t);
        let v0 = f * w * (w * t).cos();
        let state = LatticeState { time: t, positions: x.clone(), velocities: v.clone() };
        let got = rhs(ModelKind::ModelII, &state, &p, &drive, x0).unwrap();
        let want = model_ii_oracle(&p, &x, &v, x0, v0);
        for (a, b) in got.iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }
}

/// Site-major double sum over a stored trajectory.
fn brute_df(rows: &[Vec<f64>]) -> f64 {
    let n = rows[0].len();
    let mut total = 0.0;
    for j in 0..n {
        let mut site = 0.0;
        for r in rows {
            site += r[j] * r[j];
        }
        total += site;
    }
    total / rows.len() as f64
}

fn brute_fcr(points: &[(f64, f64)], delta: f64) -> Option<f64> {
    for i in 1..points.len() {
        if points[i].1 - points[i - 1].1 > delta {
            return Some(points[i].0);
        }
    }
    None
}

#[test]
fn df_matches_brute_force_on_stored_trajectories() {
    let p = LatticeParams::new(12, 0.05, 0.3, 0.1);
    let drive = BoundaryDrive::Sinusoidal {
        amplitude: 1.5,
        frequency: 2.5,
    };
    let traj = integrate_ode(
        ModelKind::ModelI,
        &p,
        &drive,
        &LatticeState::rest(12),
        &IntegratorConfig::with_t_end(30.0),
    )
    .unwrap();
    let rows: Vec<Vec<f64>> = traj.states.iter().map(|s| s.positions.clone()).collect();
    assert_eq!(compute_df(&traj, &CriterionConfig::default()).unwrap(), brute_df(&rows));

    let noisy = integrate_sde(
        ModelKind::ModelII,
        &p,
        &BoundaryDrive::StochasticSinusoidal {
            amplitude: 1.0,
            frequency: 3.0,
            noise_intensity: 0.05,
        },
        &LatticeState::rest(12),
        &SdeConfig::new(10.0, 5),
    )
    .unwrap();
    let rows: Vec<Vec<f64>> = noisy.states.iter().map(|s| s.positions.clone()).collect();
    assert_eq!(compute_df(&noisy, &CriterionConfig::default()).unwrap(), brute_df(&rows));
}

proptest! {
    #[test]
    fn df_matches_brute_force_on_random_tables(
        rows in (1usize..6).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(-5.0f64..5.0, n), 1..40))
    ) {
        let n = rows[0].len();
        let mut acc = hystchain::analysis::DfAccumulator::new(n, &CriterionConfig::default());
        for (i, r) in rows.iter().enumerate() {
            acc.push(i as f64, r);
        }
        prop_assert_eq!(acc.finish().unwrap(), brute_df(&rows));
    }

    #[test]
    fn detect_fcr_matches_brute_force(
        ds in prop::collection::vec(0.0f64..5000.0, 2..30),
        delta in 1.0f64..3000.0,
    ) {
        let points: Vec<(f64, f64)> = ds.iter().enumerate().map(|(i, &d)| (0.2 + i as f64 * 0.1, d)).collect();
        prop_assert_eq!(detect_fcr(&points, delta).unwrap(), brute_fcr(&points, delta));
    }
}
