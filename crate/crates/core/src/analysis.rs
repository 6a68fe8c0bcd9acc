//! Post-processing: the displacement criterion `D_f`, threshold detection
//! over an amplitude grid, least-squares lines, ensemble classification and
//! empirical distribution functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::Trajectory;
use crate::lattice::{LatticeParams, ModelKind};

/// How `D_f` is computed and compared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionConfig {
    #[serde(default = "default_delta_threshold")]
    pub delta_threshold: f64,
    /// Samples earlier than this are left out of the average.
    #[serde(default)]
    pub transient_skip: f64,
}

fn default_delta_threshold() -> f64 {
    1000.0
}

impl Default for CriterionConfig {
    fn default() -> Self {
        Self {
            delta_threshold: default_delta_threshold(),
            transient_skip: 0.0,
        }
    }
}

impl CriterionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_threshold > 0.0 && self.delta_threshold.is_finite()) {
            return Err(Error::contract("delta_threshold must be finite and > 0"));
        }
        if !(self.transient_skip >= 0.0 && self.transient_skip.is_finite()) {
            return Err(Error::contract("transient_skip must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Streaming evaluation of `D_f = (1/n_T) sum_i sum_j x_i(t_j)^2`.
///
/// Keeps one running sum per site so the result is bit-identical to the
/// site-major double sum over a stored trajectory.
#[derive(Debug, Clone)]
pub struct DfAccumulator {
    site_sums: Vec<f64>,
    count: usize,
    skip_before: f64,
}

impl DfAccumulator {
    pub fn new(n_sites: usize, config: &CriterionConfig) -> Self {
        Self {
            site_sums: vec![0.0; n_sites],
            count: 0,
            skip_before: config.transient_skip,
        }
    }

    pub fn push(&mut self, time: f64, positions: &[f64]) {
        if time < self.skip_before {
            return;
        }
        for (s, x) in self.site_sums.iter_mut().zip(positions) {
            *s += x * x;
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(&self) -> Result<f64> {
        if self.count == 0 {
            return Err(Error::contract(
                "no samples left after the transient skip",
            ));
        }
        let total: f64 = self.site_sums.iter().sum();
        Ok(total / self.count as f64)
    }
}

/// `D_f` of a stored trajectory.
pub fn compute_df(traj: &Trajectory, config: &CriterionConfig) -> Result<f64> {
    let n = traj.states.first().map_or(0, |s| s.positions.len());
    let mut acc = DfAccumulator::new(n, config);
    for s in &traj.states {
        acc.push(s.time, &s.positions);
    }
    acc.finish()
}

/// First amplitude `f_i` (i >= 2) whose `D_f` exceeds its predecessor's by
/// more than `delta_threshold`.
pub fn detect_fcr(sweep: &[(f64, f64)], delta_threshold: f64) -> Result<Option<f64>> {
    if sweep.len() < 2 {
        return Err(Error::contract("threshold detection needs at least two amplitudes"));
    }
    if !sweep.windows(2).all(|w| w[0].0 < w[1].0) {
        return Err(Error::contract("amplitudes must be strictly increasing"));
    }
    Ok(sweep
        .windows(2)
        .find(|w| w[1].1 - w[0].1 > delta_threshold)
        .map(|w| w[1].0))
}

/// Outcome of an amplitude sweep at fixed frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub amplitudes: Vec<f64>,
    pub d_values: Vec<f64>,
    pub f_critical: Option<f64>,
    pub model: ModelKind,
    pub params: LatticeParams,
    pub frequency: f64,
}

impl SweepResult {
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.amplitudes
            .iter()
            .copied()
            .zip(self.d_values.iter().copied())
            .collect()
    }
}

/// Ordinary least-squares line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
}

impl LinearFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(Error::contract("xs and ys differ in length"));
    }
    if xs.len() < 2 {
        return Err(Error::contract("a line needs at least two points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit);
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    Ok(LinearFit {
        slope,
        intercept,
        residual_rms: (ss / n).sqrt(),
    })
}

/// One stochastic run after classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub index: usize,
    pub seed: u64,
    pub d_value: f64,
    pub classified_supra: bool,
}

impl Realization {
    pub fn log10_df(&self) -> f64 {
        self.d_value.log10()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub realizations: Vec<Realization>,
    pub probability: f64,
    pub classify_cutoff: f64,
    /// Realizations dropped because their integration failed: `(index, seed)`.
    #[serde(default)]
    pub failed: Vec<(usize, u64)>,
}

impl EnsembleResult {
    pub fn supra_count(&self) -> usize {
        self.realizations.iter().filter(|r| r.classified_supra).count()
    }

    /// Binomial standard error `sqrt(p (1 - p) / R)`.
    pub fn standard_error(&self) -> f64 {
        binomial_standard_error(self.probability, self.realizations.len())
    }
}

/// Marks each run supratransmitting when `log10(D_f) > cutoff`.
pub fn classify_realizations(d_values: &[(u64, f64)], cutoff: f64) -> Result<EnsembleResult> {
    if d_values.is_empty() {
        return Err(Error::contract("no realizations to classify"));
    }
    let realizations: Vec<Realization> = d_values
        .iter()
        .enumerate()
        .map(|(index, &(seed, d))| Realization {
            index,
            seed,
            d_value: d,
            classified_supra: d.log10() > cutoff,
        })
        .collect();
    let hits = realizations.iter().filter(|r| r.classified_supra).count();
    Ok(EnsembleResult {
        probability: hits as f64 / realizations.len() as f64,
        realizations,
        classify_cutoff: cutoff,
        failed: Vec::new(),
    })
}

/// Midpoint in `log10` between a quiet and a transmitting `D_f`.
pub fn midpoint_cutoff(d_quiet: f64, d_transmitting: f64) -> f64 {
    0.5 * (d_quiet.log10() + d_transmitting.log10())
}

pub fn binomial_standard_error(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Wilson score interval for `hits` successes out of `n`.
pub fn wilson_interval(hits: usize, n: usize, z: f64) -> (f64, f64) {
    let n_f = n as f64;
    let p = hits as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Right-continuous empirical distribution function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ecdf {
    /// Sorted samples.
    pub values: Vec<f64>,
    /// `fractions[i]` is the ECDF just after `values[i]`.
    pub fractions: Vec<f64>,
}

pub fn empirical_cdf(samples: &[f64]) -> Result<Ecdf> {
    if samples.is_empty() {
        return Err(Error::contract("ECDF of an empty sample"));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::contract("ECDF sample contains NaN"));
    }
    let mut values = samples.to_vec();
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let fractions = (1..=values.len()).map(|i| i as f64 / n).collect();
    Ok(Ecdf { values, fractions })
}

impl Ecdf {
    /// Fraction of samples `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        let below = self.values.partition_point(|v| *v <= x);
        below as f64 / self.values.len() as f64
    }

    /// `max - min` of the samples.
    pub fn support_width(&self) -> f64 {
        self.values[self.values.len() - 1] - self.values[0]
    }

    /// Distinct jump points with the ECDF value after each jump.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (&v, &f) in self.values.iter().zip(&self.fractions) {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 = f,
                _ => out.push((v, f)),
            }
        }
        out
    }

    /// Two-sample Kolmogorov-Smirnov statistic `sup |F - G|`.
    pub fn ks_distance(&self, other: &Ecdf) -> f64 {
        self.values
            .iter()
            .chain(&other.values)
            .map(|&x| (self.eval(x) - other.eval(x)).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::{IntegratorConfig, IntegratorSettings, TrajectoryMeta};
    use crate::lattice::{BoundaryDrive, LatticeState};
    use proptest::prelude::*;

    fn traj(rows: &[Vec<f64>]) -> Trajectory {
        let n = rows[0].len();
        Trajectory {
            sample_times: (0..rows.len()).map(|i| i as f64).collect(),
            states: rows
                .iter()
                .enumerate()
                .map(|(i, x)| LatticeState {
                    time: i as f64,
                    positions: x.clone(),
                    velocities: vec![0.0; n],
                })
                .collect(),
            meta: TrajectoryMeta {
                model: ModelKind::ModelI,
                params: LatticeParams::new(n, 0.0, 1.0, 0.0),
                drive: BoundaryDrive::Clamped,
                integrator: IntegratorSettings::Adaptive(IntegratorConfig::with_t_end(1.0)),
            },
        }
    }

    #[test]
    fn df_examples() {
        let cfg = CriterionConfig::default();
        assert_eq!(compute_df(&traj(&[vec![0.0, 0.0], vec![0.0, 0.0]]), &cfg).unwrap(), 0.0);
        assert_eq!(compute_df(&traj(&[vec![1.0], vec![1.0], vec![1.0]]), &cfg).unwrap(), 1.0);
        assert_eq!(compute_df(&traj(&[vec![1.0, 2.0], vec![3.0, 0.0]]), &cfg).unwrap(), 7.0);
    }

    #[test]
    fn df_transient_skip() {
        let cfg = CriterionConfig {
            transient_skip: 1.0,
            ..Default::default()
        };
        assert_eq!(compute_df(&traj(&[vec![10.0], vec![1.0], vec![3.0]]), &cfg).unwrap(), 5.0);
        let all_skipped = CriterionConfig {
            transient_skip: 9.0,
            ..Default::default()
        };
        assert!(compute_df(&traj(&[vec![1.0]]), &all_skipped).is_err());
    }

    #[test]
    fn detect_examples() {
        let f = [2.5, 2.6, 2.7, 2.8, 2.9];
        let d = [1.0, 2.0, 5.0, 2000.0, 3500.0];
        let pts: Vec<_> = f.iter().copied().zip(d).collect();
        assert_eq!(detect_fcr(&pts, 1000.0).unwrap(), Some(2.8));
        let gentle = [(1.0, 1.0), (2.0, 2.0), (3.0, 3.0), (4.0, 4.0)];
        assert_eq!(detect_fcr(&gentle, 1000.0).unwrap(), None);
        assert!(detect_fcr(&[(1.0, 1.0)], 1000.0).is_err());
        assert!(detect_fcr(&[(1.0, 1.0), (1.0, 5000.0)], 1000.0).is_err());
    }

    #[test]
    fn fit_examples() {
        let xs = [0.0, 1.0, 2.0, 3.5];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let fit = linear_fit(&xs, &ys).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-14);
        assert!((fit.intercept - 1.0).abs() < 1e-14);
        assert!(fit.residual_rms < 1e-14);
        assert_eq!(linear_fit(&[1.0, 1.0], &[0.0, 3.0]), Err(Error::DegenerateFit));
    }

    #[test]
    fn classify_examples() {
        let d: Vec<(u64, f64)> = [0.5, 0.7, 4.2, 4.5]
            .iter()
            .enumerate()
            .map(|(i, l)| (i as u64, 10f64.powf(*l)))
            .collect();
        let r = classify_realizations(&d, 2.0).unwrap();
        assert_eq!(r.probability, 0.5);
        assert_eq!(r.supra_count(), 2);
        let low: Vec<(u64, f64)> = vec![(0, 1.0), (1, 3.0)];
        assert_eq!(classify_realizations(&low, 2.0).unwrap().probability, 0.0);
        assert!(classify_realizations(&[], 2.0).is_err());
    }

    #[test]
    fn ecdf_examples() {
        let e = empirical_cdf(&[3.0]).unwrap();
        assert_eq!(e.eval(2.999), 0.0);
        assert_eq!(e.eval(3.0), 1.0);
        let e = empirical_cdf(&[4.0, 2.0, 1.0, 2.0]).unwrap();
        assert_eq!(e.eval(2.0), 0.75);
        assert_eq!(e.steps(), vec![(1.0, 0.25), (2.0, 0.75), (4.0, 1.0)]);
        assert_eq!(e.support_width(), 3.0);
        assert!(empirical_cdf(&[]).is_err());
    }

    #[test]
    fn ks_distance_cases() {
        let a = empirical_cdf(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(a.ks_distance(&a), 0.0);
        let b = empirical_cdf(&[10.0, 11.0]).unwrap();
        assert_eq!(a.ks_distance(&b), 1.0);
        let c = empirical_cdf(&[1.0, 2.0, 3.0, 5.0]).unwrap();
        assert_eq!(a.ks_distance(&c), 0.25);
    }

    #[test]
    fn wilson_interval_brackets_estimate() {
        let (lo, hi) = wilson_interval(125, 250, 1.96);
        assert!(lo < 0.5 && hi > 0.5);
        assert!((hi - lo - 2.0 * 1.96 * 0.5 / 250f64.sqrt()).abs() < 0.01);
        let (lo, hi) = wilson_interval(0, 250, 1.96);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.02);
    }

    proptest! {
        #[test]
        fn df_sign_flip_and_monotone(rows in prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 3), 1..12), scale in 1.0..3.0f64) {
            let cfg = CriterionConfig::default();
            let base = compute_df(&traj(&rows), &cfg).unwrap();
            let flipped: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| -x).collect()).collect();
            prop_assert_eq!(compute_df(&traj(&flipped), &cfg).unwrap(), base);
            let grown: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| x * scale).collect()).collect();
            prop_assert!(compute_df(&traj(&grown), &cfg).unwrap() >= base);
        }

        #[test]
        fn detect_ignores_points_above_and_refinement_below(
            d in prop::collection::vec(0.0..5000.0f64, 2..15),
            cut in 0usize..15,
        ) {
            let pts: Vec<(f64, f64)> = d.iter().enumerate().map(|(i, &v)| (i as f64 * 0.1, v)).collect();
            let found = detect_fcr(&pts, 1000.0).unwrap();
            if let Some(f) = found {
                let idx = pts.iter().position(|p| p.0 == f).unwrap();
                prop_assert!(idx >= 1);
                let keep = (idx + 1 + cut).min(pts.len());
                prop_assert_eq!(detect_fcr(&pts[..keep], 1000.0).unwrap(), Some(f));
                // Insert an extra point between the first two amplitudes.
                let mut refined = pts.clone();
                refined.insert(1, (0.05, d[0] + 1500.0));
                let g = detect_fcr(&refined, 1000.0).unwrap().unwrap();
                prop_assert!(g <= f);
            }
        }

        #[test]
        fn fit_slope_shift_invariant(
            pts in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 3..20),
            shift in -100.0..100.0f64,
        ) {
            let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
            prop_assume!(xs.iter().any(|&x| (x - xs[0]).abs() > 1e-3));
            let a = linear_fit(&xs, &ys).unwrap();
            let shifted: Vec<f64> = ys.iter().map(|y| y + shift).collect();
            let b = linear_fit(&xs, &shifted).unwrap();
            prop_assert!((a.slope - b.slope).abs() < 1e-9 * (1.0 + a.slope.abs()));
            prop_assert!(a.residual_rms >= 0.0);
        }

        #[test]
        fn ecdf_monotone(samples in prop::collection::vec(-100.0..100.0f64, 1..50), probe in prop::collection::vec(-120.0..120.0f64, 2..20)) {
            let e = empirical_cdf(&samples).unwrap();
            let mut probe = probe;
            probe.sort_by(f64::total_cmp);
            let vals: Vec<f64> = probe.iter().map(|&x| e.eval(x)).collect();
            prop_assert!(vals.windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(e.eval(-1000.0), 0.0);
            prop_assert_eq!(e.eval(1000.0), 1.0);
        }

        #[test]
        fn classify_permutation_invariant(logs in prop::collection::vec(-2.0..6.0f64, 1..40), rot in 0usize..40) {
            let d: Vec<(u64, f64)> = logs.iter().enumerate().map(|(i, l)| (i as u64, 10f64.powf(*l))).collect();
            let mut perm = d.clone();
            let k = rot % perm.len();
            perm.rotate_left(k);
            perm.reverse();
            let a = classify_realizations(&d, 2.0).unwrap();
            let b = classify_realizations(&perm, 2.0).unwrap();
            prop_assert_eq!(a.probability, b.probability);
        }
    }
}
