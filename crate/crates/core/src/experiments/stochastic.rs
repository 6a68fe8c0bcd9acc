use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::{CutoffRule, FcrDistribution, Grid, SdeSettings, StochasticEnsemble};
use super::sweep::sweep_until_threshold;
use crate::analysis::{
    classify_realizations, empirical_cdf, midpoint_cutoff, CriterionConfig, DfAccumulator, Ecdf,
    EnsembleResult,
};
use crate::error::{Error, Result};
use crate::integrate::{integrate_sde_with, IntegratorConfig};
use crate::lattice::{BoundaryDrive, LatticeParams, LatticeState, ModelKind};

/// The `log10(D_f)` cutoff a rule stands for at the given parameters.
///
/// The deterministic midpoint sweeps the noise-free chain over the same
/// horizon and sampling as the stochastic runs. When no jump turns up below
/// `max_amplitude` it falls back to `log10(delta_threshold)`.
pub fn resolve_cutoff(
    rule: &CutoffRule,
    model: ModelKind,
    params: &LatticeParams,
    frequency: f64,
    criterion: &CriterionConfig,
    sde: &SdeSettings,
) -> Result<f64> {
    match *rule {
        CutoffRule::Fixed { log10_cutoff } => {
            if log10_cutoff.is_finite() {
                Ok(log10_cutoff)
            } else {
                Err(Error::contract("log10_cutoff must be finite"))
            }
        }
        CutoffRule::DeterministicMidpoint { max_amplitude } => {
            let amplitudes = Grid::range(0.2, max_amplitude, 0.1).values();
            if amplitudes.len() < 2 {
                return Err(Error::contract("max_amplitude must be >= 0.3"));
            }
            let integrator = IntegratorConfig {
                sample_interval: sde.sample_interval,
                ..IntegratorConfig::with_t_end(sde.t_end)
            };
            let (d, fc) = sweep_until_threshold(model, params, frequency, &amplitudes, criterion, &integrator)?;
            Ok(match fc {
                Some(_) => {
                    let i = d.len() - 1;
                    midpoint_cutoff(d[i - 1], d[i])
                }
                None => criterion.delta_threshold.log10(),
            })
        }
    }
}

/// `D_f` of one stochastic run from rest.
fn stochastic_df(
    model: ModelKind,
    params: &LatticeParams,
    drive: &BoundaryDrive,
    sde: &SdeSettings,
    seed: u64,
    criterion: &CriterionConfig,
) -> Result<f64> {
    let mut acc = DfAccumulator::new(params.n_sites, criterion);
    integrate_sde_with(
        model,
        params,
        drive,
        &LatticeState::rest(params.n_sites),
        &sde.with_seed(seed),
        |s| acc.push(s.time, s.positions),
    )?;
    acc.finish()
}

/// Realization `r` uses seed `seed_base + r` (wrapping).
fn seed_of(base: u64, r: usize) -> u64 {
    base.wrapping_add(r as u64)
}

pub fn run_stochastic_ensemble(spec: &StochasticEnsemble) -> Result<EnsembleResult> {
    let cutoff = resolve_cutoff(
        &spec.cutoff,
        spec.model,
        &spec.params,
        spec.frequency,
        &spec.criterion,
        &spec.sde,
    )?;
    let drive = spec.drive();
    let runs: Vec<(usize, u64, Result<f64>)> = (0..spec.realizations)
        .into_par_iter()
        .map(|r| {
            let seed = seed_of(spec.seed_base, r);
            (r, seed, stochastic_df(spec.model, &spec.params, &drive, &spec.sde, seed, &spec.criterion))
        })
        .collect();

    let mut ok = Vec::new();
    let mut indices = Vec::new();
    let mut failed = Vec::new();
    for (r, seed, d) in runs {
        match d {
            Ok(d) => {
                ok.push((seed, d));
                indices.push(r);
            }
            Err(e) if e.is_numerical() => failed.push((r, seed)),
            Err(e) => return Err(e),
        }
    }
    if ok.is_empty() {
        return Err(Error::contract(format!(
            "all {} realizations failed numerically",
            spec.realizations
        )));
    }
    let mut result = classify_realizations(&ok, cutoff)?;
    for (real, r) in result.realizations.iter_mut().zip(indices) {
        real.index = r;
    }
    result.failed = failed;
    Ok(result)
}

/// Threshold amplitude of one noise realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FcrSample {
    pub index: usize,
    pub seed: u64,
    /// First grid amplitude classified as transmitting, or the grid maximum
    /// when `censored`.
    pub f_critical: f64,
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcrDistributionResult {
    pub samples: Vec<FcrSample>,
    /// Built from every sample, censored ones at the grid maximum.
    pub ecdf: Ecdf,
    pub classify_cutoff: f64,
    /// Realizations whose integration failed: `(index, seed)`.
    pub failed: Vec<(usize, u64)>,
}

impl FcrDistributionResult {
    pub fn censored_count(&self) -> usize {
        self.samples.iter().filter(|s| s.censored).count()
    }
}

pub fn run_fcr_distribution(spec: &FcrDistribution) -> Result<FcrDistributionResult> {
    let cutoff = resolve_cutoff(
        &spec.cutoff,
        spec.model,
        &spec.params,
        spec.frequency,
        &spec.criterion,
        &spec.sde,
    )?;
    let amplitudes = spec.amplitudes.values();
    let f_max = *amplitudes.last().expect("validated grid");

    let per_realization = |r: usize| -> (usize, u64, Result<FcrSample>) {
        let seed = seed_of(spec.seed_base, r);
        for &f in &amplitudes {
            let drive = BoundaryDrive::StochasticSinusoidal {
                amplitude: f,
                frequency: spec.frequency,
                noise_intensity: spec.noise_intensity,
            };
            match stochastic_df(spec.model, &spec.params, &drive, &spec.sde, seed, &spec.criterion) {
                Ok(d) if d.log10() > cutoff => {
                    return (
                        r,
                        seed,
                        Ok(FcrSample {
                            index: r,
                            seed,
                            f_critical: f,
                            censored: false,
                        }),
                    )
                }
                Ok(_) => {}
                Err(e) => {
                    let e = Error::AtAmplitude {
                        amplitude: f,
                        source: Box::new(e),
                    };
                    return (r, seed, Err(e));
                }
            }
        }
        (
            r,
            seed,
            Ok(FcrSample {
                index: r,
                seed,
                f_critical: f_max,
                censored: true,
            }),
        )
    };
    let runs: Vec<_> = (0..spec.realizations).into_par_iter().map(per_realization).collect();

    let mut samples = Vec::new();
    let mut failed = Vec::new();
    for (r, seed, s) in runs {
        match s {
            Ok(s) => samples.push(s),
            Err(e) if e.is_numerical() => failed.push((r, seed)),
            Err(e) => return Err(e),
        }
    }
    if samples.is_empty() {
        return Err(Error::contract(format!(
            "all {} realizations failed numerically",
            spec.realizations
        )));
    }
    let values: Vec<f64> = samples.iter().map(|s| s.f_critical).collect();
    Ok(FcrDistributionResult {
        ecdf: empirical_cdf(&values)?,
        samples,
        classify_cutoff: cutoff,
        failed,
    })
}
