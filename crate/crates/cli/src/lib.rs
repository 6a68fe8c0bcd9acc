//! Command-line front end: config parsing, bundled figure run sets and
//! output serialisation.

pub mod config;
pub mod error;
pub mod figures;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use hystchain::experiments::{self, ExperimentOutput, ExperimentSpec};
use toml::Value;

pub use config::{parse_config, spec_from_table};
pub use error::CliError;
pub use output::{write_outputs, RunManifest};

/// One-line human summary of a result.
pub fn summarize(output: &ExperimentOutput) -> String {
    match output {
        ExperimentOutput::Single(t) => format!("{} samples of {} sites", t.len(), t.n_sites()),
        ExperimentOutput::SupraSweep(r) => match r.f_critical {
            Some(f) => format!("threshold f_cr = {f} at omega = {}", r.frequency),
            None => format!("no threshold on the grid at omega = {}", r.frequency),
        },
        ExperimentOutput::FcrCurve(r) => {
            let mut s = format!("{} thresholds", r.points.len());
            if let Some(fit) = &r.fit {
                s += &format!(", slope {:.4}, intercept {:.4}", fit.slope, fit.intercept);
            }
            if !r.absent.is_empty() {
                s += &format!(", no threshold at omega {:?}", r.absent);
            }
            s
        }
        ExperimentOutput::WavePacket(r) => format!(
            "{} energy rows, {} snapshots",
            r.energy.sample_times.len(),
            r.energy.snapshots.len()
        ),
        ExperimentOutput::Breather(r) => format!(
            "{} samples, {} observed sites",
            r.trajectory.len(),
            r.observed.n_sites()
        ),
        ExperimentOutput::StochasticEnsemble(r) => format!(
            "probability {} ({} of {}), standard error {:.4}, {} failed",
            r.probability,
            r.supra_count(),
            r.realizations.len(),
            r.standard_error(),
            r.failed.len()
        ),
        ExperimentOutput::FcrDistribution(r) => format!(
            "{} samples, support width {}, {} censored, {} failed",
            r.samples.len(),
            r.ecdf.support_width(),
            r.censored_count(),
            r.failed.len()
        ),
    }
}

/// Runs a spec and writes its outputs into `out_dir`.
pub fn execute(spec: &ExperimentSpec, warnings: &[String], out_dir: &Path) -> Result<(RunManifest, String), CliError> {
    let start = Instant::now();
    let output = experiments::run(spec)?;
    let seconds = start.elapsed().as_secs_f64();
    let manifest = write_outputs(&output, spec, out_dir, seconds, warnings)?;
    Ok((manifest, summarize(&output)))
}

/// Runs every entry of a bundled figure into `out_dir/<run name>`.
pub fn execute_figure(
    figure: u32,
    overrides: &[(String, Value)],
    seed: Option<u64>,
    out_dir: &Path,
    mut report: impl FnMut(&str),
) -> Result<Vec<PathBuf>, CliError> {
    let bundle = figures::bundle(figure)?;
    report(&format!("figure {figure}: {}", bundle.description));
    // Resolve everything first so a bad override fails before any run.
    let specs = bundle
        .runs
        .into_iter()
        .map(|r| {
            let (spec, warnings) = spec_from_table(r.table, None, overrides, seed)
                .map_err(|e| CliError::Validation(format!("run `{}`: {e}", r.name)))?;
            Ok((r.name, spec, warnings))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut dirs = Vec::new();
    for (name, spec, warnings) in specs {
        for w in &warnings {
            report(&format!("warning ({name}): {w}"));
        }
        let dir = out_dir.join(&name);
        let (_, summary) = execute(&spec, &warnings, &dir)?;
        report(&format!("{name}: {summary}"));
        dirs.push(dir);
    }
    Ok(dirs)
}
