//! Result tables, summaries and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use hystchain::analysis::{EnsembleResult, SweepResult};
use hystchain::experiments::{
    BreatherResult, EnergyMap, ExperimentOutput, ExperimentSpec, FcrCurveResult, FcrDistributionResult,
    WavePacketResult,
};
use hystchain::integrate::Trajectory;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Shortest text that parses back to the same `f64`. Zero is written `0`.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        if v.is_sign_negative() { "-0".into() } else { "0".into() }
    } else if !v.is_finite() || (1e-5..1e16).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// A delimiter-separated table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_floats(&mut self, row: impl IntoIterator<Item = f64>) {
        self.rows.push(row.into_iter().map(fmt_f64).collect());
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| CliError::Validation("empty table".into()))?
            .split(',')
            .map(str::to_string)
            .collect::<Vec<_>>();
        let rows = lines
            .map(|l| l.split(',').map(str::to_string).collect::<Vec<_>>())
            .collect::<Vec<_>>();
        if let Some(bad) = rows.iter().position(|r| r.len() != header.len()) {
            return Err(CliError::Validation(format!("row {} has the wrong width", bad + 1)));
        }
        Ok(Self { header, rows })
    }

    /// Cells as numbers; `true`/`false` map to 1 and 0.
    pub fn numeric(&self) -> Result<Vec<Vec<f64>>, CliError> {
        self.rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|c| match c.as_str() {
                        "true" => Ok(1.0),
                        "false" => Ok(0.0),
                        _ => c
                            .parse::<f64>()
                            .map_err(|_| CliError::Validation(format!("not a number: `{c}`"))),
                    })
                    .collect()
            })
            .collect()
    }
}

fn indexed_header(first: &str, prefix: &str, n: usize) -> Vec<String> {
    std::iter::once(first.to_string())
        .chain((1..=n).map(|j| format!("{prefix}_{j}")))
        .collect()
}

pub fn positions_table(traj: &Trajectory) -> Table {
    let mut t = Table::new(indexed_header("t", "x", traj.n_sites()));
    for s in &traj.states {
        t.push_floats(std::iter::once(s.time).chain(s.positions.iter().copied()));
    }
    t
}

pub fn velocities_table(traj: &Trajectory) -> Table {
    let mut t = Table::new(indexed_header("t", "v", traj.n_sites()));
    for s in &traj.states {
        t.push_floats(std::iter::once(s.time).chain(s.velocities.iter().copied()));
    }
    t
}

pub fn energy_table(map: &EnergyMap) -> Table {
    let mut t = Table::new(indexed_header("t", "e", map.n_sites()));
    for (time, row) in map.sample_times.iter().zip(&map.site_energy) {
        t.push_floats(std::iter::once(*time).chain(row.iter().copied()));
    }
    t
}

fn snapshot_table(map: &EnergyMap) -> Table {
    let n = map.snapshots.first().map_or(0, |s| s.positions.len());
    let mut header = indexed_header("t", "x", n);
    header.extend((1..=n).map(|j| format!("v_{j}")));
    let mut t = Table::new(header);
    for s in &map.snapshots {
        t.push_floats(
            std::iter::once(s.time)
                .chain(s.positions.iter().copied())
                .chain(s.velocities.iter().copied()),
        );
    }
    t
}

pub fn sweep_table(r: &SweepResult) -> Table {
    let mut t = Table::new(["f", "D_f"]);
    for (f, d) in r.amplitudes.iter().zip(&r.d_values) {
        t.push_floats([*f, *d]);
    }
    t
}

pub fn ensemble_table(r: &EnsembleResult) -> Table {
    let mut t = Table::new(["realization", "seed", "log10_Df", "supra_flag"]);
    for x in &r.realizations {
        t.rows.push(vec![
            x.index.to_string(),
            x.seed.to_string(),
            fmt_f64(x.log10_df()),
            x.classified_supra.to_string(),
        ]);
    }
    t
}

pub fn ecdf_table(r: &FcrDistributionResult) -> Table {
    let mut t = Table::new(["f_cr", "cum_fraction"]);
    for (x, f) in r.ecdf.steps() {
        t.push_floats([x, f]);
    }
    t
}

/// One output file with its digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub kind: String,
    pub spec: ExperimentSpec,
    pub seeds: Vec<u64>,
    pub duration_seconds: f64,
    pub warnings: Vec<String>,
    pub files: Vec<FileEntry>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Files of one result, in the order they are written.
pub fn render_outputs(output: &ExperimentOutput) -> Vec<(String, String)> {
    let json = |v: serde_json::Value| {
        let mut s = serde_json::to_string_pretty(&v).expect("json values serialise");
        s.push('\n');
        s
    };
    let mut files = Vec::new();
    match output {
        ExperimentOutput::Single(traj) => {
            files.push(("trajectory.csv".into(), positions_table(traj).render()));
            files.push(("velocities.csv".into(), velocities_table(traj).render()));
        }
        ExperimentOutput::SupraSweep(r) => {
            files.push(("sweep.csv".into(), sweep_table(r).render()));
            files.push((
                "summary.json".into(),
                json(json!({
                    "model": r.model,
                    "frequency": r.frequency,
                    "params": r.params,
                    "f_critical": r.f_critical,
                })),
            ));
        }
        ExperimentOutput::FcrCurve(r) => files.extend(render_fcr_curve(r, json)),
        ExperimentOutput::WavePacket(WavePacketResult { energy, .. }) => {
            files.push(("energy.csv".into(), energy_table(energy).render()));
            files.push(("snapshots.csv".into(), snapshot_table(energy).render()));
        }
        ExperimentOutput::Breather(BreatherResult { observed, energy, .. }) => {
            files.push(("observed.csv".into(), positions_table(observed).render()));
            files.push(("energy.csv".into(), energy_table(energy).render()));
        }
        ExperimentOutput::StochasticEnsemble(r) => {
            files.push(("realizations.csv".into(), ensemble_table(r).render()));
            files.push((
                "summary.json".into(),
                json(json!({
                    "probability": r.probability,
                    "standard_error": r.standard_error(),
                    "supra_count": r.supra_count(),
                    "realizations": r.realizations.len(),
                    "classify_cutoff": r.classify_cutoff,
                    "failed": r.failed,
                })),
            ));
        }
        ExperimentOutput::FcrDistribution(r) => {
            let mut t = Table::new(["realization", "seed", "f_cr", "censored"]);
            for s in &r.samples {
                t.rows.push(vec![
                    s.index.to_string(),
                    s.seed.to_string(),
                    fmt_f64(s.f_critical),
                    s.censored.to_string(),
                ]);
            }
            files.push(("samples.csv".into(), t.render()));
            files.push(("ecdf.csv".into(), ecdf_table(r).render()));
            files.push((
                "summary.json".into(),
                json(json!({
                    "support_width": r.ecdf.support_width(),
                    "censored": r.censored_count(),
                    "classify_cutoff": r.classify_cutoff,
                    "failed": r.failed,
                })),
            ));
        }
    }
    files
}

fn render_fcr_curve(
    r: &FcrCurveResult,
    json: impl Fn(serde_json::Value) -> String,
) -> Vec<(String, String)> {
    let mut sweeps = Table::new(["omega", "f", "D_f"]);
    for s in &r.sweeps {
        for (f, d) in s.amplitudes.iter().zip(&s.d_values) {
            sweeps.push_floats([s.frequency, *f, *d]);
        }
    }
    let mut curve = Table::new(["omega", "f_cr"]);
    for (w, f) in &r.points {
        curve.push_floats([*w, *f]);
    }
    vec![
        ("sweeps.csv".into(), sweeps.render()),
        ("fcr_curve.csv".into(), curve.render()),
        (
            "summary.json".into(),
            json(json!({
                "fit": r.fit,
                "absent": r.absent,
            })),
        ),
    ]
}

/// Seeds a spec consumes.
pub fn seeds_of(spec: &ExperimentSpec) -> Vec<u64> {
    match spec {
        ExperimentSpec::Single(s) if s.drive.is_stochastic() => vec![s.seed],
        ExperimentSpec::WavePacket(s) => vec![s.seed],
        ExperimentSpec::StochasticEnsemble(s) => {
            (0..s.realizations).map(|r| s.seed_base.wrapping_add(r as u64)).collect()
        }
        ExperimentSpec::FcrDistribution(s) => {
            (0..s.realizations).map(|r| s.seed_base.wrapping_add(r as u64)).collect()
        }
        _ => Vec::new(),
    }
}

/// Removes what a failed write left behind.
struct Cleanup {
    files: Vec<PathBuf>,
    dir: Option<PathBuf>,
    armed: bool,
}

impl Drop for Cleanup {
    fn drop(&mut self) {
        if !self.armed {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        if let Some(d) = &self.dir {
            let _ = fs::remove_dir(d);
        }
    }
}

/// Writes every result file, then the manifest listing them with digests.
/// On an I/O failure the files written so far are removed again.
pub fn write_outputs(
    output: &ExperimentOutput,
    spec: &ExperimentSpec,
    out_dir: &Path,
    duration_seconds: f64,
    warnings: &[String],
) -> Result<RunManifest, CliError> {
    let created_dir = !out_dir.exists();
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir.display(), e))?;
    let mut guard = Cleanup {
        files: Vec::new(),
        dir: created_dir.then(|| out_dir.to_path_buf()),
        armed: true,
    };
    let mut entries = Vec::new();
    for (name, body) in render_outputs(output) {
        let path = out_dir.join(&name);
        write_file(&path, body.as_bytes(), &mut guard.files)?;
        entries.push(FileEntry {
            sha256: sha256_hex(body.as_bytes()),
            bytes: body.len() as u64,
            name,
        });
    }
    let manifest = RunManifest {
        tool: "hystchain".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        kind: spec.kind().into(),
        spec: spec.clone(),
        seeds: seeds_of(spec),
        duration_seconds,
        warnings: warnings.to_vec(),
        files: entries,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    text.push('\n');
    write_file(&out_dir.join(MANIFEST_NAME), text.as_bytes(), &mut guard.files)?;
    guard.armed = false;
    Ok(manifest)
}

fn write_file(path: &Path, bytes: &[u8], created: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let mut f = fs::File::create(path).map_err(|e| CliError::io(path.display(), e))?;
    created.push(path.to_path_buf());
    f.write_all(bytes).map_err(|e| CliError::io(path.display(), e))?;
    f.sync_all().map_err(|e| CliError::io(path.display(), e))
}

/// Recomputes the digests listed in a manifest; returns mismatching names.
pub fn verify_manifest(out_dir: &Path, manifest: &RunManifest) -> Result<Vec<String>, CliError> {
    let mut bad = Vec::new();
    for f in &manifest.files {
        let path = out_dir.join(&f.name);
        let bytes = fs::read(&path).map_err(|e| CliError::io(path.display(), e))?;
        if sha256_hex(&bytes) != f.sha256 {
            bad.push(f.name.clone());
        }
    }
    Ok(bad)
}
