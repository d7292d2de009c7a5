//! Resolved command configurations and their execution.
//!
//! Every subcommand resolves its inputs and knobs into one of these fully
//! explicit configurations, which is hashed into the run manifest and
//! written next to the artifacts. Re-executing a manifest reproduces the
//! artifacts byte for byte.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::{
    file_sha256, write_curve_csv, write_density_csv, write_fit_table, write_json, write_series_csv,
    Manifest,
};
use crate::benchmark::{branch_report, realization_fits, BenchmarkReport, BenchmarkSpec};
use crate::calibrate::{fit, FitConfig, FitEnsemble, FitResult};
use crate::error::{Error, Result};
use crate::forecast::{
    ar1_replicas, bootstrap_replicas, density_of_samples, param_samples, scan_windows, summarize,
    DensityConfig, FitParam, ReplicaMethod, ReplicaSpec, ScanPlan,
};
use crate::ingest::{ingest, IngestConfig};
use crate::model::LpplParams;
use crate::seeds::derive_seed;
use crate::simulate::{
    add_noise, generate_reference, simulate_jls, NoiseKind, NoiseSpec, PriceSeries, SdeParams,
};

/// Which artifact families a command writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    fn csv(&self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    fn json(&self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

/// An input file plus its ingestion settings and content hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub path: String,
    pub ingest: IngestConfig,
    pub sha256: String,
}

impl InputSpec {
    pub fn resolve(path: &Path, ingest: IngestConfig) -> Result<Self> {
        Ok(InputSpec {
            path: path.display().to_string(),
            ingest,
            sha256: file_sha256(path)?,
        })
    }

    fn load(&self) -> Result<PriceSeries> {
        let path = Path::new(&self.path);
        let actual = file_sha256(path)?;
        if actual != self.sha256 {
            return Err(Error::InvalidConfig(format!(
                "{}: content hash {actual} does not match the manifest ({})",
                self.path, self.sha256
            )));
        }
        ingest(path, &self.ingest)
    }
}

/// What the simulate command generates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimKind {
    /// Noise-free LPPL log-price curve.
    Reference,
    /// Reference curve plus i.i.d. noise.
    Noisy { noise: NoiseSpec },
    /// Jump-diffusion Monte-Carlo path.
    Sde { sde: SdeParams, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateCommand {
    pub generator: LpplParams,
    pub points: usize,
    pub t0: f64,
    pub sim: SimKind,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitCommand {
    pub input: InputSpec,
    pub config: FitConfig,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanCommand {
    pub input: InputSpec,
    pub plan: ScanPlan,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastCommand {
    pub input: InputSpec,
    pub plan: ScanPlan,
    /// Replica series generated per window from its best fit; `None` skips
    /// replica generation.
    pub replicas: Option<ReplicaSpec>,
    pub density: DensityConfig,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkCommand {
    pub spec: BenchmarkSpec,
    pub kinds: Vec<NoiseKind>,
    pub format: OutputFormat,
    /// Write and resume from per-realization checkpoints.
    pub checkpoint: bool,
}

/// A fully resolved run, as stored in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    Simulate(SimulateCommand),
    Fit(FitCommand),
    Scan(ScanCommand),
    Forecast(ForecastCommand),
    Benchmark(BenchmarkCommand),
}

/// Files written plus anything the caller wants to report.
#[derive(Debug)]
pub struct Execution {
    pub manifest_hash: String,
    pub written: Vec<PathBuf>,
    pub benchmark: Option<BenchmarkReport>,
    pub best_fit: Option<LpplParams>,
}

/// Execute a resolved command, writing artifacts into `out`.
pub fn execute(command: &Command, out: &Path) -> Result<Execution> {
    fs::create_dir_all(out).map_err(|source| Error::Io {
        path: out.display().to_string(),
        source,
    })?;
    let manifest = Manifest::new(command.clone());
    let hash = manifest.hash()?;
    let mut written = vec![manifest.write(out)?];
    let mut benchmark = None;
    let mut best_fit = None;

    match command {
        Command::Simulate(cmd) => {
            let series = match &cmd.sim {
                SimKind::Reference => generate_reference(&cmd.generator, cmd.points, cmd.t0)?,
                SimKind::Noisy { noise } => add_noise(
                    &generate_reference(&cmd.generator, cmd.points, cmd.t0)?,
                    noise,
                )?,
                SimKind::Sde { sde, seed } => simulate_jls(sde, cmd.points, *seed)?,
            };
            if cmd.format.csv() {
                let path = out.join("series.csv");
                write_series_csv(&path, &hash, &series)?;
                written.push(path);
            }
            if cmd.format.json() {
                let path = out.join("series.json");
                write_json(&path, &hash, &series)?;
                written.push(path);
            }
        }

        Command::Fit(cmd) => {
            let series = cmd.input.load()?;
            let ensemble = fit(&series, &cmd.config)?;
            best_fit = ensemble.best().map(|b| b.params);
            written.extend(write_ensemble_artifacts(
                out,
                &hash,
                cmd.format,
                &ensemble,
                Some(&series),
            )?);
        }

        Command::Scan(cmd) => {
            let series = cmd.input.load()?;
            let ensemble = scan_windows(&series, &cmd.plan)?;
            best_fit = ensemble
                .results
                .iter()
                .min_by(|a, b| a.rmse.total_cmp(&b.rmse))
                .map(|b| b.params);
            written.extend(write_ensemble_artifacts(
                out,
                &hash,
                cmd.format,
                &ensemble,
                Some(&series),
            )?);
        }

        Command::Forecast(cmd) => {
            let series = cmd.input.load()?;
            let pooled = forecast_ensemble(&series, cmd)?;
            best_fit = pooled
                .results
                .iter()
                .min_by(|a, b| a.rmse.total_cmp(&b.rmse))
                .map(|b| b.params);
            written.extend(write_ensemble_artifacts(
                out, &hash, cmd.format, &pooled, None,
            )?);
            for (param, name) in [
                (FitParam::Tc, "tc"),
                (FitParam::M, "m"),
                (FitParam::Omega, "omega"),
            ] {
                let density = density_of_samples(&param_samples(&pooled, param), &cmd.density)?;
                if cmd.format.csv() {
                    let path = out.join(format!("density_{name}.csv"));
                    write_density_csv(&path, &hash, &density)?;
                    written.push(path);
                }
                if cmd.format.json() {
                    let path = out.join(format!("density_{name}.json"));
                    write_json(&path, &hash, &density)?;
                    written.push(path);
                }
            }
        }

        Command::Benchmark(cmd) => {
            let mut report_branches = Vec::new();
            for &kind in &cmd.kinds {
                let fits = if cmd.checkpoint {
                    checkpointed_branch(&cmd.spec, kind, out, &hash, &mut written)?
                } else {
                    (0..cmd.spec.realizations)
                        .into_par_iter()
                        .map(|i| realization_fits(&cmd.spec, kind, i))
                        .collect::<Result<Vec<_>>>()?
                };
                let branch = branch_report(kind, &fits);
                let kind_name = kind_slug(kind);
                for (samples, name) in [
                    (&branch.tc_samples, "tc"),
                    (&branch.m_samples, "m"),
                    (&branch.omega_samples, "omega"),
                ] {
                    let density = density_of_samples(samples, &DensityConfig::default())?;
                    if cmd.format.csv() {
                        let path = out.join(format!("density_{name}_{kind_name}.csv"));
                        write_density_csv(&path, &hash, &density)?;
                        written.push(path);
                    }
                }
                report_branches.push(branch);
            }
            let report = BenchmarkReport {
                reduced_run: cmd.spec.is_reduced(),
                passed: report_branches.iter().all(|b| b.passed),
                branches: report_branches,
            };
            let path = out.join("report.json");
            write_json(&path, &hash, &report)?;
            written.push(path);
            benchmark = Some(report);
        }
    }

    Ok(Execution {
        manifest_hash: hash,
        written,
        benchmark,
        best_fit,
    })
}

fn kind_slug(kind: NoiseKind) -> &'static str {
    match kind {
        NoiseKind::Gaussian => "gaussian",
        NoiseKind::StudentT4 => "student_t4",
    }
}

fn write_ensemble_artifacts(
    out: &Path,
    hash: &str,
    format: OutputFormat,
    ensemble: &FitEnsemble,
    series: Option<&PriceSeries>,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if format.csv() {
        let path = out.join("fit_table.csv");
        write_fit_table(&path, hash, ensemble)?;
        written.push(path);
        if let (Some(series), Some(best)) = (series, ensemble.best()) {
            let window = series.window(best.provenance.t1, best.provenance.t2)?;
            let path = out.join("fitted_curve.csv");
            write_curve_csv(&path, hash, &window, &best.params)?;
            written.push(path);
        }
    }
    if format.json() {
        let path = out.join("ensemble.json");
        write_json(&path, hash, ensemble)?;
        written.push(path);
        let path = out.join("summary.json");
        write_json(&path, hash, &summarize(ensemble)?)?;
        written.push(path);
    }
    Ok(written)
}

/// Window fits plus replica fits, pooled with uniform weight.
fn forecast_ensemble(series: &PriceSeries, cmd: &ForecastCommand) -> Result<FitEnsemble> {
    let scanned = scan_windows(series, &cmd.plan)?;
    let Some(replica_spec) = cmd.replicas else {
        return Ok(scanned);
    };

    // The best fit of each window seeds that window's replicas; replica
    // fits reuse the window's configuration with derived seeds.
    let mut window_best: Vec<&FitResult> = Vec::new();
    for result in &scanned.results {
        if window_best
            .iter()
            .all(|b| b.provenance.t1 != result.provenance.t1)
        {
            window_best.push(result);
        }
    }

    struct ReplicaTask {
        t1: f64,
        t2: f64,
        replica_index: usize,
        series: PriceSeries,
        config: FitConfig,
    }
    let mut tasks: Vec<ReplicaTask> = Vec::new();
    for (w, best) in window_best.iter().enumerate() {
        let window = series.window(best.provenance.t1, best.provenance.t2)?;
        let spec = ReplicaSpec {
            seed: derive_seed(replica_spec.seed, w as u64),
            ..replica_spec
        };
        let replicas = match spec.method {
            ReplicaMethod::BlockBootstrap => bootstrap_replicas(&window, best, &spec)?,
            ReplicaMethod::Ar1 => ar1_replicas(&window, best, &spec)?,
        };
        for (r, replica) in replicas.into_iter().enumerate() {
            let mut config = cmd.plan.config;
            config.taboo.seed = derive_seed(
                derive_seed(cmd.plan.config.taboo.seed, (w + 1) as u64),
                (r + 1) as u64,
            );
            tasks.push(ReplicaTask {
                t1: best.provenance.t1,
                t2: best.provenance.t2,
                replica_index: r,
                series: replica,
                config,
            });
        }
    }

    let replica_fits: Vec<Result<FitEnsemble>> = tasks
        .par_iter()
        .map(|task| fit(&task.series, &task.config))
        .collect();

    let mut results = scanned.results.clone();
    let mut failures = scanned.failures.clone();
    let mut distinct = scanned.distinct_found;
    for (task, outcome) in tasks.iter().zip(replica_fits) {
        match outcome {
            Ok(ensemble) => {
                distinct += ensemble.distinct_found;
                results.extend(ensemble.results);
            }
            Err(e) => failures.push(crate::calibrate::WindowFailure {
                t1: task.t1,
                t2: task.t2,
                reason: format!("replica {} of window {}: {e}", task.replica_index, task.t1),
            }),
        }
    }
    let mut pooled = FitEnsemble::from_results(results, cmd.plan.config.top_k, distinct);
    pooled.short = scanned.short;
    pooled.failures = failures;
    Ok(pooled)
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    manifest_hash: String,
    kind: NoiseKind,
}

#[derive(Serialize, Deserialize)]
struct CheckpointRow {
    index: usize,
    ensemble: FitEnsemble,
}

/// Run one benchmark branch with a resumable per-realization checkpoint.
fn checkpointed_branch(
    spec: &BenchmarkSpec,
    kind: NoiseKind,
    out: &Path,
    manifest_hash: &str,
    written: &mut Vec<PathBuf>,
) -> Result<Vec<FitEnsemble>> {
    let path = out.join(format!("checkpoint_{}.jsonl", kind_slug(kind)));
    let mut fits: Vec<FitEnsemble> = Vec::new();

    if path.exists() {
        let text = fs::read_to_string(&path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut lines = text.lines();
        let header: CheckpointHeader = match lines.next() {
            Some(line) => serde_json::from_str(line)?,
            None => {
                return Err(Error::InvalidConfig(format!(
                    "{}: empty checkpoint",
                    path.display()
                )))
            }
        };
        if header.manifest_hash != manifest_hash {
            return Err(Error::InvalidConfig(format!(
                "{}: checkpoint belongs to a different run (hash {})",
                path.display(),
                header.manifest_hash
            )));
        }
        for line in lines {
            let row: CheckpointRow = serde_json::from_str(line)?;
            if row.index != fits.len() {
                return Err(Error::InvalidConfig(format!(
                    "{}: checkpoint rows out of order at {}",
                    path.display(),
                    row.index
                )));
            }
            fits.push(row.ensemble);
        }
        fits.truncate(spec.realizations);
    }

    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
    if fits.is_empty() {
        let header = CheckpointHeader {
            manifest_hash: manifest_hash.to_string(),
            kind,
        };
        writeln!(file, "{}", serde_json::to_string(&header)?).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
    }

    let batch = (rayon::current_num_threads() * 4).max(8);
    let mut next = fits.len();
    while next < spec.realizations {
        let end = (next + batch).min(spec.realizations);
        let chunk: Vec<FitEnsemble> = (next..end)
            .into_par_iter()
            .map(|i| realization_fits(spec, kind, i))
            .collect::<Result<Vec<_>>>()?;
        for (offset, ensemble) in chunk.into_iter().enumerate() {
            let row = CheckpointRow {
                index: next + offset,
                ensemble,
            };
            writeln!(file, "{}", serde_json::to_string(&row)?).map_err(|source| Error::Io {
                path: path.display().to_string(),
                source,
            })?;
            fits.push(row.ensemble);
        }
        next = end;
    }
    written.push(path);
    Ok(fits)
}
