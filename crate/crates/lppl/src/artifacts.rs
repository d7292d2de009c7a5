//! Machine-readable output artifacts: CSV and JSON writers, their parsers,
//! and the run manifest that makes every output reproducible.
//!
//! CSV floats use 17 significant digits so doubles round-trip exactly; every
//! artifact embeds the manifest hash of the run that produced it.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibrate::{FitEnsemble, FitResult, Provenance};
use crate::error::{Error, Result};
use crate::forecast::TcDensity;
use crate::model::{LpplParams, Qualification};
use crate::simulate::{PriceSeries, Scale};

/// Format a double with 17 significant digits (exact round-trip).
pub fn format_g17(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(text: &str, what: &str) -> Result<f64> {
    text.parse()
        .map_err(|_| Error::InvalidConfig(format!("unparseable {what}: {text:?}")))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// A run manifest: tool version plus the fully resolved command
/// configuration. Re-running a manifest reproduces the artifacts
/// bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest<C> {
    pub version: String,
    pub command: C,
}

impl<C: Serialize + DeserializeOwned> Manifest<C> {
    pub fn new(command: C) -> Self {
        Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command,
        }
    }

    /// SHA-256 over the canonical JSON serialization.
    pub fn hash(&self) -> Result<String> {
        let json = serde_json::to_string(self)?;
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        Ok(hex_digest(&hasher.finalize()))
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        let body = serde_json::json!({
            "hash": self.hash()?,
            "version": self.version,
            "command": serde_json::to_value(&self.command)?,
        });
        fs::write(&path, format!("{:#}\n", body)).map_err(io_err(&path))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let version = value
            .get("version")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::InvalidConfig("manifest missing version".into()))?
            .to_string();
        let command = value
            .get("command")
            .cloned()
            .ok_or_else(|| Error::InvalidConfig("manifest missing command".into()))?;
        Ok(Manifest {
            version,
            command: serde_json::from_value(command)?,
        })
    }
}

/// Hash of an input file, recorded in manifests so reruns can verify they
/// see the same data.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hex_digest(&hasher.finalize()))
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Write a JSON artifact with the manifest hash embedded at the top level.
pub fn write_json<T: Serialize>(path: &Path, manifest_hash: &str, body: &T) -> Result<()> {
    let value = serde_json::json!({
        "manifest_hash": manifest_hash,
        "data": serde_json::to_value(body)?,
    });
    fs::write(path, format!("{:#}\n", value)).map_err(io_err(path))
}

/// Write a price series as CSV: `t` and either `log_price` or `price`.
pub fn write_series_csv(path: &Path, manifest_hash: &str, series: &PriceSeries) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "# manifest_hash={manifest_hash}");
    if !series.crash_times.is_empty() {
        let times: Vec<String> = series.crash_times.iter().map(|t| format_g17(*t)).collect();
        let _ = writeln!(out, "# crash_times={}", times.join(";"));
    }
    let value_col = match series.scale {
        Scale::Log => "log_price",
        Scale::Raw => "price",
    };
    let _ = writeln!(out, "date,{value_col}");
    for i in 0..series.len() {
        let _ = writeln!(
            out,
            "{},{}",
            format_g17(series.time(i)),
            format_g17(series.values[i])
        );
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Write fitted-curve samples next to the observations for overlay plots.
pub fn write_curve_csv(
    path: &Path,
    manifest_hash: &str,
    series: &PriceSeries,
    params: &LpplParams,
) -> Result<()> {
    let observed = series.log_values()?;
    let mut out = String::new();
    let _ = writeln!(out, "# manifest_hash={manifest_hash}");
    let _ = writeln!(out, "t,observed_log_price,fitted_log_price");
    for (i, y) in observed.iter().enumerate() {
        let t = series.time(i);
        let fitted = params.log_price(t)?;
        let _ = writeln!(
            out,
            "{},{},{}",
            format_g17(t),
            format_g17(*y),
            format_g17(fitted)
        );
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Write a density artifact as CSV: grid and density columns.
pub fn write_density_csv(path: &Path, manifest_hash: &str, density: &TcDensity) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "# manifest_hash={manifest_hash}");
    let _ = writeln!(out, "grid,density");
    for (x, d) in density.grid.iter().zip(density.density.iter()) {
        let _ = writeln!(out, "{},{}", format_g17(*x), format_g17(*d));
    }
    fs::write(path, out).map_err(io_err(path))
}

const FIT_TABLE_HEADER: &str = "index,t1,t2,seed,candidate,start_tc,start_m,start_omega,start_phi,\
iterations,termination,tc,m,omega,phi,a,b,c,rmse,hazard_margin,qualified,qualification,residuals";

/// Ensemble-level flags serialized into the fit table's comment header so
/// the CSV alone reconstructs the full ensemble.
#[derive(Debug, Serialize, Deserialize)]
struct EnsembleMeta {
    requested_top_k: usize,
    distinct_found: usize,
    short: bool,
    low_confidence: bool,
    boundary_discards: usize,
    boundary_only: bool,
    failures: Vec<crate::calibrate::WindowFailure>,
}

/// Write an ensemble as a flat CSV fit table (one row per retained fit).
pub fn write_fit_table(path: &Path, manifest_hash: &str, ensemble: &FitEnsemble) -> Result<()> {
    let meta = EnsembleMeta {
        requested_top_k: ensemble.requested_top_k,
        distinct_found: ensemble.distinct_found,
        short: ensemble.short,
        low_confidence: ensemble.low_confidence,
        boundary_discards: ensemble.boundary_discards,
        boundary_only: ensemble.boundary_only,
        failures: ensemble.failures.clone(),
    };
    let mut out = String::new();
    let _ = writeln!(out, "# manifest_hash={manifest_hash}");
    let _ = writeln!(out, "# ensemble_meta={}", serde_json::to_string(&meta)?);
    let _ = writeln!(out, "{FIT_TABLE_HEADER}");
    for (index, fit) in ensemble.results.iter().enumerate() {
        let p = &fit.provenance;
        let start: Vec<String> = p.start.iter().map(|x| format_g17(*x)).collect();
        let start_phi = start.get(3).cloned().unwrap_or_default();
        let residuals: Vec<String> = fit.residuals.iter().map(|x| format_g17(*x)).collect();
        let qualification = serde_json::to_string(&fit.qualification)?;
        let _ = writeln!(
            out,
            "{index},{},{},{},{},{},{},{},{start_phi},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            format_g17(p.t1),
            format_g17(p.t2),
            p.seed,
            p.candidate,
            start[0],
            start[1],
            start[2],
            p.iterations,
            serde_json::to_string(&p.termination)?.trim_matches('"'),
            format_g17(fit.params.tc),
            format_g17(fit.params.m),
            format_g17(fit.params.omega),
            format_g17(fit.params.phi),
            format_g17(fit.params.a),
            format_g17(fit.params.b),
            format_g17(fit.params.c),
            format_g17(fit.rmse),
            format_g17(fit.params.hazard_margin()),
            fit.qualification.passed,
            escape_csv(&qualification),
            residuals.join(";"),
        );
    }
    fs::write(path, out).map_err(io_err(path))
}

fn escape_csv(field: &str) -> String {
    format!("\"{}\"", field.replace('"', "\"\""))
}

/// Parse a fit table written by [`write_fit_table`] back into the ensemble.
pub fn parse_fit_table(path: &Path) -> Result<FitEnsemble> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut meta: Option<EnsembleMeta> = None;
    let mut body = String::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# ensemble_meta=") {
            meta = Some(serde_json::from_str(rest)?);
        } else if !line.starts_with('#') {
            body.push_str(line);
            body.push('\n');
        }
    }
    let meta = meta.ok_or_else(|| Error::InvalidConfig("fit table lacks ensemble_meta".into()))?;

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(body.as_bytes());
    let mut results = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::MalformedRow {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let get = |i: usize| -> Result<&str> {
            record
                .get(i)
                .ok_or_else(|| Error::InvalidConfig(format!("fit table field {i} missing")))
        };
        let mut start = vec![
            parse_f64(get(5)?, "start_tc")?,
            parse_f64(get(6)?, "start_m")?,
            parse_f64(get(7)?, "start_omega")?,
        ];
        let start_phi = get(8)?;
        if !start_phi.is_empty() {
            start.push(parse_f64(start_phi, "start_phi")?);
        }
        let termination = serde_json::from_str(&format!("\"{}\"", get(10)?))?;
        let params = LpplParams {
            tc: parse_f64(get(11)?, "tc")?,
            m: parse_f64(get(12)?, "m")?,
            omega: parse_f64(get(13)?, "omega")?,
            phi: parse_f64(get(14)?, "phi")?,
            a: parse_f64(get(15)?, "a")?,
            b: parse_f64(get(16)?, "b")?,
            c: parse_f64(get(17)?, "c")?,
        };
        let qualification: Qualification = serde_json::from_str(get(21)?)?;
        let residuals = get(22)?
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| parse_f64(s, "residual"))
            .collect::<Result<Vec<f64>>>()?;
        results.push(FitResult {
            params,
            rmse: parse_f64(get(18)?, "rmse")?,
            residuals,
            qualification,
            provenance: Provenance {
                t1: parse_f64(get(1)?, "t1")?,
                t2: parse_f64(get(2)?, "t2")?,
                seed: get(3)?
                    .parse()
                    .map_err(|_| Error::InvalidConfig("unparseable seed".into()))?,
                candidate: get(4)?
                    .parse()
                    .map_err(|_| Error::InvalidConfig("unparseable candidate".into()))?,
                start,
                iterations: get(9)?
                    .parse()
                    .map_err(|_| Error::InvalidConfig("unparseable iterations".into()))?,
                termination,
            },
        });
    }

    Ok(FitEnsemble {
        results,
        requested_top_k: meta.requested_top_k,
        distinct_found: meta.distinct_found,
        short: meta.short,
        low_confidence: meta.low_confidence,
        boundary_discards: meta.boundary_discards,
        boundary_only: meta.boundary_only,
        failures: meta.failures,
    })
}
