//! Data ingestion, preprocessing, and CSV/JSON export.
//!
//! Numeric CSV output uses 17-significant-digit scientific notation so
//! exports round-trip losslessly through [`load_ensemble_csv`].

use crate::coherence::CoherenceSlice;
use crate::error::{Error, Result};
use crate::evaluate::{CoherenceMseReport, MseReport};
use crate::spectral::SpectralEstimate;
use crate::transform::{EnsembleMeta, ReplicateEnsemble};
use crate::wavelet::{AutocorrelationSet, InnerProductMatrix};
use ndarray::Array2;
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Format a float with 17 significant digits; parses back to the same bits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// How replicates are laid out in an input file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    ReplicatesAsRows,
    ReplicatesAsColumns,
}

impl Orientation {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "rows" | "replicates-as-rows" => Ok(Orientation::ReplicatesAsRows),
            "columns" | "replicates-as-columns" => Ok(Orientation::ReplicatesAsColumns),
            other => Err(Error::Config(format!("unknown orientation `{other}`"))),
        }
    }
}

/// Ingestion settings for [`load_ensemble_csv`].
#[derive(Debug, Clone)]
pub struct IngestConfig {
    pub path: PathBuf,
    pub has_header: bool,
    pub orientation: Orientation,
    pub standardize: bool,
    pub mirror: bool,
}

impl IngestConfig {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        IngestConfig {
            path: path.into(),
            has_header: false,
            orientation: Orientation::ReplicatesAsRows,
            standardize: false,
            mirror: false,
        }
    }
}

/// Load a rectangular numeric CSV as a replicate ensemble, applying the
/// configured orientation, standardization and mirror padding.
pub fn load_ensemble_csv(cfg: &IngestConfig) -> Result<ReplicateEnsemble> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(cfg.has_header)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(&cfg.path)
        .map_err(|e| Error::Input(format!("cannot open {}: {e}", cfg.path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let header_offset = if cfg.has_header { 2 } else { 1 };
    for (ri, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            Error::Input(format!("{}: parse error: {e}", cfg.path.display()))
        })?;
        let line = ri + header_offset;
        if record.len() == 1 && record[0].is_empty() {
            continue; // trailing blank line
        }
        let mut row = Vec::with_capacity(record.len());
        for (ci, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::Input(format!(
                    "{}: line {line}, column {}: `{field}` is not numeric",
                    cfg.path.display(),
                    ci + 1
                ))
            })?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Input(format!(
                    "{}: ragged matrix: line {line} has {} fields, expected {}",
                    cfg.path.display(),
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Input(format!("{}: no data rows", cfg.path.display())));
    }
    let (nrows, ncols) = (rows.len(), rows[0].len());
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let matrix = Array2::from_shape_vec((nrows, ncols), flat).expect("shape checked");
    let data = match cfg.orientation {
        Orientation::ReplicatesAsRows => matrix,
        Orientation::ReplicatesAsColumns => matrix.reversed_axes().as_standard_layout().to_owned(),
    };
    let mut ensemble = ReplicateEnsemble::new(
        data,
        EnsembleMeta {
            source: cfg.path.display().to_string(),
            standardized: false,
            mirrored_from: None,
        },
    )?;
    if cfg.standardize {
        ensemble = standardize_replicates(&ensemble)?;
    }
    if cfg.mirror {
        ensemble = mirror_to_dyadic(&ensemble)?;
    }
    Ok(ensemble)
}

/// Standardize each replicate to mean zero and unit sample variance
/// (divisor `N - 1`).
pub fn standardize_replicates(e: &ReplicateEnsemble) -> Result<ReplicateEnsemble> {
    let (r_count, t_len) = (e.replicate_count(), e.series_len());
    let mut data = e.data().clone();
    for r in 0..r_count {
        let mut row = data.row_mut(r);
        let mean = row.sum() / t_len as f64;
        let ss: f64 = row.iter().map(|v| (v - mean).powi(2)).sum();
        let var = ss / (t_len as f64 - 1.0);
        if var < 1e-24 {
            return Err(Error::Input(format!(
                "replicate {r} is constant; cannot standardize"
            )));
        }
        let sd = var.sqrt();
        row.mapv_inplace(|v| (v - mean) / sd);
    }
    let mut meta = e.meta().clone();
    meta.standardized = true;
    ReplicateEnsemble::new(data, meta)
}

/// Mirror-pad the replicate dimension to the next power of two: replicates
/// are appended in reverse order starting from the second-to-last, and the
/// original count is recorded so reporting can discard the padding.
pub fn mirror_to_dyadic(e: &ReplicateEnsemble) -> Result<ReplicateEnsemble> {
    let r_count = e.replicate_count();
    if r_count.is_power_of_two() {
        return Ok(e.clone());
    }
    let target = r_count.next_power_of_two();
    let pad = target - r_count;
    if pad >= r_count {
        return Err(Error::Input(format!(
            "cannot mirror {r_count} replicates up to {target}"
        )));
    }
    let mut data = Array2::zeros((target, e.series_len()));
    for r in 0..r_count {
        data.row_mut(r).assign(&e.replicate(r));
    }
    for p in 0..pad {
        data.row_mut(r_count + p).assign(&e.replicate(r_count - 2 - p));
    }
    let mut meta = e.meta().clone();
    meta.mirrored_from = Some(r_count);
    ReplicateEnsemble::new(data, meta)
}

/// Write an ensemble as a plain numeric CSV, one replicate per row.
pub fn write_ensemble_csv(e: &ReplicateEnsemble, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in 0..e.replicate_count() {
        let row: Vec<String> = e.replicate(r).iter().map(|&v| format_f64(v)).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Write a spectral estimate as long-format CSV:
/// `scale,time_index,replicate,value`.
pub fn write_spectral_estimate_csv(est: &SpectralEstimate, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "scale,time_index,replicate,value")?;
    for j in 1..=est.scale_count() {
        for k in 0..est.series_len() {
            for r in 0..est.replicate_count() {
                writeln!(out, "{j},{k},{r},{}", format_f64(est.value(j, k, r)))?;
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SpectralEstimateJson<'a> {
    config: &'a crate::spectral::SmoothingConfig,
    valid_replicate_range: (usize, usize),
    clamp_fraction: f64,
    scale_count: usize,
    series_len: usize,
    replicate_count: usize,
    /// scale-major nested arrays: `values[j-1][k][r]`
    values: Vec<Vec<Vec<f64>>>,
}

/// Write a spectral estimate as JSON (scale-major nested arrays plus the
/// configuration block).
pub fn write_spectral_estimate_json(est: &SpectralEstimate, path: &Path) -> Result<()> {
    let values: Vec<Vec<Vec<f64>>> = (1..=est.scale_count())
        .map(|j| {
            (0..est.series_len())
                .map(|k| (0..est.replicate_count()).map(|r| est.value(j, k, r)).collect())
                .collect()
        })
        .collect();
    let doc = SpectralEstimateJson {
        config: est.config(),
        valid_replicate_range: est.valid_replicate_range(),
        clamp_fraction: est.clamp_fraction(),
        scale_count: est.scale_count(),
        series_len: est.series_len(),
        replicate_count: est.replicate_count(),
        values,
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut out, &doc)
        .map_err(|e| Error::Input(format!("JSON encode failed: {e}")))?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Load a long-format spectral-estimate CSV back into an array, returning
/// `(scale_count, series_len, replicate_count, values)`.
pub fn load_spectral_estimate_csv(path: &Path) -> Result<ndarray::Array3<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Input(format!("cannot open {}: {e}", path.display())))?;
    let mut entries: Vec<(usize, usize, usize, f64)> = Vec::new();
    let mut dims = (0usize, 0usize, 0usize);
    for record in reader.records() {
        let record = record.map_err(|e| Error::Input(format!("parse error: {e}")))?;
        let parse_idx = |i: usize| -> Result<usize> {
            record[i]
                .parse()
                .map_err(|_| Error::Input(format!("bad index field `{}`", &record[i])))
        };
        let j: usize = parse_idx(0)?;
        let k: usize = parse_idx(1)?;
        let r: usize = parse_idx(2)?;
        let v: f64 = record[3]
            .parse()
            .map_err(|_| Error::Input(format!("bad value field `{}`", &record[3])))?;
        dims = (dims.0.max(j), dims.1.max(k + 1), dims.2.max(r + 1));
        entries.push((j, k, r, v));
    }
    let mut out = ndarray::Array3::zeros(dims);
    for (j, k, r, v) in entries {
        out[(j - 1, k, r)] = v;
    }
    Ok(out)
}

/// Write a coherence slice as CSV: `time_index,replicate_prime,value` with
/// `NA` at missing points.
pub fn write_coherence_slice_csv(slice: &CoherenceSlice, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "time_index,replicate_prime,value")?;
    let (t_len, r_count) = (slice.values().nrows(), slice.values().ncols());
    for k in 0..t_len {
        for rp in 0..r_count {
            let v = slice.value(k, rp);
            if v.is_nan() {
                writeln!(out, "{k},{rp},NA")?;
            } else {
                writeln!(out, "{k},{rp},{}", format_f64(v))?;
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct CoherenceSliceJson<'a> {
    level: usize,
    reference_replicate: usize,
    clamp_fraction: f64,
    missing_count: usize,
    config: &'a crate::coherence::CoherencePipelineConfig,
    /// `values[k][r_prime]`, null at missing points
    values: Vec<Vec<Option<f64>>>,
}

/// Write a coherence slice as JSON with its configuration and clamp report.
pub fn write_coherence_slice_json(
    slice: &CoherenceSlice,
    cfg: &crate::coherence::CoherencePipelineConfig,
    path: &Path,
) -> Result<()> {
    let values: Vec<Vec<Option<f64>>> = (0..slice.values().nrows())
        .map(|k| {
            (0..slice.values().ncols())
                .map(|rp| {
                    let v = slice.value(k, rp);
                    if v.is_nan() {
                        None
                    } else {
                        Some(v)
                    }
                })
                .collect()
        })
        .collect();
    let doc = CoherenceSliceJson {
        level: slice.level(),
        reference_replicate: slice.reference(),
        clamp_fraction: slice.clamp_fraction(),
        missing_count: slice.missing_count(),
        config: cfg,
        values,
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut out, &doc)
        .map_err(|e| Error::Input(format!("JSON encode failed: {e}")))?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Write benchmark rows as CSV in the table layout
/// `R,T,M,estimator,mse_x100,bias_sq_x100,mse,bias_sq,n_runs`.
pub fn write_mse_table_csv(rows: &[MseReport], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "R,T,M,estimator,mse_x100,bias_sq_x100,mse,bias_sq,n_runs")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{:.4},{:.4},{},{},{}",
            row.r_count,
            row.t_len,
            row.m,
            row.estimator.label(),
            row.mse * 100.0,
            row.bias_sq * 100.0,
            format_f64(row.mse),
            format_f64(row.bias_sq),
            row.n_runs
        )?;
    }
    Ok(())
}

/// Write benchmark rows as JSON.
pub fn write_mse_table_json(rows: &[MseReport], path: &Path) -> Result<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        estimator: &'a str,
        r_count: usize,
        t_len: usize,
        m: usize,
        m_t: usize,
        mse: f64,
        bias_sq: f64,
        mse_x100: f64,
        bias_sq_x100: f64,
        n_runs: usize,
    }
    let doc: Vec<Row> = rows
        .iter()
        .map(|r| Row {
            estimator: r.estimator.label(),
            r_count: r.r_count,
            t_len: r.t_len,
            m: r.m,
            m_t: r.m_t,
            mse: r.mse,
            bias_sq: r.bias_sq,
            mse_x100: r.mse * 100.0,
            bias_sq_x100: r.bias_sq * 100.0,
            n_runs: r.n_runs,
        })
        .collect();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut out, &doc)
        .map_err(|e| Error::Input(format!("JSON encode failed: {e}")))?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Write coherence benchmark rows as CSV.
pub fn write_coherence_table_csv(rows: &[CoherenceMseReport], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        out,
        "R,T,M,MT,mse_x100,bias_sq_x100,mse,bias_sq,n_runs,undefined_estimates"
    )?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{:.4},{:.4},{},{},{},{}",
            row.r_count,
            row.t_len,
            row.m,
            row.m_t,
            row.mse * 100.0,
            row.bias_sq * 100.0,
            format_f64(row.mse),
            format_f64(row.bias_sq),
            row.n_runs,
            row.undefined_estimates
        )?;
    }
    Ok(())
}

/// Dump the autocorrelation wavelets as lag-major CSV: one row per lag,
/// one column per scale.
pub fn write_autocorrelation_csv(acs: &AutocorrelationSet, path: &Path) -> Result<()> {
    let j_max = acs.max_scale();
    let max_lag = (1..=j_max).map(|j| acs.psi(j).max_lag()).max().unwrap_or(0);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> = (1..=j_max).map(|j| format!("psi_{j}")).collect();
    writeln!(out, "lag,{}", header.join(","))?;
    for tau in -max_lag..=max_lag {
        let row: Vec<String> = (1..=j_max)
            .map(|j| format_f64(acs.psi(j).value(tau)))
            .collect();
        writeln!(out, "{tau},{}", row.join(","))?;
    }
    Ok(())
}

/// Dump the inner-product matrix (and its inverse) row-major with header.
pub fn write_inner_product_csv(ipm: &InnerProductMatrix, path: &Path) -> Result<()> {
    let j_max = ipm.j_max();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> = (1..=j_max).map(|l| format!("l{l}")).collect();
    writeln!(out, "matrix,row,{}", header.join(","))?;
    for (name, get) in [
        ("A", &(|j, l| ipm.a(j, l)) as &dyn Fn(usize, usize) -> f64),
        ("A_inv", &(|j, l| ipm.a_inv(j, l))),
    ] {
        for j in 1..=j_max {
            let row: Vec<String> = (1..=j_max).map(|l| format_f64(get(j, l))).collect();
            writeln!(out, "{name},{j},{}", row.join(","))?;
        }
    }
    Ok(())
}
