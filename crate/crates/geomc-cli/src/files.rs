//! Plain-text artifact IO. CSV values carry 17 significant digits so that
//! re-reading reproduces every f64 bit for bit.

use nalgebra::DVector;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;

/// Tracks files written by one command so a runtime failure can remove them.
#[derive(Default)]
pub struct WrittenFiles {
    paths: Vec<PathBuf>,
}

impl WrittenFiles {
    pub fn write(&mut self, path: &Path, contents: &str) -> Result<(), CliError> {
        fs::write(path, contents)
            .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))?;
        self.paths.push(path.to_path_buf());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, path: &Path, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Runtime(format!("encoding {}: {e}", path.display())))?;
        text.push('\n');
        self.write(path, &text)
    }

    /// Remove everything written so far; used when a later step fails.
    pub fn remove_all(&mut self) {
        for path in self.paths.drain(..) {
            let _ = fs::remove_file(path);
        }
    }
}

pub fn format_value(x: f64) -> String {
    format!("{x:.17e}")
}

pub fn samples_to_csv(header: &[String], samples: &[DVector<f64>]) -> String {
    let mut out = String::with_capacity(32 * (samples.len() + 1));
    out.push_str(&header.join(","));
    out.push('\n');
    for s in samples {
        let row: Vec<String> = s.iter().map(|&x| format_value(x)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn read_samples_csv(path: &Path) -> Result<(Vec<String>, Vec<DVector<f64>>), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("reading {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| CliError::Validation(format!("{} is empty", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let values: Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
        let values = values.map_err(|e| {
            CliError::Validation(format!("{} row {}: {e}", path.display(), i + 1))
        })?;
        if values.len() != header.len() {
            return Err(CliError::Validation(format!(
                "{} row {} has {} values, header names {}",
                path.display(),
                i + 1,
                values.len(),
                header.len()
            )));
        }
        samples.push(DVector::from_vec(values));
    }
    Ok((header, samples))
}

pub fn read_json_value(path: &Path) -> Result<serde_json::Value, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("reading {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Equal-width histogram over observed values: rows of
/// `bin_lo,bin_hi,count,density`.
pub fn histogram_csv(values: &[f64], n_bins: usize) -> String {
    let mut out = String::from("bin_lo,bin_hi,count,density\n");
    if values.is_empty() {
        return out;
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / n_bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; n_bins];
    for &v in values {
        let idx = (((v - lo) / width) as usize).min(n_bins - 1);
        counts[idx] += 1;
    }
    let total = values.len() as f64;
    for (i, &count) in counts.iter().enumerate() {
        let bin_lo = lo + i as f64 * width;
        let bin_hi = bin_lo + width;
        let density = count as f64 / (total * width);
        out.push_str(&format!(
            "{},{},{count},{}\n",
            format_value(bin_lo),
            format_value(bin_hi),
            format_value(density)
        ));
    }
    out
}
