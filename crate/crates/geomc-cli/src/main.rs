//! Experiment driver for the geomc sampling library.
//!
//! `run` executes one configured experiment and writes samples.csv,
//! diagnostics.json, and config-echo.json (plus histogram.csv on request);
//! `compare` contrasts two finished runs of the same target; `tour` emits a
//! geodesic interpolation path through a list of orthonormal frames.
//!
//! Exit codes: 0 success, 2 validation failure, 3 runtime failure.

mod config;
mod files;

use clap::{Parser, Subcommand};
use geomc::diagnostics::{ks_two_sample, moment_compare, summarize_chain, DiagnosticsSummary};
use geomc::diagnostics::{KsResult, MomentDeltas};
use geomc::manifold::ManifoldSpec;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;

use config::ExperimentConfig;
use files::WrittenFiles;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

#[derive(Parser)]
#[command(name = "geomc", version, about = "Monte Carlo sampling on embedded manifolds")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute one experiment described by a JSON config.
    Run {
        /// Path to the experiment config.
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed override; replaces the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Contrast two finished runs of the same target.
    Compare {
        run_a: PathBuf,
        run_b: PathBuf,
        /// Directory for comparison.json (default: current directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Interpolate a geodesic path through a list of orthonormal frames.
    Tour {
        /// JSON file: {"p": .., "k": .., "frames": [[..p*k values..], ..]}.
        #[arg(long)]
        frames: PathBuf,
        /// Points per segment, endpoints included.
        #[arg(long, default_value_t = 10)]
        n_interp: usize,
        /// Directory for frames.csv (default: current directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run { config, out, seed } => cmd_run(&config, out, seed),
        Cmd::Compare { run_a, run_b, out } => cmd_compare(&run_a, &run_b, out),
        Cmd::Tour { frames, n_interp, out } => cmd_tour(&frames, n_interp, out),
    };
    match result {
        Ok(()) => {}
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(2);
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(3);
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RunDiagnostics {
    n_samples: usize,
    accept_rate: f64,
    elapsed_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_proposals: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    envelope_constant: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    min_ess_per_second: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    summary: Option<DiagnosticsSummary>,
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("creating {}: {e}", dir.display())))
}

fn cmd_run(config_path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::Validation(format!("reading {}: {e}", config_path.display())))?;
    let mut config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", config_path.display())))?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(out) = out {
        config.output_dir = Some(out);
    }
    config.validate()?;

    let out_dir = config
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("."));
    ensure_dir(&out_dir)?;

    let started = Instant::now();
    let output = config::execute(&config)?;
    let elapsed = started.elapsed().as_secs_f64();

    // Degenerate chains (too short, frozen) simply omit the summary block.
    let summary = if output.samples.len() >= 20 {
        summarize_chain(&output.samples, output.accept_rate).ok()
    } else {
        None
    };
    let min_ess_per_second = summary.as_ref().map(|s| {
        let min_ess = s.ess.iter().cloned().fold(f64::INFINITY, f64::min);
        min_ess / elapsed.max(f64::MIN_POSITIVE)
    });
    let diagnostics = RunDiagnostics {
        n_samples: output.samples.len(),
        accept_rate: output.accept_rate,
        elapsed_seconds: elapsed,
        n_proposals: output.n_proposals,
        envelope_constant: output.envelope_constant,
        min_ess_per_second,
        summary,
    };

    let mut written = WrittenFiles::default();
    let result = (|| {
        written.write(
            &out_dir.join("samples.csv"),
            &files::samples_to_csv(&output.header, &output.samples),
        )?;
        written.write_json(&out_dir.join("diagnostics.json"), &diagnostics)?;
        written.write_json(&out_dir.join("config-echo.json"), &config)?;
        if let Some(h) = &config.histogram {
            let values: Vec<f64> = output.samples.iter().map(|s| s[h.coordinate]).collect();
            written.write(
                &out_dir.join("histogram.csv"),
                &files::histogram_csv(&values, h.n_bins),
            )?;
        }
        Ok(())
    })();
    if result.is_err() {
        written.remove_all();
        return result;
    }

    println!(
        "wrote {} draws to {} (accept rate {:.3}, {:.2}s)",
        output.samples.len(),
        out_dir.join("samples.csv").display(),
        output.accept_rate,
        elapsed
    );
    Ok(())
}

#[derive(Serialize)]
struct Comparison {
    run_a: String,
    run_b: String,
    n_samples: [usize; 2],
    accept_rates: [Option<f64>; 2],
    ess_per_second: [Option<f64>; 2],
    per_coordinate_ks: Vec<KsResult>,
    moment_deltas: MomentDeltas,
    max_abs_moment_delta: f64,
}

fn load_run(dir: &Path) -> Result<(serde_json::Value, Vec<DVector<f64>>, serde_json::Value), CliError> {
    let echo = files::read_json_value(&dir.join("config-echo.json"))?;
    let (_, samples) = files::read_samples_csv(&dir.join("samples.csv"))?;
    let diagnostics = files::read_json_value(&dir.join("diagnostics.json"))?;
    if samples.is_empty() {
        return Err(CliError::Validation(format!(
            "{} holds no samples to compare",
            dir.display()
        )));
    }
    Ok((echo, samples, diagnostics))
}

fn cmd_compare(run_a: &Path, run_b: &Path, out: Option<PathBuf>) -> Result<(), CliError> {
    let (echo_a, samples_a, diag_a) = load_run(run_a)?;
    let (echo_b, samples_b, diag_b) = load_run(run_b)?;

    if echo_a.get("target") != echo_b.get("target") {
        return Err(CliError::Validation(format!(
            "runs target different distributions; {} samples {} while {} samples {}",
            run_a.display(),
            echo_a.get("target").and_then(|t| t.get("kind")).map(|k| k.to_string()).unwrap_or_else(|| "?".into()),
            run_b.display(),
            echo_b.get("target").and_then(|t| t.get("kind")).map(|k| k.to_string()).unwrap_or_else(|| "?".into()),
        )));
    }
    let d = samples_a[0].len();
    if samples_b[0].len() != d {
        return Err(CliError::Validation(format!(
            "sample rows disagree: {} columns vs {}",
            d,
            samples_b[0].len()
        )));
    }

    let mut per_coordinate_ks = Vec::with_capacity(d);
    for coord in 0..d {
        let xs: Vec<f64> = samples_a.iter().map(|s| s[coord]).collect();
        let ys: Vec<f64> = samples_b.iter().map(|s| s[coord]).collect();
        per_coordinate_ks.push(ks_two_sample(&xs, &ys).map_err(|e| CliError::Runtime(e.to_string()))?);
    }
    let moment_deltas =
        moment_compare(&samples_a, &samples_b).map_err(|e| CliError::Runtime(e.to_string()))?;

    let ess_per_second = |diag: &serde_json::Value| {
        diag.get("min_ess_per_second").and_then(|v| v.as_f64())
    };
    let accept_rate = |diag: &serde_json::Value| diag.get("accept_rate").and_then(|v| v.as_f64());

    let comparison = Comparison {
        run_a: run_a.display().to_string(),
        run_b: run_b.display().to_string(),
        n_samples: [samples_a.len(), samples_b.len()],
        accept_rates: [accept_rate(&diag_a), accept_rate(&diag_b)],
        ess_per_second: [ess_per_second(&diag_a), ess_per_second(&diag_b)],
        max_abs_moment_delta: moment_deltas.max_abs(),
        per_coordinate_ks,
        moment_deltas,
    };

    let out_dir = out.unwrap_or_else(|| PathBuf::from("."));
    ensure_dir(&out_dir)?;
    let mut written = WrittenFiles::default();
    let path = out_dir.join("comparison.json");
    if let Err(e) = written.write_json(&path, &comparison) {
        written.remove_all();
        return Err(e);
    }
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Deserialize)]
struct TourInput {
    p: usize,
    k: usize,
    frames: Vec<Vec<f64>>,
}

fn cmd_tour(frames_path: &Path, n_interp: usize, out: Option<PathBuf>) -> Result<(), CliError> {
    if n_interp < 2 {
        return Err(CliError::Validation(
            "n-interp must be at least 2 (both endpoints count)".to_string(),
        ));
    }
    let text = std::fs::read_to_string(frames_path)
        .map_err(|e| CliError::Validation(format!("reading {}: {e}", frames_path.display())))?;
    let input: TourInput = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", frames_path.display())))?;
    let manifold = ManifoldSpec::stiefel(input.k, input.p)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    if input.frames.len() < 2 {
        return Err(CliError::Validation(format!(
            "tour needs at least 2 frames, got {}",
            input.frames.len()
        )));
    }

    let mut frames = Vec::with_capacity(input.frames.len());
    for (row, values) in input.frames.iter().enumerate() {
        if values.len() != input.p * input.k {
            return Err(CliError::Validation(format!(
                "frame {row} has {} values, expected p*k = {}",
                values.len(),
                input.p * input.k
            )));
        }
        let q = DVector::from_column_slice(values);
        let err = manifold.constraint_error(&q);
        if err > 1e-8 {
            return Err(CliError::Validation(format!(
                "frame {row} is not orthonormal (constraint error {err:.2e})"
            )));
        }
        // Snap within-tolerance input so every emitted row meets the tighter
        // output bound.
        frames.push(
            manifold
                .project_to_manifold(&q)
                .map_err(|e| CliError::Validation(format!("frame {row}: {e}")))?,
        );
    }

    let mut path_points: Vec<DVector<f64>> = Vec::new();
    for pair in frames.windows(2) {
        let mut segment = manifold
            .geodesic_interpolate(&pair[0], &pair[1], n_interp)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        // The interior of the segment comes from the geodesic; its ends are
        // the input frames themselves, bit for bit.
        segment[0] = pair[0].clone();
        *segment.last_mut().unwrap() = pair[1].clone();
        let skip = usize::from(!path_points.is_empty());
        path_points.extend(segment.into_iter().skip(skip));
    }
    for (i, q) in path_points.iter().enumerate() {
        let err = manifold.constraint_error(q);
        if err > 1e-10 {
            return Err(CliError::Runtime(format!(
                "interpolated frame {i} drifted off the manifold ({err:.2e})"
            )));
        }
    }

    let header: Vec<String> = (0..input.p * input.k).map(|i| format!("q{i}")).collect();
    let out_dir = out.unwrap_or_else(|| PathBuf::from("."));
    ensure_dir(&out_dir)?;
    let mut written = WrittenFiles::default();
    let path = out_dir.join("frames.csv");
    if let Err(e) = written.write(&path, &files::samples_to_csv(&header, &path_points)) {
        written.remove_all();
        return Err(e);
    }
    println!("wrote {} frames to {}", path_points.len(), path.display());
    Ok(())
}
