//! Experiment configuration: JSON schema, validation, and dispatch of one run.

use geomc::baseline::{
    acg_rejection_bingham, barbell_uniform_surface, bingham_envelope_fb, matrix_fisher_sampler,
    naive_conditional_fb, RejectionReport,
};
use geomc::manifold::{ball_to_sphere, sphere_to_ball, ManifoldKind, ManifoldSpec};
use geomc::sampler::{
    parallel_tempering, sample, sample_on_ball, GmcConfig, RunRecord, TemperingLadder,
};
use geomc::targets::{
    BarbellParams, DirichletParams, DirichletSphereTarget, FisherBinghamParams,
    FisherBinghamTarget, LiftedBallTarget, MatrixFisherParams, Target, UniformBallDensity,
    UniformTarget,
};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TargetSpec {
    FisherBingham {
        manifold: ManifoldSpec,
        #[serde(flatten)]
        params: FisherBinghamParams,
    },
    Dirichlet {
        #[serde(flatten)]
        params: DirichletParams,
    },
    Uniform {
        manifold: ManifoldSpec,
    },
    UniformBall {
        dim: usize,
    },
    Barbell {
        #[serde(flatten)]
        params: BarbellParams,
    },
    MatrixFisher {
        #[serde(flatten)]
        params: MatrixFisherParams,
    },
}

impl TargetSpec {
    fn kind_name(&self) -> &'static str {
        match self {
            TargetSpec::FisherBingham { .. } => "fisher-bingham",
            TargetSpec::Dirichlet { .. } => "dirichlet",
            TargetSpec::Uniform { .. } => "uniform",
            TargetSpec::UniformBall { .. } => "uniform-ball",
            TargetSpec::Barbell { .. } => "barbell",
            TargetSpec::MatrixFisher { .. } => "matrix-fisher",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SamplerSpec {
    Gmc {
        epsilon: f64,
        n_steps: usize,
        #[serde(default = "default_temperature")]
        temperature: f64,
    },
    TemperedGmc {
        epsilon: f64,
        n_steps: usize,
        ladder: TemperingLadder,
    },
    NaiveConditional {
        nu: f64,
    },
    AcgBingham {},
    FbEnvelope {},
    MatrixFisher {},
    Barbell {},
}

fn default_temperature() -> f64 {
    1.0
}

impl SamplerSpec {
    fn kind_name(&self) -> &'static str {
        match self {
            SamplerSpec::Gmc { .. } => "gmc",
            SamplerSpec::TemperedGmc { .. } => "tempered-gmc",
            SamplerSpec::NaiveConditional { .. } => "naive-conditional",
            SamplerSpec::AcgBingham {} => "acg-bingham",
            SamplerSpec::FbEnvelope {} => "fb-envelope",
            SamplerSpec::MatrixFisher {} => "matrix-fisher",
            SamplerSpec::Barbell {} => "barbell",
        }
    }

    fn is_gmc(&self) -> bool {
        matches!(self, SamplerSpec::Gmc { .. } | SamplerSpec::TemperedGmc { .. })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub coordinate: usize,
    pub n_bins: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub target: TargetSpec,
    pub sampler: SamplerSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_draws: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_burnin: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_proposals: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<HistogramSpec>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

impl ExperimentConfig {
    /// Check field presence, parameter ranges, and the sampler/target pairing.
    pub fn validate(&self) -> Result<(), CliError> {
        let sampler = self.sampler.kind_name();
        let target = self.target.kind_name();

        let pair_ok = match (&self.sampler, &self.target) {
            (SamplerSpec::Gmc { .. } | SamplerSpec::TemperedGmc { .. }, t) => !matches!(
                t,
                TargetSpec::Barbell { .. }
            ),
            (SamplerSpec::NaiveConditional { .. }, TargetSpec::FisherBingham { .. }) => true,
            (SamplerSpec::AcgBingham {}, TargetSpec::FisherBingham { .. }) => true,
            (SamplerSpec::FbEnvelope {}, TargetSpec::FisherBingham { .. }) => true,
            (SamplerSpec::MatrixFisher {}, TargetSpec::MatrixFisher { .. }) => true,
            (SamplerSpec::Barbell {}, TargetSpec::Barbell { .. }) => true,
            _ => false,
        };
        if !pair_ok {
            return Err(invalid(format!(
                "sampler '{sampler}' does not support target '{target}'"
            )));
        }

        match &self.sampler {
            SamplerSpec::Gmc { epsilon, n_steps, temperature } => {
                GmcConfig {
                    epsilon: *epsilon,
                    n_steps: *n_steps,
                    temperature: *temperature,
                    seed: self.seed,
                }
                .validate()
                .map_err(|e| invalid(e.to_string()))?;
            }
            SamplerSpec::TemperedGmc { epsilon, n_steps, .. } => {
                // The ladder already validated itself during deserialization.
                GmcConfig::new(*epsilon, *n_steps, self.seed)
                    .validate()
                    .map_err(|e| invalid(e.to_string()))?;
            }
            SamplerSpec::NaiveConditional { nu } if *nu <= 0.0 || !nu.is_finite() => {
                return Err(invalid(format!("nu must be positive, got {nu}")));
            }
            _ => {}
        }

        if let (SamplerSpec::AcgBingham {}, TargetSpec::FisherBingham { params, .. }) =
            (&self.sampler, &self.target)
        {
            if params.linear().amax() != 0.0 {
                return Err(invalid(
                    "acg-bingham samples pure quadratic densities; c must be all zeros",
                ));
            }
        }

        if self.sampler.is_gmc() {
            if self.n_draws.is_none() {
                return Err(invalid(format!("n_draws is required for sampler '{sampler}'")));
            }
            if self.n_proposals.is_some() {
                return Err(invalid("n_proposals only applies to naive-conditional"));
            }
        } else if matches!(self.sampler, SamplerSpec::NaiveConditional { .. }) {
            if self.n_proposals.is_none() {
                return Err(invalid("n_proposals is required for naive-conditional"));
            }
            for (present, field) in [
                (self.n_draws.is_some(), "n_draws"),
                (self.n_burnin.is_some(), "n_burnin"),
                (self.initial.is_some(), "initial"),
            ] {
                if present {
                    return Err(invalid(format!(
                        "{field} does not apply to naive-conditional, which runs on a proposal budget"
                    )));
                }
            }
        } else {
            if self.n_draws.is_none() {
                return Err(invalid(format!("n_draws is required for sampler '{sampler}'")));
            }
            for (present, field) in [
                (self.n_burnin.is_some(), "n_burnin"),
                (self.n_proposals.is_some(), "n_proposals"),
                (self.initial.is_some(), "initial"),
            ] {
                if present {
                    return Err(invalid(format!(
                        "{field} does not apply to sampler '{sampler}'"
                    )));
                }
            }
        }

        if let Some(h) = &self.histogram {
            if h.n_bins == 0 {
                return Err(invalid("histogram.n_bins must be at least 1"));
            }
            let width = self.output_width()?;
            if h.coordinate >= width {
                return Err(invalid(format!(
                    "histogram.coordinate {} out of range; rows have {} columns",
                    h.coordinate, width
                )));
            }
        }

        // Building the target exercises the remaining parameter validation
        // (manifold pairing inside fisher-bingham, dimension checks, ...).
        self.output_width()?;
        Ok(())
    }

    /// Number of columns a sample row will carry.
    fn output_width(&self) -> Result<usize, CliError> {
        Ok(match &self.target {
            TargetSpec::FisherBingham { manifold, params } => {
                FisherBinghamTarget::new(*manifold, params.clone())
                    .map_err(|e| invalid(e.to_string()))?;
                manifold.ambient_dim()
            }
            TargetSpec::Dirichlet { params } => params.alpha().len(),
            TargetSpec::Uniform { manifold } => manifold.ambient_dim(),
            TargetSpec::UniformBall { dim } => {
                if *dim == 0 {
                    return Err(invalid("uniform-ball needs dim >= 1"));
                }
                *dim
            }
            TargetSpec::Barbell { .. } => 3,
            TargetSpec::MatrixFisher { .. } => 4,
        })
    }

    /// Names for the CSV header, matching the row layout.
    pub fn coordinate_names(&self) -> Result<Vec<String>, CliError> {
        let width = self.output_width()?;
        Ok(match &self.target {
            TargetSpec::UniformBall { .. } => (0..width).map(|i| format!("theta{i}")).collect(),
            TargetSpec::Barbell { .. } => {
                vec!["x".to_string(), "y".to_string(), "z".to_string()]
            }
            _ => (0..width).map(|i| format!("q{i}")).collect(),
        })
    }
}

/// Everything a run produces before any file is written.
pub struct RunOutput {
    pub header: Vec<String>,
    pub samples: Vec<DVector<f64>>,
    pub accept_rate: f64,
    pub n_proposals: Option<usize>,
    pub envelope_constant: Option<f64>,
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// A deterministic on-manifold starting point with positive density for every
/// built-in target.
fn default_initial(m: &ManifoldSpec) -> DVector<f64> {
    match m.kind() {
        ManifoldKind::Stiefel { k, p } => {
            let mut q = DVector::zeros(k * p);
            for j in 0..k {
                q[j * p + j] = 1.0;
            }
            q
        }
        _ => {
            let d = m.ambient_dim();
            DVector::from_element(d, 1.0 / (d as f64).sqrt())
        }
    }
}

fn gmc_record(
    config: &ExperimentConfig,
    target: &dyn Target,
    cfg: &GmcConfig,
    ladder: Option<&TemperingLadder>,
) -> Result<RunRecord, CliError> {
    let initial = match &config.initial {
        Some(values) => DVector::from_column_slice(values),
        None => default_initial(target.manifold()),
    };
    let n_draws = config.n_draws.unwrap_or(0);
    let n_burnin = config.n_burnin.unwrap_or(0);
    match ladder {
        None => sample(target, cfg, n_draws, n_burnin, &initial).map_err(runtime),
        Some(ladder) => parallel_tempering(target, ladder, cfg, n_draws, n_burnin, &initial)
            .map(|(record, _)| record)
            .map_err(runtime),
    }
}

fn ball_record(
    config: &ExperimentConfig,
    dim: usize,
    cfg: &GmcConfig,
    ladder: Option<&TemperingLadder>,
) -> Result<RunRecord, CliError> {
    let target = LiftedBallTarget::new(UniformBallDensity::new(dim)).map_err(runtime)?;
    let n_draws = config.n_draws.unwrap_or(0);
    let n_burnin = config.n_burnin.unwrap_or(0);
    let theta0 = match &config.initial {
        Some(values) => DVector::from_column_slice(values),
        None => DVector::zeros(dim),
    };
    match ladder {
        None => sample_on_ball(&target, cfg, n_draws, n_burnin, &theta0).map_err(runtime),
        Some(ladder) => {
            let lifted = ball_to_sphere(&theta0, true).map_err(runtime)?;
            let (mut record, _) =
                parallel_tempering(&target, ladder, cfg, n_draws, n_burnin, &lifted)
                    .map_err(runtime)?;
            for s in record.samples.iter_mut() {
                *s = sphere_to_ball(s).map_err(runtime)?;
            }
            Ok(record)
        }
    }
}

fn from_report(report: RejectionReport, header: Vec<String>) -> RunOutput {
    RunOutput {
        header,
        accept_rate: report.rate(),
        n_proposals: Some(report.n_proposals),
        envelope_constant: report.envelope_constant,
        samples: report.samples,
    }
}

/// Run the configured experiment and return its in-memory output.
pub fn execute(config: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let header = config.coordinate_names()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_draws = config.n_draws.unwrap_or(0);

    match &config.sampler {
        SamplerSpec::Gmc { .. } | SamplerSpec::TemperedGmc { .. } => {
            let (epsilon, n_steps, temperature, ladder) = match &config.sampler {
                SamplerSpec::Gmc { epsilon, n_steps, temperature } => {
                    (*epsilon, *n_steps, *temperature, None)
                }
                SamplerSpec::TemperedGmc { epsilon, n_steps, ladder } => {
                    (*epsilon, *n_steps, 1.0, Some(ladder))
                }
                _ => unreachable!(),
            };
            let cfg = GmcConfig { epsilon, n_steps, temperature, seed: config.seed };
            let record = match &config.target {
                TargetSpec::FisherBingham { manifold, params } => {
                    let target = FisherBinghamTarget::new(*manifold, params.clone())
                        .map_err(runtime)?;
                    gmc_record(config, &target, &cfg, ladder)?
                }
                TargetSpec::Dirichlet { params } => {
                    let target = DirichletSphereTarget::new(params.clone()).map_err(runtime)?;
                    gmc_record(config, &target, &cfg, ladder)?
                }
                TargetSpec::Uniform { manifold } => {
                    let target = UniformTarget::new(*manifold);
                    gmc_record(config, &target, &cfg, ladder)?
                }
                TargetSpec::UniformBall { dim } => ball_record(config, *dim, &cfg, ladder)?,
                TargetSpec::MatrixFisher { params } => {
                    let target = params.to_target();
                    gmc_record(config, &target, &cfg, ladder)?
                }
                TargetSpec::Barbell { .. } => unreachable!("rejected during validation"),
            };
            Ok(RunOutput {
                header,
                accept_rate: record.accept_rate(),
                n_proposals: None,
                envelope_constant: None,
                samples: record.samples,
            })
        }
        SamplerSpec::NaiveConditional { nu } => {
            let TargetSpec::FisherBingham { params, .. } = &config.target else {
                unreachable!("rejected during validation");
            };
            let g = geomc::targets::gaussian_equivalent(params).map_err(runtime)?;
            let report =
                naive_conditional_fb(&g, *nu, config.n_proposals.unwrap_or(0), &mut rng)
                    .map_err(runtime)?;
            Ok(from_report(report, header))
        }
        SamplerSpec::AcgBingham {} => {
            let TargetSpec::FisherBingham { params, .. } = &config.target else {
                unreachable!("rejected during validation");
            };
            let report = acg_rejection_bingham(params.quadratic(), n_draws, &mut rng)
                .map_err(runtime)?;
            Ok(from_report(report, header))
        }
        SamplerSpec::FbEnvelope {} => {
            let TargetSpec::FisherBingham { params, .. } = &config.target else {
                unreachable!("rejected during validation");
            };
            let report = bingham_envelope_fb(params, n_draws, &mut rng).map_err(runtime)?;
            Ok(from_report(report, header))
        }
        SamplerSpec::MatrixFisher {} => {
            let TargetSpec::MatrixFisher { params } = &config.target else {
                unreachable!("rejected during validation");
            };
            let (_, report) = matrix_fisher_sampler(params, n_draws, &mut rng).map_err(runtime)?;
            Ok(from_report(report, header))
        }
        SamplerSpec::Barbell {} => {
            let TargetSpec::Barbell { params } = &config.target else {
                unreachable!("rejected during validation");
            };
            let report = barbell_uniform_surface(params, n_draws, &mut rng).map_err(runtime)?;
            Ok(from_report(report, header))
        }
    }
}
