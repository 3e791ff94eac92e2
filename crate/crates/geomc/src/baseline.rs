//! Exact and rejection samplers used both standalone and as oracles for
//! validating the geodesic chains: shell-conditioned Gaussian draws, angular
//! central Gaussian (ACG) rejection for Bingham and Fisher-Bingham densities,
//! matrix Fisher rotations, and uniform draws on the barbell surface.

use nalgebra::{DMatrix, DVector, Matrix3};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::targets::{
    quaternion_to_rotation, BarbellParams, FisherBinghamParams, GaussianEquivalent,
    MatrixFisherParams,
};
use crate::{GmcError, Result};

/// Outcome of a rejection run: the accepted points plus the bookkeeping needed
/// to judge the envelope.
#[derive(Debug, Clone)]
pub struct RejectionReport {
    pub n_proposals: usize,
    pub n_accepted: usize,
    pub samples: Vec<DVector<f64>>,
    /// Analytic envelope bound where the sampler has one (ACG and barbell
    /// samplers); `None` for plain truncation sampling.
    pub envelope_constant: Option<f64>,
}

impl RejectionReport {
    pub fn rate(&self) -> f64 {
        if self.n_proposals == 0 {
            0.0
        } else {
            self.n_accepted as f64 / self.n_proposals as f64
        }
    }

    /// Combine two reports from independent shards of the same run.
    pub fn merge(mut self, other: RejectionReport) -> RejectionReport {
        self.n_proposals += other.n_proposals;
        self.n_accepted += other.n_accepted;
        self.samples.extend(other.samples);
        self
    }
}

/// Draw from the Gaussian equivalent of a Fisher-Bingham density and keep only
/// draws landing in the shell | ||Y|| - 1 | < nu, normalized onto the sphere.
///
/// Acceptance decays linearly in `nu`, so this is an exact but increasingly
/// expensive oracle as the shell tightens.
pub fn naive_conditional_fb<R: Rng + ?Sized>(
    g: &GaussianEquivalent,
    nu: f64,
    n_proposals: usize,
    rng: &mut R,
) -> Result<RejectionReport> {
    if nu <= 0.0 || !nu.is_finite() {
        return Err(GmcError::InvalidParameter(format!(
            "shell tolerance must be positive, got {nu}"
        )));
    }
    let d = g.mu.len();
    if g.sigma.nrows() != d || g.sigma.ncols() != d {
        return Err(GmcError::DimensionMismatch(
            "mean and covariance dimensions differ".to_string(),
        ));
    }
    let chol = g.sigma.clone().cholesky().ok_or_else(|| {
        GmcError::InvalidParameter("covariance is not positive-definite".to_string())
    })?;
    let l = chol.l();

    let mut samples = Vec::new();
    let mut z = DVector::<f64>::zeros(d);
    for _ in 0..n_proposals {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let y = &g.mu + &l * &z;
        let norm = y.norm();
        if (norm - 1.0).abs() < nu {
            samples.push(y / norm);
        }
    }
    Ok(RejectionReport {
        n_proposals,
        n_accepted: samples.len(),
        samples,
        envelope_constant: None,
    })
}

/// Precomputed ACG envelope for a Bingham density.
///
/// The quadratic matrix is shifted so its largest eigenvalue is zero, giving a
/// concentration Lambda = -A_shifted with eigenvalues lambda_i >= 0. The ACG
/// shape is Omega = I + (2/b) Lambda where `b` solves
/// sum_i 1/(b + 2 lambda_i) = 1, and the envelope constant
/// M = exp(-(d - b)/2) (d/b)^{d/2} makes the bound tight.
struct AcgEnvelope {
    /// Eigenvectors of the quadratic matrix (columns).
    basis: DMatrix<f64>,
    /// Nonnegative concentration spectrum lambda_i.
    lambda: DVector<f64>,
    /// Per-axis ACG scale 1/sqrt(1 + 2 lambda_i / b).
    axis_scale: DVector<f64>,
    b: f64,
    log_envelope: f64,
    dim: usize,
}

impl AcgEnvelope {
    fn new(a: &DMatrix<f64>) -> Result<Self> {
        let d = a.nrows();
        if d < 2 || a.ncols() != d {
            return Err(GmcError::InvalidParameter(
                "quadratic matrix must be square with dimension >= 2".to_string(),
            ));
        }
        if (a - a.transpose()).amax() > 1e-10 * a.amax().max(1.0) {
            return Err(GmcError::InvalidParameter(
                "quadratic matrix must be symmetric".to_string(),
            ));
        }
        let eig = a.clone().symmetric_eigen();
        let top = eig.eigenvalues.max();
        let lambda = eig.eigenvalues.map(|l| top - l);

        let df = d as f64;
        let b = if lambda.max() < 1e-14 {
            // Flat density: the root equation gives exactly b = d and the
            // envelope is the uniform distribution itself.
            df
        } else {
            let f = |b: f64| -> f64 {
                lambda.iter().map(|&l| 1.0 / (b + 2.0 * l)).sum::<f64>() - 1.0
            };
            // f decreases from +inf at b -> 0 to f(d) <= 0.
            let mut lo = 1e-12;
            let mut hi = df;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        if !(b > 0.0 && b <= df) {
            return Err(GmcError::Numeric(format!(
                "envelope shape solve produced b = {b}"
            )));
        }
        let log_envelope = -(df - b) / 2.0 + (df / 2.0) * (df / b).ln();
        let axis_scale = lambda.map(|l| 1.0 / (1.0 + 2.0 * l / b).sqrt());
        Ok(Self {
            basis: eig.eigenvectors,
            lambda,
            axis_scale,
            b,
            log_envelope,
            dim: d,
        })
    }

    /// One proposal in the eigenbasis; returns the accept decision and, when
    /// accepted, the ambient unit vector.
    fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<DVector<f64>> {
        let mut y = DVector::<f64>::zeros(self.dim);
        for i in 0..self.dim {
            let z: f64 = rng.sample(StandardNormal);
            y[i] = z * self.axis_scale[i];
        }
        y /= y.norm();
        let u: f64 = y.iter().zip(self.lambda.iter()).map(|(yi, l)| l * yi * yi).sum();
        let log_ratio =
            -u + (self.dim as f64 / 2.0) * (1.0 + 2.0 * u / self.b).ln() - self.log_envelope;
        let coin: f64 = rng.random();
        if coin.ln() < log_ratio {
            Some(&self.basis * y)
        } else {
            None
        }
    }

    /// log of the acceptance ratio evaluated at an arbitrary unit vector,
    /// exposed so the envelope inequality can be checked directly.
    #[cfg(test)]
    fn log_accept_ratio(&self, x_ambient: &DVector<f64>) -> f64 {
        let y = self.basis.transpose() * x_ambient;
        let u: f64 = y.iter().zip(self.lambda.iter()).map(|(yi, l)| l * yi * yi).sum();
        -u + (self.dim as f64 / 2.0) * (1.0 + 2.0 * u / self.b).ln() - self.log_envelope
    }

    fn envelope_constant(&self) -> f64 {
        self.log_envelope.exp()
    }
}

enum Budget {
    Draws(usize),
    Proposals(usize),
}

fn run_acg<R: Rng + ?Sized>(
    a: &DMatrix<f64>,
    budget: Budget,
    rng: &mut R,
) -> Result<RejectionReport> {
    let env = AcgEnvelope::new(a)?;
    let mut samples = Vec::new();
    let mut proposals = 0usize;
    match budget {
        Budget::Draws(n) => {
            while samples.len() < n {
                proposals += 1;
                if let Some(x) = env.propose(rng) {
                    samples.push(x);
                }
            }
        }
        Budget::Proposals(n) => {
            for _ in 0..n {
                proposals += 1;
                if let Some(x) = env.propose(rng) {
                    samples.push(x);
                }
            }
        }
    }
    Ok(RejectionReport {
        n_proposals: proposals,
        n_accepted: samples.len(),
        samples,
        envelope_constant: Some(env.envelope_constant()),
    })
}

/// Exact Bingham(A) samples by rejection from an angular central Gaussian
/// envelope; runs until `n_draws` acceptances.
pub fn acg_rejection_bingham<R: Rng + ?Sized>(
    a: &DMatrix<f64>,
    n_draws: usize,
    rng: &mut R,
) -> Result<RejectionReport> {
    run_acg(a, Budget::Draws(n_draws), rng)
}

/// Same sampler with a fixed proposal budget, for measuring efficiency.
pub fn acg_rejection_bingham_for_proposals<R: Rng + ?Sized>(
    a: &DMatrix<f64>,
    n_proposals: usize,
    rng: &mut R,
) -> Result<RejectionReport> {
    run_acg(a, Budget::Proposals(n_proposals), rng)
}

/// Exact Fisher-Bingham(c, A) samples: Bingham(A) proposals from the ACG
/// sampler thinned through the linear term with the bound
/// exp(c.x) <= exp(||c||).
///
/// `n_proposals` in the report counts Bingham draws consumed by the outer
/// stage; the bound is coarse but correct, which is all an oracle needs.
pub fn bingham_envelope_fb<R: Rng + ?Sized>(
    params: &FisherBinghamParams,
    n_draws: usize,
    rng: &mut R,
) -> Result<RejectionReport> {
    let env = AcgEnvelope::new(params.quadratic())?;
    let c = params.linear();
    let c_norm = c.norm();
    let mut samples = Vec::new();
    let mut outer_proposals = 0usize;
    while samples.len() < n_draws {
        let x = loop {
            if let Some(x) = env.propose(rng) {
                break x;
            }
        };
        outer_proposals += 1;
        let log_ratio = c.dot(&x) - c_norm;
        let coin: f64 = rng.random();
        if coin.ln() < log_ratio {
            samples.push(x);
        }
    }
    Ok(RejectionReport {
        n_proposals: outer_proposals,
        n_accepted: samples.len(),
        samples,
        envelope_constant: Some(c_norm.exp()),
    })
}

fn quaternions_to_rotations(report: &RejectionReport) -> Result<Vec<Matrix3<f64>>> {
    report
        .samples
        .iter()
        .map(quaternion_to_rotation)
        .collect::<Result<Vec<_>>>()
}

/// Exact matrix Fisher rotations: Bingham sampling of the equivalent
/// quaternion density followed by the quaternion-to-rotation map. The report
/// keeps the quaternion draws.
pub fn matrix_fisher_sampler<R: Rng + ?Sized>(
    params: &MatrixFisherParams,
    n_draws: usize,
    rng: &mut R,
) -> Result<(Vec<Matrix3<f64>>, RejectionReport)> {
    let bingham = params.to_bingham();
    let report = acg_rejection_bingham(bingham.quadratic(), n_draws, rng)?;
    let rotations = quaternions_to_rotations(&report)?;
    Ok((rotations, report))
}

/// Matrix Fisher sampling with a fixed proposal budget, for efficiency tests.
pub fn matrix_fisher_sampler_for_proposals<R: Rng + ?Sized>(
    params: &MatrixFisherParams,
    n_proposals: usize,
    rng: &mut R,
) -> Result<(Vec<Matrix3<f64>>, RejectionReport)> {
    let bingham = params.to_bingham();
    let report = acg_rejection_bingham_for_proposals(bingham.quadratic(), n_proposals, rng)?;
    let rotations = quaternions_to_rotations(&report)?;
    Ok((rotations, report))
}

/// Axial positions on the barbell distributed as the surface-area marginal,
/// by rejection from the uniform box [-L, L] x [0, M] with
/// M = r cosh^2((L - l)/r).
pub fn barbell_rejection_x<R: Rng + ?Sized>(
    params: &BarbellParams,
    n_proposals: usize,
    rng: &mut R,
) -> RejectionReport {
    let half_width = params.half_width();
    let envelope = params.r() * ((half_width - params.bar_half_length()) / params.r()).cosh().powi(2);
    let mut samples = Vec::new();
    for _ in 0..n_proposals {
        let x: f64 = rng.random_range(-half_width..half_width);
        let eta: f64 = rng.random_range(0.0..envelope);
        let density = params
            .log_surface_density(x)
            .expect("proposal is inside the domain")
            .exp();
        if eta < density {
            samples.push(DVector::from_vec(vec![x]));
        }
    }
    RejectionReport {
        n_proposals,
        n_accepted: samples.len(),
        samples,
        envelope_constant: Some(envelope),
    }
}

/// Uniform draws on the barbell surface: accepted axial positions paired with
/// a revolution angle drawn uniformly on [0, 2 pi), then embedded.
pub fn barbell_uniform_surface<R: Rng + ?Sized>(
    params: &BarbellParams,
    n_draws: usize,
    rng: &mut R,
) -> Result<RejectionReport> {
    let half_width = params.half_width();
    let envelope = params.r() * ((half_width - params.bar_half_length()) / params.r()).cosh().powi(2);
    let mut samples = Vec::with_capacity(n_draws);
    let mut proposals = 0usize;
    while samples.len() < n_draws {
        proposals += 1;
        let x: f64 = rng.random_range(-half_width..half_width);
        let eta: f64 = rng.random_range(0.0..envelope);
        let density = params.log_surface_density(x)?.exp();
        if eta < density {
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let [px, py, pz] = params.embed(x, phi)?;
            samples.push(DVector::from_vec(vec![px, py, pz]));
        }
    }
    Ok(RejectionReport {
        n_proposals: proposals,
        n_accepted: samples.len(),
        samples,
        envelope_constant: Some(envelope),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{ks_one_sample, moment_compare};
    use crate::targets::gaussian_equivalent;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(d: usize, scale: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let g = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal) * scale);
        (&g + g.transpose()) * 0.5
    }

    fn lag1_autocorr(series: &[f64]) -> f64 {
        let n = series.len();
        let mean = series.iter().sum::<f64>() / n as f64;
        let var: f64 = series.iter().map(|x| (x - mean) * (x - mean)).sum();
        let cov: f64 = series
            .windows(2)
            .map(|w| (w[0] - mean) * (w[1] - mean))
            .sum();
        cov / var
    }

    #[test]
    fn huge_shell_accepts_every_proposal() {
        let mut rng = ChaCha8Rng::seed_from_u64(301);
        let a = random_symmetric(4, 1.0, &mut rng);
        let p = FisherBinghamParams::bingham(a).unwrap();
        let g = gaussian_equivalent(&p).unwrap();
        let report = naive_conditional_fb(&g, 10.0, 10_000, &mut rng).unwrap();
        assert_eq!(report.rate(), 1.0);
        for s in report.samples.iter().take(50) {
            assert_relative_eq!(s.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn shell_acceptance_is_monotone_in_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(303);
        let a = random_symmetric(5, 0.8, &mut rng);
        let p = FisherBinghamParams::bingham(a).unwrap();
        let g = gaussian_equivalent(&p).unwrap();
        let mut rates = Vec::new();
        for nu in [0.2, 0.1, 0.05] {
            let mut local = ChaCha8Rng::seed_from_u64(7);
            rates.push(naive_conditional_fb(&g, nu, 100_000, &mut local).unwrap().rate());
        }
        assert!(rates[0] > rates[1] && rates[1] > rates[2], "rates {rates:?}");
    }

    #[test]
    fn shell_acceptance_scales_linearly_in_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(305);
        let a = random_symmetric(5, 0.8, &mut rng);
        let p = FisherBinghamParams::bingham(a).unwrap();
        let g = gaussian_equivalent(&p).unwrap();
        let r1 = naive_conditional_fb(&g, 2e-2, 400_000, &mut rng).unwrap().rate();
        let r2 = naive_conditional_fb(&g, 1e-2, 400_000, &mut rng).unwrap().rate();
        let ratio = r1 / r2;
        assert!((1.7..2.3).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn non_positive_definite_covariance_is_rejected() {
        let g = GaussianEquivalent {
            mu: DVector::zeros(3),
            sigma: DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -0.5, 0.5])),
            shift: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(307);
        assert!(matches!(
            naive_conditional_fb(&g, 0.1, 10, &mut rng),
            Err(GmcError::InvalidParameter(_))
        ));
        assert!(naive_conditional_fb(&g, -1.0, 10, &mut rng).is_err());
    }

    #[test]
    fn flat_bingham_accepts_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(309);
        let a = DMatrix::<f64>::zeros(4, 4);
        let report = acg_rejection_bingham_for_proposals(&a, 10_000, &mut rng).unwrap();
        assert_eq!(report.rate(), 1.0);
        assert_relative_eq!(report.envelope_constant.unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn acg_envelope_inequality_holds_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(311);
        for d in [3usize, 4] {
            let a = random_symmetric(d, 2.0, &mut rng);
            let env = AcgEnvelope::new(&a).unwrap();
            for _ in 0..100_000 {
                let mut x: DVector<f64> = DVector::from_fn(d, |_, _| rng.sample(StandardNormal));
                x /= x.norm();
                assert!(env.log_accept_ratio(&x) <= 1e-12);
            }
        }
    }

    #[test]
    fn acg_second_moments_match_sphere_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(313);
        let a = random_symmetric(3, 1.2, &mut rng);

        // Quadrature oracle: second moments of the Bingham density over a fine
        // latitude-longitude grid, midpoint rule in both angles.
        let n_theta = 400;
        let n_phi = 800;
        let mut weight_sum = 0.0;
        let mut second = DMatrix::<f64>::zeros(3, 3);
        let shift = {
            // Stabilize the exponent; shifts cancel in the ratio.
            let eig = a.clone().symmetric_eigen();
            eig.eigenvalues.max()
        };
        for it in 0..n_theta {
            let theta = std::f64::consts::PI * (it as f64 + 0.5) / n_theta as f64;
            for ip in 0..n_phi {
                let phi = std::f64::consts::TAU * (ip as f64 + 0.5) / n_phi as f64;
                let x = DVector::from_vec(vec![
                    theta.sin() * phi.cos(),
                    theta.sin() * phi.sin(),
                    theta.cos(),
                ]);
                let quad = (x.transpose() * &a * &x)[(0, 0)];
                let w = theta.sin() * (quad - shift).exp();
                weight_sum += w;
                second += &x * x.transpose() * w;
            }
        }
        second /= weight_sum;

        let report = acg_rejection_bingham(&a, 200_000, &mut rng).unwrap();
        let mut empirical = DMatrix::<f64>::zeros(3, 3);
        for s in &report.samples {
            empirical += s * s.transpose();
        }
        empirical /= report.samples.len() as f64;

        assert!(
            (empirical - second).amax() < 0.01,
            "moment mismatch beyond quadrature tolerance"
        );
    }

    #[test]
    fn accepted_draws_are_serially_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(315);
        let a = random_symmetric(4, 1.5, &mut rng);
        let report = acg_rejection_bingham(&a, 20_000, &mut rng).unwrap();
        let n = report.samples.len();
        for coord in 0..4 {
            let series: Vec<f64> = report.samples.iter().map(|s| s[coord]).collect();
            let rho = lag1_autocorr(&series);
            assert!(
                rho.abs() < 3.0 / (n as f64).sqrt(),
                "coordinate {coord} lag-1 autocorrelation {rho}"
            );
        }
    }

    #[test]
    fn zero_linear_term_keeps_every_bingham_draw() {
        let mut rng = ChaCha8Rng::seed_from_u64(317);
        let a = random_symmetric(4, 1.0, &mut rng);
        let p = FisherBinghamParams::bingham(a).unwrap();
        let report = bingham_envelope_fb(&p, 5_000, &mut rng).unwrap();
        assert_eq!(report.rate(), 1.0);
    }

    #[test]
    fn small_linear_term_keeps_most_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(319);
        let a = random_symmetric(4, 1.0, &mut rng);
        let mut c = DVector::zeros(4);
        c[0] = 0.1;
        let p = FisherBinghamParams::new(c, a).unwrap();
        let report = bingham_envelope_fb(&p, 20_000, &mut rng).unwrap();
        assert!(report.rate() >= 0.8, "rate {}", report.rate());
    }

    #[test]
    fn envelope_sampler_agrees_with_shell_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(321);
        let a = random_symmetric(4, 1.0, &mut rng);
        let c = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.7);
        let p = FisherBinghamParams::new(c, a).unwrap();

        let fast = bingham_envelope_fb(&p, 40_000, &mut rng).unwrap();
        let g = gaussian_equivalent(&p).unwrap();
        let slow = naive_conditional_fb(&g, 1e-2, 4_000_000, &mut rng).unwrap();
        assert!(slow.n_accepted > 5_000, "oracle too thin: {}", slow.n_accepted);

        let deltas = moment_compare(&fast.samples, &slow.samples).unwrap();
        assert!(
            deltas.max_abs() < 3.0,
            "standardized moment deltas {:?} / {:?}",
            deltas.first,
            deltas.second
        );
    }

    #[test]
    fn flat_concentration_gives_haar_rotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(323);
        let params = MatrixFisherParams::new(Matrix3::zeros()).unwrap();
        let (rotations, report) = matrix_fisher_sampler(&params, 20_000, &mut rng).unwrap();
        assert_eq!(rotations.len(), 20_000);
        assert_eq!(report.rate(), 1.0);
        let mut mean = Matrix3::<f64>::zeros();
        for r in &rotations {
            mean += r;
        }
        mean /= rotations.len() as f64;
        assert!(mean.amax() < 0.02, "mean rotation entry {:?}", mean.amax());
    }

    #[test]
    fn concentration_shrinks_rotation_angles() {
        let angle_of = |r: &Matrix3<f64>| ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
        let mean_angle = |kappa: f64, seed: u64| -> f64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let params = MatrixFisherParams::new(Matrix3::identity() * kappa).unwrap();
            let (rotations, _) = matrix_fisher_sampler(&params, 5_000, &mut rng).unwrap();
            rotations.iter().map(angle_of).sum::<f64>() / rotations.len() as f64
        };
        let loose = mean_angle(10.0, 325);
        let tight = mean_angle(20.0, 326);
        assert!(loose < 0.6, "mean angle at concentration 10 was {loose}");
        assert!(tight < loose, "tight {tight} vs loose {loose}");
    }

    #[test]
    fn matrix_fisher_efficiency_stays_high() {
        let mut rng = ChaCha8Rng::seed_from_u64(327);
        for _ in 0..5 {
            let f = Matrix3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal) * 2.0);
            let params = MatrixFisherParams::new(f).unwrap();
            let (_, report) = matrix_fisher_sampler_for_proposals(&params, 20_000, &mut rng).unwrap();
            assert!(report.rate() >= 0.40, "efficiency {}", report.rate());
        }
    }

    #[test]
    fn barbell_envelope_matches_closed_form() {
        let params = BarbellParams::new(1.0, 2.0, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(329);
        let report = barbell_rejection_x(&params, 1_000, &mut rng);
        let expect = 2.0f64.cosh().powi(2);
        assert_relative_eq!(report.envelope_constant.unwrap(), expect, epsilon = 1e-12);
        assert!((14.15..14.16).contains(&report.envelope_constant.unwrap()));
    }

    #[test]
    fn barbell_rate_matches_quadrature_prediction() {
        let params = BarbellParams::new(1.0, 2.0, 4.0).unwrap();

        // Composite Simpson quadrature of the axial density over [-L, L].
        let simpson = |f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize| -> f64 {
            let h = (b - a) / panels as f64;
            let mut s = f(a) + f(b);
            for i in 1..panels {
                let x = a + h * i as f64;
                s += if i % 2 == 0 { 2.0 } else { 4.0 } * f(x);
            }
            s * h / 3.0
        };
        let density = |x: f64| params.log_surface_density(x).unwrap().exp();
        let mass = simpson(&density, -4.0, 4.0, 10_000);
        let envelope = 2.0f64.cosh().powi(2);
        let predicted = mass / (8.0 * envelope);

        let n = 200_000;
        let mut rng = ChaCha8Rng::seed_from_u64(331);
        let report = barbell_rejection_x(&params, n, &mut rng);
        let se = (predicted * (1.0 - predicted) / n as f64).sqrt();
        assert!(
            (report.rate() - predicted).abs() < 3.0 * se,
            "rate {} vs predicted {predicted} (se {se})",
            report.rate()
        );
    }

    #[test]
    fn barbell_histogram_shows_bell_to_bar_ratio() {
        let params = BarbellParams::new(1.0, 2.0, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(333);
        let report = barbell_rejection_x(&params, 600_000, &mut rng);
        let xs: Vec<f64> = report.samples.iter().map(|s| s[0]).collect();
        let bell = xs.iter().filter(|x| (2.9..3.1).contains(&x.abs())).count() as f64 / 0.4;
        let bar = xs.iter().filter(|x| x.abs() < 1.0).count() as f64 / 2.0;
        let ratio = bell / bar;
        // Window average of cosh^2 over [2.9, 3.1] is within 0.6% of cosh^2(1).
        assert!(
            (ratio - 2.3810978455418157).abs() / 2.3810978455418157 < 0.10,
            "ratio {ratio}"
        );
    }

    #[test]
    fn surface_points_sit_on_the_surface_with_uniform_angle() {
        let params = BarbellParams::new(1.0, 2.0, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(335);
        let report = barbell_uniform_surface(&params, 20_000, &mut rng).unwrap();
        assert_eq!(report.n_accepted, 20_000);
        let mut angles = Vec::with_capacity(report.samples.len());
        for s in &report.samples {
            let f = params.profile(s[0]);
            let radial = (s[1] * s[1] + s[2] * s[2]).sqrt();
            assert!((radial - f).abs() < 1e-12);
            angles.push(s[2].atan2(s[1]));
        }
        let ks = ks_one_sample(&angles, |a| {
            ((a + std::f64::consts::PI) / std::f64::consts::TAU).clamp(0.0, 1.0)
        })
        .unwrap();
        assert!(ks.p_value > 0.01, "angle KS p {}", ks.p_value);
    }

    #[test]
    fn surface_bar_fraction_matches_quadrature() {
        let params = BarbellParams::new(1.0, 2.0, 4.0).unwrap();
        // Analytic areas: bar marginal is r over |x| < l; bells are r cosh^2.
        let simpson = |f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize| -> f64 {
            let h = (b - a) / panels as f64;
            let mut s = f(a) + f(b);
            for i in 1..panels {
                let x = a + h * i as f64;
                s += if i % 2 == 0 { 2.0 } else { 4.0 } * f(x);
            }
            s * h / 3.0
        };
        let density = |x: f64| params.log_surface_density(x).unwrap().exp();
        let total = simpson(&density, -4.0, 4.0, 10_000);
        let bar = simpson(&density, -2.0, 2.0, 10_000);
        let expected_frac = bar / total;

        let mut rng = ChaCha8Rng::seed_from_u64(337);
        let n = 100_000;
        let report = barbell_uniform_surface(&params, n, &mut rng).unwrap();
        let on_bar = report.samples.iter().filter(|s| s[0].abs() <= 2.0).count() as f64;
        let frac = on_bar / n as f64;
        let se = (expected_frac * (1.0 - expected_frac) / n as f64).sqrt();
        assert!(
            (frac - expected_frac).abs() < 3.0 * se,
            "fraction {frac} vs {expected_frac} (se {se})"
        );
    }

    #[test]
    fn samplers_are_deterministic_per_seed() {
        let a = {
            let mut rng = ChaCha8Rng::seed_from_u64(339);
            random_symmetric(4, 1.0, &mut rng)
        };
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(97);
            acg_rejection_bingham(&a, 500, &mut rng).unwrap()
        };
        let r1 = run();
        let r2 = run();
        assert_eq!(r1.n_proposals, r2.n_proposals);
        assert_eq!(r1.samples, r2.samples);

        let params = BarbellParams::new(1.0, 2.0, 4.0).unwrap();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(98);
            barbell_uniform_surface(&params, 200, &mut rng).unwrap()
        };
        assert_eq!(run().samples, run().samples);
    }

    #[test]
    fn report_merge_accumulates_counts() {
        let params = BarbellParams::new(1.0, 2.0, 4.0).unwrap();
        let mut rng1 = ChaCha8Rng::seed_from_u64(341);
        let mut rng2 = ChaCha8Rng::seed_from_u64(342);
        let a = barbell_rejection_x(&params, 1_000, &mut rng1);
        let b = barbell_rejection_x(&params, 2_000, &mut rng2);
        let (na, nb) = (a.n_accepted, b.n_accepted);
        let merged = a.merge(b);
        assert_eq!(merged.n_proposals, 3_000);
        assert_eq!(merged.n_accepted, na + nb);
        assert_eq!(merged.samples.len(), merged.n_accepted);
    }
}
