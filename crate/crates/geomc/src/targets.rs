//! Target distributions expressed in the ambient coordinates of their manifold.
//!
//! A [`Target`] exposes an unnormalized log-density and its ambient-space
//! gradient; samplers project that gradient onto the tangent space themselves.
//! Constrained domains (simplex, ball) are handled by pulling the density back
//! to a sphere with the appropriate change-of-measure factor, so every target
//! ultimately lives on a sphere or a Stiefel manifold.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4};
use serde::{Deserialize, Serialize};

use crate::manifold::{ManifoldKind, ManifoldSpec};
use crate::{GmcError, Result};

/// An unnormalized density on a manifold.
///
/// `log_density` may return `-inf` to mark zero-density points; samplers treat
/// such proposals as automatic rejections. `grad_log_density` returns the
/// gradient with respect to the ambient coordinates (not yet projected).
pub trait Target: Sync {
    fn manifold(&self) -> &ManifoldSpec;
    fn log_density(&self, q: &DVector<f64>) -> f64;
    fn grad_log_density(&self, q: &DVector<f64>) -> DVector<f64>;
}

// ---------------------------------------------------------------------------
// Fisher-Bingham family
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct FisherBinghamJson {
    c: Vec<f64>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
}

/// Parameters of the Fisher-Bingham density exp(c.x + x^T A x) on a sphere.
///
/// `A` must be symmetric. `c = 0` gives the Bingham density, `A = 0` the
/// von Mises-Fisher density. Adding a multiple of the identity to `A` shifts
/// the log-density by a constant and leaves the distribution unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FisherBinghamJson", into = "FisherBinghamJson")]
pub struct FisherBinghamParams {
    c: DVector<f64>,
    a: DMatrix<f64>,
}

impl FisherBinghamParams {
    pub fn new(c: DVector<f64>, a: DMatrix<f64>) -> Result<Self> {
        let d = c.len();
        if d < 2 {
            return Err(GmcError::InvalidParameter(
                "Fisher-Bingham needs ambient dimension >= 2".to_string(),
            ));
        }
        if a.nrows() != d || a.ncols() != d {
            return Err(GmcError::DimensionMismatch(format!(
                "linear term has {} entries but quadratic term is {}x{}",
                d,
                a.nrows(),
                a.ncols()
            )));
        }
        let asym = (&a - a.transpose()).amax();
        if asym > 1e-10 * a.amax().max(1.0) {
            return Err(GmcError::InvalidParameter(format!(
                "quadratic term must be symmetric (asymmetry {asym:.3e})"
            )));
        }
        if c.iter().any(|x| !x.is_finite()) || a.iter().any(|x| !x.is_finite()) {
            return Err(GmcError::InvalidParameter(
                "Fisher-Bingham parameters must be finite".to_string(),
            ));
        }
        Ok(Self { c, a })
    }

    /// Pure Bingham density: no linear term.
    pub fn bingham(a: DMatrix<f64>) -> Result<Self> {
        let d = a.nrows();
        Self::new(DVector::zeros(d), a)
    }

    /// Pure von Mises-Fisher density: no quadratic term.
    pub fn von_mises_fisher(c: DVector<f64>) -> Result<Self> {
        let d = c.len();
        Self::new(c, DMatrix::zeros(d, d))
    }

    /// Ambient dimension of the sphere this density lives on.
    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn quadratic(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn log_density(&self, x: &DVector<f64>) -> f64 {
        self.c.dot(x) + (x.transpose() * &self.a * x)[(0, 0)]
    }

    pub fn grad_log_density(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.c + (&self.a * x) * 2.0
    }
}

impl TryFrom<FisherBinghamJson> for FisherBinghamParams {
    type Error = GmcError;

    fn try_from(j: FisherBinghamJson) -> Result<Self> {
        let d = j.c.len();
        if j.a.len() != d || j.a.iter().any(|row| row.len() != d) {
            return Err(GmcError::DimensionMismatch(format!(
                "quadratic term rows must form a {d}x{d} matrix"
            )));
        }
        let flat: Vec<f64> = j.a.iter().flatten().copied().collect();
        Self::new(DVector::from_vec(j.c), DMatrix::from_row_slice(d, d, &flat))
    }
}

impl From<FisherBinghamParams> for FisherBinghamJson {
    fn from(p: FisherBinghamParams) -> Self {
        let d = p.dim();
        let a = (0..d)
            .map(|i| (0..d).map(|j| p.a[(i, j)]).collect())
            .collect();
        Self { c: p.c.iter().copied().collect(), a }
    }
}

/// Fisher-Bingham density attached to a spherical manifold (plain sphere or
/// the quaternion sphere used for rotations).
#[derive(Debug, Clone)]
pub struct FisherBinghamTarget {
    manifold: ManifoldSpec,
    params: FisherBinghamParams,
}

impl FisherBinghamTarget {
    pub fn new(manifold: ManifoldSpec, params: FisherBinghamParams) -> Result<Self> {
        match manifold.kind() {
            ManifoldKind::Sphere { .. } | ManifoldKind::So3 => {}
            other => {
                return Err(GmcError::Unsupported {
                    manifold: format!("{other:?}"),
                    detail: "Fisher-Bingham densities live on spheres".to_string(),
                })
            }
        }
        if manifold.ambient_dim() != params.dim() {
            return Err(GmcError::DimensionMismatch(format!(
                "manifold has {} ambient coordinates, parameters have {}",
                manifold.ambient_dim(),
                params.dim()
            )));
        }
        Ok(Self { manifold, params })
    }

    /// Place the density on the sphere of matching dimension.
    pub fn on_sphere(params: FisherBinghamParams) -> Result<Self> {
        let m = ManifoldSpec::sphere(params.dim() - 1)?;
        Self::new(m, params)
    }

    pub fn params(&self) -> &FisherBinghamParams {
        &self.params
    }
}

impl Target for FisherBinghamTarget {
    fn manifold(&self) -> &ManifoldSpec {
        &self.manifold
    }

    fn log_density(&self, q: &DVector<f64>) -> f64 {
        self.params.log_density(q)
    }

    fn grad_log_density(&self, q: &DVector<f64>) -> DVector<f64> {
        self.params.grad_log_density(q)
    }
}

/// Moment-matched Gaussian for a Fisher-Bingham density: the unconstrained
/// normal whose restriction to the unit sphere reproduces exp(c.x + x^T A x).
#[derive(Debug, Clone)]
pub struct GaussianEquivalent {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    /// Identity shift applied to the quadratic term; the root of
    /// trace(sigma) = 1 over shifts below -lambda_max(A).
    pub shift: f64,
}

/// Compute the Gaussian whose sphere restriction matches the given
/// Fisher-Bingham density: sigma = -1/2 (A + aI)^{-1}, mu = sigma c, with the
/// shift `a` chosen so that trace(sigma) = 1.
///
/// trace(sigma) is strictly increasing in `a` on (-inf, -lambda_max), rising
/// from 0 to +inf, so bisection on a bracketing interval always converges.
pub fn gaussian_equivalent(params: &FisherBinghamParams) -> Result<GaussianEquivalent> {
    let d = params.dim();
    let eig = params.quadratic().clone().symmetric_eigen();
    let lambda_max = eig.eigenvalues.max();

    let trace_sigma = |a: f64| -> f64 {
        eig.eigenvalues.iter().map(|&l| -1.0 / (2.0 * (l + a))).sum()
    };

    // f(lo) <= 1/2 < 1 and f(hi) >= d + 1 > 1 by construction.
    let mut lo = -lambda_max - d as f64;
    let mut hi = -lambda_max - 1.0 / (2.0 * (d as f64 + 1.0));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if trace_sigma(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = 0.5 * (lo + hi);
    if !trace_sigma(a).is_finite() {
        return Err(GmcError::Numeric(
            "trace equation for the Gaussian equivalent failed to converge".to_string(),
        ));
    }

    let mut scaled = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        scaled[(i, i)] = -1.0 / (2.0 * (eig.eigenvalues[i] + a));
    }
    let sigma = &eig.eigenvectors * scaled * eig.eigenvectors.transpose();
    let mu = &sigma * params.linear();
    Ok(GaussianEquivalent { mu, sigma, shift: a })
}

// ---------------------------------------------------------------------------
// Dirichlet pulled back to the sphere
// ---------------------------------------------------------------------------

/// Dirichlet concentration parameters; all entries must be positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DirichletJson", into = "DirichletJson")]
pub struct DirichletParams {
    alpha: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DirichletJson {
    alpha: Vec<f64>,
}

impl DirichletParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(GmcError::InvalidParameter(
                "Dirichlet needs at least 2 components".to_string(),
            ));
        }
        if alpha.iter().any(|&a| !a.is_finite() || a <= 0.0) {
            return Err(GmcError::InvalidParameter(
                "Dirichlet concentrations must be positive and finite".to_string(),
            ));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }
}

impl TryFrom<DirichletJson> for DirichletParams {
    type Error = GmcError;

    fn try_from(j: DirichletJson) -> Result<Self> {
        Self::new(j.alpha)
    }
}

impl From<DirichletParams> for DirichletJson {
    fn from(p: DirichletParams) -> Self {
        Self { alpha: p.alpha }
    }
}

/// Dirichlet density transported to the sphere through x_i = q_i^2.
///
/// Up to a constant the pullback is sum_i (2 alpha_i - 1) log |q_i|, which is
/// smooth away from the coordinate hyperplanes. Points with a coordinate
/// exactly zero are reported as zero density (-inf) regardless of alpha;
/// samplers then reject them, which is measure-preserving.
#[derive(Debug, Clone)]
pub struct DirichletSphereTarget {
    manifold: ManifoldSpec,
    params: DirichletParams,
}

impl DirichletSphereTarget {
    pub fn new(params: DirichletParams) -> Result<Self> {
        let manifold = ManifoldSpec::simplex_via_sphere(params.alpha.len() - 1)?;
        Ok(Self { manifold, params })
    }

    pub fn params(&self) -> &DirichletParams {
        &self.params
    }
}

impl Target for DirichletSphereTarget {
    fn manifold(&self) -> &ManifoldSpec {
        &self.manifold
    }

    fn log_density(&self, q: &DVector<f64>) -> f64 {
        let mut total = 0.0;
        for (qi, &ai) in q.iter().zip(&self.params.alpha) {
            if *qi == 0.0 {
                return f64::NEG_INFINITY;
            }
            total += (2.0 * ai - 1.0) * qi.abs().ln();
        }
        total
    }

    fn grad_log_density(&self, q: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            q.len(),
            q.iter()
                .zip(&self.params.alpha)
                .map(|(&qi, &ai)| (2.0 * ai - 1.0) / qi),
        )
    }
}

// ---------------------------------------------------------------------------
// Uniform target
// ---------------------------------------------------------------------------

/// The flat density on any manifold: log-density 0 everywhere.
#[derive(Debug, Clone)]
pub struct UniformTarget {
    manifold: ManifoldSpec,
}

impl UniformTarget {
    pub fn new(manifold: ManifoldSpec) -> Self {
        Self { manifold }
    }
}

impl Target for UniformTarget {
    fn manifold(&self) -> &ManifoldSpec {
        &self.manifold
    }

    fn log_density(&self, _q: &DVector<f64>) -> f64 {
        0.0
    }

    fn grad_log_density(&self, q: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(q.len())
    }
}

// ---------------------------------------------------------------------------
// Densities on the unit ball, lifted to the sphere
// ---------------------------------------------------------------------------

/// An unnormalized density on the open unit ball B^dim.
pub trait BallDensity: Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, theta: &DVector<f64>) -> f64;
    fn grad_log_density(&self, theta: &DVector<f64>) -> DVector<f64>;
}

/// The flat density on the ball. Its spherical lift carries the hemisphere
/// weight alone, so the radial coordinate of draws follows the r^dim law.
#[derive(Debug, Clone)]
pub struct UniformBallDensity {
    dim: usize,
}

impl UniformBallDensity {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl BallDensity for UniformBallDensity {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, _theta: &DVector<f64>) -> f64 {
        0.0
    }

    fn grad_log_density(&self, theta: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(theta.len())
    }
}

/// A ball density lifted onto the covering sphere.
///
/// Flat measure d theta on the ball corresponds to d sigma * |last coordinate|
/// on the sphere, so the lifted log-density is the ball value at the first
/// `dim` coordinates plus log |q_{dim+1}|. The equator (last coordinate zero)
/// maps to the ball boundary and has zero density.
#[derive(Debug, Clone)]
pub struct LiftedBallTarget<B> {
    manifold: ManifoldSpec,
    density: B,
}

impl<B: BallDensity> LiftedBallTarget<B> {
    pub fn new(density: B) -> Result<Self> {
        let manifold = ManifoldSpec::ball_via_sphere(density.dim())?;
        Ok(Self { manifold, density })
    }

    pub fn ball_density(&self) -> &B {
        &self.density
    }
}

impl<B: BallDensity> Target for LiftedBallTarget<B> {
    fn manifold(&self) -> &ManifoldSpec {
        &self.manifold
    }

    fn log_density(&self, q: &DVector<f64>) -> f64 {
        let d = q.len() - 1;
        let last = q[d];
        if last == 0.0 {
            return f64::NEG_INFINITY;
        }
        let theta = q.rows(0, d).into_owned();
        self.density.log_density(&theta) + last.abs().ln()
    }

    fn grad_log_density(&self, q: &DVector<f64>) -> DVector<f64> {
        let d = q.len() - 1;
        let theta = q.rows(0, d).into_owned();
        let g_ball = self.density.grad_log_density(&theta);
        let mut g = DVector::zeros(d + 1);
        g.rows_mut(0, d).copy_from(&g_ball);
        g[d] = 1.0 / q[d];
        g
    }
}

// ---------------------------------------------------------------------------
// Barbell surface of revolution
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct BarbellJson {
    r: f64,
    l: f64,
    #[serde(rename = "L")]
    half_width: f64,
}

/// A cylinder of radius `r` for |x| <= l that flares out as a catenary
/// r cosh((|x| - l)/r) until |x| = L. Rotating the profile about the x axis
/// gives the barbell surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BarbellJson", into = "BarbellJson")]
pub struct BarbellParams {
    r: f64,
    l: f64,
    half_width: f64,
}

impl BarbellParams {
    pub fn new(r: f64, l: f64, half_width: f64) -> Result<Self> {
        if r <= 0.0 || !r.is_finite() {
            return Err(GmcError::InvalidParameter(
                "barbell radius must be positive".to_string(),
            ));
        }
        if !(0.0 < l && l < half_width) || !half_width.is_finite() {
            return Err(GmcError::InvalidParameter(format!(
                "barbell needs 0 < l < L, got l = {l}, L = {half_width}"
            )));
        }
        Ok(Self { r, l, half_width })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Half-length of the cylindrical bar.
    pub fn bar_half_length(&self) -> f64 {
        self.l
    }

    /// Half-width of the full surface along the axis.
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Radius of the surface at axial position `x`.
    pub fn profile(&self, x: f64) -> f64 {
        let ax = x.abs();
        if ax <= self.l {
            self.r
        } else {
            self.r * ((ax - self.l) / self.r).cosh()
        }
    }

    /// Log of the unnormalized axial marginal of the uniform surface measure.
    ///
    /// Constant r on the bar; r cosh^2((|x| - l)/r) on the bells, because the
    /// area element of a revolved profile f is f sqrt(1 + f'^2) and the
    /// catenary satisfies sqrt(1 + f'^2) = cosh.
    pub fn log_surface_density(&self, x: f64) -> Result<f64> {
        let ax = x.abs();
        if !ax.is_finite() || ax > self.half_width + 1e-12 {
            return Err(GmcError::Domain(format!(
                "axial position {x} outside [-{0}, {0}]",
                self.half_width
            )));
        }
        if ax <= self.l {
            Ok(self.r.ln())
        } else {
            let u = (ax - self.l) / self.r;
            Ok(self.r.ln() + 2.0 * u.cosh().ln())
        }
    }

    /// Embed an axial position and revolution angle as a surface point.
    pub fn embed(&self, x: f64, phi: f64) -> Result<[f64; 3]> {
        if x.abs() > self.half_width + 1e-12 {
            return Err(GmcError::Domain(format!(
                "axial position {x} outside [-{0}, {0}]",
                self.half_width
            )));
        }
        let f = self.profile(x);
        Ok([x, f * phi.cos(), f * phi.sin()])
    }
}

impl TryFrom<BarbellJson> for BarbellParams {
    type Error = GmcError;

    fn try_from(j: BarbellJson) -> Result<Self> {
        Self::new(j.r, j.l, j.half_width)
    }
}

impl From<BarbellParams> for BarbellJson {
    fn from(p: BarbellParams) -> Self {
        Self { r: p.r, l: p.l, half_width: p.half_width }
    }
}

// ---------------------------------------------------------------------------
// Matrix Fisher densities on rotations
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct MatrixFisherJson {
    #[serde(rename = "F")]
    f: Vec<Vec<f64>>,
}

/// Concentration matrix of the matrix Fisher density exp(trace(F^T R)) on
/// rotation matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixFisherJson", into = "MatrixFisherJson")]
pub struct MatrixFisherParams {
    f: Matrix3<f64>,
}

impl MatrixFisherParams {
    pub fn new(f: Matrix3<f64>) -> Result<Self> {
        if f.iter().any(|x| !x.is_finite()) {
            return Err(GmcError::InvalidParameter(
                "matrix Fisher concentration must be finite".to_string(),
            ));
        }
        Ok(Self { f })
    }

    pub fn concentration(&self) -> &Matrix3<f64> {
        &self.f
    }

    /// The Bingham density on unit quaternions equivalent to this matrix
    /// Fisher density on rotations.
    pub fn to_bingham(&self) -> FisherBinghamParams {
        let a4 = matrix_fisher_to_bingham(&self.f);
        let mut a = DMatrix::<f64>::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                a[(i, j)] = a4[(i, j)];
            }
        }
        FisherBinghamParams::bingham(a).expect("4x4 symmetric matrix")
    }

    /// The quaternion-sphere target realizing this density.
    pub fn to_target(&self) -> FisherBinghamTarget {
        FisherBinghamTarget::new(ManifoldSpec::so3(), self.to_bingham())
            .expect("quaternion parameters always fit So3")
    }
}

impl TryFrom<MatrixFisherJson> for MatrixFisherParams {
    type Error = GmcError;

    fn try_from(j: MatrixFisherJson) -> Result<Self> {
        if j.f.len() != 3 || j.f.iter().any(|row| row.len() != 3) {
            return Err(GmcError::DimensionMismatch(
                "matrix Fisher concentration must be 3x3".to_string(),
            ));
        }
        let flat: Vec<f64> = j.f.iter().flatten().copied().collect();
        Self::new(Matrix3::from_row_slice(&flat))
    }
}

impl From<MatrixFisherParams> for MatrixFisherJson {
    fn from(p: MatrixFisherParams) -> Self {
        let f = (0..3)
            .map(|i| (0..3).map(|j| p.f[(i, j)]).collect())
            .collect();
        Self { f }
    }
}

/// Rotation matrix of a unit quaternion (w, x, y, z).
///
/// The convention matches [`matrix_fisher_to_bingham`]: both quaternion signs
/// produce the same rotation.
pub fn quaternion_to_rotation(q: &DVector<f64>) -> Result<Matrix3<f64>> {
    if q.len() != 4 {
        return Err(GmcError::DimensionMismatch(format!(
            "quaternion needs 4 components, got {}",
            q.len()
        )));
    }
    if (q.norm() - 1.0).abs() > 1e-8 {
        return Err(GmcError::InvalidPoint {
            manifold: "So3".to_string(),
            detail: format!("quaternion norm {:.6} is not 1", q.norm()),
        });
    }
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    Ok(Matrix3::new(
        w * w + x * x - y * y - z * z,
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        w * w - x * x + y * y - z * z,
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        w * w - x * x - y * y + z * z,
    ))
}

/// Symmetric 4x4 matrix A with trace(F^T R(q)) = q^T A q for all unit
/// quaternions q.
///
/// Expanding the rotation matrix entries as quadratic forms in (w, x, y, z)
/// and collecting terms gives the closed form below; the identity holds
/// exactly, which the tests verify against direct evaluation.
pub fn matrix_fisher_to_bingham(f: &Matrix3<f64>) -> Matrix4<f64> {
    let t = f.trace();
    let d0 = t;
    let d1 = f[(0, 0)] - f[(1, 1)] - f[(2, 2)];
    let d2 = -f[(0, 0)] + f[(1, 1)] - f[(2, 2)];
    let d3 = -f[(0, 0)] - f[(1, 1)] + f[(2, 2)];
    let a01 = f[(2, 1)] - f[(1, 2)];
    let a02 = f[(0, 2)] - f[(2, 0)];
    let a03 = f[(1, 0)] - f[(0, 1)];
    let a12 = f[(0, 1)] + f[(1, 0)];
    let a13 = f[(0, 2)] + f[(2, 0)];
    let a23 = f[(1, 2)] + f[(2, 1)];
    Matrix4::new(
        d0, a01, a02, a03, //
        a01, d1, a12, a13, //
        a02, a12, d2, a23, //
        a03, a13, a23, d3,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::ball_to_sphere;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_unit(d: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let mut q: DVector<f64> = DVector::from_fn(d, |_, _| rng.sample(StandardNormal));
        q /= q.norm();
        q
    }

    fn random_symmetric(d: usize, scale: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let g = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal) * scale);
        (&g + g.transpose()) * 0.5
    }

    /// Central finite differences of a scalar function of ambient coordinates.
    fn fd_grad<F: Fn(&DVector<f64>) -> f64>(f: F, x: &DVector<f64>, h: f64) -> DVector<f64> {
        DVector::from_fn(x.len(), |i, _| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            (f(&xp) - f(&xm)) / (2.0 * h)
        })
    }

    #[test]
    fn fisher_bingham_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let d = 5;
        let params = FisherBinghamParams::new(
            DVector::from_fn(d, |_, _| rng.sample(StandardNormal)),
            random_symmetric(d, 1.5, &mut rng),
        )
        .unwrap();
        for _ in 0..20 {
            let x = random_unit(d, &mut rng);
            let g = params.grad_log_density(&x);
            let fd = fd_grad(|y| params.log_density(y), &x, 1e-5);
            assert!((g - fd).amax() < 1e-8);
        }
    }

    #[test]
    fn identity_shift_changes_log_density_by_constant_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        let d = 4;
        let a = random_symmetric(d, 1.0, &mut rng);
        let c = DVector::from_fn(d, |_, _| rng.sample(StandardNormal));
        let shifted = &a + DMatrix::identity(d, d) * 3.0;
        let p0 = FisherBinghamParams::new(c.clone(), a).unwrap();
        let p1 = FisherBinghamParams::new(c, shifted).unwrap();
        let m = ManifoldSpec::sphere(d - 1).unwrap();
        for _ in 0..10 {
            let x = random_unit(d, &mut rng);
            assert_relative_eq!(
                p1.log_density(&x) - p0.log_density(&x),
                3.0,
                epsilon = 1e-12
            );
            // Tangentially the gradients agree: the shift only adds a radial term.
            let g0 = m.project_to_tangent(&x, &p0.grad_log_density(&x)).unwrap();
            let g1 = m.project_to_tangent(&x, &p1.grad_log_density(&x)).unwrap();
            assert!((g0 - g1).amax() < 1e-12);
        }
    }

    #[test]
    fn diagonal_bingham_log_density_is_weighted_square_sum() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, -1.0, 0.5]));
        let p = FisherBinghamParams::bingham(a).unwrap();
        let x = DVector::from_vec(vec![0.6, 0.8, 0.0]);
        assert_relative_eq!(
            p.log_density(&x),
            2.0 * 0.36 - 0.64,
            epsilon = 1e-14
        );
    }

    #[test]
    fn asymmetric_quadratic_term_is_rejected() {
        let mut a = DMatrix::zeros(3, 3);
        a[(0, 1)] = 1.0;
        assert!(FisherBinghamParams::bingham(a).is_err());
    }

    #[test]
    fn params_serde_roundtrip() {
        let p = FisherBinghamParams::new(
            DVector::from_vec(vec![1.0, 2.0, 3.0]),
            DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 0.5, -1.0, 0.25, 0.0, 0.25, 0.0]),
        )
        .unwrap();
        let text = serde_json::to_string(&p).unwrap();
        assert!(text.contains("\"A\""));
        let back: FisherBinghamParams = serde_json::from_str(&text).unwrap();
        assert_eq!(p, back);

        let bad = r#"{"c":[1.0,0.0],"A":[[0.0,1.0],[0.0,0.0]]}"#;
        assert!(serde_json::from_str::<FisherBinghamParams>(bad).is_err());

        let barbell = BarbellParams::new(1.0, 2.0, 4.0).unwrap();
        let text = serde_json::to_string(&barbell).unwrap();
        assert!(text.contains("\"L\""));
        let back: BarbellParams = serde_json::from_str(&text).unwrap();
        assert_eq!(barbell, back);
    }

    #[test]
    fn gaussian_equivalent_recovers_isotropic_case() {
        let d = 5;
        let c = DVector::from_vec(vec![1.0, -2.0, 0.5, 0.0, 3.0]);
        let p = FisherBinghamParams::new(c.clone(), DMatrix::zeros(d, d)).unwrap();
        let g = gaussian_equivalent(&p).unwrap();
        // With A = 0 the trace equation gives shift -d/2, sigma = I/d, mu = c/d.
        assert_relative_eq!(g.shift, -2.5, epsilon = 1e-10);
        assert!((g.sigma.clone() - DMatrix::identity(d, d) * 0.2).amax() < 1e-10);
        assert!((g.mu - c / 5.0).amax() < 1e-10);
    }

    #[test]
    fn gaussian_equivalent_satisfies_defining_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(107);
        for _ in 0..10 {
            let d = 4;
            let a = random_symmetric(d, 2.0, &mut rng);
            let c = DVector::from_fn(d, |_, _| rng.sample(StandardNormal));
            let p = FisherBinghamParams::new(c.clone(), a.clone()).unwrap();
            let g = gaussian_equivalent(&p).unwrap();
            assert_relative_eq!(g.sigma.trace(), 1.0, epsilon = 1e-10);
            // sigma solves (A + aI) sigma = -1/2 I.
            let lhs = (&a + DMatrix::identity(d, d) * g.shift) * &g.sigma;
            assert!((lhs + DMatrix::identity(d, d) * 0.5).amax() < 1e-9);
            assert!((&g.sigma * &c - &g.mu).amax() < 1e-10);
            assert!(g.sigma.clone().cholesky().is_some(), "sigma must be positive definite");
        }
    }

    #[test]
    fn dirichlet_matches_transformed_density_up_to_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(109);
        let params = DirichletParams::new(vec![2.5, 0.7, 1.0, 3.0]).unwrap();
        let target = DirichletSphereTarget::new(params.clone()).unwrap();
        let reference = |q: &DVector<f64>| {
            // Dirichlet kernel in simplex coordinates plus the change of measure.
            let (x, lj) = crate::manifold::sphere_to_simplex(q);
            let kernel: f64 = x
                .iter()
                .zip(params.alpha())
                .map(|(&xi, &ai)| (ai - 1.0) * xi.ln())
                .sum();
            kernel + lj
        };
        let q0 = random_unit(4, &mut rng);
        let base = target.log_density(&q0) - reference(&q0);
        for _ in 0..10 {
            let q = random_unit(4, &mut rng);
            assert_relative_eq!(target.log_density(&q) - reference(&q), base, epsilon = 1e-10);
        }
    }

    #[test]
    fn dirichlet_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(113);
        let target = DirichletSphereTarget::new(DirichletParams::new(vec![2.0, 1.5, 0.8]).unwrap())
            .unwrap();
        for _ in 0..20 {
            let mut q = random_unit(3, &mut rng);
            while q.iter().any(|c| c.abs() < 0.1) {
                q = random_unit(3, &mut rng);
            }
            let g = target.grad_log_density(&q);
            let fd = fd_grad(|y| target.log_density(y), &q, 1e-6);
            assert!((g - fd).amax() < 1e-6);
        }
    }

    #[test]
    fn dirichlet_zero_coordinate_has_zero_density() {
        let target =
            DirichletSphereTarget::new(DirichletParams::new(vec![0.3, 0.3, 2.0]).unwrap()).unwrap();
        let q = DVector::from_vec(vec![0.0, 0.6, 0.8]);
        assert_eq!(target.log_density(&q), f64::NEG_INFINITY);
        assert!(!target.grad_log_density(&q).iter().all(|g| g.is_finite()));
    }

    #[test]
    fn lifted_ball_density_carries_hemisphere_weight() {
        let target = LiftedBallTarget::new(UniformBallDensity::new(3)).unwrap();
        let theta = DVector::from_vec(vec![0.3, -0.1, 0.2]);
        let q = ball_to_sphere(&theta, true).unwrap();
        assert_relative_eq!(target.log_density(&q), q[3].ln(), epsilon = 1e-14);
        let q_lower = ball_to_sphere(&theta, false).unwrap();
        assert_relative_eq!(
            target.log_density(&q_lower),
            target.log_density(&q),
            epsilon = 1e-14
        );

        let mut equator = DVector::zeros(4);
        equator[0] = 1.0;
        assert_eq!(target.log_density(&equator), f64::NEG_INFINITY);
    }

    #[test]
    fn lifted_ball_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(127);
        let target = LiftedBallTarget::new(UniformBallDensity::new(3)).unwrap();
        for _ in 0..10 {
            let mut q = random_unit(4, &mut rng);
            while q[3].abs() < 0.2 {
                q = random_unit(4, &mut rng);
            }
            let g = target.grad_log_density(&q);
            let fd = fd_grad(|y| target.log_density(y), &q, 1e-6);
            assert!((g - fd).amax() < 1e-6);
        }
    }

    #[test]
    fn barbell_profile_is_continuous_with_frozen_density_ratio() {
        let p = BarbellParams::new(1.0, 2.0, 4.0).unwrap();
        assert_relative_eq!(p.profile(2.0), 1.0, epsilon = 1e-14);
        assert_relative_eq!(p.profile(2.0 + 1e-9), 1.0, epsilon = 1e-8);
        // Bell height at |x| = 3 over bar height: cosh^2(1).
        let ratio =
            (p.log_surface_density(3.0).unwrap() - p.log_surface_density(0.5).unwrap()).exp();
        assert_relative_eq!(ratio, 2.3810978455418157, epsilon = 1e-12);
        assert!(matches!(p.log_surface_density(4.5), Err(GmcError::Domain(_))));
        assert!(BarbellParams::new(1.0, 4.0, 2.0).is_err());
        assert!(BarbellParams::new(0.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn barbell_embedding_lands_on_the_surface() {
        let p = BarbellParams::new(0.5, 1.0, 3.0).unwrap();
        for (x, phi) in [(0.2, 0.3), (-2.5, 2.0), (2.9, -1.0)] {
            let [px, py, pz] = p.embed(x, phi).unwrap();
            assert_relative_eq!(px, x, epsilon = 1e-15);
            assert_relative_eq!(
                (py * py + pz * pz).sqrt(),
                p.profile(x),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn bingham_form_reproduces_matrix_fisher_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(131);
        for _ in 0..100 {
            let f = Matrix3::from_fn(|_, _| rng.sample(StandardNormal));
            let a = matrix_fisher_to_bingham(&f);
            let q = random_unit(4, &mut rng);
            let r = quaternion_to_rotation(&q).unwrap();
            let trace = (f.transpose() * r).trace();
            let quad = {
                let mut s = 0.0;
                for i in 0..4 {
                    for j in 0..4 {
                        s += q[i] * a[(i, j)] * q[j];
                    }
                }
                s
            };
            assert_relative_eq!(trace, quad, epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_concentration_gives_known_bingham_matrix() {
        let a = matrix_fisher_to_bingham(&Matrix3::identity());
        let expect = Matrix4::from_diagonal(&nalgebra::Vector4::new(3.0, -1.0, -1.0, -1.0));
        assert!((a - expect).amax() < 1e-14);
    }

    #[test]
    fn quaternion_rotation_is_orthogonal_and_sign_blind() {
        let mut rng = ChaCha8Rng::seed_from_u64(137);
        for _ in 0..20 {
            let q = random_unit(4, &mut rng);
            let r = quaternion_to_rotation(&q).unwrap();
            assert!((r.transpose() * r - Matrix3::identity()).amax() < 1e-12);
            assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-12);
            let r_neg = quaternion_to_rotation(&(-&q)).unwrap();
            assert!((r - r_neg).amax() < 1e-14);
        }
        let not_unit = DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0]);
        assert!(quaternion_to_rotation(&not_unit).is_err());
    }

    #[test]
    fn matrix_fisher_target_dimensions_line_up() {
        let params = MatrixFisherParams::new(Matrix3::identity()).unwrap();
        let target = params.to_target();
        assert_eq!(target.manifold().ambient_dim(), 4);
        let text = serde_json::to_string(&params).unwrap();
        assert!(text.contains("\"F\""));
        let back: MatrixFisherParams = serde_json::from_str(&text).unwrap();
        assert_eq!(params, back);
    }

    #[test]
    fn target_constructor_rejects_mismatches() {
        let p = FisherBinghamParams::von_mises_fisher(DVector::from_vec(vec![1.0, 0.0, 0.0]))
            .unwrap();
        assert!(FisherBinghamTarget::new(ManifoldSpec::sphere(3).unwrap(), p.clone()).is_err());
        assert!(FisherBinghamTarget::new(ManifoldSpec::stiefel(1, 3).unwrap(), p).is_err());
    }
}
