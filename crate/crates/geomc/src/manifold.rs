//! Embedded manifolds with exact geodesic flow.
//!
//! Every manifold here lives in ambient Euclidean coordinates and carries the
//! metric induced from the embedding. Points and velocities are plain
//! `DVector<f64>` of length `ambient_dim`; Stiefel matrices are stored
//! column-major. Geodesics are available in closed form for each kind, and
//! [`ManifoldSpec::integrate_geodesic_ode`] provides an independent Runge-Kutta
//! reference integrator used to validate them.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{GmcError, Result};

/// Constraint tolerance applied when validating externally supplied points.
pub const POINT_TOL: f64 = 1e-8;

/// Supported manifold kinds.
///
/// `dim` is always the intrinsic dimension of the object named by the variant:
/// `Sphere { dim: 2 }` is the ordinary sphere in R^3, `BallViaSphere { dim: 3 }`
/// is the open unit ball in R^3 handled through its spherical lift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManifoldKind {
    /// Unit sphere S^dim embedded in R^{dim+1}.
    Sphere { dim: usize },
    /// Orthonormal k-frames in R^p (k columns of length p), stored column-major.
    Stiefel { k: usize, p: usize },
    /// Rotations represented as unit quaternions on S^3. The double cover is
    /// deliberate: antipodal quaternions encode the same rotation and are never
    /// canonicalized.
    So3,
    /// Open probability simplex of dimension `dim` via the square map
    /// x_i = q_i^2 on S^dim.
    SimplexViaSphere { dim: usize },
    /// Open unit ball B^dim via the hemisphere lift onto S^dim.
    BallViaSphere { dim: usize },
}

/// A validated manifold descriptor. All geometric operations hang off this type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ManifoldSpec {
    kind: ManifoldKind,
}

/// A point together with a tangent vector at that point.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub q: DVector<f64>,
    pub v: DVector<f64>,
}

/// A geodesic sampled at a list of times.
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
}

impl ManifoldSpec {
    pub fn new(kind: ManifoldKind) -> Result<Self> {
        match kind {
            ManifoldKind::Sphere { dim }
            | ManifoldKind::SimplexViaSphere { dim }
            | ManifoldKind::BallViaSphere { dim } => {
                if dim == 0 {
                    return Err(GmcError::InvalidParameter(format!(
                        "{kind:?} requires dim >= 1"
                    )));
                }
            }
            ManifoldKind::Stiefel { k, p } => {
                if k == 0 || p == 0 || k > p {
                    return Err(GmcError::InvalidParameter(format!(
                        "Stiefel requires 1 <= k <= p, got k = {k}, p = {p}"
                    )));
                }
            }
            ManifoldKind::So3 => {}
        }
        Ok(Self { kind })
    }

    pub fn sphere(dim: usize) -> Result<Self> {
        Self::new(ManifoldKind::Sphere { dim })
    }

    pub fn stiefel(k: usize, p: usize) -> Result<Self> {
        Self::new(ManifoldKind::Stiefel { k, p })
    }

    pub fn so3() -> Self {
        Self { kind: ManifoldKind::So3 }
    }

    pub fn simplex_via_sphere(dim: usize) -> Result<Self> {
        Self::new(ManifoldKind::SimplexViaSphere { dim })
    }

    pub fn ball_via_sphere(dim: usize) -> Result<Self> {
        Self::new(ManifoldKind::BallViaSphere { dim })
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    /// Number of ambient coordinates a point carries.
    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Sphere { dim }
            | ManifoldKind::SimplexViaSphere { dim }
            | ManifoldKind::BallViaSphere { dim } => dim + 1,
            ManifoldKind::Stiefel { k, p } => k * p,
            ManifoldKind::So3 => 4,
        }
    }

    /// Dimension of the manifold itself (= tangent space dimension).
    pub fn intrinsic_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Sphere { dim }
            | ManifoldKind::SimplexViaSphere { dim }
            | ManifoldKind::BallViaSphere { dim } => dim,
            ManifoldKind::Stiefel { k, p } => k * p - k * (k + 1) / 2,
            ManifoldKind::So3 => 3,
        }
    }

    pub fn name(&self) -> String {
        match self.kind {
            ManifoldKind::Sphere { dim } => format!("Sphere({dim})"),
            ManifoldKind::Stiefel { k, p } => format!("Stiefel({k},{p})"),
            ManifoldKind::So3 => "So3".to_string(),
            ManifoldKind::SimplexViaSphere { dim } => format!("SimplexViaSphere({dim})"),
            ManifoldKind::BallViaSphere { dim } => format!("BallViaSphere({dim})"),
        }
    }

    /// All kinds except Stiefel share the unit-sphere constraint and geodesics.
    fn is_spherical(&self) -> bool {
        !matches!(self.kind, ManifoldKind::Stiefel { .. })
    }

    fn stiefel_shape(&self) -> (usize, usize) {
        match self.kind {
            ManifoldKind::Stiefel { k, p } => (k, p),
            _ => unreachable!("stiefel_shape called on {:?}", self.kind),
        }
    }

    /// Worst-case violation of the defining constraint at `q`.
    ///
    /// For spherical kinds this is |1 - ||q|||; for Stiefel it is the largest
    /// entry of |Q^T Q - I|.
    pub fn constraint_error(&self, q: &DVector<f64>) -> f64 {
        if q.len() != self.ambient_dim() {
            return f64::INFINITY;
        }
        if self.is_spherical() {
            (q.norm() - 1.0).abs()
        } else {
            let (k, p) = self.stiefel_shape();
            let m = DMatrix::from_column_slice(p, k, q.as_slice());
            let mut gram = m.transpose() * &m;
            for i in 0..k {
                gram[(i, i)] -= 1.0;
            }
            gram.amax()
        }
    }

    pub fn check_point(&self, q: &DVector<f64>) -> Result<()> {
        if q.len() != self.ambient_dim() {
            return Err(GmcError::InvalidPoint {
                manifold: self.name(),
                detail: format!(
                    "expected {} coordinates, got {}",
                    self.ambient_dim(),
                    q.len()
                ),
            });
        }
        let err = self.constraint_error(q);
        if !err.is_finite() || err > POINT_TOL {
            return Err(GmcError::InvalidPoint {
                manifold: self.name(),
                detail: format!("constraint violation {err:.3e} exceeds {POINT_TOL:.0e}"),
            });
        }
        Ok(())
    }

    /// Residual of the tangency condition for `v` at `q` (point assumed valid).
    pub fn tangency_error(&self, q: &DVector<f64>, v: &DVector<f64>) -> f64 {
        if v.len() != self.ambient_dim() {
            return f64::INFINITY;
        }
        if self.is_spherical() {
            q.dot(v).abs()
        } else {
            let (k, p) = self.stiefel_shape();
            let qm = DMatrix::from_column_slice(p, k, q.as_slice());
            let vm = DMatrix::from_column_slice(p, k, v.as_slice());
            let a = qm.transpose() * &vm;
            let sym = (&a + a.transpose()) * 0.5;
            sym.amax()
        }
    }

    pub fn check_tangent(&self, q: &DVector<f64>, v: &DVector<f64>) -> Result<()> {
        self.check_point(q)?;
        let err = self.tangency_error(q, v);
        let scale = v.amax().max(1.0);
        if !err.is_finite() || err > POINT_TOL * scale {
            return Err(GmcError::InvalidTangent {
                manifold: self.name(),
                detail: format!("tangency residual {err:.3e}"),
            });
        }
        Ok(())
    }

    /// Orthogonal projection of an ambient vector onto the tangent space at `q`.
    pub fn project_to_tangent(&self, q: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_point(q)?;
        if w.len() != self.ambient_dim() {
            return Err(GmcError::DimensionMismatch(format!(
                "vector has {} entries, manifold {} expects {}",
                w.len(),
                self.name(),
                self.ambient_dim()
            )));
        }
        if self.is_spherical() {
            Ok(w - q * q.dot(w))
        } else {
            let (k, p) = self.stiefel_shape();
            let qm = DMatrix::from_column_slice(p, k, q.as_slice());
            let wm = DMatrix::from_column_slice(p, k, w.as_slice());
            let a = qm.transpose() * &wm;
            let sym = (&a + a.transpose()) * 0.5;
            let proj = wm - qm * sym;
            Ok(DVector::from_column_slice(proj.as_slice()))
        }
    }

    /// Snap a near-feasible point exactly onto the constraint set.
    ///
    /// Spherical kinds normalize; Stiefel frames take the polar factor, the
    /// closest orthonormal frame in Frobenius norm. The input must already
    /// pass [`check_point`](Self::check_point).
    pub fn project_to_manifold(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_point(q)?;
        if self.is_spherical() {
            Ok(q / q.norm())
        } else {
            let (k, p) = self.stiefel_shape();
            let qm = DMatrix::from_column_slice(p, k, q.as_slice());
            let snapped = polar_orthonormalize(&qm)?;
            Ok(DVector::from_column_slice(snapped.as_slice()))
        }
    }

    /// Exact geodesic flow for time `t` starting from `(q, v)`.
    ///
    /// `v = 0` is the identity map. Negative `t` flows backwards. The result is
    /// re-projected onto the constraint set after the closed-form update so that
    /// numerical drift cannot accumulate across many steps.
    pub fn geodesic_flow(
        &self,
        q: &DVector<f64>,
        v: &DVector<f64>,
        t: f64,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        self.check_point(q)?;
        if v.len() != self.ambient_dim() {
            return Err(GmcError::DimensionMismatch(format!(
                "velocity has {} entries, manifold {} expects {}",
                v.len(),
                self.name(),
                self.ambient_dim()
            )));
        }
        if !t.is_finite() || v.iter().any(|x| !x.is_finite()) {
            return Err(GmcError::Numeric(
                "geodesic_flow requires finite time and velocity".to_string(),
            ));
        }
        if t == 0.0 || v.iter().all(|&x| x == 0.0) {
            return Ok((q.clone(), v.clone()));
        }
        if self.is_spherical() {
            let speed = v.norm();
            let (s, c) = (speed * t).sin_cos();
            let mut q1 = q * c + v * (s / speed);
            let mut v1 = v * c - q * (speed * s);
            q1 /= q1.norm();
            let radial = q1.dot(&v1);
            v1 -= &q1 * radial;
            Ok((q1, v1))
        } else {
            self.stiefel_flow(q, v, t)
        }
    }

    /// Closed-form Stiefel geodesic for the embedding metric.
    ///
    /// With A = Q^T V (skew) and S = V^T V, the pair [Q(t), V(t)] equals
    /// [Q, V] * expm(t [[A, -S], [I, A]]) * blockdiag(expm(-tA), expm(-tA)).
    /// For k = 1 this reduces to the sphere formula.
    fn stiefel_flow(
        &self,
        q: &DVector<f64>,
        v: &DVector<f64>,
        t: f64,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        let (k, p) = self.stiefel_shape();
        let qm = DMatrix::from_column_slice(p, k, q.as_slice());
        let vm = DMatrix::from_column_slice(p, k, v.as_slice());
        let a = qm.transpose() * &vm;
        let s = vm.transpose() * &vm;

        let mut block = DMatrix::<f64>::zeros(2 * k, 2 * k);
        block.view_mut((0, 0), (k, k)).copy_from(&a);
        block.view_mut((0, k), (k, k)).copy_from(&(-&s));
        block
            .view_mut((k, 0), (k, k))
            .copy_from(&DMatrix::identity(k, k));
        block.view_mut((k, k), (k, k)).copy_from(&a);
        let big = (block * t).exp();
        let damp = (a * (-t)).exp();

        let mut joint = DMatrix::<f64>::zeros(p, 2 * k);
        joint.view_mut((0, 0), (p, k)).copy_from(&qm);
        joint.view_mut((0, k), (p, k)).copy_from(&vm);
        let moved = joint * big;
        let q1 = moved.view((0, 0), (p, k)) * &damp;
        let v1 = moved.view((0, k), (p, k)) * &damp;

        let q1 = polar_orthonormalize(&q1)?;

        let aa = q1.transpose() * &v1;
        let sym = (&aa + aa.transpose()) * 0.5;
        let v1 = v1 - &q1 * sym;

        Ok((
            DVector::from_column_slice(q1.as_slice()),
            DVector::from_column_slice(v1.as_slice()),
        ))
    }

    /// Flow a phase state, preserving the pairing through the move.
    pub fn flow_state(&self, state: &PhaseState, t: f64) -> Result<PhaseState> {
        let (q, v) = self.geodesic_flow(&state.q, &state.v, t)?;
        Ok(PhaseState { q, v })
    }

    /// Sample the geodesic through `(q, v)` at each requested time.
    pub fn geodesic_path(
        &self,
        q: &DVector<f64>,
        v: &DVector<f64>,
        times: &[f64],
    ) -> Result<GeodesicPath> {
        let mut states = Vec::with_capacity(times.len());
        for &t in times {
            let (qt, vt) = self.geodesic_flow(q, v, t)?;
            states.push(PhaseState { q: qt, v: vt });
        }
        Ok(GeodesicPath { times: times.to_vec(), states })
    }

    /// Acceleration of the geodesic equation in ambient coordinates.
    ///
    /// Spherical kinds: q'' = -q ||q'||^2. Stiefel: Q'' = -Q (Q'^T Q').
    fn geodesic_accel(&self, q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        if self.is_spherical() {
            -q * v.dot(v)
        } else {
            let (k, p) = self.stiefel_shape();
            let qm = DMatrix::from_column_slice(p, k, q.as_slice());
            let vm = DMatrix::from_column_slice(p, k, v.as_slice());
            let acc = -qm * (vm.transpose() * &vm);
            DVector::from_column_slice(acc.as_slice())
        }
    }

    /// Fixed-step Runge-Kutta 4 integration of the geodesic equation.
    ///
    /// This integrator never touches the constraint set: it is the reference
    /// solution used to validate the closed-form flow, so it must stay
    /// independent of it. Accuracy is O((t/n_steps)^4).
    pub fn integrate_geodesic_ode(
        &self,
        q: &DVector<f64>,
        v: &DVector<f64>,
        t: f64,
        n_steps: usize,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        self.check_point(q)?;
        if n_steps == 0 {
            return Err(GmcError::InvalidParameter(
                "integrate_geodesic_ode requires n_steps >= 1".to_string(),
            ));
        }
        let h = t / n_steps as f64;
        let mut qc = q.clone();
        let mut vc = v.clone();
        for _ in 0..n_steps {
            let k1q = vc.clone();
            let k1v = self.geodesic_accel(&qc, &vc);

            let q2 = &qc + &k1q * (h / 2.0);
            let v2 = &vc + &k1v * (h / 2.0);
            let k2q = v2.clone();
            let k2v = self.geodesic_accel(&q2, &v2);

            let q3 = &qc + &k2q * (h / 2.0);
            let v3 = &vc + &k2v * (h / 2.0);
            let k3q = v3.clone();
            let k3v = self.geodesic_accel(&q3, &v3);

            let q4 = &qc + &k3q * h;
            let v4 = &vc + &k3v * h;
            let k4q = v4.clone();
            let k4v = self.geodesic_accel(&q4, &v4);

            qc += (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * (h / 6.0);
            vc += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
        }
        Ok((qc, vc))
    }

    /// Draw a standard Gaussian on the tangent space at `q`: ambient standard
    /// normals followed by orthogonal projection.
    pub fn sample_tangent_gaussian<R: Rng + ?Sized>(
        &self,
        q: &DVector<f64>,
        rng: &mut R,
    ) -> Result<DVector<f64>> {
        let ambient: DVector<f64> =
            DVector::from_fn(self.ambient_dim(), |_, _| rng.sample(StandardNormal));
        self.project_to_tangent(q, &ambient)
    }

    /// `n` points along the connecting geodesic, endpoints included, equally
    /// spaced in arc length.
    pub fn geodesic_interpolate(
        &self,
        a: &DVector<f64>,
        b: &DVector<f64>,
        n: usize,
    ) -> Result<Vec<DVector<f64>>> {
        if n < 2 {
            return Err(GmcError::InvalidParameter(
                "geodesic_interpolate needs n >= 2 points".to_string(),
            ));
        }
        self.check_point(a)?;
        self.check_point(b)?;
        match self.kind {
            ManifoldKind::Stiefel { .. } => {
                let h = self.stiefel_log(a, b)?;
                let mut out = Vec::with_capacity(n);
                for i in 0..n {
                    let s = i as f64 / (n - 1) as f64;
                    let (qs, _) = self.geodesic_flow(a, &h, s)?;
                    out.push(qs);
                }
                Ok(out)
            }
            ManifoldKind::So3 => {
                // Antipodal quaternions name the same rotation: interpolate
                // along the shorter spherical arc. An orthogonal pair (rotation
                // angle pi) has two equally short arcs, so no unique choice.
                let dot = a.dot(b);
                if dot.abs() < 1e-12 {
                    return Err(GmcError::DegenerateGeodesic(
                        "rotation endpoints are a half-turn apart; geodesic is not unique"
                            .to_string(),
                    ));
                }
                let bb = if dot < 0.0 { -b } else { b.clone() };
                self.slerp_points(a, &bb, n)
            }
            _ => {
                if a.dot(b) < -1.0 + 1e-12 {
                    return Err(GmcError::DegenerateGeodesic(
                        "endpoints are antipodal; geodesic is not unique".to_string(),
                    ));
                }
                self.slerp_points(a, b, n)
            }
        }
    }

    fn slerp_points(&self, a: &DVector<f64>, b: &DVector<f64>, n: usize) -> Result<Vec<DVector<f64>>> {
        let dot = a.dot(b).clamp(-1.0, 1.0);
        let theta = dot.acos();
        let mut out = Vec::with_capacity(n);
        if theta < 1e-9 {
            for _ in 0..n {
                out.push(a.clone());
            }
            return Ok(out);
        }
        let sin_theta = theta.sin();
        for i in 0..n {
            let s = i as f64 / (n - 1) as f64;
            let mut point =
                a * (((1.0 - s) * theta).sin() / sin_theta) + b * ((s * theta).sin() / sin_theta);
            point /= point.norm();
            out.push(point);
        }
        Ok(out)
    }

    /// Initial velocity whose unit-time geodesic lands on `b`, found by shooting
    /// with the closed-form flow and a finite-difference Jacobian over an
    /// orthonormal tangent basis.
    fn stiefel_log(&self, a: &DVector<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
        let dim = self.ambient_dim();
        let basis = self.tangent_basis(a)?;
        let m = basis.len();
        let mut h = self.project_to_tangent(a, &(b - a))?;
        let fd = 1e-6;
        let mut residual = {
            let (q1, _) = self.geodesic_flow(a, &h, 1.0)?;
            q1 - b
        };
        for _ in 0..60 {
            if residual.amax() < 1e-13 {
                return Ok(h);
            }
            let mut jac = DMatrix::<f64>::zeros(dim, m);
            for (j, dir) in basis.iter().enumerate() {
                let (qp, _) = self.geodesic_flow(a, &(&h + dir * fd), 1.0)?;
                let (qm, _) = self.geodesic_flow(a, &(&h - dir * fd), 1.0)?;
                jac.set_column(j, &((qp - qm) / (2.0 * fd)));
            }
            let svd = jac.svd(true, true);
            let coeffs = svd.solve(&(-&residual), 1e-12).map_err(|e| {
                GmcError::Numeric(format!("shooting step failed: {e}"))
            })?;
            let mut direction = DVector::zeros(dim);
            for (j, dir) in basis.iter().enumerate() {
                direction += dir * coeffs[j];
            }
            // Damped update: halve the step until the residual shrinks.
            let base = residual.norm();
            let mut step = 1.0;
            let mut improved = false;
            for _ in 0..12 {
                let h_try = &h + &direction * step;
                let (q1, _) = self.geodesic_flow(a, &h_try, 1.0)?;
                let r_try = q1 - b;
                if r_try.norm() < base {
                    h = h_try;
                    residual = r_try;
                    improved = true;
                    break;
                }
                step /= 2.0;
            }
            if !improved {
                break;
            }
        }
        if residual.amax() < 1e-10 {
            Ok(h)
        } else {
            Err(GmcError::DegenerateGeodesic(format!(
                "shooting failed to connect Stiefel frames (residual {:.3e})",
                residual.amax()
            )))
        }
    }

    /// Orthonormal basis of the tangent space at `q`, built by projecting
    /// ambient coordinate directions and Gram-Schmidt sweeping.
    fn tangent_basis(&self, q: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        let dim = self.ambient_dim();
        let want = self.intrinsic_dim();
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(want);
        for i in 0..dim {
            if basis.len() == want {
                break;
            }
            let mut e = DVector::zeros(dim);
            e[i] = 1.0;
            let mut t = self.project_to_tangent(q, &e)?;
            for b in &basis {
                let c = b.dot(&t);
                t -= b * c;
            }
            let norm = t.norm();
            if norm > 1e-8 {
                basis.push(t / norm);
            }
        }
        if basis.len() != want {
            return Err(GmcError::Numeric(format!(
                "tangent basis construction found {} of {} directions",
                basis.len(),
                want
            )));
        }
        Ok(basis)
    }
}

impl PhaseState {
    /// Validate `(q, v)` against the manifold constraints before wrapping.
    pub fn new(m: &ManifoldSpec, q: DVector<f64>, v: DVector<f64>) -> Result<Self> {
        m.check_tangent(&q, &v)?;
        Ok(Self { q, v })
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.v.dot(&self.v)
    }
}

/// Closest orthonormal frame to `m`: multiply by the inverse symmetric square
/// root of the Gram matrix. Unlike QR this carries no column-sign ambiguity.
fn polar_orthonormalize(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gram = m.transpose() * m;
    let k = gram.nrows();
    let eig = gram.symmetric_eigen();
    let mut inv_sqrt = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        let d = eig.eigenvalues[i];
        if d <= f64::EPSILON {
            return Err(GmcError::Numeric(
                "frame collapsed during re-orthonormalization".to_string(),
            ));
        }
        inv_sqrt[(i, i)] = 1.0 / d.sqrt();
    }
    let correction = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
    Ok(m * correction)
}

/// Lift a point of the open unit ball onto the sphere one dimension up.
///
/// The last coordinate is +sqrt(1 - ||theta||^2) on the upper hemisphere
/// (`upper = true`) and its negative otherwise.
pub fn ball_to_sphere(theta: &DVector<f64>, upper: bool) -> Result<DVector<f64>> {
    let sq = theta.norm_squared();
    if sq > 1.0 + 1e-12 {
        return Err(GmcError::Domain(format!(
            "point with ||theta|| = {:.6} lies outside the closed unit ball",
            sq.sqrt()
        )));
    }
    let last = (1.0 - sq).max(0.0).sqrt();
    let mut q = DVector::zeros(theta.len() + 1);
    q.rows_mut(0, theta.len()).copy_from(theta);
    q[theta.len()] = if upper { last } else { -last };
    Ok(q)
}

/// Drop the lift coordinate, returning the ball point. Exact inverse of
/// [`ball_to_sphere`] on both hemispheres.
pub fn sphere_to_ball(q: &DVector<f64>) -> Result<DVector<f64>> {
    if q.len() < 2 {
        return Err(GmcError::DimensionMismatch(
            "sphere_to_ball needs at least 2 coordinates".to_string(),
        ));
    }
    Ok(q.rows(0, q.len() - 1).into_owned())
}

/// Map a sphere point to the probability simplex via x_i = q_i^2.
///
/// The second return value is the log change-of-measure factor
/// sum_i log(2 |q_i|); it is -inf whenever some coordinate vanishes.
pub fn sphere_to_simplex(q: &DVector<f64>) -> (DVector<f64>, f64) {
    let x = q.map(|c| c * c);
    let log_jacobian = q.iter().map(|&c| (2.0 * c.abs()).ln()).sum();
    (x, log_jacobian)
}
