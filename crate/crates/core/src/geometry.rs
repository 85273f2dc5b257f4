//! Rigid-body math: rotations, poses, point transforms, rigid alignment and
//! pinhole projection.
//!
//! All lengths are meters. Rotations are stored as 3×3 matrices; quaternions
//! only appear inside [`random_rotation`].

use nalgebra::{Matrix3, Vector3, SVD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("rotation matrix is not orthonormal with determinant +1")]
    NotARotation,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("point set is empty")]
    EmptyPointSet,
    #[error("point sets differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} correspondences, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("degenerate configuration: centered source points have rank < 2")]
    DegenerateConfiguration,
    #[error("robust alignment did not converge within {0} iterations")]
    NonConvergence(usize),
    #[error("point is at or behind the camera plane (z = {0})")]
    BehindCamera(f64),
    #[error("invalid camera intrinsics: {0}")]
    InvalidCamera(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid depth map: {0}")]
    InvalidDepthMap(String),
}

/// Proper orthonormal 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 9]", into = "[f64; 9]")]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Validates orthonormality and determinant.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite("rotation"));
        }
        let gram = m * m.transpose();
        let off = (gram - Matrix3::identity()).abs().max();
        if off >= ORTHONORMAL_TOL || (m.determinant() - 1.0).abs() >= ORTHONORMAL_TOL {
            return Err(GeometryError::NotARotation);
        }
        Ok(Rotation(m))
    }

    /// Like [`Rotation::from_matrix`] but re-orthonormalizes matrices within
    /// `tol`, which absorbs the rounding in matrices read from text files.
    /// Matrices that already pass the strict check are kept bit-for-bit.
    pub fn from_matrix_lenient(m: Matrix3<f64>, tol: f64) -> Result<Self, GeometryError> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite("rotation"));
        }
        if let Ok(r) = Rotation::from_matrix(m) {
            return Ok(r);
        }
        let gram = m * m.transpose();
        if (gram - Matrix3::identity()).abs().max() > tol || (m.determinant() - 1.0).abs() > tol {
            return Err(GeometryError::NotARotation);
        }
        let svd = SVD::new(m, true, true);
        let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut fixed = u * v_t;
        if fixed.determinant() < 0.0 {
            let mut u = u;
            u.column_mut(2).neg_mut();
            fixed = u * v_t;
        }
        Rotation::from_matrix(fixed)
    }

    pub fn from_row_major(rows: [f64; 9]) -> Result<Self, GeometryError> {
        Rotation::from_matrix(Matrix3::from_row_slice(&rows))
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    /// Rotation about a coordinate axis (0 = x, 1 = y, 2 = z) by `deg`
    /// degrees. Multiples of 90° produce exact entries in {-1, 0, 1}.
    pub fn about_axis_deg(axis: usize, deg: f64) -> Self {
        let (s, c) = sin_cos_deg(deg);
        let m = match axis {
            0 => Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
            1 => Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
            2 => Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
            _ => panic!("axis index must be 0, 1 or 2"),
        };
        Rotation(m)
    }

    pub fn rot_x_deg(deg: f64) -> Self {
        Self::about_axis_deg(0, deg)
    }

    pub fn rot_y_deg(deg: f64) -> Self {
        Self::about_axis_deg(1, deg)
    }

    pub fn rot_z_deg(deg: f64) -> Self {
        Self::about_axis_deg(2, deg)
    }

    /// Rodrigues formula for an arbitrary axis (normalized internally).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let k = axis.normalize();
        let kx = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
        Rotation(Matrix3::identity() + kx * angle.sin() + kx * kx * (1.0 - angle.cos()))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn mul(&self, other: &Rotation) -> Rotation {
        Rotation(self.0 * other.0)
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }
}

impl TryFrom<[f64; 9]> for Rotation {
    type Error = GeometryError;
    fn try_from(rows: [f64; 9]) -> Result<Self, Self::Error> {
        Rotation::from_matrix_lenient(Matrix3::from_row_slice(&rows), 1e-6)
    }
}

impl From<Rotation> for [f64; 9] {
    fn from(r: Rotation) -> Self {
        r.to_row_major()
    }
}

fn sin_cos_deg(deg: f64) -> (f64, f64) {
    let quarter = deg / 90.0;
    if quarter.fract() == 0.0 {
        match (quarter as i64).rem_euclid(4) {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        }
    } else {
        deg.to_radians().sin_cos()
    }
}

/// Rigid transform x ↦ R·x + t.
///
/// Serializes as `{"rotation": [9 row-major], "translation": [x, y, z]}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "PoseRepr", try_from = "PoseRepr")]
pub struct Pose {
    pub rotation: Rotation,
    pub translation: Vec3,
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    rotation: Rotation,
    translation: [f64; 3],
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        PoseRepr {
            rotation: p.rotation,
            translation: p.translation.into(),
        }
    }
}

impl TryFrom<PoseRepr> for Pose {
    type Error = GeometryError;
    fn try_from(r: PoseRepr) -> Result<Self, Self::Error> {
        Pose::new(r.rotation, Vec3::from(r.translation))
    }
}

impl Pose {
    pub fn new(rotation: Rotation, translation: Vec3) -> Result<Self, GeometryError> {
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite("translation"));
        }
        Ok(Pose { rotation, translation })
    }

    pub fn identity() -> Self {
        Pose {
            rotation: Rotation::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn from_rotation(rotation: Rotation) -> Self {
        Pose {
            rotation,
            translation: Vec3::zeros(),
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Pose {
            rotation: Rotation::identity(),
            translation,
        }
    }

    pub fn apply(&self, x: &Vec3) -> Vec3 {
        self.rotation.0 * x + self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: Rotation(self.rotation.0 * other.rotation.0),
            translation: self.rotation.0 * other.translation + self.translation,
        }
    }

    /// Right-composition with a pure rotation about the object origin, as
    /// used for symmetry transforms `P·S`.
    pub fn compose_rotation(&self, s: &Rotation) -> Pose {
        Pose {
            rotation: Rotation(self.rotation.0 * s.0),
            translation: self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.0.transpose();
        Pose {
            rotation: Rotation(rt),
            translation: -(rt * self.translation),
        }
    }

    pub fn with_scaled_translation(&self, alpha: f64) -> Pose {
        Pose {
            rotation: self.rotation,
            translation: self.translation * alpha,
        }
    }
}

/// Nonempty ordered list of finite 3-D points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet(Vec<Vec3>);

impl PointSet {
    pub fn new(points: Vec<Vec3>) -> Result<Self, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::EmptyPointSet);
        }
        if points.iter().flat_map(|p| p.iter()).any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite("point set"));
        }
        Ok(PointSet(points))
    }

    pub fn from_arrays(points: &[[f64; 3]]) -> Result<Self, GeometryError> {
        PointSet::new(points.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Vec3> {
        self.0.iter()
    }

    pub fn into_inner(self) -> Vec<Vec3> {
        self.0
    }

    pub fn select(&self, indices: &[usize]) -> PointSet {
        PointSet(indices.iter().map(|&i| self.0[i]).collect())
    }
}

impl std::ops::Index<usize> for PointSet {
    type Output = Vec3;
    fn index(&self, i: usize) -> &Vec3 {
        &self.0[i]
    }
}

pub fn transform_points(pose: &Pose, pts: &PointSet) -> PointSet {
    PointSet(pts.iter().map(|p| pose.apply(p)).collect())
}

pub fn compose(a: &Pose, b: &Pose) -> Pose {
    a.compose(b)
}

pub fn inverse(a: &Pose) -> Pose {
    a.inverse()
}

fn centroid(points: &[Vec3]) -> Vec3 {
    points.iter().sum::<Vec3>() / points.len() as f64
}

fn check_pairs(src: &PointSet, dst: &PointSet) -> Result<(), GeometryError> {
    if src.len() != dst.len() {
        return Err(GeometryError::LengthMismatch(src.len(), dst.len()));
    }
    if src.len() < 3 {
        return Err(GeometryError::TooFewPoints {
            needed: 3,
            got: src.len(),
        });
    }
    Ok(())
}

/// Least-squares rigid alignment of corresponded points (`dst ≈ R·src + t`).
pub fn kabsch(src: &PointSet, dst: &PointSet) -> Result<Pose, GeometryError> {
    check_pairs(src, dst)?;
    kabsch_slices(src.points(), dst.points())
}

fn kabsch_slices(src: &[Vec3], dst: &[Vec3]) -> Result<Pose, GeometryError> {
    let cs = centroid(src);
    let cd = centroid(dst);

    let mut scatter = Matrix3::zeros();
    let mut cross = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        let a = s - cs;
        let b = d - cd;
        scatter += a * a.transpose();
        cross += b * a.transpose();
    }

    // rank test on the source spread alone
    let sv = scatter.symmetric_eigenvalues();
    let mut sv: Vec<f64> = sv.iter().map(|v| v.abs()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if sv[0] == 0.0 || sv[1] <= 1e-12 * sv[0] {
        return Err(GeometryError::DegenerateConfiguration);
    }

    let svd = SVD::new(cross, true, true);
    let u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let d = if (u * v_t).determinant() < 0.0 { -1.0 } else { 1.0 };
    let r = u * Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * v_t;
    let t = cd - r * cs;
    Ok(Pose {
        rotation: Rotation(r),
        translation: t,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustConfig {
    /// Upper bound on the fraction of correspondences dropped, in [0, 0.5).
    pub trim_fraction: f64,
    pub max_iterations: usize,
    /// Residuals above `outlier_factor × median inlier residual` are outlier
    /// candidates.
    pub outlier_factor: f64,
    /// Residuals at or below this (meters) are never dropped.
    pub residual_floor: f64,
}

impl Default for RobustConfig {
    fn default() -> Self {
        RobustConfig {
            trim_fraction: 0.2,
            max_iterations: 20,
            outlier_factor: 3.0,
            residual_floor: 1e-6,
        }
    }
}

impl RobustConfig {
    pub fn with_trim(trim_fraction: f64) -> Self {
        RobustConfig {
            trim_fraction,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustAlignment {
    pub pose: Pose,
    pub inliers: Vec<bool>,
    /// Per-correspondence residual under `pose`.
    pub residuals: Vec<f64>,
    /// RMS residual over inliers.
    pub inlier_rms: f64,
    pub iterations: usize,
}

impl RobustAlignment {
    pub fn inlier_count(&self) -> usize {
        self.inliers.iter().filter(|&&b| b).count()
    }
}

/// Iteratively trimmed Kabsch.
///
/// Each round fits on the current inliers, then re-classifies every
/// correspondence: residuals above `max(residual_floor, outlier_factor ×
/// median)` are dropped, worst first, but never more than
/// `floor(trim_fraction × n)` of them. Stops once the inlier set repeats.
pub fn robust_procrustes(
    src: &PointSet,
    dst: &PointSet,
    config: &RobustConfig,
) -> Result<RobustAlignment, GeometryError> {
    check_pairs(src, dst)?;
    if !(0.0..0.5).contains(&config.trim_fraction) {
        return Err(GeometryError::InvalidParameter(format!(
            "trim fraction {} outside [0, 0.5)",
            config.trim_fraction
        )));
    }
    let n = src.len();
    let max_drop = ((config.trim_fraction * n as f64).floor() as usize).min(n - 3);
    let mut inliers = vec![true; n];

    for iter in 1..=config.max_iterations {
        let (s, d): (Vec<Vec3>, Vec<Vec3>) = (0..n).filter(|&i| inliers[i]).map(|i| (src[i], dst[i])).unzip();
        let pose = kabsch_slices(&s, &d)?;
        let residuals: Vec<f64> = (0..n).map(|i| (pose.apply(&src[i]) - dst[i]).norm()).collect();

        let mut kept: Vec<f64> = (0..n).filter(|&i| inliers[i]).map(|i| residuals[i]).collect();
        let threshold = config
            .residual_floor
            .max(config.outlier_factor * median_in_place(&mut kept));

        let mut order: Vec<usize> = (0..n).filter(|&i| residuals[i] > threshold).collect();
        order.sort_by(|&a, &b| residuals[b].total_cmp(&residuals[a]).then(a.cmp(&b)));
        order.truncate(max_drop);
        let mut next = vec![true; n];
        for &i in &order {
            next[i] = false;
        }

        if next == inliers {
            let count = next.iter().filter(|&&b| b).count();
            let ss: f64 = (0..n).filter(|&i| next[i]).map(|i| residuals[i].powi(2)).sum();
            return Ok(RobustAlignment {
                pose,
                inliers: next,
                residuals,
                inlier_rms: (ss / count as f64).sqrt(),
                iterations: iter,
            });
        }
        inliers = next;
    }
    Err(GeometryError::NonConvergence(config.max_iterations))
}

fn median_in_place(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinholeCamera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl PinholeCamera {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        let cam = PinholeCamera {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if ![self.fx, self.fy, self.cx, self.cy].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidCamera("non-finite intrinsics".into()));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(GeometryError::InvalidCamera("focal lengths must be positive".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(GeometryError::InvalidCamera("image size must be positive".into()));
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy) {
            return Err(GeometryError::InvalidCamera("principal point outside the image".into()));
        }
        Ok(())
    }

    /// Returns `(u, v, z)`.
    pub fn project(&self, pt: &Vec3) -> Result<(f64, f64, f64), GeometryError> {
        if !(pt.z > 0.0) {
            return Err(GeometryError::BehindCamera(pt.z));
        }
        Ok((self.fx * pt.x / pt.z + self.cx, self.fy * pt.y / pt.z + self.cy, pt.z))
    }

    pub fn unproject(&self, u: f64, v: f64, z: f64) -> Result<Vec3, GeometryError> {
        if !(z > 0.0) {
            return Err(GeometryError::BehindCamera(z));
        }
        Ok(Vec3::new((u - self.cx) * z / self.fx, (v - self.cy) * z / self.fy, z))
    }

    /// Integer pixel cell containing `(u, v)`, if inside the image.
    pub fn pixel(&self, u: f64, v: f64) -> Option<(usize, usize)> {
        if u < 0.0 || v < 0.0 {
            return None;
        }
        let (px, py) = (u.floor() as usize, v.floor() as usize);
        (px < self.width as usize && py < self.height as usize).then_some((px, py))
    }
}

/// Row-major depth grid in meters; 0 marks an invalid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, GeometryError> {
        if data.len() != width * height {
            return Err(GeometryError::InvalidDepthMap(format!(
                "expected {} values for {}x{}, got {}",
                width * height,
                width,
                height,
                data.len()
            )));
        }
        if data.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(GeometryError::InvalidDepthMap(
                "depth values must be finite and >= 0".into(),
            ));
        }
        Ok(DepthMap { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        DepthMap {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    /// Decodes a raw little-endian `u16` grid in millimeters.
    pub fn from_u16_le_mm(bytes: &[u8], width: usize, height: usize) -> Result<Self, GeometryError> {
        if bytes.len() != 2 * width * height {
            return Err(GeometryError::InvalidDepthMap(format!(
                "expected {} bytes for {}x{} u16 grid, got {}",
                2 * width * height,
                width,
                height,
                bytes.len()
            )));
        }
        let data = bytes
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]) as f64 / 1000.0)
            .collect();
        DepthMap::new(width, height, data)
    }

    pub fn to_u16_le_mm(&self) -> Vec<u8> {
        self.data
            .iter()
            .flat_map(|d| ((d * 1000.0).round().clamp(0.0, u16::MAX as f64) as u16).to_le_bytes())
            .collect()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, depth: f64) {
        self.data[y * self.width + x] = depth;
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }
}

/// Uniform rotation from a seeded ChaCha8 stream; reproducible across runs.
pub fn random_rotation(seed: u64) -> Rotation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_rotation_with(&mut rng)
}

/// Shoemake's uniform unit quaternion, converted to a matrix.
pub fn random_rotation_with<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    let u3: f64 = rng.random();
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (x, y) = (a * (2.0 * PI * u2).sin(), a * (2.0 * PI * u2).cos());
    let (z, w) = (b * (2.0 * PI * u3).sin(), b * (2.0 * PI * u3).cos());
    Rotation(Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - z * w),
        2.0 * (x * z + y * w),
        2.0 * (x * y + z * w),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - x * w),
        2.0 * (x * z - y * w),
        2.0 * (y * z + x * w),
        1.0 - 2.0 * (x * x + y * y),
    ))
}

/// Uniform direction on the unit sphere.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..2.0 * PI);
    let r = (1.0 - z * z).max(0.0).sqrt();
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

/// Geodesic distance on SO(3), in `[0, π]`.
pub fn rotation_angle(a: &Rotation, b: &Rotation) -> f64 {
    let m = a.0.transpose() * b.0;
    let cos = 0.5 * (m.trace() - 1.0);
    let axis = Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
    let sin = 0.5 * axis.norm();
    sin.atan2(cos)
}
