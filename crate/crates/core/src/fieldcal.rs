//! Procedures run around a dataset rather than on predictions: fitting a
//! depth-sensor scale, line-search depth refinement of a predicted pose,
//! leave-one-out consistency checks between two annotated views, and a
//! Nakagami fit of the resulting error distribution.

use crate::evaluation::ModelSet;
use crate::geometry::{robust_procrustes, DepthMap, GeometryError, PinholeCamera, PointSet, Pose, RobustConfig, Vec3};
use crate::metrics::{add, SampledModel};
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldcalError {
    #[error("input is empty")]
    EmptyInput,
    #[error("inputs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("depth at index {0} is not a positive finite value")]
    NonPositiveDepth(usize),
    #[error("no projected model point hits a valid depth pixel")]
    NoValidPixels,
    #[error("need at least {needed} objects common to both views, got {got}")]
    TooFewObjects { needed: usize, got: usize },
    #[error("object id {0} appears more than once in a view")]
    DuplicateObject(u32),
    #[error("no model for object id {0}")]
    MissingModel(u32),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("sample at index {0} is not a positive finite value")]
    NonPositiveSample(usize),
    #[error("samples are degenerate (zero variance of squares)")]
    DegenerateSamples,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

// ---------------------------------------------------------------------------
// depth scale

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DepthCalibration {
    pub scale: f64,
    /// Mean |measured − reference| in meters.
    pub mae_before: f64,
    /// Mean |scale·measured − reference| in meters.
    pub mae_after: f64,
    pub sample_count: usize,
}

/// Least-squares scale `s` minimizing `Σ (s·measured − reference)²`.
///
/// The fit is least squares on depth; the MAE fields are reported alongside
/// for comparison with sensor specs. Least squares does not guarantee a lower
/// MAE on arbitrary data, only on roughly symmetric noise.
pub fn fit_depth_scale(reference: &[f64], measured: &[f64]) -> Result<DepthCalibration, FieldcalError> {
    if reference.len() != measured.len() {
        return Err(FieldcalError::LengthMismatch(reference.len(), measured.len()));
    }
    if reference.is_empty() {
        return Err(FieldcalError::EmptyInput);
    }
    for (i, (&r, &m)) in reference.iter().zip(measured).enumerate() {
        if !(r > 0.0 && r.is_finite() && m > 0.0 && m.is_finite()) {
            return Err(FieldcalError::NonPositiveDepth(i));
        }
    }
    let mr: f64 = reference.iter().zip(measured).map(|(r, m)| m * r).sum();
    let mm: f64 = measured.iter().map(|m| m * m).sum();
    let scale = mr / mm;
    let n = reference.len() as f64;
    let mae = |s: f64| {
        reference
            .iter()
            .zip(measured)
            .map(|(r, m)| (s * m - r).abs())
            .sum::<f64>()
            / n
    };
    Ok(DepthCalibration {
        scale,
        mae_before: mae(1.0),
        mae_after: mae(scale),
        sample_count: reference.len(),
    })
}

// ---------------------------------------------------------------------------
// line-search depth refinement

/// Pixel subset used to restrict the depth comparison, e.g. an object mask.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl PixelMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self, FieldcalError> {
        if data.len() != width * height {
            return Err(FieldcalError::LengthMismatch(data.len(), width * height));
        }
        Ok(PixelMask { width, height, data })
    }

    pub fn from_pixels(width: usize, height: usize, pixels: &[(usize, usize)]) -> Self {
        let mut data = vec![false; width * height];
        for &(x, y) in pixels {
            if x < width && y < height {
                data[y * width + x] = true;
            }
        }
        PixelMask { width, height, data }
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x < self.width && y < self.height && self.data[y * self.width + x]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchConfig {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub steps: usize,
    /// Points farther than this behind the nearest point in their pixel are
    /// treated as occluded (meters).
    pub visibility_eps: f64,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        LineSearchConfig {
            alpha_min: 0.7,
            alpha_max: 1.3,
            steps: 121,
            visibility_eps: 0.005,
        }
    }
}

impl LineSearchConfig {
    pub fn grid(&self) -> Vec<f64> {
        let (lo, hi) = (self.alpha_min, self.alpha_max);
        (0..self.steps)
            .map(|i| {
                let a = lo + (hi - lo) * i as f64 / (self.steps - 1) as f64;
                // keep α = 1 exact when it lies on the grid
                if (a - 1.0).abs() < 1e-12 {
                    1.0
                } else {
                    a
                }
            })
            .collect()
    }

    pub fn step(&self) -> f64 {
        (self.alpha_max - self.alpha_min) / (self.steps - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchResult {
    pub pose: Pose,
    pub alpha: f64,
    /// Mean absolute depth residual at the chosen α (meters).
    pub objective: f64,
    /// Number of visible points compared at the chosen α.
    pub compared_points: usize,
}

/// Mean |point depth − depth map| over visible points on valid pixels, with
/// the number of points compared. `None` when no point hits a valid pixel.
pub fn depth_residual(
    pose: &Pose,
    model: &SampledModel,
    cam: &PinholeCamera,
    depth: &DepthMap,
    mask: Option<&PixelMask>,
    visibility_eps: f64,
) -> Option<(f64, usize)> {
    let mut projected = Vec::with_capacity(model.len());
    let mut nearest: HashMap<(usize, usize), f64> = HashMap::new();
    for p in model.points().iter() {
        let q = pose.apply(p);
        let Ok((u, v, z)) = cam.project(&q) else { continue };
        let Some(px) = cam.pixel(u, v) else { continue };
        if px.0 >= depth.width() || px.1 >= depth.height() {
            continue;
        }
        nearest.entry(px).and_modify(|d| *d = d.min(z)).or_insert(z);
        projected.push((px, z));
    }
    let (mut sum, mut count) = (0.0, 0usize);
    for (px, z) in projected {
        if z > nearest[&px] + visibility_eps {
            continue;
        }
        if mask.is_some_and(|m| !m.contains(px.0, px.1)) {
            continue;
        }
        let d = depth.get(px.0, px.1);
        if d > 0.0 {
            sum += (z - d).abs();
            count += 1;
        }
    }
    (count > 0).then(|| (sum / count as f64, count))
}

/// Rescales the predicted translation by the grid value of α that best agrees
/// with the observed depth. Ties keep the smallest α.
pub fn refine_depth_ls(
    pose: &Pose,
    model: &SampledModel,
    cam: &PinholeCamera,
    depth: &DepthMap,
    mask: Option<&PixelMask>,
    config: &LineSearchConfig,
) -> Result<LineSearchResult, FieldcalError> {
    if !(pose.translation.z > 0.0) {
        return Err(GeometryError::BehindCamera(pose.translation.z).into());
    }
    if config.steps < 2 {
        return Err(FieldcalError::InvalidParameter(
            "line search needs at least 2 steps".into(),
        ));
    }
    if !(config.alpha_min > 0.0 && config.alpha_max > config.alpha_min && config.alpha_max.is_finite()) {
        return Err(FieldcalError::InvalidParameter(format!(
            "alpha range [{}, {}] must be positive and increasing",
            config.alpha_min, config.alpha_max
        )));
    }
    cam.validate()?;
    let mut best: Option<LineSearchResult> = None;
    for alpha in config.grid() {
        let candidate = pose.with_scaled_translation(alpha);
        let Some((objective, compared_points)) =
            depth_residual(&candidate, model, cam, depth, mask, config.visibility_eps)
        else {
            continue;
        };
        if best.as_ref().is_none_or(|b| objective < b.objective) {
            best = Some(LineSearchResult {
                pose: candidate,
                alpha,
                objective,
                compared_points,
            });
        }
    }
    best.ok_or(FieldcalError::NoValidPixels)
}

// ---------------------------------------------------------------------------
// cross-view validation

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViewValidationResult {
    pub object_id: u32,
    /// ADD between the transferred view-A pose and the view-B annotation.
    pub add_error: f64,
    /// Estimated view-A → view-B camera transform.
    pub extrinsics: Pose,
    /// Inlier flag per correspondence, 4 per remaining object in id order.
    pub inliers: Vec<bool>,
}

/// Origin plus the three axis endpoints at half the model diameter.
fn frame_points(pose: &Pose, half_diameter: f64) -> [Vec3; 4] {
    [
        pose.apply(&Vec3::zeros()),
        pose.apply(&Vec3::new(half_diameter, 0.0, 0.0)),
        pose.apply(&Vec3::new(0.0, half_diameter, 0.0)),
        pose.apply(&Vec3::new(0.0, 0.0, half_diameter)),
    ]
}

fn index_view(view: &[(u32, Pose)]) -> Result<BTreeMap<u32, Pose>, FieldcalError> {
    let mut map = BTreeMap::new();
    for (id, pose) in view {
        if map.insert(*id, *pose).is_some() {
            return Err(FieldcalError::DuplicateObject(*id));
        }
    }
    Ok(map)
}

/// Leave-one-out consistency of two annotated views of the same scene.
///
/// For each object common to both views, the camera-to-camera transform is
/// estimated by robust alignment of the frame points of all other common
/// objects; the held-out view-A pose is carried into view B and scored with
/// ADD against its view-B annotation. Results are ordered by object id.
pub fn cross_view_validate(
    view_a: &[(u32, Pose)],
    view_b: &[(u32, Pose)],
    models: &ModelSet,
    config: &RobustConfig,
) -> Result<Vec<ViewValidationResult>, FieldcalError> {
    let a = index_view(view_a)?;
    let b = index_view(view_b)?;
    let common: Vec<u32> = a.keys().filter(|id| b.contains_key(id)).copied().collect();
    if common.len() < 4 {
        return Err(FieldcalError::TooFewObjects {
            needed: 4,
            got: common.len(),
        });
    }
    for id in &common {
        if !models.contains_key(id) {
            return Err(FieldcalError::MissingModel(*id));
        }
    }
    common
        .par_iter()
        .map(|&held| {
            let (mut src, mut dst) = (Vec::new(), Vec::new());
            for &id in common.iter().filter(|&&id| id != held) {
                let h = models[&id].diameter() / 2.0;
                src.extend(frame_points(&a[&id], h));
                dst.extend(frame_points(&b[&id], h));
            }
            let fit = robust_procrustes(&PointSet::new(src)?, &PointSet::new(dst)?, config)?;
            let transferred = fit.pose.compose(&a[&held]);
            Ok(ViewValidationResult {
                object_id: held,
                add_error: add(&b[&held], &transferred, &models[&held]),
                extrinsics: fit.pose,
                inliers: fit.inliers,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Nakagami

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NakagamiFit {
    /// Shape.
    pub m: f64,
    /// Spread, `E[x²]`.
    pub omega: f64,
    pub sample_mean: f64,
    /// `Γ(m + ½) / Γ(m) · √(Ω/m)`.
    pub analytic_mean: f64,
    /// `√(Ω(2m − 1)/(2m))` for `m ≥ ½`, else 0.
    pub mode: f64,
    pub sample_count: usize,
}

impl NakagamiFit {
    pub fn analytic_mean(m: f64, omega: f64) -> f64 {
        (ln_gamma(m + 0.5) - ln_gamma(m)).exp() * (omega / m).sqrt()
    }

    pub fn analytic_mode(m: f64, omega: f64) -> f64 {
        if m >= 0.5 {
            (omega * (2.0 * m - 1.0) / (2.0 * m)).sqrt()
        } else {
            0.0
        }
    }
}

/// Method-of-moments fit: `Ω = mean(x²)`, `m = Ω² / var(x²)` with the
/// population variance.
pub fn fit_nakagami(samples: &[f64]) -> Result<NakagamiFit, FieldcalError> {
    if samples.len() < 3 {
        return Err(FieldcalError::TooFewSamples {
            needed: 3,
            got: samples.len(),
        });
    }
    if let Some(i) = samples.iter().position(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(FieldcalError::NonPositiveSample(i));
    }
    if samples.iter().all(|x| *x == samples[0]) {
        return Err(FieldcalError::DegenerateSamples);
    }
    let n = samples.len() as f64;
    let omega = samples.iter().map(|x| x * x).sum::<f64>() / n;
    let var = samples.iter().map(|x| (x * x - omega).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(FieldcalError::DegenerateSamples);
    }
    let m = omega * omega / var;
    Ok(NakagamiFit {
        m,
        omega,
        sample_mean: samples.iter().sum::<f64>() / n,
        analytic_mean: NakagamiFit::analytic_mean(m, omega),
        mode: NakagamiFit::analytic_mode(m, omega),
        sample_count: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{random_rotation_with, Rotation};
    use crate::symmetry::{generate_symmetries, SymmetryClass};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Gamma, Normal};

    #[test]
    fn depth_scale_examples() {
        let r = [0.5, 0.8, 1.2];
        let c = fit_depth_scale(&r, &r).unwrap();
        assert_eq!(c.scale, 1.0);
        assert_eq!((c.mae_before, c.mae_after), (0.0, 0.0));

        let m = [0.5, 0.8, 1.2, 2.0];
        let r: Vec<f64> = m.iter().map(|x| 0.98 * x).collect();
        assert!((fit_depth_scale(&r, &m).unwrap().scale - 0.98).abs() < 1e-12);

        assert_eq!(fit_depth_scale(&[], &[]), Err(FieldcalError::EmptyInput));
        assert_eq!(
            fit_depth_scale(&[1.0, 0.0], &[1.0, 1.0]),
            Err(FieldcalError::NonPositiveDepth(1))
        );
        assert_eq!(
            fit_depth_scale(&[1.0], &[1.0, 1.0]),
            Err(FieldcalError::LengthMismatch(1, 2))
        );
    }

    #[test]
    fn depth_scale_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m: Vec<f64> = (0..200).map(|_| rng.random_range(0.4..2.0)).collect();
        let r: Vec<f64> = m.iter().map(|x| 0.97 * x + rng.random_range(-0.01..0.01)).collect();
        let s = fit_depth_scale(&r, &m).unwrap().scale;
        for c in [0.5, 1.7, 3.0] {
            let mc: Vec<f64> = m.iter().map(|x| c * x).collect();
            let sc = fit_depth_scale(&r, &mc).unwrap().scale;
            assert!((sc * c - s).abs() < 1e-12 * s);
        }
    }

    fn dense_box(half: [f64; 3], spacing: f64) -> Vec<Vec3> {
        let n = |h: f64| (2.0 * h / spacing).round() as i32;
        let mut pts = Vec::new();
        for axis in 0..3 {
            let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
            for s in [-1.0, 1.0] {
                for i in 0..=n(half[u]) {
                    for j in 0..=n(half[v]) {
                        let mut p = Vec3::zeros();
                        p[axis] = s * half[axis];
                        p[u] = -half[u] + i as f64 * spacing;
                        p[v] = -half[v] + j as f64 * spacing;
                        pts.push(p);
                    }
                }
            }
        }
        pts
    }

    // independent z-buffer splat of a dense surface sampling
    fn render(points: &[Vec3], pose: &Pose, cam: &PinholeCamera) -> DepthMap {
        let (w, h) = (cam.width as usize, cam.height as usize);
        let mut z = vec![f64::INFINITY; w * h];
        for p in points {
            let q = pose.rotation.matrix() * p + pose.translation;
            let u = cam.fx * q.x / q.z + cam.cx;
            let v = cam.fy * q.y / q.z + cam.cy;
            if u >= 0.0 && v >= 0.0 && (u as usize) < w && (v as usize) < h {
                let k = v as usize * w + u as usize;
                z[k] = z[k].min(q.z);
            }
        }
        DepthMap::new(
            w,
            h,
            z.into_iter().map(|d| if d.is_finite() { d } else { 0.0 }).collect(),
        )
        .unwrap()
    }

    fn scene() -> (Vec<Vec3>, SampledModel, PinholeCamera) {
        let dense = dense_box([0.05, 0.04, 0.03], 0.001);
        let model = SampledModel::from_vertices(
            1,
            &PointSet::new(dense.clone()).unwrap(),
            generate_symmetries(SymmetryClass::Cuboid, 90.0).unwrap(),
            500,
        )
        .unwrap();
        let cam = PinholeCamera::new(320.0, 320.0, 160.0, 120.0, 320, 240).unwrap();
        (dense, model, cam)
    }

    #[test]
    fn line_search_recovers_scale() {
        let (dense, model, cam) = scene();
        let truth = Pose::new(
            Rotation::rot_x_deg(30.0).mul(&Rotation::rot_y_deg(20.0)),
            Vec3::new(0.02, -0.01, 0.7),
        )
        .unwrap();
        let depth = render(&dense, &truth, &cam);
        let cfg = LineSearchConfig::default();

        let r = refine_depth_ls(&truth, &model, &cam, &depth, None, &cfg).unwrap();
        assert!((r.alpha - 1.0).abs() <= cfg.step() + 1e-12, "{}", r.alpha);

        let r = refine_depth_ls(&truth.with_scaled_translation(1.1), &model, &cam, &depth, None, &cfg).unwrap();
        assert!((r.alpha - 1.0 / 1.1).abs() <= cfg.step() + 1e-12, "{}", r.alpha);
    }

    #[test]
    fn line_search_never_worse_than_unit_alpha() {
        let (dense, model, cam) = scene();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = LineSearchConfig::default();
        for _ in 0..10 {
            let truth = Pose::new(
                random_rotation_with(&mut rng),
                Vec3::new(0.0, 0.0, rng.random_range(0.5..0.9)),
            )
            .unwrap();
            let depth = render(&dense, &truth, &cam);
            let pred = truth.with_scaled_translation(rng.random_range(0.85..1.15));
            let r = refine_depth_ls(&pred, &model, &cam, &depth, None, &cfg).unwrap();
            let (at_one, _) = depth_residual(&pred, &model, &cam, &depth, None, cfg.visibility_eps).unwrap();
            assert!(r.objective <= at_one);
        }
    }

    #[test]
    fn line_search_errors_and_mask() {
        let (dense, model, cam) = scene();
        let truth = Pose::from_translation(Vec3::new(0.0, 0.0, 0.6));
        let empty = DepthMap::zeros(320, 240);
        let cfg = LineSearchConfig::default();
        assert_eq!(
            refine_depth_ls(&truth, &model, &cam, &empty, None, &cfg),
            Err(FieldcalError::NoValidPixels)
        );
        let depth = render(&dense, &truth, &cam);
        let nothing = PixelMask::from_pixels(320, 240, &[]);
        assert_eq!(
            refine_depth_ls(&truth, &model, &cam, &depth, Some(&nothing), &cfg),
            Err(FieldcalError::NoValidPixels)
        );
        let all = PixelMask::new(320, 240, vec![true; 320 * 240]).unwrap();
        assert_eq!(
            refine_depth_ls(&truth, &model, &cam, &depth, Some(&all), &cfg).unwrap(),
            refine_depth_ls(&truth, &model, &cam, &depth, None, &cfg).unwrap()
        );
        let behind = Pose::from_translation(Vec3::new(0.0, 0.0, -0.6));
        assert!(refine_depth_ls(&behind, &model, &cam, &depth, None, &cfg).is_err());
    }

    type View = Vec<(u32, Pose)>;

    fn two_views(n: usize, seed: u64) -> (View, View, ModelSet, Pose) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let extr = Pose::new(
            random_rotation_with(&mut rng),
            Vec3::new(
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.3..0.3),
            ),
        )
        .unwrap();
        let (mut a, mut b, mut models) = (Vec::new(), Vec::new(), ModelSet::new());
        for id in 1..=n as u32 {
            let pose = Pose::new(
                random_rotation_with(&mut rng),
                Vec3::new(
                    rng.random_range(-0.3..0.3),
                    rng.random_range(-0.2..0.2),
                    rng.random_range(0.6..1.2),
                ),
            )
            .unwrap();
            a.push((id, pose));
            b.push((id, extr.compose(&pose)));
            let s = 0.02 + 0.005 * id as f64;
            let pts = dense_box([s, 0.8 * s, 0.6 * s], s / 2.0);
            let m = SampledModel::from_points(
                id,
                PointSet::new(pts).unwrap(),
                generate_symmetries(SymmetryClass::NoSymmetry, 1.0).unwrap(),
            )
            .unwrap();
            models.insert(id, m);
        }
        (a, b, models, extr)
    }

    #[test]
    fn cross_view_consistent_annotations() {
        let (a, b, models, extr) = two_views(6, 1);
        let res = cross_view_validate(&a, &b, &models, &RobustConfig::default()).unwrap();
        assert_eq!(
            res.iter().map(|r| r.object_id).collect::<Vec<_>>(),
            vec![1, 2, 3, 4, 5, 6]
        );
        for r in &res {
            assert!(r.add_error < 1e-9);
            assert!((r.extrinsics.rotation.matrix() - extr.rotation.matrix()).norm() < 1e-9);
            assert!((r.extrinsics.translation - extr.translation).norm() < 1e-9);
            assert!(r.inliers.iter().all(|&x| x));
        }
    }

    #[test]
    fn cross_view_perturbed_object() {
        let (a, mut b, models, _) = two_views(6, 2);
        b[2].1.translation += Vec3::new(0.003, 0.0, 0.004);
        let res = cross_view_validate(&a, &b, &models, &RobustConfig::default()).unwrap();
        assert!((res[2].add_error - 0.005).abs() < 0.0005, "{}", res[2].add_error);
    }

    #[test]
    fn cross_view_invariant_under_common_transforms() {
        let (a, b, models, _) = two_views(5, 3);
        let base = cross_view_validate(&a, &b, &models, &RobustConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let (ta, tb) = (
            Pose::new(random_rotation_with(&mut rng), Vec3::new(0.1, 0.2, 0.3)).unwrap(),
            Pose::new(random_rotation_with(&mut rng), Vec3::new(-0.2, 0.0, 0.5)).unwrap(),
        );
        let a2: Vec<_> = a.iter().map(|(i, p)| (*i, ta.compose(p))).collect();
        let b2: Vec<_> = b.iter().map(|(i, p)| (*i, tb.compose(p))).collect();
        let moved = cross_view_validate(&a2, &b2, &models, &RobustConfig::default()).unwrap();
        for (x, y) in base.iter().zip(&moved) {
            assert!((x.add_error - y.add_error).abs() < 1e-9);
        }
    }

    #[test]
    fn cross_view_errors() {
        let (a, b, models, _) = two_views(4, 4);
        assert_eq!(
            cross_view_validate(&a[..3], &b, &models, &RobustConfig::default()),
            Err(FieldcalError::TooFewObjects { needed: 4, got: 3 })
        );
        let mut dup = a.clone();
        dup.push(a[0]);
        assert_eq!(
            cross_view_validate(&dup, &b, &models, &RobustConfig::default()),
            Err(FieldcalError::DuplicateObject(1))
        );
        let mut fewer = models.clone();
        fewer.remove(&2);
        assert_eq!(
            cross_view_validate(&a, &b, &fewer, &RobustConfig::default()),
            Err(FieldcalError::MissingModel(2))
        );
    }

    fn nakagami_samples(m: f64, omega: f64, n: usize, seed: u64) -> Vec<f64> {
        let gamma = Gamma::new(m, omega / m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| gamma.sample(&mut rng).sqrt()).collect()
    }

    #[test]
    fn nakagami_rayleigh() {
        let fit = fit_nakagami(&nakagami_samples(1.0, 2.0, 100_000, 5)).unwrap();
        assert!((fit.m - 1.0).abs() < 0.05, "{fit:?}");
        assert!((fit.omega - 2.0).abs() < 0.05, "{fit:?}");
        // Rayleigh with σ² = 1: mean √(π/2), mode 1
        assert!((fit.sample_mean - (std::f64::consts::PI / 2.0).sqrt()).abs() < 0.02);
        assert!((NakagamiFit::analytic_mean(1.0, 2.0) - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-12);
        assert!((NakagamiFit::analytic_mode(1.0, 2.0) - 1.0).abs() < 1e-15);
        assert_eq!(NakagamiFit::analytic_mode(0.4, 2.0), 0.0);
    }

    #[test]
    fn nakagami_scaling_and_errors() {
        let x = nakagami_samples(0.831, 0.83, 2000, 6);
        let f = fit_nakagami(&x).unwrap();
        let c = 3.5;
        let g = fit_nakagami(&x.iter().map(|v| v * c).collect::<Vec<_>>()).unwrap();
        assert!((g.m - f.m).abs() < 1e-9 * f.m);
        assert!((g.omega - c * c * f.omega).abs() < 1e-9 * g.omega);

        assert_eq!(fit_nakagami(&[0.3; 10]), Err(FieldcalError::DegenerateSamples));
        assert_eq!(
            fit_nakagami(&[0.3, 0.4]),
            Err(FieldcalError::TooFewSamples { needed: 3, got: 2 })
        );
        assert_eq!(
            fit_nakagami(&[0.3, -0.4, 1.0]),
            Err(FieldcalError::NonPositiveSample(1))
        );
    }

    #[test]
    fn noisy_depth_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let noise = Normal::new(0.0, 0.005).unwrap();
        let m: Vec<f64> = (0..5000).map(|_| rng.random_range(0.5..1.5)).collect();
        let r: Vec<f64> = m.iter().map(|x| 0.9804 * x + noise.sample(&mut rng)).collect();
        let c = fit_depth_scale(&r, &m).unwrap();
        assert!((c.scale - 0.9804).abs() < 0.002);
        assert!(c.mae_after < c.mae_before);
    }
}
