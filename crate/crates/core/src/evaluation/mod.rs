//! Ground-truth/prediction matching and the absolute-threshold evaluation
//! protocol.
//!
//! Matching is done per image and per object class. Predictions are visited
//! in descending score order; each one claims the still-unmatched GT
//! instance of its class with the smallest metric error. The claim succeeds
//! only when that error is within the threshold, otherwise the prediction is
//! a false positive and the GT instance stays available.

mod report;
mod simulate;
mod stats;

pub use report::{build_report, category_of, EvalOptions, EvalReport, ReportRow};
pub use simulate::{simulate_metric_comparison, RotationMode, SimulationConfig, SimulationRow, SimulationTable};
pub use stats::{dataset_stats, DatasetStats, ObjectStats};

use crate::geometry::Pose;
use crate::metrics::{MetricError, MetricKind, SampledModel};
use rayon::prelude::*;
use serde::Serialize;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Object models keyed by object id.
pub type ModelSet = BTreeMap<u32, SampledModel>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvaluationError {
    #[error("no model for object id {0}")]
    MissingModel(u32),
    #[error("ground truth is empty")]
    EmptyGroundTruth,
    #[error("no models given")]
    NoModels,
    #[error("invalid threshold {0} (must be finite and >= 0)")]
    InvalidThreshold(f64),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthInstance {
    pub scene_id: u32,
    pub image_id: u32,
    pub object_id: u32,
    /// Model-to-camera transform.
    pub pose: Pose,
    /// Visible fraction in [0, 1], when known.
    pub visibility: Option<f64>,
    /// Free-form per-image label, e.g. a lighting condition.
    pub tag: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub scene_id: u32,
    pub image_id: u32,
    pub object_id: u32,
    pub pose: Pose,
    pub score: f64,
    /// Runtime reported by the method, seconds; carried through unchanged.
    pub time: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ImageKey {
    pub scene_id: u32,
    pub image_id: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Match {
    /// Index into the ground-truth slice.
    pub gt: usize,
    /// Index into the prediction slice.
    pub pred: usize,
    /// Metric error, meters.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct MatchSet {
    /// Sorted by GT index.
    pub matched: Vec<Match>,
    pub unmatched_gt: Vec<usize>,
    pub unmatched_pred: Vec<usize>,
}

impl MatchSet {
    pub fn true_positives(&self) -> usize {
        self.matched.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub threshold_cm: f64,
    /// Fraction of GT instances detected, in [0, 1].
    pub recall: f64,
}

/// 0.5 cm to 10 cm in 0.1 cm steps.
pub fn default_curve_thresholds_cm() -> Vec<f64> {
    (5..=100).map(|k| k as f64 / 10.0).collect()
}

/// Same-class candidates of one image with their pairwise errors.
#[derive(Debug, Clone)]
struct ClassGroup {
    /// GT indices, in tie-break order.
    gts: Vec<usize>,
    /// Prediction indices, in claim order.
    preds: Vec<usize>,
    /// `errors[p][g]` for `preds[p]`, `gts[g]`.
    errors: Vec<Vec<f64>>,
}

/// Metric errors for every same-image, same-object (prediction, GT) pair.
/// Computed once, then matched at any number of thresholds.
#[derive(Debug, Clone)]
pub struct PairErrors {
    gt_count: usize,
    pred_count: usize,
    groups: Vec<ClassGroup>,
}

fn pose_key(p: &Pose) -> [f64; 12] {
    let r = p.rotation.to_row_major();
    let t = p.translation;
    [r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8], t.x, t.y, t.z]
}

fn cmp_pose(a: &Pose, b: &Pose) -> Ordering {
    pose_key(a)
        .iter()
        .zip(pose_key(b).iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

pub fn check_models(
    gts: &[GroundTruthInstance],
    preds: &[Prediction],
    models: &ModelSet,
) -> Result<(), EvaluationError> {
    let ids: BTreeSet<u32> = gts
        .iter()
        .map(|g| g.object_id)
        .chain(preds.iter().map(|p| p.object_id))
        .collect();
    match ids.into_iter().find(|id| !models.contains_key(id)) {
        Some(id) => Err(EvaluationError::MissingModel(id)),
        None => Ok(()),
    }
}

impl PairErrors {
    pub fn compute(
        gts: &[GroundTruthInstance],
        preds: &[Prediction],
        metric: MetricKind,
        models: &ModelSet,
        parallel: bool,
    ) -> Result<Self, EvaluationError> {
        check_models(gts, preds, models)?;

        let mut buckets: BTreeMap<(ImageKey, u32), (Vec<usize>, Vec<usize>)> = BTreeMap::new();
        for (i, g) in gts.iter().enumerate() {
            let key = ImageKey {
                scene_id: g.scene_id,
                image_id: g.image_id,
            };
            buckets.entry((key, g.object_id)).or_default().0.push(i);
        }
        for (i, p) in preds.iter().enumerate() {
            let key = ImageKey {
                scene_id: p.scene_id,
                image_id: p.image_id,
            };
            buckets.entry((key, p.object_id)).or_default().1.push(i);
        }

        let mut groups: Vec<ClassGroup> = buckets
            .into_iter()
            .map(|((_, _), (mut g, mut p))| {
                g.sort_by(|&a, &b| cmp_pose(&gts[a].pose, &gts[b].pose).then(a.cmp(&b)));
                p.sort_by(|&a, &b| {
                    let (x, y) = (&preds[a], &preds[b]);
                    y.score
                        .total_cmp(&x.score)
                        .then((x.scene_id, x.image_id, x.object_id).cmp(&(y.scene_id, y.image_id, y.object_id)))
                        .then(cmp_pose(&x.pose, &y.pose))
                        .then(a.cmp(&b))
                });
                ClassGroup {
                    gts: g,
                    preds: p,
                    errors: Vec::new(),
                }
            })
            .collect();

        let fill = |group: &mut ClassGroup| -> Result<(), EvaluationError> {
            if group.gts.is_empty() || group.preds.is_empty() {
                return Ok(());
            }
            let model = &models[&gts[group.gts[0]].object_id];
            group.errors = group
                .preds
                .iter()
                .map(|&p| {
                    group
                        .gts
                        .iter()
                        .map(|&g| metric.evaluate(&gts[g].pose, &preds[p].pose, model))
                        .collect::<Result<Vec<f64>, _>>()
                })
                .collect::<Result<_, _>>()?;
            Ok(())
        };
        if parallel {
            groups.par_iter_mut().try_for_each(fill)?;
        } else {
            groups.iter_mut().try_for_each(fill)?;
        }

        Ok(PairErrors {
            gt_count: gts.len(),
            pred_count: preds.len(),
            groups,
        })
    }

    /// Greedy confidence-ordered matching at `threshold` (meters).
    pub fn match_at(&self, threshold: f64) -> MatchSet {
        let mut gt_used = vec![false; self.gt_count];
        let mut pred_used = vec![false; self.pred_count];
        let mut matched = Vec::new();

        for group in &self.groups {
            let mut taken = vec![false; group.gts.len()];
            for (p_pos, &p) in group.preds.iter().enumerate() {
                let Some(row) = group.errors.get(p_pos) else { break };
                let best = (0..group.gts.len())
                    .filter(|&g| !taken[g])
                    .fold(None::<(usize, f64)>, |acc, g| match acc {
                        Some((_, e)) if e <= row[g] => acc,
                        _ => Some((g, row[g])),
                    });
                if let Some((g, error)) = best {
                    if error <= threshold {
                        taken[g] = true;
                        gt_used[group.gts[g]] = true;
                        pred_used[p] = true;
                        matched.push(Match {
                            gt: group.gts[g],
                            pred: p,
                            error,
                        });
                    }
                }
            }
        }
        matched.sort_by_key(|m| m.gt);
        MatchSet {
            matched,
            unmatched_gt: (0..self.gt_count).filter(|&i| !gt_used[i]).collect(),
            unmatched_pred: (0..self.pred_count).filter(|&i| !pred_used[i]).collect(),
        }
    }
}

fn check_threshold(t: f64) -> Result<(), EvaluationError> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(EvaluationError::InvalidThreshold(t))
    }
}

/// `threshold` is in meters.
pub fn match_instances(
    gts: &[GroundTruthInstance],
    preds: &[Prediction],
    metric: MetricKind,
    models: &ModelSet,
    threshold: f64,
) -> Result<MatchSet, EvaluationError> {
    check_threshold(threshold)?;
    Ok(PairErrors::compute(gts, preds, metric, models, false)?.match_at(threshold))
}

/// Recall (fraction of all GT instances) at each threshold in centimeters.
pub fn detection_curve(
    gts: &[GroundTruthInstance],
    preds: &[Prediction],
    metric: MetricKind,
    models: &ModelSet,
    thresholds_cm: &[f64],
) -> Result<Vec<CurvePoint>, EvaluationError> {
    if gts.is_empty() {
        return Err(EvaluationError::EmptyGroundTruth);
    }
    let errors = PairErrors::compute(gts, preds, metric, models, false)?;
    curve_from_errors(&errors, thresholds_cm, |_| true)
}

pub(crate) fn curve_from_errors(
    errors: &PairErrors,
    thresholds_cm: &[f64],
    include_gt: impl Fn(usize) -> bool,
) -> Result<Vec<CurvePoint>, EvaluationError> {
    let total = (0..errors.gt_count).filter(|&g| include_gt(g)).count();
    thresholds_cm
        .iter()
        .map(|&cm| {
            check_threshold(cm)?;
            let hits = errors
                .match_at(cm / 100.0)
                .matched
                .iter()
                .filter(|m| include_gt(m.gt))
                .count();
            Ok(CurvePoint {
                threshold_cm: cm,
                recall: if total == 0 { 0.0 } else { hits as f64 / total as f64 },
            })
        })
        .collect()
}

/// Keeps GT instances carrying `tag` and the predictions of the same images.
pub fn filter_by_tag(
    gts: &[GroundTruthInstance],
    preds: &[Prediction],
    tag: &str,
) -> (Vec<GroundTruthInstance>, Vec<Prediction>) {
    let g: Vec<GroundTruthInstance> = gts.iter().filter(|g| g.tag.as_deref() == Some(tag)).cloned().collect();
    let images: BTreeSet<(u32, u32)> = g.iter().map(|g| (g.scene_id, g.image_id)).collect();
    let p = preds
        .iter()
        .filter(|p| images.contains(&(p.scene_id, p.image_id)))
        .cloned()
        .collect();
    (g, p)
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use crate::geometry::{PointSet, Vec3};
    use crate::symmetry::{generate_symmetries, SymmetryClass};

    pub fn gt(object_id: u32, image_id: u32, t: [f64; 3]) -> GroundTruthInstance {
        GroundTruthInstance {
            scene_id: 1,
            image_id,
            object_id,
            pose: Pose::from_translation(Vec3::new(t[0], t[1], t[2])),
            visibility: None,
            tag: None,
        }
    }

    pub fn pred(object_id: u32, image_id: u32, t: [f64; 3], score: f64) -> Prediction {
        Prediction {
            scene_id: 1,
            image_id,
            object_id,
            pose: Pose::from_translation(Vec3::new(t[0], t[1], t[2])),
            score,
            time: None,
        }
    }

    pub fn cube_model(object_id: u32, class: SymmetryClass) -> SampledModel {
        let mut v = Vec::new();
        for x in [-0.02, 0.02] {
            for y in [-0.03, 0.03] {
                for z in [-0.05, 0.05] {
                    v.push([x, y, z]);
                }
            }
        }
        SampledModel::from_points(
            object_id,
            PointSet::from_arrays(&v).unwrap(),
            generate_symmetries(class, 90.0).unwrap(),
        )
        .unwrap()
    }

    pub fn models(ids: &[u32]) -> ModelSet {
        ids.iter()
            .map(|&id| (id, cube_model(id, SymmetryClass::Cuboid)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn higher_score_claims_first() {
        let gts = vec![gt(1, 0, [0.0, 0.0, 1.0])];
        let preds = vec![pred(1, 0, [0.01, 0.0, 1.0], 0.9), pred(1, 0, [0.005, 0.0, 1.0], 0.95)];
        let m = match_instances(&gts, &preds, MetricKind::Add, &models(&[1]), 0.02).unwrap();
        assert_eq!(m.matched.len(), 1);
        assert_eq!((m.matched[0].gt, m.matched[0].pred), (0, 1));
        assert!((m.matched[0].error - 0.005).abs() < 1e-12);
        assert_eq!(m.unmatched_pred, vec![0]);
        assert!(m.unmatched_gt.is_empty());
    }

    #[test]
    fn no_predictions() {
        let gts = vec![gt(1, 0, [0.0, 0.0, 1.0]), gt(1, 1, [0.0, 0.0, 1.0])];
        let m = match_instances(&gts, &[], MetricKind::Add, &models(&[1]), 0.02).unwrap();
        assert_eq!(m.unmatched_gt, vec![0, 1]);
        assert!(m.matched.is_empty());
    }

    #[test]
    fn threshold_excludes_both_sides() {
        let gts = vec![gt(1, 0, [0.0, 0.0, 1.0])];
        let preds = vec![pred(1, 0, [0.11, 0.0, 1.0], 0.5)];
        let m = match_instances(&gts, &preds, MetricKind::Add, &models(&[1]), 0.10).unwrap();
        assert_eq!(m.unmatched_gt, vec![0]);
        assert_eq!(m.unmatched_pred, vec![0]);
    }

    #[test]
    fn classes_and_images_do_not_mix() {
        let gts = vec![gt(1, 0, [0.0, 0.0, 1.0]), gt(2, 1, [0.0, 0.0, 1.0])];
        let preds = vec![pred(2, 0, [0.0, 0.0, 1.0], 0.9), pred(1, 1, [0.0, 0.0, 1.0], 0.9)];
        let m = match_instances(&gts, &preds, MetricKind::Add, &models(&[1, 2]), 0.10).unwrap();
        assert!(m.matched.is_empty());
    }

    #[test]
    fn missing_model() {
        let gts = vec![gt(7, 0, [0.0, 0.0, 1.0])];
        assert_eq!(
            match_instances(&gts, &[], MetricKind::Add, &models(&[1]), 0.02),
            Err(EvaluationError::MissingModel(7))
        );
    }

    #[test]
    fn curve_perfect_and_step() {
        let gts: Vec<_> = (0..4).map(|i| gt(1, i, [0.0, 0.0, 1.0])).collect();
        let preds: Vec<_> = (0..4).map(|i| pred(1, i, [0.0, 0.0, 1.0], 1.0)).collect();
        let curve = detection_curve(
            &gts,
            &preds,
            MetricKind::Add,
            &models(&[1]),
            &default_curve_thresholds_cm(),
        )
        .unwrap();
        assert_eq!(curve.len(), 96);
        assert!(curve.iter().all(|c| c.recall == 1.0));

        let offset: Vec<_> = (0..4).map(|i| pred(1, i, [0.0, 0.05, 1.0], 1.0)).collect();
        let curve = detection_curve(
            &gts,
            &offset,
            MetricKind::Add,
            &models(&[1]),
            &default_curve_thresholds_cm(),
        )
        .unwrap();
        for c in &curve {
            if c.threshold_cm < 4.95 {
                assert_eq!(c.recall, 0.0, "{c:?}");
            } else if c.threshold_cm > 5.05 {
                assert_eq!(c.recall, 1.0, "{c:?}");
            }
        }
        assert_eq!(
            detection_curve(&[], &[], MetricKind::Add, &models(&[1]), &[1.0]),
            Err(EvaluationError::EmptyGroundTruth)
        );
    }

    fn scene(seed: u64) -> (Vec<GroundTruthInstance>, Vec<Prediction>) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut gts = Vec::new();
        let mut preds = Vec::new();
        for image in 0..3 {
            for _ in 0..rng.random_range(1..4) {
                let obj = rng.random_range(1..3);
                let t = [
                    rng.random_range(-0.2..0.2),
                    rng.random_range(-0.2..0.2),
                    rng.random_range(0.5..1.0),
                ];
                gts.push(gt(obj, image, t));
                for _ in 0..rng.random_range(0..3) {
                    let j = [
                        t[0] + rng.random_range(-0.08..0.08),
                        t[1],
                        t[2] + rng.random_range(-0.08..0.08),
                    ];
                    // coarse scores so ties occur
                    preds.push(pred(obj, image, j, rng.random_range(0..3) as f64));
                }
            }
        }
        (gts, preds)
    }

    proptest! {
        #[test]
        fn recall_is_monotone(seed in any::<u64>()) {
            let (gts, preds) = scene(seed);
            let curve = detection_curve(&gts, &preds, MetricKind::Add, &models(&[1, 2]), &default_curve_thresholds_cm()).unwrap();
            for w in curve.windows(2) {
                prop_assert!(w[0].recall <= w[1].recall);
            }
        }

        #[test]
        fn matching_ignores_input_order(seed in any::<u64>(), shuffle_seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let (gts, preds) = scene(seed);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(shuffle_seed);
            let mut gperm: Vec<usize> = (0..gts.len()).collect();
            let mut pperm: Vec<usize> = (0..preds.len()).collect();
            gperm.shuffle(&mut rng);
            pperm.shuffle(&mut rng);
            let gts2: Vec<_> = gperm.iter().map(|&i| gts[i].clone()).collect();
            let preds2: Vec<_> = pperm.iter().map(|&i| preds[i].clone()).collect();

            let ms = models(&[1, 2]);
            let a = match_instances(&gts, &preds, MetricKind::Add, &ms, 0.05).unwrap();
            let b = match_instances(&gts2, &preds2, MetricKind::Add, &ms, 0.05).unwrap();
            let mut mapped: Vec<(usize, usize, u64)> = b.matched.iter().map(|m| (gperm[m.gt], pperm[m.pred], m.error.to_bits())).collect();
            mapped.sort();
            let orig: Vec<(usize, usize, u64)> = a.matched.iter().map(|m| (m.gt, m.pred, m.error.to_bits())).collect();
            prop_assert_eq!(mapped, orig);
            let mut ug: Vec<usize> = b.unmatched_gt.iter().map(|&i| gperm[i]).collect();
            ug.sort();
            prop_assert_eq!(ug, a.unmatched_gt);
        }
    }
}
