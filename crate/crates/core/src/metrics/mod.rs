//! Pose error metrics over sampled object models.
//!
//! Every metric places the model once under the ground-truth pose and once
//! under the predicted pose and then differs only in how vertices are
//! paired:
//!
//! | metric  | pairing                                             |
//! |---------|-----------------------------------------------------|
//! | ADD     | identity                                            |
//! | ADD-S   | each GT vertex to its nearest predicted vertex      |
//! | MeanSSD | identity, after the best symmetry (mean distance)   |
//! | MSSD    | identity, after the best symmetry (max distance)    |
//! | ADD-H   | minimum-cost bijection (linear sum assignment)      |
//!
//! Results are in meters.

mod model;

pub use model::{diameter, subsample, SampledModel, DEFAULT_SAMPLE_COUNT};

use crate::assignment::{solve_lap, AssignmentError, CostMatrix};
use crate::geometry::{Pose, Vec3};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
    #[error("unknown metric '{0}' (expected add, add-s, meanssd, mssd or add-h)")]
    UnknownMetric(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MetricKind {
    #[serde(rename = "ADD")]
    Add,
    #[serde(rename = "ADD-S")]
    AddS,
    #[serde(rename = "MeanSSD")]
    MeanSsd,
    #[serde(rename = "MSSD")]
    Mssd,
    #[serde(rename = "ADD-H")]
    AddH,
}

impl MetricKind {
    pub const ALL: [MetricKind; 5] = [
        MetricKind::Add,
        MetricKind::AddS,
        MetricKind::MeanSsd,
        MetricKind::Mssd,
        MetricKind::AddH,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            MetricKind::Add => "ADD",
            MetricKind::AddS => "ADD-S",
            MetricKind::MeanSsd => "MeanSSD",
            MetricKind::Mssd => "MSSD",
            MetricKind::AddH => "ADD-H",
        }
    }

    pub fn evaluate(&self, gt: &Pose, pred: &Pose, model: &SampledModel) -> Result<f64, MetricError> {
        Ok(match self {
            MetricKind::Add => add(gt, pred, model),
            MetricKind::AddS => add_s(gt, pred, model),
            MetricKind::MeanSsd => mean_ssd(gt, pred, model).error,
            MetricKind::Mssd => mssd(gt, pred, model).error,
            MetricKind::AddH => add_h(gt, pred, model)?,
        })
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for MetricKind {
    type Err = MetricError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_'))
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "add" => Ok(MetricKind::Add),
            "adds" => Ok(MetricKind::AddS),
            "meanssd" => Ok(MetricKind::MeanSsd),
            "mssd" => Ok(MetricKind::Mssd),
            "addh" => Ok(MetricKind::AddH),
            _ => Err(MetricError::UnknownMetric(s.to_string())),
        }
    }
}

/// Error minimized over a symmetry set, with the index of the minimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricError {
    pub error: f64,
    pub symmetry_index: usize,
}

fn place(pose: &Pose, model: &SampledModel) -> Vec<Vec3> {
    model.points().iter().map(|x| pose.apply(x)).collect()
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

pub fn add(gt: &Pose, pred: &Pose, model: &SampledModel) -> f64 {
    let g = place(gt, model);
    let p = place(pred, model);
    mean(g.iter().zip(&p).map(|(a, b)| (a - b).norm()))
}

/// Outer mean over ground-truth vertices, inner min over predicted ones.
pub fn add_s(gt: &Pose, pred: &Pose, model: &SampledModel) -> f64 {
    let g = place(gt, model);
    let p = place(pred, model);
    mean(g.iter().map(|a| nearest(a, &p).1))
}

fn nearest(a: &Vec3, set: &[Vec3]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, b) in set.iter().enumerate() {
        let d = (a - b).norm();
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn symmetric_min(gt: &Pose, pred: &Pose, model: &SampledModel, reduce: fn(&[Vec3], &[Vec3]) -> f64) -> SymmetricError {
    let p = place(pred, model);
    let mut best = SymmetricError {
        error: f64::INFINITY,
        symmetry_index: 0,
    };
    for (k, s) in model.symmetries().rotations().iter().enumerate() {
        let g = place(&gt.compose_rotation(s), model);
        let e = reduce(&g, &p);
        if e < best.error {
            best = SymmetricError {
                error: e,
                symmetry_index: k,
            };
        }
    }
    best
}

pub fn mean_ssd(gt: &Pose, pred: &Pose, model: &SampledModel) -> SymmetricError {
    symmetric_min(gt, pred, model, |g, p| {
        mean(g.iter().zip(p).map(|(a, b)| (a - b).norm()))
    })
}

pub fn mssd(gt: &Pose, pred: &Pose, model: &SampledModel) -> SymmetricError {
    symmetric_min(gt, pred, model, |g, p| {
        g.iter().zip(p).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    })
}

/// Cost matrix `cost[i][j] = ‖P̄xᵢ − P̂xⱼ‖` (rows: ground truth).
pub fn pairwise_costs(gt: &Pose, pred: &Pose, model: &SampledModel) -> Result<CostMatrix, AssignmentError> {
    let g = place(gt, model);
    let p = place(pred, model);
    CostMatrix::from_fn(g.len(), |i, j| (g[i] - p[j]).norm())
}

pub fn add_h(gt: &Pose, pred: &Pose, model: &SampledModel) -> Result<f64, MetricError> {
    let cost = pairwise_costs(gt, pred, model)?;
    let assignment = solve_lap(&cost);
    Ok(mean(assignment.pairs().map(|(i, j)| cost.get(i, j))))
}

/// Vertex pairing used by one metric evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceMap {
    pub metric: MetricKind,
    /// `(gt vertex index, predicted vertex index)`, one per GT vertex.
    pub pairs: Vec<(usize, usize)>,
    /// Distance of each pair, meters.
    pub distances: Vec<f64>,
    pub chosen_symmetry: Option<usize>,
}

impl CorrespondenceMap {
    pub fn mean_distance(&self) -> f64 {
        mean(self.distances.iter().copied())
    }

    pub fn max_distance(&self) -> f64 {
        self.distances.iter().copied().fold(0.0, f64::max)
    }
}

pub fn correspondence_map(
    metric: MetricKind,
    gt: &Pose,
    pred: &Pose,
    model: &SampledModel,
) -> Result<CorrespondenceMap, MetricError> {
    let p = place(pred, model);
    let identity_pairs = |g: &[Vec3]| -> (Vec<(usize, usize)>, Vec<f64>) {
        (0..g.len()).map(|i| ((i, i), (g[i] - p[i]).norm())).unzip()
    };
    let (pairs, distances, chosen_symmetry) = match metric {
        MetricKind::Add => {
            let (pairs, d) = identity_pairs(&place(gt, model));
            (pairs, d, None)
        }
        MetricKind::AddS => {
            let g = place(gt, model);
            let (pairs, d) = g
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let (j, d) = nearest(a, &p);
                    ((i, j), d)
                })
                .unzip();
            (pairs, d, None)
        }
        MetricKind::MeanSsd | MetricKind::Mssd => {
            let best = if metric == MetricKind::MeanSsd {
                mean_ssd(gt, pred, model)
            } else {
                mssd(gt, pred, model)
            };
            let s = model.symmetries().rotations()[best.symmetry_index];
            let (pairs, d) = identity_pairs(&place(&gt.compose_rotation(&s), model));
            (pairs, d, Some(best.symmetry_index))
        }
        MetricKind::AddH => {
            let cost = pairwise_costs(gt, pred, model)?;
            let a = solve_lap(&cost);
            let d = a.pairs().map(|(i, j)| cost.get(i, j)).collect();
            (a.pairs().collect(), d, None)
        }
    };
    Ok(CorrespondenceMap {
        metric,
        pairs,
        distances,
        chosen_symmetry,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::brute_force_lap;
    use crate::geometry::{random_rotation_with, PointSet, Rotation};
    use crate::symmetry::{generate_symmetries, SymmetryClass, SymmetrySet};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(points: &[[f64; 3]], symmetries: SymmetrySet) -> SampledModel {
        SampledModel::from_points(1, PointSet::from_arrays(points).unwrap(), symmetries).unwrap()
    }

    fn segment() -> SampledModel {
        model(&[[0.5, 0.0, 0.0], [-0.5, 0.0, 0.0]], SymmetrySet::identity_only())
    }

    fn square() -> SampledModel {
        model(
            &[[1.0, 1.0, 0.0], [-1.0, 1.0, 0.0], [-1.0, -1.0, 0.0], [1.0, -1.0, 0.0]],
            SymmetrySet::identity_only(),
        )
    }

    fn random_model(rng: &mut ChaCha8Rng, n: usize, class: SymmetryClass) -> SampledModel {
        let pts = (0..n)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-0.05..0.05),
                    rng.random_range(-0.05..0.05),
                    rng.random_range(-0.1..0.1),
                )
            })
            .collect();
        SampledModel::from_points(
            1,
            PointSet::new(pts).unwrap(),
            generate_symmetries(class, 30.0).unwrap(),
        )
        .unwrap()
    }

    fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
        Pose::new(
            random_rotation_with(rng),
            Vec3::new(
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.3..0.3),
                rng.random_range(0.3..1.5),
            ),
        )
        .unwrap()
    }

    #[test]
    fn add_examples() {
        let gt = Pose::identity();
        let m = segment();
        assert_eq!(add(&gt, &gt, &m), 0.0);
        let shifted = Pose::from_translation(Vec3::new(0.03, 0.0, 0.0));
        assert!((add(&gt, &shifted, &m) - 0.03).abs() < 1e-15);
        let flipped = gt.compose_rotation(&Rotation::rot_z_deg(180.0));
        assert_eq!(add(&gt, &flipped, &m), 1.0);
    }

    #[test]
    fn add_s_examples() {
        let gt = Pose::identity();
        let m = segment();
        assert_eq!(add_s(&gt, &gt, &m), 0.0);
        let flipped = gt.compose_rotation(&Rotation::rot_z_deg(180.0));
        assert_eq!(add_s(&gt, &flipped, &m), 0.0);
        // predicted {1.5, 0.5}: gt 0.5 is hit exactly, gt -0.5 is 1 m from 0.5
        let moved = Pose::from_translation(Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(add_s(&gt, &moved, &m), 0.5);
    }

    #[test]
    fn mean_ssd_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_model(&mut rng, 40, SymmetryClass::Cuboid);
        let gt = random_pose(&mut rng);
        for (k, s) in m.symmetries().rotations().iter().enumerate() {
            let pred = gt.compose_rotation(s);
            let r = mean_ssd(&gt, &pred, &m);
            assert_eq!(r.error, 0.0);
            assert_eq!(r.symmetry_index, k);
        }

        let plain = m.clone().with_symmetries(SymmetrySet::identity_only());
        let pred = random_pose(&mut rng);
        assert_eq!(mean_ssd(&gt, &pred, &plain).error, add(&gt, &pred, &plain));
    }

    #[test]
    fn mean_ssd_under_translation_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = random_model(&mut rng, 30, SymmetryClass::Bottle);
        let d = Vec3::new(0.01, -0.02, 0.015);
        let gt = Pose::identity();
        let pred = Pose::from_translation(d);
        // brute force over the two-element set
        let candidates: Vec<f64> = m
            .symmetries()
            .rotations()
            .iter()
            .map(|s| {
                let placed: Vec<f64> = m.points().iter().map(|x| (s.apply(x) - (x + d)).norm()).collect();
                placed.iter().sum::<f64>() / placed.len() as f64
            })
            .collect();
        let expect = candidates.iter().copied().fold(f64::INFINITY, f64::min);
        let got = mean_ssd(&gt, &pred, &m).error;
        assert!((got - expect).abs() < 1e-15);
        assert!(got <= d.norm() + 1e-15);
    }

    #[test]
    fn mssd_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_model(&mut rng, 25, SymmetryClass::Cylinder);
        let gt = random_pose(&mut rng);
        for s in m.symmetries().rotations() {
            assert_eq!(mssd(&gt, &gt.compose_rotation(s), &m).error, 0.0);
        }
        let plain = m.clone().with_symmetries(SymmetrySet::identity_only());
        let d = Vec3::new(0.0, 0.04, 0.0);
        let e = mssd(&Pose::identity(), &Pose::from_translation(d), &plain).error;
        assert!((e - 0.04).abs() < 1e-15);
        for _ in 0..20 {
            let pred = random_pose(&mut rng);
            assert!(mssd(&gt, &pred, &m).error >= mean_ssd(&gt, &pred, &m).error);
        }
    }

    #[test]
    fn add_h_examples() {
        let gt = Pose::identity();
        let m = square();
        assert_eq!(add_h(&gt, &gt, &m).unwrap(), 0.0);
        let d = Vec3::new(0.01, 0.02, -0.03);
        assert!((add_h(&gt, &Pose::from_translation(d), &m).unwrap() - d.norm()).abs() < 1e-12);

        let quarter = gt.compose_rotation(&Rotation::rot_z_deg(90.0));
        assert_eq!(add_h(&gt, &quarter, &m).unwrap(), 0.0);
        // exhaustive check over all 24 bijections
        let cost = pairwise_costs(&gt, &quarter, &m).unwrap();
        assert_eq!(brute_force_lap(&cost).unwrap().total_cost, 0.0);
    }

    #[test]
    fn correspondence_maps() {
        let gt = Pose::identity();
        let m = square();
        let quarter = gt.compose_rotation(&Rotation::rot_z_deg(90.0));
        let map = correspondence_map(MetricKind::AddH, &gt, &quarter, &m).unwrap();
        let mut cols: Vec<usize> = map.pairs.iter().map(|p| p.1).collect();
        cols.sort();
        assert_eq!(cols, vec![0, 1, 2, 3]);
        assert_eq!(map.mean_distance(), 0.0);

        let map = correspondence_map(MetricKind::Add, &gt, &quarter, &m).unwrap();
        assert!(map.pairs.iter().all(|&(i, j)| i == j));

        let seg = segment();
        let flipped = gt.compose_rotation(&Rotation::rot_z_deg(180.0));
        let map = correspondence_map(MetricKind::AddS, &gt, &flipped, &seg).unwrap();
        assert_eq!(map.pairs, vec![(0, 1), (1, 0)]);
        assert_eq!(map.distances, vec![0.0, 0.0]);

        let cub = model(
            &[
                [0.1, 0.05, 0.02],
                [-0.1, 0.05, 0.02],
                [0.1, -0.05, -0.02],
                [0.03, 0.01, 0.0],
            ],
            generate_symmetries(SymmetryClass::Cuboid, 1.0).unwrap(),
        );
        let pred = gt.compose_rotation(&Rotation::rot_y_deg(180.0));
        let map = correspondence_map(MetricKind::MeanSsd, &gt, &pred, &cub).unwrap();
        assert_eq!(map.chosen_symmetry, Some(2));
        assert_eq!(map.mean_distance(), 0.0);
    }

    #[test]
    fn ordering_and_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for class in [SymmetryClass::Cylinder, SymmetryClass::Cuboid, SymmetryClass::Bottle] {
            for _ in 0..30 {
                let m = random_model(&mut rng, 30, class);
                let gt = random_pose(&mut rng);
                let pred = random_pose(&mut rng);
                let (a, s, h) = (
                    add(&gt, &pred, &m),
                    add_s(&gt, &pred, &m),
                    add_h(&gt, &pred, &m).unwrap(),
                );
                let (ms, mx) = (mean_ssd(&gt, &pred, &m).error, mssd(&gt, &pred, &m).error);
                assert!(s <= h + 1e-9 && h <= a + 1e-9);
                assert!(ms <= a + 1e-9 && ms <= mx + 1e-9);

                let g = random_pose(&mut rng);
                let (gt2, pred2) = (g.compose(&gt), g.compose(&pred));
                for kind in MetricKind::ALL {
                    let before = kind.evaluate(&gt, &pred, &m).unwrap();
                    let after = kind.evaluate(&gt2, &pred2, &m).unwrap();
                    assert!((before - after).abs() < 1e-9, "{kind}");
                }
            }
        }
    }

    #[test]
    fn metric_kind_parsing() {
        assert_eq!("add-h".parse::<MetricKind>().unwrap(), MetricKind::AddH);
        assert_eq!("ADD_S".parse::<MetricKind>().unwrap(), MetricKind::AddS);
        assert_eq!("MeanSSD".parse::<MetricKind>().unwrap(), MetricKind::MeanSsd);
        assert!("vsd".parse::<MetricKind>().is_err());
    }
}
