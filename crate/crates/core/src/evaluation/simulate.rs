//! Metric comparison under controlled pose perturbations.
//!
//! Each object starts at the identity pose. Per trial it is rotated (by a
//! symmetry of the object, a uniform random rotation, or not at all) and then
//! pushed along a random unit direction in fixed translation steps. Every
//! metric is evaluated at every step.

use super::EvaluationError;
use crate::geometry::{random_rotation_with, random_unit_vector, Pose, Rotation, Vec3};
use crate::metrics::{MetricKind, SampledModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;

pub const SIMULATED_METRICS: [MetricKind; 4] =
    [MetricKind::Add, MetricKind::AddS, MetricKind::MeanSsd, MetricKind::AddH];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationMode {
    /// A uniformly drawn member of the object's symmetry set.
    SymmetryPreserving,
    /// A uniform rotation on SO(3).
    Arbitrary,
    /// No rotation; translation only.
    Identity,
}

impl RotationMode {
    pub fn name(&self) -> &'static str {
        match self {
            RotationMode::SymmetryPreserving => "symmetry_preserving",
            RotationMode::Arbitrary => "arbitrary",
            RotationMode::Identity => "identity",
        }
    }
}

impl fmt::Display for RotationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for RotationMode {
    type Err = EvaluationError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").to_ascii_lowercase().as_str() {
            "symmetry_preserving" | "symmetric" => Ok(RotationMode::SymmetryPreserving),
            "arbitrary" | "random" => Ok(RotationMode::Arbitrary),
            "identity" | "none" => Ok(RotationMode::Identity),
            _ => Err(EvaluationError::InvalidConfig(format!("unknown rotation mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub max_translation_cm: f64,
    pub step_cm: f64,
    pub trials: usize,
    pub rotation_mode: RotationMode,
    pub seed: u64,
    pub parallel: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            max_translation_cm: 10.0,
            step_cm: 1.0,
            trials: 5,
            rotation_mode: RotationMode::SymmetryPreserving,
            seed: 0,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationRow {
    pub mode: RotationMode,
    pub metric: MetricKind,
    pub step_cm: f64,
    pub mean_cm: f64,
    /// Sample standard deviation across trials × objects.
    pub std_cm: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationTable {
    pub rows: Vec<SimulationRow>,
}

impl SimulationTable {
    pub fn get(&self, metric: MetricKind, step_cm: f64) -> Option<&SimulationRow> {
        self.rows
            .iter()
            .find(|r| r.metric == metric && (r.step_cm - step_cm).abs() < 1e-9)
    }

    pub fn steps_cm(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.rows.iter().map(|r| r.step_cm).collect();
        s.dedup();
        s
    }
}

struct Draw {
    model: usize,
    rotation: Rotation,
    direction: Vec3,
}

pub fn simulate_metric_comparison(
    models: &[SampledModel],
    config: &SimulationConfig,
) -> Result<SimulationTable, EvaluationError> {
    if models.is_empty() {
        return Err(EvaluationError::NoModels);
    }
    if !(config.step_cm > 0.0 && config.max_translation_cm >= 0.0 && config.step_cm.is_finite()) {
        return Err(EvaluationError::InvalidConfig("step and range must be positive".into()));
    }
    if config.trials == 0 {
        return Err(EvaluationError::InvalidConfig("trials must be >= 1".into()));
    }
    let n_steps = (config.max_translation_cm / config.step_cm + 1e-9).floor() as usize + 1;
    let steps_cm: Vec<f64> = (0..n_steps).map(|k| k as f64 * config.step_cm).collect();

    // all randomness is drawn up front so evaluation order cannot matter
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut draws = Vec::with_capacity(config.trials * models.len());
    for _ in 0..config.trials {
        for (m, model) in models.iter().enumerate() {
            let rotation = match config.rotation_mode {
                RotationMode::SymmetryPreserving => {
                    let set = model.symmetries().rotations();
                    set[rng.random_range(0..set.len())]
                }
                RotationMode::Arbitrary => random_rotation_with(&mut rng),
                RotationMode::Identity => Rotation::identity(),
            };
            let direction = random_unit_vector(&mut rng);
            draws.push(Draw {
                model: m,
                rotation,
                direction,
            });
        }
    }

    let evaluate = |draw: &Draw| -> Result<Vec<[f64; 4]>, EvaluationError> {
        let model = &models[draw.model];
        let gt = Pose::identity();
        steps_cm
            .iter()
            .map(|&cm| {
                let pred = Pose {
                    rotation: draw.rotation,
                    translation: draw.direction * (cm / 100.0),
                };
                let mut out = [0.0; 4];
                for (slot, metric) in out.iter_mut().zip(SIMULATED_METRICS) {
                    *slot = metric.evaluate(&gt, &pred, model)?;
                }
                Ok(out)
            })
            .collect()
    };
    let values: Vec<Vec<[f64; 4]>> = if config.parallel {
        draws.par_iter().map(evaluate).collect::<Result<_, _>>()?
    } else {
        draws.iter().map(evaluate).collect::<Result<_, _>>()?
    };

    let mut rows = Vec::new();
    for (k, &cm) in steps_cm.iter().enumerate() {
        for (mi, metric) in SIMULATED_METRICS.iter().enumerate() {
            let xs: Vec<f64> = values.iter().map(|v| 100.0 * v[k][mi]).collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let std = if xs.len() > 1 {
                (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            rows.push(SimulationRow {
                mode: config.rotation_mode,
                metric: *metric,
                step_cm: cm,
                mean_cm: mean,
                std_cm: std,
                samples: xs.len(),
            });
        }
    }
    Ok(SimulationTable { rows })
}
