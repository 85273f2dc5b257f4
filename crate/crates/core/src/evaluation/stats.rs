use super::{GroundTruthInstance, ModelSet};
use serde::Serialize;
use std::collections::BTreeMap;

/// Ground-truth pose statistics for one object (or all of them).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectStats {
    pub label: String,
    pub instances: usize,
    pub diameter_cm: Option<f64>,
    pub mean_distance_cm: f64,
    pub min_distance_cm: f64,
    pub max_distance_cm: f64,
    pub visibility_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub objects: Vec<ObjectStats>,
    pub overall: Option<ObjectStats>,
}

fn summarize<'a>(
    label: String,
    diameter_cm: Option<f64>,
    gts: impl Iterator<Item = &'a GroundTruthInstance>,
) -> Option<ObjectStats> {
    let mut n = 0usize;
    let (mut sum, mut min, mut max) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
    let (mut vis_sum, mut vis_n) = (0.0, 0usize);
    for g in gts {
        let d = 100.0 * g.pose.translation.norm();
        n += 1;
        sum += d;
        min = min.min(d);
        max = max.max(d);
        if let Some(v) = g.visibility {
            vis_sum += 100.0 * v;
            vis_n += 1;
        }
    }
    (n > 0).then(|| ObjectStats {
        label,
        instances: n,
        diameter_cm,
        mean_distance_cm: sum / n as f64,
        min_distance_cm: min,
        max_distance_cm: max,
        visibility_pct: (vis_n > 0).then(|| vis_sum / vis_n as f64),
    })
}

/// Camera distance is `‖t‖`; visibility is echoed from the input when given.
pub fn dataset_stats(gts: &[GroundTruthInstance], models: &ModelSet) -> DatasetStats {
    let mut by_object: BTreeMap<u32, Vec<&GroundTruthInstance>> = BTreeMap::new();
    for g in gts {
        by_object.entry(g.object_id).or_default().push(g);
    }
    let objects = by_object
        .iter()
        .filter_map(|(id, list)| {
            let diameter = models.get(id).map(|m| 100.0 * m.diameter());
            summarize(id.to_string(), diameter, list.iter().copied())
        })
        .collect();
    DatasetStats {
        objects,
        overall: summarize("all".into(), None, gts.iter()),
    }
}
