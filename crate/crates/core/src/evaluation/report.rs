use super::{
    curve_from_errors, default_curve_thresholds_cm, CurvePoint, EvaluationError, GroundTruthInstance, MatchSet,
    ModelSet, PairErrors, Prediction,
};
use crate::metrics::{MetricKind, SampledModel};
use crate::symmetry::SymmetryClass;
use serde::Serialize;
use std::collections::BTreeMap;

/// Tight threshold (≈ graspable), meters.
pub const TIGHT_THRESHOLD: f64 = 0.02;
/// Loose threshold, also used to pick true positives for the median error.
pub const LOOSE_THRESHOLD: f64 = 0.10;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub curve_thresholds_cm: Vec<f64>,
    pub parallel: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            curve_thresholds_cm: default_curve_thresholds_cm(),
            parallel: false,
        }
    }
}

/// One line of the results table. Lengths in centimeters, rates in percent.
/// `None` marks an undefined cell (e.g. precision with zero predictions).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub label: String,
    pub objects: usize,
    pub gt_count: usize,
    pub pred_count: usize,
    pub diameter_cm: Option<f64>,
    pub visibility_pct: Option<f64>,
    pub distance_cm: Option<f64>,
    pub median_error_cm: Option<f64>,
    pub precision_2cm: Option<f64>,
    pub precision_10cm: Option<f64>,
    pub recall_2cm: Option<f64>,
    pub recall_10cm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub metric: MetricKind,
    pub per_object: Vec<ReportRow>,
    /// Equal-weight means of the per-object rows of each category.
    pub per_category: Vec<ReportRow>,
    /// Equal-weight mean over all objects.
    pub mean: ReportRow,
    /// Instance-level statistics over everything.
    pub pooled: ReportRow,
    pub curve: Vec<CurvePoint>,
    pub category_curves: BTreeMap<String, Vec<CurvePoint>>,
}

pub fn category_of(model: &SampledModel) -> SymmetryClass {
    model.symmetries().class()
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

fn mean_of(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn pct(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

struct Tally<'a> {
    tight: &'a MatchSet,
    loose: &'a MatchSet,
}

impl Tally<'_> {
    fn row(
        &self,
        label: String,
        objects: usize,
        diameter_cm: Option<f64>,
        gts: &[GroundTruthInstance],
        preds: &[Prediction],
        include: impl Fn(u32) -> bool,
    ) -> ReportRow {
        let gt_count = gts.iter().filter(|g| include(g.object_id)).count();
        let pred_count = preds.iter().filter(|p| include(p.object_id)).count();
        let tp = |m: &MatchSet| m.matched.iter().filter(|x| include(gts[x.gt].object_id)).count();
        let loose_errors: Vec<f64> = self
            .loose
            .matched
            .iter()
            .filter(|x| include(gts[x.gt].object_id))
            .map(|x| 100.0 * x.error)
            .collect();
        ReportRow {
            label,
            objects,
            gt_count,
            pred_count,
            diameter_cm,
            visibility_pct: mean_of(
                gts.iter()
                    .filter(|g| include(g.object_id))
                    .filter_map(|g| g.visibility.map(|v| 100.0 * v)),
            ),
            distance_cm: mean_of(
                gts.iter()
                    .filter(|g| include(g.object_id))
                    .map(|g| 100.0 * g.pose.translation.norm()),
            ),
            median_error_cm: median(loose_errors),
            precision_2cm: pct(tp(self.tight), pred_count),
            precision_10cm: pct(tp(self.loose), pred_count),
            recall_2cm: pct(tp(self.tight), gt_count),
            recall_10cm: pct(tp(self.loose), gt_count),
        }
    }
}

fn average_rows(label: String, rows: &[&ReportRow]) -> ReportRow {
    let avg = |f: fn(&ReportRow) -> Option<f64>| mean_of(rows.iter().filter_map(|r| f(r)));
    ReportRow {
        label,
        objects: rows.len(),
        gt_count: rows.iter().map(|r| r.gt_count).sum(),
        pred_count: rows.iter().map(|r| r.pred_count).sum(),
        diameter_cm: avg(|r| r.diameter_cm),
        visibility_pct: avg(|r| r.visibility_pct),
        distance_cm: avg(|r| r.distance_cm),
        median_error_cm: avg(|r| r.median_error_cm),
        precision_2cm: avg(|r| r.precision_2cm),
        precision_10cm: avg(|r| r.precision_10cm),
        recall_2cm: avg(|r| r.recall_2cm),
        recall_10cm: avg(|r| r.recall_10cm),
    }
}

/// Builds the per-object / per-category results table and the detection
/// curves. Rows exist for every object with at least one GT instance.
pub fn build_report(
    gts: &[GroundTruthInstance],
    preds: &[Prediction],
    metric: MetricKind,
    models: &ModelSet,
    options: &EvalOptions,
) -> Result<EvalReport, EvaluationError> {
    if gts.is_empty() {
        return Err(EvaluationError::EmptyGroundTruth);
    }
    let errors = PairErrors::compute(gts, preds, metric, models, options.parallel)?;
    let tight = errors.match_at(TIGHT_THRESHOLD);
    let loose = errors.match_at(LOOSE_THRESHOLD);
    let tally = Tally {
        tight: &tight,
        loose: &loose,
    };

    let mut object_ids: Vec<u32> = gts.iter().map(|g| g.object_id).collect();
    object_ids.sort_unstable();
    object_ids.dedup();

    let per_object: Vec<ReportRow> = object_ids
        .iter()
        .map(|&id| {
            tally.row(
                id.to_string(),
                1,
                Some(100.0 * models[&id].diameter()),
                gts,
                preds,
                |o| o == id,
            )
        })
        .collect();

    let mut by_category: BTreeMap<SymmetryClass, Vec<&ReportRow>> = BTreeMap::new();
    for (row, id) in per_object.iter().zip(&object_ids) {
        by_category.entry(category_of(&models[id])).or_default().push(row);
    }
    let per_category = by_category
        .iter()
        .map(|(class, rows)| average_rows(class.name().to_string(), rows))
        .collect();
    let mean = average_rows("mean".into(), &per_object.iter().collect::<Vec<_>>());
    let pooled = tally.row("pooled".into(), object_ids.len(), None, gts, preds, |_| true);

    let curve = curve_from_errors(&errors, &options.curve_thresholds_cm, |_| true)?;
    let mut category_curves = BTreeMap::new();
    for class in by_category.keys() {
        let c = curve_from_errors(&errors, &options.curve_thresholds_cm, |g| {
            category_of(&models[&gts[g].object_id]) == *class
        })?;
        category_curves.insert(class.name().to_string(), c);
    }

    Ok(EvalReport {
        metric,
        per_object,
        per_category,
        mean,
        pooled,
        curve,
        category_curves,
    })
}

impl EvalReport {
    pub fn rows(&self) -> impl Iterator<Item = (&'static str, &ReportRow)> {
        self.per_object
            .iter()
            .map(|r| ("object", r))
            .chain(self.per_category.iter().map(|r| ("category", r)))
            .chain([("mean", &self.mean), ("pooled", &self.pooled)])
    }
}
