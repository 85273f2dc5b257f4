use super::{parse_metric, Ctx};
use crate::cli::{CurveArgs, DataArgs, EvalArgs, SimulateArgs};
use crate::output::{deliver, num, opt, write_atomic, CsvOut};
use crate::{CmdResult, Failure};
use poseval_core::evaluation::{
    build_report, default_curve_thresholds_cm, detection_curve, filter_by_tag, simulate_metric_comparison, EvalOptions,
    EvaluationError, GroundTruthInstance, ModelSet, Prediction, ReportRow, RotationMode, SimulationConfig,
};
use poseval_core::io::{load_ground_truth, load_models, load_predictions};
use poseval_core::metrics::{MetricKind, SampledModel};

fn load_data(args: &DataArgs) -> Result<(Vec<GroundTruthInstance>, Vec<Prediction>, ModelSet), Failure> {
    let gts = load_ground_truth(&args.gt)?;
    let preds = load_predictions(&args.preds)?;
    let models = load_models(&args.models, args.samples)?;
    Ok(match &args.tag {
        Some(tag) => {
            let (g, p) = filter_by_tag(&gts, &preds, tag);
            (g, p, models)
        }
        None => (gts, preds, models),
    })
}

const REPORT_COLUMNS: [&str; 13] = [
    "row",
    "label",
    "objects",
    "gt_count",
    "pred_count",
    "diameter_cm",
    "visibility_pct",
    "distance_cm",
    "median_error_cm",
    "precision_2cm",
    "precision_10cm",
    "recall_2cm",
    "recall_10cm",
];

fn report_fields(kind: &str, r: &ReportRow) -> Vec<String> {
    vec![
        kind.to_string(),
        r.label.clone(),
        r.objects.to_string(),
        r.gt_count.to_string(),
        r.pred_count.to_string(),
        opt(r.diameter_cm),
        opt(r.visibility_pct),
        opt(r.distance_cm),
        opt(r.median_error_cm),
        opt(r.precision_2cm),
        opt(r.precision_10cm),
        opt(r.recall_2cm),
        opt(r.recall_10cm),
    ]
}

fn print_table(metric: MetricKind, rows: &[(&str, &ReportRow)]) {
    let cell = |x: Option<f64>| x.map(|v| format!("{v:.1}")).unwrap_or_else(|| "-".into());
    let w = rows.iter().map(|(_, r)| r.label.len()).max().unwrap_or(0).max(6);
    println!("metric: {metric} (rates in %, median in cm)");
    println!(
        "{:<w$} {:>5} {:>5} {:>6} {:>6} {:>6} {:>6} {:>6}",
        "", "GT", "pred", "P@2", "P@10", "R@2", "R@10", "median"
    );
    for (_, r) in rows {
        println!(
            "{:<w$} {:>5} {:>5} {:>6} {:>6} {:>6} {:>6} {:>6}",
            r.label,
            r.gt_count,
            r.pred_count,
            cell(r.precision_2cm),
            cell(r.precision_10cm),
            cell(r.recall_2cm),
            cell(r.recall_10cm),
            cell(r.median_error_cm),
        );
    }
}

pub fn eval(ctx: &Ctx, args: &EvalArgs) -> CmdResult {
    let metric = parse_metric(&args.data.metric)?;
    let (gts, preds, models) = load_data(&args.data)?;
    let options = EvalOptions {
        parallel: ctx.parallel,
        ..Default::default()
    };
    let report = build_report(&gts, &preds, metric, &models, &options)?;
    let rows: Vec<(&str, &ReportRow)> = report.rows().collect();
    print_table(metric, &rows);

    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        let meta = ctx.meta("eval", args);
        let mut table = CsvOut::new(&meta, &REPORT_COLUMNS)?;
        for (kind, r) in &rows {
            table.row(report_fields(kind, r))?;
        }
        let mut curve = CsvOut::new(&meta, &["group", "threshold_cm", "recall"])?;
        let groups =
            std::iter::once(("all", &report.curve)).chain(report.category_curves.iter().map(|(k, v)| (k.as_str(), v)));
        for (group, points) in groups {
            for p in points {
                curve.row([group.to_string(), num(p.threshold_cm), num(p.recall)])?;
            }
        }
        // all outputs are rendered before any file is touched
        let files = [
            ("report.json", meta.json("report", &report)?.into_bytes()),
            ("report.csv", table.finish()?),
            ("curve.csv", curve.finish()?),
        ];
        for (name, bytes) in files {
            write_atomic(&dir.join(name), &bytes)?;
        }
    }
    Ok(())
}

pub fn curve(ctx: &Ctx, args: &CurveArgs) -> CmdResult {
    let metric = parse_metric(&args.data.metric)?;
    let (gts, preds, models) = load_data(&args.data)?;
    let thresholds = args.thresholds_cm.clone().unwrap_or_else(default_curve_thresholds_cm);
    let points = detection_curve(&gts, &preds, metric, &models, &thresholds)?;
    let mut out = CsvOut::new(&ctx.meta("curve", args), &["threshold_cm", "recall"])?;
    for p in &points {
        out.row([num(p.threshold_cm), num(p.recall)])?;
    }
    deliver(args.out.as_deref(), &out.finish()?)?;
    Ok(())
}

pub fn simulate(ctx: &Ctx, args: &SimulateArgs) -> CmdResult {
    let modes: Vec<RotationMode> = args
        .modes
        .iter()
        .map(|m| m.parse::<RotationMode>())
        .collect::<Result<_, EvaluationError>>()?;
    let models: Vec<SampledModel> = load_models(&args.models, args.samples)?.into_values().collect();
    let mut out = CsvOut::new(
        &ctx.meta("simulate", args),
        &["mode", "metric", "step_cm", "mean_cm", "std_cm", "samples"],
    )?;
    for mode in modes {
        let config = SimulationConfig {
            max_translation_cm: args.max_cm,
            step_cm: args.step_cm,
            trials: args.trials,
            rotation_mode: mode,
            seed: ctx.seed,
            parallel: ctx.parallel,
        };
        let table = simulate_metric_comparison(&models, &config)?;
        for r in &table.rows {
            out.row([
                r.mode.to_string(),
                r.metric.to_string(),
                num(r.step_cm),
                num(r.mean_cm),
                num(r.std_cm),
                r.samples.to_string(),
            ])?;
        }
    }
    deliver(args.out.as_deref(), &out.finish()?)?;
    Ok(())
}
