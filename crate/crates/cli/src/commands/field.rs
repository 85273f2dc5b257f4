use super::{load_one_model, Ctx};
use crate::cli::{CalibrateArgs, RefineArgs, ValidateArgs};
use crate::output::{deliver, num, write_atomic, CsvOut};
use crate::{CmdResult, Failure};
use anyhow::anyhow;
use poseval_core::fieldcal::{
    cross_view_validate, fit_depth_scale, fit_nakagami, refine_depth_ls, LineSearchConfig, NakagamiFit, PixelMask,
};
use poseval_core::geometry::RobustConfig;
use poseval_core::io::{
    load_models, read_camera, read_depth_pairs, read_depth_raw, read_object_poses, read_pose, PoseRecord,
};
use serde::Serialize;

pub fn calibrate_depth(ctx: &Ctx, args: &CalibrateArgs) -> CmdResult {
    let (reference, measured) = read_depth_pairs(&args.pairs)?;
    let cal = fit_depth_scale(&reference, &measured)?;
    println!("scale {}", cal.scale);
    println!("pairs {}", cal.sample_count);
    println!("mae_before_mm {:.3}", cal.mae_before * 1000.0);
    println!("mae_after_mm {:.3}", cal.mae_after * 1000.0);
    if let Some(path) = &args.out {
        write_atomic(
            path,
            ctx.meta("calibrate-depth", args).json("calibration", &cal)?.as_bytes(),
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Refined {
    alpha: f64,
    objective_mm: f64,
    compared_points: usize,
    pose: PoseRecord,
}

pub fn refine_ls(ctx: &Ctx, args: &RefineArgs) -> CmdResult {
    let pose = read_pose(&args.pose)?;
    let model = load_one_model(&args.model)?;
    let cam = read_camera(&args.camera)?;
    let (w, h) = (cam.width as usize, cam.height as usize);
    let depth = read_depth_raw(&args.depth, w, h)?;
    let mask = match &args.mask {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|e| Failure::input(anyhow!("{}: {e}", path.display())))?;
            if bytes.len() != w * h {
                return Err(Failure::input(anyhow!(
                    "{}: mask has {} bytes, camera is {w}x{h}",
                    path.display(),
                    bytes.len()
                )));
            }
            Some(PixelMask::new(w, h, bytes.iter().map(|&b| b != 0).collect())?)
        }
        None => None,
    };
    let config = LineSearchConfig {
        alpha_min: args.alpha_min,
        alpha_max: args.alpha_max,
        steps: args.steps,
        ..Default::default()
    };
    let r = refine_depth_ls(&pose, &model, &cam, &depth, mask.as_ref(), &config)?;
    println!("alpha {}", r.alpha);
    println!("objective_mm {:.3}", r.objective * 1000.0);
    println!("compared_points {}", r.compared_points);
    if let Some(path) = &args.out {
        let refined = Refined {
            alpha: r.alpha,
            objective_mm: r.objective * 1000.0,
            compared_points: r.compared_points,
            pose: PoseRecord::from_pose(args.model.obj_id, &r.pose),
        };
        write_atomic(path, ctx.meta("refine-ls", args).json("result", &refined)?.as_bytes())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ValidationSummary {
    objects: usize,
    mean_add_mm: f64,
    median_add_mm: f64,
    /// Fitted on errors in centimeters; absent when the fit is undefined.
    nakagami_cm: Option<NakagamiFit>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn validate_views(ctx: &Ctx, args: &ValidateArgs) -> CmdResult {
    let a = read_object_poses(&args.a)?;
    let b = read_object_poses(&args.b)?;
    let models = load_models(&args.models, args.samples)?;
    let results = cross_view_validate(&a, &b, &models, &RobustConfig::with_trim(args.trim))?;

    let meta = ctx.meta("validate-views", args);
    let mut table = CsvOut::new(&meta, &["object_id", "add_mm", "inliers", "correspondences"])?;
    for r in &results {
        table.row([
            r.object_id.to_string(),
            num(r.add_error * 1000.0),
            r.inliers.iter().filter(|&&x| x).count().to_string(),
            r.inliers.len().to_string(),
        ])?;
    }
    deliver(args.out.as_deref(), &table.finish()?)?;

    let errors_mm: Vec<f64> = results.iter().map(|r| r.add_error * 1000.0).collect();
    let errors_cm: Vec<f64> = errors_mm.iter().map(|e| e / 10.0).collect();
    let fit = fit_nakagami(&errors_cm);
    let summary = ValidationSummary {
        objects: results.len(),
        mean_add_mm: errors_mm.iter().sum::<f64>() / errors_mm.len() as f64,
        median_add_mm: median(errors_mm),
        nakagami_cm: fit.as_ref().ok().copied(),
    };
    eprintln!(
        "mean ADD {:.2} mm, median {:.2} mm",
        summary.mean_add_mm, summary.median_add_mm
    );
    match &fit {
        Ok(f) => eprintln!(
            "nakagami (cm): m={:.3} omega={:.3} mean={:.3} mode={:.3}",
            f.m, f.omega, f.sample_mean, f.mode
        ),
        Err(e) => eprintln!("nakagami fit unavailable: {e}"),
    }
    if let Some(path) = &args.fit_out {
        write_atomic(path, meta.json("summary", &summary)?.as_bytes())?;
    }
    Ok(())
}
