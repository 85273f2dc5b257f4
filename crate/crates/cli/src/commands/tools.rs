use super::{load_one_model, parse_metric, Ctx};
use crate::cli::{LapArgs, MetricArgs, SampleMeshArgs, SymmetriesArgs};
use crate::output::{deliver, num, write_atomic, CsvOut};
use crate::{CmdResult, Failure};
use anyhow::anyhow;
use poseval_core::assignment::{solve_lap, CostMatrix};
use poseval_core::io::{load_mesh, read_cost_matrix, read_pose};
use poseval_core::metrics::{correspondence_map, subsample};
use poseval_core::symmetry::{generate_symmetries, SymmetryClass};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::time::Instant;

pub fn lap(ctx: &Ctx, args: &LapArgs) -> CmdResult {
    if let Some(path) = &args.matrix {
        let cost = read_cost_matrix(path)?;
        let a = solve_lap(&cost);
        let perm: Vec<String> = a.permutation.iter().map(|c| c.to_string()).collect();
        println!("cost {}", a.total_cost);
        println!("permutation {}", perm.join(" "));
        return Ok(());
    }
    let n = args.bench.expect("clap enforces --matrix or --bench");
    if n == 0 || args.repeat == 0 {
        return Err(Failure::input(anyhow!("--bench and --repeat must be positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut times = Vec::with_capacity(args.repeat);
    for _ in 0..args.repeat {
        let cost = CostMatrix::from_fn(n, |_, _| rng.random::<f64>())?;
        let start = Instant::now();
        let a = solve_lap(&cost);
        times.push(start.elapsed().as_secs_f64() * 1000.0);
        std::hint::black_box(a);
    }
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    let max = times.iter().copied().fold(0.0, f64::max);
    println!("n {n} repeat {} mean_ms {mean:.3} max_ms {max:.3}", args.repeat);
    Ok(())
}

#[derive(Serialize)]
struct SymmetryDump {
    class: SymmetryClass,
    increment_deg: f64,
    rotations: Vec<[f64; 9]>,
}

pub fn symmetries(ctx: &Ctx, args: &SymmetriesArgs) -> CmdResult {
    let class: SymmetryClass = args.class.parse()?;
    let set = generate_symmetries(class, args.increment)?;
    let rotations: Vec<[f64; 9]> = set
        .rotations()
        .iter()
        .map(|r| r.to_row_major().map(|v| v + 0.0))
        .collect();
    match &args.out {
        Some(path) => {
            let dump = SymmetryDump {
                class,
                increment_deg: args.increment,
                rotations,
            };
            write_atomic(path, ctx.meta("symmetries", args).json("symmetries", &dump)?.as_bytes())?;
        }
        None => println!("{}", serde_json::to_string(&rotations)?),
    }
    Ok(())
}

pub fn sample_mesh(ctx: &Ctx, args: &SampleMeshArgs) -> CmdResult {
    let mesh = load_mesh(&args.mesh)?;
    let indices = subsample(&mesh, args.k);
    match &args.out {
        Some(path) => {
            let mut out = CsvOut::new(&ctx.meta("sample-mesh", args), &["index", "x_mm", "y_mm", "z_mm"])?;
            for &i in &indices {
                let p = mesh[i] * 1000.0;
                out.row([i.to_string(), num(p.x), num(p.y), num(p.z)])?;
            }
            write_atomic(path, &out.finish()?)?;
        }
        None => {
            let text: String = indices.iter().map(|i| format!("{i}\n")).collect();
            deliver(None, text.as_bytes())?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct MetricValue {
    metric: String,
    error_cm: f64,
}

pub fn metric(ctx: &Ctx, args: &MetricArgs) -> CmdResult {
    let kind = parse_metric(&args.kind)?;
    let gt = read_pose(&args.gt)?;
    let pred = read_pose(&args.pred)?;
    let model = load_one_model(&args.model)?;
    let error_cm = kind.evaluate(&gt, &pred, &model)? * 100.0;
    println!("{kind} {error_cm} cm");
    if let Some(path) = &args.out {
        let value = MetricValue {
            metric: kind.to_string(),
            error_cm,
        };
        write_atomic(path, ctx.meta("metric", args).json("result", &value)?.as_bytes())?;
    }
    Ok(())
}

pub fn assignments(ctx: &Ctx, args: &MetricArgs) -> CmdResult {
    let kind = parse_metric(&args.kind)?;
    let gt = read_pose(&args.gt)?;
    let pred = read_pose(&args.pred)?;
    let model = load_one_model(&args.model)?;
    let map = correspondence_map(kind, &gt, &pred, &model)?;
    let vertex = model.sample_indices();
    let mut out = CsvOut::new(
        &ctx.meta("assignments", args),
        &["gt_index", "pred_index", "gt_vertex", "pred_vertex", "distance_cm"],
    )?;
    for (&(g, p), d) in map.pairs.iter().zip(&map.distances) {
        out.row([
            g.to_string(),
            p.to_string(),
            vertex[g].to_string(),
            vertex[p].to_string(),
            num(d * 100.0),
        ])?;
    }
    deliver(args.out.as_deref(), &out.finish()?)?;
    if let Some(s) = map.chosen_symmetry {
        eprintln!("symmetry element {s}");
    }
    eprintln!("{kind} {} cm", map.mean_distance() * 100.0);
    Ok(())
}
