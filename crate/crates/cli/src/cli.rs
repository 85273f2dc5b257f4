use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::path::PathBuf;

const FORMATS: &str = "\
File formats (lengths in files are millimeters unless a column says otherwise):
  ground truth   BOP split dir with NNNNNN/scene_gt.json, a single scene dir, or one
                 scene_gt.json: {\"<im_id>\": [{\"obj_id\", \"cam_R_m2c\": [9 row-major],
                 \"cam_t_m2c\": [3], \"visib_fract\"?, \"tag\"?}]}. A scene_gt_info.json
                 next to it supplies visib_fract when records lack it.
  predictions    CSV with header scene_id,im_id,obj_id,score,R,t,time; R is 9 and t
                 is 3 space-separated reals; time < 0 means unknown.
  models config  JSON {\"<obj_id>\": {\"mesh\": path, \"symmetry\": cylinder|cuboid|
                 bottle|none, \"increment_deg\"?, \"reorient\"?: [9 row-major, mesh ->
                 canonical]}}. Mesh paths are relative to the config file.
  mesh           ASCII OBJ (v lines) or ASCII / binary little-endian PLY.
  pose           JSON {\"cam_R_m2c\": [9], \"cam_t_m2c\": [3]}; a view is a list of such
                 records with \"obj_id\".
  camera         JSON {\"fx\", \"fy\", \"cx\", \"cy\", \"width\", \"height\"} in pixels.
  depth          raw little-endian u16 grid, row-major, millimeters, 0 = invalid.
  mask           raw u8 grid, row-major, nonzero = inside.
  cost matrix    comma-separated square matrix, one row per line, # comments.

Every file written with --out starts with a metadata header (tool version, seed,
SHA-256 of the run configuration): '#' comment lines for CSV, a \"meta\" object
for JSON. Reruns with the same configuration produce byte-identical files.

Exit codes: 0 success, 2 input error (unreadable or malformed input, bad
options), 3 semantic error (e.g. a missing model, too few objects).";

#[derive(Debug, Parser)]
#[command(name = "poseval", version, about = "Symmetry-aware 6-DoF pose evaluation", after_long_help = FORMATS)]
pub struct Cli {
    /// Worker threads; 0 uses all cores. Never changes numeric output.
    #[arg(long, global = true, env = "POSEVAL_JOBS", default_value_t = 0)]
    pub jobs: usize,

    /// Seed for every random draw; recorded in output headers.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Match predictions to ground truth and write the results table.
    Eval(EvalArgs),
    /// Recall against the absolute error threshold.
    Curve(CurveArgs),
    /// Compare metrics under controlled translations and rotations.
    Simulate(SimulateArgs),
    /// Fit a depth-sensor scale factor from paired depths.
    CalibrateDepth(CalibrateArgs),
    /// Rescale a predicted translation by a line search against depth.
    RefineLs(RefineArgs),
    /// Leave-one-out consistency of two annotated views.
    ValidateViews(ValidateArgs),
    /// Solve a linear sum assignment problem or time random instances.
    Lap(LapArgs),
    /// Print the symmetry set of a category.
    Symmetries(SymmetriesArgs),
    /// Farthest-point subsample of a mesh's vertices.
    SampleMesh(SampleMeshArgs),
    /// Error between two poses under one metric, in centimeters.
    Metric(MetricArgs),
    /// Point correspondences chosen by a metric, for visualization.
    Assignments(MetricArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    /// Ground-truth directory or scene_gt.json.
    #[arg(long)]
    pub gt: PathBuf,
    /// Predictions CSV.
    #[arg(long)]
    pub preds: PathBuf,
    /// Models config JSON.
    #[arg(long)]
    pub models: PathBuf,
    /// Error metric: add, add-s, mean-ssd, mssd, add-h.
    #[arg(long, default_value = "add-h")]
    pub metric: String,
    /// Model points kept per object.
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    /// Only evaluate images whose ground truth carries this tag.
    #[arg(long)]
    pub tag: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Output directory for report.json, report.csv and curve.csv.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CurveArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated thresholds in cm [default: 0.5 to 10 in 0.1 steps].
    #[arg(long, value_delimiter = ',')]
    pub thresholds_cm: Option<Vec<f64>>,
    /// Output CSV (threshold_cm,recall); stdout when absent.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Models config JSON.
    #[arg(long)]
    pub models: PathBuf,
    /// Model points kept per object.
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    #[arg(long, default_value_t = 5)]
    pub trials: usize,
    #[arg(long, default_value_t = 10.0)]
    pub max_cm: f64,
    #[arg(long, default_value_t = 1.0)]
    pub step_cm: f64,
    /// Rotation modes: symmetry-preserving, arbitrary, identity.
    #[arg(long, value_delimiter = ',', default_value = "symmetry-preserving,arbitrary")]
    pub modes: Vec<String>,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CalibrateArgs {
    /// CSV with columns reference_m,measured_m.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Output JSON; stdout summary only when absent.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ModelArgs {
    /// Models config JSON (with --obj-id).
    #[arg(long, requires = "obj_id", conflicts_with = "mesh")]
    pub models: Option<PathBuf>,
    #[arg(long)]
    pub obj_id: Option<u32>,
    /// Mesh file (alternative to --models).
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Symmetry class for --mesh.
    #[arg(long, default_value = "none")]
    pub symmetry: String,
    /// Cylinder sweep increment in degrees for --mesh.
    #[arg(long, default_value_t = 1.0)]
    pub increment: f64,
    /// Model points kept.
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct RefineArgs {
    /// Predicted pose JSON.
    #[arg(long)]
    pub pose: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Camera intrinsics JSON.
    #[arg(long)]
    pub camera: PathBuf,
    /// Raw u16 depth (mm), sized by the camera's width and height.
    #[arg(long)]
    pub depth: PathBuf,
    /// Optional raw u8 mask of the same size.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long, default_value_t = 0.7)]
    pub alpha_min: f64,
    #[arg(long, default_value_t = 1.3)]
    pub alpha_max: f64,
    #[arg(long, default_value_t = 121)]
    pub steps: usize,
    /// Output pose JSON; stdout summary only when absent.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ValidateArgs {
    /// View A poses (list of records with obj_id).
    #[arg(long)]
    pub a: PathBuf,
    /// View B poses.
    #[arg(long)]
    pub b: PathBuf,
    /// Models config JSON.
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    /// Maximum fraction of correspondences the robust fit may drop.
    #[arg(long, default_value_t = 0.2)]
    pub trim: f64,
    /// Output CSV of per-object errors; stdout when absent.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Output JSON with the error summary and Nakagami fit.
    #[arg(long)]
    #[serde(skip)]
    pub fit_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct LapArgs {
    /// Cost matrix CSV.
    #[arg(long, conflicts_with = "bench", required_unless_present = "bench")]
    pub matrix: Option<PathBuf>,
    /// Time random n×n instances instead (uniform costs in [0, 1)).
    #[arg(long)]
    pub bench: Option<usize>,
    /// Instances to time with --bench.
    #[arg(long, default_value_t = 5)]
    pub repeat: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SymmetriesArgs {
    /// cylinder, cuboid, bottle or none.
    #[arg(long)]
    pub class: String,
    /// Cylinder sweep increment in degrees.
    #[arg(long, default_value_t = 1.0)]
    pub increment: f64,
    /// Output JSON; stdout (a bare list of row-major matrices) when absent.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SampleMeshArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    /// Number of points to keep.
    #[arg(short, long, default_value_t = 500)]
    pub k: usize,
    /// Output CSV (index,x_mm,y_mm,z_mm); stdout indices when absent.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct MetricArgs {
    /// add, add-s, mean-ssd, mssd, add-h.
    #[arg(long, default_value = "add-h")]
    pub kind: String,
    /// Ground-truth pose JSON.
    #[arg(long)]
    pub gt: PathBuf,
    /// Predicted pose JSON.
    #[arg(long)]
    pub pred: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output file (CSV for assignments, JSON for metric); stdout when absent.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}
