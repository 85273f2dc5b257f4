//! BOP-style file formats.
//!
//! Files carry millimeters; everything returned from here is in meters.
//!
//! | file | shape |
//! |---|---|
//! | `scene_gt.json` | `{"<im_id>": [{"obj_id", "cam_R_m2c": [9], "cam_t_m2c": [3 mm], "visib_fract"?, "tag"?}]}` |
//! | `scene_gt_info.json` | `{"<im_id>": [{"visib_fract"}]}`, aligned with `scene_gt.json` |
//! | predictions CSV | header `scene_id,im_id,obj_id,score,R,t,time`; `R` 9 and `t` 3 space-separated reals (mm) |
//! | models config | `{"<obj_id>": {"mesh", "symmetry", "increment_deg"?, "reorient"?: [9]}}` |
//! | mesh | ASCII OBJ `v` lines or ASCII / binary little-endian PLY, mm |
//! | camera | `{"fx", "fy", "cx", "cy", "width", "height"}` in pixels |
//! | depth | raw little-endian `u16` grid in mm, 0 = invalid |

pub mod mesh;

use crate::assignment::CostMatrix;
use crate::evaluation::{GroundTruthInstance, ModelSet, Prediction};
use crate::geometry::{DepthMap, PinholeCamera, PointSet, Pose, Rotation, Vec3};
use crate::metrics::SampledModel;
use crate::symmetry::{generate_symmetries, SymmetryClass, DEFAULT_INCREMENT_DEG};
use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Rotations read from text are re-orthonormalized within this tolerance.
pub const FILE_ROTATION_TOL: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{}{}: {message}", path.display(), LineSuffix(*line))]
    Parse {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },
}

struct LineSuffix(Option<usize>);

impl fmt::Display for LineSuffix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(l) => write!(f, ":{l}"),
            None => Ok(()),
        }
    }
}

impl IoError {
    fn parse(path: &Path, line: Option<usize>, message: impl Into<String>) -> Self {
        IoError::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(|source| IoError::Read {
        path: path.to_path_buf(),
        source,
    })
}

fn read_text(path: &Path) -> Result<String, IoError> {
    String::from_utf8(read_bytes(path)?).map_err(|_| IoError::parse(path, None, "file is not UTF-8"))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| IoError::parse(path, Some(e.line()), e.to_string()))
}

fn rotation_from_rows(rows: &[f64]) -> Result<Rotation, String> {
    if rows.len() != 9 {
        return Err(format!("rotation needs 9 values, got {}", rows.len()));
    }
    Rotation::from_matrix_lenient(Matrix3::from_row_slice(rows), FILE_ROTATION_TOL).map_err(|e| e.to_string())
}

fn pose_from_mm(rows: &[f64], t_mm: &[f64]) -> Result<Pose, String> {
    if t_mm.len() != 3 {
        return Err(format!("translation needs 3 values, got {}", t_mm.len()));
    }
    let t = Vec3::new(t_mm[0], t_mm[1], t_mm[2]) / 1000.0;
    Pose::new(rotation_from_rows(rows)?, t).map_err(|e| e.to_string())
}

// ---------------------------------------------------------------------------
// poses

/// One BOP pose record. `obj_id` is optional for standalone pose files.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obj_id: Option<u32>,
    pub cam_R_m2c: Vec<f64>,
    pub cam_t_m2c: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visib_fract: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
}

impl PoseRecord {
    pub fn pose(&self) -> Result<Pose, String> {
        pose_from_mm(&self.cam_R_m2c, &self.cam_t_m2c)
    }

    pub fn from_pose(obj_id: Option<u32>, pose: &Pose) -> Self {
        PoseRecord {
            obj_id,
            cam_R_m2c: pose.rotation.to_row_major().to_vec(),
            cam_t_m2c: (pose.translation * 1000.0).iter().copied().collect(),
            visib_fract: None,
            tag: None,
        }
    }
}

/// A single pose record.
pub fn read_pose(path: &Path) -> Result<Pose, IoError> {
    let rec: PoseRecord = read_json(path)?;
    rec.pose().map_err(|m| IoError::parse(path, None, m))
}

/// A list of pose records with object ids, e.g. one annotated view.
pub fn read_object_poses(path: &Path) -> Result<Vec<(u32, Pose)>, IoError> {
    let recs: Vec<PoseRecord> = read_json(path)?;
    recs.iter()
        .enumerate()
        .map(|(i, r)| {
            let id = r
                .obj_id
                .ok_or_else(|| IoError::parse(path, None, format!("record {i}: missing obj_id")))?;
            let pose = r
                .pose()
                .map_err(|m| IoError::parse(path, None, format!("record {i}: {m}")))?;
            Ok((id, pose))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// ground truth

#[derive(Deserialize)]
struct InfoRecord {
    #[serde(default)]
    visib_fract: Option<f64>,
}

/// Parses one `scene_gt.json`, picking up `scene_gt_info.json` next to it
/// for visibility when the records themselves carry none.
pub fn load_scene_gt(path: &Path, scene_id: u32) -> Result<Vec<GroundTruthInstance>, IoError> {
    let raw: BTreeMap<String, Vec<PoseRecord>> = read_json(path)?;
    let info_path = path.with_file_name("scene_gt_info.json");
    let info: BTreeMap<String, Vec<InfoRecord>> = if info_path.is_file() {
        read_json(&info_path)?
    } else {
        BTreeMap::new()
    };
    let mut images: Vec<(u32, &String, &Vec<PoseRecord>)> = raw
        .iter()
        .map(|(k, v)| {
            k.parse::<u32>()
                .map(|id| (id, k, v))
                .map_err(|_| IoError::parse(path, None, format!("image key '{k}' is not an integer")))
        })
        .collect::<Result<_, _>>()?;
    images.sort_by_key(|(id, _, _)| *id);

    let mut out = Vec::new();
    for (image_id, key, records) in images {
        for (i, rec) in records.iter().enumerate() {
            let ctx = |m: String| IoError::parse(path, None, format!("image {image_id}, record {i}: {m}"));
            let object_id = rec.obj_id.ok_or_else(|| ctx("missing obj_id".into()))?;
            let pose = rec.pose().map_err(ctx)?;
            let visibility = rec
                .visib_fract
                .or_else(|| info.get(key).and_then(|v| v.get(i)).and_then(|r| r.visib_fract));
            if let Some(v) = visibility {
                if !(0.0..=1.0).contains(&v) {
                    return Err(ctx(format!("visib_fract {v} outside [0, 1]")));
                }
            }
            out.push(GroundTruthInstance {
                scene_id,
                image_id,
                object_id,
                pose,
                visibility,
                tag: rec.tag.clone(),
            });
        }
    }
    Ok(out)
}

/// Loads ground truth from a BOP split directory (one numbered
/// sub-directory per scene), a single scene directory, or a
/// `scene_gt.json` file. Scene ids come from directory names; a single
/// scene whose directory name is not numeric gets id 0.
pub fn load_ground_truth(path: &Path) -> Result<Vec<GroundTruthInstance>, IoError> {
    let scene_id_of = |dir: &Path| {
        dir.file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.parse::<u32>().ok())
    };
    if path.is_file() {
        let parent = path.parent().unwrap_or(Path::new("."));
        return load_scene_gt(path, scene_id_of(parent).unwrap_or(0));
    }
    let direct = path.join("scene_gt.json");
    if direct.is_file() {
        return load_scene_gt(&direct, scene_id_of(path).unwrap_or(0));
    }
    let entries = std::fs::read_dir(path).map_err(|source| IoError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut scenes = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| IoError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let dir = entry.path();
        if let Some(id) = scene_id_of(&dir) {
            if dir.join("scene_gt.json").is_file() {
                scenes.push((id, dir));
            }
        }
    }
    if scenes.is_empty() {
        return Err(IoError::parse(path, None, "no scene_gt.json found"));
    }
    scenes.sort();
    let mut out = Vec::new();
    for (id, dir) in scenes {
        out.extend(load_scene_gt(&dir.join("scene_gt.json"), id)?);
    }
    Ok(out)
}

pub fn write_scene_gt(path: &Path, gts: &[GroundTruthInstance]) -> std::io::Result<()> {
    let mut map: BTreeMap<u32, Vec<PoseRecord>> = BTreeMap::new();
    for g in gts {
        let mut r = PoseRecord::from_pose(Some(g.object_id), &g.pose);
        r.visib_fract = g.visibility;
        r.tag = g.tag.clone();
        map.entry(g.image_id).or_default().push(r);
    }
    let keyed: BTreeMap<String, Vec<PoseRecord>> = map.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    std::fs::write(
        path,
        serde_json::to_string_pretty(&keyed).map_err(std::io::Error::other)?,
    )
}

// ---------------------------------------------------------------------------
// predictions

fn floats(field: &str, name: &str, n: usize) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = field
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| format!("{name}: bad number '{t}'")))
        .collect::<Result<_, _>>()?;
    if v.len() != n {
        return Err(format!("{name}: expected {n} values, got {}", v.len()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(format!("{name}: non-finite value"));
    }
    Ok(v)
}

/// Reads a BOP results CSV. Negative `time` (BOP's "unknown") maps to
/// `None`. An empty file or a header-only file yields no predictions.
pub fn load_predictions(path: &Path) -> Result<Vec<Prediction>, IoError> {
    let bytes = read_bytes(path)?;
    if bytes.iter().all(|b| b.is_ascii_whitespace()) {
        return Ok(Vec::new());
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let headers = rdr
        .headers()
        .map_err(|e| IoError::parse(path, Some(1), e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IoError::parse(path, Some(1), format!("missing column '{name}'")))
    };
    let [scene, image, object, score, r, t, time] = [
        col("scene_id")?,
        col("im_id")?,
        col("obj_id")?,
        col("score")?,
        col("R")?,
        col("t")?,
        col("time")?,
    ];
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize);
            IoError::parse(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize);
        let bad = |m: String| IoError::parse(path, line, m);
        let int = |i: usize, name: &str| {
            rec[i]
                .parse::<u32>()
                .map_err(|_| bad(format!("{name}: bad integer '{}'", &rec[i])))
        };
        let real = |i: usize, name: &str| {
            rec[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("{name}: bad number '{}'", &rec[i])))
        };
        let rows = floats(&rec[r], "R", 9).map_err(bad)?;
        let t_mm = floats(&rec[t], "t", 3).map_err(bad)?;
        let time_value = real(time, "time")?;
        out.push(Prediction {
            scene_id: int(scene, "scene_id")?,
            image_id: int(image, "im_id")?,
            object_id: int(object, "obj_id")?,
            pose: pose_from_mm(&rows, &t_mm).map_err(bad)?,
            score: real(score, "score")?,
            time: (time_value >= 0.0).then_some(time_value),
        });
    }
    Ok(out)
}

pub fn write_predictions(path: &Path, preds: &[Prediction]) -> std::io::Result<()> {
    let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let mut s = String::from("scene_id,im_id,obj_id,score,R,t,time\n");
    for p in preds {
        let t: Vec<f64> = (p.pose.translation * 1000.0).iter().copied().collect();
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            p.scene_id,
            p.image_id,
            p.object_id,
            p.score,
            join(&p.pose.rotation.to_row_major()),
            join(&t),
            p.time.unwrap_or(-1.0)
        ));
    }
    std::fs::write(path, s)
}

// ---------------------------------------------------------------------------
// meshes and models

/// Mesh vertices converted from millimeters to meters.
pub fn load_mesh(path: &Path) -> Result<PointSet, IoError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    let raw = match ext.as_str() {
        "obj" => mesh::parse_obj(&read_text(path)?),
        "ply" => mesh::parse_ply(&read_bytes(path)?),
        _ => return Err(IoError::parse(path, None, "mesh must be .obj or .ply")),
    }
    .map_err(|(line, m)| IoError::parse(path, (line > 0).then_some(line), m))?;
    if raw.is_empty() {
        return Err(IoError::parse(path, None, "mesh has no vertices"));
    }
    let pts: Vec<Vec3> = raw.iter().map(|p| Vec3::new(p[0], p[1], p[2]) / 1000.0).collect();
    PointSet::new(pts).map_err(|e| IoError::parse(path, None, e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    /// Relative paths resolve against the config file's directory.
    pub mesh: PathBuf,
    pub symmetry: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub increment_deg: Option<f64>,
    /// Row-major rotation taking mesh coordinates to the canonical frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reorient: Option<Vec<f64>>,
}

pub type ModelsConfig = BTreeMap<String, ModelEntry>;

pub fn read_models_config(path: &Path) -> Result<ModelsConfig, IoError> {
    read_json(path)
}

/// Builds sampled models for every config entry. Vertices stay in the mesh
/// frame so that pose files keep their meaning; a `reorient` rotation is
/// applied to the symmetry set instead.
pub fn load_models(path: &Path, sample_count: usize) -> Result<ModelSet, IoError> {
    let config = read_models_config(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let entries: Vec<(u32, &ModelEntry)> = config
        .iter()
        .map(|(k, v)| {
            k.parse::<u32>()
                .map(|id| (id, v))
                .map_err(|_| IoError::parse(path, None, format!("object key '{k}' is not an integer")))
        })
        .collect::<Result<_, _>>()?;
    let models: Vec<(u32, SampledModel)> = entries
        .par_iter()
        .map(|&(id, entry)| {
            let bad = |m: String| IoError::parse(path, None, format!("object {id}: {m}"));
            let class: SymmetryClass = entry
                .symmetry
                .parse()
                .map_err(|e: crate::symmetry::SymmetryError| bad(e.to_string()))?;
            let mut set = generate_symmetries(class, entry.increment_deg.unwrap_or(DEFAULT_INCREMENT_DEG))
                .map_err(|e| bad(e.to_string()))?;
            if let Some(rows) = &entry.reorient {
                set = set.conjugated(&rotation_from_rows(rows).map_err(bad)?);
            }
            let mesh_path = if entry.mesh.is_absolute() {
                entry.mesh.clone()
            } else {
                base.join(&entry.mesh)
            };
            let vertices = load_mesh(&mesh_path)?;
            let model =
                SampledModel::from_vertices(id, &vertices, set, sample_count).map_err(|e| bad(e.to_string()))?;
            Ok((id, model))
        })
        .collect::<Result<_, IoError>>()?;
    Ok(models.into_iter().collect())
}

// ---------------------------------------------------------------------------
// small inputs

pub fn read_camera(path: &Path) -> Result<PinholeCamera, IoError> {
    let cam: PinholeCamera = read_json(path)?;
    cam.validate().map_err(|e| IoError::parse(path, None, e.to_string()))?;
    Ok(cam)
}

pub fn read_depth_raw(path: &Path, width: usize, height: usize) -> Result<DepthMap, IoError> {
    DepthMap::from_u16_le_mm(&read_bytes(path)?, width, height).map_err(|e| IoError::parse(path, None, e.to_string()))
}

/// CSV with header `reference_m,measured_m`.
pub fn read_depth_pairs(path: &Path) -> Result<(Vec<f64>, Vec<f64>), IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| IoError::parse(path, None, e.to_string()))?;
    let headers = rdr
        .headers()
        .map_err(|e| IoError::parse(path, Some(1), e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IoError::parse(path, Some(1), format!("missing column '{name}'")))
    };
    let (ri, mi) = (col("reference_m")?, col("measured_m")?);
    let (mut reference, mut measured) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| IoError::parse(path, e.position().map(|p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map(|p| p.line() as usize);
        let num = |i: usize| {
            rec[i]
                .parse::<f64>()
                .map_err(|_| IoError::parse(path, line, format!("bad number '{}'", &rec[i])))
        };
        reference.push(num(ri)?);
        measured.push(num(mi)?);
    }
    Ok((reference, measured))
}

/// Square matrix as comma-separated rows; blank lines and `#` comments are
/// skipped.
pub fn read_cost_matrix(path: &Path) -> Result<CostMatrix, IoError> {
    let text = read_text(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| IoError::parse(path, Some(i + 1), format!("bad number '{}'", t.trim())))
            })
            .collect::<Result<_, _>>()?;
        rows.push(row);
    }
    CostMatrix::from_rows(&rows).map_err(|e| IoError::parse(path, None, e.to_string()))
}
