pub mod eval;
pub mod field;
pub mod tools;

use crate::cli::ModelArgs;
use crate::output::Meta;
use crate::Failure;
use anyhow::anyhow;
use poseval_core::io::{load_mesh, load_models};
use poseval_core::metrics::{MetricKind, SampledModel};
use poseval_core::symmetry::{generate_symmetries, SymmetryClass};
use serde::Serialize;

pub struct Ctx {
    pub seed: u64,
    pub parallel: bool,
}

impl Ctx {
    pub fn meta(&self, command: &str, config: &impl Serialize) -> Meta {
        Meta::new(command, self.seed, config)
    }
}

pub fn parse_metric(s: &str) -> Result<MetricKind, Failure> {
    s.parse::<MetricKind>().map_err(Failure::from)
}

/// A single model from either `--models` + `--obj-id` or `--mesh`.
pub fn load_one_model(args: &ModelArgs) -> Result<SampledModel, Failure> {
    match (&args.models, args.obj_id, &args.mesh) {
        (Some(config), Some(id), None) => {
            let mut models = load_models(config, args.samples)?;
            models
                .remove(&id)
                .ok_or_else(|| Failure::semantic(anyhow!("no model for object id {id} in {}", config.display())))
        }
        (None, _, Some(mesh)) => {
            let class: SymmetryClass = args.symmetry.parse()?;
            let set = generate_symmetries(class, args.increment)?;
            let vertices = load_mesh(mesh)?;
            Ok(SampledModel::from_vertices(
                args.obj_id.unwrap_or(0),
                &vertices,
                set,
                args.samples,
            )?)
        }
        _ => Err(Failure::input(anyhow!("give either --models with --obj-id, or --mesh"))),
    }
}
