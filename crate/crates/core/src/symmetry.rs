//! Discrete symmetry sets for the three geometric object categories.
//!
//! Object canonical frame: `z` is the vertical axis and `x` points to the
//! front. Meshes authored in another convention must be re-oriented on load
//! (see the `reorient` entry of the models config).

use crate::geometry::Rotation;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

pub const DEFAULT_INCREMENT_DEG: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymmetryError {
    #[error("angular increment {0}° must be positive and divide 360 evenly")]
    InvalidIncrement(f64),
    #[error("unknown symmetry class '{0}' (expected cylinder, cuboid, bottle or none)")]
    UnknownClass(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryClass {
    /// Full sweep about z plus a top-to-bottom flip.
    Cylinder,
    /// 180° flips about each axis.
    Cuboid,
    /// 180° flip front to back (about z).
    Bottle,
    #[serde(alias = "none")]
    NoSymmetry,
}

impl SymmetryClass {
    pub const ALL: [SymmetryClass; 4] = [
        SymmetryClass::Cylinder,
        SymmetryClass::Cuboid,
        SymmetryClass::Bottle,
        SymmetryClass::NoSymmetry,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SymmetryClass::Cylinder => "cylinder",
            SymmetryClass::Cuboid => "cuboid",
            SymmetryClass::Bottle => "bottle",
            SymmetryClass::NoSymmetry => "none",
        }
    }
}

impl fmt::Display for SymmetryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SymmetryClass {
    type Err = SymmetryError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cylinder" | "cylinders" => Ok(SymmetryClass::Cylinder),
            "cuboid" | "cuboids" | "box" => Ok(SymmetryClass::Cuboid),
            "bottle" | "bottles" => Ok(SymmetryClass::Bottle),
            "none" | "no_symmetry" | "nosymmetry" => Ok(SymmetryClass::NoSymmetry),
            _ => Err(SymmetryError::UnknownClass(s.to_string())),
        }
    }
}

/// Ordered rotation set; element 0 is always the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetrySet {
    class: SymmetryClass,
    increment_deg: f64,
    rotations: Vec<Rotation>,
}

impl SymmetrySet {
    pub fn identity_only() -> Self {
        SymmetrySet {
            class: SymmetryClass::NoSymmetry,
            increment_deg: DEFAULT_INCREMENT_DEG,
            rotations: vec![Rotation::identity()],
        }
    }

    pub fn class(&self) -> SymmetryClass {
        self.class
    }

    pub fn increment_deg(&self) -> f64 {
        self.increment_deg
    }

    pub fn rotations(&self) -> &[Rotation] {
        &self.rotations
    }

    pub fn len(&self) -> usize {
        self.rotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rotations.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Rotation> {
        self.rotations.get(i)
    }

    /// Expresses the set in a mesh frame that differs from the canonical
    /// frame by `to_canonical` (x_canonical = R · x_mesh): each S becomes
    /// Rᵀ·S·R.
    pub fn conjugated(&self, to_canonical: &Rotation) -> SymmetrySet {
        let rt = to_canonical.transpose();
        SymmetrySet {
            rotations: self.rotations.iter().map(|s| rt.mul(s).mul(to_canonical)).collect(),
            ..self.clone()
        }
    }
}

/// Builds the symmetry set for `class`. `increment_deg` only affects
/// cylinders but is validated for every class.
pub fn generate_symmetries(class: SymmetryClass, increment_deg: f64) -> Result<SymmetrySet, SymmetryError> {
    let steps = steps_per_turn(increment_deg)?;
    let rotations = match class {
        SymmetryClass::NoSymmetry => vec![Rotation::identity()],
        SymmetryClass::Bottle => vec![Rotation::identity(), Rotation::rot_z_deg(180.0)],
        SymmetryClass::Cuboid => vec![
            Rotation::identity(),
            Rotation::rot_x_deg(180.0),
            Rotation::rot_y_deg(180.0),
            Rotation::rot_z_deg(180.0),
        ],
        SymmetryClass::Cylinder => {
            let flip = Rotation::rot_x_deg(180.0);
            let sweep: Vec<Rotation> = (0..steps)
                .map(|k| Rotation::rot_z_deg(k as f64 * increment_deg))
                .collect();
            let flipped: Vec<Rotation> = sweep.iter().map(|r| r.mul(&flip)).collect();
            sweep.into_iter().chain(flipped).collect()
        }
    };
    Ok(SymmetrySet {
        class,
        increment_deg,
        rotations,
    })
}

fn steps_per_turn(increment_deg: f64) -> Result<usize, SymmetryError> {
    if !(increment_deg.is_finite() && increment_deg > 0.0 && increment_deg <= 360.0) {
        return Err(SymmetryError::InvalidIncrement(increment_deg));
    }
    let steps = 360.0 / increment_deg;
    let rounded = steps.round();
    if (steps - rounded).abs() > 1e-9 * steps.max(1.0) {
        return Err(SymmetryError::InvalidIncrement(increment_deg));
    }
    Ok(rounded as usize)
}
