//! Ground-material taxonomy and session conditions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Ornament,
    Grain,
    Floor,
    Paving,
    Stroma,
}

/// The 18 ground materials, in canonical label order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Material {
    Carpet,
    RedCarpet,
    ChromaticCarpet,
    Mat,
    Sand,
    GravelSmall,
    GravelMid,
    GravelLarge,
    Tile,
    Plastic,
    Wood,
    Rubber,
    Soil,
    Asphalt,
    Slab,
    Concrete,
    Stone,
    Grass,
}

impl Material {
    pub const ALL: [Material; 18] = [
        Material::Carpet,
        Material::RedCarpet,
        Material::ChromaticCarpet,
        Material::Mat,
        Material::Sand,
        Material::GravelSmall,
        Material::GravelMid,
        Material::GravelLarge,
        Material::Tile,
        Material::Plastic,
        Material::Wood,
        Material::Rubber,
        Material::Soil,
        Material::Asphalt,
        Material::Slab,
        Material::Concrete,
        Material::Stone,
        Material::Grass,
    ];

    /// Materials recorded in both dry and wet condition.
    pub const WET_DRY: [Material; 6] = [
        Material::Soil,
        Material::Rubber,
        Material::Sand,
        Material::GravelMid,
        Material::Wood,
        Material::Carpet,
    ];

    /// Granular materials with known particle diameters.
    pub const GRAINS: [Material; 4] = [
        Material::GravelLarge,
        Material::GravelMid,
        Material::GravelSmall,
        Material::Sand,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Material> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Material::Carpet => "carpet",
            Material::RedCarpet => "red_carpet",
            Material::ChromaticCarpet => "chromatic_carpet",
            Material::Mat => "mat",
            Material::Sand => "sand",
            Material::GravelSmall => "gravel_small",
            Material::GravelMid => "gravel_mid",
            Material::GravelLarge => "gravel_large",
            Material::Tile => "tile",
            Material::Plastic => "plastic",
            Material::Wood => "wood",
            Material::Rubber => "rubber",
            Material::Soil => "soil",
            Material::Asphalt => "asphalt",
            Material::Slab => "slab",
            Material::Concrete => "concrete",
            Material::Stone => "stone",
            Material::Grass => "grass",
        }
    }

    pub fn category(self) -> Category {
        use Material::*;
        match self {
            Carpet | RedCarpet | ChromaticCarpet | Mat => Category::Ornament,
            Sand | GravelSmall | GravelMid | GravelLarge => Category::Grain,
            Tile | Plastic | Wood | Rubber => Category::Floor,
            Asphalt | Slab | Concrete | Stone => Category::Paving,
            Soil | Grass => Category::Stroma,
        }
    }

    pub fn is_indoor(self) -> bool {
        self.index() < 13
    }

    /// Particle diameter in meters for the granular materials.
    pub fn grain_diameter_m(self) -> Option<f64> {
        match self {
            Material::GravelLarge => Some(0.03),
            Material::GravelMid => Some(0.013),
            Material::GravelSmall => Some(0.005),
            Material::Sand => Some(0.0005),
            _ => None,
        }
    }
}

impl fmt::Display for Material {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown material `{0}`")]
pub struct UnknownMaterial(pub String);

impl FromStr for Material {
    type Err = UnknownMaterial;

    /// Accepts the canonical names plus a few spelling variants used in
    /// dataset file names (`gravel-large`, `stone-middle`, `Red Carpet`, ...).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .map(|c| if c == '-' || c == ' ' { '_' } else { c })
            .collect();
        let alias = match norm.as_str() {
            "stone_large" | "gravel_l" => "gravel_large",
            "stone_middle" | "stone_mid" | "gravel_middle" | "gravel_m" => "gravel_mid",
            "stone_small" | "gravel_s" => "gravel_small",
            "carpet_color" | "colour_carpet" | "color_carpet" => "chromatic_carpet",
            other => other,
        };
        Material::ALL
            .iter()
            .copied()
            .find(|m| m.name() == alias)
            .ok_or_else(|| UnknownMaterial(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Dry,
    Wet,
    Noisy,
    Clean,
}

impl Condition {
    pub fn name(self) -> &'static str {
        match self {
            Condition::Dry => "dry",
            Condition::Wet => "wet",
            Condition::Noisy => "noisy",
            Condition::Clean => "clean",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
