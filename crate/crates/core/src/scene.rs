//! Obstacle scenes and their JSON file format.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::DEFAULT_RESOLUTION;
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Bounds {
    pub fn min_v(&self) -> Vec3 {
        Vec3::from(self.min)
    }

    pub fn max_v(&self) -> Vec3 {
        Vec3::from(self.max)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|a| self.max[a] - self.min[a]).product()
    }
}

/// An obstacle primitive: axis-aligned box or vertical cylinder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Obstacle {
    Box {
        min: [f64; 3],
        max: [f64; 3],
    },
    Cylinder {
        center: [f64; 2],
        radius: f64,
        z_min: f64,
        z_max: f64,
    },
}

impl Obstacle {
    pub fn contains(&self, p: &Vec3) -> bool {
        match *self {
            Obstacle::Box { min, max } => (0..3).all(|a| p[a] >= min[a] && p[a] <= max[a]),
            Obstacle::Cylinder {
                center,
                radius,
                z_min,
                z_max,
            } => {
                let dx = p.x - center[0];
                let dy = p.y - center[1];
                p.z >= z_min && p.z <= z_max && dx * dx + dy * dy <= radius * radius
            }
        }
    }

    /// Euclidean distance from `p` to the primitive (0 inside).
    pub fn distance(&self, p: &Vec3) -> f64 {
        match *self {
            Obstacle::Box { min, max } => {
                let mut s = 0.0;
                for a in 0..3 {
                    let d = (min[a] - p[a]).max(p[a] - max[a]).max(0.0);
                    s += d * d;
                }
                s.sqrt()
            }
            Obstacle::Cylinder {
                center,
                radius,
                z_min,
                z_max,
            } => {
                let radial = ((p.x - center[0]).hypot(p.y - center[1]) - radius).max(0.0);
                let vertical = (z_min - p.z).max(p.z - z_max).max(0.0);
                radial.hypot(vertical)
            }
        }
    }

    /// Axis-aligned bounding box.
    pub fn aabb(&self) -> ([f64; 3], [f64; 3]) {
        match *self {
            Obstacle::Box { min, max } => (min, max),
            Obstacle::Cylinder {
                center,
                radius,
                z_min,
                z_max,
            } => (
                [center[0] - radius, center[1] - radius, z_min],
                [center[0] + radius, center[1] + radius, z_max],
            ),
        }
    }

    pub fn intersects(&self, b: &Bounds) -> bool {
        let (lo, hi) = self.aabb();
        (0..3).all(|a| lo[a] <= b.max[a] && hi[a] >= b.min[a])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub bounds: Bounds,
    #[serde(default = "default_resolution")]
    pub resolution: f64,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
}

fn default_resolution() -> f64 {
    DEFAULT_RESOLUTION
}

impl Scene {
    pub fn empty(min: [f64; 3], max: [f64; 3], resolution: f64) -> Self {
        Self {
            bounds: Bounds { min, max },
            resolution,
            obstacles: Vec::new(),
        }
    }

    /// Distance from `p` to the nearest obstacle surface (infinite when empty).
    pub fn clearance(&self, p: &Vec3) -> f64 {
        self.obstacles
            .iter()
            .map(|o| o.distance(p))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let scene: Scene = serde_json::from_str(text)?;
        if !(scene.resolution > 0.0) {
            return Err(Error::InvalidArgument("scene resolution must be positive".into()));
        }
        Ok(scene)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
