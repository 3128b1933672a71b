//! Tunable parameters, serialized with the same keys as the parameter table.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gvf::GvfParams;
use crate::traj_opt::CostWeights;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    #[serde(rename = "K1")]
    pub k1: f64,
    #[serde(rename = "K2")]
    pub k2: f64,
    /// Replanning interval in seconds.
    #[serde(rename = "T_p")]
    pub t_p: f64,
    pub lambda_s: f64,
    pub lambda_c: f64,
    pub d_thr: f64,
    pub r: f64,
    pub resolution: f64,
    pub cruise_speed: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            k1: 1.5,
            k2: 1.5,
            t_p: 0.2,
            lambda_s: 5.0,
            lambda_c: 10.0,
            d_thr: 0.35,
            r: 0.5,
            resolution: 0.1,
            cruise_speed: 2.0,
        }
    }
}

impl Config {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn gvf(&self) -> GvfParams {
        GvfParams {
            k1: self.k1,
            k2: self.k2,
            r: self.r,
            ..GvfParams::default()
        }
    }

    pub fn weights(&self) -> CostWeights {
        CostWeights {
            lambda_s: self.lambda_s,
            lambda_c: self.lambda_c,
            d_thr: self.d_thr,
        }
    }
}
