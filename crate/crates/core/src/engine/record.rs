use serde::{Deserialize, Serialize};

use super::state::DensityMatrix;
use crate::scalar::Real;

/// Self-describing result of one contraction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config_hash: String,
    pub engine: String,
    pub n_trajectories: usize,
    pub error_locations: usize,
    /// Row-major `[re, im]` pairs.
    pub rdm: Vec<[f64; 2]>,
    pub trace_distance_to_ideal: Option<f64>,
    pub wall_time: f64,
}

impl ResultRecord {
    pub fn rdm_pairs<T: Real>(rho: &DensityMatrix<T>) -> Vec<[f64; 2]> {
        rho.data()
            .iter()
            .map(|z| [z.re.as_f64(), z.im.as_f64()])
            .collect()
    }
}
