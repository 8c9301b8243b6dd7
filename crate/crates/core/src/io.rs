//! Serialization helpers shared by the engines and the CLI.
//!
//! Numbers are written with 17 significant digits so every `f64` round-trips
//! exactly through text.

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Formats a float with 17 significant digits in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Quadrature ordering tag attached to every serialized covariance matrix.
pub const CM_ORDERING: &str = "qpXY";

/// Row-major JSON form of a two-mode covariance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceJson {
    pub ordering: String,
    pub sigma: Vec<Vec<f64>>,
    #[serde(default)]
    pub mean: Vec<f64>,
}

impl CovarianceJson {
    pub fn new(sigma: &Matrix4<f64>, mean: &[f64; 4]) -> Self {
        Self {
            ordering: CM_ORDERING.to_string(),
            sigma: (0..4)
                .map(|i| (0..4).map(|j| sigma[(i, j)]).collect())
                .collect(),
            mean: mean.to_vec(),
        }
    }

    pub fn to_matrix(&self) -> Result<(Matrix4<f64>, [f64; 4])> {
        if self.ordering != CM_ORDERING {
            return Err(Error::Io(format!(
                "unsupported covariance ordering `{}` (expected `{CM_ORDERING}`)",
                self.ordering
            )));
        }
        if self.sigma.len() != 4 || self.sigma.iter().any(|row| row.len() != 4) {
            return Err(Error::Io("covariance matrix must be 4x4".to_string()));
        }
        let m = Matrix4::from_fn(|i, j| self.sigma[i][j]);
        let mean = match self.mean.len() {
            0 => [0.0; 4],
            4 => [self.mean[0], self.mean[1], self.mean[2], self.mean[3]],
            n => return Err(Error::Io(format!("mean vector has length {n}, expected 4"))),
        };
        Ok((m, mean))
    }
}
