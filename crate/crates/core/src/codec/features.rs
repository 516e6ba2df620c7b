use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::domain::{VehicleState, FEATURE_DIM, LATENT_DIM};
use crate::error::{check_len, Result};

/// `T x 12` rows of `[vx, vy, ax, ay, h_1..h_8]`.
pub fn build_features(ego: &[VehicleState], latents: &[[f64; LATENT_DIM]]) -> Result<DMatrix<f64>> {
    check_len(ego.len(), latents.len())?;
    let mut out = DMatrix::zeros(ego.len(), FEATURE_DIM);
    for (t, (s, h)) in ego.iter().zip(latents).enumerate() {
        out[(t, 0)] = s.vx;
        out[(t, 1)] = s.vy;
        out[(t, 2)] = s.ax;
        out[(t, 3)] = s.ay;
        for (k, v) in h.iter().enumerate() {
            out[(t, 4 + k)] = *v;
        }
    }
    Ok(out)
}

/// Per-column affine map used to standardize features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Column means and standard deviations; constant columns get scale 1.
    pub fn fit(rows: &[&DMatrix<f64>]) -> Self {
        let d = rows.first().map_or(0, |m| m.ncols());
        let n: usize = rows.iter().map(|m| m.nrows()).sum();
        let mut mean = vec![0.0; d];
        for m in rows {
            for (j, mu) in mean.iter_mut().enumerate() {
                *mu += m.column(j).sum();
            }
        }
        mean.iter_mut().for_each(|v| *v /= n.max(1) as f64);
        let mut var = vec![0.0; d];
        for m in rows {
            for j in 0..d {
                var[j] += m.column(j).iter().map(|x| (x - mean[j]).powi(2)).sum::<f64>();
            }
        }
        let scale = var
            .iter()
            .map(|v| {
                let sd = (v / n.max(1) as f64).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - self.mean[j]) / self.scale[j])
    }

    pub fn invert(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * self.scale[j] + self.mean[j])
    }
}

pub fn standardize(features: &DMatrix<f64>) -> (DMatrix<f64>, Standardizer) {
    let s = Standardizer::fit(&[features]);
    (s.apply(features), s)
}
