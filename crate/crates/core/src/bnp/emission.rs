use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;

use super::dist::sample_inverse_wishart;
use super::EmissionPrior;
use crate::error::{Error, Result};

/// Posterior draws `Sigma_k ~ IW(nu0 + n_k, S0 + sum o o^T)`; empty states
/// draw from the prior.
pub fn sample_emissions<R: Rng + ?Sized>(
    features: &[DMatrix<f64>],
    z: &[Vec<usize>],
    l: usize,
    prior: &EmissionPrior,
    rng: &mut R,
) -> Result<Vec<DMatrix<f64>>> {
    let d = prior.dim();
    if features.len() != z.len() {
        return Err(Error::LengthMismatch {
            left: features.len(),
            right: z.len(),
        });
    }
    let mut scatter = vec![DMatrix::<f64>::zeros(d, d); l];
    let mut counts = vec![0usize; l];
    for (x, labels) in features.iter().zip(z) {
        if x.ncols() != d {
            return Err(Error::ShapeError {
                expected: format!("{d} feature columns"),
                got: x.ncols().to_string(),
            });
        }
        if x.nrows() != labels.len() {
            return Err(Error::LengthMismatch {
                left: x.nrows(),
                right: labels.len(),
            });
        }
        for (t, &k) in labels.iter().enumerate() {
            if k >= l {
                return Err(Error::InvalidConfig(format!("label {k} outside 0..{l}")));
            }
            counts[k] += 1;
            let s = &mut scatter[k];
            for i in 0..d {
                let xi = x[(t, i)];
                for j in 0..=i {
                    s[(i, j)] += xi * x[(t, j)];
                }
            }
        }
    }
    let mut out = Vec::with_capacity(l);
    for (k, mut s) in scatter.into_iter().enumerate() {
        s.fill_upper_triangle_with_lower_triangle();
        let post = &prior.s0 + s;
        let c = post
            .cholesky()
            .ok_or_else(|| Error::InvalidConfig("posterior scale lost positive definiteness".into()))?
            .l();
        out.push(sample_inverse_wishart(prior.nu0 + counts[k] as f64, &c, rng));
    }
    Ok(out)
}

/// `T x L` matrix of `ln N(o_t; 0, Sigma_k)`.
pub fn emission_loglik(x: &DMatrix<f64>, sigmas: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let (t, d) = x.shape();
    let xt = x.transpose();
    let mut out = DMatrix::zeros(t, sigmas.len());
    for (k, sigma) in sigmas.iter().enumerate() {
        if sigma.shape() != (d, d) {
            return Err(Error::ShapeError {
                expected: format!("{d}x{d} covariance"),
                got: format!("{}x{}", sigma.nrows(), sigma.ncols()),
            });
        }
        let l = sigma
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidConfig(format!("covariance {k} is not positive definite")))?
            .l();
        let logdet: f64 = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let y = l.solve_lower_triangular(&xt).expect("nonsingular factor");
        let base = -0.5 * (d as f64 * (2.0 * PI).ln() + logdet);
        for (i, col) in y.column_iter().enumerate() {
            out[(i, k)] = base - 0.5 * col.norm_squared();
        }
    }
    Ok(out)
}
