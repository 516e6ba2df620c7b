//! Principal-component encoder used when the autoencoder is not trained.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::domain::FieldTensor;
use crate::error::{Error, Result};

/// Mean field plus the top-k principal directions (rows of `components`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProjection {
    pub shape: (usize, usize),
    pub mean: Vec<f64>,
    /// `k` rows of length `rows * cols * 2`, unit norm, descending variance.
    pub components: Vec<Vec<f64>>,
}

pub fn linear_fallback_fit(data: &[FieldTensor], k: usize) -> Result<LinearProjection> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (rows, cols, _) = data[0].shape();
    let d = rows * cols * 2;
    if k == 0 || k > d {
        return Err(Error::InvalidConfig(format!("k must lie in 1..={d}")));
    }
    if data.len() < k {
        return Err(Error::RankDeficient {
            wanted: k,
            found: data.len(),
        });
    }
    for f in data {
        if f.shape() != (rows, cols, 2) {
            return Err(Error::ShapeError {
                expected: format!("{rows}x{cols}x2"),
                got: format!("{:?}", f.shape()),
            });
        }
    }
    let n = data.len() as f64;
    let mut mean = vec![0.0; d];
    for f in data {
        mean.iter_mut().zip(f.values()).for_each(|(m, v)| *m += v / n);
    }
    let centered = DMatrix::from_fn(data.len(), d, |i, j| data[i].values()[j] - mean[j]);
    let cov = centered.transpose() * &centered / n;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let floor = top * 1e-10;
    let found = order
        .iter()
        .filter(|&&i| eig.eigenvalues[i] > floor && eig.eigenvalues[i] > 0.0)
        .count();
    if found < k {
        return Err(Error::RankDeficient { wanted: k, found });
    }
    let components = order[..k]
        .iter()
        .map(|&i| {
            let v = eig.eigenvectors.column(i);
            // fix the sign so the largest-magnitude entry is positive
            let pivot = v
                .iter()
                .copied()
                .fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            let s = if pivot < 0.0 { -1.0 } else { 1.0 };
            v.iter().map(|x| x * s).collect()
        })
        .collect();
    Ok(LinearProjection {
        shape: (rows, cols),
        mean,
        components,
    })
}

impl LinearProjection {
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn encode(&self, field: &FieldTensor) -> Result<Vec<f64>> {
        if field.shape() != (self.shape.0, self.shape.1, 2) {
            return Err(Error::ShapeError {
                expected: format!("{}x{}x2", self.shape.0, self.shape.1),
                got: format!("{:?}", field.shape()),
            });
        }
        let x = DVector::from_iterator(
            self.mean.len(),
            field.values().iter().zip(&self.mean).map(|(v, m)| v - m),
        );
        Ok(self
            .components
            .iter()
            .map(|c| c.iter().zip(x.iter()).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn decode(&self, code: &[f64], frame: i64) -> FieldTensor {
        let mut values = self.mean.clone();
        for (c, w) in self.components.iter().zip(code) {
            values.iter_mut().zip(c).for_each(|(v, e)| *v += w * e);
        }
        FieldTensor::from_values(frame, self.shape.0, self.shape.1, values).expect("fitted shape")
    }
}

/// Encodes every field with the first `k` components of `proj`.
pub fn linear_fallback_encode(proj: &LinearProjection, field: &FieldTensor) -> Result<Vec<f64>> {
    proj.encode(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_fields(n: usize, seed: u64) -> Vec<FieldTensor> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let v = (0..442).map(|_| rng.random_range(-1.0..1.0)).collect();
                FieldTensor::from_values(i as i64, 13, 17, v).unwrap()
            })
            .collect()
    }

    fn recon_error(proj: &LinearProjection, data: &[FieldTensor]) -> f64 {
        data.iter()
            .map(|f| {
                let r = proj.decode(&proj.encode(f).unwrap(), f.frame);
                r.values()
                    .iter()
                    .zip(f.values())
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
            })
            .sum()
    }

    #[test]
    fn identical_fields_are_rank_deficient() {
        let f = random_fields(1, 0).remove(0);
        let data = vec![f; 20];
        assert!(matches!(
            linear_fallback_fit(&data, 8),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn error_nonincreasing_in_k() {
        let data = random_fields(60, 1);
        let errs: Vec<f64> = [1, 2, 4, 8, 16, 32]
            .iter()
            .map(|&k| recon_error(&linear_fallback_fit(&data, k).unwrap(), &data))
            .collect();
        assert!(errs.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{errs:?}");
    }

    #[test]
    fn full_basis_is_lossless() {
        let data = random_fields(460, 2);
        let proj = linear_fallback_fit(&data, 442).unwrap();
        for f in data.iter().take(5) {
            let r = proj.decode(&proj.encode(f).unwrap(), f.frame);
            assert!(r.max_abs_diff(f) < 1e-9);
        }
    }

    #[test]
    fn codes_are_centered() {
        let data = random_fields(50, 3);
        let proj = linear_fallback_fit(&data, 8).unwrap();
        let mut sums = [0.0; 8];
        for f in &data {
            for (s, c) in sums.iter_mut().zip(linear_fallback_encode(&proj, f).unwrap()) {
                *s += c;
            }
        }
        assert!(sums.iter().all(|s| s.abs() < 1e-9));
    }
}
