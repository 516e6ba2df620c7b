use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::emission::emission_loglik;
use crate::error::{Error, Result};

fn check_chain(pi: &DMatrix<f64>, init: &[f64], l: usize) -> Result<()> {
    if pi.shape() != (l, l) || init.len() != l {
        return Err(Error::ShapeError {
            expected: format!("{l}x{l} transitions and {l} initial weights"),
            got: format!("{}x{} and {}", pi.nrows(), pi.ncols(), init.len()),
        });
    }
    Ok(())
}

fn check_rows(ll: &DMatrix<f64>, offset: usize) -> Result<()> {
    for (t, row) in ll.row_iter().enumerate() {
        if !row.iter().any(|v| v.is_finite()) {
            return Err(Error::NumericalUnderflow { index: offset + t });
        }
    }
    Ok(())
}

/// Exact `ln p(O | pi, Sigma, init)` by the scaled forward recursion,
/// restarting at each sequence.
pub fn loglik(features: &[DMatrix<f64>], pi: &DMatrix<f64>, sigmas: &[DMatrix<f64>], init: &[f64]) -> Result<f64> {
    check_chain(pi, init, sigmas.len())?;
    let mut total = 0.0;
    let mut offset = 0;
    for x in features {
        let ll = emission_loglik(x, sigmas)?;
        check_rows(&ll, offset)?;
        offset += x.nrows();
        total += forward_loglik(&ll, pi, init);
    }
    Ok(total)
}

fn forward_loglik(ll: &DMatrix<f64>, pi: &DMatrix<f64>, init: &[f64]) -> f64 {
    let (t_len, l) = ll.shape();
    let mut total = 0.0;
    let mut alpha = DVector::from_column_slice(init);
    for t in 0..t_len {
        if t > 0 {
            alpha = pi.tr_mul(&alpha);
        }
        let mx = ll.row(t).iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for k in 0..l {
            alpha[k] *= (ll[(t, k)] - mx).exp();
        }
        let c = alpha.sum();
        if !(c > 0.0) {
            return f64::NEG_INFINITY;
        }
        total += c.ln() + mx;
        alpha /= c;
    }
    total
}

/// Blocked draw of every label sequence from its exact conditional.
pub fn sample_labels<R: Rng + ?Sized>(
    features: &[DMatrix<f64>],
    pi: &DMatrix<f64>,
    sigmas: &[DMatrix<f64>],
    init: &[f64],
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    check_chain(pi, init, sigmas.len())?;
    let mut out = Vec::with_capacity(features.len());
    let mut offset = 0;
    for x in features {
        let ll = emission_loglik(x, sigmas)?;
        out.push(sample_path(&ll, pi, init, offset, rng)?);
        offset += x.nrows();
    }
    Ok(out)
}

/// Backward filtering in log space with per-step max normalization, then
/// forward sampling. `ll` is the `T x L` emission log-likelihood; `offset`
/// only shifts the index reported on underflow.
pub fn sample_path<R: Rng + ?Sized>(
    ll: &DMatrix<f64>,
    pi: &DMatrix<f64>,
    init: &[f64],
    offset: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let (t_len, l) = ll.shape();
    check_chain(pi, init, l)?;
    check_rows(ll, offset)?;
    if t_len == 0 {
        return Ok(Vec::new());
    }
    let mut log_b = DMatrix::<f64>::zeros(t_len, l);
    let mut e = DVector::<f64>::zeros(l);
    for t in (0..t_len - 1).rev() {
        let mx = (0..l)
            .map(|k| ll[(t + 1, k)] + log_b[(t + 1, k)])
            .fold(f64::NEG_INFINITY, f64::max);
        for k in 0..l {
            e[k] = (ll[(t + 1, k)] + log_b[(t + 1, k)] - mx).exp();
        }
        let b = pi * &e;
        for j in 0..l {
            log_b[(t, j)] = b[j].ln() + mx;
        }
    }

    let mut z = Vec::with_capacity(t_len);
    let mut weights = vec![0.0; l];
    for t in 0..t_len {
        let prior: Vec<f64> = match z.last() {
            None => init.to_vec(),
            Some(&prev) => pi.row(prev).iter().copied().collect(),
        };
        let mx = (0..l)
            .filter(|&k| prior[k] > 0.0)
            .map(|k| ll[(t, k)] + log_b[(t, k)])
            .fold(f64::NEG_INFINITY, f64::max);
        for k in 0..l {
            weights[k] = if prior[k] > 0.0 {
                prior[k] * (ll[(t, k)] + log_b[(t, k)] - mx).exp()
            } else {
                0.0
            };
        }
        z.push(categorical(&weights, rng).ok_or(Error::NumericalUnderflow { index: offset + t })?);
    }
    Ok(z)
}

fn categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    let mut u = rng.random::<f64>() * total;
    let mut last = None;
    for (k, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            if u < *w {
                return Some(k);
            }
            u -= w;
            last = Some(k);
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn two_state() -> (DMatrix<f64>, Vec<DMatrix<f64>>, Vec<f64>) {
        let pi = DMatrix::from_row_slice(2, 2, &[0.8, 0.2, 0.35, 0.65]);
        let sigmas = vec![
            DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5]),
            DMatrix::from_row_slice(2, 2, &[3.0, -0.4, -0.4, 2.0]),
        ];
        (pi, sigmas, vec![0.3, 0.7])
    }

    fn features(t: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(t, 2, |_, _| 1.3 * rng.sample::<f64, _>(StandardNormal))
    }

    /// Joint probability of every path, by enumeration.
    fn enumerate_paths(
        x: &DMatrix<f64>,
        pi: &DMatrix<f64>,
        sigmas: &[DMatrix<f64>],
        init: &[f64],
    ) -> Vec<(Vec<usize>, f64)> {
        let ll = emission_loglik(x, sigmas).unwrap();
        let t = x.nrows();
        (0..1usize << t)
            .map(|bits| {
                let path: Vec<usize> = (0..t).map(|i| (bits >> i) & 1).collect();
                let mut p = init[path[0]] * ll[(0, path[0])].exp();
                for i in 1..t {
                    p *= pi[(path[i - 1], path[i])] * ll[(i, path[i])].exp();
                }
                (path, p)
            })
            .collect()
    }

    #[test]
    fn loglik_matches_path_enumeration() {
        let (pi, sigmas, init) = two_state();
        let x = features(6, 1);
        let brute: f64 = enumerate_paths(&x, &pi, &sigmas, &init).iter().map(|(_, p)| p).sum();
        let got = loglik(&[x], &pi, &sigmas, &init).unwrap();
        assert!((got - brute.ln()).abs() < 1e-10, "{got} vs {}", brute.ln());
    }

    #[test]
    fn single_frame_is_mixture_density() {
        let (pi, sigmas, init) = two_state();
        let x = features(1, 2);
        let ll = emission_loglik(&x, &sigmas).unwrap();
        let want = (init[0] * ll[(0, 0)].exp() + init[1] * ll[(0, 1)].exp()).ln();
        assert!((loglik(&[x], &pi, &sigmas, &init).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn independent_restart_doubles() {
        let (pi, sigmas, init) = two_state();
        let x = features(40, 3);
        let one = loglik(std::slice::from_ref(&x), &pi, &sigmas, &init).unwrap();
        let two = loglik(&[x.clone(), x], &pi, &sigmas, &init).unwrap();
        assert!((two - 2.0 * one).abs() < 1e-9);
    }

    #[test]
    fn blocked_marginals_match_enumeration() {
        let (pi, sigmas, init) = two_state();
        let x = features(4, 4);
        let paths = enumerate_paths(&x, &pi, &sigmas, &init);
        let total: f64 = paths.iter().map(|(_, p)| p).sum();
        let mut exact = [0.0; 4];
        for (path, p) in &paths {
            for t in 0..4 {
                if path[t] == 1 {
                    exact[t] += p / total;
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws = 100_000;
        let mut freq = [0.0; 4];
        let xs = [x];
        for _ in 0..draws {
            let z = sample_labels(&xs, &pi, &sigmas, &init, &mut rng).unwrap();
            for t in 0..4 {
                freq[t] += z[0][t] as f64 / draws as f64;
            }
        }
        for t in 0..4 {
            assert!((freq[t] - exact[t]).abs() < 0.01, "t={t}: {freq:?} vs {exact:?}");
        }
    }

    #[test]
    fn dominant_state_takes_every_label() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ll = DMatrix::from_fn(50, 3, |_, k| if k == 2 { 0.0 } else { -(1000f64).ln() - 5.0 });
        let pi = DMatrix::from_element(3, 3, 1.0 / 3.0);
        for _ in 0..100 {
            let z = sample_path(&ll, &pi, &[1.0 / 3.0; 3], 0, &mut rng).unwrap();
            assert!(z.iter().all(|k| *k == 2));
        }
    }

    #[test]
    fn identity_chain_is_absorbing() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (_, sigmas, _) = two_state();
        let x = features(30, 8);
        let pi = DMatrix::identity(2, 2);
        for _ in 0..50 {
            let z = sample_labels(std::slice::from_ref(&x), &pi, &sigmas, &[0.5, 0.5], &mut rng).unwrap();
            assert!(z[0].iter().all(|k| *k == z[0][0]));
        }
    }

    #[test]
    fn non_finite_input_underflows() {
        let (pi, sigmas, init) = two_state();
        let mut x = features(5, 9);
        x[(3, 1)] = f64::NAN;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            sample_labels(std::slice::from_ref(&x), &pi, &sigmas, &init, &mut rng),
            Err(Error::NumericalUnderflow { index: 3 })
        ));
        assert!(matches!(
            loglik(&[x], &pi, &sigmas, &init),
            Err(Error::NumericalUnderflow { index: 3 })
        ));
    }

    #[test]
    fn permuting_states_preserves_loglik() {
        let (pi, sigmas, init) = two_state();
        let x = features(200, 10);
        let a = loglik(std::slice::from_ref(&x), &pi, &sigmas, &init).unwrap();
        let perm = DMatrix::from_row_slice(2, 2, &[0.65, 0.35, 0.2, 0.8]);
        let b = loglik(
            &[x],
            &perm,
            &[sigmas[1].clone(), sigmas[0].clone()],
            &[init[1], init[0]],
        )
        .unwrap();
        assert!((a - b).abs() < 1e-10);
    }
}
