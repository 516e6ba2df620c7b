use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use super::dist::dirichlet;
use super::HdpHmmHyper;

/// `n[j][k]` = number of `j -> k` steps inside each label sequence.
pub fn transition_counts(z: &[Vec<usize>], l: usize) -> DMatrix<usize> {
    let mut n = DMatrix::zeros(l, l);
    for seq in z {
        for w in seq.windows(2) {
            n[(w[0], w[1])] += 1;
        }
    }
    n
}

/// Table counts `m`, override counts `w` and the corrected counts `m_bar`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxCounts {
    pub m: DMatrix<usize>,
    pub w: Vec<usize>,
    pub m_bar: DMatrix<usize>,
}

pub fn sample_aux_counts<R: Rng + ?Sized>(
    n: &DMatrix<usize>,
    beta: &[f64],
    hyper: &HdpHmmHyper,
    rng: &mut R,
) -> AuxCounts {
    let l = beta.len();
    let (alpha, kappa, rho) = (hyper.alpha(), hyper.kappa(), hyper.rho);
    let mut m = DMatrix::zeros(l, l);
    for j in 0..l {
        for k in 0..l {
            let conc = alpha * beta[k] + if j == k { kappa } else { 0.0 };
            let mut tables = 0;
            for i in 0..n[(j, k)] {
                let p = if conc > 0.0 {
                    conc / (i as f64 + conc)
                } else if i == 0 {
                    1.0
                } else {
                    0.0
                };
                if rng.random::<f64>() < p {
                    tables += 1;
                }
            }
            m[(j, k)] = tables;
        }
    }
    let mut w = vec![0; l];
    let mut m_bar = m.clone();
    for j in 0..l {
        let denom = rho + beta[j] * (1.0 - rho);
        let p = if denom > 0.0 {
            (rho / denom).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let mjj = m[(j, j)];
        if mjj > 0 && p > 0.0 {
            w[j] = Binomial::new(mjj as u64, p).expect("valid binomial").sample(rng) as usize;
        }
        m_bar[(j, j)] -= w[j];
    }
    AuxCounts { m, w, m_bar }
}

/// Global weights `beta ~ Dir(gamma / L + column sums of m_bar)`; the last
/// weight absorbs the rounding remainder.
pub fn sample_beta<R: Rng + ?Sized>(m_bar: &DMatrix<usize>, gamma: f64, rng: &mut R) -> Vec<f64> {
    let l = m_bar.ncols();
    let conc: Vec<f64> = (0..l)
        .map(|k| gamma / l as f64 + m_bar.column(k).sum() as f64)
        .collect();
    let mut beta = dirichlet(&conc, rng);
    let head: f64 = beta[..l - 1].iter().sum();
    beta[l - 1] = (1.0 - head).max(0.0);
    beta
}

/// Transition row `j ~ Dir(alpha beta + kappa e_j + n_j)`.
pub fn sample_pi<R: Rng + ?Sized>(
    beta: &[f64],
    counts: &[usize],
    j: usize,
    hyper: &HdpHmmHyper,
    rng: &mut R,
) -> Vec<f64> {
    let (alpha, kappa) = (hyper.alpha(), hyper.kappa());
    let conc: Vec<f64> = beta
        .iter()
        .zip(counts)
        .enumerate()
        .map(|(k, (b, c))| alpha * b + if k == j { kappa } else { 0.0 } + *c as f64)
        .collect();
    dirichlet(&conc, rng)
}

/// All transition rows, sampled in row order.
pub fn sample_transitions<R: Rng + ?Sized>(
    beta: &[f64],
    n: &DMatrix<usize>,
    hyper: &HdpHmmHyper,
    rng: &mut R,
) -> DMatrix<f64> {
    let l = beta.len();
    let mut pi = DMatrix::zeros(l, l);
    for j in 0..l {
        let counts: Vec<usize> = n.row(j).iter().copied().collect();
        for (k, p) in sample_pi(beta, &counts, j, hyper, rng).into_iter().enumerate() {
            pi[(j, k)] = p;
        }
    }
    pi
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hyper(rho: f64) -> HdpHmmHyper {
        HdpHmmHyper {
            rho,
            ..HdpHmmHyper::default()
        }
    }

    #[test]
    fn counts_restart_per_sequence() {
        let z = vec![vec![0, 0, 1], vec![1, 0]];
        let n = transition_counts(&z, 2);
        assert_eq!(n, DMatrix::from_row_slice(2, 2, &[1, 1, 1, 0]));
    }

    #[test]
    fn pi_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let beta = [0.7, 0.2, 0.05, 0.05];
        for j in 0..4 {
            let row = sample_pi(&beta, &[3, 0, 100, 1], j, &hyper(0.9), &mut rng);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn pi_mean_matches_beta_without_stickiness() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let beta = [0.4, 0.3, 0.15, 0.1, 0.05];
        let n = 100_000;
        let mut acc = [0.0; 5];
        for _ in 0..n {
            for (a, p) in acc.iter_mut().zip(sample_pi(&beta, &[0; 5], 2, &hyper(0.0), &mut rng)) {
                *a += p / n as f64;
            }
        }
        for (a, b) in acc.iter().zip(beta) {
            assert!((a - b).abs() < 0.005, "{acc:?}");
        }
    }

    #[test]
    fn sticky_row_favours_self() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let beta = [0.4, 0.3, 0.15, 0.1, 0.05];
        let n = 20_000;
        let mut acc = [0.0; 5];
        for _ in 0..n {
            for (a, p) in acc.iter_mut().zip(sample_pi(&beta, &[0; 5], 3, &hyper(0.99), &mut rng)) {
                *a += p / n as f64;
            }
        }
        assert!((0..5).filter(|k| *k != 3).all(|k| acc[3] > acc[k]), "{acc:?}");
    }

    #[test]
    fn aux_count_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let beta = [0.5, 0.3, 0.2];
        let n = DMatrix::from_row_slice(3, 3, &[1, 0, 1, 0, 1, 0, 1, 1, 0]);
        for _ in 0..200 {
            let aux = sample_aux_counts(&n, &beta, &hyper(0.9), &mut rng);
            assert_eq!(aux.m, n);
            let aux = sample_aux_counts(&n, &beta, &hyper(0.0), &mut rng);
            assert!(aux.w.iter().all(|w| *w == 0));
            assert_eq!(aux.m_bar, aux.m);
        }
    }

    #[test]
    fn beta_uniform_marginal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mb = DMatrix::zeros(2, 2);
        let n = 100_000;
        let mean = (0..n).map(|_| sample_beta(&mb, 2.0, &mut rng)[0]).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
    }

    #[test]
    fn beta_concentrates_on_heavy_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut mb = DMatrix::zeros(4, 4);
        mb[(2, 0)] = 5000;
        mb[(1, 3)] = 10;
        let hits = (0..1000)
            .filter(|_| {
                let b = sample_beta(&mb, 1.0, &mut rng);
                assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-10);
                b[0] > 0.9
            })
            .count();
        assert!(hits >= 990, "{hits}");
    }

    proptest::proptest! {
        #[test]
        fn aux_counts_are_bounded(
            cells in proptest::collection::vec(0usize..40, 9),
            rho in 0.0f64..0.99,
            seed in 0u64..500,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = DMatrix::from_row_slice(3, 3, &cells);
            let beta = [0.6, 0.3, 0.1];
            let aux = sample_aux_counts(&n, &beta, &hyper(rho), &mut rng);
            for j in 0..3 {
                for k in 0..3 {
                    proptest::prop_assert!(aux.m[(j, k)] <= n[(j, k)]);
                    proptest::prop_assert_eq!(aux.m[(j, k)] == 0, n[(j, k)] == 0);
                }
                proptest::prop_assert!(aux.w[j] <= aux.m[(j, j)]);
                proptest::prop_assert_eq!(aux.m_bar[(j, j)] + aux.w[j], aux.m[(j, j)]);
            }
        }
    }
}
