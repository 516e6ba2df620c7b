use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Beta, ChiSquared, Distribution, Gamma, StandardNormal};

/// Dirichlet draw computed in log space so tiny concentrations do not
/// underflow. Non-positive concentrations yield a zero coordinate.
pub fn dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let logs: Vec<f64> = alpha.iter().map(|&a| log_gamma_draw(a, rng)).collect();
    let mx = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        let live = alpha.iter().filter(|a| **a > 0.0).count();
        if live == 0 {
            return vec![1.0 / alpha.len() as f64; alpha.len()];
        }
        return alpha
            .iter()
            .map(|a| if *a > 0.0 { 1.0 / live as f64 } else { 0.0 })
            .collect();
    }
    let mut p: Vec<f64> = logs.iter().map(|l| (l - mx).exp()).collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    p
}

/// `ln G` for `G ~ Gamma(a, 1)`, using `G = G' U^(1/a)` with `G' ~ Gamma(a + 1, 1)` when `a < 1`.
fn log_gamma_draw<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    if !(a > 0.0) {
        return f64::NEG_INFINITY;
    }
    if a >= 1.0 {
        let g: f64 = Gamma::new(a, 1.0).expect("positive shape").sample(rng);
        return g.ln();
    }
    let g: f64 = Gamma::new(a + 1.0, 1.0).expect("positive shape").sample(rng);
    let u: f64 = 1.0 - rng.random::<f64>();
    g.ln() + u.ln() / a
}

/// Stick-breaking weights from explicit stick fractions. The first `l - 1`
/// fractions are used; the last weight is the unconsumed remainder.
pub fn stick_breaking_from(sticks: &[f64], l: usize) -> Vec<f64> {
    let mut beta = Vec::with_capacity(l);
    let mut rest = 1.0;
    for &v in sticks.iter().take(l.saturating_sub(1)) {
        let b = v * rest;
        beta.push(b);
        rest *= 1.0 - v;
    }
    while beta.len() + 1 < l {
        beta.push(0.0);
    }
    if l > 0 {
        let used: f64 = beta.iter().sum();
        beta.push((1.0 - used).max(0.0));
    }
    beta
}

/// Truncated GEM(gamma) weights.
pub fn stick_breaking<R: Rng + ?Sized>(gamma: f64, l: usize, rng: &mut R) -> Vec<f64> {
    let dist = Beta::new(1.0, gamma).expect("gamma > 0");
    let sticks: Vec<f64> = (0..l.saturating_sub(1)).map(|_| dist.sample(rng)).collect();
    stick_breaking_from(&sticks, l)
}

/// `IW(nu, S)` draw via the Bartlett decomposition, given the lower Cholesky
/// factor `c` of `S`.
///
/// With `A` the Bartlett factor, `C^-T A A^T C^-1 ~ W(nu, S^-1)`, so the
/// inverse is `B B^T` with `B^T = A^-1 C^T`.
pub fn sample_inverse_wishart<R: Rng + ?Sized>(nu: f64, c: &DMatrix<f64>, rng: &mut R) -> DMatrix<f64> {
    let d = c.nrows();
    loop {
        let mut a = DMatrix::zeros(d, d);
        for i in 0..d {
            let chi: f64 = ChiSquared::new(nu - i as f64).expect("nu > D - 1").sample(rng);
            a[(i, i)] = chi.sqrt();
            for j in 0..i {
                a[(i, j)] = rng.sample(StandardNormal);
            }
        }
        let Some(bt) = a.solve_lower_triangular(&c.transpose()) else {
            continue;
        };
        let s = bt.transpose() * &bt;
        let s = (&s + s.transpose()) * 0.5;
        if s.iter().all(|v| v.is_finite()) && s.clone().cholesky().is_some() {
            return s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn degenerate_stick() {
        assert_eq!(stick_breaking_from(&[1.0, 0.3, 0.3], 4), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn halving_stick() {
        assert_eq!(stick_breaking_from(&[0.5; 4], 4), vec![0.5, 0.25, 0.125, 0.125]);
    }

    #[test]
    fn first_weight_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let mean = (0..n).map(|_| stick_breaking(1.0, 50, &mut rng)[0]).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
    }

    #[test]
    fn dirichlet_handles_tiny_concentrations() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let p = dirichlet(&[1e-3, 1e-3, 1e-3, 0.0], &mut rng);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
            assert_eq!(p[3], 0.0);
        }
    }

    #[test]
    fn dirichlet_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let alpha = [0.5, 2.0, 7.5];
        let n = 50_000;
        let mut acc = [0.0; 3];
        for _ in 0..n {
            for (a, p) in acc.iter_mut().zip(dirichlet(&alpha, &mut rng)) {
                *a += p / n as f64;
            }
        }
        for (a, al) in acc.iter().zip(alpha) {
            assert!((a - al / 10.0).abs() < 0.005, "{acc:?}");
        }
    }

    proptest::proptest! {
        #[test]
        fn stick_weights_are_a_simplex(gamma in 0.05f64..20.0, l in 1usize..40, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = stick_breaking(gamma, l, &mut rng);
            proptest::prop_assert_eq!(b.len(), l);
            proptest::prop_assert!(b.iter().all(|v| *v >= 0.0));
            proptest::prop_assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
