use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};

use super::{GammaPrior, HdpHmmHyper, HdpHmmState};

/// Auxiliary-variable sweeps per concentration update.
const CONCENTRATION_STEPS: usize = 20;

/// Updates `gamma`, `alpha + kappa` and `rho` from the table and override
/// counts of `state`. Returns `hyper` unchanged when resampling is off.
pub fn resample_hyperparameters<R: Rng + ?Sized>(state: &HdpHmmState, hyper: &HdpHmmHyper, rng: &mut R) -> HdpHmmHyper {
    let mut out = hyper.clone();
    if !hyper.hyper_resampling {
        return out;
    }
    let m_bar = state.m_bar();
    let l = m_bar.ncols();
    let tables_per_dish: Vec<usize> = (0..l).map(|k| m_bar.column(k).sum()).collect();
    let dishes = tables_per_dish.iter().filter(|c| **c > 0).count();
    let top_tables: usize = tables_per_dish.iter().sum();
    out.gamma = resample_dp_concentration(hyper.gamma, hyper.gamma_prior, dishes, top_tables, rng);

    let customers: Vec<usize> = (0..l).map(|j| state.n.row(j).sum()).collect();
    let tables: usize = state.m.iter().sum();
    out.alpha_plus_kappa =
        resample_hdp_concentration(hyper.alpha_plus_kappa, hyper.alpha_kappa_prior, &customers, tables, rng);

    let overrides: usize = state.w.iter().sum();
    let rho: f64 = Beta::new(
        hyper.rho_prior.a + overrides as f64,
        hyper.rho_prior.b + (tables - overrides) as f64,
    )
    .expect("positive Beta parameters")
    .sample(rng);
    out.rho = rho.min(1.0 - 1e-12);
    out
}

fn gamma_draw<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    let g: f64 = Gamma::new(shape, 1.0 / rate)
        .expect("positive gamma parameters")
        .sample(rng);
    g.max(f64::MIN_POSITIVE)
}

/// Escobar-West update for a DP concentration with `k` clusters over `n` draws.
fn resample_dp_concentration<R: Rng + ?Sized>(current: f64, prior: GammaPrior, k: usize, n: usize, rng: &mut R) -> f64 {
    if n == 0 {
        return gamma_draw(prior.shape, prior.rate, rng);
    }
    let mut c = current;
    for _ in 0..CONCENTRATION_STEPS {
        let eta: f64 = Beta::new(c + 1.0, n as f64).expect("positive").sample(rng);
        let rate = prior.rate - eta.max(f64::MIN_POSITIVE).ln();
        let odds = (prior.shape + k as f64 - 1.0) / (n as f64 * rate);
        let shape = if rng.random::<f64>() < odds / (1.0 + odds) {
            prior.shape + k as f64
        } else {
            prior.shape + k as f64 - 1.0
        };
        c = gamma_draw(shape.max(f64::MIN_POSITIVE), rate, rng);
    }
    c
}

/// Concentration shared by several restaurants with `customers[j]` diners
/// and `tables` occupied tables overall.
fn resample_hdp_concentration<R: Rng + ?Sized>(
    current: f64,
    prior: GammaPrior,
    customers: &[usize],
    tables: usize,
    rng: &mut R,
) -> f64 {
    if customers.iter().all(|n| *n == 0) {
        return gamma_draw(prior.shape, prior.rate, rng);
    }
    let mut c = current;
    for _ in 0..CONCENTRATION_STEPS {
        let mut log_r = 0.0;
        let mut s = 0usize;
        for &n in customers.iter().filter(|n| **n > 0) {
            let r: f64 = Beta::new(c + 1.0, n as f64).expect("positive").sample(rng);
            log_r += r.max(f64::MIN_POSITIVE).ln();
            if rng.random::<f64>() < n as f64 / (n as f64 + c) {
                s += 1;
            }
        }
        let shape = prior.shape + tables as f64 - s as f64;
        c = gamma_draw(shape.max(f64::MIN_POSITIVE), prior.rate - log_r, rng);
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state(n: DMatrix<usize>, m: DMatrix<usize>, w: Vec<usize>) -> HdpHmmState {
        let l = n.nrows();
        HdpHmmState {
            beta: vec![1.0 / l as f64; l],
            pi: DMatrix::from_element(l, l, 1.0 / l as f64),
            sigmas: vec![DMatrix::identity(2, 2); l],
            z: vec![],
            n,
            m,
            w,
            loglik: 0.0,
        }
    }

    #[test]
    fn disabled_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let h = HdpHmmHyper::default();
        let s = state(
            DMatrix::from_element(3, 3, 4),
            DMatrix::from_element(3, 3, 2),
            vec![1, 1, 1],
        );
        assert_eq!(resample_hyperparameters(&s, &h, &mut rng), h);
    }

    #[test]
    fn many_tables_push_gamma_up() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let l = 25;
        // every transition opened its own table on its own dish
        let n = DMatrix::from_fn(l, l, |j, k| usize::from(k == (j + 1) % l));
        let s = state(n.clone(), n, vec![0; l]);
        let mut h = HdpHmmHyper {
            hyper_resampling: true,
            ..HdpHmmHyper::default()
        };
        let prior_mean = h.gamma_prior.shape / h.gamma_prior.rate;
        let draws = 1000;
        let mut above = 0;
        for _ in 0..draws {
            h = resample_hyperparameters(&s, &h, &mut rng);
            assert!(h.gamma > 0.0 && h.alpha_plus_kappa > 0.0 && (0.0..1.0).contains(&h.rho));
            above += usize::from(h.gamma > prior_mean);
        }
        // one-sided sign test at p < 0.01 needs at least 537 of 1000
        assert!(above >= 537, "{above}");
    }

    #[test]
    fn all_overrides_push_rho_up() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let l = 4;
        let n = DMatrix::from_fn(l, l, |j, k| if j == k { 50 } else { 0 });
        let m = DMatrix::from_fn(l, l, |j, k| if j == k { 6 } else { 0 });
        let s = state(n, m, vec![6; l]);
        let mut h = HdpHmmHyper {
            hyper_resampling: true,
            ..HdpHmmHyper::default()
        };
        let draws = 1000;
        let mut sum = 0.0;
        for _ in 0..draws {
            h = resample_hyperparameters(&s, &h, &mut rng);
            sum += h.rho;
        }
        assert!(sum / draws as f64 > 0.9);
    }
}
