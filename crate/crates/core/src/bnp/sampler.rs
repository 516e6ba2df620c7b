use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::counts::{sample_aux_counts, sample_beta, sample_transitions, transition_counts};
use super::dist::stick_breaking;
use super::emission::sample_emissions;
use super::forward::{loglik, sample_labels};
use super::hyper::resample_hyperparameters;
use super::{HdpHmmHyper, HdpHmmState};
use crate::error::{Error, Result};

/// Occupancy share a state needs to count as effective.
pub const EFFECTIVE_SHARE: f64 = 0.01;

fn feature_dim(features: &[DMatrix<f64>]) -> Result<usize> {
    let first = features.first().ok_or(Error::EmptyDataset)?;
    let d = first.ncols();
    let mut total = 0;
    for x in features {
        if x.ncols() != d {
            return Err(Error::ShapeError {
                expected: format!("{d} feature columns"),
                got: x.ncols().to_string(),
            });
        }
        total += x.nrows();
    }
    if d == 0 || total < 2 {
        return Err(Error::EmptyDataset);
    }
    Ok(d)
}

/// Labels per state over all sequences.
pub fn occupancy(z: &[Vec<usize>], l: usize) -> Vec<usize> {
    let mut occ = vec![0; l];
    for k in z.iter().flatten() {
        occ[*k] += 1;
    }
    occ
}

/// Number of states holding more than 1% of all labels.
pub fn effective_state_count(z: &[Vec<usize>], l: usize) -> usize {
    let occ = occupancy(z, l);
    let total: usize = occ.iter().sum();
    occ.iter()
        .filter(|c| **c as f64 > EFFECTIVE_SHARE * total as f64)
        .count()
}

/// Draws `beta` from the stick-breaking prior and labels every frame with a
/// uniformly random state; transitions and covariances are then drawn from
/// their conditionals given those labels.
pub fn init_state<R: Rng + ?Sized>(features: &[DMatrix<f64>], hyper: &HdpHmmHyper, rng: &mut R) -> Result<HdpHmmState> {
    hyper.validate()?;
    let d = feature_dim(features)?;
    let prior = hyper.emission_prior(d)?;
    let l = hyper.truncation;
    let beta = stick_breaking(hyper.gamma, l, rng);
    let z: Vec<Vec<usize>> = features
        .iter()
        .map(|x| (0..x.nrows()).map(|_| rng.random_range(0..l)).collect())
        .collect();
    let n = transition_counts(&z, l);
    let aux = sample_aux_counts(&n, &beta, hyper, rng);
    let pi = sample_transitions(&beta, &n, hyper, rng);
    let sigmas = sample_emissions(features, &z, l, &prior, rng)?;
    let ll = loglik(features, &pi, &sigmas, &beta)?;
    Ok(HdpHmmState {
        beta,
        pi,
        sigmas,
        z,
        n,
        m: aux.m,
        w: aux.w,
        loglik: ll,
    })
}

/// One blocked Gibbs sweep: labels, counts, auxiliary counts, `beta`,
/// transition rows, emissions, then hyperparameters when enabled.
pub fn gibbs_sweep<R: Rng + ?Sized>(
    state: &mut HdpHmmState,
    features: &[DMatrix<f64>],
    hyper: &mut HdpHmmHyper,
    rng: &mut R,
) -> Result<()> {
    let d = feature_dim(features)?;
    let prior = hyper.emission_prior(d)?;
    let l = state.num_states();
    state.z = sample_labels(features, &state.pi, &state.sigmas, &state.beta, rng)?;
    state.n = transition_counts(&state.z, l);
    let aux = sample_aux_counts(&state.n, &state.beta, hyper, rng);
    state.beta = sample_beta(&aux.m_bar, hyper.gamma, rng);
    state.m = aux.m;
    state.w = aux.w;
    state.pi = sample_transitions(&state.beta, &state.n, hyper, rng);
    state.sigmas = sample_emissions(features, &state.z, l, &prior, rng)?;
    if hyper.hyper_resampling {
        *hyper = resample_hyperparameters(state, hyper, rng);
    }
    state.loglik = loglik(features, &state.pi, &state.sigmas, &state.beta)?;
    Ok(())
}

/// Per-iteration diagnostics and the final chain parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub iterations: usize,
    pub loglik: Vec<f64>,
    pub effective_states: Vec<usize>,
    pub final_beta: Vec<f64>,
    pub final_pi: Vec<Vec<f64>>,
    pub occupancy: Vec<usize>,
    pub hyper: HdpHmmHyper,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub summary: ChainSummary,
    pub loglik_history: Vec<f64>,
    pub state: HdpHmmState,
    pub hyper: HdpHmmHyper,
    pub effective_states: usize,
}

/// Runs `iterations` sweeps from [`init_state`].
pub fn fit<R: Rng + ?Sized>(
    features: &[DMatrix<f64>],
    hyper: &HdpHmmHyper,
    iterations: usize,
    rng: &mut R,
) -> Result<FitResult> {
    let mut hyper = hyper.clone();
    let mut state = init_state(features, &hyper, rng)?;
    let l = state.num_states();
    let mut history = Vec::with_capacity(iterations);
    let mut effective = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        gibbs_sweep(&mut state, features, &mut hyper, rng)?;
        history.push(state.loglik);
        effective.push(effective_state_count(&state.z, l));
    }
    let count = effective_state_count(&state.z, l);
    let summary = ChainSummary {
        iterations,
        loglik: history.clone(),
        effective_states: effective,
        final_beta: state.beta.clone(),
        final_pi: state.pi.row_iter().map(|r| r.iter().copied().collect()).collect(),
        occupancy: occupancy(&state.z, l),
        hyper: hyper.clone(),
    };
    Ok(FitResult {
        summary,
        loglik_history: history,
        state,
        hyper,
        effective_states: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_hmm_sequence, HmmSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn data(k: usize, t: usize, seed: u64) -> (DMatrix<f64>, Vec<usize>) {
        gen_hmm_sequence(&HmmSpec::separated(k, t, 0.95, 12, seed)).unwrap()
    }

    fn check_invariants(s: &HdpHmmState) {
        let l = s.num_states();
        assert!((s.beta.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!(s.beta.iter().all(|b| *b >= 0.0));
        for r in s.pi.row_iter() {
            assert!((r.sum() - 1.0).abs() < 1e-10);
        }
        assert!(s.sigmas.iter().all(|c| c.clone().cholesky().is_some()));
        assert_eq!(s.n, transition_counts(&s.z, l));
        for j in 0..l {
            assert!(s.w[j] <= s.m[(j, j)]);
            for k in 0..l {
                assert!(s.m[(j, k)] <= s.n[(j, k)]);
            }
        }
    }

    #[test]
    fn sweeps_keep_invariants() {
        let (x, _) = data(3, 400, 1);
        let mut hyper = HdpHmmHyper {
            truncation: 8,
            hyper_resampling: true,
            ..HdpHmmHyper::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let feats = [x];
        let mut s = init_state(&feats, &hyper, &mut rng).unwrap();
        for _ in 0..10 {
            gibbs_sweep(&mut s, &feats, &mut hyper, &mut rng).unwrap();
            check_invariants(&s);
            hyper.validate().unwrap();
        }
    }

    #[test]
    fn fit_is_reproducible() {
        let (x, _) = data(2, 300, 3);
        let hyper = HdpHmmHyper {
            truncation: 6,
            ..HdpHmmHyper::default()
        };
        let run = || fit(std::slice::from_ref(&x), &hyper, 15, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let (a, b) = (run(), run());
        assert_eq!(
            a.loglik_history.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.loglik_history.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(a.state, b.state);
    }

    #[test]
    fn single_state_data_uses_one_state() {
        let (x, _) = data(1, 1000, 5);
        for seed in [6, 1, 2, 3, 4] {
            let r = fit(
                std::slice::from_ref(&x),
                &HdpHmmHyper::default(),
                200,
                &mut ChaCha8Rng::seed_from_u64(seed),
            )
            .unwrap();
            let tail = &r.summary.effective_states[150..];
            assert!(tail.iter().all(|c| *c == 1), "seed {seed}: {tail:?}");
        }
    }

    #[test]
    fn rejects_short_or_ragged_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let h = HdpHmmHyper::default();
        assert!(init_state(&[], &h, &mut rng).is_err());
        assert!(init_state(&[DMatrix::zeros(1, 12)], &h, &mut rng).is_err());
        assert!(init_state(&[DMatrix::zeros(3, 12), DMatrix::zeros(3, 11)], &h, &mut rng).is_err());
    }

    #[test]
    fn effective_count_uses_one_percent() {
        let mut z = vec![0; 990];
        z.extend(vec![1; 10]);
        assert_eq!(effective_state_count(&[z.clone()], 3), 1);
        z.push(1);
        assert_eq!(effective_state_count(&[z], 3), 2);
    }
}
