//! Sticky HDP-HMM segmentation of a ground-truth 3-state sequence: the
//! sampler starts with 25 candidate states and settles on the true count.
//!
//! Run with `cargo run --release --example segmentation`.

use lanescope::analysis::{matched_hamming_error, relabel_by_frequency};
use lanescope::bnp::{fit, HdpHmmHyper};
use lanescope::codec::standardize;
use lanescope::synth::{gen_hmm_sequence, HmmSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> lanescope::Result<()> {
    let (raw, truth) = gen_hmm_sequence(&HmmSpec::separated(3, 2000, 0.95, 12, 11))?;
    let (x, _) = standardize(&raw);
    let hyper = HdpHmmHyper::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let result = fit(&[x], &hyper, 150, &mut rng)?;

    let counts = &result.summary.effective_states;
    println!(
        "effective states every 25 sweeps: {:?}",
        counts.iter().step_by(25).collect::<Vec<_>>()
    );
    println!("final effective states: {}", result.effective_states);
    let ll = &result.loglik_history;
    println!("log-likelihood: first {:.1}, last {:.1}", ll[0], ll[ll.len() - 1]);

    let (labels, _) = relabel_by_frequency(&result.state.z[0]);
    println!("matched Hamming error: {:.4}", matched_hamming_error(&truth, &labels)?);
    let pi = &result.state.pi;
    let occ = &result.summary.occupancy;
    let top: Vec<f64> = (0..pi.nrows()).filter(|j| occ[*j] > 0).map(|j| pi[(j, j)]).collect();
    println!("self-transition probabilities of the occupied states: {top:.3?}");
    Ok(())
}
