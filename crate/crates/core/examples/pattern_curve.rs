//! Pattern count versus data size: independent sampler runs on nested
//! prefixes of an 8-state ground-truth sequence, median over seeds.
//!
//! Run with `cargo run --release --example pattern_curve`.

use lanescope::analysis::pattern_count_curve;
use lanescope::bnp::HdpHmmHyper;
use lanescope::codec::standardize;
use lanescope::synth::{gen_hmm_sequence, HmmSpec};

fn main() -> lanescope::Result<()> {
    let (raw, _) = gen_hmm_sequence(&HmmSpec::separated(8, 4000, 0.95, 12, 3))?;
    let (x, _) = standardize(&raw);
    let curve = pattern_count_curve(&[x], &HdpHmmHyper::default(), 100, &[0.125, 0.5, 1.0], &[1, 2, 3])?;
    println!("{:>8} {:>6} {:>12} {:>6}", "fraction", "frames", "counts", "median");
    for p in &curve {
        println!(
            "{:>8} {:>6} {:>12} {:>6}",
            p.fraction,
            p.frames,
            format!("{:?}", p.counts),
            p.median
        );
    }
    Ok(())
}
