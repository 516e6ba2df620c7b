//! The whole pipeline on the bundled synthetic configuration, writing every
//! artifact and manifest to a temporary directory.
//!
//! Run with `cargo run --release --example end_to_end`.

use std::path::Path;

use lanescope::pipeline::{run, PipelineConfig, Stage};

fn main() -> lanescope::Result<()> {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/synthetic.json");
    let out = std::env::temp_dir().join("lanescope-end-to-end");
    let cfg = PipelineConfig::load(&config, &[format!("io.out_dir={}", out.display())])?;
    for manifest in run(Stage::Pipeline, &cfg)? {
        println!("{:12} {} output(s)", manifest.stage, manifest.outputs.len());
        for f in &manifest.outputs {
            println!("    {} {}", &f.sha256[..12], f.path);
        }
    }
    let occupancy = std::fs::read_to_string(out.join("analysis/occupancy.csv"))?;
    println!("occupancy:\n{occupancy}");
    Ok(())
}
