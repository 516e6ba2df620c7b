//! Field compression: a short autoencoder run on synthetic AS-GVF tensors,
//! a checkpoint round trip, and the linear (PCA) fallback for comparison.
//!
//! Run with `cargo run --release --example autoencoder`.

use lanescope::codec::{
    block_means, cae_init, cae_trace_shapes, cae_train, dataset_mse, linear_fallback_fit, Checkpoint, TrainConfig,
};
use lanescope::pipeline::synthetic_fields;
use lanescope::synth::TrafficConfig;
use lanescope::{FieldParams, RoiConfig};

fn main() -> lanescope::Result<()> {
    let fields = synthetic_fields(
        &TrafficConfig::default(),
        &RoiConfig::default(),
        &FieldParams::default(),
        256,
        1,
    )?;
    let model = cae_init(0);
    println!("layer shapes: {:?}", cae_trace_shapes(&model, &fields[0])?);
    println!("parameters: {}", model.param_count());

    let cfg = TrainConfig {
        batch_size: 32,
        max_iterations: 200,
        ..TrainConfig::default()
    };
    let (model, history) = cae_train(model, &fields, &cfg)?;
    println!("loss per 50 iterations: {:?}", block_means(&history, 50));
    println!("dataset MSE (scaled units): {:.3e}", dataset_mse(&model, &fields)?);

    let code = model.encode(&fields[0])?;
    println!("latent code of the first field: {code:.3?}");

    let json = serde_json::to_string(&Checkpoint::from_model(&model))?;
    let restored: Checkpoint = serde_json::from_str(&json)?;
    assert_eq!(restored.into_model()?.encode(&fields[0])?, code);
    println!("checkpoint round trip: {} bytes, identical codes", json.len());

    let pca = linear_fallback_fit(&fields, 8)?;
    let err: f64 = fields
        .iter()
        .map(|f| {
            let back = pca.decode(&pca.encode(f).expect("shape matches"), f.frame);
            f.values()
                .iter()
                .zip(back.values())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                / f.values().len() as f64
        })
        .sum::<f64>()
        / fields.len() as f64;
    println!("linear fallback reconstruction MSE (m/s squared): {err:.3e}");
    Ok(())
}
