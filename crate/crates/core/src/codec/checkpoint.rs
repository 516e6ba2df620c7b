//! JSON checkpoints with base64 little-endian f64 parameter blobs.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::cae::CaeModel;
use super::layers::LayerSpec;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "lanescope-cae/1";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerBlob {
    pub spec: LayerSpec,
    pub weights: String,
    pub bias: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub seed: u64,
    pub iterations: u64,
    pub input_scale: f64,
    pub layers: Vec<LayerBlob>,
}

pub fn encode_f64s(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

pub fn decode_f64s(text: &str) -> Result<Vec<f64>> {
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| Error::InvalidConfig(format!("bad base64 parameter blob: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::InvalidConfig(
            "parameter blob length is not a multiple of 8".into(),
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

impl Checkpoint {
    pub fn from_model(model: &CaeModel) -> Self {
        let layers = model
            .layers()
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let (w, b) = model.layer_params(i);
                LayerBlob {
                    spec: *spec,
                    weights: encode_f64s(w),
                    bias: encode_f64s(b),
                }
            })
            .collect();
        Self {
            format: CHECKPOINT_FORMAT.into(),
            seed: model.seed,
            iterations: model.iterations,
            input_scale: model.input_scale,
            layers,
        }
    }

    pub fn into_model(self) -> Result<CaeModel> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::InvalidConfig(format!(
                "unknown checkpoint format `{}`",
                self.format
            )));
        }
        let mut specs = Vec::with_capacity(self.layers.len());
        let mut params = Vec::new();
        for blob in &self.layers {
            let w = decode_f64s(&blob.weights)?;
            let b = decode_f64s(&blob.bias)?;
            if w.len() != blob.spec.weight_len() || b.len() != blob.spec.out_channels {
                return Err(Error::ShapeError {
                    expected: format!("{} weights, {} biases", blob.spec.weight_len(), blob.spec.out_channels),
                    got: format!("{} weights, {} biases", w.len(), b.len()),
                });
            }
            specs.push(blob.spec);
            params.extend(w);
            params.extend(b);
        }
        CaeModel::from_parts(specs, params, self.seed, self.iterations, self.input_scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::cae::cae_init;

    #[test]
    fn checkpoint_roundtrip_is_exact() {
        let mut model = cae_init(21);
        model.iterations = 17;
        model.input_scale = 3.25;
        let text = serde_json::to_string(&Checkpoint::from_model(&model)).unwrap();
        let back: Checkpoint = serde_json::from_str(&text).unwrap();
        assert_eq!(back.into_model().unwrap(), model);
    }

    #[test]
    fn rejects_truncated_blob() {
        let model = cae_init(1);
        let mut ck = Checkpoint::from_model(&model);
        ck.layers[2].bias = encode_f64s(&[0.0; 3]);
        assert!(ck.into_model().is_err());
    }

    proptest::proptest! {
        #[test]
        fn blob_roundtrip(values in proptest::collection::vec(proptest::num::f64::ANY, 0..64)) {
            let back = decode_f64s(&encode_f64s(&values)).unwrap();
            proptest::prop_assert_eq!(
                back.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                values.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
    }
}
