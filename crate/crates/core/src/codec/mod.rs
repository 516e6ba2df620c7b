//! Field compression: a convolutional autoencoder trained with Nadam, a
//! PCA fallback, and assembly of the 12-d per-frame features.

mod cae;
mod checkpoint;
mod features;
mod layers;
mod linear;
mod nadam;
mod train;

pub use cae::{
    cae_forward, cae_gradients, cae_init, cae_loss, cae_trace_shapes, shape_chain, CaeModel, Gradients, ARCHITECTURE,
    FIELD_COLS, FIELD_LEN, FIELD_ROWS, LATENT_LAYER,
};
pub use checkpoint::{decode_f64s, encode_f64s, Checkpoint, LayerBlob, CHECKPOINT_FORMAT};
pub use features::{build_features, standardize, Standardizer};
pub use layers::{LayerKind, LayerSpec};
pub use linear::{linear_fallback_encode, linear_fallback_fit, LinearProjection};
pub use nadam::Nadam;
pub use train::{auto_scale, block_means, cae_train, dataset_mse, TrainConfig};

use serde::{Deserialize, Serialize};

use crate::domain::{FieldTensor, LATENT_DIM};
use crate::error::{Error, Result};

/// A fitted field encoder, serialized as a tagged JSON document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "encoder", rename_all = "snake_case")]
pub enum Encoder {
    Cae { checkpoint: Checkpoint },
    Linear { projection: LinearProjection },
}

impl Encoder {
    pub fn from_cae(model: &CaeModel) -> Self {
        Encoder::Cae {
            checkpoint: Checkpoint::from_model(model),
        }
    }

    /// Ready-to-run form; decodes the checkpoint once.
    pub fn load(self) -> Result<LoadedEncoder> {
        Ok(match self {
            Encoder::Cae { checkpoint } => LoadedEncoder::Cae(checkpoint.into_model()?),
            Encoder::Linear { projection } => {
                if projection.dim() != LATENT_DIM {
                    return Err(Error::ShapeError {
                        expected: format!("{LATENT_DIM} components"),
                        got: projection.dim().to_string(),
                    });
                }
                LoadedEncoder::Linear(projection)
            }
        })
    }
}

pub enum LoadedEncoder {
    Cae(CaeModel),
    Linear(LinearProjection),
}

impl LoadedEncoder {
    pub fn encode(&self, field: &FieldTensor) -> Result<[f64; LATENT_DIM]> {
        match self {
            LoadedEncoder::Cae(m) => m.encode(field),
            LoadedEncoder::Linear(p) => {
                let v = p.encode(field)?;
                let mut code = [0.0; LATENT_DIM];
                code.copy_from_slice(&v);
                Ok(code)
            }
        }
    }
}
