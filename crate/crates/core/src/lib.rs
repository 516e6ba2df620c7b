//! Lane-change interaction patterns from trajectory data.
//!
//! The pipeline turns each frame of a lane-changing vehicle into an
//! acceleration-sensitive Gaussian velocity field ([`field`]), compresses
//! the fields to 8-d codes ([`codec`]), appends ego kinematics and segments
//! the resulting feature sequences with a sticky HDP-HMM ([`bnp`]).
//! [`analysis`] turns the labels into occupancy, prototype and transition
//! summaries. [`ingest`] reads highD-style CSVs and [`synth`] generates
//! scripted traffic and ground-truth HMM data for testing.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bnp;
pub mod codec;
pub mod domain;
pub mod error;
pub mod field;
pub mod ingest;
pub mod pipeline;
pub mod synth;

pub use domain::{
    in_roi, relative_state, FeatureVector, FieldParams, FieldTensor, Point, RelativeState, RoiConfig, Scene,
    VehicleState, FEATURE_DIM, LATENT_DIM,
};
pub use error::{Error, Result};
