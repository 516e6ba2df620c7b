//! Stage orchestration. Every stage reads and writes files under
//! `io.out_dir`, so stages re-run independently, and each writes a manifest
//! with input and output digests next to its artifacts.

mod artifacts;
mod config;
mod datasets;
mod stages;

pub use artifacts::{sha256_hex, FileDigest, Layout, Manifest};
pub use config::{apply_override, AnalysisConfig, BnpConfig, CodecConfig, EncoderKind, IoConfig, PipelineConfig};
pub use datasets::{synthetic_fields, synthetic_sequences};
pub use stages::{run, run_stage, run_with_threads, stage_seed, threads_from_env, Stage, THREADS_ENV};
