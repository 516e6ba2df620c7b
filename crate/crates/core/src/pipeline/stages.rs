use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::artifacts::{open, write_file, FileDigest, Layout, Manifest};
use super::config::{EncoderKind, PipelineConfig};
use crate::analysis::{
    lateral_state_table, occupancy_histogram, pattern_count_curve, prototype_fields, relabel_sequences,
    write_curve_csv, write_lateral_csv, write_occupancy_csv, write_occupancy_json, write_prototypes_json,
    TransitionMatrix,
};
use crate::bnp::{fit, ChainSummary};
use crate::codec::{build_features, cae_init, cae_train, linear_fallback_fit, Encoder, Standardizer};
use crate::domain::{FieldTensor, Scene, FEATURE_DIM, LATENT_DIM};
use crate::error::{check_len, Error, Result};
use crate::field::{as_gvf, FieldRecord};
use crate::ingest::{
    downsample, lane_change_sequences, normalize, parse_tracks, read_scenes_jsonl, write_scenes_jsonl,
    write_tracks_csv, Region, Track,
};
use crate::synth::{gen_traffic, to_highd_axes};

/// Environment variable capping the worker count; 0 or unset means automatic.
pub const THREADS_ENV: &str = "LANESCOPE_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Synth,
    Ingest,
    Fields,
    TrainCodec,
    Encode,
    Segment,
    Analyze,
    Pipeline,
}

impl Stage {
    /// The stages `Pipeline` chains, in order.
    pub const CHAIN: [Stage; 7] = [
        Stage::Synth,
        Stage::Ingest,
        Stage::Fields,
        Stage::TrainCodec,
        Stage::Encode,
        Stage::Segment,
        Stage::Analyze,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Ingest => "ingest",
            Stage::Fields => "fields",
            Stage::TrainCodec => "train-codec",
            Stage::Encode => "encode",
            Stage::Segment => "segment",
            Stage::Analyze => "analyze",
            Stage::Pipeline => "pipeline",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::CHAIN
            .into_iter()
            .chain([Stage::Pipeline])
            .find(|st| st.as_str() == s)
    }
}

/// Seed of one stage, derived from the run seed and the stage name.
pub fn stage_seed(seed: u64, stage: Stage) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(stage.as_str().as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

pub fn threads_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("{THREADS_ENV} must be a nonnegative integer, got `{v}`"))),
    }
}

/// [`run`] inside a dedicated pool of `threads` workers (0 = automatic).
pub fn run_with_threads(stage: Stage, cfg: &PipelineConfig, threads: usize) -> Result<Vec<Manifest>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    pool.install(|| run(stage, cfg))
}

/// Runs one stage, or every stage for `Pipeline`. `synth` is skipped by
/// `Pipeline` when `io.tracks_dir` points at existing data.
pub fn run(stage: Stage, cfg: &PipelineConfig) -> Result<Vec<Manifest>> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.io.out_dir, cfg.io.tracks_dir.as_deref());
    match stage {
        Stage::Pipeline => Stage::CHAIN
            .into_iter()
            .filter(|s| *s != Stage::Synth || cfg.io.tracks_dir.is_none())
            .map(|s| run_stage(s, cfg, &layout))
            .collect(),
        s => Ok(vec![run_stage(s, cfg, &layout)?]),
    }
}

/// Runs a single stage and writes its manifest.
pub fn run_stage(stage: Stage, cfg: &PipelineConfig, layout: &Layout) -> Result<Manifest> {
    let seed = stage_seed(cfg.seed, stage);
    let (inputs, outputs) = match stage {
        Stage::Synth => synth(cfg, layout, seed)?,
        Stage::Ingest => ingest(cfg, layout)?,
        Stage::Fields => fields(cfg, layout)?,
        Stage::TrainCodec => train_codec(cfg, layout)?,
        Stage::Encode => encode(layout)?,
        Stage::Segment => segment(cfg, layout, seed)?,
        Stage::Analyze => analyze(cfg, layout)?,
        Stage::Pipeline => return Err(Error::InvalidConfig("pipeline is not a single stage".into())),
    };
    let digests = |paths: &[PathBuf]| paths.iter().map(|p| FileDigest::of(p)).collect::<Result<Vec<_>>>();
    let manifest = Manifest {
        stage: stage.as_str().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        stage_seed: seed,
        config: cfg.to_value(),
        inputs: digests(&inputs)?,
        outputs: digests(&outputs)?,
    };
    write_file(&layout.manifest(stage.as_str()), |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest)?;
        Ok(w.write_all(b"\n")?)
    })?;
    Ok(manifest)
}

type Io = (Vec<PathBuf>, Vec<PathBuf>);

fn synth(cfg: &PipelineConfig, layout: &Layout, seed: u64) -> Result<Io> {
    let cols = &cfg.io.columns;
    if cfg.synth.rate_hz != cols.source_hz as f64 {
        return Err(Error::InvalidConfig(format!(
            "synth.rate_hz ({}) must equal io.columns.source_hz ({})",
            cfg.synth.rate_hz, cols.source_hz
        )));
    }
    let recordings = gen_traffic(&cfg.synth, seed)?;
    std::fs::create_dir_all(&layout.tracks_dir)?;
    for stale in csv_files(&layout.tracks_dir)? {
        std::fs::remove_file(stale)?;
    }
    let mut outputs = Vec::new();
    for (i, tracks) in recordings.iter().enumerate() {
        let path = layout.tracks_dir.join(format!("recording_{:02}.csv", i + 1));
        write_file(&path, |w| write_tracks_csv(&to_highd_axes(tracks), cols, w))?;
        outputs.push(path);
    }
    Ok((Vec::new(), outputs))
}

fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::PathNotFound(dir.to_path_buf()));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.is_file() && p.extension().is_some_and(|e| e == "csv"));
    files.sort();
    Ok(files)
}

/// One row of `sequences.csv`, aligned with the lines of `scenes.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SequenceRow {
    sequence: usize,
    recording: String,
    vehicle_id: i64,
    frame: i64,
    region: Region,
}

fn ingest(cfg: &PipelineConfig, layout: &Layout) -> Result<Io> {
    let cols = &cfg.io.columns;
    let files = csv_files(&layout.tracks_dir)?;
    if files.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut scenes = Vec::new();
    let mut rows = Vec::new();
    let mut sequence = 0;
    for file in &files {
        let tracks = normalize(parse_tracks(open(file)?, cols)?)?;
        let down: Vec<Track> = tracks.iter().map(|t| downsample(t, cols)).collect::<Result<_>>()?;
        let recording = file
            .file_stem()
            .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        for lc in lane_change_sequences(&down, &cfg.roi, cfg.io.region_buffer_s, cols.target_hz as f64)? {
            sequence += 1;
            for (scene, region) in lc.scenes.into_iter().zip(lc.regions) {
                rows.push(SequenceRow {
                    sequence,
                    recording: recording.clone(),
                    vehicle_id: lc.vehicle_id,
                    frame: scene.frame,
                    region,
                });
                scenes.push(scene);
            }
        }
    }
    if scenes.is_empty() {
        return Err(Error::NoLaneChange);
    }
    write_file(&layout.scenes(), |w| write_scenes_jsonl(&scenes, w))?;
    write_file(&layout.sequences(), |w| write_csv_rows(&rows, w))?;
    Ok((files, vec![layout.scenes(), layout.sequences()]))
}

fn write_csv_rows<T: Serialize, W: Write>(rows: &[T], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_csv_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(open(path)?);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

fn read_scenes(layout: &Layout) -> Result<Vec<Scene>> {
    read_scenes_jsonl(open(&layout.scenes())?)
}

fn read_fields(layout: &Layout) -> Result<Vec<FieldTensor>> {
    let records: Vec<FieldRecord> = serde_json::from_reader(open(&layout.fields())?)?;
    records.iter().map(FieldRecord::to_tensor).collect()
}

fn fields(cfg: &PipelineConfig, layout: &Layout) -> Result<Io> {
    let scenes = read_scenes(layout)?;
    let fields: Vec<FieldTensor> = scenes
        .par_iter()
        .map(|s| as_gvf(s, &cfg.roi, &cfg.field))
        .collect::<Result<_>>()?;
    let records: Vec<FieldRecord> = fields.iter().map(|f| FieldRecord::new(f, &cfg.roi)).collect();
    write_file(&layout.fields(), |w| Ok(serde_json::to_writer(w, &records)?))?;
    Ok((vec![layout.scenes()], vec![layout.fields()]))
}

fn train_codec(cfg: &PipelineConfig, layout: &Layout) -> Result<Io> {
    let data = read_fields(layout)?;
    let mut outputs = vec![layout.encoder()];
    let encoder = match cfg.codec.encoder {
        EncoderKind::Linear => Encoder::Linear {
            projection: linear_fallback_fit(&data, LATENT_DIM)?,
        },
        EncoderKind::Cae => {
            let train = &cfg.codec.train;
            let (model, history) = cae_train(cae_init(train.seed), &data, train)?;
            write_file(&layout.codec_loss(), |w| {
                let mut c = csv::Writer::from_writer(w);
                c.write_record(["iteration", "loss"])?;
                for (i, l) in history.iter().enumerate() {
                    c.write_record([(i + 1).to_string(), l.to_string()])?;
                }
                Ok(c.flush()?)
            })?;
            outputs.push(layout.codec_loss());
            Encoder::from_cae(&model)
        }
    };
    write_file(&layout.encoder(), |w| Ok(serde_json::to_writer(w, &encoder)?))?;
    Ok((vec![layout.fields()], outputs))
}

const FEATURE_NAMES: [&str; FEATURE_DIM] = ["vx", "vy", "ax", "ay", "h1", "h2", "h3", "h4", "h5", "h6", "h7", "h8"];

fn encode(layout: &Layout) -> Result<Io> {
    let encoder: Encoder = serde_json::from_reader(open(&layout.encoder())?)?;
    let encoder = encoder.load()?;
    let fields = read_fields(layout)?;
    let scenes = read_scenes(layout)?;
    let rows: Vec<SequenceRow> = read_csv_rows(&layout.sequences())?;
    check_len(fields.len(), scenes.len())?;
    check_len(rows.len(), scenes.len())?;
    if let Some(i) = (0..rows.len()).find(|&i| rows[i].frame != scenes[i].frame || fields[i].frame != scenes[i].frame) {
        return Err(Error::ShapeError {
            expected: format!("frame {} at row {i}", scenes[i].frame),
            got: format!("frames {} and {}", rows[i].frame, fields[i].frame),
        });
    }
    let latents: Vec<[f64; LATENT_DIM]> = fields.par_iter().map(|f| encoder.encode(f)).collect::<Result<_>>()?;
    let ego: Vec<_> = scenes.iter().map(|s| s.ego).collect();
    let features = build_features(&ego, &latents)?;
    write_file(&layout.features(), |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["sequence", "frame"].into_iter().chain(FEATURE_NAMES))?;
        for (t, row) in rows.iter().enumerate() {
            let mut rec = vec![row.sequence.to_string(), row.frame.to_string()];
            rec.extend(features.row(t).iter().map(f64::to_string));
            c.write_record(rec)?;
        }
        Ok(c.flush()?)
    })?;
    Ok((
        vec![layout.encoder(), layout.fields(), layout.scenes(), layout.sequences()],
        vec![layout.features()],
    ))
}

/// Feature rows of one sequence.
struct FeatureBlock {
    sequence: usize,
    frames: Vec<i64>,
    values: DMatrix<f64>,
}

fn read_features(layout: &Layout) -> Result<Vec<FeatureBlock>> {
    let path = layout.features();
    let mut r = csv::Reader::from_reader(open(&path)?);
    let width = 2 + FEATURE_DIM;
    if r.headers()?.len() != width {
        return Err(Error::ShapeError {
            expected: format!("{width} feature columns"),
            got: r.headers()?.len().to_string(),
        });
    }
    let mut blocks: Vec<(usize, Vec<i64>, Vec<f64>)> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |j: usize| -> Result<&str> {
            rec.get(j).ok_or_else(|| Error::ShapeError {
                expected: format!("{width} columns"),
                got: rec.len().to_string(),
            })
        };
        let parse_err = |j: usize, what: &str| Error::ParseError {
            row: i + 1,
            column: j.to_string(),
            reason: format!("expected {what}"),
        };
        let sequence: usize = field(0)?.parse().map_err(|_| parse_err(0, "a sequence id"))?;
        let frame: i64 = field(1)?.parse().map_err(|_| parse_err(1, "a frame index"))?;
        if blocks.last().is_none_or(|b| b.0 != sequence) {
            blocks.push((sequence, Vec::new(), Vec::new()));
        }
        let b = blocks.last_mut().expect("just pushed");
        b.1.push(frame);
        for j in 2..width {
            let v: f64 = field(j)?.parse().map_err(|_| parse_err(j, "a number"))?;
            b.2.push(v);
        }
    }
    if blocks.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(blocks
        .into_iter()
        .map(|(sequence, frames, v)| FeatureBlock {
            sequence,
            values: DMatrix::from_row_slice(frames.len(), FEATURE_DIM, &v),
            frames,
        })
        .collect())
}

/// Standardized features, one matrix per sequence.
fn standardized(blocks: &[FeatureBlock]) -> (Vec<DMatrix<f64>>, Standardizer) {
    let refs: Vec<&DMatrix<f64>> = blocks.iter().map(|b| &b.values).collect();
    let s = Standardizer::fit(&refs);
    (blocks.iter().map(|b| s.apply(&b.values)).collect(), s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LabelRow {
    sequence: usize,
    frame: i64,
    label: usize,
}

#[derive(Serialize)]
struct SegmentReport<'a> {
    #[serde(flatten)]
    chain: &'a ChainSummary,
    /// Sampler state index to pattern id.
    relabel: &'a BTreeMap<usize, usize>,
    standardizer: &'a Standardizer,
}

fn segment(cfg: &PipelineConfig, layout: &Layout, seed: u64) -> Result<Io> {
    let blocks = read_features(layout)?;
    let (x, standardizer) = standardized(&blocks);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let result = fit(&x, &cfg.bnp.hyper, cfg.bnp.iterations, &mut rng)?;
    let (labels, relabel) = relabel_sequences(&result.state.z);
    let rows: Vec<LabelRow> = blocks
        .iter()
        .zip(&labels)
        .flat_map(|(b, z)| {
            b.frames.iter().zip(z).map(|(&frame, &label)| LabelRow {
                sequence: b.sequence,
                frame,
                label,
            })
        })
        .collect();
    write_file(&layout.labels(), |w| write_csv_rows(&rows, w))?;
    let report = SegmentReport {
        chain: &result.summary,
        relabel: &relabel,
        standardizer: &standardizer,
    };
    write_file(&layout.chain_summary(), |w| {
        serde_json::to_writer_pretty(&mut *w, &report)?;
        Ok(w.write_all(b"\n")?)
    })?;
    Ok((vec![layout.features()], vec![layout.labels(), layout.chain_summary()]))
}

fn analyze(cfg: &PipelineConfig, layout: &Layout) -> Result<Io> {
    let labels: Vec<LabelRow> = read_csv_rows(&layout.labels())?;
    let rows: Vec<SequenceRow> = read_csv_rows(&layout.sequences())?;
    let fields = read_fields(layout)?;
    let scenes = read_scenes(layout)?;
    check_len(labels.len(), rows.len())?;
    check_len(fields.len(), rows.len())?;
    check_len(scenes.len(), rows.len())?;
    if let Some(i) =
        (0..rows.len()).find(|&i| labels[i].sequence != rows[i].sequence || labels[i].frame != rows[i].frame)
    {
        return Err(Error::ShapeError {
            expected: format!("sequence {} frame {} at row {i}", rows[i].sequence, rows[i].frame),
            got: format!("sequence {} frame {}", labels[i].sequence, labels[i].frame),
        });
    }
    let flat: Vec<usize> = labels.iter().map(|l| l.label).collect();
    let ego: Vec<_> = scenes.iter().map(|s| s.ego).collect();
    let mut outputs = Vec::new();
    let mut emit = |name: &str, body: &dyn Fn(&mut dyn Write) -> Result<()>| -> Result<()> {
        let path = layout.analysis(name);
        write_file(&path, |w| body(w))?;
        outputs.push(path);
        Ok(())
    };

    let hist = occupancy_histogram(&flat);
    emit("occupancy.json", &|w| write_occupancy_json(&hist, w))?;
    emit("occupancy.csv", &|w| write_occupancy_csv(&hist, w))?;
    let protos = prototype_fields(&fields, &flat)?;
    emit("prototypes.json", &|w| {
        write_prototypes_json(&protos, &hist, &cfg.roi, w)
    })?;
    let lateral = lateral_state_table(&flat, &ego)?;
    emit("lateral.csv", &|w| write_lateral_csv(&lateral, w))?;

    let mut groups: Vec<(Vec<usize>, Vec<Region>)> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        if i == 0 || rows[i - 1].sequence != row.sequence {
            groups.push((Vec::new(), Vec::new()));
        }
        let g = groups.last_mut().expect("just pushed");
        g.0.push(flat[i]);
        g.1.push(row.region);
    }
    let patterns = flat.iter().copied().max().unwrap_or(0);
    for &region in &cfg.analysis.regions {
        for include_self in [true, false] {
            let mut m = TransitionMatrix::new(patterns, region, include_self);
            for (z, tags) in &groups {
                m.accumulate(z, Some(tags))?;
            }
            let stem = format!(
                "transitions_{}_{}",
                region.as_str().to_lowercase(),
                if include_self { "with_self" } else { "no_self" }
            );
            emit(&format!("{stem}.json"), &|w| {
                serde_json::to_writer_pretty(&mut *w, &m)?;
                Ok(w.write_all(b"\n")?)
            })?;
            emit(&format!("{stem}.csv"), &|w| m.write_csv(w))?;
        }
    }

    let mut inputs = vec![layout.labels(), layout.sequences(), layout.fields(), layout.scenes()];
    if !cfg.analysis.fractions.is_empty() {
        let (x, _) = standardized(&read_features(layout)?);
        let iterations = cfg.analysis.curve_iterations.unwrap_or(cfg.bnp.iterations);
        let curve = pattern_count_curve(
            &x,
            &cfg.bnp.hyper,
            iterations,
            &cfg.analysis.fractions,
            &cfg.analysis.seeds,
        )?;
        emit("pattern_curve.csv", &|w| write_curve_csv(&curve, w))?;
        emit("pattern_curve.json", &|w| {
            serde_json::to_writer_pretty(&mut *w, &curve)?;
            Ok(w.write_all(b"\n")?)
        })?;
        inputs.push(layout.features());
    }
    Ok((inputs, outputs))
}
