//! Post-inference aggregations over pattern labels: occupancy, prototype
//! fields, lateral states, region-restricted transition counts and
//! pattern-count curves. Pattern ids are 1-based.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bnp::{fit, HdpHmmHyper};
use crate::domain::{FieldTensor, RoiConfig, VehicleState};
use crate::error::{check_len, Error, Result};
use crate::field::FieldRecord;
use crate::ingest::Region;

/// Relabels so pattern 1 is the most frequent label; ties go to the label
/// seen first. Returns the new labels and the `old -> new` map.
pub fn relabel_by_frequency(labels: &[usize]) -> (Vec<usize>, BTreeMap<usize, usize>) {
    let mut stats: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        stats.entry(l).or_insert((0, i)).0 += 1;
    }
    let mut order: Vec<(usize, usize, usize)> = stats.into_iter().map(|(l, (c, first))| (l, c, first)).collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    let map: BTreeMap<usize, usize> = order.iter().enumerate().map(|(i, (l, _, _))| (*l, i + 1)).collect();
    (labels.iter().map(|l| map[l]).collect(), map)
}

/// [`relabel_by_frequency`] over several sequences at once.
pub fn relabel_sequences(labels: &[Vec<usize>]) -> (Vec<Vec<usize>>, BTreeMap<usize, usize>) {
    let flat: Vec<usize> = labels.iter().flatten().copied().collect();
    let (_, map) = relabel_by_frequency(&flat);
    let out = labels.iter().map(|s| s.iter().map(|l| map[l]).collect()).collect();
    (out, map)
}

/// Frames per pattern.
pub fn occupancy_histogram(labels: &[usize]) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for &l in labels {
        *h.entry(l).or_insert(0) += 1;
    }
    h
}

/// Elementwise mean field per pattern; the prototype's `frame` is the pattern id.
pub fn prototype_fields(fields: &[FieldTensor], labels: &[usize]) -> Result<BTreeMap<usize, FieldTensor>> {
    check_len(fields.len(), labels.len())?;
    let mut sums: BTreeMap<usize, (Vec<f64>, usize)> = BTreeMap::new();
    let shape = fields.first().map(|f| f.shape());
    for (f, &l) in fields.iter().zip(labels) {
        if Some(f.shape()) != shape {
            return Err(Error::ShapeError {
                expected: format!("{:?}", shape.expect("nonempty")),
                got: format!("{:?}", f.shape()),
            });
        }
        let entry = sums.entry(l).or_insert_with(|| (vec![0.0; f.values().len()], 0));
        entry.0.iter_mut().zip(f.values()).for_each(|(s, v)| *s += v);
        entry.1 += 1;
    }
    let (rows, cols, _) = shape.unwrap_or((0, 0, 2));
    sums.into_iter()
        .map(|(l, (s, n))| {
            let mean = s.into_iter().map(|v| v / n as f64).collect();
            Ok((l, FieldTensor::from_values(l as i64, rows, cols, mean)?))
        })
        .collect()
}

/// `(vy, ay)` of the ego per pattern, in frame order.
pub fn lateral_state_table(labels: &[usize], ego: &[VehicleState]) -> Result<BTreeMap<usize, Vec<(f64, f64)>>> {
    check_len(labels.len(), ego.len())?;
    let mut t: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for (&l, s) in labels.iter().zip(ego) {
        t.entry(l).or_default().push((s.vy, s.ay));
    }
    Ok(t)
}

/// Which transitions a [`TransitionMatrix`] counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RegionSelect {
    All,
    Pre,
    LaneChange,
    Post,
}

impl RegionSelect {
    fn accepts(self, tag: Option<Region>) -> bool {
        matches!(
            (self, tag),
            (RegionSelect::All, _)
                | (RegionSelect::Pre, Some(Region::Pre))
                | (RegionSelect::LaneChange, Some(Region::LaneChange))
                | (RegionSelect::Post, Some(Region::Post))
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RegionSelect::All => "ALL",
            RegionSelect::Pre => "PRE",
            RegionSelect::LaneChange => "LANE_CHANGE",
            RegionSelect::Post => "POST",
        }
    }
}

/// Pattern-to-pattern transition counts; `counts[i][j]` is pattern `i + 1`
/// followed by pattern `j + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub region: RegionSelect,
    pub include_self: bool,
    pub patterns: Vec<usize>,
    pub counts: Vec<Vec<u64>>,
}

impl TransitionMatrix {
    pub fn new(size: usize, region: RegionSelect, include_self: bool) -> Self {
        Self {
            region,
            include_self,
            patterns: (1..=size).collect(),
            counts: vec![vec![0; size]; size],
        }
    }

    pub fn size(&self) -> usize {
        self.patterns.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn get(&self, from: usize, to: usize) -> u64 {
        self.counts[from - 1][to - 1]
    }

    fn grow(&mut self, size: usize) {
        if size <= self.size() {
            return;
        }
        for row in &mut self.counts {
            row.resize(size, 0);
        }
        self.counts.resize(size, vec![0; size]);
        self.patterns = (1..=size).collect();
    }

    /// Adds the transitions of one sequence. `tags` are required unless the
    /// region is `ALL`; a transition belongs to the region of its later frame.
    pub fn accumulate(&mut self, labels: &[usize], tags: Option<&[Region]>) -> Result<()> {
        if let Some(t) = tags {
            check_len(labels.len(), t.len())?;
        } else if self.region != RegionSelect::All {
            return Err(Error::InvalidConfig(format!(
                "region {} needs per-frame region tags",
                self.region.as_str()
            )));
        }
        if labels.contains(&0) {
            return Err(Error::InvalidConfig("pattern ids are 1-based".into()));
        }
        self.grow(labels.iter().copied().max().unwrap_or(0));
        for t in 1..labels.len() {
            let (a, b) = (labels[t - 1], labels[t]);
            if (a == b && !self.include_self) || !self.region.accepts(tags.map(|g| g[t])) {
                continue;
            }
            self.counts[a - 1][b - 1] += 1;
        }
        Ok(())
    }

    /// Tidy `from,to,count` rows.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["region", "include_self", "from", "to", "count"])?;
        for (i, row) in self.counts.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                w.write_record([
                    self.region.as_str().to_string(),
                    self.include_self.to_string(),
                    (i + 1).to_string(),
                    (j + 1).to_string(),
                    c.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Counts transitions of one labelled sequence.
pub fn transition_counts(
    labels: &[usize],
    tags: Option<&[Region]>,
    region: RegionSelect,
    include_self: bool,
) -> Result<TransitionMatrix> {
    let mut m = TransitionMatrix::new(0, region, include_self);
    m.accumulate(labels, tags)?;
    Ok(m)
}

/// Fraction of labels that disagree with the truth under the best
/// one-to-one matching of inferred to true states.
pub fn matched_hamming_error(truth: &[usize], inferred: &[usize]) -> Result<f64> {
    use pathfinding::prelude::{kuhn_munkres, Matrix};
    check_len(truth.len(), inferred.len())?;
    if truth.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let index = |labels: &[usize]| -> BTreeMap<usize, usize> {
        let mut ids: Vec<usize> = labels.to_vec();
        ids.sort_unstable();
        ids.dedup();
        ids.into_iter().enumerate().map(|(i, l)| (l, i)).collect()
    };
    let (ti, ii) = (index(truth), index(inferred));
    let mut overlap = vec![vec![0i64; ii.len()]; ti.len()];
    for (a, b) in truth.iter().zip(inferred) {
        overlap[ti[a]][ii[b]] += 1;
    }
    let weights = if ti.len() <= ii.len() {
        Matrix::from_rows(overlap).expect("rectangular")
    } else {
        Matrix::from_rows(overlap).expect("rectangular").transposed()
    };
    let (matched, _) = kuhn_munkres(&weights);
    Ok(1.0 - matched as f64 / truth.len() as f64)
}

/// One fraction of a pattern-count curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub fraction: f64,
    pub frames: usize,
    pub seeds: Vec<u64>,
    pub counts: Vec<usize>,
    pub median: f64,
}

fn median(values: &[usize]) -> f64 {
    let mut v = values.to_vec();
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
    }
}

/// The first `frames` rows across the concatenated sequences.
pub fn frame_prefix(sequences: &[DMatrix<f64>], frames: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::new();
    let mut left = frames;
    for s in sequences {
        if left == 0 {
            break;
        }
        let take = left.min(s.nrows());
        out.push(s.rows(0, take).into_owned());
        left -= take;
    }
    out
}

/// Effective state counts of independent fits on nested prefixes of the
/// data, one chain per (fraction, seed), with the median per fraction.
pub fn pattern_count_curve(
    sequences: &[DMatrix<f64>],
    hyper: &HdpHmmHyper,
    iterations: usize,
    fractions: &[f64],
    seeds: &[u64],
) -> Result<Vec<CurvePoint>> {
    if fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
        return Err(Error::InvalidConfig("fractions must lie in (0, 1]".into()));
    }
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("at least one seed is required".into()));
    }
    let total: usize = sequences.iter().map(|s| s.nrows()).sum();
    let jobs: Vec<(usize, u64)> = (0..fractions.len())
        .flat_map(|i| seeds.iter().map(move |s| (i, *s)))
        .collect();
    let counts: Vec<usize> = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let frames = ((fractions[i] * total as f64).round() as usize).max(2);
            let data = frame_prefix(sequences, frames);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            fit(&data, hyper, iterations, &mut rng).map(|r| r.effective_states)
        })
        .collect::<Result<_>>()?;
    Ok(fractions
        .iter()
        .enumerate()
        .map(|(i, &fraction)| {
            let c: Vec<usize> = counts[i * seeds.len()..(i + 1) * seeds.len()].to_vec();
            CurvePoint {
                fraction,
                frames: ((fraction * total as f64).round() as usize).max(2),
                seeds: seeds.to_vec(),
                median: median(&c),
                counts: c,
            }
        })
        .collect())
}

#[derive(Serialize)]
struct OccupancyRow {
    pattern: usize,
    frames: usize,
}

pub fn write_occupancy_json<W: Write>(hist: &BTreeMap<usize, usize>, sink: W) -> Result<()> {
    let rows: Vec<OccupancyRow> = hist
        .iter()
        .map(|(&pattern, &frames)| OccupancyRow { pattern, frames })
        .collect();
    serde_json::to_writer_pretty(sink, &rows)?;
    Ok(())
}

pub fn write_occupancy_csv<W: Write>(hist: &BTreeMap<usize, usize>, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["pattern", "frames"])?;
    for (p, n) in hist {
        w.write_record([p.to_string(), n.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Prototype of one pattern with the number of frames averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeRecord {
    pub pattern: usize,
    pub members: usize,
    pub field: FieldRecord,
}

pub fn write_prototypes_json<W: Write>(
    protos: &BTreeMap<usize, FieldTensor>,
    hist: &BTreeMap<usize, usize>,
    roi: &RoiConfig,
    sink: W,
) -> Result<()> {
    let records: Vec<PrototypeRecord> = protos
        .iter()
        .map(|(&pattern, f)| PrototypeRecord {
            pattern,
            members: hist.get(&pattern).copied().unwrap_or(0),
            field: FieldRecord::new(f, roi),
        })
        .collect();
    serde_json::to_writer_pretty(sink, &records)?;
    Ok(())
}

pub fn write_lateral_csv<W: Write>(table: &BTreeMap<usize, Vec<(f64, f64)>>, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["pattern", "vy", "ay"])?;
    for (p, rows) in table {
        for (vy, ay) in rows {
            w.write_record([p.to_string(), vy.to_string(), ay.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_curve_csv<W: Write>(curve: &[CurvePoint], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["fraction", "frames", "seed", "effective_states", "median"])?;
    for p in curve {
        for (s, c) in p.seeds.iter().zip(&p.counts) {
            w.write_record([
                p.fraction.to_string(),
                p.frames.to_string(),
                s.to_string(),
                c.to_string(),
                p.median.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
