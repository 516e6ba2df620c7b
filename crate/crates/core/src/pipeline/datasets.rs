use rayon::prelude::*;

use crate::domain::{FieldParams, FieldTensor, RoiConfig, Scene};
use crate::error::{Error, Result};
use crate::field::as_gvf;
use crate::ingest::{downsample, lane_change_sequences, ColumnMap, LaneChangeSequence, Track};
use crate::synth::{gen_traffic, TrafficConfig};

/// Rounds of scenario generation tried by [`synthetic_sequences`].
const MAX_ROUNDS: u64 = 1000;

/// Lane-change sequences of synthetic traffic at `target_hz`, drawing
/// batches of `traffic.scenarios` recordings until `min_frames` frames exist.
pub fn synthetic_sequences(
    traffic: &TrafficConfig,
    roi: &RoiConfig,
    target_hz: u32,
    buffer_s: f64,
    min_frames: usize,
    seed: u64,
) -> Result<Vec<LaneChangeSequence>> {
    let map = ColumnMap {
        source_hz: traffic.rate_hz.round() as u32,
        target_hz,
        ..ColumnMap::default()
    };
    let mut out = Vec::new();
    let mut frames = 0;
    for round in 0..MAX_ROUNDS {
        for tracks in gen_traffic(traffic, seed.wrapping_add(round))? {
            let down: Vec<Track> = tracks.iter().map(|t| downsample(t, &map)).collect::<Result<_>>()?;
            for lc in lane_change_sequences(&down, roi, buffer_s, target_hz as f64)? {
                frames += lc.scenes.len();
                out.push(lc);
            }
        }
        if frames >= min_frames {
            return Ok(out);
        }
    }
    Err(Error::SpecError(format!(
        "traffic produced fewer than {min_frames} lane-change frames"
    )))
}

/// Exactly `count` AS-GVF tensors from lane-change frames of synthetic traffic.
pub fn synthetic_fields(
    traffic: &TrafficConfig,
    roi: &RoiConfig,
    params: &FieldParams,
    count: usize,
    seed: u64,
) -> Result<Vec<FieldTensor>> {
    let seqs = synthetic_sequences(traffic, roi, 5, 2.0, count, seed)?;
    let scenes: Vec<&Scene> = seqs.iter().flat_map(|s| &s.scenes).take(count).collect();
    scenes.par_iter().map(|s| as_gvf(s, roi, params)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn yields_the_requested_count() {
        let cfg = TrafficConfig {
            scenarios: 1,
            ..TrafficConfig::default()
        };
        let f = synthetic_fields(&cfg, &RoiConfig::default(), &FieldParams::default(), 150, 3).unwrap();
        assert_eq!(f.len(), 150);
        assert!(f.iter().all(|t| t.shape() == (13, 17, 2)));
        let again = synthetic_fields(&cfg, &RoiConfig::default(), &FieldParams::default(), 150, 3).unwrap();
        assert_eq!(f, again);
    }
}
