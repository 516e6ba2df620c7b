//! Trajectory CSV ingestion, coordinate normalization, downsampling and
//! per-frame scene assembly.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::domain::{in_roi, relative_state, RoiConfig, Scene, VehicleState};
use crate::error::{Error, Result};

/// All states of one vehicle, sorted by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: i64,
    pub states: Vec<VehicleState>,
}

impl Track {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn mean_vx(&self) -> f64 {
        self.states.iter().map(|s| s.vx).sum::<f64>() / self.states.len().max(1) as f64
    }

    /// Number of frame-to-frame lane id changes.
    pub fn lane_changes(&self) -> usize {
        self.states.windows(2).filter(|w| w[0].lane_id != w[1].lane_id).count()
    }
}

/// Source column names and frame rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ColumnMap {
    pub frame: String,
    pub id: String,
    pub x: String,
    pub y: String,
    pub vx: String,
    pub vy: String,
    pub ax: String,
    pub ay: String,
    pub lane_id: String,
    pub source_hz: u32,
    pub target_hz: u32,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            frame: "frame".into(),
            id: "id".into(),
            x: "x".into(),
            y: "y".into(),
            vx: "xVelocity".into(),
            vy: "yVelocity".into(),
            ax: "xAcceleration".into(),
            ay: "yAcceleration".into(),
            lane_id: "laneId".into(),
            source_hz: 25,
            target_hz: 5,
        }
    }
}

impl ColumnMap {
    fn names(&self) -> [&str; 9] {
        [
            &self.frame,
            &self.id,
            &self.x,
            &self.y,
            &self.vx,
            &self.vy,
            &self.ax,
            &self.ay,
            &self.lane_id,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let names = self.names();
        if names.iter().any(|n| n.is_empty()) {
            return Err(Error::InvalidConfig("column names must be non-empty".into()));
        }
        for (i, a) in names.iter().enumerate() {
            if names[i + 1..].contains(a) {
                return Err(Error::InvalidConfig(format!("column `{a}` mapped twice")));
            }
        }
        self.stride().map(|_| ())
    }

    /// Frames kept per source frame, `source_hz / target_hz`.
    pub fn stride(&self) -> Result<usize> {
        if self.target_hz == 0 || self.source_hz == 0 || !self.source_hz.is_multiple_of(self.target_hz) {
            return Err(Error::RateMismatch {
                source_hz: self.source_hz,
                target_hz: self.target_hz,
            });
        }
        Ok((self.source_hz / self.target_hz) as usize)
    }
}

fn parse_int(raw: &str, row: usize, column: &str) -> Result<i64> {
    let raw = raw.trim();
    if let Ok(v) = raw.parse::<i64>() {
        return Ok(v);
    }
    match raw.parse::<f64>() {
        Ok(v) if v.fract() == 0.0 && v.is_finite() => Ok(v as i64),
        _ => Err(Error::ParseError {
            row,
            column: column.to_string(),
            reason: format!("`{raw}` is not an integer"),
        }),
    }
}

fn parse_real(raw: &str, row: usize, column: &str) -> Result<f64> {
    match raw.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::ParseError {
            row,
            column: column.to_string(),
            reason: format!("`{}` is not a finite number", raw.trim()),
        }),
    }
}

/// Reads a highD-style track CSV into one frame-sorted track per vehicle.
///
/// Row numbers in errors count data rows from 1 (the header is row 0).
pub fn parse_tracks<R: Read>(source: R, map: &ColumnMap) -> Result<Vec<Track>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let mut idx = [0usize; 9];
    for (slot, name) in idx.iter_mut().zip(map.names()) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
    }
    let names = map.names();

    let mut by_id: BTreeMap<i64, Vec<VehicleState>> = BTreeMap::new();
    let mut rows = 0usize;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let cell = |k: usize| record.get(idx[k]).unwrap_or("");
        let state = VehicleState {
            frame: parse_int(cell(0), row, names[0])?,
            vehicle_id: parse_int(cell(1), row, names[1])?,
            x: parse_real(cell(2), row, names[2])?,
            y: parse_real(cell(3), row, names[3])?,
            vx: parse_real(cell(4), row, names[4])?,
            vy: parse_real(cell(5), row, names[5])?,
            ax: parse_real(cell(6), row, names[6])?,
            ay: parse_real(cell(7), row, names[7])?,
            lane_id: parse_int(cell(8), row, names[8])?,
        };
        if state.frame < 0 {
            return Err(Error::ParseError {
                row,
                column: names[0].to_string(),
                reason: "negative frame".into(),
            });
        }
        by_id.entry(state.vehicle_id).or_default().push(state);
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyInput);
    }

    let mut tracks = Vec::with_capacity(by_id.len());
    for (id, mut states) in by_id {
        states.sort_by_key(|s| s.frame);
        if let Some(w) = states.windows(2).find(|w| w[0].frame == w[1].frame) {
            return Err(Error::ParseError {
                row: 0,
                column: names[0].to_string(),
                reason: format!("duplicate (id {id}, frame {})", w[0].frame),
            });
        }
        tracks.push(Track { id, states });
    }
    Ok(tracks)
}

/// Writes tracks with the column names of `map`.
pub fn write_tracks_csv<W: Write>(tracks: &[Track], map: &ColumnMap, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(map.names())?;
    for t in tracks {
        for s in &t.states {
            w.write_record([
                s.frame.to_string(),
                s.vehicle_id.to_string(),
                s.x.to_string(),
                s.y.to_string(),
                s.vx.to_string(),
                s.vy.to_string(),
                s.ax.to_string(),
                s.ay.to_string(),
                s.lane_id.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn flip_lateral(s: &mut VehicleState) {
    s.y = -s.y;
    s.vy = -s.vy;
    s.ay = -s.ay;
}

fn half_turn(s: &mut VehicleState) {
    s.x = -s.x;
    s.y = -s.y;
    s.vx = -s.vx;
    s.vy = -s.vy;
    s.ax = -s.ax;
    s.ay = -s.ay;
}

/// Flips the lateral axis, then turns every left-heading track by 180°
/// about the origin so all traffic moves towards +x.
pub fn normalize(mut tracks: Vec<Track>) -> Result<Vec<Track>> {
    for t in &mut tracks {
        let mean = t.mean_vx();
        if mean == 0.0 || !mean.is_finite() {
            return Err(Error::AmbiguousHeading(t.id));
        }
        t.states.iter_mut().for_each(flip_lateral);
        if mean < 0.0 {
            t.states.iter_mut().for_each(half_turn);
        }
    }
    Ok(tracks)
}

/// Keeps frames on the global `source_hz / target_hz` stride (frame 0
/// anchored) and renumbers them at the target rate.
pub fn downsample(track: &Track, map: &ColumnMap) -> Result<Track> {
    let k = map.stride()? as i64;
    let states = track
        .states
        .iter()
        .filter(|s| s.frame % k == 0)
        .map(|s| VehicleState {
            frame: s.frame / k,
            ..*s
        })
        .collect();
    Ok(Track { id: track.id, states })
}

/// Frame -> vehicles present, for fast neighbour lookup.
pub struct FrameIndex<'a> {
    frames: HashMap<i64, Vec<&'a VehicleState>>,
}

impl<'a> FrameIndex<'a> {
    pub fn new(tracks: &'a [Track]) -> Self {
        let mut frames: HashMap<i64, Vec<&VehicleState>> = HashMap::new();
        for t in tracks {
            for s in &t.states {
                frames.entry(s.frame).or_default().push(s);
            }
        }
        for v in frames.values_mut() {
            v.sort_by_key(|s| s.vehicle_id);
        }
        Self { frames }
    }

    /// One scene per ego frame with every co-present vehicle inside the ROI.
    pub fn scenes_for(&self, ego: &Track, roi: &RoiConfig) -> Vec<Scene> {
        ego.states
            .iter()
            .map(|e| {
                let neighbors = self
                    .frames
                    .get(&e.frame)
                    .map(|present| {
                        present
                            .iter()
                            .filter(|o| o.vehicle_id != e.vehicle_id)
                            .filter(|o| {
                                let r = relative_state(e, o);
                                in_roi(r.dx, r.dy, roi)
                            })
                            .map(|o| **o)
                            .collect()
                    })
                    .unwrap_or_default();
                Scene {
                    frame: e.frame,
                    ego: *e,
                    neighbors,
                }
            })
            .collect()
    }
}

pub fn extract_scenes(ego: &Track, all: &[Track], roi: &RoiConfig) -> Vec<Scene> {
    FrameIndex::new(all).scenes_for(ego, roi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Region {
    Pre,
    LaneChange,
    Post,
}

impl Region {
    pub fn as_str(&self) -> &'static str {
        match self {
            Region::Pre => "PRE",
            Region::LaneChange => "LANE_CHANGE",
            Region::Post => "POST",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "PRE" => Some(Region::Pre),
            "LANE_CHANGE" => Some(Region::LaneChange),
            "POST" => Some(Region::Post),
            _ => None,
        }
    }
}

/// Per-frame region tags of one lane-change trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionLabels {
    pub tags: Vec<Region>,
    /// Index (within the trajectory) of the first frame on the new lane.
    pub crossing_index: usize,
}

/// Tags frames within `buffer_s` seconds of the lane crossing as
/// `LANE_CHANGE`, earlier ones `PRE` and later ones `POST`.
pub fn delineate_regions(ego: &Track, buffer_s: f64, rate_hz: f64) -> Result<RegionLabels> {
    if !(buffer_s > 0.0) || !(rate_hz > 0.0) {
        return Err(Error::InvalidConfig("buffer and rate must be positive".into()));
    }
    let changes: Vec<usize> = ego
        .states
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0].lane_id != w[1].lane_id)
        .map(|(i, _)| i + 1)
        .collect();
    let crossing = match changes.as_slice() {
        [] => return Err(Error::NoLaneChange),
        [c] => *c,
        many => return Err(Error::MultipleLaneChanges(many.len())),
    };
    let half = (buffer_s * rate_hz).round() as usize;
    let lo = crossing.saturating_sub(half);
    let hi = (crossing + half).min(ego.len() - 1);
    let tags = (0..ego.len())
        .map(|i| {
            if i < lo {
                Region::Pre
            } else if i <= hi {
                Region::LaneChange
            } else {
                Region::Post
            }
        })
        .collect();
    Ok(RegionLabels {
        tags,
        crossing_index: crossing,
    })
}

/// Splits a track with several lane changes into pieces holding exactly
/// one each, cutting halfway between consecutive crossings.
pub fn split_lane_changes(track: &Track) -> Vec<Track> {
    let crossings: Vec<usize> = track
        .states
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0].lane_id != w[1].lane_id)
        .map(|(i, _)| i + 1)
        .collect();
    if crossings.is_empty() {
        return Vec::new();
    }
    let mut cuts = vec![0];
    for w in crossings.windows(2) {
        cuts.push((w[0] + w[1]) / 2);
    }
    cuts.push(track.len());
    cuts.windows(2)
        .map(|w| Track {
            id: track.id,
            states: track.states[w[0]..w[1]].to_vec(),
        })
        .collect()
}

/// Scenes and region tags of one lane change of one ego vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneChangeSequence {
    pub vehicle_id: i64,
    pub scenes: Vec<Scene>,
    pub regions: Vec<Region>,
}

/// Every lane change in a recording of normalized tracks at the working
/// rate, split per [`split_lane_changes`] and tagged per [`delineate_regions`].
pub fn lane_change_sequences(
    tracks: &[Track],
    roi: &RoiConfig,
    buffer_s: f64,
    rate_hz: f64,
) -> Result<Vec<LaneChangeSequence>> {
    let index = FrameIndex::new(tracks);
    let mut out = Vec::new();
    for piece in tracks.iter().flat_map(split_lane_changes) {
        if piece.len() < 2 {
            continue;
        }
        let regions = delineate_regions(&piece, buffer_s, rate_hz)?;
        out.push(LaneChangeSequence {
            vehicle_id: piece.id,
            scenes: index.scenes_for(&piece, roi),
            regions: regions.tags,
        });
    }
    Ok(out)
}

pub fn write_scenes_jsonl<W: Write>(scenes: &[Scene], mut sink: W) -> Result<()> {
    for s in scenes {
        serde_json::to_writer(&mut sink, s)?;
        sink.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_scenes_jsonl<R: BufRead>(source: R) -> Result<Vec<Scene>> {
    let mut out = Vec::new();
    for line in source.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "frame,id,x,y,xVelocity,yVelocity,xAcceleration,yAcceleration,laneId\n";

    fn st(id: i64, frame: i64, x: f64, y: f64, vx: f64, vy: f64, lane: i64) -> VehicleState {
        VehicleState {
            vehicle_id: id,
            frame,
            x,
            y,
            vx,
            vy,
            ax: 0.0,
            ay: 0.0,
            lane_id: lane,
        }
    }

    #[test]
    fn parses_single_vehicle() {
        let csv = format!("{HEADER}0,1,0,0,30,0,0,0,2\n1,1,1.2,0,30,0,0,0,2\n2,1,2.4,0,30,0,0,0,2\n");
        let tracks = parse_tracks(csv.as_bytes(), &ColumnMap::default()).unwrap();
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].len(), 3);
        assert_eq!(tracks[0].states[2].x, 2.4);
    }

    #[test]
    fn groups_interleaved_ids() {
        let csv = format!("{HEADER}1,2,0,0,30,0,0,0,2\n0,1,0,0,30,0,0,0,2\n0,2,0,0,30,0,0,0,2\n1,1,0,0,30,0,0,0,2\n");
        let tracks = parse_tracks(csv.as_bytes(), &ColumnMap::default()).unwrap();
        assert_eq!(tracks.len(), 2);
        for t in &tracks {
            let frames: Vec<i64> = t.states.iter().map(|s| s.frame).collect();
            assert_eq!(frames, vec![0, 1]);
        }
    }

    #[test]
    fn parse_errors() {
        let csv = "frame,id,x,y,yVelocity,xAcceleration,yAcceleration,laneId\n0,1,0,0,0,0,0,2\n";
        assert!(matches!(
            parse_tracks(csv.as_bytes(), &ColumnMap::default()),
            Err(Error::MissingColumn(c)) if c == "xVelocity"
        ));
        assert!(matches!(
            parse_tracks(HEADER.as_bytes(), &ColumnMap::default()),
            Err(Error::EmptyInput)
        ));
        let csv = format!("{HEADER}0,1,0,0,abc,0,0,0,2\n");
        assert!(matches!(
            parse_tracks(csv.as_bytes(), &ColumnMap::default()),
            Err(Error::ParseError { row: 1, ref column, .. }) if column == "xVelocity"
        ));
        let csv = format!("{HEADER}0,1,0,0,3,0,0,0,2\n0,1,0,0,3,0,0,0,2\n");
        assert!(matches!(
            parse_tracks(csv.as_bytes(), &ColumnMap::default()),
            Err(Error::ParseError { .. })
        ));
    }

    #[test]
    fn normalize_examples() {
        let right = Track {
            id: 1,
            states: vec![st(1, 0, 100.0, 10.0, 30.0, 1.0, 1)],
        };
        let out = normalize(vec![right]).unwrap();
        let s = out[0].states[0];
        assert_eq!((s.x, s.y, s.vx, s.vy), (100.0, -10.0, 30.0, -1.0));

        let left = Track {
            id: 2,
            states: vec![st(2, 0, 100.0, 10.0, -20.0, 1.5, 1)],
        };
        let s = normalize(vec![left]).unwrap()[0].states[0];
        assert_eq!((s.x, s.y, s.vx, s.vy), (-100.0, 10.0, 20.0, 1.5));

        let still = Track {
            id: 3,
            states: vec![st(3, 0, 0.0, 0.0, 1.0, 0.0, 1), st(3, 1, 0.0, 0.0, -1.0, 0.0, 1)],
        };
        assert!(matches!(normalize(vec![still]), Err(Error::AmbiguousHeading(3))));
    }

    #[test]
    fn normalize_preserves_distances() {
        let a = Track {
            id: 1,
            states: vec![st(1, 0, 12.0, 3.0, -25.0, 0.3, 1)],
        };
        let b = Track {
            id: 2,
            states: vec![st(2, 0, -7.0, 9.0, -22.0, -0.1, 1)],
        };
        let d0 = ((12.0f64 + 7.0).powi(2) + (3.0f64 - 9.0).powi(2)).sqrt();
        let out = normalize(vec![a, b]).unwrap();
        let (p, q) = (out[0].states[0], out[1].states[0]);
        let d1 = ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt();
        assert!((d0 - d1).abs() < 1e-12);
        assert!(out.iter().all(|t| t.mean_vx() > 0.0));
    }

    #[test]
    fn downsample_examples() {
        let track = Track {
            id: 1,
            states: (0..25).map(|f| st(1, f, f as f64, 0.0, 30.0, 0.0, 1)).collect(),
        };
        let out = downsample(&track, &ColumnMap::default()).unwrap();
        let kept: Vec<f64> = out.states.iter().map(|s| s.x).collect();
        assert_eq!(kept, vec![0.0, 5.0, 10.0, 15.0, 20.0]);
        let frames: Vec<i64> = out.states.iter().map(|s| s.frame).collect();
        assert_eq!(frames, vec![0, 1, 2, 3, 4]);

        let same = ColumnMap {
            target_hz: 25,
            ..ColumnMap::default()
        };
        assert_eq!(downsample(&track, &same).unwrap(), track);

        let bad = ColumnMap {
            target_hz: 4,
            ..ColumnMap::default()
        };
        assert!(matches!(downsample(&track, &bad), Err(Error::RateMismatch { .. })));
    }

    #[test]
    fn scenes_follow_roi() {
        let roi = RoiConfig::default();
        let ego = Track {
            id: 1,
            states: vec![st(1, 0, 0.0, 0.0, 30.0, 0.0, 1)],
        };
        let near = Track {
            id: 2,
            states: vec![st(2, 0, 30.0, 2.0, 25.0, 0.0, 1)],
        };
        let far = Track {
            id: 3,
            states: vec![st(3, 0, 45.0, 0.0, 25.0, 0.0, 1)],
        };
        let wide = Track {
            id: 4,
            states: vec![st(4, 0, 0.0, 7.0, 25.0, 0.0, 1)],
        };
        let all = vec![ego.clone(), near.clone(), far.clone(), wide.clone()];
        let scenes = extract_scenes(&ego, &all, &roi);
        assert_eq!(scenes.len(), 1);
        assert_eq!(scenes[0].neighbors.len(), 1);
        assert_eq!(scenes[0].neighbors[0].vehicle_id, 2);

        let scenes = extract_scenes(&ego, &[ego.clone(), far, wide], &roi);
        assert!(scenes[0].neighbors.is_empty());
    }

    #[test]
    fn neighbour_count_tracks_departures() {
        let roi = RoiConfig::default();
        let ego = Track {
            id: 1,
            states: vec![st(1, 0, 0.0, 0.0, 30.0, 0.0, 2), st(1, 1, 6.0, 0.0, 30.0, 0.0, 2)],
        };
        let mk = |id, x1: f64, x2: f64| Track {
            id,
            states: vec![st(id, 0, x1, 4.0, 30.0, 0.0, 3), st(id, 1, x2, 4.0, 30.0, 0.0, 3)],
        };
        // vehicle 4 drops 50 m behind between the frames
        let all = vec![ego.clone(), mk(2, 10.0, 16.0), mk(3, -20.0, -14.0), mk(4, -35.0, -44.0)];
        let scenes = extract_scenes(&ego, &all, &roi);
        assert_eq!(scenes[0].neighbors.len(), 3);
        assert_eq!(scenes[1].neighbors.len(), 2);
    }

    fn lane_track(n: usize, cross: usize) -> Track {
        Track {
            id: 1,
            states: (0..n)
                .map(|i| st(1, i as i64, 0.0, 0.0, 30.0, 0.0, if i < cross { 2 } else { 3 }))
                .collect(),
        }
    }

    #[test]
    fn region_examples() {
        let r = delineate_regions(&lane_track(100, 50), 2.0, 5.0).unwrap();
        assert_eq!(r.crossing_index, 50);
        let lc: Vec<usize> = (0..100).filter(|&i| r.tags[i] == Region::LaneChange).collect();
        assert_eq!(lc, (40..=60).collect::<Vec<_>>());
        assert!(r.tags[..40].iter().all(|t| *t == Region::Pre));
        assert!(r.tags[61..].iter().all(|t| *t == Region::Post));

        let r = delineate_regions(&lane_track(100, 3), 2.0, 5.0).unwrap();
        let lc: Vec<usize> = (0..100).filter(|&i| r.tags[i] == Region::LaneChange).collect();
        assert_eq!(lc, (0..=13).collect::<Vec<_>>());

        assert!(matches!(
            delineate_regions(&lane_track(100, 200), 2.0, 5.0),
            Err(Error::NoLaneChange)
        ));
        let mut twice = lane_track(100, 30);
        for s in &mut twice.states[70..] {
            s.lane_id = 2;
        }
        assert!(matches!(
            delineate_regions(&twice, 2.0, 5.0),
            Err(Error::MultipleLaneChanges(2))
        ));
        let pieces = split_lane_changes(&twice);
        assert_eq!(pieces.len(), 2);
        assert!(pieces.iter().all(|p| p.lane_changes() == 1));
        assert_eq!(pieces.iter().map(Track::len).sum::<usize>(), 100);
    }

    #[test]
    fn scenes_jsonl_roundtrip() {
        let ego = st(1, 0, 0.0, 0.0, 30.0, 0.0, 2);
        let scene = Scene::new(ego, vec![st(2, 0, 10.0, 1.0, 28.0, 0.0, 2)], &RoiConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_scenes_jsonl(std::slice::from_ref(&scene), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("\"vehicle_id\"") && text.contains("\"lane_id\""));
        assert_eq!(read_scenes_jsonl(&buf[..]).unwrap(), vec![scene]);
    }

    proptest::proptest! {
        #[test]
        fn regions_partition_trajectory(n in 2usize..200, cross in 1usize..199, buf in 0.2f64..5.0) {
            let cross = cross.min(n - 1);
            let r = delineate_regions(&lane_track(n, cross), buf, 5.0).unwrap();
            proptest::prop_assert_eq!(r.tags.len(), n);
            proptest::prop_assert!(r.tags.windows(2).all(|w| w[0] <= w[1]));
            proptest::prop_assert_eq!(r.tags[cross], Region::LaneChange);
        }
    }
}
