//! Trajectory ingestion: synthetic traffic is written as a highD-style CSV,
//! read back, normalized, downsampled to 5 Hz and cut into lane-change
//! sequences with PRE / LANE_CHANGE / POST tags.
//!
//! Run with `cargo run --example ingest_tracks`.

use lanescope::ingest::{
    downsample, lane_change_sequences, normalize, parse_tracks, write_scenes_jsonl, write_tracks_csv, ColumnMap,
    Region, Track,
};
use lanescope::synth::{gen_traffic, to_highd_axes, TrafficConfig};
use lanescope::RoiConfig;

fn main() -> lanescope::Result<()> {
    let traffic = TrafficConfig {
        scenarios: 1,
        ..TrafficConfig::default()
    };
    let recording = gen_traffic(&traffic, 7)?.remove(0);
    let map = ColumnMap::default();

    let mut csv = Vec::new();
    write_tracks_csv(&to_highd_axes(&recording), &map, &mut csv)?;
    let text = String::from_utf8_lossy(&csv);
    println!(
        "CSV: {} rows, header `{}`",
        text.lines().count() - 1,
        text.lines().next().unwrap_or("")
    );

    let tracks = normalize(parse_tracks(&csv[..], &map)?)?;
    let down: Vec<Track> = tracks
        .iter()
        .map(|t| downsample(t, &map))
        .collect::<lanescope::Result<_>>()?;
    println!(
        "{} vehicles, {} frames each at {} Hz after downsampling",
        down.len(),
        down[0].len(),
        map.target_hz
    );

    let seqs = lane_change_sequences(&down, &RoiConfig::default(), 2.0, map.target_hz as f64)?;
    for s in &seqs {
        let count = |r: Region| s.regions.iter().filter(|t| **t == r).count();
        let mean_neighbors = s.scenes.iter().map(|c| c.neighbors.len()).sum::<usize>() as f64 / s.scenes.len() as f64;
        println!(
            "vehicle {:3}: {:3} scenes (PRE {:3}, LANE_CHANGE {:2}, POST {:3}), {:.1} neighbours per frame",
            s.vehicle_id,
            s.scenes.len(),
            count(Region::Pre),
            count(Region::LaneChange),
            count(Region::Post),
            mean_neighbors
        );
    }
    if let Some(s) = seqs.first() {
        let mut line = Vec::new();
        write_scenes_jsonl(&s.scenes[..1], &mut line)?;
        println!("first scene as JSON Lines: {}", String::from_utf8_lossy(&line).trim());
    }
    Ok(())
}
