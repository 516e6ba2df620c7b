//! Post-inference analysis on a small hand-made labelling: relabelling,
//! occupancy, region-restricted transition matrices and prototype fields.
//!
//! Run with `cargo run --example pattern_analysis`.

use lanescope::analysis::{
    occupancy_histogram, prototype_fields, relabel_by_frequency, RegionSelect, TransitionMatrix,
};
use lanescope::ingest::Region;
use lanescope::FieldTensor;

fn main() -> lanescope::Result<()> {
    let raw = [7, 7, 3, 3, 3, 9, 9, 3, 7, 7, 7, 7];
    let (labels, map) = relabel_by_frequency(&raw);
    println!("labels {raw:?} -> {labels:?} via {map:?}");
    println!("occupancy: {:?}", occupancy_histogram(&labels));

    let tags: Vec<Region> = (0..labels.len())
        .map(|i| match i {
            0..=3 => Region::Pre,
            4..=7 => Region::LaneChange,
            _ => Region::Post,
        })
        .collect();
    for region in [RegionSelect::All, RegionSelect::LaneChange] {
        for include_self in [true, false] {
            let mut m = TransitionMatrix::new(0, region, include_self);
            m.accumulate(&labels, Some(&tags))?;
            println!("{} include_self={include_self}: {:?}", region.as_str(), m.counts);
        }
    }

    let fields: Vec<FieldTensor> = labels
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let mut f = FieldTensor::zeros(i as i64, 13, 17);
            f.set(6, 8, 0, i as f64);
            f
        })
        .collect();
    for (pattern, proto) in prototype_fields(&fields, &labels)? {
        println!("pattern {pattern}: mean ego-cell value {:.3}", proto.get(6, 8, 0));
    }
    Ok(())
}
