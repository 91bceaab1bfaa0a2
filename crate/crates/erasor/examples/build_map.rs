//! Accumulate posed scans into a raw world-frame map and query it.
//!
//! Generates a small synthetic sequence in a temporary directory, loads it
//! back through the scan readers, builds the map with its spatial index,
//! and runs a few submap queries.
//!
//! Usage: cargo run -p erasor --example build_map

use erasor::io::{write_cloud, CloudFormat, SequenceSource};
use erasor::map::build_raw_map;
use erasor::synth::{benchmark_scene, generate_sequence, write_kitti_sequence};

fn main() -> erasor::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut spec = benchmark_scene();
    spec.frames = 5;
    write_kitti_sequence(&generate_sequence(&spec)?, dir.path())?;

    let source = SequenceSource::kitti_layout(dir.path(), (0, 4));
    let (scans, poses) = source.load()?;
    let map = build_raw_map(&scans, &poses)?;
    println!(
        "accumulated {} points from {} scans",
        map.len(),
        scans.len()
    );

    for (pose, radius) in poses.iter().zip([10.0, 40.0, 80.0]) {
        let (submap, indices) = map.extract_submap(pose, radius);
        println!(
            "submap around frame {} within {radius:>4.0} m: {} points (indices {}..{})",
            pose.stamp(),
            submap.len(),
            indices.first().copied().unwrap_or(0),
            indices.last().copied().unwrap_or(0),
        );
    }

    let out = "target/raw_map.ply";
    write_cloud(map.cloud(), out, CloudFormat::AsciiPly)?;
    println!("raw map written to {out}");
    Ok(())
}
