//! Generate a labeled synthetic sequence and write it in the on-disk scan
//! layout (velodyne/NNNNNN.bin, labels/NNNNNN.label, poses.txt).
//!
//! Usage: cargo run -p erasor --example synth_scene [OUT_DIR]

use erasor::synth::{benchmark_scene, generate_sequence, write_kitti_sequence};

fn main() -> erasor::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "target/synth_benchmark".into());

    let spec = benchmark_scene();
    let seq = generate_sequence(&spec)?;
    write_kitti_sequence(&seq, &out)?;

    for (t, scan) in seq.scans.iter().enumerate() {
        let dynamic = scan
            .points
            .iter()
            .filter(|p| p.label.is_some_and(|l| l >= 252))
            .count();
        println!(
            "frame {t}: {} points ({} dynamic), sensor at {:.1?}",
            scan.len(),
            dynamic,
            (seq.poses[t].translation().x, seq.poses[t].translation().y)
        );
    }
    println!("written to {out}");
    Ok(())
}
