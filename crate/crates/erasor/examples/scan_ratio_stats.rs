//! Inspect the scan ratio test: classify every bin of one frame and print
//! a verdict summary plus a coarse histogram of the ratios, the data
//! behind ratio-distribution plots.
//!
//! Usage: cargo run -p erasor --example scan_ratio_stats

use erasor::config::PipelineConfig;
use erasor::map::build_raw_map;
use erasor::pipeline::analyze_frame;
use erasor::srt::BinClass;
use erasor::synth::{benchmark_scene, generate_sequence};

fn main() -> erasor::Result<()> {
    let cfg = PipelineConfig::default();
    let seq = generate_sequence(&benchmark_scene())?;
    let map = build_raw_map(&seq.scans, &seq.poses)?;

    // Judge the last frame: by then both actors have moved, so their
    // earlier traces show up as collapsed-occupancy bins.
    let t = seq.scans.len() - 1;
    let analysis = analyze_frame(&map, &seq.scans[t], &seq.poses[t], &cfg)?;

    let mut counts = [0usize; 4];
    let mut histogram = [0usize; 12];
    for v in &analysis.verdicts {
        let slot = match v.class {
            BinClass::PotentiallyDynamic => 0,
            BinClass::DefinitelyStatic => 1,
            BinClass::QueryOnlyOccupied => 2,
            BinClass::Skipped => 3,
        };
        counts[slot] += 1;
        if let Some(r) = v.ratio {
            let bucket = ((r / 0.2) as usize).min(histogram.len() - 1);
            histogram[bucket] += 1;
        }
    }
    println!("frame {t} verdicts over {} bins:", analysis.verdicts.len());
    println!("  potentially dynamic: {}", counts[0]);
    println!("  definitely static:   {}", counts[1]);
    println!("  query only occupied: {}", counts[2]);
    println!("  skipped (sparse):    {}", counts[3]);

    println!("scan-ratio histogram (bucket width 0.2):");
    for (i, n) in histogram.iter().enumerate() {
        let label = if i + 1 == histogram.len() {
            format!("{:>4.1}+   ", i as f64 * 0.2)
        } else {
            format!("{:>4.1}-{:<4.1}", i as f64 * 0.2, (i + 1) as f64 * 0.2)
        };
        println!("  {label} {}", "#".repeat((*n).min(80)));
    }
    println!("(bins left of 0.2 are the removal candidates)");
    Ok(())
}
