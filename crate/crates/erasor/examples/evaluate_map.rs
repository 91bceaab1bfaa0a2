//! Score a refined map against labeled ground truth: voxel-wise
//! preservation rate, rejection rate and F1.
//!
//! Runs the pipeline on the synthetic benchmark and evaluates the result
//! against the generator's labels, including the rejection rate restricted
//! to the bus-sized actor alone.
//!
//! Usage: cargo run -p erasor --example evaluate_map

use std::collections::BTreeSet;

use erasor::config::PipelineConfig;
use erasor::map::build_raw_map;
use erasor::metrics::evaluate;
use erasor::pipeline::refine;
use erasor::synth::{benchmark_scene, generate_sequence, ACTOR_CLASS_PRIMARY};

fn main() -> erasor::Result<()> {
    let cfg = PipelineConfig::default();
    let seq = generate_sequence(&benchmark_scene())?;
    let map = build_raw_map(&seq.scans, &seq.poses)?;
    let raw = map.cloud().clone();
    let refined = refine(map, &seq.scans, &seq.poses, &cfg)?;

    let report = evaluate(
        &raw,
        &refined.static_cloud,
        cfg.voxel_size,
        &cfg.dynamic_classes,
    )?;
    println!("PR [%]   RR [%]   F1");
    println!(
        "{:<8.3} {:<8.3} {:.3}",
        100.0 * report.pr,
        100.0 * report.rr,
        report.f1
    );
    println!(
        "static voxels {}/{} preserved, dynamic voxels {}/{} surviving",
        report.preserved_static,
        report.total_static,
        report.preserved_dynamic,
        report.total_dynamic
    );

    let bus_only: BTreeSet<u16> = [ACTOR_CLASS_PRIMARY].into_iter().collect();
    let bus = evaluate(&raw, &refined.static_cloud, cfg.voxel_size, &bus_only)?;
    println!("bus-sized actor rejection rate: {:.3} %", 100.0 * bus.rr);
    Ok(())
}
