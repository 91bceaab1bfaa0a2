//! Batch front end: every subcommand is a thin wrapper over the library.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for data/parse errors.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use erasor::config::{load_config, PipelineConfig};
use erasor::descriptor::BinIndex;
use erasor::geom::PointCloud;
use erasor::io::{self, CloudFormat, SequenceSource};
use erasor::map::build_raw_map;
use erasor::metrics;
use erasor::pipeline::{self, FrameReport};
use erasor::rgpf;
use erasor::srt::BinClass;
use erasor::synth;
use erasor::{Error, Result};

#[derive(Parser)]
#[command(
    name = "erasor",
    about = "Static map building: remove dynamic-object traces from accumulated LiDAR maps",
    version
)]
struct Cli {
    /// Worker threads for intra-frame parallelism (default: all cores).
    /// The output is identical for any thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

fn parse_range(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected START:END, got `{s}`"))?;
    let start: usize = a.trim().parse().map_err(|e| format!("bad start: {e}"))?;
    let end: usize = b.trim().parse().map_err(|e| format!("bad end: {e}"))?;
    if start > end {
        return Err(format!("start {start} exceeds end {end}"));
    }
    Ok((start, end))
}

#[derive(Clone, Copy, ValueEnum)]
enum SceneName {
    /// Curbed and sloped ground, three walls, two actors (one bus-sized).
    Benchmark,
    /// A single 0.4 m curb with actors crossing on both sides.
    Curbed,
}

#[derive(Subcommand)]
enum Command {
    /// Accumulate posed scans into a raw world-frame map.
    BuildMap {
        /// Directory of NNNNNN.bin scans.
        #[arg(long)]
        seq: PathBuf,
        /// Pose file (12 decimals per line).
        #[arg(long)]
        poses: PathBuf,
        /// Inclusive frame range START:END.
        #[arg(long, value_parser = parse_range)]
        range: (usize, usize),
        /// Output map (.ply or .bin; .bin gets a .label sidecar when labels
        /// are loaded).
        #[arg(long)]
        out: PathBuf,
        /// Directory of NNNNNN.label ground-truth files.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Keep every Nth frame of the range.
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
    /// Build the map, remove dynamic traces, and write both point sets.
    Erase {
        #[arg(long)]
        seq: PathBuf,
        #[arg(long)]
        poses: PathBuf,
        #[arg(long, value_parser = parse_range)]
        range: (usize, usize),
        /// Pipeline config file (defaults apply when omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output for the retained static map (.ply or .bin).
        #[arg(long)]
        out_static: PathBuf,
        /// Output for the removed dynamic points (.ply or .bin).
        #[arg(long)]
        out_dynamic: PathBuf,
        /// Per-frame CSV report.
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        /// Judge every frame against the raw map instead of the
        /// progressively cleaned one.
        #[arg(long)]
        independent_frames: bool,
    },
    /// Score a refined map against the labeled raw map it came from.
    Evaluate {
        /// Raw accumulated map (.ply with labels, or .bin plus --labels).
        #[arg(long)]
        raw: PathBuf,
        /// Refined map (.ply/.bin). Unlabeled points inherit the label of
        /// the raw point with identical coordinates.
        #[arg(long)]
        refined: PathBuf,
        /// Label sidecar for a .bin raw map (one u32 per point).
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Evaluation voxel edge length, meters.
        #[arg(long, default_value_t = 0.2)]
        voxel: f64,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV.
        #[arg(long)]
        report: PathBuf,
        /// Also print point-wise precision/recall (legacy diagnostic).
        #[arg(long)]
        legacy_metrics: bool,
    },
    /// Dump per-bin scan-ratio data for histogram tooling.
    Stats {
        #[arg(long)]
        seq: PathBuf,
        #[arg(long)]
        poses: PathBuf,
        #[arg(long, value_parser = parse_range)]
        range: (usize, usize),
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV (frame, ring, sector, class, ratio, occupancies).
        #[arg(long)]
        dump_ratios: PathBuf,
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
    /// Generate a labeled synthetic sequence in the on-disk scan layout.
    Synth {
        #[arg(long, value_enum)]
        scene: SceneName,
        /// Output directory (velodyne/, labels/, poses.txt).
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Compare region-wise ground fitting against a single global plane.
    CompareGpf {
        #[arg(long)]
        seq: PathBuf,
        #[arg(long)]
        poses: PathBuf,
        #[arg(long, value_parser = parse_range)]
        range: (usize, usize),
        /// Ground-truth label directory (required for the accounting).
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(err) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot configure thread pool: {err}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

fn load_config_or_default(path: &Option<PathBuf>) -> Result<PipelineConfig> {
    match path {
        Some(p) => load_config(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn make_source(
    seq: PathBuf,
    poses: PathBuf,
    range: (usize, usize),
    labels: Option<PathBuf>,
    stride: usize,
) -> SequenceSource {
    let mut source = SequenceSource::new(seq, poses, range).with_stride(stride);
    source.label_dir = labels;
    source
}

fn write_cloud_by_extension(cloud: &PointCloud, path: &Path) -> Result<()> {
    let format = CloudFormat::from_extension(path).ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        detail: "unknown output extension (expected .ply or .bin)".into(),
    })?;
    io::write_cloud(cloud, path, format)?;
    // Binary scans cannot carry labels inline; drop a sidecar so the map
    // stays usable as evaluation ground truth.
    if format == CloudFormat::KittiBin && cloud.has_labels() {
        io::write_label_file(cloud, path.with_extension("label"))?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn frame_report_csv(reports: &[FrameReport]) -> String {
    let mut csv = String::from("stamp,bins_potentially_dynamic,points_removed,wall_time\n");
    for r in reports {
        csv.push_str(&format!(
            "{},{},{},{:.6}\n",
            r.stamp, r.bins_potentially_dynamic, r.points_removed, r.wall_time
        ));
    }
    csv
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::BuildMap {
            seq,
            poses,
            range,
            out,
            labels,
            stride,
        } => {
            let source = make_source(seq, poses, range, labels, stride);
            let (scans, pose_list) = source.load()?;
            let map = build_raw_map(&scans, &pose_list)?;
            write_cloud_by_extension(map.cloud(), &out)?;
            println!(
                "map: {} points from {} frames -> {}",
                map.len(),
                scans.len(),
                out.display()
            );
            Ok(())
        }
        Command::Erase {
            seq,
            poses,
            range,
            config,
            out_static,
            out_dynamic,
            report,
            labels,
            stride,
            independent_frames,
        } => {
            let mut cfg = load_config_or_default(&config)?;
            if independent_frames {
                cfg.independent_frames = true;
            }
            let source = make_source(seq, poses, range, labels, stride);
            let refined = pipeline::run_sequence(&source, &cfg)?;
            write_cloud_by_extension(&refined.static_cloud, &out_static)?;
            write_cloud_by_extension(&refined.removed_cloud, &out_dynamic)?;
            write_text(&report, &frame_report_csv(&refined.per_frame))?;
            println!(
                "static: {} points -> {}",
                refined.static_cloud.len(),
                out_static.display()
            );
            println!(
                "dynamic: {} points -> {}",
                refined.removed_cloud.len(),
                out_dynamic.display()
            );
            Ok(())
        }
        Command::Evaluate {
            raw,
            refined,
            labels,
            voxel,
            config,
            report,
            legacy_metrics,
        } => {
            let cfg = load_config_or_default(&config)?;
            let mut raw_cloud = io::read_cloud(&raw)?;
            if let Some(label_path) = labels {
                raw_cloud = io::read_label_file(&label_path, &raw_cloud)?;
            }
            let mut refined_cloud = io::read_cloud(&refined)?;
            if !refined_cloud.has_labels() && raw_cloud.has_labels() {
                inherit_labels(&raw_cloud, &mut refined_cloud);
            }
            let result =
                metrics::evaluate(&raw_cloud, &refined_cloud, voxel, &cfg.dynamic_classes)?;
            let csv = format!(
                "pr_percent,rr_percent,f1,preserved_static,total_static,preserved_dynamic,total_dynamic\n{:.3},{:.3},{:.3},{},{},{},{}\n",
                100.0 * result.pr,
                100.0 * result.rr,
                result.f1,
                result.preserved_static,
                result.total_static,
                result.preserved_dynamic,
                result.total_dynamic
            );
            write_text(&report, &csv)?;
            println!("PR [%]   RR [%]   F1");
            println!(
                "{:<8.3} {:<8.3} {:.3}",
                100.0 * result.pr,
                100.0 * result.rr,
                result.f1
            );
            println!(
                "static voxels {}/{}, dynamic voxels {}/{} preserved",
                result.preserved_static,
                result.total_static,
                result.preserved_dynamic,
                result.total_dynamic
            );
            if legacy_metrics {
                let (precision, recall) = metrics::legacy_precision_recall(
                    &raw_cloud,
                    &refined_cloud,
                    &cfg.dynamic_classes,
                );
                println!(
                    "legacy point-wise (non-primary): precision {:.3}, recall {:.3}",
                    precision, recall
                );
            }
            Ok(())
        }
        Command::Stats {
            seq,
            poses,
            range,
            config,
            dump_ratios,
            stride,
        } => {
            let cfg = load_config_or_default(&config)?;
            let source = make_source(seq, poses, range, None, stride);
            let (scans, pose_list) = source.load()?;
            let map = build_raw_map(&scans, &pose_list)?;
            let file = fs::File::create(&dump_ratios).map_err(|e| Error::Io {
                path: dump_ratios.clone(),
                source: e,
            })?;
            let mut w = std::io::BufWriter::new(file);
            let mut emit = || -> std::io::Result<()> {
                writeln!(
                    w,
                    "frame,ring,sector,class,ratio,occupancy_query,occupancy_map"
                )?;
                for (scan, pose) in scans.iter().zip(&pose_list) {
                    let analysis = pipeline::analyze_frame(&map, scan, pose, &cfg)
                        .map_err(|e| std::io::Error::other(e.to_string()))?;
                    for v in &analysis.verdicts {
                        let fmt_opt = |x: Option<f64>| match x {
                            Some(v) => format!("{v}"),
                            None => String::new(),
                        };
                        writeln!(
                            w,
                            "{},{},{},{},{},{},{}",
                            pose.stamp(),
                            v.index.ring,
                            v.index.sector,
                            v.class.as_str(),
                            fmt_opt(v.ratio),
                            fmt_opt(analysis.query_rpod.occupancy(v.index)),
                            fmt_opt(analysis.map_rpod.occupancy(v.index)),
                        )?;
                    }
                }
                w.flush()
            };
            emit().map_err(|e| Error::Io {
                path: dump_ratios.clone(),
                source: e,
            })?;
            println!("ratio dump -> {}", dump_ratios.display());
            Ok(())
        }
        Command::Synth {
            scene,
            out,
            seed,
            frames,
        } => {
            let mut spec = match scene {
                SceneName::Benchmark => synth::benchmark_scene(),
                SceneName::Curbed => synth::curbed_scene(),
            };
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            if let Some(frames) = frames {
                spec.frames = frames;
            }
            let seq = synth::generate_sequence(&spec)?;
            synth::write_kitti_sequence(&seq, &out)?;
            let total: usize = seq.scans.iter().map(|s| s.len()).sum();
            println!(
                "{} frames, {} points -> {}",
                seq.scans.len(),
                total,
                out.display()
            );
            Ok(())
        }
        Command::CompareGpf {
            seq,
            poses,
            range,
            labels,
            config,
            report,
            stride,
        } => {
            let cfg = load_config_or_default(&config)?;
            let source = make_source(seq, poses, range, Some(labels), stride);
            let (scans, pose_list) = source.load()?;
            let map = build_raw_map(&scans, &pose_list)?;
            let mut totals = GroundFitTally::default();
            for (scan, pose) in scans.iter().zip(&pose_list) {
                let analysis = pipeline::analyze_frame(&map, scan, pose, &cfg)?;
                let flagged: Vec<BinIndex> = analysis
                    .verdicts
                    .iter()
                    .filter(|v| v.class == BinClass::PotentiallyDynamic)
                    .map(|v| v.index)
                    .collect();
                let mut pooled = Vec::new();
                for index in &flagged {
                    let members = &analysis.map_rpod.bin(*index).members;
                    let points = analysis.bin_points(members);
                    let split = rgpf::rgpf_bin(&points, &cfg);
                    totals.count_regionwise(&points, &split, &cfg);
                    pooled.extend(points);
                }
                let split = rgpf::fit_ground_global(&pooled, &cfg);
                totals.count_global(&pooled, &split, &cfg);
            }
            totals.frames = scans.len();
            write_text(&report, &totals.to_csv())?;
            println!("{}", totals.summary());
            Ok(())
        }
    }
}

/// Matches refined points to raw points with bit-identical coordinates and
/// copies the raw point's label. Duplicated coordinates consume raw
/// entries in order.
fn inherit_labels(raw: &PointCloud, refined: &mut PointCloud) {
    let key = |p: &erasor::Point| (p.x.to_bits(), p.y.to_bits(), p.z.to_bits());
    let mut labels: HashMap<(u64, u64, u64), Vec<Option<u16>>> = HashMap::new();
    for p in raw.points.iter().rev() {
        labels.entry(key(p)).or_default().push(p.label);
    }
    for p in &mut refined.points {
        if let Some(stack) = labels.get_mut(&key(p)) {
            if let Some(label) = stack.pop() {
                p.label = label;
            }
        }
    }
}

/// Static/dynamic bookkeeping for the ground-fit comparison.
#[derive(Default)]
struct GroundFitTally {
    frames: usize,
    static_total: usize,
    dynamic_total: usize,
    regionwise_kept_static: usize,
    regionwise_kept_dynamic: usize,
    global_kept_static: usize,
    global_kept_dynamic: usize,
}

impl GroundFitTally {
    fn count_regionwise(
        &mut self,
        points: &[erasor::Point],
        split: &rgpf::BinSplit,
        cfg: &PipelineConfig,
    ) {
        for p in points {
            if cfg.is_dynamic_class(p.label) {
                self.dynamic_total += 1;
            } else {
                self.static_total += 1;
            }
        }
        for &i in &split.ground {
            if cfg.is_dynamic_class(points[i].label) {
                self.regionwise_kept_dynamic += 1;
            } else {
                self.regionwise_kept_static += 1;
            }
        }
    }

    fn count_global(
        &mut self,
        points: &[erasor::Point],
        split: &rgpf::BinSplit,
        cfg: &PipelineConfig,
    ) {
        for &i in &split.ground {
            if cfg.is_dynamic_class(points[i].label) {
                self.global_kept_dynamic += 1;
            } else {
                self.global_kept_static += 1;
            }
        }
    }

    fn to_csv(&self) -> String {
        let mut csv =
            String::from("method,frames,static_in_bins,dynamic_in_bins,kept_static,kept_dynamic\n");
        csv.push_str(&format!(
            "regionwise,{},{},{},{},{}\n",
            self.frames,
            self.static_total,
            self.dynamic_total,
            self.regionwise_kept_static,
            self.regionwise_kept_dynamic
        ));
        csv.push_str(&format!(
            "global,{},{},{},{},{}\n",
            self.frames,
            self.static_total,
            self.dynamic_total,
            self.global_kept_static,
            self.global_kept_dynamic
        ));
        csv
    }

    fn summary(&self) -> String {
        format!(
            "flagged bins over {} frames: {} static / {} dynamic points\n\
             regionwise kept: {} static, {} dynamic\n\
             global kept:     {} static, {} dynamic",
            self.frames,
            self.static_total,
            self.dynamic_total,
            self.regionwise_kept_static,
            self.regionwise_kept_dynamic,
            self.global_kept_static,
            self.global_kept_dynamic
        )
    }
}
