use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use floorloc::baseline::{mcl_localize, ScanLikelihoodConfig};
use floorloc::bench::bench_throughput;
use floorloc::diagnostics::inverse_match;
use floorloc::eval::evaluate;
use floorloc::floormap::DEFAULT_INTERVAL;
use floorloc::localizer::{finish_localization, HypothesisGrid};
use floorloc::query::parse_query;
use floorloc::raycast::{scan_from, DepthScan, DepthScanDoc};
use floorloc::scene::{generate_scene, SceneParams, SceneStyle};
use floorloc::training::loss_curve_csv;
use floorloc::{
    init_codebooks, parse_floormap, render_pose, train_codebooks, vec2, CodebookSet, DepthEncoder, LocalizeOptions,
    Pose, PoseHypothesis, RasterMap, TrainConfig, TrainScene,
};

#[derive(Parser)]
#[command(name = "floorloc", version, about = "Floor-map localization by latent-space rendering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample map boundaries into oriented, labeled points.
    Rasterize {
        map: PathBuf,
        #[arg(long, default_value_t = DEFAULT_INTERVAL)]
        interval: f64,
    },
    /// Render the feature seen at a pose.
    Render {
        map: PathBuf,
        codebooks: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, allow_hyphen_values = true)]
        y: f64,
        #[arg(long, allow_hyphen_values = true)]
        theta: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_INTERVAL)]
        interval: f64,
    },
    /// Localize one query file, or every query file in a directory.
    Localize {
        map: PathBuf,
        codebooks: PathBuf,
        query: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        cell: f64,
        #[arg(long, default_value_t = 16)]
        angles: usize,
        #[arg(long, default_value_t = 0.8)]
        threshold: f64,
        #[arg(long, default_value_t = 3)]
        topk: usize,
        #[arg(long)]
        no_refine: bool,
        /// Write the score grid as a 16-bit PGM (single query only).
        #[arg(long)]
        posterior: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_INTERVAL)]
        interval: f64,
    },
    /// Create codebooks with Gaussian entries.
    Init {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 32)]
        angle_codes: usize,
        #[arg(long, default_value_t = 32)]
        dist_codes: usize,
        #[arg(long, default_value_t = 16)]
        segments: usize,
        #[arg(long, default_value_t = 128)]
        dim: usize,
        #[arg(long, default_value_t = 10.0)]
        d_max: f64,
    },
    /// Train codebooks on scene directories containing map.json and gt.json.
    Train {
        dataset: PathBuf,
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
        #[arg(long, default_value_t = 100)]
        negatives: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 32)]
        angle_codes: usize,
        #[arg(long, default_value_t = 32)]
        dist_codes: usize,
        #[arg(long, default_value_t = 16)]
        segments: usize,
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long, default_value_t = 10.0)]
        d_max: f64,
        #[arg(long, default_value_t = DEFAULT_INTERVAL)]
        interval: f64,
    },
    /// Localize a range scan with the scan-matching baseline.
    Baseline {
        map: PathBuf,
        scan: PathBuf,
        #[arg(long, default_value_t = 72)]
        rays: usize,
        #[arg(long, default_value_t = 0.1)]
        cell: f64,
        #[arg(long, default_value_t = 72)]
        angles: usize,
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
        #[arg(long, default_value_t = 3)]
        topk: usize,
        #[arg(long, default_value_t = 0.2)]
        sigma: f64,
    },
    /// Generate a synthetic scene with ground-truth queries and scans.
    GenScene {
        #[arg(long, default_value = "multi_room")]
        style: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        queries: usize,
        #[arg(long)]
        width: Option<f64>,
        #[arg(long)]
        height: Option<f64>,
        /// Relabel one whole wall of a symmetric scene as a door.
        #[arg(long)]
        door_wall: bool,
        #[arg(long, default_value_t = 16)]
        segments: usize,
        #[arg(long, default_value_t = 128)]
        dim: usize,
        #[arg(long, default_value_t = 10.0)]
        d_max: f64,
        #[arg(long, default_value_t = 72)]
        rays: usize,
    },
    /// Score results (a list per query) against ground-truth poses.
    Eval { results: PathBuf, gt: PathBuf },
    /// Time dense grid scoring; prints CSV rows `cells,seconds,samples_per_sec`.
    Bench {
        map: PathBuf,
        codebooks: PathBuf,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long, default_value_t = 0.1)]
        cell: f64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value_t = DEFAULT_INTERVAL)]
        interval: f64,
    },
    /// Best codebook entries for each query segment.
    Invmatch { query: PathBuf, codebooks: PathBuf },
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn load_map(path: &Path, interval: f64) -> Result<RasterMap> {
    let floor = parse_floormap(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    Ok(RasterMap::new(floor, interval)?)
}

fn load_codebooks(path: &Path) -> Result<CodebookSet> {
    CodebookSet::load(path).with_context(|| format!("loading codebooks {}", path.display()))
}

fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct PointRow {
    x: f64,
    y: f64,
    nx: f64,
    ny: f64,
    label: &'static str,
    edge_id: usize,
}

#[derive(Serialize)]
struct RasterDoc {
    interval: f64,
    points: Vec<PointRow>,
}

fn sorted_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == ext))
        .collect();
    files.sort();
    Ok(files)
}

/// Scene directories of a dataset: the directory itself if it holds a
/// map.json, otherwise its immediate subdirectories that do, by name.
fn scene_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    if root.join("map.json").is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .with_context(|| format!("listing {}", root.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("map.json").is_file() && p.join("gt.json").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        bail!("no scene directories with map.json and gt.json under {}", root.display());
    }
    Ok(dirs)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Rasterize { map, interval } => {
            let m = load_map(&map, interval)?;
            let points = m
                .cloud
                .points
                .iter()
                .map(|p| PointRow { x: p.t.x, y: p.t.y, nx: p.n.x, ny: p.n.y, label: p.label.as_str(), edge_id: p.edge_id })
                .collect();
            emit(&to_json(&RasterDoc { interval, points })?, None)
        }
        Command::Render { map, codebooks, x, y, theta, out, interval } => {
            let m = load_map(&map, interval)?;
            let cb = load_codebooks(&codebooks)?;
            let f = render_pose(&m, &cb, vec2(x, y), theta)?;
            emit(&to_json(&f.to_doc())?, out.as_deref())
        }
        Command::Localize { map, codebooks, query, cell, angles, threshold, topk, no_refine, posterior, interval } => {
            let m = load_map(&map, interval)?;
            let cb = load_codebooks(&codebooks)?;
            let options =
                LocalizeOptions { cell, num_angles: angles, threshold, top_k: topk, refine: !no_refine, refine_config: None };
            let grid = HypothesisGrid::build(&m, &cb, cell)?;
            let localize_one = |path: &Path| -> Result<(Vec<PoseHypothesis>, floorloc::PosteriorGrid)> {
                let (feature, _, _, _) = parse_query(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
                let scores = grid.score(&feature, angles)?;
                Ok((finish_localization(&m, &cb, &feature, &scores, &options)?, scores))
            };
            if query.is_dir() {
                if posterior.is_some() {
                    bail!("--posterior needs a single query file");
                }
                let results = sorted_files(&query, "json")?
                    .iter()
                    .map(|p| localize_one(p).map(|r| r.0))
                    .collect::<Result<Vec<_>>>()?;
                emit(&to_json(&results)?, None)
            } else {
                let (result, scores) = localize_one(&query)?;
                if let Some(p) = posterior {
                    fs::write(&p, scores.to_pgm()).with_context(|| format!("writing {}", p.display()))?;
                }
                emit(&to_json(&result)?, None)
            }
        }
        Command::Init { seed, out, angle_codes, dist_codes, segments, dim, d_max } => {
            let cb = init_codebooks(angle_codes, dist_codes, segments, dim, 3, d_max, seed)?;
            cb.save(&out).with_context(|| format!("writing {}", out.display()))?;
            Ok(())
        }
        Command::Train {
            dataset,
            epochs,
            lr,
            negatives,
            seed,
            out,
            angle_codes,
            dist_codes,
            segments,
            dim,
            d_max,
            interval,
        } => {
            let scenes = scene_dirs(&dataset)?
                .iter()
                .map(|dir| {
                    let map = load_map(&dir.join("map.json"), interval)?;
                    let poses: Vec<Pose> = serde_json::from_slice(&read(&dir.join("gt.json"))?)
                        .with_context(|| format!("parsing {}", dir.join("gt.json").display()))?;
                    Ok(TrainScene { map, poses })
                })
                .collect::<Result<Vec<_>>>()?;
            let init = init_codebooks(angle_codes, dist_codes, segments, dim, 3, d_max, seed)?;
            let cfg = TrainConfig { num_negatives: negatives, lr, epochs, seed, ..Default::default() };
            let (cb, curve) = train_codebooks(&scenes, init, &cfg)?;
            cb.save(&out).with_context(|| format!("writing {}", out.display()))?;
            emit(&loss_curve_csv(&curve), None)
        }
        Command::Baseline { map, scan, rays, cell, angles, threshold, topk, sigma } => {
            let floor = parse_floormap(&read(&map)?).with_context(|| format!("parsing {}", map.display()))?;
            let doc: DepthScanDoc = serde_json::from_slice(&read(&scan)?)?;
            let scan = DepthScan::try_from(doc)?;
            let cfg = ScanLikelihoodConfig { num_rays: rays, sigma_d: sigma, ..Default::default() };
            let options = LocalizeOptions { cell, num_angles: angles, threshold, top_k: topk, refine: false, refine_config: None };
            let (_, peaks) = mcl_localize(&scan, &floor, &options, &cfg)?;
            emit(&to_json(&peaks)?, None)
        }
        Command::GenScene { style, seed, out, queries, width, height, door_wall, segments, dim, d_max, rays } => {
            let style: SceneStyle = style.parse()?;
            let params = SceneParams {
                width,
                height,
                num_queries: queries,
                door_wall,
                encoder: DepthEncoder { v: segments, d: dim, d_max },
                fov: TAU,
                ..SceneParams::new(style)
            };
            let scene = generate_scene(&params, seed)?;
            fs::create_dir_all(out.join("queries"))?;
            fs::create_dir_all(out.join("scans"))?;
            fs::write(out.join("map.json"), scene.floormap.to_json())?;
            fs::write(out.join("gt.json"), to_json(&scene.gt_poses())?)?;
            for (i, q) in scene.gt_queries.iter().enumerate() {
                fs::write(out.join("queries").join(format!("query_{i:03}.json")), to_json(&q.to_doc())?)?;
                let scan = scan_from(&scene.floormap, q.gt_pose.t(), q.gt_pose.theta, rays);
                fs::write(out.join("scans").join(format!("scan_{i:03}.json")), to_json(&DepthScanDoc::from(&scan))?)?;
            }
            Ok(())
        }
        Command::Eval { results, gt } => {
            let results: Vec<Vec<PoseHypothesis>> = serde_json::from_slice(&read(&results)?)?;
            let gts: Vec<Pose> = serde_json::from_slice(&read(&gt)?)?;
            emit(&to_json(&evaluate(&results, &gts)?)?, None)
        }
        Command::Bench { map, codebooks, reps, cell, workers, interval } => {
            let m = load_map(&map, interval)?;
            let cb = load_codebooks(&codebooks)?;
            let report = bench_throughput(&m, &cb, cell, reps, workers)?;
            emit(&report.to_csv(), None)?;
            eprintln!(
                "workers={} mean={:.1} std={:.1} samples/s (reference GPU figure: 13238 samples/s)",
                report.workers,
                report.mean_samples_per_sec(),
                report.std_samples_per_sec()
            );
            Ok(())
        }
        Command::Invmatch { query, codebooks } => {
            let (feature, _, _, _) = parse_query(&read(&query)?)?;
            let cb = load_codebooks(&codebooks)?;
            emit(&to_json(&inverse_match(&feature, &cb)?)?, None)
        }
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
