//! End-to-end acceptance checks. Runs every criterion in order, prints one
//! PASS/FAIL line per criterion and exits non-zero if any failed.
//!
//! `ACCEPTANCE_ONLY=4,6` restricts the run to the listed criteria.

use std::f64::consts::TAU;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use floorloc::baseline::{mcl_localize, ScanLikelihoodConfig};
use floorloc::bench::bench_throughput;
use floorloc::circfeat::cosine;
use floorloc::eval::{evaluate, pose_errors, recall_at};
use floorloc::localizer::{finish_localization, HypothesisGrid};
use floorloc::raycast::scan_from;
use floorloc::renderer::ClassAssignment;
use floorloc::scene::{generate_scene, sample_query_poses, SceneParams, SceneStyle, SyntheticScene};
use floorloc::training::batch_loss_and_grad;
use floorloc::*;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn raster(scene: &SyntheticScene) -> RasterMap {
    RasterMap::new(scene.floormap.clone(), 0.1).unwrap()
}

fn multi_room(seed: u64, queries: usize) -> SyntheticScene {
    generate_scene(&SceneParams { num_queries: queries, ..SceneParams::new(SceneStyle::MultiRoom) }, seed).unwrap()
}

// Criterion 1 ---------------------------------------------------------------

fn orient(a: &Vec2, b: &Vec2, c: &Vec2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Closed-segment intersection by orientation signs; collinear overlaps do
/// not count as crossings.
fn crosses(p1: &Vec2, p2: &Vec2, q1: &Vec2, q2: &Vec2) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if d1 == 0.0 && d2 == 0.0 {
        return false;
    }
    d1 * d2 <= 0.0 && d3 * d4 <= 0.0
}

/// Every point facing the origin whose sight line, stopped 1 µm short of the
/// point, crosses no edge.
fn brute_force_visible(map: &RasterMap, o: Vec2) -> Vec<usize> {
    let edges: Vec<(Vec2, Vec2)> = map.floor.edges().iter().map(|e| (e.segment.a, e.segment.b)).collect();
    map.cloud
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            let r = p.t - o;
            if r.dot(&p.n) >= 0.0 {
                return false;
            }
            let stop = p.t - r / r.norm() * 1e-6;
            !edges.iter().any(|(a, b)| crosses(&o, &stop, a, b))
        })
        .map(|(i, _)| i)
        .collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut origins, mut mismatches, mut visible) = (0, 0, 0);
    for s in 0..10 {
        let scene = multi_room(100 + s, 0);
        let map = raster(&scene);
        for pose in sample_query_poses(&map.floor, 5, 0.0, &mut rng).unwrap() {
            origins += 1;
            let got = visible_points(&map, pose.t()).unwrap().visible_indices;
            let want = brute_force_visible(&map, pose.t());
            visible += want.len();
            if got != want {
                mismatches += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        mismatches == 0 && secs < 30.0,
        format!("{origins} origins over 10 scenes, {visible} visible points, {mismatches} mismatching origins, {secs:.1}s"),
    )
}

// Criterion 2 ---------------------------------------------------------------

fn feature_strategy() -> impl Strategy<Value = (CircularFeature, CircularFeature, usize, f64, f64)> {
    (1usize..=16, 1usize..=8).prop_flat_map(|(v, d)| {
        let value = prop_oneof![-1.0..-0.05f64, 0.05..1.0f64];
        (
            proptest::collection::vec(value.clone(), v * d),
            proptest::collection::vec(any::<bool>(), v),
            proptest::collection::vec(value, v * d),
            proptest::collection::vec(any::<bool>(), v),
            0..v,
            0.0..TAU,
            0.0..TAU,
        )
            .prop_map(move |(da, mut va, db, mut vb, k, theta, center)| {
                va[0] = true;
                vb[0] = true;
                let a = CircularFeature::new(v, d, da, va).unwrap();
                let b = CircularFeature::new(v, d, db, vb).unwrap();
                (a, b, k, theta, center)
            })
    })
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let config = Config { cases: 1000, failure_persistence: None, ..Config::default() };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let result = runner.run(&feature_strategy(), |(a, b, k, theta, center)| {
        let v = a.v();
        let step = TAU * k as f64 / v as f64;
        // Whole-segment rotations are exact and invertible.
        prop_assert_eq!(rotate(&a, 0.0), a.clone());
        prop_assert_eq!(rotate(&rotate(&a, step), TAU - step), a.clone());
        prop_assert_eq!(rotate(&a, TAU), a.clone());
        let (j, step_j) = (v - 1 - k, TAU * (v - 1 - k) as f64 / v as f64);
        prop_assert_eq!(rotate(&rotate(&a, step), step_j), rotate(&a, TAU * ((k + j) % v) as f64 / v as f64));
        // Similarity: bounded, symmetric, one on itself.
        let sab = similarity(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&sab));
        prop_assert_eq!(sab, similarity(&b, &a).unwrap());
        prop_assert!((similarity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        // Positive rescaling of either side changes nothing.
        let scaled = similarity(&a.map_values(|x| x * (1.0 + theta)), &b).unwrap();
        prop_assert!((scaled - sab).abs() < 1e-12);
        // Rotating both sides by the same whole shift leaves similarity unchanged.
        let rot = similarity(&rotate(&a, step), &rotate(&b, step)).unwrap();
        prop_assert!((rot - sab).abs() < 1e-12);
        // Fractional rotation never adds valid segments.
        prop_assert!(rotate(&a, theta).valid_count() <= a.valid_count());
        // Context vectors lie in the unit ball.
        let c = context(&a).unwrap();
        prop_assert!(c.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1.0 + 1e-12);
        // A full field of view masks nothing; a partial one only removes.
        prop_assert_eq!(mask_fov(&a, center, TAU), a.clone());
        let masked = mask_fov(&a, center, theta);
        prop_assert!(masked.valid_count() <= a.valid_count());
        for s in 0..v {
            if !masked.is_valid(s) {
                prop_assert!(masked.segment(s).iter().all(|&x| x == 0.0));
            }
        }
        Ok(())
    });
    let secs = start.elapsed().as_secs_f64();
    match result {
        Ok(()) => outcome(secs < 10.0, format!("1000 random feature pairs, {secs:.2}s")),
        Err(e) => outcome(false, format!("property failed: {e}")),
    }
}

// Criterion 3 ---------------------------------------------------------------

fn bits(f: &CircularFeature) -> (Vec<u64>, Vec<bool>) {
    (f.data().iter().map(|x| x.to_bits()).collect(), f.valid().to_vec())
}

fn criterion_3() -> Outcome {
    let cb = init_codebooks(32, 32, 16, 128, 3, 10.0, 3).unwrap();
    let (mut pairs, mut bad) = (0, 0);
    for s in 0..10 {
        let scene = multi_room(300 + s, 2);
        let map = raster(&scene);
        for pose in scene.gt_poses() {
            pairs += 1;
            let canonical = render(&map, &cb, pose.t()).unwrap();
            for k in 0..16 {
                let theta = TAU * k as f64 / 16.0;
                if bits(&render_pose(&map, &cb, pose.t(), theta).unwrap()) != bits(&rotate(&canonical, theta)) {
                    bad += 1;
                }
            }
        }
    }
    outcome(bad == 0, format!("{pairs} (scene, location) pairs x 16 angles, {bad} differing"))
}

// Criterion 4 ---------------------------------------------------------------

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let cb = init_codebooks(32, 32, 16, 128, 3, 10.0, 42).unwrap();
    let (mut refined, mut grid_only, mut gts) = (Vec::new(), Vec::new(), Vec::new());
    for s in 0..20 {
        let scene = multi_room(1000 + s, 10);
        let map = raster(&scene);
        let grid = HypothesisGrid::build(&map, &cb, 0.1).unwrap();
        for pose in scene.gt_poses() {
            let q = render_pose(&map, &cb, pose.t(), pose.theta).unwrap();
            let scores = grid.score(&q, 16).unwrap();
            let opts = LocalizeOptions::default();
            refined.push(finish_localization(&map, &cb, &q, &scores, &opts).unwrap());
            grid_only.push(
                finish_localization(&map, &cb, &q, &scores, &LocalizeOptions { refine: false, ..opts }).unwrap(),
            );
            gts.push(pose);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let r015 = recall_at(&refined, &gts, 0.15);
    let report = evaluate(&refined, &gts).unwrap();
    let before = evaluate(&grid_only, &gts).unwrap();
    let (t_after, t_before) = (report.median_terr_cm.unwrap_or(f64::INFINITY), before.median_terr_cm.unwrap_or(0.0));
    let r_after = report.median_rerr_deg.unwrap_or(f64::INFINITY);
    let pass = r015 >= 0.95 && report.recall_1m_30deg >= 0.95 && t_after < t_before && r_after < 2.0 && secs < 300.0;
    outcome(
        pass,
        format!(
            "200 queries: recall@0.15m {:.3}, recall@(1m,30deg) {:.3}, median terr {:.2} -> {:.2} cm, median rerr {:.2} -> {:.2} deg, {secs:.0}s",
            r015,
            report.recall_1m_30deg,
            t_before,
            t_after,
            before.median_rerr_deg.unwrap_or(f64::NAN),
            r_after
        ),
    )
}

// Criterion 5 ---------------------------------------------------------------

/// Score lead of the best hypothesis over the best one more than 1 m away
/// (over the threshold when there is none).
fn margin(hyps: &[PoseHypothesis], threshold: f64) -> f64 {
    let top = hyps[0];
    let rival = hyps.iter().skip(1).find(|h| (h.t - top.t).norm() > 1.0).map_or(threshold, |h| h.score);
    top.score - rival
}

fn symmetric(seed: u64, door: bool) -> SyntheticScene {
    generate_scene(&SceneParams { door_wall: door, num_queries: 2, ..SceneParams::new(SceneStyle::Symmetric) }, seed)
        .unwrap()
}

fn latent_hypotheses(map: &RasterMap, cb: &CodebookSet, pose: Pose) -> Vec<PoseHypothesis> {
    let q = render_pose(map, cb, pose.t(), pose.theta).unwrap();
    let opts = LocalizeOptions { top_k: usize::MAX, ..Default::default() };
    finish_localization(map, cb, &q, &HypothesisGrid::build(map, cb, 0.1).unwrap().score(&q, 16).unwrap(), &opts)
        .unwrap()
}

fn criterion_5() -> Outcome {
    let cb = init_codebooks(32, 32, 16, 128, 3, 10.0, 5).unwrap();
    let (mut ambiguous, mut unique, mut n) = (0, 0, 0);
    let (mut worst_gap, mut worst_margin) = (0.0f64, f64::INFINITY);
    for s in 0..5 {
        for door in [false, true] {
            let scene = symmetric(500 + s, door);
            let map = raster(&scene);
            for pose in scene.gt_poses() {
                let hyps = latent_hypotheses(&map, &cb, pose);
                let m = margin(&hyps, 0.8);
                if door {
                    worst_margin = worst_margin.min(m);
                    if m > 0.05 && pose_errors(&hyps[0], &pose).0 < 0.15 {
                        unique += 1;
                    }
                } else {
                    n += 1;
                    worst_gap = worst_gap.max(m);
                    if hyps.len() >= 2 && m <= 0.02 {
                        ambiguous += 1;
                    }
                }
            }
        }
    }
    outcome(
        ambiguous == n && unique == n,
        format!(
            "wall-only: {ambiguous}/{n} with two peaks within 0.02 (largest gap {worst_gap:.4}); door: {unique}/{n} unique and correct (smallest margin {worst_margin:.3})"
        ),
    )
}

// Criterion 6 ---------------------------------------------------------------

fn depth_recall_1m(scenes: &[(RasterMap, Vec<Pose>)], cb: &CodebookSet) -> f64 {
    let enc = DepthEncoder::for_codebooks(cb);
    let opts = LocalizeOptions { threshold: 0.0, refine: false, ..Default::default() };
    let (mut results, mut gts) = (Vec::new(), Vec::new());
    for (map, poses) in scenes {
        let grid = HypothesisGrid::build(map, cb, 0.1).unwrap();
        for &pose in poses {
            let q = enc.encode(&map.floor, pose, TAU).unwrap().feature;
            results.push(finish_localization(map, cb, &q, &grid.score(&q, 16).unwrap(), &opts).unwrap());
            gts.push(pose);
        }
    }
    recall_at(&results, &gts, 1.0)
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let train: Vec<TrainScene> = (0..5)
        .map(|i| {
            let scene = multi_room(2000 + i, 20);
            TrainScene { map: raster(&scene), poses: scene.gt_poses() }
        })
        .collect();
    let held_out: Vec<(RasterMap, Vec<Pose>)> = (0..5)
        .map(|i| {
            let scene = multi_room(3000 + i, 10);
            (raster(&scene), scene.gt_poses())
        })
        .collect();
    let init = init_codebooks(32, 32, 16, 32, 3, 10.0, 7).unwrap();
    let cfg = TrainConfig { epochs: 25, lr: 0.1, num_negatives: 100, seed: 3, ..Default::default() };
    let (trained, curve) = train_codebooks(&train, init.clone(), &cfg).unwrap();
    let (first, last) = (curve[0].total, curve.last().unwrap().total);
    let reduction = 1.0 - last / first;
    let (r_random, r_trained) = (depth_recall_1m(&held_out, &init), depth_recall_1m(&held_out, &trained));
    let secs = start.elapsed().as_secs_f64();
    outcome(
        reduction >= 0.5 && r_trained - r_random >= 0.20 && secs < 900.0,
        format!(
            "loss {first:.3} -> {last:.3} ({:.0}% lower); held-out recall@1m random {:.2} vs trained {:.2}; {secs:.0}s",
            100.0 * reduction,
            r_random,
            r_trained
        ),
    )
}

// Criterion 7 ---------------------------------------------------------------

fn forward(map: &RasterMap, cb: &CodebookSet, anchor: &CircularFeature, pos: Pose, negs: &[Pose]) -> f64 {
    let p = render_pose(map, cb, pos.t(), pos.theta).unwrap();
    negs.iter()
        .map(|n| {
            let f = render_pose(map, cb, n.t(), n.theta).unwrap();
            triplet_loss(anchor, &p, &f).unwrap() + context_loss(anchor, &p, &f).unwrap()
        })
        .sum::<f64>()
        / negs.len() as f64
}

fn clear_of_kinks(map: &RasterMap, cb: &CodebookSet, anchor: &CircularFeature, pos: Pose, negs: &[Pose]) -> bool {
    let p = render_pose(map, cb, pos.t(), pos.theta).unwrap();
    let (Ok(sp), Ok(cp)) = (similarity(anchor, &p), context(&p)) else {
        return false;
    };
    let ca = context(anchor).unwrap();
    negs.iter().all(|n| {
        let f = render_pose(map, cb, n.t(), n.theta).unwrap();
        let (Ok(sn), Ok(cn)) = (similarity(anchor, &f), context(&f)) else {
            return false;
        };
        (sn - sp + 0.5).abs() > 1e-3 && (cosine(&ca, &cn) - cosine(&ca, &cp) + 1.0).abs() > 1e-3
    })
}

fn criterion_7() -> Outcome {
    const EPS: f64 = 1e-5;
    let ring = Ring::walls(vec![vec2(0.0, 0.0), vec2(3.0, 0.2), vec2(1.2, 2.6)]);
    let map = RasterMap::new(FloorMap::new(vec![ring], None).unwrap(), 100.0).unwrap();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for seed in 0..4u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cb = init_codebooks(8, 8, 4, 8, 3, 4.0, seed).unwrap();
        cb.assignment = ClassAssignment::PerPoint;
        let anchor = CircularFeature::full(4, 8, (0..32).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let free_pose = |rng: &mut ChaCha8Rng| loop {
            let t = vec2(rng.random_range(0.0..3.0), rng.random_range(0.0..2.6));
            if map.floor.is_free(&t) && map.floor.clearance(&t) > 0.05 {
                return Pose::new(t, rng.random_range(0.0..TAU));
            }
        };
        let (pos, negs) = loop {
            let pos = free_pose(&mut rng);
            let negs: Vec<Pose> = (0..3).map(|_| free_pose(&mut rng)).collect();
            if clear_of_kinks(&map, &cb, &anchor, pos, &negs) {
                break (pos, negs);
            }
        };
        let (_, grad) = batch_loss_and_grad(&map, &cb, &anchor, pos, &negs, &TrainConfig::default()).unwrap();
        for which in 0..2 {
            let len = if which == 0 { cb.angle_codes.len() } else { cb.dist_codes.len() };
            for i in 0..len {
                let (mut plus, mut minus) = (cb.clone(), cb.clone());
                let g = if which == 0 {
                    plus.angle_codes[i] += EPS;
                    minus.angle_codes[i] -= EPS;
                    grad.angle_codes[i]
                } else {
                    plus.dist_codes[i] += EPS;
                    minus.dist_codes[i] -= EPS;
                    grad.dist_codes[i]
                };
                let fd = (forward(&map, &plus, &anchor, pos, &negs) - forward(&map, &minus, &anchor, pos, &negs))
                    / (2.0 * EPS);
                if g.abs() < 1e-9 && fd.abs() < 1e-9 {
                    continue;
                }
                checked += 1;
                worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(1e-6));
            }
        }
    }
    outcome(worst < 1e-4, format!("{checked} nonzero entries over 4 seeds, max relative error {worst:.2e}"))
}

// Criterion 8 ---------------------------------------------------------------

fn mcl(floor: &FloorMap, pose: Pose) -> Vec<PoseHypothesis> {
    let scan = scan_from(floor, pose.t(), pose.theta, 72);
    let opts = LocalizeOptions { num_angles: 72, threshold: 0.0, top_k: usize::MAX, ..Default::default() };
    mcl_localize(&scan, floor, &opts, &ScanLikelihoodConfig::default()).unwrap().1
}

fn unique_success(hyps: &[PoseHypothesis], pose: &Pose, threshold: f64) -> bool {
    !hyps.is_empty() && pose_errors(&hyps[0], pose).0 < 0.15 && margin(hyps, threshold) > 0.05
}

fn criterion_8() -> Outcome {
    let (mut results, mut gts) = (Vec::new(), Vec::new());
    for s in 0..5 {
        let scene = multi_room(1000 + s, 10);
        for pose in scene.gt_poses() {
            results.push(mcl(&scene.floormap, pose));
            gts.push(pose);
        }
    }
    let recall = recall_at(&results, &gts, 0.15);
    let cb = init_codebooks(32, 32, 16, 128, 3, 10.0, 5).unwrap();
    let (mut latent_unique, mut mcl_unique, mut n) = (0, 0, 0);
    for s in 0..5 {
        let scene = symmetric(800 + s, true);
        let map = raster(&scene);
        for pose in scene.gt_poses() {
            n += 1;
            latent_unique += unique_success(&latent_hypotheses(&map, &cb, pose), &pose, 0.8) as usize;
            mcl_unique += unique_success(&mcl(&scene.floormap, pose), &pose, 0.0) as usize;
        }
    }
    outcome(
        recall == 1.0 && mcl_unique < latent_unique,
        format!(
            "MCL recall@0.15m {recall:.3} on 50 multi-room queries; door-labelled symmetric scenes unique successes: MCL {mcl_unique}/{n}, latent {latent_unique}/{n}"
        ),
    )
}

// Criterion 9 ---------------------------------------------------------------

fn criterion_9() -> Outcome {
    let params = SceneParams { width: Some(10.0), height: Some(10.0), ..SceneParams::new(SceneStyle::SingleRoom) };
    let map = raster(&generate_scene(&params, 1).unwrap());
    let cb = init_codebooks(32, 32, 16, 128, 3, 10.0, 1).unwrap();
    let report = bench_throughput(&map, &cb, 0.1, 1, 1).unwrap();
    let csv = report.to_csv();
    let s = report.samples[0];
    outcome(
        s.seconds < 10.0 && csv.starts_with("cells,seconds,samples_per_sec\n") && csv.lines().count() == 2,
        format!(
            "{} cells in {:.2}s single-threaded, {:.0} samples/s (reference GPU figure 13238 samples/s)",
            s.cells, s.seconds, s.samples_per_sec
        ),
    )
}

// Criterion 10 --------------------------------------------------------------

fn floorloc(dir: &Path, args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_floorloc")).current_dir(dir).args(args).output().unwrap();
    assert!(out.status.success(), "floorloc {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

/// Runs a seeded end-to-end CLI session in `dir` and returns every stdout
/// and written file, in a fixed order.
fn cli_session(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let step = |out: &mut Vec<(String, Vec<u8>)>, name: &str, args: &[&str]| {
        out.push((name.to_string(), floorloc(dir, args)))
    };
    step(&mut out, "gen", &["gen-scene", "--style", "multi_room", "--seed", "7", "--out", "scene", "--queries", "3", "--dim", "16"]);
    step(&mut out, "gen-train", &["gen-scene", "--style", "single_room", "--seed", "8", "--out", "data/a", "--queries", "3"]);
    step(&mut out, "init", &["init", "--seed", "3", "--out", "cb.bin", "--dim", "16"]);
    step(&mut out, "rasterize", &["rasterize", "scene/map.json"]);
    step(&mut out, "render", &["render", "scene/map.json", "cb.bin", "--x", "2.0", "--y", "3.0", "--theta", "0.7", "--out", "feat.json"]);
    step(
        &mut out,
        "localize",
        &["localize", "scene/map.json", "cb.bin", "scene/queries/query_000.json", "--cell", "0.25", "--posterior", "post.pgm"],
    );
    step(&mut out, "localize-all", &["localize", "scene/map.json", "cb.bin", "scene/queries", "--cell", "0.25", "--threshold", "0"]);
    std::fs::write(dir.join("results.json"), out.last().unwrap().1.clone()).unwrap();
    step(&mut out, "eval", &["eval", "results.json", "scene/gt.json"]);
    step(&mut out, "baseline", &["baseline", "scene/map.json", "scene/scans/scan_000.json", "--cell", "0.25"]);
    step(&mut out, "invmatch", &["invmatch", "scene/queries/query_001.json", "cb.bin"]);
    step(&mut out, "train", &["train", "data", "--epochs", "2", "--negatives", "5", "--seed", "4", "--dim", "8", "--out", "trained.bin"]);
    let files = [
        "scene/map.json",
        "scene/gt.json",
        "scene/queries/query_000.json",
        "scene/scans/scan_000.json",
        "cb.bin",
        "feat.json",
        "post.pgm",
        "trained.bin",
    ];
    for f in files {
        out.push((f.to_string(), std::fs::read(dir.join(f)).unwrap()));
    }
    out
}

fn criterion_10() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ra, rb) = (cli_session(a.path()), cli_session(b.path()));
    let differing: Vec<&str> = ra.iter().zip(&rb).filter(|(x, y)| x.1 != y.1).map(|(x, _)| x.0.as_str()).collect();
    let crlf = ra.iter().any(|(name, bytes)| !name.ends_with(".bin") && !name.ends_with(".pgm") && bytes.contains(&b'\r'));
    outcome(
        differing.is_empty() && !crlf,
        format!("{} outputs compared across two seeded runs, differing: {differing:?}", ra.len()),
    )
}

fn main() {
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let criteria: [(usize, &str, fn() -> Outcome); 10] = [
        (1, "visibility matches brute force", criterion_1),
        (2, "circular feature properties", criterion_2),
        (3, "pose rendering equals rotated canonical rendering", criterion_3),
        (4, "self-localization with oracle queries", criterion_4),
        (5, "symmetric scenes and door disambiguation", criterion_5),
        (6, "codebook training", criterion_6),
        (7, "analytic gradients vs finite differences", criterion_7),
        (8, "scan-matching baseline", criterion_8),
        (9, "grid scoring throughput", criterion_9),
        (10, "deterministic CLI outputs", criterion_10),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|e| outcome(false, format!("panicked: {}", panic_message(&e))));
        let verdict = if result.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {verdict} {name}: {} [{:.1}s]", result.detail, start.elapsed().as_secs_f64());
        if !result.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn panic_message(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
}
