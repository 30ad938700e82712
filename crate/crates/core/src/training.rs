//! Query encoders and codebook training.
//!
//! Codebooks are learned with a rotation-aware triplet loss on segment
//! similarity plus a hinge on the cosine of the per-feature context vectors.
//! Gradients are computed analytically through the cosine terms, the rotation
//! interpolation, the per-segment means and the codebook lookups, and applied
//! with plain SGD.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::circfeat::{context, cosine, mask_fov, norm, rotate, segment_shift, similarity, CircularFeature};
use crate::error::{Error, Result};
use crate::floormap::{FloorMap, Label};
use crate::geom::vec2;
use crate::query::{Pose, QuerySample, QuerySource};
use crate::raycast::{scan_from, RasterMap};
use crate::renderer::{feature_from_projections, projections, render_pose, segment_counts, CodebookSet, Projection};

pub const TRIPLET_MARGIN: f64 = 0.5;
pub const CONTEXT_MARGIN: f64 = 1.0;

/// Codebooks with i.i.d. `N(0, 1/D)` entries.
pub fn init_codebooks(
    g: usize,
    h: usize,
    v: usize,
    d: usize,
    classes: usize,
    d_max: f64,
    seed: u64,
) -> Result<CodebookSet> {
    let mut cb = CodebookSet::zeros(g, h, v, d, classes, d_max)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0 / (d as f64).sqrt()).expect("positive std");
    for x in cb.angle_codes.iter_mut().chain(cb.dist_codes.iter_mut()) {
        *x = normal.sample(&mut rng);
    }
    Ok(cb)
}

/// Rendered feature at the true pose with additive Gaussian noise on valid
/// segments, masked to a field of view centred on the heading.
pub fn encode_oracle_query(
    map: &RasterMap,
    cb: &CodebookSet,
    pose: Pose,
    noise_sigma: f64,
    fov: f64,
    rng: &mut impl Rng,
) -> Result<QuerySample> {
    let clean = render_pose(map, cb, pose.t(), pose.theta)?;
    let feature = add_noise(&clean, noise_sigma, rng)?;
    Ok(QuerySample { gt_pose: pose, feature: mask_fov(&feature, 0.0, fov), source: QuerySource::OracleNoisy, fov })
}

fn add_noise(f: &CircularFeature, sigma: f64, rng: &mut impl Rng) -> Result<CircularFeature> {
    if sigma == 0.0 {
        return Ok(f.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(format!("noise sigma: {e}")))?;
    Ok(f.map_values(|x| x + normal.sample(rng)))
}

/// Encodes a simulated range scan into a circular feature without any
/// codebook: one ray per segment through its angular midpoint.
///
/// Each ray's vector holds sinusoids of the normalized depth, sinusoids of
/// the incident angle and the one-hot label, in blocks of `3·⌈D/8⌉` entries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DepthEncoder {
    pub v: usize,
    pub d: usize,
    pub d_max: f64,
}

/// Frequencies cycle through `2^0 … 2^5` so large `D` repeats bands instead
/// of aliasing.
const MAX_OCTAVE: usize = 6;

impl DepthEncoder {
    pub fn for_codebooks(cb: &CodebookSet) -> Self {
        Self { v: cb.v, d: cb.d, d_max: cb.d_max }
    }

    fn block(&self) -> usize {
        3 * self.d.div_ceil(8)
    }

    fn sinusoids(x: f64, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let freq = (1u64 << ((j / 2) % MAX_OCTAVE)) as f64;
            *o = if j % 2 == 0 { (freq * x).sin() } else { (freq * x).cos() };
        }
    }

    /// Vector for one ray hit.
    pub fn encode_ray(&self, depth: f64, psi: f64, label: Label) -> Vec<f64> {
        let b = self.block();
        let mut out = vec![0.0; self.d];
        let end = |k: usize| (k * b).min(self.d);
        Self::sinusoids(PI * depth.min(self.d_max) / self.d_max, &mut out[0..end(1)]);
        Self::sinusoids(psi, &mut out[end(1)..end(2)]);
        for (o, s) in out[end(2)..end(3)].iter_mut().zip(label.one_hot()) {
            *o = s;
        }
        out
    }

    pub fn encode(&self, floor: &FloorMap, pose: Pose, fov: f64) -> Result<QuerySample> {
        if !floor.is_free(&pose.t()) {
            return Err(Error::OutsideFreeSpace { x: pose.x, y: pose.y });
        }
        let start = pose.theta + TAU * 0.5 / self.v as f64;
        let scan = scan_from(floor, pose.t(), start, self.v);
        let mut data = vec![0.0; self.v * self.d];
        let mut valid = vec![false; self.v];
        for a in 0..self.v {
            if let Some(label) = scan.semantics[a] {
                valid[a] = true;
                let ray = self.encode_ray(scan.depths[a], scan.incident_angles[a], label);
                data[a * self.d..(a + 1) * self.d].copy_from_slice(&ray);
            }
        }
        let feature = CircularFeature::new(self.v, self.d, data, valid)?;
        Ok(QuerySample { gt_pose: pose, feature: mask_fov(&feature, 0.0, fov), source: QuerySource::DepthEncoded, fov })
    }
}

/// Depth-encoded query at `pose` for codebooks of shape `(V, D, d_max)`.
pub fn encode_depth_query(floor: &FloorMap, encoder: &DepthEncoder, pose: Pose, fov: f64) -> Result<QuerySample> {
    encoder.encode(floor, pose, fov)
}

/// `2·max(S(a,n) − S(a,p) + 0.5, 0)`.
pub fn triplet_loss(anchor: &CircularFeature, positive: &CircularFeature, negative: &CircularFeature) -> Result<f64> {
    let sp = similarity(anchor, positive)?;
    let sn = similarity(anchor, negative)?;
    Ok(2.0 * (sn - sp + TRIPLET_MARGIN).max(0.0))
}

/// `max(cos(c̄a, c̄n) − cos(c̄a, c̄p) + 1, 0)` over context vectors.
pub fn context_loss(anchor: &CircularFeature, positive: &CircularFeature, negative: &CircularFeature) -> Result<f64> {
    let ca = context(anchor)?;
    let cp = context(positive)?;
    let cn = context(negative)?;
    Ok((cosine(&ca, &cn) - cosine(&ca, &cp) + CONTEXT_MARGIN).max(0.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub num_negatives: usize,
    pub lr: f64,
    pub epochs: usize,
    /// Gaussian noise added to every anchor before matching.
    pub noise_sigma: f64,
    pub margin_triplet: f64,
    pub margin_context: f64,
    pub seed: u64,
    pub fov: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            num_negatives: 100,
            lr: 0.05,
            epochs: 10,
            noise_sigma: 0.0,
            margin_triplet: TRIPLET_MARGIN,
            margin_context: CONTEXT_MARGIN,
            seed: 0,
            fov: TAU,
        }
    }
}

/// One training map with its ground-truth query poses.
#[derive(Clone, Debug)]
pub struct TrainScene {
    pub map: RasterMap,
    pub poses: Vec<Pose>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub mean_triplet: f64,
    pub mean_context: f64,
    pub total: f64,
}

pub fn loss_curve_csv(curve: &[EpochLoss]) -> String {
    let mut out = String::from("epoch,mean_triplet,mean_context,total\n");
    for e in curve {
        let _ = writeln!(out, "{},{},{},{}", e.epoch, e.mean_triplet, e.mean_context, e.total);
    }
    out
}

/// Mean triplet and context losses of one anchor against its negatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchLoss {
    pub triplet: f64,
    pub context: f64,
}

impl BatchLoss {
    pub fn total(&self) -> f64 {
        self.triplet + self.context
    }
}

/// A rendered pose with what is needed to push gradients back to the codebooks.
struct Traced {
    projections: Vec<Projection>,
    counts: Vec<usize>,
    canonical_valid: Vec<bool>,
    theta: f64,
    rotated: CircularFeature,
}

fn trace(map: &RasterMap, cb: &CodebookSet, pose: Pose) -> Result<Traced> {
    let projections = projections(map, cb, pose.t())?;
    let canonical = feature_from_projections(cb, &projections)?;
    let rotated = rotate(&canonical, pose.theta);
    Ok(Traced {
        counts: segment_counts(cb.v, &projections),
        canonical_valid: canonical.valid().to_vec(),
        projections,
        theta: pose.theta,
        rotated,
    })
}

/// `∂cos(x, y)/∂y`, scaled and added to `out`; zero when either norm vanishes.
fn add_cosine_grad(x: &[f64], y: &[f64], scale: f64, out: &mut [f64]) {
    let (nx, ny) = (norm(x), norm(y));
    if nx == 0.0 || ny == 0.0 {
        return;
    }
    let c = cosine(x, y);
    for k in 0..y.len() {
        out[k] += scale * (x[k] / nx - c * y[k] / ny) / ny;
    }
}

/// Adds `scale · ∂S(anchor, r)/∂r` to `out` (laid out like `r.data()`).
fn add_similarity_grad(anchor: &CircularFeature, r: &CircularFeature, scale: f64, out: &mut [f64]) {
    let d = r.d();
    let joint: Vec<usize> = (0..r.v()).filter(|&a| anchor.is_valid(a) && r.is_valid(a)).collect();
    if joint.is_empty() {
        return;
    }
    let s = scale / (2.0 * joint.len() as f64);
    for a in joint {
        add_cosine_grad(anchor.segment(a), r.segment(a), s, &mut out[a * d..(a + 1) * d]);
    }
}

/// Unnormalized context sum and the valid-segment count of `r`.
fn context_parts(r: &CircularFeature) -> (Vec<f64>, usize) {
    let mut acc = vec![0.0; r.d()];
    let mut count = 0;
    for a in 0..r.v() {
        if !r.is_valid(a) {
            continue;
        }
        count += 1;
        let seg = r.segment(a);
        let n = norm(seg);
        if n > 0.0 {
            for (x, y) in acc.iter_mut().zip(seg) {
                *x += y / n;
            }
        }
    }
    (acc, count)
}

/// Adds `scale · ∂cos(ca, context(r))/∂r` to `out`.
fn add_context_grad(ca: &[f64], r: &CircularFeature, scale: f64, out: &mut [f64]) {
    let (mut c, count) = context_parts(r);
    if count == 0 {
        return;
    }
    c.iter_mut().for_each(|x| *x /= count as f64);
    let mut gc = vec![0.0; c.len()];
    add_cosine_grad(ca, &c, 1.0, &mut gc);
    let d = r.d();
    for a in 0..r.v() {
        if !r.is_valid(a) {
            continue;
        }
        let seg = r.segment(a);
        let n = norm(seg);
        if n == 0.0 {
            continue;
        }
        let proj: f64 = gc.iter().zip(seg).map(|(g, x)| g * x / n).sum();
        let s = scale / (count as f64 * n);
        for k in 0..d {
            out[a * d + k] += s * (gc[k] - proj * seg[k] / n);
        }
    }
}

/// Pushes `∂L/∂rotated` back to the codebook entries touched by this render.
fn backprop(t: &Traced, g_rot: &[f64], cb: &CodebookSet, grad: &mut CodebookSet) {
    let (v, d) = (cb.v, cb.d);
    let shift = segment_shift(v, t.theta);
    let base = shift.floor() as usize % v;
    let frac = shift - shift.floor();
    let mut g_canon = vec![0.0; v * d];
    for a in 0..v {
        if !t.rotated.is_valid(a) {
            continue;
        }
        let s0 = (a + base) % v;
        let s1 = (s0 + 1) % v;
        let (w0, w1) = if frac == 0.0 { (1.0, 0.0) } else { (1.0 - frac, frac) };
        for k in 0..d {
            let g = g_rot[a * d + k];
            g_canon[s0 * d + k] += w0 * g;
            if w1 != 0.0 {
                g_canon[s1 * d + k] += w1 * g;
            }
        }
    }
    for p in &t.projections {
        let seg = p.segment;
        if !t.canonical_valid[seg] {
            continue;
        }
        let inv = 1.0 / t.counts[seg] as f64;
        let g = &g_canon[seg * d..(seg + 1) * d];
        let w = &p.weights;
        for (idx, wt) in [(w.a0, 1.0 - w.wa), (w.a1, w.wa)] {
            if wt != 0.0 {
                let code = grad.angle_code_mut(w.class, idx);
                for k in 0..d {
                    code[k] += wt * inv * g[k];
                }
            }
        }
        for (idx, wt) in [(w.b0, 1.0 - w.wb), (w.b1, w.wb)] {
            if wt != 0.0 {
                let code = grad.dist_code_mut(w.class, idx);
                for k in 0..d {
                    code[k] += wt * inv * g[k];
                }
            }
        }
    }
}

/// Loss of one anchor against the positive pose and each negative pose, and
/// its gradient with respect to every codebook entry.
///
/// The loss is the mean over negatives of the triplet hinge plus the mean of
/// the context hinge. At a hinge kink the zero branch is taken.
pub fn batch_loss_and_grad(
    map: &RasterMap,
    cb: &CodebookSet,
    anchor: &CircularFeature,
    positive: Pose,
    negatives: &[Pose],
    cfg: &TrainConfig,
) -> Result<(BatchLoss, CodebookSet)> {
    if negatives.is_empty() {
        return Err(Error::InvalidParameter("at least one negative is required".into()));
    }
    let pos = trace(map, cb, positive)?;
    let negs: Vec<Traced> = negatives.par_iter().map(|&p| trace(map, cb, p)).collect::<Result<_>>()?;

    let ca = context(anchor)?;
    let sp = similarity(anchor, &pos.rotated)?;
    let cp = context(&pos.rotated)?;
    let cos_p = cosine(&ca, &cp);

    let n = negatives.len() as f64;
    let mut g_pos = vec![0.0; cb.v * cb.d];
    let mut g_negs = Vec::with_capacity(negs.len());
    let (mut triplet, mut ctx) = (0.0, 0.0);
    let (mut w_sp, mut w_cp) = (0.0, 0.0);
    for t in &negs {
        let mut g = vec![0.0; cb.v * cb.d];
        let sn = similarity(anchor, &t.rotated)?;
        let h = sn - sp + cfg.margin_triplet;
        if h > 0.0 {
            triplet += 2.0 * h;
            add_similarity_grad(anchor, &t.rotated, 2.0 / n, &mut g);
            w_sp -= 2.0 / n;
        }
        let cn = context(&t.rotated)?;
        let hc = cosine(&ca, &cn) - cos_p + cfg.margin_context;
        if hc > 0.0 {
            ctx += hc;
            add_context_grad(&ca, &t.rotated, 1.0 / n, &mut g);
            w_cp -= 1.0 / n;
        }
        g_negs.push(g);
    }
    add_similarity_grad(anchor, &pos.rotated, w_sp, &mut g_pos);
    add_context_grad(&ca, &pos.rotated, w_cp, &mut g_pos);

    let mut grad = CodebookSet::zeros(cb.g, cb.h, cb.v, cb.d, cb.classes, cb.d_max)?;
    grad.assignment = cb.assignment;
    backprop(&pos, &g_pos, cb, &mut grad);
    for (t, g) in negs.iter().zip(&g_negs) {
        backprop(t, g, cb, &mut grad);
    }
    Ok((BatchLoss { triplet: triplet / n, context: ctx / n }, grad))
}

/// Uniform pose over the free space of `map`.
pub fn sample_free_pose(map: &RasterMap, rng: &mut impl Rng) -> Pose {
    let (lo, hi) = map.floor.bbox();
    loop {
        let t = vec2(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
        if map.floor.is_free(&t) {
            return Pose::new(t, rng.random_range(0.0..TAU));
        }
    }
}

/// Trains `init` on depth-encoded anchors at every ground-truth pose of the
/// dataset. Each epoch visits all poses once in a seeded shuffled order.
pub fn train_codebooks(
    scenes: &[TrainScene],
    init: CodebookSet,
    cfg: &TrainConfig,
) -> Result<(CodebookSet, Vec<EpochLoss>)> {
    let encoder = DepthEncoder::for_codebooks(&init);
    let mut anchors = Vec::new();
    for (s, scene) in scenes.iter().enumerate() {
        for &pose in &scene.poses {
            anchors.push((s, pose, encoder.encode(&scene.map.floor, pose, cfg.fov)?.feature));
        }
    }
    if anchors.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.num_negatives == 0 {
        return Err(Error::InvalidParameter("num_negatives must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cb = init;
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..anchors.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut sum_t, mut sum_c) = (0.0, 0.0);
        for (iteration, &i) in order.iter().enumerate() {
            let (s, pose, ref anchor) = anchors[i];
            let map = &scenes[s].map;
            let negatives: Vec<Pose> = (0..cfg.num_negatives).map(|_| sample_free_pose(map, &mut rng)).collect();
            let anchor = add_noise(anchor, cfg.noise_sigma, &mut rng)?;
            let (loss, grad) = batch_loss_and_grad(map, &cb, &anchor, pose, &negatives, cfg)?;
            if !loss.total().is_finite() {
                return Err(Error::NonFiniteLoss { epoch, iteration });
            }
            sum_t += loss.triplet;
            sum_c += loss.context;
            for (x, g) in cb.angle_codes.iter_mut().zip(&grad.angle_codes) {
                *x -= cfg.lr * g;
            }
            for (x, g) in cb.dist_codes.iter_mut().zip(&grad.dist_codes) {
                *x -= cfg.lr * g;
            }
        }
        let n = anchors.len() as f64;
        curve.push(EpochLoss {
            epoch,
            mean_triplet: sum_t / n,
            mean_context: sum_c / n,
            total: (sum_t + sum_c) / n,
        });
    }
    Ok((cb, curve))
}
