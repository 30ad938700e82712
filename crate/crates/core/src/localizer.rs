//! Measurement model and pose recovery over a dense location grid.
//!
//! Each free grid cell is rendered once at the canonical orientation and
//! matched against the query at a set of uniformly sampled rotations; the
//! best rotation's similarity is the cell's unnormalized likelihood. Peaks of
//! the resulting posterior are refined by a local pattern search.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circfeat::{rotate, similarity, CircularFeature, PreparedFeature};
use crate::error::{Error, Result};
use crate::floormap::FloorMap;
use crate::geom::{vec2, wrap_angle, Vec2};
use crate::raycast::RasterMap;
use crate::renderer::{render, render_pose, CodebookSet};

pub const DEFAULT_CELL: f64 = 0.1;
pub const DEFAULT_ANGLES: usize = 16;
pub const DEFAULT_THRESHOLD: f64 = 0.8;
pub const DEFAULT_TOP_K: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "PoseDoc", from = "PoseDoc")]
pub struct PoseHypothesis {
    pub t: Vec2,
    /// Heading in `[0, 2π)`.
    pub theta: f64,
    pub score: f64,
    pub likelihood: f64,
}

#[derive(Clone, Copy, Serialize, Deserialize)]
struct PoseDoc {
    x: f64,
    y: f64,
    theta: f64,
    score: f64,
    likelihood: f64,
}

impl From<PoseHypothesis> for PoseDoc {
    fn from(p: PoseHypothesis) -> Self {
        PoseDoc { x: p.t.x, y: p.t.y, theta: p.theta, score: p.score, likelihood: p.likelihood }
    }
}

impl From<PoseDoc> for PoseHypothesis {
    fn from(d: PoseDoc) -> Self {
        PoseHypothesis { t: vec2(d.x, d.y), theta: d.theta, score: d.score, likelihood: d.likelihood }
    }
}

pub(crate) fn check_angles(num_angles: usize) -> Result<()> {
    if num_angles == 0 {
        return Err(Error::InvalidParameter("num_angles must be at least 1".into()));
    }
    Ok(())
}

/// Best of `num_angles` uniformly sampled rotations of `hyp` against `query`.
///
/// Returns `(θ, score)`; ties go to the smallest angle. Angles with no jointly
/// valid segment are skipped.
pub fn best_rotation(query: &CircularFeature, hyp: &CircularFeature, num_angles: usize) -> Result<(f64, f64)> {
    query.same_shape(hyp)?;
    check_angles(num_angles)?;
    let mut best: Option<(f64, f64)> = None;
    for k in 0..num_angles {
        let theta = TAU * k as f64 / num_angles as f64;
        match similarity(query, &rotate(hyp, theta)) {
            Ok(s) => {
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((theta, s));
                }
            }
            Err(Error::EmptyJointMask) => {}
            Err(e) => return Err(e),
        }
    }
    best.ok_or(Error::EmptyJointMask)
}

/// Same result as [`best_rotation`] for prepared features; uses index shifts
/// when every sampled angle is a whole number of segments.
pub fn best_rotation_prepared(query: &PreparedFeature, hyp: &PreparedFeature, num_angles: usize) -> Option<(f64, f64)> {
    let v = hyp.feature.v();
    if v % num_angles != 0 {
        return best_rotation(&query.feature, &hyp.feature, num_angles).ok();
    }
    let stride = v / num_angles;
    let mut best: Option<(f64, f64)> = None;
    for k in 0..num_angles {
        if let Some(s) = hyp.similarity_shifted(query, k * stride) {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((TAU * k as f64 / num_angles as f64, s));
            }
        }
    }
    best
}

/// Cell layout covering an axis-aligned box; cell `(i, j)` is centered at
/// `origin + ((i + ½)·cell, (j + ½)·cell)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridLayout {
    pub origin: Vec2,
    pub cell: f64,
    pub width: usize,
    pub height: usize,
}

impl GridLayout {
    pub fn cover(bbox: (Vec2, Vec2), cell: f64) -> Result<Self> {
        if !(cell > 0.0) || !cell.is_finite() {
            return Err(Error::InvalidParameter(format!("cell must be positive, got {cell}")));
        }
        let (lo, hi) = bbox;
        let count = |extent: f64| ((extent / cell - 1e-9).ceil() as usize).max(1);
        Ok(Self { origin: lo, cell, width: count(hi.x - lo.x), height: count(hi.y - lo.y) })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn center(&self, index: usize) -> Vec2 {
        let (i, j) = (index % self.width, index / self.width);
        self.origin + vec2((i as f64 + 0.5) * self.cell, (j as f64 + 0.5) * self.cell)
    }

    /// Index of the cell containing `p`, if inside the grid.
    pub fn cell_of(&self, p: &Vec2) -> Option<usize> {
        let q = (p - self.origin) / self.cell;
        if q.x < 0.0 || q.y < 0.0 {
            return None;
        }
        let (i, j) = (q.x.floor() as usize, q.y.floor() as usize);
        (i < self.width && j < self.height).then_some(j * self.width + i)
    }

    /// Cells whose centers lie in free space.
    pub fn free_mask(&self, floor: &FloorMap) -> Vec<bool> {
        (0..self.len()).map(|c| floor.is_free(&self.center(c))).collect()
    }
}

/// Dense grid of best-rotation scores; the posterior under a uniform prior.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorGrid {
    pub layout: GridLayout,
    /// Row-major (`y * width + x`); 0 outside free space.
    pub scores: Vec<f64>,
    pub best_theta: Vec<f64>,
    pub free_mask: Vec<bool>,
}

impl PosteriorGrid {
    /// Evaluates `score` at every free cell center in parallel.
    pub fn evaluate<F>(layout: GridLayout, free_mask: Vec<bool>, score: F) -> Result<Self>
    where
        F: Fn(usize, Vec2) -> Result<(f64, f64)> + Sync,
    {
        if !free_mask.iter().any(|&f| f) {
            return Err(Error::NoFreeCells);
        }
        let cells: Vec<(f64, f64)> = (0..layout.len())
            .into_par_iter()
            .map(|c| if free_mask[c] { score(c, layout.center(c)) } else { Ok((0.0, 0.0)) })
            .collect::<Result<_>>()?;
        let (best_theta, scores) = cells.into_iter().unzip();
        Ok(Self { layout, scores, best_theta, free_mask })
    }

    pub fn total_free_score(&self) -> f64 {
        self.scores.iter().zip(&self.free_mask).filter(|(_, &f)| f).map(|(s, _)| s).sum()
    }

    /// Scores normalized over free cells; uniform when every free score is 0.
    pub fn likelihoods(&self) -> Vec<f64> {
        let total = self.total_free_score();
        let n_free = self.free_mask.iter().filter(|&&f| f).count() as f64;
        self.scores
            .iter()
            .zip(&self.free_mask)
            .map(|(&s, &f)| match (f, total > 0.0) {
                (false, _) => 0.0,
                (true, true) => s / total,
                (true, false) => 1.0 / n_free,
            })
            .collect()
    }

    pub fn likelihood_of(&self, score: f64) -> f64 {
        let total = self.total_free_score();
        if total > 0.0 {
            score / total
        } else {
            1.0 / self.free_mask.iter().filter(|&&f| f).count() as f64
        }
    }

    /// 16-bit binary PGM, scores scaled to `[0, 65535]`, north (max y) up.
    pub fn to_pgm(&self) -> Vec<u8> {
        let (w, h) = (self.layout.width, self.layout.height);
        let mut out = format!("P5\n{w} {h}\n65535\n").into_bytes();
        for j in (0..h).rev() {
            for i in 0..w {
                let s = self.scores[j * w + i].clamp(0.0, 1.0);
                out.extend_from_slice(&((s * 65535.0).round() as u16).to_be_bytes());
            }
        }
        out
    }

    /// CSV with header `x,y,score,best_theta`, one row per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,score,best_theta\n");
        for c in 0..self.layout.len() {
            let p = self.layout.center(c);
            writeln!(out, "{},{},{},{}", p.x, p.y, self.scores[c], self.best_theta[c]).unwrap();
        }
        out
    }
}

/// Canonical-orientation features rendered once per free cell, reusable
/// across queries against the same map and codebooks.
#[derive(Clone, Debug)]
pub struct HypothesisGrid {
    pub layout: GridLayout,
    pub free_mask: Vec<bool>,
    features: Vec<Option<PreparedFeature>>,
}

impl HypothesisGrid {
    pub fn build(map: &RasterMap, cb: &CodebookSet, cell: f64) -> Result<Self> {
        let layout = GridLayout::cover(map.floor.bbox(), cell)?;
        let free_mask = layout.free_mask(&map.floor);
        if !free_mask.iter().any(|&f| f) {
            return Err(Error::NoFreeCells);
        }
        let features = (0..layout.len())
            .into_par_iter()
            .map(|c| {
                if free_mask[c] {
                    render(map, cb, layout.center(c)).map(|f| Some(PreparedFeature::new(f)))
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self { layout, free_mask, features })
    }

    pub fn feature(&self, cell: usize) -> Option<&CircularFeature> {
        self.features[cell].as_ref().map(|p| &p.feature)
    }

    pub fn score(&self, query: &CircularFeature, num_angles: usize) -> Result<PosteriorGrid> {
        check_angles(num_angles)?;
        let q = PreparedFeature::new(query.clone());
        PosteriorGrid::evaluate(self.layout, self.free_mask.clone(), |c, _| {
            let hyp = self.features[c].as_ref().expect("free cell has a feature");
            q.feature.same_shape(&hyp.feature)?;
            Ok(best_rotation_prepared(&q, hyp, num_angles).unwrap_or((0.0, 0.0)))
        })
    }
}

/// Renders and scores every free cell without retaining the rendered features.
pub fn score_grid(
    map: &RasterMap,
    cb: &CodebookSet,
    query: &CircularFeature,
    cell: f64,
    num_angles: usize,
) -> Result<PosteriorGrid> {
    check_angles(num_angles)?;
    let layout = GridLayout::cover(map.floor.bbox(), cell)?;
    let q = PreparedFeature::new(query.clone());
    PosteriorGrid::evaluate(layout, layout.free_mask(&map.floor), |_, center| {
        let hyp = PreparedFeature::new(render(map, cb, center)?);
        q.feature.same_shape(&hyp.feature)?;
        Ok(best_rotation_prepared(&q, &hyp, num_angles).unwrap_or((0.0, 0.0)))
    })
}

/// Free cells that strictly dominate their free 3×3 neighbourhood with
/// `score ≥ threshold`, best first.
pub fn extract_peaks(grid: &PosteriorGrid, threshold: f64) -> Vec<PoseHypothesis> {
    let (w, h) = (grid.layout.width as isize, grid.layout.height as isize);
    let mut peaks: Vec<usize> = Vec::new();
    for c in 0..grid.layout.len() {
        let s = grid.scores[c];
        if !grid.free_mask[c] || s < threshold {
            continue;
        }
        let (i, j) = ((c % grid.layout.width) as isize, (c / grid.layout.width) as isize);
        let dominates = (-1..=1).all(|dj| {
            (-1..=1).all(|di| {
                let (x, y) = (i + di, j + dj);
                if (di == 0 && dj == 0) || x < 0 || y < 0 || x >= w || y >= h {
                    return true;
                }
                let n = (y * w + x) as usize;
                !grid.free_mask[n] || s > grid.scores[n]
            })
        });
        if dominates {
            peaks.push(c);
        }
    }
    peaks.sort_by(|a, b| grid.scores[*b].total_cmp(&grid.scores[*a]));
    peaks
        .into_iter()
        .map(|c| PoseHypothesis {
            t: grid.layout.center(c),
            theta: grid.best_theta[c],
            score: grid.scores[c],
            likelihood: grid.likelihood_of(grid.scores[c]),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefineConfig {
    /// Initial translation step (meters).
    pub step_t: f64,
    /// Initial rotation step (radians).
    pub step_theta: f64,
    pub min_step_t: f64,
    pub min_step_theta: f64,
    pub max_iters: usize,
}

impl RefineConfig {
    /// Half a grid cell and half a rotation sample spacing.
    pub fn for_grid(cell: f64, num_angles: usize) -> Self {
        Self {
            step_t: 0.5 * cell,
            step_theta: 0.5 * TAU / num_angles as f64,
            min_step_t: 0.01,
            min_step_theta: 0.5f64.to_radians(),
            max_iters: 60,
        }
    }
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self::for_grid(DEFAULT_CELL, DEFAULT_ANGLES)
    }
}

/// Outcome of a refinement with the sequence of accepted scores.
#[derive(Clone, Debug)]
pub struct RefineTrace {
    pub best: PoseHypothesis,
    pub accepted: Vec<f64>,
    pub iterations: usize,
}

fn pose_score(map: &RasterMap, cb: &CodebookSet, query: &CircularFeature, t: Vec2, theta: f64) -> Result<Option<f64>> {
    if !map.floor.is_free(&t) {
        return Ok(None);
    }
    match similarity(query, &render_pose(map, cb, t, theta)?) {
        Ok(s) => Ok(Some(s)),
        Err(Error::EmptyJointMask) => Ok(Some(0.0)),
        Err(e) => Err(e),
    }
}

/// Pattern search over `(x, y, θ)` from `init`.
///
/// The first move is taken even if it lowers the score, which moves the
/// estimate off the sampling lattice; afterwards a move is accepted only when
/// it improves similarity, and both steps halve when none does.
pub fn refine_traced(
    map: &RasterMap,
    cb: &CodebookSet,
    query: &CircularFeature,
    init: &PoseHypothesis,
    cfg: &RefineConfig,
) -> Result<RefineTrace> {
    map.ensure_free(&init.t)?;
    let init_score = pose_score(map, cb, query, init.t, init.theta)?.unwrap_or(init.score);
    let mut current = (init.t, wrap_angle(init.theta), init_score);
    let mut best = current;
    let (mut step_t, mut step_r) = (cfg.step_t, cfg.step_theta);
    let mut accepted = Vec::new();
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let (t, th, s) = current;
        let moves = [
            (vec2(step_t, 0.0), 0.0),
            (vec2(-step_t, 0.0), 0.0),
            (vec2(0.0, step_t), 0.0),
            (vec2(0.0, -step_t), 0.0),
            (vec2(0.0, 0.0), step_r),
            (vec2(0.0, 0.0), -step_r),
        ];
        let mut cand: Option<(Vec2, f64, f64)> = None;
        for (dt, dr) in moves {
            let (nt, nth) = (t + dt, wrap_angle(th + dr));
            if let Some(ns) = pose_score(map, cb, query, nt, nth)? {
                if cand.is_none_or(|(_, _, cs)| ns > cs) {
                    cand = Some((nt, nth, ns));
                }
            }
        }
        let first = accepted.is_empty();
        match cand {
            Some(c) if first || c.2 > s => {
                current = c;
                accepted.push(c.2);
                if c.2 > best.2 {
                    best = c;
                }
            }
            _ => {
                if step_t < cfg.min_step_t && step_r < cfg.min_step_theta {
                    break;
                }
                step_t *= 0.5;
                step_r *= 0.5;
            }
        }
    }
    Ok(RefineTrace {
        best: PoseHypothesis { t: best.0, theta: best.1, score: best.2, likelihood: init.likelihood },
        accepted,
        iterations,
    })
}

pub fn refine(
    map: &RasterMap,
    cb: &CodebookSet,
    query: &CircularFeature,
    init: &PoseHypothesis,
    cfg: &RefineConfig,
) -> Result<PoseHypothesis> {
    refine_traced(map, cb, query, init, cfg).map(|t| t.best)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalizeOptions {
    pub cell: f64,
    pub num_angles: usize,
    pub threshold: f64,
    pub top_k: usize,
    pub refine: bool,
    /// Overrides the default refinement steps derived from the grid.
    pub refine_config: Option<RefineConfig>,
}

impl Default for LocalizeOptions {
    fn default() -> Self {
        Self {
            cell: DEFAULT_CELL,
            num_angles: DEFAULT_ANGLES,
            threshold: DEFAULT_THRESHOLD,
            top_k: DEFAULT_TOP_K,
            refine: true,
            refine_config: None,
        }
    }
}

impl LocalizeOptions {
    pub fn refine_config(&self) -> RefineConfig {
        self.refine_config.unwrap_or_else(|| RefineConfig::for_grid(self.cell, self.num_angles))
    }
}

/// Peaks of `grid`, optionally refined, re-ranked by score and cut to top-k.
pub fn finish_localization(
    map: &RasterMap,
    cb: &CodebookSet,
    query: &CircularFeature,
    grid: &PosteriorGrid,
    options: &LocalizeOptions,
) -> Result<Vec<PoseHypothesis>> {
    let peaks = extract_peaks(grid, options.threshold);
    let mut out: Vec<PoseHypothesis> = if options.refine {
        let cfg = options.refine_config();
        peaks
            .par_iter()
            .map(|p| {
                let mut r = refine(map, cb, query, p, &cfg)?;
                r.likelihood = grid.likelihood_of(r.score);
                Ok(r)
            })
            .collect::<Result<_>>()?
    } else {
        peaks
    };
    out.sort_by(|a, b| b.score.total_cmp(&a.score));
    out.truncate(options.top_k);
    Ok(out)
}

/// Grid scoring, peak extraction, refinement and top-k selection.
pub fn localize(
    map: &RasterMap,
    cb: &CodebookSet,
    query: &CircularFeature,
    options: &LocalizeOptions,
) -> Result<Vec<PoseHypothesis>> {
    let grid = score_grid(map, cb, query, options.cell, options.num_angles)?;
    finish_localization(map, cb, query, &grid, options)
}
