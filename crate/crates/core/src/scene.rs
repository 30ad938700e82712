//! Seeded synthetic floor plans with ground-truth query poses.
//!
//! * `single_room`: one rectangle with a door and a window.
//! * `multi_room`: an L-shaped outline split by two free-standing interior
//!   walls into three rooms, with doorway gaps, a door and two windows. The
//!   notch corner is random, and no layout maps onto itself under rotation.
//! * `symmetric`: a wall-only rectangle, invariant under a half turn.
//!   `door_wall` relabels its whole south wall as a door.

use std::f64::consts::TAU;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floormap::{FloorMap, Label, Ring};
use crate::geom::{vec2, Vec2};
use crate::query::{Pose, QuerySample};
use crate::training::DepthEncoder;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneStyle {
    SingleRoom,
    MultiRoom,
    Symmetric,
}

impl FromStr for SceneStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single_room" => Ok(Self::SingleRoom),
            "multi_room" => Ok(Self::MultiRoom),
            "symmetric" => Ok(Self::Symmetric),
            _ => Err(Error::InvalidParameter(format!(
                "unknown scene style {s:?} (expected single_room, multi_room or symmetric)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneParams {
    pub style: SceneStyle,
    /// Overall extent; drawn from a style-specific range when unset.
    pub width: Option<f64>,
    pub height: Option<f64>,
    pub num_queries: usize,
    /// Minimum distance from query positions to any wall.
    pub clearance: f64,
    pub door_wall: bool,
    pub encoder: DepthEncoder,
    pub fov: f64,
}

impl SceneParams {
    pub fn new(style: SceneStyle) -> Self {
        Self {
            style,
            width: None,
            height: None,
            num_queries: 10,
            clearance: 0.3,
            door_wall: false,
            encoder: DepthEncoder { v: 16, d: 128, d_max: 10.0 },
            fov: TAU,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticScene {
    pub floormap: FloorMap,
    /// Depth-encoded queries at the ground-truth poses.
    pub gt_queries: Vec<QuerySample>,
    pub seed: u64,
    pub style: SceneStyle,
}

impl SyntheticScene {
    pub fn gt_poses(&self) -> Vec<Pose> {
        self.gt_queries.iter().map(|q| q.gt_pose).collect()
    }
}

/// Closed outline under construction; edge `i` runs from `pts[i]` to `pts[i + 1]`.
struct Outline {
    pts: Vec<Vec2>,
    labels: Vec<Label>,
}

impl Outline {
    fn new(pts: Vec<Vec2>) -> Self {
        let labels = vec![Label::Wall; pts.len()];
        Self { pts, labels }
    }

    fn edge(&self, i: usize) -> (Vec2, Vec2) {
        (self.pts[i], self.pts[(i + 1) % self.pts.len()])
    }

    /// Relabels a stretch of length `len` on a random wall edge that has room
    /// for it plus margins; returns false when no edge qualifies.
    fn add_opening(&mut self, label: Label, len: f64, rng: &mut impl Rng) -> bool {
        const MARGIN: f64 = 0.3;
        let candidates: Vec<usize> = (0..self.pts.len())
            .filter(|&i| {
                let (a, b) = self.edge(i);
                self.labels[i] == Label::Wall && (b - a).norm() > len + 2.0 * MARGIN + 1e-9
            })
            .collect();
        if candidates.is_empty() {
            return false;
        }
        let i = candidates[rng.random_range(0..candidates.len())];
        let (a, b) = self.edge(i);
        let l = (b - a).norm();
        let s = round_to(rng.random_range(MARGIN..=l - len - MARGIN), 0.05);
        let dir = (b - a) / l;
        let (p, q) = (a + dir * s, a + dir * (s + len));
        self.pts.splice(i + 1..i + 1, [p, q]);
        self.labels.splice(i + 1..i + 1, [label, Label::Wall]);
        true
    }

    fn into_ring(self) -> Ring {
        Ring::new(self.pts, self.labels)
    }
}

fn round_to(x: f64, step: f64) -> f64 {
    (x / step).round() * step
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Vec2> {
    vec![vec2(x0, y0), vec2(x1, y0), vec2(x1, y1), vec2(x0, y1)]
}

fn extent(given: Option<f64>, lo: f64, hi: f64, step: f64, rng: &mut impl Rng) -> f64 {
    given.unwrap_or_else(|| round_to(rng.random_range(lo..=hi), step))
}

fn single_room(p: &SceneParams, rng: &mut impl Rng) -> Result<FloorMap> {
    let w = extent(p.width, 3.0, 6.0, 0.1, rng);
    let h = extent(p.height, 2.5, 5.0, 0.1, rng);
    let mut outline = Outline::new(rect(0.0, 0.0, w, h));
    outline.add_opening(Label::Door, 0.9, rng);
    outline.add_opening(Label::Window, 1.0, rng);
    FloorMap::new(vec![outline.into_ring()], None)
}

fn multi_room(p: &SceneParams, rng: &mut impl Rng) -> Result<FloorMap> {
    let w = extent(p.width, 6.5, 9.5, 0.1, rng);
    let h = extent(p.height, 5.0, 7.0, 0.1, rng);
    if w < 6.0 || h < 4.0 {
        return Err(Error::InvalidParameter(format!("multi_room needs at least 6 x 4 m, got {w} x {h}")));
    }
    let nw = round_to(rng.random_range(0.25 * w..=0.4 * w), 0.1);
    let nh = round_to(rng.random_range(0.25 * h..=0.45 * h), 0.1);
    let mut outline = Outline::new(vec![
        vec2(nw, 0.0),
        vec2(w, 0.0),
        vec2(w, h),
        vec2(0.0, h),
        vec2(0.0, nh),
        vec2(nw, nh),
    ]);
    outline.add_opening(Label::Door, 0.9, rng);
    outline.add_opening(Label::Window, 1.2, rng);
    outline.add_opening(Label::Window, 1.2, rng);

    const THICK: f64 = 0.1;
    let xw = round_to(rng.random_range(nw + 0.8..=w - 3.0), 0.1);
    let (gb, gt) = (round_to(rng.random_range(0.6..=1.2), 0.05), round_to(rng.random_range(0.6..=1.2), 0.05));
    let vertical = rect(xw, gb, xw + THICK, h - gt);
    let yh = round_to(rng.random_range(0.4 * h..=0.6 * h), 0.1);
    let (gl, gr) = (round_to(rng.random_range(0.6..=1.0), 0.05), round_to(rng.random_range(0.6..=1.0), 0.05));
    let horizontal = rect(xw + THICK + gl, yh, w - gr, yh + THICK);

    let (mx, my) = (rng.random_bool(0.5), rng.random_bool(0.5));
    let flip = |v: Vec2| vec2(if mx { w - v.x } else { v.x }, if my { h - v.y } else { v.y });
    let outer = outline.into_ring();
    let rings = [outer, Ring::walls(vertical), Ring::walls(horizontal)]
        .into_iter()
        .map(|r| Ring::new(r.vertices.into_iter().map(flip).collect(), r.labels))
        .collect();
    FloorMap::new(rings, None)
}

fn symmetric(p: &SceneParams, rng: &mut impl Rng) -> Result<FloorMap> {
    let w = extent(p.width, 5.0, 8.0, 0.2, rng);
    let h = extent(p.height, 4.0, 6.0, 0.2, rng);
    let mut labels = vec![Label::Wall; 4];
    if p.door_wall {
        labels[0] = Label::Door;
    }
    FloorMap::new(vec![Ring::new(rect(0.0, 0.0, w, h), labels)], None)
}

/// `n` uniformly drawn poses whose positions keep `clearance` from every wall.
pub fn sample_query_poses(floor: &FloorMap, n: usize, clearance: f64, rng: &mut impl Rng) -> Result<Vec<Pose>> {
    let (lo, hi) = floor.bbox();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        if attempts > 10_000 * (n + 1) {
            return Err(Error::InfeasibleScene(format!("no room for {n} poses with clearance {clearance}")));
        }
        let t = vec2(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
        if floor.is_free(&t) && floor.clearance(&t) >= clearance {
            out.push(Pose::new(t, rng.random_range(0.0..TAU)));
        }
    }
    Ok(out)
}

/// Deterministic in `(params, seed)`.
pub fn generate_scene(params: &SceneParams, seed: u64) -> Result<SyntheticScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let floormap = match params.style {
        SceneStyle::SingleRoom => single_room(params, &mut rng)?,
        SceneStyle::MultiRoom => multi_room(params, &mut rng)?,
        SceneStyle::Symmetric => symmetric(params, &mut rng)?,
    };
    let poses = sample_query_poses(&floormap, params.num_queries, params.clearance, &mut rng)?;
    let gt_queries = poses
        .into_iter()
        .map(|pose| params.encoder.encode(&floormap, pose, params.fov))
        .collect::<Result<_>>()?;
    Ok(SyntheticScene { floormap, gt_queries, seed, style: params.style })
}
