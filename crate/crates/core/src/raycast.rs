//! Line-of-sight tests against map edges and simulated planar range scans.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floormap::{rasterize, FloorMap, Label, PointCloudMap};
use crate::geom::{heading, incident_angle, ray_hit, segment_hit, vec2, Segment, Vec2};

/// Intersections closer than this to the target point do not occlude it.
pub const SELF_OCCLUSION_EPS: f64 = 1e-6;

/// Number of angular buckets used to prune occluder candidates.
const BUCKETS: usize = 128;

/// A floor map together with its rasterized point cloud.
#[derive(Clone, Debug)]
pub struct RasterMap {
    pub floor: FloorMap,
    pub cloud: PointCloudMap,
}

impl RasterMap {
    pub fn new(floor: FloorMap, interval: f64) -> Result<Self> {
        let cloud = rasterize(&floor, interval)?;
        Ok(Self { floor, cloud })
    }

    pub fn ensure_free(&self, p: &Vec2) -> Result<()> {
        if self.floor.is_free(p) {
            Ok(())
        } else {
            Err(Error::OutsideFreeSpace { x: p.x, y: p.y })
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VisibilityResult {
    /// Sorted, unique indices into the point cloud.
    pub visible_indices: Vec<usize>,
}

/// Whether edge `seg` blocks the sight line from `origin` to `target`.
#[inline]
pub fn occludes(origin: &Vec2, target: &Vec2, seg: &Segment) -> bool {
    let r = target - origin;
    match segment_hit(origin, &r, seg) {
        Some((t, _)) => t > 0.0 && (1.0 - t) * r.norm() > SELF_OCCLUSION_EPS,
        None => false,
    }
}

/// Indices of map points visible from `origin`.
///
/// A point is visible when it faces the origin (`(p − o) · n < 0`) and no
/// edge crosses the sight line before reaching it.
pub fn visible_points(map: &RasterMap, origin: Vec2) -> Result<VisibilityResult> {
    map.ensure_free(&origin)?;
    let mut out = Vec::new();
    VisibilityIndex::new(&map.floor, origin).collect_visible(&map.floor, &map.cloud, &mut out);
    Ok(VisibilityResult { visible_indices: out })
}

/// Edges bucketed by the angular interval they subtend around one origin.
pub(crate) struct VisibilityIndex {
    origin: Vec2,
    buckets: Vec<Vec<u32>>,
    min_dist: Vec<f64>,
}

impl VisibilityIndex {
    pub(crate) fn new(floor: &FloorMap, origin: Vec2) -> Self {
        let mut buckets = vec![Vec::new(); BUCKETS];
        let mut min_dist = Vec::with_capacity(floor.edges().len());
        let width = TAU / BUCKETS as f64;
        for (id, e) in floor.edges().iter().enumerate() {
            min_dist.push(e.segment.distance_to(&origin));
            let pa = heading(&(e.segment.a - origin));
            let pb = heading(&(e.segment.b - origin));
            let mut start = pa;
            let mut span = (pb - pa).rem_euclid(TAU);
            if span > std::f64::consts::PI {
                start = pb;
                span = TAU - span;
            }
            let first = (start / width).floor() as isize - 1;
            let last = ((start + span) / width).floor() as isize + 1;
            let count = ((last - first + 1) as usize).min(BUCKETS);
            for k in 0..count {
                let b = (first + k as isize).rem_euclid(BUCKETS as isize) as usize;
                buckets[b].push(id as u32);
            }
        }
        Self { origin, buckets, min_dist }
    }

    #[inline]
    pub(crate) fn is_visible(&self, floor: &FloorMap, target: &Vec2, normal: &Vec2) -> bool {
        let r = target - self.origin;
        if r.dot(normal) >= 0.0 {
            return false;
        }
        let dist = r.norm();
        let b = ((heading(&r) / (TAU / BUCKETS as f64)) as usize).min(BUCKETS - 1);
        let edges = floor.edges();
        !self.buckets[b].iter().any(|&id| {
            let id = id as usize;
            self.min_dist[id] < dist && occludes(&self.origin, target, &edges[id].segment)
        })
    }

    pub(crate) fn collect_visible(&self, floor: &FloorMap, cloud: &PointCloudMap, out: &mut Vec<usize>) {
        out.clear();
        for (i, p) in cloud.points.iter().enumerate() {
            if self.is_visible(floor, &p.t, &p.n) {
                out.push(i);
            }
        }
    }
}

/// A planar range scan; ray `k` points at `start + 2πk/R`.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthScan {
    pub origin: Vec2,
    pub num_rays: usize,
    /// `f64::INFINITY` for rays that hit nothing.
    pub depths: Vec<f64>,
    pub semantics: Vec<Option<Label>>,
    /// Incident angle at the hit in `[0, 2π)`; 0 for rays without a hit.
    pub incident_angles: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit {
    pub depth: f64,
    pub edge_id: usize,
    pub incident_angle: f64,
}

/// Nearest edge hit along the ray from `origin` at direction angle `angle`.
pub fn cast_ray(floor: &FloorMap, origin: &Vec2, angle: f64) -> Option<RayHit> {
    let dir = vec2(angle.cos(), angle.sin());
    let mut best: Option<(f64, usize)> = None;
    for (id, e) in floor.edges().iter().enumerate() {
        if let Some(t) = ray_hit(origin, &dir, &e.segment) {
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, id));
            }
        }
    }
    best.map(|(depth, edge_id)| RayHit {
        depth,
        edge_id,
        incident_angle: incident_angle(&dir, &floor.edges()[edge_id].normal),
    })
}

/// Casts `num_rays` rays starting at direction `start` (radians, CCW from +x).
pub fn scan_from(floor: &FloorMap, origin: Vec2, start: f64, num_rays: usize) -> DepthScan {
    let mut depths = Vec::with_capacity(num_rays);
    let mut semantics = Vec::with_capacity(num_rays);
    let mut incident_angles = Vec::with_capacity(num_rays);
    for k in 0..num_rays {
        let angle = start + TAU * k as f64 / num_rays as f64;
        match cast_ray(floor, &origin, angle) {
            Some(hit) => {
                depths.push(hit.depth);
                semantics.push(Some(floor.edges()[hit.edge_id].label));
                incident_angles.push(hit.incident_angle);
            }
            None => {
                depths.push(f64::INFINITY);
                semantics.push(None);
                incident_angles.push(0.0);
            }
        }
    }
    DepthScan { origin, num_rays, depths, semantics, incident_angles }
}

/// Simulated noiseless 2D LiDAR with ray `k` at angle `2πk/R`.
pub fn lidar_scan(floor: &FloorMap, origin: Vec2, num_rays: usize) -> Result<DepthScan> {
    if num_rays == 0 {
        return Err(Error::InvalidParameter("num_rays must be at least 1".into()));
    }
    if !floor.is_free(&origin) {
        return Err(Error::OutsideFreeSpace { x: origin.x, y: origin.y });
    }
    Ok(scan_from(floor, origin, 0.0, num_rays))
}

/// JSON form of a scan; `null` depth encodes a ray without a hit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DepthScanDoc {
    pub origin: [f64; 2],
    pub num_rays: usize,
    pub depths: Vec<Option<f64>>,
    pub semantics: Vec<Option<Label>>,
    pub incident_angles: Vec<f64>,
}

impl From<&DepthScan> for DepthScanDoc {
    fn from(s: &DepthScan) -> Self {
        Self {
            origin: [s.origin.x, s.origin.y],
            num_rays: s.num_rays,
            depths: s.depths.iter().map(|d| d.is_finite().then_some(*d)).collect(),
            semantics: s.semantics.clone(),
            incident_angles: s.incident_angles.clone(),
        }
    }
}

impl TryFrom<DepthScanDoc> for DepthScan {
    type Error = Error;

    fn try_from(d: DepthScanDoc) -> Result<Self> {
        let n = d.num_rays;
        if n == 0 || d.depths.len() != n || d.semantics.len() != n || d.incident_angles.len() != n {
            return Err(Error::Schema(format!("scan arrays must all have num_rays = {n} entries")));
        }
        if d.depths.iter().flatten().any(|x| !(*x >= 0.0)) {
            return Err(Error::Schema("scan depths must be non-negative".into()));
        }
        Ok(DepthScan {
            origin: vec2(d.origin[0], d.origin[1]),
            num_rays: n,
            depths: d.depths.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect(),
            semantics: d.semantics,
            incident_angles: d.incident_angles,
        })
    }
}
