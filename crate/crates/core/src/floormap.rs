//! Polygonal floor maps and their rasterization into annotated boundary points.
//!
//! A map is a set of closed rings. Rings at even nesting depth are outer
//! boundaries and are stored counter-clockwise; rings at odd depth are holes
//! (interior walls, columns) and are stored clockwise. With that winding the
//! free space always lies to the left of the travel direction, so every edge
//! normal is the left-hand perpendicular.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{point_in_ring, segments_intersect, signed_area2, vec2, Segment, Vec2};

/// Sampling interval used when none is given.
pub const DEFAULT_INTERVAL: f64 = 0.10;

/// Two rasterized points closer than this are the same point.
const COINCIDENT_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Wall,
    Door,
    Window,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Wall, Label::Door, Label::Window];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Wall => "wall",
            Label::Door => "door",
            Label::Window => "window",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s {
            "wall" => Some(Label::Wall),
            "door" => Some(Label::Door),
            "window" => Some(Label::Window),
            _ => None,
        }
    }

    pub fn one_hot(self) -> [f64; Label::COUNT] {
        let mut v = [0.0; Label::COUNT];
        v[self.index()] = 1.0;
        v
    }
}

/// A closed ring stored by its distinct vertices; edge `i` runs from
/// `vertices[i]` to `vertices[(i + 1) % n]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ring {
    pub vertices: Vec<Vec2>,
    pub labels: Vec<Label>,
}

impl Ring {
    pub fn new(vertices: Vec<Vec2>, labels: Vec<Label>) -> Self {
        Self { vertices, labels }
    }

    /// Ring with every edge labeled as wall.
    pub fn walls(vertices: Vec<Vec2>) -> Self {
        let labels = vec![Label::Wall; vertices.len()];
        Self { vertices, labels }
    }

    pub fn edge_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn segment(&self, i: usize) -> Segment {
        let n = self.vertices.len();
        Segment::new(self.vertices[i], self.vertices[(i + 1) % n])
    }

    /// Reverses traversal while keeping vertex 0 first; edge labels follow
    /// their geometric edge.
    fn reversed(&self) -> Ring {
        let n = self.vertices.len();
        let vertices = (0..n).map(|j| self.vertices[(n - j) % n]).collect();
        let labels = (0..n).map(|j| self.labels[n - 1 - j]).collect();
        Ring { vertices, labels }
    }
}

/// One boundary edge with its free-space-facing normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub segment: Segment,
    pub normal: Vec2,
    pub label: Label,
    pub ring: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FloorMap {
    rings: Vec<Ring>,
    edges: Vec<Edge>,
    free_space_hint: Option<Vec2>,
}

impl FloorMap {
    /// Validates the rings and normalizes their winding.
    pub fn new(rings: Vec<Ring>, free_space_hint: Option<Vec2>) -> Result<Self> {
        for (r, ring) in rings.iter().enumerate() {
            validate_ring(r, ring)?;
        }
        let oriented: Vec<Ring> = rings
            .iter()
            .enumerate()
            .map(|(r, ring)| {
                let probe = ring.vertices[0];
                let depth = rings
                    .iter()
                    .enumerate()
                    .filter(|&(o, other)| o != r && point_in_ring(&probe, &other.vertices))
                    .count();
                let ccw = signed_area2(&ring.vertices) > 0.0;
                let want_ccw = depth % 2 == 0;
                if ccw == want_ccw {
                    ring.clone()
                } else {
                    ring.reversed()
                }
            })
            .collect();

        let edges = oriented
            .iter()
            .enumerate()
            .flat_map(|(r, ring)| {
                (0..ring.edge_count()).map(move |i| {
                    let segment = ring.segment(i);
                    Edge { segment, normal: segment.left_normal(), label: ring.labels[i], ring: r }
                })
            })
            .collect();

        let map = FloorMap { rings: oriented, edges, free_space_hint };
        if let Some(h) = free_space_hint {
            if !map.is_free(&h) {
                return Err(Error::HintOutsideFreeSpace { x: h.x, y: h.y });
            }
        }
        Ok(map)
    }

    pub fn rings(&self) -> &[Ring] {
        &self.rings
    }

    /// All edges in ring order; the position in this slice is the edge id.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn free_space_hint(&self) -> Option<Vec2> {
        self.free_space_hint
    }

    /// Even-odd containment over all rings.
    pub fn is_free(&self, p: &Vec2) -> bool {
        self.rings.iter().filter(|r| point_in_ring(p, &r.vertices)).count() % 2 == 1
    }

    /// Distance from `p` to the nearest edge.
    pub fn clearance(&self, p: &Vec2) -> f64 {
        self.edges.iter().map(|e| e.segment.distance_to(p)).fold(f64::INFINITY, f64::min)
    }

    pub fn bbox(&self) -> (Vec2, Vec2) {
        let mut lo = vec2(f64::INFINITY, f64::INFINITY);
        let mut hi = vec2(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in self.rings.iter().flat_map(|r| r.vertices.iter()) {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Applies `f` to every vertex (and the hint) and rebuilds the map.
    pub fn map_vertices(&self, f: impl Fn(Vec2) -> Vec2) -> Result<FloorMap> {
        let rings = self
            .rings
            .iter()
            .map(|r| Ring::new(r.vertices.iter().map(|&v| f(v)).collect(), r.labels.clone()))
            .collect();
        FloorMap::new(rings, self.free_space_hint.map(&f))
    }

    pub fn to_doc(&self) -> FloorMapDoc {
        FloorMapDoc {
            rings: self
                .rings
                .iter()
                .map(|r| RingDoc {
                    vertices: r.vertices.iter().map(|v| [v.x, v.y]).collect(),
                    labels: r.labels.iter().map(|l| l.as_str().to_string()).collect(),
                })
                .collect(),
            free_space_hint: self.free_space_hint.map(|h| [h.x, h.y]),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("floor map serializes")
    }
}

fn validate_ring(r: usize, ring: &Ring) -> Result<()> {
    let n = ring.vertices.len();
    if ring.vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
        return Err(Error::Schema(format!("ring {r}: non-finite coordinate")));
    }
    let mut distinct: Vec<Vec2> = Vec::new();
    for v in &ring.vertices {
        if !distinct.iter().any(|d| d == v) {
            distinct.push(*v);
        }
    }
    if distinct.len() < 3 {
        return Err(Error::DegenerateRing { ring: r, distinct: distinct.len() });
    }
    if ring.labels.len() != n {
        return Err(Error::LabelCount { ring: r, labels: ring.labels.len(), edges: n });
    }
    for i in 0..n {
        if ring.segment(i).length() == 0.0 {
            return Err(Error::Schema(format!("ring {r}: edge {i} has zero length")));
        }
    }
    for i in 0..n {
        let si = ring.segment(i);
        for j in i + 1..n {
            let sj = ring.segment(j);
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // Adjacent edges share a vertex; they only conflict when they fold back.
                let (di, dj) = (si.b - si.a, sj.b - sj.a);
                let folds = crate::geom::cross(&di, &dj) == 0.0 && di.dot(&dj) < 0.0;
                if folds {
                    return Err(Error::SelfIntersecting { ring: r, first: i, second: j });
                }
            } else if segments_intersect(&si, &sj) {
                return Err(Error::SelfIntersecting { ring: r, first: i, second: j });
            }
        }
    }
    Ok(())
}

/// JSON document form of a floor map.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloorMapDoc {
    pub rings: Vec<RingDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free_space_hint: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingDoc {
    pub vertices: Vec<[f64; 2]>,
    pub labels: Vec<String>,
}

/// Parses a floor-map JSON document.
///
/// A ring may repeat its first vertex at the end; the duplicate is dropped
/// before the label count is checked.
pub fn parse_floormap(bytes: &[u8]) -> Result<FloorMap> {
    let doc: FloorMapDoc =
        serde_json::from_slice(bytes).map_err(|e| Error::Schema(e.to_string()))?;
    if doc.rings.is_empty() {
        return Err(Error::Schema("map has no rings".into()));
    }
    let mut rings = Vec::with_capacity(doc.rings.len());
    for (r, rd) in doc.rings.iter().enumerate() {
        let mut vertices: Vec<Vec2> = rd.vertices.iter().map(|p| vec2(p[0], p[1])).collect();
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        let labels = rd
            .labels
            .iter()
            .enumerate()
            .map(|(e, s)| {
                Label::parse(s).ok_or_else(|| Error::UnknownLabel { ring: r, edge: e, label: s.clone() })
            })
            .collect::<Result<Vec<_>>>()?;
        rings.push(Ring::new(vertices, labels));
    }
    FloorMap::new(rings, doc.free_space_hint.map(|h| vec2(h[0], h[1])))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapPoint {
    pub t: Vec2,
    /// Unit normal pointing into free space.
    pub n: Vec2,
    pub label: Label,
    pub edge_id: usize,
}

impl MapPoint {
    pub fn semantics(&self) -> [f64; Label::COUNT] {
        self.label.one_hot()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointCloudMap {
    pub points: Vec<MapPoint>,
    pub interval: f64,
    pub bbox: (Vec2, Vec2),
}

/// Samples every edge at arclength `k·interval` from its start.
///
/// Where the last sample of an edge coincides with the first sample of the
/// next edge in the same ring, only the earlier edge's point is kept.
pub fn rasterize(map: &FloorMap, interval: f64) -> Result<PointCloudMap> {
    if !(interval > 0.0) || !interval.is_finite() {
        return Err(Error::InvalidParameter(format!("interval must be positive, got {interval}")));
    }
    let mut points = Vec::new();
    for (r, ring) in map.rings().iter().enumerate() {
        let ring_start = points.len();
        let first_edge = map.edges().iter().position(|e| e.ring == r).expect("ring has edges");
        let n_edges = ring.edge_count();
        for i in 0..n_edges {
            let edge_id = first_edge + i;
            let edge = &map.edges()[edge_id];
            let len = edge.segment.length();
            let dir = edge.segment.direction();
            let count = (len / interval + 1e-9).floor() as usize;
            for k in 0..=count {
                let s = (k as f64 * interval).min(len);
                let t = edge.segment.a + dir * s;
                if k == 0 && i > 0 {
                    if let Some(prev) = points.last() {
                        let prev: &MapPoint = prev;
                        if (prev.t - t).norm() < COINCIDENT_EPS {
                            continue;
                        }
                    }
                }
                if k == count && i == n_edges - 1 && points.len() > ring_start {
                    let first: &MapPoint = &points[ring_start];
                    if (first.t - t).norm() < COINCIDENT_EPS {
                        continue;
                    }
                }
                points.push(MapPoint { t, n: edge.normal, label: edge.label, edge_id });
            }
        }
    }
    Ok(PointCloudMap { points, interval, bbox: map.bbox() })
}
