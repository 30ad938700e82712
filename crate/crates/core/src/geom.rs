//! Small 2D geometry kernel shared by the map, ray casting and rendering code.

use std::f64::consts::TAU;

pub type Vec2 = nalgebra::Vector2<f64>;

/// Relative tolerance under which two segments are considered parallel.
const PARALLEL_EPS: f64 = 1e-12;

#[inline]
pub fn vec2(x: f64, y: f64) -> Vec2 {
    Vec2::new(x, y)
}

/// Signed 2D cross product `a.x * b.y - a.y * b.x`.
#[inline]
pub fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Maps an angle into `[0, 2π)`.
#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Absolute wrapped difference `min(|Δ|, 2π − |Δ|)`.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    d.min(TAU - d)
}

/// Direction angle of `v` in `[0, 2π)`.
#[inline]
pub fn heading(v: &Vec2) -> f64 {
    wrap_angle(v.y.atan2(v.x))
}

/// Signed incident angle in `[0, 2π)` between a viewing ray `ray` and a
/// surface normal `n`: `atan2(ray × n, ray · n)`.
#[inline]
pub fn incident_angle(ray: &Vec2, n: &Vec2) -> f64 {
    wrap_angle(cross(ray, n).atan2(ray.dot(n)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub fn new(a: Vec2, b: Vec2) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }

    pub fn direction(&self) -> Vec2 {
        (self.b - self.a).normalize()
    }

    /// Left-hand unit normal of the travel direction `a → b`.
    pub fn left_normal(&self) -> Vec2 {
        let d = self.direction();
        vec2(-d.y, d.x)
    }

    pub fn distance_to(&self, p: &Vec2) -> f64 {
        let ab = self.b - self.a;
        let len2 = ab.norm_squared();
        if len2 == 0.0 {
            return (p - self.a).norm();
        }
        let t = ((p - self.a).dot(&ab) / len2).clamp(0.0, 1.0);
        (p - (self.a + ab * t)).norm()
    }
}

/// Intersection of the segment `o → o + r` with segment `seg`.
///
/// Returns `(t, u)` with the hit at `o + t·r = seg.a + u·(seg.b − seg.a)`, both
/// parameters in `[0, 1]`. Parallel and collinear pairs report no hit.
#[inline]
pub fn segment_hit(o: &Vec2, r: &Vec2, seg: &Segment) -> Option<(f64, f64)> {
    let s = seg.b - seg.a;
    let denom = cross(r, &s);
    if denom.abs() <= PARALLEL_EPS * r.norm() * s.norm() {
        return None;
    }
    let ao = seg.a - o;
    let t = cross(&ao, &s) / denom;
    let u = cross(&ao, r) / denom;
    if (0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&t) {
        Some((t, u))
    } else {
        None
    }
}

/// Intersection of the ray `o + t·dir` (`t ≥ 0`, unbounded) with `seg`.
#[inline]
pub fn ray_hit(o: &Vec2, dir: &Vec2, seg: &Segment) -> Option<f64> {
    let s = seg.b - seg.a;
    let denom = cross(dir, &s);
    if denom.abs() <= PARALLEL_EPS * dir.norm() * s.norm() {
        return None;
    }
    let ao = seg.a - o;
    let t = cross(&ao, &s) / denom;
    let u = cross(&ao, dir) / denom;
    if (0.0..=1.0).contains(&u) && t > 0.0 {
        Some(t)
    } else {
        None
    }
}

/// Even-odd crossing test against a closed ring given by its distinct vertices.
pub fn point_in_ring(p: &Vec2, ring: &[Vec2]) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (vi, vj) = (ring[i], ring[j]);
        if (vi.y > p.y) != (vj.y > p.y) {
            let x = vj.x + (p.y - vj.y) / (vi.y - vj.y) * (vi.x - vj.x);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Twice the signed area of a ring; positive for counter-clockwise winding.
pub fn signed_area2(ring: &[Vec2]) -> f64 {
    let n = ring.len();
    (0..n).map(|i| cross(&ring[i], &ring[(i + 1) % n])).sum()
}

/// Proper or touching intersection test between two closed segments.
pub fn segments_intersect(p: &Segment, q: &Segment) -> bool {
    fn orient(a: &Vec2, b: &Vec2, c: &Vec2) -> f64 {
        cross(&(b - a), &(c - a))
    }
    fn on_segment(a: &Vec2, b: &Vec2, c: &Vec2) -> bool {
        c.x >= a.x.min(b.x) && c.x <= a.x.max(b.x) && c.y >= a.y.min(b.y) && c.y <= a.y.max(b.y)
    }
    let d1 = orient(&q.a, &q.b, &p.a);
    let d2 = orient(&q.a, &q.b, &p.b);
    let d3 = orient(&p.a, &p.b, &q.a);
    let d4 = orient(&p.a, &p.b, &q.b);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(&q.a, &q.b, &p.a))
        || (d2 == 0.0 && on_segment(&q.a, &q.b, &p.b))
        || (d3 == 0.0 && on_segment(&p.a, &p.b, &q.a))
        || (d4 == 0.0 && on_segment(&p.a, &p.b, &q.b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert!((wrap_angle(-PI / 2.0) - 1.5 * PI).abs() < 1e-12);
        assert!((wrap_angle(5.0 * PI) - PI).abs() < 1e-12);
        assert!(wrap_angle(-1e-18) < TAU);
    }

    #[test]
    fn angular_distance_wraps() {
        assert!((angular_distance(0.1, TAU - 0.1) - 0.2).abs() < 1e-12);
        assert!((angular_distance(PI, 0.0) - PI).abs() < 1e-12);
    }

    #[test]
    fn crossing_segments() {
        let s = Segment::new(vec2(0.0, -1.0), vec2(0.0, 1.0));
        let (t, u) = segment_hit(&vec2(-1.0, 0.0), &vec2(2.0, 0.0), &s).unwrap();
        assert!((t - 0.5).abs() < 1e-12 && (u - 0.5).abs() < 1e-12);
        assert!(segment_hit(&vec2(-1.0, 0.0), &vec2(0.5, 0.0), &s).is_none());
    }

    #[test]
    fn collinear_is_no_hit() {
        let s = Segment::new(vec2(0.0, 0.0), vec2(1.0, 0.0));
        assert!(segment_hit(&vec2(-1.0, 0.0), &vec2(3.0, 0.0), &s).is_none());
        assert!(ray_hit(&vec2(-1.0, 0.0), &vec2(1.0, 0.0), &s).is_none());
    }

    #[test]
    fn ring_containment_and_area() {
        let sq = [vec2(0.0, 0.0), vec2(1.0, 0.0), vec2(1.0, 1.0), vec2(0.0, 1.0)];
        assert!(point_in_ring(&vec2(0.5, 0.5), &sq));
        assert!(!point_in_ring(&vec2(1.5, 0.5), &sq));
        assert!((signed_area2(&sq) - 2.0).abs() < 1e-12);
    }
}
