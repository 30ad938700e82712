//! Latent-space rendering.
//!
//! Every visible map point picks a view-dependent feature from its class's
//! codebooks: one codebook indexed by the incident angle of the viewing ray,
//! one indexed by the ray length, both linearly interpolated and summed. The
//! point feature is then binned by viewing direction into a circular feature,
//! and each segment is the mean of the features that landed in it.

use std::f64::consts::TAU;
use std::io::{Read, Write};
use std::path::Path;

use crate::circfeat::{rotate, CircularFeature};
use crate::error::{Error, Result};
use crate::floormap::{Label, MapPoint};
use crate::geom::{heading, incident_angle, Vec2};
use crate::raycast::{RasterMap, VisibilityIndex};

pub const DEFAULT_G: usize = 32;
pub const DEFAULT_H: usize = 32;
pub const DEFAULT_V: usize = 16;
pub const DEFAULT_D: usize = 128;
pub const DEFAULT_D_MAX: f64 = 10.0;

const MAGIC: &[u8; 6] = b"LSRCB1";
const HEADER_LEN: usize = 6 + 5 * 4 + 8;

/// How map points are assigned to codebook classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassAssignment {
    /// One shared codebook pair per semantic label.
    PerLabel,
    /// One codebook pair per map point (class id = point index).
    PerPoint,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CodebookSet {
    pub g: usize,
    pub h: usize,
    pub v: usize,
    pub d: usize,
    pub d_max: f64,
    pub classes: usize,
    pub assignment: ClassAssignment,
    /// `classes × G × D`, row-major.
    pub angle_codes: Vec<f64>,
    /// `classes × H × D`, row-major.
    pub dist_codes: Vec<f64>,
}

impl CodebookSet {
    /// Zero-filled codebooks.
    pub fn zeros(g: usize, h: usize, v: usize, d: usize, classes: usize, d_max: f64) -> Result<Self> {
        if g == 0 || h == 0 || v == 0 || d == 0 || classes == 0 {
            return Err(Error::InvalidParameter("codebook dimensions must be positive".into()));
        }
        if !(d_max > 0.0) || !d_max.is_finite() {
            return Err(Error::InvalidParameter(format!("d_max must be positive, got {d_max}")));
        }
        let assignment = if classes == Label::COUNT { ClassAssignment::PerLabel } else { ClassAssignment::PerPoint };
        Ok(Self {
            g,
            h,
            v,
            d,
            d_max,
            classes,
            assignment,
            angle_codes: vec![0.0; classes * g * d],
            dist_codes: vec![0.0; classes * h * d],
        })
    }

    pub fn angle_code(&self, class: usize, k: usize) -> &[f64] {
        let o = (class * self.g + k) * self.d;
        &self.angle_codes[o..o + self.d]
    }

    pub fn dist_code(&self, class: usize, j: usize) -> &[f64] {
        let o = (class * self.h + j) * self.d;
        &self.dist_codes[o..o + self.d]
    }

    pub fn angle_code_mut(&mut self, class: usize, k: usize) -> &mut [f64] {
        let o = (class * self.g + k) * self.d;
        &mut self.angle_codes[o..o + self.d]
    }

    pub fn dist_code_mut(&mut self, class: usize, j: usize) -> &mut [f64] {
        let o = (class * self.h + j) * self.d;
        &mut self.dist_codes[o..o + self.d]
    }

    /// Codebook class of point `index`.
    pub fn class_of(&self, index: usize, point: &MapPoint) -> Result<usize> {
        let c = match self.assignment {
            ClassAssignment::PerLabel => point.label.index(),
            ClassAssignment::PerPoint => index,
        };
        if c >= self.classes {
            return Err(Error::UnknownClass(c));
        }
        Ok(c)
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.classes * (self.g + self.h) * self.d * 8
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(MAGIC);
        for n in [self.g, self.h, self.v, self.d, self.classes] {
            out.extend_from_slice(&(n as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.d_max.to_le_bytes());
        for c in 0..self.classes {
            let a = &self.angle_codes[c * self.g * self.d..(c + 1) * self.g * self.d];
            let b = &self.dist_codes[c * self.h * self.d..(c + 1) * self.h * self.d];
            for x in a.iter().chain(b) {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..6] != MAGIC {
            return Err(Error::Codebook("missing LSRCB1 header".into()));
        }
        let u = |i: usize| u32::from_le_bytes(bytes[6 + 4 * i..10 + 4 * i].try_into().unwrap()) as usize;
        let (g, h, v, d, classes) = (u(0), u(1), u(2), u(3), u(4));
        let d_max = f64::from_le_bytes(bytes[26..34].try_into().unwrap());
        let mut cb = Self::zeros(g, h, v, d, classes, d_max)?;
        if bytes.len() != cb.encoded_len() {
            return Err(Error::Codebook(format!(
                "expected {} bytes for G={g} H={h} D={d} classes={classes}, got {}",
                cb.encoded_len(),
                bytes.len()
            )));
        }
        let mut floats = bytes[HEADER_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        for c in 0..classes {
            for x in &mut cb.angle_codes[c * g * d..(c + 1) * g * d] {
                *x = floats.next().unwrap();
            }
            for x in &mut cb.dist_codes[c * h * d..(c + 1) * h * d] {
                *x = floats.next().unwrap();
            }
        }
        Ok(cb)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::File::create(path)?.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

/// Geometry of the viewing ray from a rendering location to a map point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayDynamics {
    pub d: f64,
    /// Incident angle in `[0, 2π)`.
    pub psi: f64,
    /// Viewing-ray direction in `[0, 2π)`.
    pub omega: f64,
}

pub fn ray_dynamics(origin: Vec2, point: &MapPoint) -> Result<RayDynamics> {
    let ray = point.t - origin;
    let d = ray.norm();
    if d == 0.0 {
        return Err(Error::CoincidentPoint);
    }
    Ok(RayDynamics { d, psi: incident_angle(&ray, &point.n), omega: heading(&ray) })
}

/// Interpolation stencil of one codebook lookup.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LookupWeights {
    pub class: usize,
    pub a0: usize,
    pub a1: usize,
    /// Weight of `a1`; `a0` gets `1 − wa`.
    pub wa: f64,
    pub b0: usize,
    pub b1: usize,
    pub wb: f64,
}

/// Angle index wraps circularly; distance index saturates at the last code.
pub fn lookup_weights(cb: &CodebookSet, class: usize, dynamics: &RayDynamics) -> LookupWeights {
    let a = cb.g as f64 * dynamics.psi / TAU;
    let af = a.floor();
    let a0 = (af as usize) % cb.g;
    let b = (cb.h as f64 * dynamics.d / cb.d_max).min((cb.h - 1) as f64);
    let bf = b.floor();
    let b0 = bf as usize;
    LookupWeights {
        class,
        a0,
        a1: (a0 + 1) % cb.g,
        wa: a - af,
        b0,
        b1: (b0 + 1).min(cb.h - 1),
        wb: b - bf,
    }
}

#[inline]
fn accumulate(cb: &CodebookSet, w: &LookupWeights, out: &mut [f64]) {
    let (ga, gb) = (cb.angle_code(w.class, w.a0), cb.angle_code(w.class, w.a1));
    let (ha, hb) = (cb.dist_code(w.class, w.b0), cb.dist_code(w.class, w.b1));
    for k in 0..cb.d {
        out[k] += (1.0 - w.wa) * ga[k] + w.wa * gb[k] + (1.0 - w.wb) * ha[k] + w.wb * hb[k];
    }
}

/// Feature of a map point of class `class` seen with the given ray dynamics.
pub fn lookup_feature(cb: &CodebookSet, class: usize, dynamics: &RayDynamics) -> Result<Vec<f64>> {
    if class >= cb.classes {
        return Err(Error::UnknownClass(class));
    }
    let mut out = vec![0.0; cb.d];
    accumulate(cb, &lookup_weights(cb, class, dynamics), &mut out);
    Ok(out)
}

/// Segment index of a viewing direction.
#[inline]
pub fn segment_of(v: usize, omega: f64) -> usize {
    ((v as f64 * omega / TAU) as usize).min(v - 1)
}

/// One visible point's contribution to a rendered feature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub point: usize,
    pub segment: usize,
    pub weights: LookupWeights,
}

/// Visits every visible map point with its segment and lookup stencil.
pub(crate) fn project(
    map: &RasterMap,
    cb: &CodebookSet,
    location: Vec2,
    mut visit: impl FnMut(Projection),
) -> Result<()> {
    map.ensure_free(&location)?;
    let index = VisibilityIndex::new(&map.floor, location);
    for (i, p) in map.cloud.points.iter().enumerate() {
        if !index.is_visible(&map.floor, &p.t, &p.n) {
            continue;
        }
        let dynamics = ray_dynamics(location, p)?;
        let class = cb.class_of(i, p)?;
        visit(Projection {
            point: i,
            segment: segment_of(cb.v, dynamics.omega),
            weights: lookup_weights(cb, class, &dynamics),
        });
    }
    Ok(())
}

/// All projections of a render, in point order.
pub fn projections(map: &RasterMap, cb: &CodebookSet, location: Vec2) -> Result<Vec<Projection>> {
    let mut out = Vec::new();
    project(map, cb, location, |p| out.push(p))?;
    Ok(out)
}

/// Canonical-orientation feature at `location`: segment 0 covers world
/// directions `[0, 2π/V)`. Segments with no visible points are invalid.
pub fn render(map: &RasterMap, cb: &CodebookSet, location: Vec2) -> Result<CircularFeature> {
    feature_from_projections(cb, &projections(map, cb, location)?)
}

/// Per-segment mean of the looked-up features of `projections`.
pub fn feature_from_projections(cb: &CodebookSet, projections: &[Projection]) -> Result<CircularFeature> {
    let (v, d) = (cb.v, cb.d);
    let mut data = vec![0.0; v * d];
    let counts = segment_counts(v, projections);
    for p in projections {
        accumulate(cb, &p.weights, &mut data[p.segment * d..(p.segment + 1) * d]);
    }
    for (seg, &n) in data.chunks_mut(d).zip(&counts) {
        if n > 1 {
            let inv = 1.0 / n as f64;
            seg.iter_mut().for_each(|x| *x *= inv);
        }
    }
    CircularFeature::new(v, d, data, counts.iter().map(|&n| n > 0).collect())
}

/// Number of projections landing in each of the `v` segments.
pub fn segment_counts(v: usize, projections: &[Projection]) -> Vec<usize> {
    let mut counts = vec![0usize; v];
    for p in projections {
        counts[p.segment] += 1;
    }
    counts
}

/// Hypothesis feature for the pose `(location, theta)`.
pub fn render_pose(map: &RasterMap, cb: &CodebookSet, location: Vec2, theta: f64) -> Result<CircularFeature> {
    Ok(rotate(&render(map, cb, location)?, theta))
}
