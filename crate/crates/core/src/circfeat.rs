//! Circular features: a ring of `V` direction-binned segments of dimension `D`.
//!
//! Segment `α` covers the planar directions `[2πα/V, 2π(α+1)/V)`, so the first
//! and last segments are neighbours and rotating the viewer is a cyclic shift.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::wrap_angle;

/// Fractional shifts closer than this to an integer are treated as integer.
const SHIFT_SNAP: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct CircularFeature {
    v: usize,
    d: usize,
    data: Vec<f64>,
    valid: Vec<bool>,
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity; 0 when either vector has zero norm.
#[inline]
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    cosine_with_norms(a, b, norm(a), norm(b))
}

#[inline]
pub(crate) fn cosine_with_norms(a: &[f64], b: &[f64], na: f64, nb: f64) -> f64 {
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

impl CircularFeature {
    /// Builds a feature from row-major `V × D` data. Invalid segments are zeroed.
    pub fn new(v: usize, d: usize, mut data: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        if v == 0 || d == 0 {
            return Err(Error::ShapeMismatch(format!("V and D must be positive (V={v}, D={d})")));
        }
        if data.len() != v * d || valid.len() != v {
            return Err(Error::ShapeMismatch(format!(
                "expected {v}x{d} data and {v} flags, got {} values and {} flags",
                data.len(),
                valid.len()
            )));
        }
        for (seg, ok) in data.chunks_mut(d).zip(&valid) {
            if !ok {
                seg.fill(0.0);
            }
        }
        Ok(Self { v, d, data, valid })
    }

    /// All segments valid.
    pub fn full(v: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(v, d, data, vec![true; v])
    }

    pub fn v(&self) -> usize {
        self.v
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn segment(&self, alpha: usize) -> &[f64] {
        &self.data[alpha * self.d..(alpha + 1) * self.d]
    }

    pub fn segment_mut(&mut self, alpha: usize) -> &mut [f64] {
        &mut self.data[alpha * self.d..(alpha + 1) * self.d]
    }

    pub fn is_valid(&self, alpha: usize) -> bool {
        self.valid[alpha]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&b| b).count()
    }

    pub fn same_shape(&self, other: &CircularFeature) -> Result<()> {
        if self.v != other.v || self.d != other.d {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.v, self.d, other.v, other.d
            )));
        }
        Ok(())
    }

    /// Applies `f` to every value of every valid segment.
    pub fn map_values(&self, mut f: impl FnMut(f64) -> f64) -> CircularFeature {
        let mut out = self.clone();
        for (seg, ok) in out.data.chunks_mut(self.d).zip(&self.valid) {
            if *ok {
                seg.iter_mut().for_each(|x| *x = f(*x));
            }
        }
        out
    }

    pub fn to_doc(&self) -> FeatureDoc {
        FeatureDoc {
            v: self.v,
            d: self.d,
            valid: self.valid.clone(),
            segments: self.data.chunks(self.d).map(<[f64]>::to_vec).collect(),
        }
    }
}

/// Mean per-segment cosine over jointly valid segments, mapped to `[0, 1]`.
pub fn similarity(a: &CircularFeature, b: &CircularFeature) -> Result<f64> {
    a.same_shape(b)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for alpha in 0..a.v {
        if a.valid[alpha] && b.valid[alpha] {
            sum += cosine(a.segment(alpha), b.segment(alpha));
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyJointMask);
    }
    Ok(sum / count as f64 / 2.0 + 0.5)
}

/// Segment shift `Vθ/2π` wrapped into `[0, V)`, snapped to an integer when
/// within rounding distance of one.
pub fn segment_shift(v: usize, theta: f64) -> f64 {
    let s = (v as f64 * wrap_angle(theta) / TAU).rem_euclid(v as f64);
    let r = s.round();
    if (s - r).abs() < SHIFT_SNAP {
        r.rem_euclid(v as f64)
    } else {
        s
    }
}

/// Rotates the underlying directions by `theta`: output segment `α` is input
/// segment `α + Vθ/2π` (mod V), linearly interpolated for fractional shifts.
/// An interpolated segment is valid only if both of its sources are.
pub fn rotate(f: &CircularFeature, theta: f64) -> CircularFeature {
    let (v, d) = (f.v, f.d);
    let shift = segment_shift(v, theta);
    let base = shift.floor() as usize % v;
    let frac = shift - shift.floor();
    let mut data = vec![0.0; v * d];
    let mut valid = vec![false; v];
    if frac == 0.0 {
        for alpha in 0..v {
            let src = (alpha + base) % v;
            valid[alpha] = f.valid[src];
            data[alpha * d..(alpha + 1) * d].copy_from_slice(f.segment(src));
        }
    } else {
        for alpha in 0..v {
            let s0 = (alpha + base) % v;
            let s1 = (s0 + 1) % v;
            if f.valid[s0] && f.valid[s1] {
                valid[alpha] = true;
                let (x0, x1) = (f.segment(s0), f.segment(s1));
                for (k, out) in data[alpha * d..(alpha + 1) * d].iter_mut().enumerate() {
                    *out = (1.0 - frac) * x0[k] + frac * x1[k];
                }
            }
        }
    }
    CircularFeature { v, d, data, valid }
}

/// Mean of the unit-normalized valid segments (zero-norm segments count as
/// zero vectors).
pub fn context(f: &CircularFeature) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; f.d];
    let mut count = 0usize;
    let mut nonzero = false;
    for alpha in 0..f.v {
        if !f.valid[alpha] {
            continue;
        }
        count += 1;
        let seg = f.segment(alpha);
        let n = norm(seg);
        if n > 0.0 {
            nonzero = true;
            for (a, x) in acc.iter_mut().zip(seg) {
                *a += x / n;
            }
        }
    }
    if !nonzero {
        return Err(Error::ZeroContext);
    }
    acc.iter_mut().for_each(|a| *a /= count as f64);
    Ok(acc)
}

/// Whether segment `alpha`'s angular midpoint lies in `[center − fov/2, center + fov/2)`.
pub fn in_fov(v: usize, alpha: usize, center: f64, fov: f64) -> bool {
    const EPS: f64 = 1e-9;
    if fov >= TAU - EPS {
        return true;
    }
    let mid = TAU * (alpha as f64 + 0.5) / v as f64;
    let mut x = (mid - (center - fov / 2.0)).rem_euclid(TAU);
    if x > TAU - EPS {
        x = 0.0;
    }
    x < fov - EPS
}

/// Invalidates (and zeroes) segments whose midpoint falls outside the field of view.
pub fn mask_fov(f: &CircularFeature, center: f64, fov: f64) -> CircularFeature {
    let mut out = f.clone();
    for alpha in 0..f.v {
        if !in_fov(f.v, alpha, center, fov) {
            out.valid[alpha] = false;
            out.segment_mut(alpha).fill(0.0);
        }
    }
    out
}

/// A feature with per-segment norms cached, for repeated rotation matching.
#[derive(Clone, Debug)]
pub struct PreparedFeature {
    pub feature: CircularFeature,
    norms: Vec<f64>,
}

impl PreparedFeature {
    pub fn new(feature: CircularFeature) -> Self {
        let norms = (0..feature.v).map(|a| norm(feature.segment(a))).collect();
        Self { feature, norms }
    }

    /// `similarity(query, rotate(self, θ))` for a shift of `shift` whole
    /// segments, computed without materializing the rotation.
    pub fn similarity_shifted(&self, query: &PreparedFeature, shift: usize) -> Option<f64> {
        let (q, h) = (&query.feature, &self.feature);
        let v = h.v;
        let mut sum = 0.0;
        let mut count = 0usize;
        for alpha in 0..v {
            let src = (alpha + shift) % v;
            if q.valid[alpha] && h.valid[src] {
                sum += cosine_with_norms(q.segment(alpha), h.segment(src), query.norms[alpha], self.norms[src]);
                count += 1;
            }
        }
        (count > 0).then(|| sum / count as f64 / 2.0 + 0.5)
    }
}

/// JSON document form `{"V", "D", "valid", "segments"}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeatureDoc {
    #[serde(rename = "V")]
    pub v: usize,
    #[serde(rename = "D")]
    pub d: usize,
    pub valid: Vec<bool>,
    pub segments: Vec<Vec<f64>>,
}

impl TryFrom<FeatureDoc> for CircularFeature {
    type Error = Error;

    fn try_from(doc: FeatureDoc) -> Result<Self> {
        if doc.segments.len() != doc.v || doc.segments.iter().any(|s| s.len() != doc.d) {
            return Err(Error::Schema(format!("feature segments must be {}x{}", doc.v, doc.d)));
        }
        CircularFeature::new(doc.v, doc.d, doc.segments.concat(), doc.valid)
    }
}
