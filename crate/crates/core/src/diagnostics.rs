//! Inverse lookup of query segments in codebook space.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::circfeat::{cosine, CircularFeature};
use crate::error::{Error, Result};
use crate::renderer::CodebookSet;

/// Codebook entry pair whose summed feature best explains a segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverseMatch {
    pub class: usize,
    /// Ray length of the best distance code.
    pub d: f64,
    /// Incident angle of the best angle code.
    pub psi: f64,
    pub cosine: f64,
}

/// Per segment, the `(class, angle code, distance code)` maximizing cosine
/// similarity with the segment; `None` for invalid segments. Ties go to the
/// lowest `(class, angle, distance)` triple.
pub fn inverse_match(query: &CircularFeature, cb: &CodebookSet) -> Result<Vec<Option<InverseMatch>>> {
    if query.d() != cb.d {
        return Err(Error::ShapeMismatch(format!("query D={} but codebook D={}", query.d(), cb.d)));
    }
    let mut sums = vec![0.0; cb.d];
    let mut out = Vec::with_capacity(query.v());
    for a in 0..query.v() {
        if !query.is_valid(a) {
            out.push(None);
            continue;
        }
        let seg = query.segment(a);
        let mut best: Option<InverseMatch> = None;
        for c in 0..cb.classes {
            for k in 0..cb.g {
                let ak = cb.angle_code(c, k);
                for j in 0..cb.h {
                    for ((s, x), y) in sums.iter_mut().zip(ak).zip(cb.dist_code(c, j)) {
                        *s = x + y;
                    }
                    let cs = cosine(seg, &sums);
                    if best.is_none_or(|b| cs > b.cosine) {
                        best = Some(InverseMatch {
                            class: c,
                            d: cb.d_max * j as f64 / cb.h as f64,
                            psi: TAU * k as f64 / cb.g as f64,
                            cosine: cs,
                        });
                    }
                }
            }
        }
        out.push(best);
    }
    Ok(out)
}
