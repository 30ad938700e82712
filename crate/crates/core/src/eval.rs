//! Recall and error statistics of localization results against ground truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::angular_distance;
use crate::localizer::PoseHypothesis;
use crate::query::Pose;

pub const RECALL_RADII: [f64; 3] = [0.1, 0.5, 1.0];
/// Inlier gate: translation below 1 m and rotation below 30°.
pub const INLIER_T: f64 = 1.0;
pub const INLIER_R_DEG: f64 = 30.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_queries: usize,
    /// `(radius in meters, top-1 recall)`.
    pub recall_at: Vec<(f64, f64)>,
    /// Top-1 within 1 m and 30°.
    pub recall_1m_30deg: f64,
    /// Any of the returned hypotheses within 1 m.
    pub topk_recall_1m: f64,
    /// Medians over queries whose top-1 lies within 1 m; `None` when there are none.
    pub median_terr_cm: Option<f64>,
    pub median_rerr_deg: Option<f64>,
}

/// Translation and rotation error (radians) of a hypothesis.
pub fn pose_errors(h: &PoseHypothesis, gt: &Pose) -> (f64, f64) {
    ((h.t - gt.t()).norm(), angular_distance(h.theta, gt.theta))
}

/// Fraction of queries whose top-1 lies within `radius`; empty results miss.
pub fn recall_at(results: &[Vec<PoseHypothesis>], gts: &[Pose], radius: f64) -> f64 {
    let hits = results
        .iter()
        .zip(gts)
        .filter(|(r, gt)| r.first().is_some_and(|h| pose_errors(h, gt).0 < radius))
        .count();
    hits as f64 / gts.len().max(1) as f64
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) })
}

pub fn evaluate(results: &[Vec<PoseHypothesis>], gts: &[Pose]) -> Result<EvalReport> {
    if results.len() != gts.len() {
        return Err(Error::LengthMismatch { results: results.len(), truths: gts.len() });
    }
    let n = gts.len().max(1) as f64;
    let mut inliers = 0usize;
    let mut topk = 0usize;
    let mut terr = Vec::new();
    let mut rerr = Vec::new();
    for (r, gt) in results.iter().zip(gts) {
        if let Some(top) = r.first() {
            let (dt, dr) = pose_errors(top, gt);
            if dt < INLIER_T && dr.to_degrees() < INLIER_R_DEG {
                inliers += 1;
            }
            if dt < INLIER_T {
                terr.push(dt * 100.0);
                rerr.push(dr.to_degrees());
            }
        }
        if r.iter().any(|h| pose_errors(h, gt).0 < INLIER_T) {
            topk += 1;
        }
    }
    Ok(EvalReport {
        n_queries: gts.len(),
        recall_at: RECALL_RADII.iter().map(|&rad| (rad, recall_at(results, gts, rad))).collect(),
        recall_1m_30deg: inliers as f64 / n,
        topk_recall_1m: topk as f64 / n,
        median_terr_cm: median(&mut terr),
        median_rerr_deg: median(&mut rerr),
    })
}
