//! Range-scan likelihood over the same pose grid, as a geometric baseline.
//!
//! The query is a planar range scan. Each pose hypothesis simulates a scan
//! against the floor map and scores the per-ray depth residuals with a
//! truncated Gaussian. No rendering or codebooks are involved.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::floormap::FloorMap;
use crate::geom::Vec2;
use crate::localizer::{check_angles, extract_peaks, GridLayout, LocalizeOptions, PoseHypothesis, PosteriorGrid};
use crate::raycast::{scan_from, DepthScan};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanLikelihoodConfig {
    pub num_rays: usize,
    /// Depth residual standard deviation (meters).
    pub sigma_d: f64,
    /// Depths beyond this are treated as no-hit.
    pub max_range: f64,
}

impl Default for ScanLikelihoodConfig {
    fn default() -> Self {
        Self { num_rays: 72, sigma_d: 0.2, max_range: 10.0 }
    }
}

impl ScanLikelihoodConfig {
    fn check(&self) -> Result<()> {
        if self.num_rays == 0 || !(self.sigma_d > 0.0) || !(self.max_range > 0.0) {
            return Err(Error::InvalidParameter(format!("bad scan likelihood config {self:?}")));
        }
        Ok(())
    }
}

fn clip(d: f64, max_range: f64) -> f64 {
    if d > max_range {
        f64::INFINITY
    } else {
        d
    }
}

/// `exp(−mean_k min(Δk², (3σ)²) / 2σ²)` over per-ray depth residuals.
/// Two no-hits agree exactly; a single no-hit costs the truncation value.
fn score_residuals(pairs: impl Iterator<Item = (f64, f64)>, cfg: &ScanLikelihoodConfig) -> f64 {
    let cap = (3.0 * cfg.sigma_d).powi(2);
    let mut sum = 0.0;
    let mut n = 0usize;
    for (q, s) in pairs {
        let (q, s) = (clip(q, cfg.max_range), clip(s, cfg.max_range));
        let e = match (q.is_finite(), s.is_finite()) {
            (false, false) => 0.0,
            (true, true) => ((q - s) * (q - s)).min(cap),
            _ => cap,
        };
        sum += e;
        n += 1;
    }
    (-(sum / n as f64) / (2.0 * cfg.sigma_d * cfg.sigma_d)).exp()
}

/// Likelihood of `query` at the pose `(t, theta)`; ray `k` of the query is
/// taken to point at `theta + 2πk/R` in the world.
pub fn scan_likelihood(
    query: &DepthScan,
    floor: &FloorMap,
    t: Vec2,
    theta: f64,
    cfg: &ScanLikelihoodConfig,
) -> Result<f64> {
    cfg.check()?;
    if query.num_rays != cfg.num_rays || query.depths.len() != cfg.num_rays {
        return Err(Error::ShapeMismatch(format!(
            "scan has {} rays, config expects {}",
            query.depths.len(),
            cfg.num_rays
        )));
    }
    if !floor.is_free(&t) {
        return Err(Error::OutsideFreeSpace { x: t.x, y: t.y });
    }
    let sim = scan_from(floor, t, theta, cfg.num_rays);
    Ok(score_residuals(query.depths.iter().copied().zip(sim.depths), cfg))
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Scores every free cell at `num_angles` headings. One fine scan per cell
/// covers all headings whenever the heading and ray lattices share a common
/// refinement of moderate size.
pub fn mcl_grid(
    query: &DepthScan,
    floor: &FloorMap,
    cell: f64,
    num_angles: usize,
    cfg: &ScanLikelihoodConfig,
) -> Result<PosteriorGrid> {
    cfg.check()?;
    check_angles(num_angles)?;
    let r = cfg.num_rays;
    if query.depths.len() != r {
        return Err(Error::ShapeMismatch(format!("scan has {} rays, config expects {r}", query.depths.len())));
    }
    let layout = GridLayout::cover(floor.bbox(), cell)?;
    let free_mask = layout.free_mask(floor);
    let lcm = r / gcd(r, num_angles) * num_angles;
    PosteriorGrid::evaluate(layout, free_mask, |_, center| {
        let mut best = (0.0, f64::NEG_INFINITY);
        if lcm <= 4096 {
            let fine = scan_from(floor, center, 0.0, lcm);
            let (ka, kr) = (lcm / num_angles, lcm / r);
            for k in 0..num_angles {
                let pairs = (0..r).map(|j| (query.depths[j], fine.depths[(k * ka + j * kr) % lcm]));
                let s = score_residuals(pairs, cfg);
                if s > best.1 {
                    best = (TAU * k as f64 / num_angles as f64, s);
                }
            }
        } else {
            for k in 0..num_angles {
                let theta = TAU * k as f64 / num_angles as f64;
                let s = scan_likelihood(query, floor, center, theta, cfg)?;
                if s > best.1 {
                    best = (theta, s);
                }
            }
        }
        Ok(best)
    })
}

/// Grid evaluation, peak extraction and top-k selection; no refinement.
pub fn mcl_localize(
    query: &DepthScan,
    floor: &FloorMap,
    options: &LocalizeOptions,
    cfg: &ScanLikelihoodConfig,
) -> Result<(PosteriorGrid, Vec<PoseHypothesis>)> {
    let grid = mcl_grid(query, floor, options.cell, options.num_angles, cfg)?;
    let mut peaks = extract_peaks(&grid, options.threshold);
    peaks.truncate(options.top_k);
    Ok((grid, peaks))
}
