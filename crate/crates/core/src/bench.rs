//! Timing of dense grid evaluation.

use std::fmt::Write as _;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::localizer::{score_grid, GridLayout, DEFAULT_ANGLES};
use crate::raycast::RasterMap;
use crate::renderer::{render_pose, CodebookSet};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchSample {
    /// Free cells scored.
    pub cells: usize,
    pub seconds: f64,
    /// Rendered and matched hypotheses per second.
    pub samples_per_sec: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub workers: usize,
    pub samples: Vec<BenchSample>,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cells,seconds,samples_per_sec\n");
        for s in &self.samples {
            let _ = writeln!(out, "{},{:.6},{:.1}", s.cells, s.seconds, s.samples_per_sec);
        }
        out
    }

    pub fn mean_samples_per_sec(&self) -> f64 {
        self.samples.iter().map(|s| s.samples_per_sec).sum::<f64>() / self.samples.len().max(1) as f64
    }

    pub fn std_samples_per_sec(&self) -> f64 {
        let m = self.mean_samples_per_sec();
        let n = self.samples.len().max(1) as f64;
        (self.samples.iter().map(|s| (s.samples_per_sec - m).powi(2)).sum::<f64>() / n).sqrt()
    }
}

/// Runs `score_grid` `reps` times on `workers` threads, with the canonical
/// rendering at the first free cell as the query.
pub fn bench_throughput(
    map: &RasterMap,
    cb: &CodebookSet,
    cell: f64,
    reps: usize,
    workers: usize,
) -> Result<BenchReport> {
    if reps == 0 || workers == 0 {
        return Err(Error::InvalidParameter("reps and workers must be at least 1".into()));
    }
    let layout = GridLayout::cover(map.floor.bbox(), cell)?;
    let mask = layout.free_mask(&map.floor);
    let first = mask.iter().position(|&f| f).ok_or(Error::NoFreeCells)?;
    let cells = mask.iter().filter(|&&f| f).count();
    let query = render_pose(map, cb, layout.center(first), 0.0)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        pool.install(|| score_grid(map, cb, &query, cell, DEFAULT_ANGLES))?;
        let seconds = start.elapsed().as_secs_f64();
        samples.push(BenchSample { cells, seconds, samples_per_sec: cells as f64 / seconds });
    }
    Ok(BenchReport { workers, samples })
}
