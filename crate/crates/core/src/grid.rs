//! Axis-aligned evaluation lattices.
//!
//! Verification samples over deterministic lattices rather than random
//! clouds, so reports are reproducible byte for byte. Points are emitted in
//! row-major order with the last axis fastest; guard-rejected points are
//! skipped, and a grid whose every point is rejected is an error.

use crate::error::{HjtError, Result};
use crate::field::Guard;

/// One lattice axis: `count` evenly spaced samples in [min, max], endpoints
/// included (a single sample sits at `min`).
#[derive(Clone, Debug, PartialEq)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl AxisSpec {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        assert!(count >= 1, "axis needs at least one sample");
        assert!(min.is_finite() && max.is_finite() && min <= max, "bad axis range");
        AxisSpec { min, max, count }
    }

    fn point(&self, k: usize) -> f64 {
        if self.count == 1 {
            self.min
        } else {
            self.min + (self.max - self.min) * (k as f64) / ((self.count - 1) as f64)
        }
    }
}

/// Full lattice specification.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub axes: Vec<AxisSpec>,
}

impl GridSpec {
    pub fn new(axes: Vec<AxisSpec>) -> Self {
        GridSpec { axes }
    }

    /// Uniform cube [lo, hi]ⁿ with `count` samples per axis.
    pub fn cube(dim: usize, lo: f64, hi: f64, count: usize) -> Self {
        GridSpec {
            axes: (0..dim).map(|_| AxisSpec::new(lo, hi, count)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn total_points(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    /// All lattice points in deterministic order (last axis fastest).
    pub fn points(&self) -> Vec<Vec<f64>> {
        let n = self.axes.len();
        let total = self.total_points();
        let mut out = Vec::with_capacity(total);
        for flat in 0..total {
            let mut idx = flat;
            let mut p = vec![0.0; n];
            for ax in (0..n).rev() {
                let c = self.axes[ax].count;
                p[ax] = self.axes[ax].point(idx % c);
                idx /= c;
            }
            out.push(p);
        }
        out
    }

    /// Lattice points passing the guard, in lattice order.
    pub fn guarded_points(&self, guard: &Guard) -> Result<Vec<Vec<f64>>> {
        let pts: Vec<Vec<f64>> = self.points().into_iter().filter(|p| guard(p)).collect();
        if pts.is_empty() {
            return Err(HjtError::EmptyGrid);
        }
        Ok(pts)
    }
}

/// Apply `f` to every point, optionally across threads. Results keep input
/// order regardless of thread count, so downstream reports are identical
/// for any `threads` value.
pub fn map_points<T, F>(points: &[Vec<f64>], threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&[f64]) -> T + Sync,
{
    let threads = threads.max(1);
    if threads == 1 || points.len() < 2 {
        return points.iter().map(|p| f(p)).collect();
    }
    let mut out: Vec<Option<T>> = (0..points.len()).map(|_| None).collect();
    let chunk = points.len().div_ceil(threads);
    std::thread::scope(|scope| {
        for (slot_chunk, point_chunk) in out.chunks_mut(chunk).zip(points.chunks(chunk)) {
            let f = &f;
            scope.spawn(move || {
                for (slot, p) in slot_chunk.iter_mut().zip(point_chunk) {
                    *slot = Some(f(p));
                }
            });
        }
    });
    out.into_iter().map(|v| v.expect("worker filled slot")).collect()
}
