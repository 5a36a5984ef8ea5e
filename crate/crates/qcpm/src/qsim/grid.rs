//! Uniform periodic grid on the box `[0, D]^dims`.
//!
//! Nodes sit at coordinates `k * spacing` for `k = 0..N-1` and are the
//! centers of the sampling cells `[k*spacing - spacing/2, k*spacing +
//! spacing/2)`; a sampled node is reported as the continuous point at its
//! cell center, i.e. the node coordinate itself.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::hamiltonian::harmonic_at;
use crate::lo::SelfDualEmbedding;
use crate::path::PathTrace;
use crate::schedule::AdiabaticSchedule;

pub const DEFAULT_MEMORY_BUDGET: u128 = 1 << 31;
pub const DEFAULT_MARGIN_SIGMAS: f64 = 4.0;

#[derive(Debug, Clone)]
pub struct Grid {
    dims: usize,
    n: usize,
    extent: f64,
}

impl Grid {
    pub fn new(dims: usize, n: usize, extent: f64, budget: u128) -> Result<Self> {
        if dims == 0 {
            return Err(Error::InvalidParameter("grid needs at least one axis".into()));
        }
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "points per axis must be even and >= 8, got {n}"
            )));
        }
        if extent <= 0.0 || extent.is_nan() {
            return Err(Error::InvalidParameter("extent must be positive".into()));
        }
        let total = (n as u128).pow(dims as u32);
        if total > budget {
            return Err(Error::MemoryBudget { needed: total, budget });
        }
        Ok(Grid { dims, n, extent })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn spacing(&self) -> f64 {
        self.extent / self.n as f64
    }

    pub fn total_points(&self) -> usize {
        self.n.pow(self.dims as u32)
    }

    /// Volume element of one cell, `spacing^dims`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dims as i32)
    }

    /// Coordinate of the node with the given per-axis index.
    pub fn axis_coord(&self, idx: usize) -> f64 {
        idx as f64 * self.spacing()
    }

    /// Signed integer frequency for a per-axis index in FFT layout.
    fn signed_freq(&self, idx: usize) -> i64 {
        if idx < self.n / 2 {
            idx as i64
        } else {
            idx as i64 - self.n as i64
        }
    }

    /// Angular wavenumber `2 pi j / D` for a per-axis index.
    pub fn wavenumber(&self, idx: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.signed_freq(idx) as f64 / self.extent
    }

    /// Decompose a flat row-major index into per-axis indices.
    pub fn unflatten(&self, flat: usize, out: &mut [usize]) {
        debug_assert_eq!(out.len(), self.dims);
        let mut rem = flat;
        for a in (0..self.dims).rev() {
            out[a] = rem % self.n;
            rem /= self.n;
        }
    }

    /// Coordinates of the node at a flat index.
    pub fn coords(&self, flat: usize) -> DVector<f64> {
        let mut idx = vec![0usize; self.dims];
        self.unflatten(flat, &mut idx);
        DVector::from_iterator(self.dims, idx.iter().map(|&i| self.axis_coord(i)))
    }

    /// Flat index of the node nearest to `point` (componentwise rounding).
    pub fn nearest_node(&self, point: &DVector<f64>) -> usize {
        let mut flat = 0usize;
        for a in 0..self.dims {
            let i = (point[a] / self.spacing()).round() as isize;
            let i = i.clamp(0, self.n as isize - 1) as usize;
            flat = flat * self.n + i;
        }
        flat
    }
}

/// Size the grid from a traced path: the extent is the largest traced
/// coordinate plus `margin_sigmas` harmonic standard deviations, rounded up
/// to one decimal.
pub fn build_grid(
    emb: &SelfDualEmbedding,
    trace: &PathTrace,
    schedule: &AdiabaticSchedule,
    n: usize,
    margin_sigmas: f64,
    budget: u128,
) -> Result<Grid> {
    if trace.points.is_empty() {
        return Err(Error::InvalidParameter("trace is empty".into()));
    }
    if margin_sigmas < 0.0 {
        return Err(Error::InvalidParameter("margin must be nonnegative".into()));
    }
    // the margin uses the largest harmonic width anywhere on the trace: in
    // the path-anchored frame the widest (initial) state sits over the
    // final center, so every traced coordinate needs that much clearance
    let mut sigma_max: f64 = 0.0;
    let mut coord_max: f64 = 0.0;
    let mut coord_min = f64::INFINITY;
    for p in &trace.points {
        let h = schedule.h_at_mu(p.mu);
        let model = harmonic_at(emb, p.clone(), h)?;
        sigma_max = sigma_max.max(model.max_sigma());
        coord_max = coord_max.max(p.z.max());
        coord_min = coord_min.min(p.z.min());
    }
    let upper = coord_max + margin_sigmas * sigma_max;
    let lower = coord_min - margin_sigmas * sigma_max;
    if lower < 0.0 {
        return Err(Error::GridTooSmall(format!(
            "path needs coordinates down to {lower:.4}, below the box at 0"
        )));
    }
    // round up to one decimal, guarding against Newton-level noise in the
    // traced coordinates pushing past a decade boundary
    let extent = (upper * 10.0 - 1e-9).ceil() / 10.0;
    Grid::new(emb.nbar(), n, extent, budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lo::{LoProblem, Normalization};
    use crate::path::{default_shrink, trace_path};
    use crate::schedule::HMode;
    use nalgebra::DMatrix;

    fn unit_embedding() -> SelfDualEmbedding {
        let p = LoProblem::new(
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DVector::from_vec(vec![1.0]),
            DVector::from_vec(vec![1.0]),
            Normalization::Strict,
        )
        .unwrap();
        SelfDualEmbedding::embed(&p)
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(2, 6, 1.0, DEFAULT_MEMORY_BUDGET).is_err());
        assert!(Grid::new(2, 9, 1.0, DEFAULT_MEMORY_BUDGET).is_err());
        let g = Grid::new(2, 16, 2.0, DEFAULT_MEMORY_BUDGET).unwrap();
        assert_eq!(g.total_points(), 256);
        assert_eq!(g.spacing(), 0.125);
        assert!(matches!(
            Grid::new(4, 256, 1.0, 1 << 20),
            Err(Error::MemoryBudget { .. })
        ));
    }

    #[test]
    fn frequency_layout() {
        let g = Grid::new(1, 8, 2.0, DEFAULT_MEMORY_BUDGET).unwrap();
        let freqs: Vec<i64> = (0..8).map(|i| g.signed_freq(i)).collect();
        assert_eq!(freqs, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        assert_eq!(g.wavenumber(1), std::f64::consts::PI);
    }

    #[test]
    fn flatten_round_trip_and_coords() {
        let g = Grid::new(3, 8, 1.6, DEFAULT_MEMORY_BUDGET).unwrap();
        let mut idx = vec![0usize; 3];
        for flat in [0usize, 7, 63, 511, 300] {
            g.unflatten(flat, &mut idx);
            let back = idx.iter().fold(0usize, |acc, &i| acc * 8 + i);
            assert_eq!(back, flat);
        }
        let c = g.coords(8 * 8 * 2 + 8 * 3 + 1);
        assert_eq!(c[0], 2.0 * 0.2);
        assert_eq!(c[1], 3.0 * 0.2);
        assert_eq!(c[2], 0.2);
        let nearest = g.nearest_node(&DVector::from_vec(vec![0.41, 0.61, 0.19]));
        g.unflatten(nearest, &mut idx);
        assert_eq!(idx, vec![2, 3, 1]);
    }

    #[test]
    fn build_grid_on_fixture_gives_expected_extent() {
        let emb = unit_embedding();
        let sched =
            AdiabaticSchedule::new(0.25, 0.25, 0.2, 4.0, 4, 1.0, HMode::Algorithm1).unwrap();
        let trace = trace_path(&emb, 0.25, 0.25, default_shrink(4)).unwrap();
        let grid = build_grid(
            &emb,
            &trace,
            &sched,
            24,
            DEFAULT_MARGIN_SIGMAS,
            DEFAULT_MEMORY_BUDGET,
        )
        .unwrap();
        // largest coordinate 1, sigma(mu=1) ~ 0.0268: 1.107 rounds up to 1.2
        assert_eq!(grid.extent(), 1.2);
        assert!((grid.spacing() - 0.05).abs() < 1e-15);

        // margin 0 degenerates to the raw coordinate extent
        let g0 = build_grid(&emb, &trace, &sched, 24, 0.0, DEFAULT_MEMORY_BUDGET).unwrap();
        assert_eq!(g0.extent(), 1.0);

        // odd N rejected
        assert!(build_grid(&emb, &trace, &sched, 23, 4.0, DEFAULT_MEMORY_BUDGET).is_err());
    }
}
