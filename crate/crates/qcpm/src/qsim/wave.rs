//! Complex amplitude tensor over the periodic grid, with the discrete L2
//! measure `spacing^dims`, per-axis FFT transforms, and measurement.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hamiltonian::{HarmonicModel, PotentialField};

use super::grid::Grid;

/// L2-normalized wave function stored row-major with axis order equal to
/// the embedded coordinate order.
#[derive(Debug, Clone)]
pub struct WaveFunction {
    grid: Grid,
    amp: Vec<Complex64>,
}

/// Per-axis FFT plans plus a lane scratch buffer.
pub(super) struct AxisFfts {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    lane: Vec<Complex64>,
    n: usize,
}

impl AxisFfts {
    pub(super) fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        AxisFfts {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            lane: vec![Complex64::default(); n],
            n,
        }
    }

    /// Transform every lane along `axis` of a `dims`-dimensional row-major
    /// tensor with `n` points per axis. `inverse` applies the 1/n factor.
    pub(super) fn transform_axis(
        &mut self,
        amp: &mut [Complex64],
        dims: usize,
        axis: usize,
        inverse: bool,
    ) {
        let n = self.n;
        let stride = n.pow((dims - 1 - axis) as u32);
        let block = stride * n;
        let blocks = amp.len() / block;
        let scale = 1.0 / n as f64;
        for b in 0..blocks {
            let base = b * block;
            for inner in 0..stride {
                let start = base + inner;
                for k in 0..n {
                    self.lane[k] = amp[start + k * stride];
                }
                if inverse {
                    self.inverse.process(&mut self.lane);
                    for k in 0..n {
                        amp[start + k * stride] = self.lane[k] * scale;
                    }
                } else {
                    self.forward.process(&mut self.lane);
                    for k in 0..n {
                        amp[start + k * stride] = self.lane[k];
                    }
                }
            }
        }
    }

    pub(super) fn forward_all(&mut self, amp: &mut [Complex64], dims: usize) {
        for a in 0..dims {
            self.transform_axis(amp, dims, a, false);
        }
    }

    pub(super) fn inverse_all(&mut self, amp: &mut [Complex64], dims: usize) {
        for a in 0..dims {
            self.transform_axis(amp, dims, a, true);
        }
    }
}

impl WaveFunction {
    pub fn from_amplitudes(grid: Grid, amp: Vec<Complex64>) -> Result<Self> {
        if amp.len() != grid.total_points() {
            return Err(Error::ShapeMismatch(format!(
                "{} amplitudes for a grid of {} points",
                amp.len(),
                grid.total_points()
            )));
        }
        Ok(WaveFunction { grid, amp })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amp
    }

    pub(super) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amp
    }

    /// L2 norm under the discrete measure.
    pub fn norm(&self) -> f64 {
        let s: f64 = self.amp.iter().map(|a| a.norm_sqr()).sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            let inv = 1.0 / n;
            self.amp.iter_mut().for_each(|a| *a *= inv);
        }
    }

    /// `|<self|other>|` under the discrete inner product.
    pub fn fidelity(&self, other: &WaveFunction) -> Result<f64> {
        if self.amp.len() != other.amp.len() {
            return Err(Error::ShapeMismatch("wave functions differ in size".into()));
        }
        let mut acc = Complex64::default();
        for (a, b) in self.amp.iter().zip(other.amp.iter()) {
            acc += a.conj() * b;
        }
        Ok((acc * self.grid.cell_volume()).norm())
    }

    /// Expectation of a diagonal (position-space) observable.
    pub fn diagonal_expectation(&self, values: impl Fn(usize) -> f64) -> f64 {
        let vol = self.grid.cell_volume();
        self.amp
            .iter()
            .enumerate()
            .map(|(i, a)| values(i) * a.norm_sqr() * vol)
            .sum()
    }

    /// Spectral phase multiplication `exp(-i coeff |k|^2 dt / 2)`; exactly
    /// norm-preserving.
    pub fn kinetic_half_step(&mut self, coeff: f64, dt: f64) {
        let dims = self.grid.dims();
        let n = self.grid.points_per_axis();
        let mut ffts = AxisFfts::new(n);
        ffts.forward_all(&mut self.amp, dims);
        let k2: Vec<f64> = (0..n).map(|i| self.grid.wavenumber(i).powi(2)).collect();
        let mut idx = vec![0usize; dims];
        for flat in 0..self.amp.len() {
            self.grid.unflatten(flat, &mut idx);
            let ksq: f64 = idx.iter().map(|&i| k2[i]).sum();
            let phase = -coeff * ksq * dt / 2.0;
            self.amp[flat] *= Complex64::from_polar(1.0, phase);
        }
        ffts.inverse_all(&mut self.amp, dims);
    }

    /// Pointwise phase multiplication `exp(-i scale f_mu(z) dt)` with the
    /// potential evaluated at the grid nodes (credited to the field's
    /// query census); norm-preserving.
    pub fn potential_step(
        &mut self,
        field: &PotentialField,
        mu: f64,
        scale: f64,
        dt: f64,
    ) -> Result<()> {
        let total = self.amp.len();
        for flat in 0..total {
            let z = self.grid.coords(flat);
            let f = field.potential(&z, mu)?;
            self.amp[flat] *= Complex64::from_polar(1.0, -scale * f * dt);
        }
        Ok(())
    }

    /// Draw one grid node with probability `|amplitude|^2 spacing^dims`
    /// via the inverse CDF over the flattened tensor; the returned point is
    /// the node's cell-center coordinates.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        let total: f64 = self.amp.iter().map(|a| a.norm_sqr()).sum();
        let u: f64 = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = self.amp.len() - 1;
        for (i, a) in self.amp.iter().enumerate() {
            acc += a.norm_sqr();
            if acc > u {
                chosen = i;
                break;
            }
        }
        self.grid.coords(chosen)
    }

    pub fn sample_seeded(&self, seed: u64) -> DVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample(&mut rng)
    }
}

/// Discretize the harmonic ground-state Gaussian centered at `center`
/// (amplitude `exp(-(z-c)' H^{1/2} (z-c) / (2h))`), normalized on the grid.
/// Errors when more than 1e-8 of the continuous Gaussian mass falls
/// outside the box.
pub fn gaussian_on_grid(
    grid: &Grid,
    model: &HarmonicModel,
    center: &DVector<f64>,
) -> Result<WaveFunction> {
    let dims = grid.dims();
    if center.len() != dims {
        return Err(Error::ShapeMismatch("center dimension mismatch".into()));
    }
    // truncation check first: Chernoff bound on the per-axis marginal tails
    // (resolution-independent, unlike a Riemann sum of the density)
    let mut outside = 0.0;
    for a in 0..dims {
        let var = model.covariance[(a, a)];
        let tail = |d: f64| {
            if d <= 0.0 {
                0.5
            } else {
                0.5 * (-d * d / (2.0 * var)).exp()
            }
        };
        outside += tail(center[a]) + tail(grid.extent() - center[a]);
    }
    if outside > 1e-8 {
        return Err(Error::GridTooSmall(format!(
            "Gaussian mass outside grid is at most {outside:.3e} (> 1e-8)"
        )));
    }
    let total = grid.total_points();
    let mut amp = vec![Complex64::default(); total];
    let mut idx = vec![0usize; dims];
    let mut dz = DVector::zeros(dims);
    for (flat, slot) in amp.iter_mut().enumerate() {
        grid.unflatten(flat, &mut idx);
        for a in 0..dims {
            dz[a] = grid.axis_coord(idx[a]) - center[a];
        }
        *slot = Complex64::new(model.amplitude(&dz), 0.0);
    }
    let mut psi = WaveFunction::from_amplitudes(grid.clone(), amp)?;
    psi.normalize();
    Ok(psi)
}

/// Ground state of the initial Hamiltonian discretized on the grid.
pub fn initial_state(grid: &Grid, model: &HarmonicModel) -> Result<WaveFunction> {
    gaussian_on_grid(grid, model, &model.center.z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::build_harmonic;
    use crate::lo::{LoProblem, Normalization, SelfDualEmbedding};
    use crate::qsim::grid::DEFAULT_MEMORY_BUDGET;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn embedding_1d() -> SelfDualEmbedding {
        SelfDualEmbedding::from_parts(
            DMatrix::from_row_slice(1, 1, &[0.0]),
            DVector::from_vec(vec![1.0]),
        )
        .unwrap()
    }

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

    fn uniform_state(grid: &Grid) -> WaveFunction {
        let total = grid.total_points();
        let v = 1.0 / (total as f64 * grid.cell_volume()).sqrt();
        WaveFunction::from_amplitudes(grid.clone(), vec![Complex64::new(v, 0.0); total]).unwrap()
    }

    #[test]
    fn norm_and_fidelity_basics() {
        let grid = Grid::new(2, 16, 2.0, DEFAULT_MEMORY_BUDGET).unwrap();
        let psi = uniform_state(&grid);
        assert_abs_diff_eq!(psi.norm(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(psi.fidelity(&psi).unwrap(), 1.0, epsilon = 1e-12);

        // global phase invariance
        let mut rotated = psi.clone();
        let phase = Complex64::from_polar(1.0, 1.234);
        rotated.amplitudes_mut().iter_mut().for_each(|a| *a *= phase);
        assert_abs_diff_eq!(psi.fidelity(&rotated).unwrap(), 1.0, epsilon = 1e-12);

        // orthogonal basis states
        let mut e0 = vec![Complex64::default(); grid.total_points()];
        let mut e1 = e0.clone();
        e0[0] = Complex64::new(1.0, 0.0);
        e1[1] = Complex64::new(1.0, 0.0);
        let w0 = WaveFunction::from_amplitudes(grid.clone(), e0).unwrap();
        let w1 = WaveFunction::from_amplitudes(grid.clone(), e1).unwrap();
        assert_eq!(w0.fidelity(&w1).unwrap(), 0.0);
    }

    #[test]
    fn kinetic_step_on_plane_wave() {
        let grid = Grid::new(1, 32, 2.0, DEFAULT_MEMORY_BUDGET).unwrap();
        let k = grid.wavenumber(3);
        let amp: Vec<Complex64> = (0..32)
            .map(|i| Complex64::from_polar(1.0, k * grid.axis_coord(i)))
            .collect();
        let mut psi = WaveFunction::from_amplitudes(grid.clone(), amp.clone()).unwrap();
        psi.normalize();
        let mut reference = psi.clone();
        let (coeff, dt) = (0.7, 0.1);
        psi.kinetic_half_step(coeff, dt);
        // plane wave is a Laplacian eigenfunction: pure phase
        let phase = Complex64::from_polar(1.0, -coeff * k * k * dt / 2.0);
        reference.amplitudes_mut().iter_mut().for_each(|a| *a *= phase);
        let err: f64 = psi
            .amplitudes()
            .iter()
            .zip(reference.amplitudes())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);
        assert_abs_diff_eq!(psi.norm(), 1.0, epsilon = 1e-12);

        // coeff = 0 is the identity
        let mut id = reference.clone();
        id.kinetic_half_step(0.0, dt);
        let err: f64 = id
            .amplitudes()
            .iter()
            .zip(reference.amplitudes())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-13);
    }

    #[test]
    fn potential_step_phases() {
        let emb = unit_embedding();
        let field = PotentialField::new(emb);
        let grid = Grid::new(4, 8, 1.2, DEFAULT_MEMORY_BUDGET).unwrap();
        let mut psi = uniform_state(&grid);
        let before = psi.clone();

        // scale = 0 is the identity
        psi.potential_step(&field, 0.5, 0.0, 0.1).unwrap();
        assert_eq!(psi.amplitudes(), before.amplitudes());

        // dt-halving: two half steps equal one full step (diagonal operators)
        let mut a = before.clone();
        a.potential_step(&field, 0.5, 1.3, 0.2).unwrap();
        let mut b = before.clone();
        b.potential_step(&field, 0.5, 1.3, 0.1).unwrap();
        b.potential_step(&field, 0.5, 1.3, 0.1).unwrap();
        let err: f64 = a
            .amplitudes()
            .iter()
            .zip(b.amplitudes())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);
        assert_abs_diff_eq!(a.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_discretization_and_argmax() {
        let emb = unit_embedding();
        let model = build_harmonic(&emb, 1.0, 2e-3).unwrap();
        let grid = Grid::new(4, 24, 1.2, DEFAULT_MEMORY_BUDGET).unwrap();
        let psi = initial_state(&grid, &model).unwrap();
        assert_abs_diff_eq!(psi.norm(), 1.0, epsilon = 1e-9);
        let argmax = psi
            .amplitudes()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm_sqr().partial_cmp(&b.1.norm_sqr()).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, grid.nearest_node(&model.center.z));

        // a much-too-small box fails the mass check
        let tiny = Grid::new(4, 8, 0.4, DEFAULT_MEMORY_BUDGET).unwrap();
        assert!(matches!(
            initial_state(&tiny, &model),
            Err(Error::GridTooSmall(_))
        ));
    }

    #[test]
    fn sampling_distributions() {
        let grid = Grid::new(1, 16, 1.6, DEFAULT_MEMORY_BUDGET).unwrap();
        // delta-concentrated state always returns its node
        let mut amp = vec![Complex64::default(); 16];
        amp[5] = Complex64::new(1.0, 0.0);
        let psi = WaveFunction::from_amplitudes(grid.clone(), amp).unwrap();
        for seed in 0..20 {
            let z = psi.sample_seeded(seed);
            assert_eq!(z[0], grid.axis_coord(5));
        }

        // uniform state: chi-square against the uniform law at 1e5 draws
        let psi = uniform_state(&grid);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = 100_000usize;
        let mut counts = [0usize; 16];
        for _ in 0..draws {
            let z = psi.sample(&mut rng);
            let idx = (z[0] / grid.spacing()).round() as usize;
            counts[idx] += 1;
        }
        let expect = draws as f64 / 16.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expect).powi(2) / expect)
            .sum();
        // 15 degrees of freedom: 99.9th percentile is 37.7
        assert!(chi2 < 37.7, "chi2 = {chi2}");

        // deterministic per seed
        assert_eq!(psi.sample_seeded(9), psi.sample_seeded(9));
    }

    #[test]
    fn harmonic_sampling_mean() {
        let emb = embedding_1d();
        let model = build_harmonic(&emb, 0.5, 1e-2).unwrap();
        let grid = Grid::new(1, 128, 1.0, DEFAULT_MEMORY_BUDGET).unwrap();
        let psi = gaussian_on_grid(&grid, &model, &model.center.z).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let draws = 40_000;
        let mean: f64 = (0..draws).map(|_| psi.sample(&mut rng)[0]).sum::<f64>() / draws as f64;
        let sigma = model.max_sigma();
        assert!((mean - 0.5).abs() <= 3.0 * sigma / (draws as f64).sqrt() + grid.spacing() * 0.01);
    }

    #[test]
    fn observable_stability_under_perturbation() {
        // |<p1|P|p1> - <p2|P|p2>| <= 2 |p1 - p2| for a projector P
        let emb = unit_embedding();
        let field = PotentialField::new(emb.clone());
        let model = build_harmonic(&emb, 0.5, 5e-3).unwrap();
        let grid = Grid::new(4, 12, 1.8, DEFAULT_MEMORY_BUDGET).unwrap();
        let psi1 = gaussian_on_grid(&grid, &model, &model.center.z).unwrap();

        // indicator of the neighborhood set in potential terms
        let mu = 0.5;
        let thresh = 0.5 * 0.25 * 0.25 * mu * mu;
        let indicator: Vec<f64> = (0..grid.total_points())
            .map(|i| {
                let f = field.potential(&grid.coords(i), mu).unwrap();
                if f <= thresh {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let mut psi2 = psi1.clone();
            for a in psi2.amplitudes_mut() {
                use rand_distr::StandardNormal;
                let dr: f64 = rng.sample(StandardNormal);
                let di: f64 = rng.sample(StandardNormal);
                *a += Complex64::new(dr, di) * 2e-3;
            }
            psi2.normalize();
            let dist2: f64 = psi1
                .amplitudes()
                .iter()
                .zip(psi2.amplitudes())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                * grid.cell_volume();
            let delta = dist2.sqrt();
            let p1 = psi1.diagonal_expectation(|i| indicator[i]);
            let p2 = psi2.diagonal_expectation(|i| indicator[i]);
            assert!((p1 - p2).abs() <= 2.0 * delta + 1e-12);
        }
    }
}
