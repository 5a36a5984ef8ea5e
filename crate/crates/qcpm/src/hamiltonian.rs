//! Potential field built from the complementarity residual, the harmonic
//! (Gaussian) ground-state model at a mu-center, and the Gaussian tail
//! machinery used to certify neighborhood concentration.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::lo::SelfDualEmbedding;
use crate::path::{self, CentralPathPoint};
use crate::schedule::AdiabaticSchedule;

/// Zeroth-order oracle for `f_mu(z) = 1/2 |F(z) - mu e|^2` with a query
/// census. The counter is atomic; everything else is immutable.
#[derive(Debug)]
pub struct PotentialField {
    embedding: SelfDualEmbedding,
    evals: AtomicU64,
}

impl PotentialField {
    pub fn new(embedding: SelfDualEmbedding) -> Self {
        PotentialField { embedding, evals: AtomicU64::new(0) }
    }

    pub fn embedding(&self) -> &SelfDualEmbedding {
        &self.embedding
    }

    /// Number of potential-value queries so far. Gradient calls are not
    /// counted, mirroring zeroth-order oracle accounting.
    pub fn evals(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    /// Credit `n` batched potential evaluations (used by the grid
    /// propagator, which computes values in bulk).
    pub fn credit_evals(&self, n: u64) {
        self.evals.fetch_add(n, Ordering::Relaxed);
    }

    /// `f_mu(z) = 1/2 |z .* (Mz + q) - mu e|^2`.
    pub fn potential(&self, z: &DVector<f64>, mu: f64) -> Result<f64> {
        self.evals.fetch_add(1, Ordering::Relaxed);
        let f = path::complementarity(&self.embedding, z)?;
        Ok(0.5 * f.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>())
    }

    /// Gradient `J(z)' (F(z) - mu e)`.
    pub fn gradient(&self, z: &DVector<f64>, mu: f64) -> Result<DVector<f64>> {
        let j = path::jacobian(&self.embedding, z)?;
        let mut res = path::complementarity(&self.embedding, z)?;
        res.iter_mut().for_each(|v| *v -= mu);
        Ok(j.transpose() * res)
    }
}

/// Second-order (Gaussian) model of the ground state at a mu-center:
/// eigendecomposition of the Hessian, covariance `(h/2) H^{-1/2}`, and the
/// harmonic spectral gap `h sqrt(lambda_0)`.
#[derive(Debug, Clone)]
pub struct HarmonicModel {
    pub center: CentralPathPoint,
    pub h: f64,
    pub hessian: DMatrix<f64>,
    /// Ascending eigenvalues of the Hessian.
    pub eigenvalues: DVector<f64>,
    /// Columns are the eigenvectors matching `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    pub covariance: DMatrix<f64>,
    pub gap: f64,
}

/// Walk the center from `(e, 1)` down to `mu` by continuation, then polish.
pub fn find_center(emb: &SelfDualEmbedding, mu: f64, tol: f64) -> Result<CentralPathPoint> {
    if !(0.0 < mu && mu <= 1.0) {
        return Err(Error::InvalidParameter("mu must be in (0, 1]".into()));
    }
    let mut z = DVector::from_element(emb.nbar(), 1.0);
    let mut m = 1.0;
    while m > mu {
        m = (0.5 * m).max(mu);
        let (p, _) = path::newton_center(emb, &z, m, 1e-8)?;
        z = p.z;
    }
    let (p, _) = path::newton_center(emb, &z, mu, tol)?;
    Ok(p)
}

/// Build the harmonic model at `mu` with width parameter `h`.
pub fn build_harmonic(emb: &SelfDualEmbedding, mu: f64, h: f64) -> Result<HarmonicModel> {
    if h <= 0.0 {
        return Err(Error::InvalidParameter("h must be positive".into()));
    }
    let center = find_center(emb, mu, 1e-12)?;
    harmonic_at(emb, center, h)
}

/// Harmonic model at an already-computed center.
pub fn harmonic_at(
    emb: &SelfDualEmbedding,
    center: CentralPathPoint,
    h: f64,
) -> Result<HarmonicModel> {
    let hessian = path::hessian_at(emb, &center.z)?;
    let eig = hessian.clone().symmetric_eigen();
    let nbar = emb.nbar();
    let mut order: Vec<usize> = (0..nbar).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap()
    });
    let eigenvalues = DVector::from_iterator(nbar, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = DMatrix::zeros(nbar, nbar);
    for (col, &i) in order.iter().enumerate() {
        eigenvectors.set_column(col, &eig.eigenvectors.column(i));
    }
    if eigenvalues[0] <= 0.0 {
        return Err(Error::InvalidParameter(
            "Hessian is not positive definite at the center".into(),
        ));
    }
    // covariance (h/2) H^{-1/2} through the eigenbasis
    let inv_sqrt = DMatrix::from_diagonal(&eigenvalues.map(|l| 0.5 * h / l.sqrt()));
    let covariance = &eigenvectors * inv_sqrt * eigenvectors.transpose();
    let gap = h * eigenvalues[0].sqrt();
    Ok(HarmonicModel {
        center,
        h,
        hessian,
        eigenvalues,
        eigenvectors,
        covariance,
        gap,
    })
}

impl HarmonicModel {
    /// Standard deviation along each eigen-direction,
    /// `sigma_i = sqrt((h/2) lambda_i^{-1/2})`.
    pub fn sigmas(&self) -> DVector<f64> {
        self.eigenvalues.map(|l| (0.5 * self.h / l.sqrt()).sqrt())
    }

    pub fn max_sigma(&self) -> f64 {
        self.sigmas().max()
    }

    pub fn min_sigma(&self) -> f64 {
        self.sigmas().min()
    }

    /// Unnormalized ground-state amplitude at `z`:
    /// `exp(-(z - c)' H^{1/2} (z - c) / (2h))`.
    pub fn amplitude(&self, dz: &DVector<f64>) -> f64 {
        let y = self.eigenvectors.transpose() * dz;
        let quad: f64 = y
            .iter()
            .zip(self.eigenvalues.iter())
            .map(|(v, l)| v * v * l.sqrt())
            .sum();
        (-quad / (2.0 * self.h)).exp()
    }

    /// Draw from `N(center, covariance)` via the eigenbasis transform of an
    /// isotropic standard normal.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        let sig = self.sigmas();
        let n = sig.len();
        let xi = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let scaled = DVector::from_iterator(n, xi.iter().zip(sig.iter()).map(|(x, s)| x * s));
        &self.center.z + &self.eigenvectors * scaled
    }

    /// Deterministic single draw for a seed.
    pub fn sample_seeded(&self, seed: u64) -> DVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample(&mut rng)
    }
}

/// Hsu-style sub-gamma tail threshold for `|Vx|^2` with isotropic
/// standard-normal `x`: `Pr[|Vx|^2 > threshold] <= exp(-t)`.
#[derive(Debug, Clone, Copy)]
pub struct HsuTail {
    pub threshold: f64,
    pub bound: f64,
}

pub fn hsu_tail(v_mat: &DMatrix<f64>, t: f64) -> Result<HsuTail> {
    if t <= 0.0 {
        return Err(Error::InvalidParameter("t must be positive".into()));
    }
    let sigma = v_mat.transpose() * v_mat;
    let trace = sigma.trace();
    let trace_sq = (&sigma * &sigma).trace();
    let op_norm = sigma
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0_f64, |a, l| a.max(l.abs()));
    Ok(HsuTail {
        threshold: trace + 2.0 * (trace_sq * t).sqrt() + 2.0 * op_norm * t,
        bound: (-t).exp(),
    })
}

/// Monte Carlo neighborhood-tail estimate for the Gaussian ground-state
/// model: the fraction of draws with `f_mu(x) > gamma^2 mu^2 / 2`.
#[derive(Debug, Clone, Copy)]
pub struct TailCheck {
    pub empirical: f64,
    pub target: f64,
    pub holds: bool,
}

/// Draw `samples` points from the harmonic Gaussian whose `h` comes from
/// the schedule's configured mode, evaluate the exact potential, and
/// compare the exceedance rate against `delta` plus three binomial sigma.
pub fn neighborhood_tail_check(
    field: &PotentialField,
    schedule: &AdiabaticSchedule,
    mu: f64,
    samples: usize,
    seed: u64,
) -> Result<TailCheck> {
    let h = schedule.h_at_mu(mu);
    let model = build_harmonic(field.embedding(), mu, h)?;
    tail_check_for_model(field, &model, schedule.gamma, schedule.delta, samples, seed)
}

/// Tail check against an explicit model (used for the scaled-h variants).
pub fn tail_check_for_model(
    field: &PotentialField,
    model: &HarmonicModel,
    gamma: f64,
    delta: f64,
    samples: usize,
    seed: u64,
) -> Result<TailCheck> {
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be positive".into()));
    }
    let mu = model.center.mu;
    let threshold = 0.5 * gamma * gamma * mu * mu;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut exceed = 0usize;
    for _ in 0..samples {
        let x = model.sample(&mut rng);
        if field.potential(&x, mu)? > threshold {
            exceed += 1;
        }
    }
    let empirical = exceed as f64 / samples as f64;
    let sigma = (delta * (1.0 - delta) / samples as f64).sqrt();
    let target = delta + 3.0 * sigma;
    Ok(TailCheck { empirical, target, holds: empirical <= target })
}
