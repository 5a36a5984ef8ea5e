//! Split-step (Strang) propagator for the annealing evolution
//!
//!   i d/dt psi = [ -(h(t) / (2 eta mu(t))) Lap + f_mu(t) / (eta h(t) mu(t)) ] psi
//!
//! integrated in a frame that rides along the traced central path: with
//! `zeta(t) = z(mu(t)) - z(mu_f)` and `Phi(w, t) = Psi(w + zeta(t), t)`, the
//! equation gains an exact boost term `i zeta' . grad` (diagonal in the
//! spectral basis) and the potential valley stays pinned at `z(mu_f)` on the
//! grid. The change of variables is unitary, so adiabatic error is
//! unaffected, while no probability mass has to hop across cells; the frame
//! coincides with the lab grid at t = 1 where the state is measured.
//!
//! Coefficients are frozen at step midpoints, which keeps Strang's second
//! order; kinetic half-steps of adjacent steps are fused into one spectral
//! pass except where a checkpoint record is due.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hamiltonian::{harmonic_at, PotentialField};
use crate::lo::SelfDualEmbedding;
use crate::path::{self, CentralPathPoint, PathTrace};
use crate::schedule::AdiabaticSchedule;

use super::grid::Grid;
use super::wave::{gaussian_on_grid, AxisFfts, WaveFunction};

pub const DEFAULT_CHECKPOINTS: usize = 32;
const PHASE_BUDGET: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct PropagatorConfig {
    /// Number of Strang steps; `None` derives it from the phase budget.
    pub steps: Option<usize>,
    pub checkpoints: usize,
    /// Warn (but continue) when the checkpoint fidelity to the harmonic
    /// model drops below this.
    pub fidelity_floor: f64,
    /// Override the schedule's eta (used by slowness sweeps).
    pub eta_override: Option<f64>,
    /// Upper cap for the automatic step rule.
    pub max_steps: usize,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        PropagatorConfig {
            steps: None,
            checkpoints: DEFAULT_CHECKPOINTS,
            fidelity_floor: 0.0,
            eta_override: None,
            max_steps: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Checkpoint {
    pub t: f64,
    pub mu: f64,
    pub h: f64,
    pub norm: f64,
    pub fidelity_to_harmonic: f64,
    /// Expectation of the instantaneous raw Hamiltonian
    /// `-(h^2/2) Lap + f_mu`.
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct PropagatorRun {
    pub steps: usize,
    pub dt: f64,
    pub eta: f64,
    pub diagnostics: Vec<Checkpoint>,
    pub warnings: Vec<String>,
    /// Potential evaluations credited during the run.
    pub queries: u64,
}

/// Interpolating view of the traced path with Newton polish.
struct PathInterp<'a> {
    emb: &'a SelfDualEmbedding,
    mus: Vec<f64>,
    zs: Vec<DVector<f64>>,
}

impl<'a> PathInterp<'a> {
    fn new(emb: &'a SelfDualEmbedding, trace: &PathTrace) -> Self {
        let mut pairs: Vec<(f64, DVector<f64>)> = trace
            .points
            .iter()
            .map(|p| (p.mu, p.z.clone()))
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        PathInterp {
            emb,
            mus: pairs.iter().map(|p| p.0).collect(),
            zs: pairs.into_iter().map(|p| p.1).collect(),
        }
    }

    /// Center at `mu`, polished to d2 <= 1e-10 mu.
    fn center(&self, mu: f64, warm: Option<&DVector<f64>>) -> Result<DVector<f64>> {
        let start = match warm {
            Some(z) => z.clone(),
            None => {
                let i = match self
                    .mus
                    .binary_search_by(|m| m.partial_cmp(&mu).unwrap())
                {
                    Ok(i) => i,
                    Err(i) => i.min(self.mus.len() - 1),
                };
                self.zs[i].clone()
            }
        };
        let (p, _) = path::newton_center(self.emb, &start, mu, 1e-10)?;
        Ok(p.z)
    }

    fn tangent(&self, z: &DVector<f64>, mu: f64) -> Result<DVector<f64>> {
        let p = CentralPathPoint::new(self.emb, z.clone(), mu.min(1.0))?;
        path::path_tangent(self.emb, &p)
    }
}

/// Frozen per-midpoint coefficients.
struct StepData {
    mu: f64,
    ck: f64,
    cv: f64,
    zeta: DVector<f64>,
    zdot: DVector<f64>,
}

/// Node-indexed static data for the potential pass: coordinates and the
/// slack of the unshifted node, flattened `dims` values per node.
struct NodeData {
    w: Vec<f64>,
    s_w: Vec<f64>,
    dims: usize,
}

impl NodeData {
    fn build(grid: &Grid, emb: &SelfDualEmbedding) -> Self {
        let dims = grid.dims();
        let n = grid.points_per_axis();
        let total = grid.total_points();
        let mat = emb.matrix();
        let q = emb.q();
        let mut w = vec![0.0; total * dims];
        let mut s_w = vec![0.0; total * dims];
        let mut idx = vec![0usize; dims];
        for flat in 0..total {
            let off = flat * dims;
            for a in 0..dims {
                w[off + a] = grid.axis_coord(idx[a]);
            }
            for j in 0..dims {
                let mut acc = q[j];
                for k in 0..dims {
                    acc += mat[(j, k)] * w[off + k];
                }
                s_w[off + j] = acc;
            }
            // odometer increment
            for a in (0..dims).rev() {
                idx[a] += 1;
                if idx[a] < n {
                    break;
                }
                idx[a] = 0;
            }
        }
        NodeData { w, s_w, dims }
    }

    /// Potential `f_mu` at node `flat` under frame shift `zeta`
    /// (`m_zeta = M zeta` precomputed by the caller).
    #[inline]
    fn potential(&self, flat: usize, zeta: &DVector<f64>, m_zeta: &DVector<f64>, mu: f64) -> f64 {
        let off = flat * self.dims;
        let mut f = 0.0;
        for j in 0..self.dims {
            let s = self.s_w[off + j] + m_zeta[j];
            let z = self.w[off + j] + zeta[j];
            let d = z * s - mu;
            f += d * d;
        }
        0.5 * f
    }
}

/// Multiply a per-axis spectral table into the tensor, axis by axis.
fn apply_axis_table(
    amp: &mut [Complex64],
    dims: usize,
    n: usize,
    axis: usize,
    table: &[Complex64],
) {
    let stride = n.pow((dims - 1 - axis) as u32);
    let block = stride * n;
    let blocks = amp.len() / block;
    for b in 0..blocks {
        let base = b * block;
        for (j, factor) in table.iter().enumerate() {
            let start = base + j * stride;
            for slot in amp[start..start + stride].iter_mut() {
                *slot *= factor;
            }
        }
    }
}

/// Spectral phase tables `exp(-i (ck k^2 - b_a k) tau)` per axis.
fn kinetic_tables(grid: &Grid, ck: f64, boost: &DVector<f64>, tau: f64) -> Vec<Vec<Complex64>> {
    let n = grid.points_per_axis();
    (0..grid.dims())
        .map(|a| {
            (0..n)
                .map(|j| {
                    let k = grid.wavenumber(j);
                    Complex64::from_polar(1.0, -(ck * k * k - boost[a] * k) * tau)
                })
                .collect()
        })
        .collect()
}

fn apply_kinetic(amp: &mut [Complex64], grid: &Grid, tables: &[Vec<Complex64>]) {
    let dims = grid.dims();
    let n = grid.points_per_axis();
    for (a, table) in tables.iter().enumerate() {
        apply_axis_table(amp, dims, n, a, table);
    }
}

/// Suggested Strang step count from the phase budget: the largest local
/// phase rate over a pre-pass of the schedule, divided by 0.2 rad/step.
pub fn suggest_steps(
    emb: &SelfDualEmbedding,
    schedule: &AdiabaticSchedule,
    trace: &PathTrace,
    grid: &Grid,
    eta: f64,
) -> Result<usize> {
    let interp = PathInterp::new(emb, trace);
    let k_ny = std::f64::consts::PI / grid.spacing();
    let mut rate_max: f64 = 0.0;
    let samples = 128;
    let mut warm: Option<DVector<f64>> = None;
    for i in 0..=samples {
        let t = i as f64 / samples as f64;
        let mu = schedule.mu_of_t(t);
        let h = schedule.h_at_mu(mu);
        let z = interp.center(mu, warm.as_ref())?;
        let point = CentralPathPoint::new(emb, z.clone(), mu)?;
        let model = harmonic_at(emb, point, h)?;
        let lam_max = model.eigenvalues.max();
        let sigma_min = model.min_sigma();
        let ck = h / (2.0 * eta * mu);
        let k_eff = k_ny.min(4.0 / sigma_min);
        let kinetic = ck * k_eff * k_eff;
        // potential scale where the state lives: f(4 sigma) = 4 h sqrt(lam)
        let potential = 4.0 * lam_max.sqrt() / (eta * mu);
        let tangent = interp.tangent(&z, mu)?;
        let boost = tangent.amax() * schedule.mu_dot(t).abs() * k_ny;
        rate_max = rate_max.max(kinetic + potential + boost);
        warm = Some(z);
    }
    Ok(((rate_max / PHASE_BUDGET).ceil() as usize).max(256))
}

/// Run the annealing evolution over `t` in `[0, 1]`.
///
/// The trace must reach `schedule.mu_f`; the grid must have been sized for
/// it. Returns the final state (in lab coordinates, since the co-moving
/// frame is anchored at `t = 1`) and the run diagnostics.
pub fn evolve(
    field: &PotentialField,
    schedule: &AdiabaticSchedule,
    trace: &PathTrace,
    grid: &Grid,
    cfg: &PropagatorConfig,
) -> Result<(WaveFunction, PropagatorRun)> {
    let emb = field.embedding();
    let dims = emb.nbar();
    if grid.dims() != dims {
        return Err(Error::ShapeMismatch("grid dimension != embedding dimension".into()));
    }
    let eta = cfg.eta_override.unwrap_or(schedule.eta);
    if eta <= 0.0 {
        return Err(Error::InvalidParameter("eta must be positive".into()));
    }
    let steps = match cfg.steps {
        Some(s) if s > 0 => s,
        Some(_) => return Err(Error::InvalidParameter("steps must be positive".into())),
        None => suggest_steps(emb, schedule, trace, grid, eta)?.min(cfg.max_steps),
    };
    let dt = 1.0 / steps as f64;
    let interp = PathInterp::new(emb, trace);

    // anchor of the co-moving frame: the final center
    let z_f = interp.center(schedule.mu_f, None)?;

    // midpoint coefficient table
    let mut data = Vec::with_capacity(steps);
    let mut warm: Option<DVector<f64>> = None;
    for i in 0..steps {
        let tm = (i as f64 + 0.5) * dt;
        let mu = schedule.mu_of_t(tm);
        let h = schedule.h_at_mu(mu);
        let z = interp.center(mu, warm.as_ref())?;
        let tangent = interp.tangent(&z, mu)?;
        let zdot = tangent * schedule.mu_dot(tm);
        data.push(StepData {
            mu,
            ck: h / (2.0 * eta * mu),
            cv: 1.0 / (eta * h * mu),
            zeta: &z - &z_f,
            zdot,
        });
        warm = Some(z);
    }

    // initial state: ground-state Gaussian of the t = 0 model, which sits
    // at w = z_f in the co-moving frame
    let h0 = schedule.h_at_mu(1.0);
    let e = DVector::from_element(dims, 1.0);
    let start_point = CentralPathPoint::new(emb, e, 1.0)?;
    let model0 = harmonic_at(emb, start_point, h0)?;
    let mut psi = gaussian_on_grid(grid, &model0, &z_f)?;

    let nodes = NodeData::build(grid, emb);
    let mut ffts = AxisFfts::new(grid.points_per_axis());
    let total = grid.total_points();
    let every = (steps / cfg.checkpoints.max(1)).max(1);
    let mut diagnostics = Vec::new();
    let mut warnings = Vec::new();
    let mut queries: u64 = 0;

    // opening kinetic half step
    {
        let amp = psi.amplitudes_mut();
        ffts.forward_all(amp, dims);
        let tables = kinetic_tables(grid, data[0].ck, &data[0].zdot, dt / 2.0);
        apply_kinetic(amp, grid, &tables);
        ffts.inverse_all(amp, dims);
    }

    // TODO: honor QCPM_THREADS by chunking the pointwise passes below over
    // a rayon pool; they are embarrassingly parallel and dominate at
    // nbar = 4.
    for i in 0..steps {
        // potential step at the midpoint coefficients
        {
            let sd = &data[i];
            let m_zeta = emb.matrix() * &sd.zeta;
            let cv_dt = sd.cv * dt;
            let amp = psi.amplitudes_mut();
            for flat in 0..total {
                let f = nodes.potential(flat, &sd.zeta, &m_zeta, sd.mu);
                amp[flat] *= Complex64::from_polar(1.0, -cv_dt * f);
            }
            queries += total as u64;
        }
        let last = i + 1 == steps;
        let checkpoint_due = last || (i + 1) % every == 0;
        if checkpoint_due {
            // close this step's kinetic half, record, then open the next
            let kinetic_moment;
            {
                let amp = psi.amplitudes_mut();
                ffts.forward_all(amp, dims);
                let tables = kinetic_tables(grid, data[i].ck, &data[i].zdot, dt / 2.0);
                apply_kinetic(amp, grid, &tables);
                // <|k|^2> from the spectral coefficients (phases drop out)
                let mut num = 0.0;
                let mut den = 0.0;
                let n = grid.points_per_axis();
                let k2: Vec<f64> = (0..n).map(|j| grid.wavenumber(j).powi(2)).collect();
                let mut idx = vec![0usize; dims];
                for (flat, a) in amp.iter().enumerate() {
                    let p = a.norm_sqr();
                    let mut ksq = 0.0;
                    grid.unflatten(flat, &mut idx);
                    for &ia in &idx {
                        ksq += k2[ia];
                    }
                    num += ksq * p;
                    den += p;
                }
                kinetic_moment = if den > 0.0 { num / den } else { 0.0 };
                ffts.inverse_all(amp, dims);
            }
            let t_ck = (i + 1) as f64 * dt;
            let mu_ck = schedule.mu_of_t(t_ck);
            let h_ck = schedule.h_at_mu(mu_ck);
            let norm = psi.norm();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(Error::NormDrift((norm - 1.0).abs()));
            }
            // instantaneous harmonic model, pinned at z_f in this frame
            let z_ck = interp.center(mu_ck, None)?;
            let point = CentralPathPoint::new(emb, z_ck.clone(), mu_ck)?;
            let model = harmonic_at(emb, point, h_ck)?;
            let phi = gaussian_on_grid(grid, &model, &z_f)?;
            let fidelity = psi.fidelity(&phi)?;
            if fidelity < cfg.fidelity_floor {
                warnings.push(format!(
                    "checkpoint t = {t_ck:.4}: fidelity {fidelity:.4} below floor {}",
                    cfg.fidelity_floor
                ));
            }
            // potential expectation in the shifted frame
            let zeta_ck = &z_ck - &z_f;
            let m_zeta = emb.matrix() * &zeta_ck;
            let mut pot = 0.0;
            {
                let vol = grid.cell_volume();
                let amp = psi.amplitudes();
                for (flat, a) in amp.iter().enumerate() {
                    pot += nodes.potential(flat, &zeta_ck, &m_zeta, mu_ck) * a.norm_sqr() * vol;
                }
                queries += total as u64;
            }
            let energy = 0.5 * h_ck * h_ck * kinetic_moment + pot;
            diagnostics.push(Checkpoint {
                t: t_ck,
                mu: mu_ck,
                h: h_ck,
                norm,
                fidelity_to_harmonic: fidelity,
                energy,
            });
            if !last {
                let amp = psi.amplitudes_mut();
                ffts.forward_all(amp, dims);
                let tables = kinetic_tables(grid, data[i + 1].ck, &data[i + 1].zdot, dt / 2.0);
                apply_kinetic(amp, grid, &tables);
                ffts.inverse_all(amp, dims);
            }
        } else {
            // fused closing + opening halves (both diagonal in k-space)
            let amp = psi.amplitudes_mut();
            ffts.forward_all(amp, dims);
            let ck = 0.5 * (data[i].ck + data[i + 1].ck);
            let boost = (&data[i].zdot + &data[i + 1].zdot) * 0.5;
            let tables = kinetic_tables(grid, ck, &boost, dt);
            apply_kinetic(amp, grid, &tables);
            ffts.inverse_all(amp, dims);
        }
    }
    field.credit_evals(queries);

    let final_norm = psi.norm();
    if (final_norm - 1.0).abs() > 1e-9 {
        return Err(Error::NormDrift((final_norm - 1.0).abs()));
    }
    Ok((
        psi,
        PropagatorRun {
            steps,
            dt,
            eta,
            diagnostics,
            warnings,
            queries,
        },
    ))
}

/// Strang evolution with time-independent coefficients (no co-moving
/// frame): `i d/dt psi = [-kinetic_coeff Lap + potential(z)] psi` for
/// `total_time`, given the potential values at the grid nodes.
pub fn evolve_frozen(
    grid: &Grid,
    psi0: &WaveFunction,
    kinetic_coeff: f64,
    potential_values: &[f64],
    steps: usize,
    total_time: f64,
) -> Result<WaveFunction> {
    if potential_values.len() != grid.total_points() {
        return Err(Error::ShapeMismatch("potential values length".into()));
    }
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be positive".into()));
    }
    let dims = grid.dims();
    let dt = total_time / steps as f64;
    let mut psi = psi0.clone();
    let mut ffts = AxisFfts::new(grid.points_per_axis());
    let zero_boost = DVector::zeros(dims);
    let half = kinetic_tables(grid, kinetic_coeff, &zero_boost, dt / 2.0);
    let full = kinetic_tables(grid, kinetic_coeff, &zero_boost, dt);
    let vphase: Vec<Complex64> = potential_values
        .iter()
        .map(|f| Complex64::from_polar(1.0, -f * dt))
        .collect();
    {
        let amp = psi.amplitudes_mut();
        ffts.forward_all(amp, dims);
        apply_kinetic(amp, grid, &half);
        ffts.inverse_all(amp, dims);
    }
    for i in 0..steps {
        let amp = psi.amplitudes_mut();
        for (slot, ph) in amp.iter_mut().zip(vphase.iter()) {
            *slot *= ph;
        }
        ffts.forward_all(amp, dims);
        apply_kinetic(amp, grid, if i + 1 == steps { &half } else { &full });
        ffts.inverse_all(amp, dims);
    }
    Ok(psi)
}
