//! Independent brute-force checkers: a dense spectral eigensolver for low
//! dimensional Hamiltonians, a vertex-enumeration LP solver, a
//! high-precision path tracer, and closed-form synthetic systems.
//!
//! Nothing here reuses the implementation paths it is meant to check: the
//! Laplacian is assembled densely from the DFT cosine sums rather than via
//! FFT, linear solves use an LU factorization rather than the SVD route,
//! and synthetic-system values come from their closed forms.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lo::{LoProblem, SelfDualEmbedding};
use crate::path::{CentralPathPoint, PathTrace};
use crate::qsim::Grid;

pub const DENSE_POINT_BUDGET: usize = 1 << 14;

/// Two lowest eigenpairs of a discretized Hamiltonian.
#[derive(Debug, Clone)]
pub struct GroundPair {
    pub energy0: f64,
    pub energy1: f64,
    /// Ground state, normalized under the discrete measure.
    pub state0: Vec<f64>,
}

/// Dense symmetric matrix of the periodic spectral Laplacian `-d^2/dx^2`
/// on `n` points over extent `d`, assembled from the DFT cosine sums.
fn spectral_laplacian_dense(n: usize, extent: f64) -> DMatrix<f64> {
    let two_pi = 2.0 * std::f64::consts::PI;
    // row of the circulant: l(d) = (1/n) sum_k w_k^2 cos(2 pi k d / n)
    let mut row = vec![0.0; n];
    for (d, slot) in row.iter_mut().enumerate() {
        let mut acc = 0.0;
        for k in 0..n {
            let signed = if k < n / 2 { k as i64 } else { k as i64 - n as i64 };
            let w = two_pi * signed as f64 / extent;
            acc += w * w * (two_pi * k as f64 * d as f64 / n as f64).cos();
        }
        *slot = acc / n as f64;
    }
    DMatrix::from_fn(n, n, |i, j| {
        let d = (i + n - j) % n;
        row[d]
    })
}

/// Assemble `kinetic_coeff * Lap + diag(potential)` on the grid (dims <= 2)
/// and return the two lowest eigenpairs by full symmetric diagonalization.
pub fn dense_ground_state(
    grid: &Grid,
    potential_values: &[f64],
    kinetic_coeff: f64,
) -> Result<GroundPair> {
    let total = grid.total_points();
    if grid.dims() > 2 {
        return Err(Error::InvalidParameter(
            "dense eigensolver is limited to dims <= 2".into(),
        ));
    }
    if total > DENSE_POINT_BUDGET {
        return Err(Error::MemoryBudget {
            needed: total as u128,
            budget: DENSE_POINT_BUDGET as u128,
        });
    }
    if potential_values.len() != total {
        return Err(Error::ShapeMismatch("potential values length".into()));
    }
    let n = grid.points_per_axis();
    let l1 = spectral_laplacian_dense(n, grid.extent());
    let mut h = DMatrix::zeros(total, total);
    match grid.dims() {
        1 => {
            h.copy_from(&l1);
        }
        2 => {
            // kron(L, I) + kron(I, L) on row-major (axis0, axis1) indexing
            for i0 in 0..n {
                for j0 in 0..n {
                    let v = l1[(i0, j0)];
                    if v != 0.0 {
                        for k in 0..n {
                            h[(i0 * n + k, j0 * n + k)] += v;
                        }
                    }
                }
            }
            for i1 in 0..n {
                for j1 in 0..n {
                    let v = l1[(i1, j1)];
                    if v != 0.0 {
                        for k in 0..n {
                            h[(k * n + i1, k * n + j1)] += v;
                        }
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    h *= kinetic_coeff;
    for (i, v) in potential_values.iter().enumerate() {
        h[(i, i)] += v;
    }
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let e0 = eig.eigenvalues[order[0]];
    let e1 = eig.eigenvalues[order[1]];
    let mut state0: Vec<f64> = eig.eigenvectors.column(order[0]).iter().copied().collect();
    let norm = (state0.iter().map(|v| v * v).sum::<f64>() * grid.cell_volume()).sqrt();
    state0.iter_mut().for_each(|v| *v /= norm);
    Ok(GroundPair { energy0: e0, energy1: e1, state0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct VertexLpResult {
    pub x_opt: Option<DVector<f64>>,
    pub y_opt: Option<DVector<f64>>,
    pub value: Option<f64>,
    pub status: LpStatus,
}

const FEAS_TOL: f64 = 1e-9;

/// All size-k index subsets of 0..pool.
fn subsets(pool: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, pool: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..pool {
            cur.push(i);
            rec(i + 1, pool, k, cur, out);
            cur.pop();
        }
    }
    rec(0, pool, k, &mut cur, &mut out);
    out
}

/// Enumerate the basic points of `min c'x s.t. Ax >= b, x >= 0` and return
/// the best feasible one, if any.
fn enumerate_min(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
    let (m, n) = (a.nrows(), a.ncols());
    let mut best: Option<(DVector<f64>, f64)> = None;
    for set in subsets(m + n, n) {
        let mut rows = DMatrix::zeros(n, n);
        let mut rhs = DVector::zeros(n);
        for (r, &pick) in set.iter().enumerate() {
            if pick < m {
                for j in 0..n {
                    rows[(r, j)] = a[(pick, j)];
                }
                rhs[r] = b[pick];
            } else {
                rows[(r, pick - m)] = 1.0;
                rhs[r] = 0.0;
            }
        }
        let lu = rows.lu();
        let Some(x) = lu.solve(&rhs) else { continue };
        if x.iter().any(|v| !v.is_finite() || *v < -FEAS_TOL) {
            continue;
        }
        let slack = a * &x - b;
        if slack.iter().any(|v| *v < -FEAS_TOL) {
            continue;
        }
        let val = c.dot(&x);
        if best.as_ref().map_or(true, |(_, v)| val < *v) {
            best = Some((x.map(|v| v.max(0.0)), val));
        }
    }
    best
}

/// Exhaustive vertex-enumeration solve of the primal-dual pair for
/// instances with `m, n <= 3`. Detects unboundedness through dual
/// infeasibility.
pub fn vertex_enumeration_lp(p: &LoProblem) -> Result<VertexLpResult> {
    if p.m() > 3 || p.n() > 3 {
        return Err(Error::InvalidParameter(
            "vertex enumeration is limited to m, n <= 3".into(),
        ));
    }
    let primal = enumerate_min(&p.a, &p.b, &p.c);
    // dual max b'y s.t. A'y <= c, y >= 0 recast as min (-b)'y, (-A')y >= -c
    let neg_at = -p.a.transpose();
    let neg_c = -&p.c;
    let neg_b = -&p.b;
    let dual = enumerate_min(&neg_at, &neg_c, &neg_b);
    match (primal, dual) {
        (Some((x, vp)), Some((y, vd))) => {
            let value_dual = -vd;
            debug_assert!(
                (vp - value_dual).abs() <= 1e-7 * (1.0 + vp.abs()),
                "strong duality violated: {vp} vs {value_dual}"
            );
            Ok(VertexLpResult {
                x_opt: Some(x),
                y_opt: Some(y),
                value: Some(vp),
                status: LpStatus::Optimal,
            })
        }
        (Some(_), None) => Ok(VertexLpResult {
            x_opt: None,
            y_opt: None,
            value: None,
            status: LpStatus::Unbounded,
        }),
        _ => Ok(VertexLpResult {
            x_opt: None,
            y_opt: None,
            value: None,
            status: LpStatus::Infeasible,
        }),
    }
}

/// Residual floor below which the complementarity residual is rounding
/// noise.
fn floor_for(z: &DVector<f64>, s: &DVector<f64>) -> f64 {
    64.0 * f64::EPSILON * (z.len() as f64).sqrt() * (1.0 + z.amax()) * (1.0 + s.amax())
}

/// Damped Newton recentering with an LU solve; independent of the SVD
/// route used by the implementation under test.
fn oracle_newton(emb: &SelfDualEmbedding, z0: &DVector<f64>, mu: f64) -> Result<DVector<f64>> {
    let nbar = emb.nbar();
    let mat = emb.matrix();
    let mut z = z0.clone();
    for _ in 0..80 {
        let s = emb.slack(&z)?;
        let mut residual = z.component_mul(&s);
        residual.iter_mut().for_each(|v| *v -= mu);
        let rnorm = residual.norm();
        if rnorm <= (1e-14 * mu).max(floor_for(&z, &s)) {
            return Ok(z);
        }
        let mut jac = mat.clone();
        for i in 0..nbar {
            for k in 0..nbar {
                jac[(i, k)] *= z[i];
            }
            jac[(i, i)] += s[i];
        }
        let dz = jac
            .lu()
            .solve(&(-residual))
            .ok_or(Error::SingularJacobian(f64::INFINITY))?;
        let ds = mat * &dz;
        let mut alpha: f64 = 1.0;
        for (v, dv) in z.iter().zip(dz.iter()).chain(s.iter().zip(ds.iter())) {
            if *dv < 0.0 {
                alpha = alpha.min(-0.99 * v / dv);
            }
        }
        z += alpha * dz;
    }
    Err(Error::NewtonMaxIter(80, f64::NAN))
}

/// High-precision continuation with shrink 0.99; fixture generator and
/// cross-check for the production tracer.
pub fn high_precision_trace(emb: &SelfDualEmbedding, mu_final: f64) -> Result<PathTrace> {
    if !(0.0 < mu_final && mu_final <= 1.0) {
        return Err(Error::InvalidParameter("mu_final must be in (0, 1]".into()));
    }
    let nbar = emb.nbar();
    let mut z = DVector::from_element(nbar, 1.0);
    let mut mu = 1.0;
    let mut points = vec![CentralPathPoint::new(emb, z.clone(), 1.0)?];
    while mu > mu_final {
        mu = (0.99 * mu).max(mu_final);
        z = oracle_newton(emb, &z, mu)?;
        points.push(CentralPathPoint::new(emb, z.clone(), mu)?);
    }
    let residuals = points.iter().map(|p| p.d2()).collect();
    let n = points.len();
    Ok(PathTrace {
        points,
        newton_iters: vec![0; n],
        residuals,
        gamma: 1.0,
    })
}

/// Closed-form synthetic complementarity systems at eigensolver-tractable
/// scale: the one-dimensional system has `M = [0]`, `q = [1]`, so the
/// potential is `(z mu-residual)^2 / 2` with center `z(mu) = mu` and unit
/// curvature; the two-dimensional system couples the axes through a
/// skew rotation of strength `coupling`.
#[derive(Debug, Clone)]
pub struct SyntheticSystem {
    pub dims: usize,
    pub coupling: f64,
    pub description: String,
}

impl SyntheticSystem {
    pub fn one_dim() -> Self {
        SyntheticSystem {
            dims: 1,
            coupling: 0.0,
            description: "scalar system: f = (z - mu)^2 / 2, center mu, curvature 1".into(),
        }
    }

    pub fn two_dim(coupling: f64) -> Self {
        assert!(coupling.abs() < 1.0, "coupling must keep e interior");
        SyntheticSystem {
            dims: 2,
            coupling,
            description: format!("planar system with skew coupling {coupling}"),
        }
    }

    /// The equivalent embedding consumed by the machinery under test.
    pub fn embedding(&self) -> SelfDualEmbedding {
        match self.dims {
            1 => SelfDualEmbedding::from_parts(
                DMatrix::from_row_slice(1, 1, &[0.0]),
                DVector::from_vec(vec![1.0]),
            )
            .unwrap(),
            2 => {
                let a = self.coupling;
                let m = DMatrix::from_row_slice(2, 2, &[0.0, a, -a, 0.0]);
                let e = DVector::from_element(2, 1.0);
                let q = &e - &m * &e;
                SelfDualEmbedding::from_parts(m, q).unwrap()
            }
            _ => unreachable!(),
        }
    }

    /// Closed-form potential, written out without the shared matrix
    /// machinery.
    pub fn potential(&self, z: &DVector<f64>, mu: f64) -> f64 {
        match self.dims {
            1 => {
                let r = z[0] - mu;
                0.5 * r * r
            }
            2 => {
                let a = self.coupling;
                let s1 = a * z[1] + (1.0 - a);
                let s2 = -a * z[0] + (1.0 + a);
                let r1 = z[0] * s1 - mu;
                let r2 = z[1] * s2 - mu;
                0.5 * (r1 * r1 + r2 * r2)
            }
            _ => unreachable!(),
        }
    }

    /// Interior zero of the potential. Analytic in one dimension; found by
    /// the oracle's own Newton in two.
    pub fn center(&self, mu: f64) -> Result<DVector<f64>> {
        match self.dims {
            1 => Ok(DVector::from_vec(vec![mu])),
            2 => {
                let emb = self.embedding();
                let mut z = DVector::from_element(2, 1.0);
                let mut m = 1.0;
                while m > mu {
                    m = (0.9 * m).max(mu);
                    z = oracle_newton(&emb, &z, m)?;
                }
                Ok(z)
            }
            _ => unreachable!(),
        }
    }

    /// Hessian of the closed-form potential at its zero, by central
    /// differences of the oracle's own formula.
    pub fn hessian_at_center(&self, mu: f64) -> Result<DMatrix<f64>> {
        let z0 = self.center(mu)?;
        let d = self.dims;
        let step = 1e-4;
        let mut h = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let mut zpp = z0.clone();
                let mut zpm = z0.clone();
                let mut zmp = z0.clone();
                let mut zmm = z0.clone();
                zpp[i] += step;
                zpp[j] += step;
                zpm[i] += step;
                zpm[j] -= step;
                zmp[i] -= step;
                zmp[j] += step;
                zmm[i] -= step;
                zmm[j] -= step;
                h[(i, j)] = (self.potential(&zpp, mu) - self.potential(&zpm, mu)
                    - self.potential(&zmp, mu)
                    + self.potential(&zmm, mu))
                    / (4.0 * step * step);
            }
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lo::Normalization;
    use crate::path::{default_shrink, trace_path};
    use crate::qsim::DEFAULT_MEMORY_BUDGET;
    use approx::assert_abs_diff_eq;

    #[test]
    fn free_particle_spectrum() {
        let grid = Grid::new(1, 64, 2.0, DEFAULT_MEMORY_BUDGET).unwrap();
        let v = vec![0.0; 64];
        let ck = 0.5 * 1e-2;
        let gp = dense_ground_state(&grid, &v, ck).unwrap();
        assert_abs_diff_eq!(gp.energy0, 0.0, epsilon = 1e-10);
        let k1 = 2.0 * std::f64::consts::PI / 2.0;
        assert_abs_diff_eq!(gp.energy1, ck * k1 * k1, epsilon = 1e-8);
        // uniform ground state
        let spread = gp
            .state0
            .iter()
            .map(|x| (x.abs() - gp.state0[0].abs()).abs())
            .fold(0.0, f64::max);
        assert!(spread < 1e-8);
    }

    #[test]
    fn harmonic_gap_matches_analytic_oscillator() {
        // V = lam (x - c)^2 / 2 with kinetic h^2/2: gap = h sqrt(lam)
        let grid = Grid::new(1, 256, 2.0, DEFAULT_MEMORY_BUDGET).unwrap();
        let (h, lam, c) = (1e-2, 2.3, 1.0);
        let v: Vec<f64> = (0..256)
            .map(|i| {
                let x = grid.axis_coord(i) - c;
                0.5 * lam * x * x
            })
            .collect();
        let gp = dense_ground_state(&grid, &v, 0.5 * h * h).unwrap();
        let gap = gp.energy1 - gp.energy0;
        let expect = h * lam.sqrt();
        assert!((gap - expect).abs() / expect < 1e-2);
    }

    #[test]
    fn quartic_well_ground_state_is_near_gaussian_at_small_h() {
        // V = lam (x - c)^2 / 2 + kappa (x - c)^4: for small h the ground
        // state should match the Gaussian of the quadratic part
        let grid = Grid::new(1, 256, 2.0, DEFAULT_MEMORY_BUDGET).unwrap();
        let (h, lam, kappa, c) = (5e-3, 1.5, 2.0, 1.0);
        let v: Vec<f64> = (0..256)
            .map(|i| {
                let x = grid.axis_coord(i) - c;
                0.5 * lam * x * x + kappa * x.powi(4)
            })
            .collect();
        let gp = dense_ground_state(&grid, &v, 0.5 * h * h).unwrap();
        // Gaussian with sigma^2 = (h/2) lam^{-1/2}
        let sigma2 = 0.5 * h / lam.sqrt();
        let mut overlap = 0.0;
        let mut norm = 0.0;
        for i in 0..256 {
            let x = grid.axis_coord(i) - c;
            let g = (-x * x / (4.0 * sigma2)).exp();
            norm += g * g;
            overlap += g * gp.state0[i];
        }
        let overlap = overlap.abs() * grid.cell_volume() / (norm * grid.cell_volume()).sqrt();
        assert!(overlap >= 0.99, "overlap {overlap}");
    }

    #[test]
    fn size_budget_enforced() {
        let grid = Grid::new(2, 256, 1.0, DEFAULT_MEMORY_BUDGET).unwrap();
        let v = vec![0.0; 65536];
        assert!(matches!(
            dense_ground_state(&grid, &v, 1.0),
            Err(Error::MemoryBudget { .. })
        ));
    }

    fn problem(a: &[f64], m: usize, n: usize, b: &[f64], c: &[f64]) -> LoProblem {
        LoProblem::new(
            DMatrix::from_row_slice(m, n, a),
            DVector::from_row_slice(b),
            DVector::from_row_slice(c),
            Normalization::Strict,
        )
        .unwrap()
    }

    #[test]
    fn vertex_enumeration_unit_instance() {
        // min x s.t. x >= 1, x >= 0; dual max y s.t. y <= 1
        let p = problem(&[1.0], 1, 1, &[1.0], &[1.0]);
        let r = vertex_enumeration_lp(&p).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert_abs_diff_eq!(r.x_opt.unwrap()[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.y_opt.unwrap()[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.value.unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn vertex_enumeration_zero_objective_and_infeasible() {
        let p = problem(&[1.0], 1, 1, &[0.5], &[0.0]);
        let r = vertex_enumeration_lp(&p).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert_abs_diff_eq!(r.value.unwrap(), 0.0, epsilon = 1e-12);

        // 0 x >= 1 is infeasible
        let p = problem(&[0.0], 1, 1, &[1.0], &[1.0]);
        let r = vertex_enumeration_lp(&p).unwrap();
        assert_eq!(r.status, LpStatus::Infeasible);
    }

    #[test]
    fn vertex_enumeration_unbounded() {
        // min -x s.t. x >= 0 (constraint 0 x >= -1 vacuous): unbounded below
        let p = problem(&[0.0], 1, 1, &[-1.0], &[-1.0]);
        let r = vertex_enumeration_lp(&p).unwrap();
        assert_eq!(r.status, LpStatus::Unbounded);
    }

    #[test]
    fn vertex_enumeration_weak_duality_on_two_by_two() {
        let p = problem(&[0.6, 0.8, 0.0, 0.5], 2, 2, &[0.5, 0.1], &[0.3, 0.4]);
        let r = vertex_enumeration_lp(&p).unwrap();
        if r.status == LpStatus::Optimal {
            let x = r.x_opt.unwrap();
            let y = r.y_opt.unwrap();
            assert!(p.c.dot(&x) - p.b.dot(&y) >= -1e-9);
        }
    }

    #[test]
    fn high_precision_trace_agrees_with_production_tracer() {
        let p = problem(&[1.0], 1, 1, &[1.0], &[1.0]);
        let emb = SelfDualEmbedding::embed(&p);
        let hp = high_precision_trace(&emb, 1e-3).unwrap();
        assert_eq!(hp.points[0].mu, 1.0);
        assert_eq!(
            hp.points[0].z,
            DVector::from_element(4, 1.0),
            "trace must start exactly at e"
        );
        let prod = trace_path(&emb, 1e-3, 0.25, default_shrink(4)).unwrap();
        // compare at the shared terminal mu
        let a = hp.last();
        let b = prod.last();
        assert_eq!(a.mu, b.mu);
        assert!((&a.z - &b.z).norm() < 1e-8);
        // terminal extraction gap is controlled by the remaining mu
        let sol = emb
            .extract_solution(&a.z, crate::lo::DEFAULT_BETA_MIN)
            .unwrap();
        assert!(sol.duality_gap.abs() <= 10.0 * 1e-3 * 4.0);
    }

    #[test]
    fn synthetic_systems_match_their_embeddings() {
        for sys in [SyntheticSystem::one_dim(), SyntheticSystem::two_dim(0.5)] {
            let emb = sys.embedding();
            let mu = 0.6;
            let zc = sys.center(mu).unwrap();
            assert!(sys.potential(&zc, mu) <= 1e-22);
            // closed form against the generic machinery on a few points
            for k in 0..5 {
                let z = zc.map(|v| v + 0.01 * (k as f64 - 2.0));
                let f_machine = {
                    let fvec = crate::path::complementarity(&emb, &z).unwrap();
                    0.5 * fvec.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>()
                };
                assert_abs_diff_eq!(sys.potential(&z, mu), f_machine, epsilon = 1e-13);
            }
            // finite-difference Hessian is SPD and matches the machinery
            let h_o = sys.hessian_at_center(mu).unwrap();
            let h_m = crate::path::hessian_at(&emb, &zc).unwrap();
            assert!((h_o - h_m).norm() < 1e-6);
        }
        // 1-dim analytic Hessian is exactly 1
        let s = SyntheticSystem::one_dim();
        let h = s.hessian_at_center(0.5).unwrap();
        assert_abs_diff_eq!(h[(0, 0)], 1.0, epsilon = 1e-7);
    }
}
