//! Classical central-path reference: complementarity map, Jacobian, Hessian,
//! Newton recentering, continuation tracing, and the spectral checks.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lo::SelfDualEmbedding;

/// A strictly feasible point together with its slack and path parameter.
#[derive(Debug, Clone)]
pub struct CentralPathPoint {
    pub z: DVector<f64>,
    pub s: DVector<f64>,
    pub mu: f64,
}

impl CentralPathPoint {
    /// Build a point, enforcing positivity and slack consistency
    /// (`|s - (Mz + q)| <= 1e-12 (1 + |z|)`).
    pub fn new(emb: &SelfDualEmbedding, z: DVector<f64>, mu: f64) -> Result<Self> {
        if mu <= 0.0 || mu > 1.0 {
            return Err(Error::InvalidParameter(format!("mu = {mu} outside (0, 1]")));
        }
        let s = emb.slack(&z)?;
        if z.iter().any(|v| *v <= 0.0) || s.iter().any(|v| *v <= 0.0) {
            return Err(Error::InvalidParameter(
                "point is not strictly interior".into(),
            ));
        }
        Ok(CentralPathPoint { z, s, mu })
    }

    /// Proximity of this point to its own mu.
    pub fn d2(&self) -> f64 {
        proximity(&self.z, &self.s, self.mu)
    }
}

/// Complementarity map `F(z) = z .* (Mz + q)`.
pub fn complementarity(emb: &SelfDualEmbedding, z: &DVector<f64>) -> Result<DVector<f64>> {
    let s = emb.slack(z)?;
    Ok(z.component_mul(&s))
}

/// Jacobian of the complementarity map, `J(z) = Z M + S`.
pub fn jacobian(emb: &SelfDualEmbedding, z: &DVector<f64>) -> Result<DMatrix<f64>> {
    let s = emb.slack(z)?;
    let nbar = emb.nbar();
    let mut j = emb.matrix().clone();
    for i in 0..nbar {
        let zi = z[i];
        for k in 0..nbar {
            j[(i, k)] *= zi;
        }
        j[(i, i)] += s[i];
    }
    Ok(j)
}

/// Gauss-Newton Hessian `J'J`; symmetric positive definite for interior `z`.
pub fn hessian_at(emb: &SelfDualEmbedding, z: &DVector<f64>) -> Result<DMatrix<f64>> {
    let j = jacobian(emb, z)?;
    Ok(j.transpose() * j)
}

/// Distance metric `d2(z, s; mu) = |z .* s - mu e|_2`.
pub fn proximity(z: &DVector<f64>, s: &DVector<f64>, mu: f64) -> f64 {
    z.component_mul(s)
        .iter()
        .map(|f| (f - mu) * (f - mu))
        .sum::<f64>()
        .sqrt()
}

/// Whether `(z, s)` lies in the narrow neighborhood `N2(gamma)` at `mu`.
pub fn in_neighborhood(z: &DVector<f64>, s: &DVector<f64>, mu: f64, gamma: f64) -> bool {
    proximity(z, s, mu) <= gamma * mu
}

pub const NEWTON_MAX_ITERS: usize = 50;
pub const CONDITION_LIMIT: f64 = 1e14;

/// Achievable residual floor for the stopping test; below this the
/// iteration is limited by rounding in forming `z .* (Mz + q)`.
fn residual_floor(z: &DVector<f64>, s: &DVector<f64>) -> f64 {
    let nbar = z.len() as f64;
    32.0 * f64::EPSILON
        * nbar.sqrt()
        * (1.0 + z.amax())
        * (1.0 + s.amax())
}

/// One Newton solve: `J dz = mu e - F(z)` with a rank-revealing SVD.
fn newton_direction(
    emb: &SelfDualEmbedding,
    z: &DVector<f64>,
    mu: f64,
) -> Result<DVector<f64>> {
    let j = jacobian(emb, z)?;
    let rhs = {
        let f = complementarity(emb, z)?;
        DVector::from_iterator(z.len(), f.iter().map(|v| mu - v))
    };
    let svd = j.svd(true, true);
    let sv = &svd.singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if smin <= 0.0 || smax / smin > CONDITION_LIMIT {
        return Err(Error::SingularJacobian(if smin > 0.0 {
            smax / smin
        } else {
            f64::INFINITY
        }));
    }
    svd.solve(&rhs, 0.0)
        .map_err(|e| Error::InvalidParameter(e.to_string()))
}

/// Newton recentering toward the mu-center, with fraction-to-boundary
/// damping (`step = min(1, 0.99 * max feasible step)`).
///
/// Converges when `|F(z) - mu e| <= tol * mu` (or the rounding floor,
/// whichever is larger). The returned point carries the iteration count.
pub fn newton_center(
    emb: &SelfDualEmbedding,
    z0: &DVector<f64>,
    mu_target: f64,
    tol: f64,
) -> Result<(CentralPathPoint, usize)> {
    if mu_target <= 0.0 {
        return Err(Error::InvalidParameter("mu_target must be positive".into()));
    }
    let mut z = z0.clone();
    let mut s = emb.slack(&z)?;
    if z.iter().any(|v| *v <= 0.0) || s.iter().any(|v| *v <= 0.0) {
        return Err(Error::InvalidParameter("z0 is not strictly interior".into()));
    }
    let mut residual = proximity(&z, &s, mu_target);
    for iter in 0..=NEWTON_MAX_ITERS {
        let stop = (tol * mu_target).max(residual_floor(&z, &s));
        if residual <= stop {
            return Ok((
                CentralPathPoint { z, s, mu: mu_target },
                iter,
            ));
        }
        if iter == NEWTON_MAX_ITERS {
            break;
        }
        let dz = newton_direction(emb, &z, mu_target)?;
        let ds = emb.matrix() * &dz;
        let mut alpha: f64 = 1.0;
        for (v, dv) in z.iter().zip(dz.iter()).chain(s.iter().zip(ds.iter())) {
            if *dv < 0.0 {
                alpha = alpha.min(-0.99 * v / dv);
            }
        }
        z += alpha * &dz;
        s = emb.slack(&z)?;
        residual = proximity(&z, &s, mu_target);
    }
    Err(Error::NewtonMaxIter(NEWTON_MAX_ITERS, residual))
}

/// Recommended continuation shrink factor, `1 - 0.1 / sqrt(nbar)`.
pub fn default_shrink(nbar: usize) -> f64 {
    1.0 - 0.1 / (nbar as f64).sqrt()
}

/// A traced segment of the central path with strictly decreasing mu.
#[derive(Debug, Clone)]
pub struct PathTrace {
    pub points: Vec<CentralPathPoint>,
    pub newton_iters: Vec<usize>,
    pub residuals: Vec<f64>,
    pub gamma: f64,
}

impl PathTrace {
    pub fn last(&self) -> &CentralPathPoint {
        self.points.last().expect("trace is never empty")
    }

    /// Largest component magnitude and largest inverse component over all
    /// traced `z` and `s`; an empirical stand-in for the solution-size
    /// bound `R_inf`.
    pub fn empirical_r_inf(&self) -> f64 {
        let mut r: f64 = 1.0;
        for p in &self.points {
            for v in p.z.iter().chain(p.s.iter()) {
                r = r.max(*v).max(1.0 / *v);
            }
        }
        r
    }

    /// Largest l1 norm over traced `z` and `s`; empirical stand-in for `R_1`.
    pub fn empirical_r1(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.z.lp_norm(1).max(p.s.lp_norm(1)))
            .fold(0.0, f64::max)
    }

    /// Interpolate the traced center at an arbitrary `mu` inside the traced
    /// range by recentering from the nearest stored point.
    pub fn center_at(&self, emb: &SelfDualEmbedding, mu: f64) -> Result<CentralPathPoint> {
        let nearest = self
            .points
            .iter()
            .min_by(|a, b| {
                let da = (a.mu.ln() - mu.ln()).abs();
                let db = (b.mu.ln() - mu.ln()).abs();
                da.partial_cmp(&db).unwrap()
            })
            .expect("trace is never empty");
        let (p, _) = newton_center(emb, &nearest.z, mu, 1e-10)?;
        Ok(p)
    }
}

/// Short-step continuation from `(e, e, 1)` down to `mu_final`.
///
/// Each step sets `mu <- max(shrink * mu, mu_final)` and recenters; every
/// stored point is verified to satisfy `d2 <= gamma * mu`.
pub fn trace_path(
    emb: &SelfDualEmbedding,
    mu_final: f64,
    gamma: f64,
    shrink: f64,
) -> Result<PathTrace> {
    if !(0.0 < mu_final && mu_final <= 1.0) {
        return Err(Error::InvalidParameter("mu_final must be in (0, 1]".into()));
    }
    if !(0.0 < gamma && gamma < 1.0) || !(0.0 < shrink && shrink < 1.0) {
        return Err(Error::InvalidParameter(
            "gamma and shrink must be in (0, 1)".into(),
        ));
    }
    let nbar = emb.nbar();
    let e = DVector::from_element(nbar, 1.0);
    let start = CentralPathPoint::new(emb, e, 1.0)?;
    let mut trace = PathTrace {
        residuals: vec![start.d2()],
        points: vec![start],
        newton_iters: vec![0],
        gamma,
    };
    let mut mu = 1.0;
    while mu > mu_final {
        mu = (shrink * mu).max(mu_final);
        let z_prev = trace.last().z.clone();
        let (point, iters) = newton_center(emb, &z_prev, mu, 1e-10)?;
        let d2 = point.d2();
        if d2 > gamma * mu {
            return Err(Error::InvalidParameter(format!(
                "recentered point left N2({gamma}): d2 = {d2:.3e} at mu = {mu:.3e}"
            )));
        }
        trace.points.push(point);
        trace.newton_iters.push(iters);
        trace.residuals.push(d2);
    }
    Ok(trace)
}

/// Path tangent `dz/dmu = J(z)^{-1} e` at a traced point.
pub fn path_tangent(emb: &SelfDualEmbedding, point: &CentralPathPoint) -> Result<DVector<f64>> {
    let j = jacobian(emb, &point.z)?;
    let e = DVector::from_element(emb.nbar(), 1.0);
    let svd = j.svd(true, true);
    svd.solve(&e, 0.0)
        .map_err(|e| Error::InvalidParameter(e.to_string()))
}

/// Outcome of comparing `sigma_min(J(z(mu)))` against the lower bound
/// `mu / R_inf`.
#[derive(Debug, Clone, Copy)]
pub struct SigmaMinCheck {
    pub sigma_min: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Smallest-singular-value check at a traced point. `r_inf` must dominate
/// the observed component bounds of the point.
pub fn sigma_min_check(
    emb: &SelfDualEmbedding,
    point: &CentralPathPoint,
    r_inf: f64,
) -> Result<SigmaMinCheck> {
    let observed = point
        .z
        .iter()
        .chain(point.s.iter())
        .fold(0.0_f64, |acc, v| acc.max(*v).max(1.0 / *v));
    if r_inf < observed {
        return Err(Error::InvalidParameter(format!(
            "R_inf = {r_inf:.6} is below the observed component bound {observed:.6}"
        )));
    }
    let j = jacobian(emb, &point.z)?;
    let svd = j.svd(false, false);
    let sigma_min = svd.singular_values.min();
    let bound = point.mu / r_inf;
    Ok(SigmaMinCheck {
        sigma_min,
        bound,
        holds: sigma_min >= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lo::{LoProblem, Normalization};
    use approx::assert_abs_diff_eq;
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
    fn complementarity_at_special_points() {
        let emb = unit_embedding();
        let e = DVector::from_element(4, 1.0);
        let f = complementarity(&emb, &e).unwrap();
        assert_abs_diff_eq!((f - &e).norm(), 0.0, epsilon = 1e-15);
        let f0 = complementarity(&emb, &DVector::zeros(4)).unwrap();
        assert_eq!(f0, DVector::zeros(4));
    }

    #[test]
    fn jacobian_at_e_is_m_plus_identity() {
        let emb = unit_embedding();
        let e = DVector::from_element(4, 1.0);
        let j = jacobian(&emb, &e).unwrap();
        let expect = emb.matrix() + DMatrix::identity(4, 4);
        assert_eq!(j, expect);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let emb = unit_embedding();
        let z = DVector::from_vec(vec![0.9, 1.1, 1.0, 0.8]);
        let j = jacobian(&emb, &z).unwrap();
        let delta = 1e-5;
        for col in 0..4 {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[col] += delta;
            zm[col] -= delta;
            let fp = complementarity(&emb, &zp).unwrap();
            let fm = complementarity(&emb, &zm).unwrap();
            let fd = (fp - fm) / (2.0 * delta);
            for row in 0..4 {
                assert_abs_diff_eq!(fd[row], j[(row, col)], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn jacobian_nonsingular_on_interior_points() {
        let emb = unit_embedding();
        for z in [
            DVector::from_vec(vec![1.0, 1.0, 1.0, 1.0]),
            DVector::from_vec(vec![0.9, 1.1, 1.0, 0.8]),
        ] {
            let s = emb.slack(&z).unwrap();
            assert!(s.iter().all(|v| *v > 0.0), "test point must be interior");
            let j = jacobian(&emb, &z).unwrap();
            let svd = j.svd(false, false);
            assert!(svd.singular_values.min() > 1e-10);
        }
    }

    #[test]
    fn hessian_skew_cancellation_at_e() {
        let emb = unit_embedding();
        let e = DVector::from_element(4, 1.0);
        let h = hessian_at(&emb, &e).unwrap();
        // (M + I)'(M + I) = M'M + I since M is skew-symmetric
        let expect = emb.matrix().transpose() * emb.matrix() + DMatrix::identity(4, 4);
        assert_abs_diff_eq!((h - expect).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn proximity_examples() {
        let e = DVector::from_element(4, 1.0);
        assert_eq!(proximity(&e, &e, 1.0), 0.0);
        assert_abs_diff_eq!(proximity(&e, &e, 0.5), 1.0, epsilon = 1e-15);
        assert!(in_neighborhood(&e, &e, 1.0, 0.25));
    }

    #[test]
    fn newton_center_is_identity_at_mu_one() {
        let emb = unit_embedding();
        let e = DVector::from_element(4, 1.0);
        let (p, iters) = newton_center(&emb, &e, 1.0, 1e-12).unwrap();
        assert_eq!(iters, 0);
        assert_eq!(p.z, e);
    }

    #[test]
    fn newton_center_quadratic_convergence_to_half() {
        let emb = unit_embedding();
        let e = DVector::from_element(4, 1.0);
        let (p, _) = newton_center(&emb, &e, 0.5, 1e-14).unwrap();
        // closed-form center of this instance: z(mu) = (1, 1, 1, mu)
        let expect = DVector::from_vec(vec![1.0, 1.0, 1.0, 0.5]);
        assert!(p.d2() <= 1e-13);
        assert_abs_diff_eq!((&p.z - &expect).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn newton_center_deep_target_by_continuation() {
        let emb = unit_embedding();
        let trace = trace_path(&emb, 1e-3, 0.25, default_shrink(4)).unwrap();
        let p = trace.last();
        assert_abs_diff_eq!(p.mu, 1e-3);
        assert!(proximity(&p.z, &p.s, 1e-3) <= 1e-13);
    }

    #[test]
    fn newton_center_unique_from_perturbed_starts() {
        let emb = unit_embedding();
        let e = DVector::from_element(4, 1.0);
        let z_alt = DVector::from_vec(vec![1.21, 0.84, 1.13, 0.95]);
        assert!(emb.slack(&z_alt).unwrap().iter().all(|v| *v > 0.0));
        let (p1, _) = newton_center(&emb, &e, 0.6, 1e-12).unwrap();
        let (p2, _) = newton_center(&emb, &z_alt, 0.6, 1e-12).unwrap();
        assert!((p1.z - p2.z).norm() < 1e-8);
    }

    #[test]
    fn newton_flags_singular_jacobian() {
        let emb = unit_embedding();
        // shrinking three coordinates to the 1e-18 scale drives three rows
        // of J = ZM + S toward zero: condition estimate blows past 1e14
        let z = DVector::from_vec(vec![1e-18, 1e-18, 1e-18, 1e-18]);
        let s = emb.slack(&z).unwrap();
        assert!(s.iter().all(|v| *v > 0.0));
        match newton_center(&emb, &z, 0.5, 1e-10) {
            Err(Error::SingularJacobian(cond)) => assert!(cond > CONDITION_LIMIT),
            other => panic!("expected singular-Jacobian error, got {other:?}"),
        }
    }

    #[test]
    fn trace_path_trivial_and_deep() {
        let emb = unit_embedding();
        let t = trace_path(&emb, 1.0, 0.25, default_shrink(4)).unwrap();
        assert_eq!(t.points.len(), 1);
        assert_eq!(t.points[0].mu, 1.0);

        let t = trace_path(&emb, 1e-6, 0.25, default_shrink(4)).unwrap();
        assert!(t.points.windows(2).all(|w| w[1].mu < w[0].mu));
        assert_abs_diff_eq!(t.last().mu, 1e-6);
        // iteration budget: count <= 20 sqrt(nbar) ln(1/mu_final)
        let budget = 20.0 * 2.0 * (1e6_f64).ln();
        assert!((t.points.len() as f64) < budget);
        // slack consistency on every stored point
        for p in &t.points {
            let s = emb.slack(&p.z).unwrap();
            assert!((&s - &p.s).norm() <= 1e-12 * (1.0 + p.z.norm()));
        }
    }

    #[test]
    fn sigma_min_check_on_fixture() {
        let emb = unit_embedding();
        let e = DVector::from_element(4, 1.0);
        let p = CentralPathPoint::new(&emb, e, 1.0).unwrap();
        let chk = sigma_min_check(&emb, &p, 1.0).unwrap();
        // J(e) = M + I with M'M = 3I, so sigma_min = 2
        assert_abs_diff_eq!(chk.sigma_min, 2.0, epsilon = 1e-12);
        assert_eq!(chk.bound, 1.0);
        assert!(chk.holds);

        // R_inf below the observed bound errors
        let (p2, _) = newton_center(&emb, &p.z, 0.5, 1e-12).unwrap();
        assert!(sigma_min_check(&emb, &p2, 1.5).is_err());
    }

    #[test]
    fn hessian_identity_at_centered_points() {
        let emb = unit_embedding();
        let trace = trace_path(&emb, 0.3, 0.25, default_shrink(4)).unwrap();
        let p = trace.last();
        let h = hessian_at(&emb, &p.z).unwrap();
        // at the mu-center the cross terms cancel: H = M'Z^2 M + S^2
        let z2 = DMatrix::from_diagonal(&p.z.map(|v| v * v));
        let s2 = DMatrix::from_diagonal(&p.s.map(|v| v * v));
        let expect = emb.matrix().transpose() * z2 * emb.matrix() + s2;
        assert!((h - expect).norm() <= 1e-10);
    }

    #[test]
    fn lambda_min_lower_bound_along_trace() {
        let emb = unit_embedding();
        let trace = trace_path(&emb, 1e-2, 0.25, default_shrink(4)).unwrap();
        let r_inf = trace.empirical_r_inf();
        for p in &trace.points {
            let h = hessian_at(&emb, &p.z).unwrap();
            let eig = h.symmetric_eigen();
            let lmin = eig.eigenvalues.min();
            assert!(lmin >= (p.mu / r_inf).powi(2) - 1e-12);
        }
    }
}
