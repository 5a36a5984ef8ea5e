//! Concrete arithmetic for the run-cost accounting: oracle query counts,
//! elementary-gate tallies for the potential-evaluation circuit, the
//! time-integrated potential norm, and its Lipschitz bound. All big-O
//! constants are set to 1 ("constants-mode"); reports carry that caveat.

use crate::lo::{LoProblem, SelfDualEmbedding};

/// Matrix-multiplication exponent used by the comparator rows.
pub const OMEGA: f64 = 2.38;

/// Per-instance resource summary in constants-mode.
#[derive(Debug, Clone)]
pub struct ResourceReport {
    pub queries: f64,
    pub gates_oracle: f64,
    pub gates_total: f64,
    pub vnorm: f64,
    pub lipschitz: f64,
    pub multipliers: usize,
    pub adders: usize,
    pub s_sum_adders: usize,
    pub mu_queries: usize,
    pub nnz_assumption_ok: bool,
    // parameter echo
    pub m: usize,
    pub n: usize,
    pub nnz_a: usize,
    pub r1: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub gamma: f64,
    pub k_const: f64,
    pub ell: u32,
}

/// `theta` at a given `mu` under the Algorithm-1 width formula.
fn theta_at(gamma: f64, delta: f64, r1: f64, nbar: usize, mu: f64) -> f64 {
    let nbar = nbar as f64;
    let denom = 2.0 * r1 * (nbar.sqrt() / 2.0 + 0.75 * (2.0 / delta).ln());
    gamma * gamma * mu / denom
}

/// Time-integrated potential norm bound `K gamma^2 / (theta(eps) eta)`,
/// with theta evaluated at the worst case `mu = eps`.
pub fn vnorm_bound(
    k_const: f64,
    gamma: f64,
    delta: f64,
    r1: f64,
    nbar: usize,
    epsilon: f64,
    eta: f64,
) -> f64 {
    k_const * gamma * gamma / (theta_at(gamma, delta, r1, nbar, epsilon) * eta)
}

/// Lipschitz bound `2 K gamma^2 / theta(eps)^2` on the dilated potential.
pub fn lipschitz_bound(k_const: f64, gamma: f64, delta: f64, r1: f64, nbar: usize, epsilon: f64) -> f64 {
    let th = theta_at(gamma, delta, r1, nbar, epsilon);
    2.0 * k_const * gamma * gamma / (th * th)
}

/// Oracle query count
/// `(R1/eps) (sqrt(nbar) + ln(1/delta)) ln(1/delta) ln(nbar/delta)`.
pub fn query_count(r1: f64, epsilon: f64, nbar: usize, delta: f64) -> f64 {
    let nbar = nbar as f64;
    let l = (1.0 / delta).ln();
    (r1 / epsilon) * (nbar.sqrt() + l) * l * (nbar / delta).ln()
}

/// Gate tally of one potential-function evaluation circuit with `ell`-bit
/// fixed-point arithmetic.
#[derive(Debug, Clone, Copy)]
pub struct OracleGateCount {
    /// `1 + nbar + sum_j Ntilde_j` multipliers, with `Ntilde_j` the
    /// nonzeros in row j of the embedded matrix.
    pub multipliers: usize,
    /// `2 nbar` adders for the squared-residual accumulation.
    pub adders: usize,
    /// Additional adders from forming the slack sums, reported separately.
    pub s_sum_adders: usize,
    /// `nbar` evaluations of the schedule value.
    pub mu_queries: usize,
    /// `multipliers * ell^(log2 3) + adders * ell` elementary gates at
    /// unit per-primitive constants.
    pub gates: f64,
}

pub fn oracle_gate_count(p: &LoProblem, ell: u32) -> OracleGateCount {
    let emb = SelfDualEmbedding::embed(p);
    let nbar = emb.nbar();
    let row_nnz_total: usize = (0..nbar)
        .map(|i| emb.matrix().row(i).iter().filter(|v| **v != 0.0).count())
        .sum();
    let multipliers = 1 + nbar + row_nnz_total;
    let adders = 2 * nbar;
    let ell_f = ell as f64;
    let gates = multipliers as f64 * ell_f.powf(3.0_f64.log2()) + adders as f64 * ell_f;
    OracleGateCount {
        multipliers,
        adders,
        s_sum_adders: row_nnz_total,
        mu_queries: nbar,
        gates,
    }
}

/// Additional-gate term of the simulation beyond the oracle calls.
fn additional_gates(r1: f64, epsilon: f64, nbar: usize, delta: f64) -> f64 {
    let nb = nbar as f64;
    let l = (1.0 / delta).ln();
    (r1 / epsilon)
        * (nb.sqrt() + (nb / delta).ln().powf(2.5))
        * (nb.sqrt() + l)
        * l
        * (nb.sqrt() / delta).ln()
}

/// Total elementary-gate estimate: oracle gates per query times the query
/// count, plus the additional simulation gates. The boolean reports
/// whether the `nnz(A) >= sqrt(m + n)` assumption held (the count is
/// produced either way).
pub fn total_gate_count(p: &LoProblem, r1: f64, epsilon: f64, delta: f64, ell: u32) -> (f64, bool) {
    let nbar = p.nbar();
    let gc = oracle_gate_count(p, ell);
    let total =
        query_count(r1, epsilon, nbar, delta) * gc.gates + additional_gates(r1, epsilon, nbar, delta);
    let ok = (p.nnz_a as f64) >= ((p.m() + p.n()) as f64).sqrt();
    (total, ok)
}

/// Full constants-mode resource report for an instance.
pub fn resource_report(
    p: &LoProblem,
    r1: f64,
    epsilon: f64,
    delta: f64,
    gamma: f64,
    k_const: f64,
    eta: f64,
    ell: u32,
) -> ResourceReport {
    let nbar = p.nbar();
    let gc = oracle_gate_count(p, ell);
    let queries = query_count(r1, epsilon, nbar, delta);
    let (gates_total, nnz_assumption_ok) = total_gate_count(p, r1, epsilon, delta, ell);
    ResourceReport {
        queries,
        gates_oracle: gc.gates,
        gates_total,
        vnorm: vnorm_bound(k_const, gamma, delta, r1, nbar, epsilon, eta),
        lipschitz: lipschitz_bound(k_const, gamma, delta, r1, nbar, epsilon),
        multipliers: gc.multipliers,
        adders: gc.adders,
        s_sum_adders: gc.s_sum_adders,
        mu_queries: gc.mu_queries,
        nnz_assumption_ok,
        m: p.m(),
        n: p.n(),
        nnz_a: p.nnz_a,
        r1,
        epsilon,
        delta,
        gamma,
        k_const,
        ell,
    }
}

/// Comparator row: dense-solver time `(m + n)^omega`.
pub fn ipm_comparator(m: usize, n: usize) -> f64 {
    ((m + n) as f64).powf(OMEGA)
}

/// Comparator row:
/// `sqrt(m+n) R1^2.5 eps^-2.5 + R1^3 eps^-3`.
pub fn qmmwu_comparator(m: usize, n: usize, r1: f64, epsilon: f64) -> f64 {
    ((m + n) as f64).sqrt() * r1.powf(2.5) * epsilon.powf(-2.5) + r1.powi(3) * epsilon.powi(-3)
}

/// One crossover-table row in constants-mode.
#[derive(Debug, Clone)]
pub struct CrossoverRow {
    pub n: usize,
    pub nnz: usize,
    pub r1_over_eps: f64,
    pub qcpm_gates: f64,
    pub ipm: f64,
    pub qmmwu: f64,
}

/// Constants-mode crossover table over problem size, density, and
/// precision ratio (square instances, `ell = 64`).
pub fn crossover_table(
    sizes: &[usize],
    densities: &[f64],
    ratios: &[f64],
    delta: f64,
) -> Vec<CrossoverRow> {
    let mut rows = Vec::new();
    for &n in sizes {
        for &dens in densities {
            let nnz = ((n * n) as f64 * dens).round().max(1.0) as usize;
            for &ratio in ratios {
                let (r1, eps) = (ratio, 1.0);
                let nbar = 2 * n + 2;
                // gate count with the embedded-row tally approximated by
                // nnz-based accounting for synthetic sizes
                let multipliers = 1 + nbar + 2 * nnz + 4 * n + 2;
                let ell: f64 = 64.0;
                let gates = multipliers as f64 * ell.powf(3.0_f64.log2()) + (2 * nbar) as f64 * ell;
                let q = query_count(r1, eps, nbar, delta);
                rows.push(CrossoverRow {
                    n,
                    nnz,
                    r1_over_eps: ratio,
                    qcpm_gates: q * gates + additional_gates(r1, eps, nbar, delta),
                    ipm: ipm_comparator(n, n),
                    qmmwu: qmmwu_comparator(n, n, r1, eps),
                });
            }
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lo::Normalization;
    use crate::schedule::eta_choice;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};

    fn unit_fixture() -> LoProblem {
        LoProblem::new(
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DVector::from_vec(vec![1.0]),
            DVector::from_vec(vec![1.0]),
            Normalization::Strict,
        )
        .unwrap()
    }

    #[test]
    fn multiplier_tally_on_fixture() {
        // the embedded matrix has 12 off-diagonal nonzeros: 1 + 4 + 12 = 17
        let gc = oracle_gate_count(&unit_fixture(), 16);
        assert_eq!(gc.multipliers, 17);
        assert_eq!(gc.adders, 8);
        assert_eq!(gc.s_sum_adders, 12);
        assert_eq!(gc.mu_queries, 4);
    }

    #[test]
    fn ell_doubling_triples_multiplier_term() {
        let p = unit_fixture();
        let g1 = oracle_gate_count(&p, 16);
        let g2 = oracle_gate_count(&p, 32);
        let mult_term = |g: &OracleGateCount, ell: f64| g.gates - g.adders as f64 * ell;
        let ratio = mult_term(&g2, 32.0) / mult_term(&g1, 16.0);
        assert_abs_diff_eq!(ratio, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn query_count_scales_linearly_in_r1_over_eps() {
        let base = query_count(4.0, 0.25, 4, 0.1);
        let scaled = query_count(40.0, 0.25, 4, 0.1);
        assert_abs_diff_eq!(scaled / base, 10.0, epsilon = 1e-12);
        let scaled = query_count(4.0, 0.025, 4, 0.1);
        assert_abs_diff_eq!(scaled / base, 10.0, epsilon = 1e-12);
    }

    #[test]
    fn query_count_sqrt_growth_in_dimension() {
        let a = query_count(1.0, 0.5, 10_000, 0.1);
        let b = query_count(1.0, 0.5, 40_000, 0.1);
        let ratio = b / a;
        assert!((1.9..=2.6).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn vnorm_fixture_two_routes() {
        let eta = eta_choice(0.1, 1.0).unwrap();
        let v = vnorm_bound(1.0, 0.5, 0.1, 4.0, 4, 0.25, eta);
        // second route: expand theta and cancel gamma^2
        let denom = 2.0 * 4.0 * (1.0 + 0.75 * 20.0_f64.ln());
        let route2 = denom / (0.25 * eta);
        assert_abs_diff_eq!(v, route2, epsilon = 1e-9);
        assert_abs_diff_eq!(v, 455.281939023142, epsilon = 1e-6);
    }

    #[test]
    fn vnorm_monotonicities() {
        let eta = eta_choice(0.1, 1.0).unwrap();
        let base = vnorm_bound(1.0, 0.5, 0.1, 4.0, 4, 0.25, eta);
        // doubling R1 doubles the bound
        assert_abs_diff_eq!(
            vnorm_bound(1.0, 0.5, 0.1, 8.0, 4, 0.25, eta) / base,
            2.0,
            epsilon = 1e-12
        );
        // halving eps doubles the bound
        assert_abs_diff_eq!(
            vnorm_bound(1.0, 0.5, 0.1, 4.0, 4, 0.125, eta) / base,
            2.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn total_gates_monotone_and_flagged() {
        let p = unit_fixture();
        let eta = eta_choice(0.1, 1.0).unwrap();
        let r = resource_report(&p, 4.0, 0.25, 0.1, 0.5, 1.0, eta, 16);
        // nnz(A) = 1 < sqrt(m + n): flagged, but still computed
        assert!(!r.nnz_assumption_ok);
        assert!(r.gates_total.is_finite() && r.gates_total > 0.0);
        // eps -> eps/10 multiplies the query part by exactly 10
        let r10 = resource_report(&p, 4.0, 0.025, 0.1, 0.5, 1.0, eta, 16);
        assert_abs_diff_eq!(r10.queries / r.queries, 10.0, epsilon = 1e-12);
        assert!(r10.gates_total > r.gates_total);

        // dense 2x2 instance has more nonzeros and costs more
        let p2 = LoProblem::new(
            DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, -0.5]),
            DVector::from_vec(vec![0.5, 0.1]),
            DVector::from_vec(vec![0.3, 0.4]),
            Normalization::Strict,
        )
        .unwrap();
        let sparse2 = LoProblem::new(
            DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]),
            DVector::from_vec(vec![0.5, 0.1]),
            DVector::from_vec(vec![0.3, 0.4]),
            Normalization::Strict,
        )
        .unwrap();
        let gd = oracle_gate_count(&p2, 16);
        let gs = oracle_gate_count(&sparse2, 16);
        assert!(gd.multipliers > gs.multipliers);
    }

    #[test]
    fn monotonicity_sweeps() {
        let mut state = 0x9e3779b97f4a7c15_u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            let r1 = 0.5 + 8.0 * next();
            let eps = 0.01 + 0.5 * next();
            let delta = 0.01 + 0.5 * next();
            let nbar = 4 + (next() * 100.0) as usize;
            let q = query_count(r1, eps, nbar, delta);
            assert!(query_count(r1 * 1.5, eps, nbar, delta) > q);
            assert!(query_count(r1, eps * 0.5, nbar, delta) > q);
            assert!(query_count(r1, eps, nbar * 2, delta) > q);
            assert!(query_count(r1, eps, nbar, delta * 0.5) > q);
        }
    }

    #[test]
    fn crossover_rows_shape() {
        let rows = crossover_table(&[100, 1000], &[0.01, 0.1], &[1.0, 10.0], 0.1);
        assert_eq!(rows.len(), 8);
        assert!(rows.iter().all(|r| r.qcpm_gates > 0.0 && r.ipm > 0.0 && r.qmmwu > 0.0));
    }
}
