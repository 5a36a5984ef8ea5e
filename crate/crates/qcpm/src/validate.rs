//! Programmatic invariant suite behind the `validate` subcommand: each
//! check re-derives a contract of the construction (embedding algebra,
//! path tracking, spectral bounds, schedule shape, estimator arithmetic,
//! oracle agreement) on the loaded instance and reports pass/fail.

use nalgebra::DVector;

use crate::error::Result;
use crate::estimator;
use crate::hamiltonian::{build_harmonic, PotentialField};
use crate::lo::{LoProblem, SelfDualEmbedding, DEFAULT_BETA_MIN};
use crate::oracle;
use crate::path;
use crate::qsim::{self, Grid};
use crate::schedule::{AdiabaticSchedule, HMode};

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &str, pass: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name: name.into(), pass, detail }
}

/// Run the full validation suite on one problem instance.
pub fn run_suite(p: &LoProblem) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    let emb = SelfDualEmbedding::embed(p);
    let nbar = emb.nbar();
    let e = DVector::from_element(nbar, 1.0);

    // embedding algebra
    let skew = (0..nbar).all(|i| (0..nbar).all(|j| emb.matrix()[(i, j)] == -emb.matrix()[(j, i)]));
    out.push(check("embedding.skew_exact", skew, "M' == -M bitwise".into()));
    let slack_e = emb.slack(&e)?;
    let dev = (&slack_e - &e).norm();
    out.push(check(
        "embedding.unit_slack",
        dev <= 1e-12,
        format!("|Me + q - e| = {dev:.3e}"),
    ));
    let q_ok = (0..nbar - 1).all(|i| emb.q()[i] == 0.0) && emb.q()[nbar - 1] == nbar as f64;
    out.push(check("embedding.q_shape", q_ok, "q = (0, ..., 0, nbar)".into()));
    let row = emb.max_row_norm();
    out.push(check(
        "embedding.row_bound",
        row <= 3.0,
        format!("max row norm {row:.4} <= 3"),
    ));

    // central path: trace, neighborhood, Hessian identity, spectral bounds
    let trace = path::trace_path(&emb, 1e-4, 0.25, path::default_shrink(nbar))?;
    let d2_ok = trace
        .points
        .iter()
        .all(|pt| pt.d2() <= 0.25 * pt.mu);
    out.push(check(
        "path.neighborhood",
        d2_ok,
        format!("{} points, all d2 <= gamma mu", trace.points.len()),
    ));
    let r_inf = trace.empirical_r_inf();
    let mut lam_ok = true;
    let mut sig_ok = true;
    let mut hess_ok = true;
    for pt in trace.points.iter().step_by(trace.points.len().div_ceil(12)) {
        let h = path::hessian_at(&emb, &pt.z)?;
        let z2 = nalgebra::DMatrix::from_diagonal(&pt.z.map(|v| v * v));
        let s2 = nalgebra::DMatrix::from_diagonal(&pt.s.map(|v| v * v));
        let ident = emb.matrix().transpose() * z2 * emb.matrix() + s2;
        hess_ok &= (&h - ident).norm() <= 1e-10;
        let lmin = h.symmetric_eigen().eigenvalues.min();
        lam_ok &= lmin >= (pt.mu / r_inf).powi(2) - 1e-12;
        sig_ok &= path::sigma_min_check(&emb, pt, r_inf)?.holds;
    }
    out.push(check(
        "path.hessian_identity",
        hess_ok,
        "H = M'Z^2 M + S^2 at centers".into(),
    ));
    out.push(check(
        "path.lambda_min_bound",
        lam_ok,
        format!("lambda_min >= (mu/R_inf)^2 with R_inf = {r_inf:.3}"),
    ));
    out.push(check("path.sigma_min_bound", sig_ok, "SVD check".into()));

    // oracle cross-checks
    let hp = oracle::high_precision_trace(&emb, 1e-3)?;
    let prod = path::trace_path(&emb, 1e-3, 0.25, path::default_shrink(nbar))?;
    let devp = (&hp.last().z - &prod.last().z).norm();
    out.push(check(
        "oracle.trace_agreement",
        devp <= 1e-8,
        format!("terminal centers differ by {devp:.3e}"),
    ));
    if p.m() <= 3 && p.n() <= 3 {
        let lp = oracle::vertex_enumeration_lp(p)?;
        match lp.status {
            oracle::LpStatus::Optimal => {
                let sol = emb.extract_solution(&hp.last().z, DEFAULT_BETA_MIN);
                match sol {
                    Ok(sol) => {
                        let gap = sol.duality_gap;
                        out.push(check(
                            "oracle.extraction_gap",
                            gap >= -1e-9 && gap <= 10.0 * 1e-3 * nbar as f64,
                            format!("terminal gap {gap:.3e}"),
                        ));
                    }
                    Err(e) => out.push(check(
                        "oracle.extraction_gap",
                        false,
                        format!("extraction failed: {e}"),
                    )),
                }
            }
            s => out.push(check(
                "oracle.vertex_status",
                true,
                format!("vertex oracle reports {s:?}; extraction comparison skipped"),
            )),
        }
    }

    // schedule contracts
    let sched = AdiabaticSchedule::new(0.25, 0.25, 0.2, 4.0, nbar, 1.0, HMode::Algorithm1)?;
    let g_ok = sched.g(0.0)? == 0.0
        && sched.g(1.0)? == 1.0
        && (sched.g(0.5)? - 0.5).abs() <= 1e-10;
    out.push(check("schedule.gauge", g_ok, "g(0), g(1/2), g(1)".into()));
    let step = 1e-3;
    let flat = [0.0, 1.0].iter().all(|&t0| {
        let d1 = (sched.mu_of_t(t0 + step) - sched.mu_of_t(t0 - step)) / (2.0 * step);
        d1.abs() <= 1e-6
    });
    out.push(check("schedule.endpoint_flat", flat, "mu'(0), mu'(1)".into()));

    // harmonic model against the dense eigensolver on the scalar system
    let sys = oracle::SyntheticSystem::one_dim();
    let semb = sys.embedding();
    let h = 1e-2;
    let model = build_harmonic(&semb, 1.0, h)?;
    let grid = Grid::new(1, 256, 2.0, qsim::DEFAULT_MEMORY_BUDGET)?;
    let field = PotentialField::new(semb.clone());
    let values: Vec<f64> = (0..256)
        .map(|i| {
            let z = DVector::from_vec(vec![grid.axis_coord(i)]);
            field.potential(&z, 1.0).unwrap()
        })
        .collect();
    let gp = oracle::dense_ground_state(&grid, &values, 0.5 * h * h)?;
    let gap_rel = ((gp.energy1 - gp.energy0) - model.gap).abs() / model.gap;
    out.push(check(
        "harmonic.gap_vs_dense",
        gap_rel <= 0.05,
        format!("relative gap error {gap_rel:.3e}"),
    ));

    // estimator identities
    let gc = estimator::oracle_gate_count(p, 16);
    let expect = 1 + nbar + gc.s_sum_adders;
    out.push(check(
        "estimator.multiplier_tally",
        gc.multipliers == expect,
        format!("{} == 1 + nbar + sum row nnz", gc.multipliers),
    ));
    let q1 = estimator::query_count(4.0, 0.25, nbar, 0.1);
    let q10 = estimator::query_count(40.0, 0.25, nbar, 0.1);
    out.push(check(
        "estimator.linear_scaling",
        ((q10 / q1) - 10.0).abs() <= 1e-12,
        "R1 x10 scales queries x10".into(),
    ));

    Ok(out)
}
