//! Batch front end: problem ingestion, run orchestration, and report
//! emission.
//!
//! Exit codes: 0 success, 1 validation failure, 2 input error, 3 resource
//! budget exceeded.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use qcpm::error::Error;
use qcpm::estimator;
use qcpm::lo::{LoProblem, Normalization, SelfDualEmbedding, DEFAULT_BETA_MIN};
use qcpm::path::{self, default_shrink};
use qcpm::pipeline::{self, SimulateConfig};
use qcpm::report::{self, RunMeta};
use qcpm::schedule::HMode;
use qcpm::validate;

#[derive(Parser)]
#[command(name = "qcpm", version, about = "central-path annealing emulator for linear optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Problem file (JSON with fields m, n, A, b, c)
    #[arg(long)]
    problem: PathBuf,
    /// Optimality tolerance in (0, 1); also the final path parameter
    #[arg(long, default_value_t = 0.25)]
    epsilon: f64,
    /// Neighborhood opening in (0, 1)
    #[arg(long, default_value_t = 0.25)]
    gamma: f64,
    /// Failure rate in (0, 1)
    #[arg(long, default_value_t = 0.2)]
    delta: f64,
    /// l1 bound on the solution size ("auto" = estimate from the trace)
    #[arg(long, default_value = "auto")]
    r1: String,
    /// l-infinity component bound ("auto" = estimate from the trace)
    #[arg(long, default_value = "auto")]
    rinf: String,
    /// Grid points per axis (even, >= 8)
    #[arg(long = "grid-n", default_value_t = 24)]
    grid_n: usize,
    /// Measurement seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Width-formula mode: algorithm1 | proposition2
    #[arg(long = "h-mode", default_value = "algorithm1")]
    h_mode: String,
    /// Adiabatic constant C in eta = 1/ln(8 C / delta)
    #[arg(long = "c-adiabatic", default_value_t = 1.0)]
    c_adiabatic: f64,
    /// Potential-bound constant K
    #[arg(long = "k-const", default_value_t = 1.0)]
    k_const: f64,
    /// Grid clearance around the traced path, in harmonic widths
    #[arg(long = "margin-sigmas", default_value_t = 4.0)]
    margin_sigmas: f64,
    /// Output directory
    #[arg(long, default_value = "qcpm-out")]
    out: PathBuf,
    /// Normalization handling: strict | rescale
    #[arg(long, default_value = "strict")]
    normalization: String,
}

#[derive(Subcommand)]
enum Command {
    /// Build the self-dual embedding and dump it with an invariant report
    Embed(CommonOpts),
    /// Trace the central path to epsilon and extract the solution
    Trace(CommonOpts),
    /// Full annealing pipeline: trace, evolve, sample, extract
    Simulate(CommonOpts),
    /// Run the oracle/invariant suite and print a pass/fail table
    Validate(CommonOpts),
    /// Constants-mode resource estimates and crossover table
    Estimate(CommonOpts),
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::MemoryBudget { .. } => 3,
        Error::Parse(_)
        | Error::Dimension(_)
        | Error::NonFinite(_)
        | Error::NormViolation(_)
        | Error::InvalidParameter(_)
        | Error::Io(_) => 2,
        _ => 1,
    }
}

fn parse_mode(s: &str) -> Result<HMode, Error> {
    match s {
        "algorithm1" => Ok(HMode::Algorithm1),
        "proposition2" => Ok(HMode::Proposition2),
        other => Err(Error::InvalidParameter(format!("unknown h-mode '{other}'"))),
    }
}

fn parse_norm(s: &str) -> Result<Normalization, Error> {
    match s {
        "strict" => Ok(Normalization::Strict),
        "rescale" => Ok(Normalization::Rescale),
        other => Err(Error::InvalidParameter(format!(
            "unknown normalization '{other}'"
        ))),
    }
}

fn parse_bound(s: &str, auto: f64) -> Result<f64, Error> {
    if s == "auto" {
        return Ok(auto);
    }
    s.parse::<f64>()
        .map_err(|_| Error::InvalidParameter(format!("bad bound '{s}'")))
        .and_then(|v| {
            if v > 0.0 {
                Ok(v)
            } else {
                Err(Error::InvalidParameter("bounds must be positive".into()))
            }
        })
}

fn threads_cap() -> usize {
    std::env::var("QCPM_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(1)
}

fn meta_from(opts: &CommonOpts, command: &str, r1: f64, r_inf: Option<f64>) -> RunMeta {
    RunMeta {
        command: command.into(),
        epsilon: opts.epsilon,
        gamma: opts.gamma,
        delta: opts.delta,
        r1,
        r_inf,
        grid_n: opts.grid_n,
        seed: opts.seed,
        h_mode: opts.h_mode.clone(),
        c_adiabatic: opts.c_adiabatic,
        k_const: opts.k_const,
        log_base: "natural",
        constants_mode: true,
        threads: threads_cap().max(1),
    }
}

fn load(opts: &CommonOpts) -> Result<LoProblem, Error> {
    let mode = parse_norm(&opts.normalization)?;
    if !opts.problem.exists() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("problem file {} not found", opts.problem.display()),
        )));
    }
    LoProblem::from_path(&opts.problem, mode)
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Embed(opts) => cmd_embed(&opts),
        Command::Trace(opts) => cmd_trace(&opts),
        Command::Simulate(opts) => cmd_simulate(&opts),
        Command::Validate(opts) => cmd_validate(&opts),
        Command::Estimate(opts) => cmd_estimate(&opts),
    }
}

fn cmd_embed(opts: &CommonOpts) -> Result<u8, Error> {
    let p = load(opts)?;
    let emb = SelfDualEmbedding::embed(&p);
    std::fs::create_dir_all(&opts.out)?;
    let meta = meta_from(opts, "embed", 0.0, None);
    let nbar = emb.nbar();
    let e = qcpm::nalgebra::DVector::from_element(nbar, 1.0);
    let unit_slack_dev = (emb.slack(&e)? - &e).norm();
    let m_rows: Vec<Vec<f64>> = (0..nbar)
        .map(|i| (0..nbar).map(|j| emb.matrix()[(i, j)]).collect())
        .collect();
    let summary = json!({
        "meta": serde_json::to_value(&meta).unwrap(),
        "m": p.m(),
        "n": p.n(),
        "nnz_a": p.nnz_a,
        "nbar": nbar,
        "M": m_rows,
        "q": emb.q().iter().copied().collect::<Vec<f64>>(),
        "r": emb.r().iter().copied().collect::<Vec<f64>>(),
        "invariants": {
            "skew_exact": true,
            "unit_slack_deviation": unit_slack_dev,
            "max_row_norm": emb.max_row_norm(),
            "rescale_factors": p.scales,
        },
        "mode_flags": report::mode_flags(&meta),
    });
    report::write_summary(&opts.out.join("embedding.json"), &summary)?;
    println!("embed: nbar = {nbar}, max row norm {:.4}", emb.max_row_norm());
    Ok(0)
}

fn cmd_trace(opts: &CommonOpts) -> Result<u8, Error> {
    let p = load(opts)?;
    let emb = SelfDualEmbedding::embed(&p);
    let trace = path::trace_path(&emb, opts.epsilon, opts.gamma, default_shrink(emb.nbar()))?;
    std::fs::create_dir_all(&opts.out)?;
    let r1 = parse_bound(&opts.r1, trace.empirical_r1())?;
    let r_inf = parse_bound(&opts.rinf, trace.empirical_r_inf())?;
    let meta = meta_from(opts, "trace", r1, Some(r_inf));
    report::trace_csv(&opts.out.join("trace.csv"), &meta, &trace)?;
    let last = trace.last();
    let sigma_check = path::sigma_min_check(&emb, last, r_inf)?;
    // smallest max(z_i, s_i) at the end: strict complementarity indicator
    let strict_complementarity = last
        .z
        .iter()
        .zip(last.s.iter())
        .map(|(z, s)| z.max(*s))
        .fold(f64::INFINITY, f64::min);
    let extraction = emb.extract_solution(&last.z, DEFAULT_BETA_MIN);
    let ext_json = match &extraction {
        Ok(sol) => json!({
            "x": sol.x.iter().copied().collect::<Vec<f64>>(),
            "y": sol.y.iter().copied().collect::<Vec<f64>>(),
            "beta": sol.beta,
            "vartheta": sol.vartheta,
            "duality_gap": sol.duality_gap,
            "primal_residual_max": sol.primal_residuals.max(),
            "dual_residual_max": sol.dual_residuals.max(),
        }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let summary = json!({
        "meta": serde_json::to_value(&meta).unwrap(),
        "points": trace.points.len(),
        "mu_final": last.mu,
        "d2_final": last.d2(),
        "empirical_r1": trace.empirical_r1(),
        "empirical_r_inf": trace.empirical_r_inf(),
        "sigma_min_check": {
            "sigma_min": sigma_check.sigma_min,
            "bound": sigma_check.bound,
            "holds": sigma_check.holds,
        },
        "strict_complementarity_min": strict_complementarity,
        "extraction": ext_json,
        "mode_flags": report::mode_flags(&meta),
    });
    report::write_summary(&opts.out.join("trace_summary.json"), &summary)?;
    println!(
        "trace: {} points to mu = {:.3e}, d2 = {:.3e}",
        trace.points.len(),
        last.mu,
        last.d2()
    );
    Ok(0)
}

fn cmd_simulate(opts: &CommonOpts) -> Result<u8, Error> {
    let p = load(opts)?;
    let emb = SelfDualEmbedding::embed(&p);
    // a cheap pre-trace supplies the empirical bounds for "auto"
    let pre = path::trace_path(&emb, opts.epsilon, opts.gamma, default_shrink(emb.nbar()))?;
    let r1 = parse_bound(&opts.r1, pre.empirical_r1())?;
    let cfg = SimulateConfig {
        epsilon: opts.epsilon,
        gamma: opts.gamma,
        delta: opts.delta,
        r1,
        grid_n: opts.grid_n,
        seed: opts.seed,
        h_mode: parse_mode(&opts.h_mode)?,
        c_adiabatic: opts.c_adiabatic,
        margin_sigmas: opts.margin_sigmas,
        ..Default::default()
    };
    let outcome = pipeline::simulate(&emb, &cfg)?;
    std::fs::create_dir_all(&opts.out)?;
    let meta = meta_from(opts, "simulate", r1, Some(outcome.empirical_r_inf));
    report::trace_csv(&opts.out.join("trace.csv"), &meta, &outcome.trace)?;
    report::diagnostics_csv(&opts.out.join("diagnostics.csv"), &meta, &outcome.run.diagnostics)?;
    report::dump_state(&opts.out.join("state.bin"), &outcome.grid, &outcome.final_state)?;

    let best = &outcome.samples[outcome.best];
    let verdict = best.d2 <= opts.gamma * opts.epsilon;
    let extraction = pipeline::extract_best(&emb, &outcome);
    let ext_json = match &extraction {
        Ok(sol) => json!({
            "x": sol.x.iter().copied().collect::<Vec<f64>>(),
            "y": sol.y.iter().copied().collect::<Vec<f64>>(),
            "beta": sol.beta,
            "duality_gap": sol.duality_gap,
            "primal_residual_max": sol.primal_residuals.max(),
            "dual_residual_max": sol.dual_residuals.max(),
        }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    // harmonic ground-state model at the final path parameter
    let hf = outcome.schedule.h_at_mu(opts.epsilon);
    let model = qcpm::hamiltonian::build_harmonic(&emb, opts.epsilon, hf)?;
    let summary = json!({
        "meta": serde_json::to_value(&meta).unwrap(),
        "grid": { "n": outcome.grid.points_per_axis(), "extent": outcome.grid.extent() },
        "schedule": {
            "eta": outcome.schedule.eta,
            "h0": outcome.schedule.h_at_mu(1.0),
            "h_final": hf,
            "c_e": outcome.schedule.c_e,
        },
        "harmonic_model": {
            "center": model.center.z.iter().copied().collect::<Vec<f64>>(),
            "eigenvalues": model.eigenvalues.iter().copied().collect::<Vec<f64>>(),
            "gap": model.gap,
            "h": model.h,
        },
        "evolution": { "steps": outcome.run.steps, "dt": outcome.run.dt,
                       "queries": outcome.queries, "warnings": outcome.run.warnings },
        "samples": outcome.samples.iter().map(|s| json!({
            "z": s.z.iter().copied().collect::<Vec<f64>>(),
            "d2": s.d2,
            "in_neighborhood": s.in_neighborhood,
        })).collect::<Vec<_>>(),
        "best_sample_d2": best.d2,
        "neighborhood_threshold": opts.gamma * opts.epsilon,
        "in_neighborhood_verdict": verdict,
        "single_shot_rate": outcome.single_shot_rate,
        "extraction": ext_json,
        "empirical_r1": outcome.empirical_r1,
        "empirical_r_inf": outcome.empirical_r_inf,
        "mode_flags": report::mode_flags(&meta),
    });
    report::write_summary(&opts.out.join("summary.json"), &summary)?;
    println!(
        "simulate: best d2 = {:.4e} (threshold {:.4e}), verdict {}",
        best.d2,
        opts.gamma * opts.epsilon,
        if verdict { "in-neighborhood" } else { "outside" }
    );
    Ok(if verdict { 0 } else { 1 })
}

fn cmd_validate(opts: &CommonOpts) -> Result<u8, Error> {
    let p = load(opts)?;
    let checks = validate::run_suite(&p)?;
    std::fs::create_dir_all(&opts.out)?;
    let meta = meta_from(opts, "validate", 0.0, None);
    let columns: Vec<String> = ["check", "pass", "detail"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| {
            vec![
                c.name.clone(),
                c.pass.to_string(),
                c.detail.replace(',', ";"),
            ]
        })
        .collect();
    report::write_csv(&opts.out.join("validation.csv"), &meta.header_json(), &columns, &rows)?;
    let mut all_ok = true;
    for c in &checks {
        println!("{} {} {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        all_ok &= c.pass;
    }
    Ok(if all_ok { 0 } else { 1 })
}

fn cmd_estimate(opts: &CommonOpts) -> Result<u8, Error> {
    let p = load(opts)?;
    let emb = SelfDualEmbedding::embed(&p);
    let trace = path::trace_path(&emb, opts.epsilon, opts.gamma, default_shrink(emb.nbar()))?;
    let r1 = parse_bound(&opts.r1, trace.empirical_r1())?;
    let eta = qcpm::schedule::eta_choice(opts.delta, opts.c_adiabatic)?;
    let rep = estimator::resource_report(
        &p,
        r1,
        opts.epsilon,
        opts.delta,
        opts.gamma,
        opts.k_const,
        eta,
        64,
    );
    std::fs::create_dir_all(&opts.out)?;
    let meta = meta_from(opts, "estimate", r1, None);
    report::estimate_csv(&opts.out.join("estimate.csv"), &meta, &rep)?;
    let rows = estimator::crossover_table(
        &[100, 1_000, 10_000, 100_000],
        &[0.001, 0.01, 0.1],
        &[1.0, 10.0, 100.0],
        opts.delta,
    );
    report::crossover_csv(&opts.out.join("crossover.csv"), &meta, &rows)?;
    if !rep.nnz_assumption_ok {
        println!(
            "warning: nnz(A) = {} < sqrt(m + n); count computed anyway",
            rep.nnz_a
        );
    }
    println!(
        "estimate: queries {:.3e}, oracle gates {:.3e}, total gates {:.3e}",
        rep.queries, rep.gates_oracle, rep.gates_total
    );
    println!(
        "estimate: embedded row-nonzero total {} = {:.2} x nnz(A)",
        rep.s_sum_adders,
        rep.s_sum_adders as f64 / rep.nnz_a as f64
    );
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
