//! End-to-end orchestration of one annealing run: embed, trace, schedule,
//! grid sizing, evolution, measurement, and extraction.

use nalgebra::DVector;

use crate::error::Result;
use crate::hamiltonian::PotentialField;
use crate::lo::{ExtractedSolution, SelfDualEmbedding, DEFAULT_BETA_MIN};
use crate::path::{self, PathTrace};
use crate::qsim::{self, Grid, PropagatorConfig, PropagatorRun, WaveFunction};
use crate::schedule::{AdiabaticSchedule, HMode};

#[derive(Debug, Clone)]
pub struct SimulateConfig {
    pub epsilon: f64,
    pub gamma: f64,
    pub delta: f64,
    pub r1: f64,
    pub grid_n: usize,
    pub seed: u64,
    pub h_mode: HMode,
    pub c_adiabatic: f64,
    pub margin_sigmas: f64,
    /// Explicit Strang step count; `None` uses the phase-budget rule.
    pub steps: Option<usize>,
    pub memory_budget: u128,
    pub checkpoints: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            epsilon: 0.25,
            gamma: 0.25,
            delta: 0.2,
            r1: 4.0,
            grid_n: 24,
            seed: 1,
            h_mode: HMode::Algorithm1,
            c_adiabatic: 1.0,
            margin_sigmas: qsim::DEFAULT_MARGIN_SIGMAS,
            steps: None,
            memory_budget: qsim::DEFAULT_MEMORY_BUDGET,
            checkpoints: qsim::DEFAULT_CHECKPOINTS,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SampleOutcome {
    pub z: DVector<f64>,
    pub d2: f64,
    pub in_neighborhood: bool,
}

#[derive(Debug)]
pub struct SimulationOutcome {
    pub schedule: AdiabaticSchedule,
    pub trace: PathTrace,
    pub grid: Grid,
    pub run: PropagatorRun,
    pub final_state: WaveFunction,
    /// `ceil(log2(1/delta))` draws at consecutive seeds.
    pub samples: Vec<SampleOutcome>,
    /// Index of the best sample by proximity.
    pub best: usize,
    /// Fraction of the drawn samples inside the neighborhood.
    pub single_shot_rate: f64,
    pub queries: u64,
    pub empirical_r1: f64,
    pub empirical_r_inf: f64,
}

/// Classify one measured grid point at the target `mu = epsilon`.
pub fn classify_sample(
    emb: &SelfDualEmbedding,
    z: &DVector<f64>,
    epsilon: f64,
    gamma: f64,
) -> Result<SampleOutcome> {
    let s = emb.slack(z)?;
    let d2 = path::proximity(z, &s, epsilon);
    let interior = z.iter().all(|v| *v > 0.0) && s.iter().all(|v| *v > 0.0);
    Ok(SampleOutcome {
        z: z.clone(),
        d2,
        in_neighborhood: interior && d2 <= gamma * epsilon,
    })
}

/// Run the full pipeline on an embedded instance.
pub fn simulate(emb: &SelfDualEmbedding, cfg: &SimulateConfig) -> Result<SimulationOutcome> {
    let nbar = emb.nbar();
    let schedule = AdiabaticSchedule::new(
        cfg.epsilon,
        cfg.gamma,
        cfg.delta,
        cfg.r1,
        nbar,
        cfg.c_adiabatic,
        cfg.h_mode,
    )?;
    let trace = path::trace_path(emb, cfg.epsilon, cfg.gamma, path::default_shrink(nbar))?;
    let grid = qsim::build_grid(
        emb,
        &trace,
        &schedule,
        cfg.grid_n,
        cfg.margin_sigmas,
        cfg.memory_budget,
    )?;
    let field = PotentialField::new(emb.clone());
    let prop_cfg = PropagatorConfig {
        steps: cfg.steps,
        checkpoints: cfg.checkpoints,
        ..Default::default()
    };
    let (final_state, run) = qsim::evolve(&field, &schedule, &trace, &grid, &prop_cfg)?;

    let n_samples = ((1.0 / cfg.delta).log2().ceil() as usize).max(1);
    let mut samples = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let z = final_state.sample_seeded(cfg.seed.wrapping_add(i as u64));
        samples.push(classify_sample(emb, &z, cfg.epsilon, cfg.gamma)?);
    }
    let best = samples
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.d2.partial_cmp(&b.1.d2).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    let hits = samples.iter().filter(|s| s.in_neighborhood).count();
    Ok(SimulationOutcome {
        queries: field.evals(),
        single_shot_rate: hits as f64 / n_samples as f64,
        empirical_r1: trace.empirical_r1(),
        empirical_r_inf: trace.empirical_r_inf(),
        schedule,
        trace,
        grid,
        run,
        final_state,
        samples,
        best,
    })
}

/// Single-shot in-neighborhood rate over a seed range, reusing the final
/// state (the evolution itself is deterministic; seeds only steer
/// measurement).
pub fn in_neighborhood_rate(
    emb: &SelfDualEmbedding,
    outcome: &SimulationOutcome,
    epsilon: f64,
    gamma: f64,
    seeds: std::ops::Range<u64>,
) -> Result<f64> {
    let total = seeds.end - seeds.start;
    let mut hits = 0u64;
    for seed in seeds {
        let z = outcome.final_state.sample_seeded(seed);
        if classify_sample(emb, &z, epsilon, gamma)?.in_neighborhood {
            hits += 1;
        }
    }
    Ok(hits as f64 / total as f64)
}

/// Extraction of the best sample back to the original LP pair.
pub fn extract_best(
    emb: &SelfDualEmbedding,
    outcome: &SimulationOutcome,
) -> Result<ExtractedSolution> {
    emb.extract_solution(&outcome.samples[outcome.best].z, DEFAULT_BETA_MIN)
}
