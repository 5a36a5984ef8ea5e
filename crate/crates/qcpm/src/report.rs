//! Report emission: CSV files with a one-line JSON header comment, the
//! JSON run summary, and the binary state dump.
//!
//! All emitters are deterministic: no timestamps, fixed field order,
//! shortest round-trip float formatting.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use crate::error::Result;
use crate::estimator::{CrossoverRow, ResourceReport};
use crate::path::PathTrace;
use crate::qsim::{Checkpoint, Grid, WaveFunction};

/// Configuration echo placed in every report header.
#[derive(Debug, Clone, Serialize)]
pub struct RunMeta {
    pub command: String,
    pub epsilon: f64,
    pub gamma: f64,
    pub delta: f64,
    pub r1: f64,
    pub r_inf: Option<f64>,
    pub grid_n: usize,
    pub seed: u64,
    pub h_mode: String,
    pub c_adiabatic: f64,
    pub k_const: f64,
    pub log_base: &'static str,
    pub constants_mode: bool,
    pub threads: usize,
}

impl RunMeta {
    pub fn header_json(&self) -> String {
        serde_json::to_string(self).expect("meta serializes")
    }
}

fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "nan".into()
    }
}

/// Write a CSV body: one `# {json}` comment line, a header row, then rows.
pub fn write_csv(
    path: &Path,
    header_json: &str,
    columns: &[String],
    rows: &[Vec<String>],
) -> Result<()> {
    let mut out = std::fs::File::create(path)?;
    writeln!(out, "# {header_json}")?;
    writeln!(out, "{}", columns.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Path trace CSV: `mu, z_1..z_nbar, s_1..s_nbar, d2, newton_iters`.
pub fn trace_csv(path: &Path, meta: &RunMeta, trace: &PathTrace) -> Result<()> {
    let nbar = trace.points.first().map_or(0, |p| p.z.len());
    let mut columns = vec!["mu".to_string()];
    columns.extend((1..=nbar).map(|i| format!("z_{i}")));
    columns.extend((1..=nbar).map(|i| format!("s_{i}")));
    columns.push("d2".into());
    columns.push("newton_iters".into());
    let rows: Vec<Vec<String>> = trace
        .points
        .iter()
        .zip(trace.newton_iters.iter())
        .zip(trace.residuals.iter())
        .map(|((p, iters), d2)| {
            let mut row = vec![fmt(p.mu)];
            row.extend(p.z.iter().map(|v| fmt(*v)));
            row.extend(p.s.iter().map(|v| fmt(*v)));
            row.push(fmt(*d2));
            row.push(iters.to_string());
            row
        })
        .collect();
    write_csv(path, &meta.header_json(), &columns, &rows)
}

/// Propagation diagnostics CSV:
/// `t, mu, h, norm, fidelity_to_harmonic, energy`.
pub fn diagnostics_csv(path: &Path, meta: &RunMeta, checkpoints: &[Checkpoint]) -> Result<()> {
    let columns: Vec<String> = ["t", "mu", "h", "norm", "fidelity_to_harmonic", "energy"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = checkpoints
        .iter()
        .map(|c| {
            vec![
                fmt(c.t),
                fmt(c.mu),
                fmt(c.h),
                fmt(c.norm),
                fmt(c.fidelity_to_harmonic),
                fmt(c.energy),
            ]
        })
        .collect();
    write_csv(path, &meta.header_json(), &columns, &rows)
}

/// Resource-report CSV (single row).
pub fn estimate_csv(path: &Path, meta: &RunMeta, r: &ResourceReport) -> Result<()> {
    let columns: Vec<String> = [
        "m", "n", "nnz_a", "r1", "epsilon", "delta", "gamma", "k_const", "ell",
        "queries", "gates_oracle", "gates_total", "vnorm", "lipschitz",
        "multipliers", "adders", "s_sum_adders", "mu_queries", "nnz_assumption_ok",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let row = vec![
        r.m.to_string(),
        r.n.to_string(),
        r.nnz_a.to_string(),
        fmt(r.r1),
        fmt(r.epsilon),
        fmt(r.delta),
        fmt(r.gamma),
        fmt(r.k_const),
        r.ell.to_string(),
        fmt(r.queries),
        fmt(r.gates_oracle),
        fmt(r.gates_total),
        fmt(r.vnorm),
        fmt(r.lipschitz),
        r.multipliers.to_string(),
        r.adders.to_string(),
        r.s_sum_adders.to_string(),
        r.mu_queries.to_string(),
        r.nnz_assumption_ok.to_string(),
    ];
    write_csv(path, &meta.header_json(), &columns, &[row])
}

/// Crossover comparison CSV.
pub fn crossover_csv(path: &Path, meta: &RunMeta, rows: &[CrossoverRow]) -> Result<()> {
    let columns: Vec<String> = ["n", "nnz", "r1_over_eps", "qcpm_gates", "ipm", "qmmwu"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.nnz.to_string(),
                fmt(r.r1_over_eps),
                fmt(r.qcpm_gates),
                fmt(r.ipm),
                fmt(r.qmmwu),
            ]
        })
        .collect();
    write_csv(path, &meta.header_json(), &columns, &body)
}

/// Pretty-printed JSON summary.
pub fn write_summary(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut out = std::fs::File::create(path)?;
    writeln!(out, "{}", serde_json::to_string_pretty(value)?)?;
    Ok(())
}

impl From<serde_json::Error> for crate::error::Error {
    fn from(e: serde_json::Error) -> Self {
        crate::error::Error::Parse(e.to_string())
    }
}

/// Binary state dump: 32-byte header (magic `QCPMPSI1`, nbar and N as
/// little-endian u64, D as little-endian f64), then interleaved
/// `(re, im)` f64 pairs in row-major node order.
pub fn dump_state(path: &Path, grid: &Grid, psi: &WaveFunction) -> Result<()> {
    let mut out = std::fs::File::create(path)?;
    out.write_all(b"QCPMPSI1")?;
    out.write_all(&(grid.dims() as u64).to_le_bytes())?;
    out.write_all(&(grid.points_per_axis() as u64).to_le_bytes())?;
    out.write_all(&grid.extent().to_le_bytes())?;
    let mut buf = Vec::with_capacity(psi.amplitudes().len() * 16);
    for a in psi.amplitudes() {
        buf.extend_from_slice(&a.re.to_le_bytes());
        buf.extend_from_slice(&a.im.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Read back a dumped state (used by tests and downstream tooling).
pub fn load_state(path: &Path, budget: u128) -> Result<(Grid, WaveFunction)> {
    use crate::error::Error;
    let bytes = std::fs::read(path)?;
    if bytes.len() < 32 || &bytes[0..8] != b"QCPMPSI1" {
        return Err(Error::Parse("bad state-dump header".into()));
    }
    let dims = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let n = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let extent = f64::from_le_bytes(bytes[24..32].try_into().unwrap());
    let grid = Grid::new(dims, n, extent, budget)?;
    let total = grid.total_points();
    if bytes.len() != 32 + 16 * total {
        return Err(Error::Parse("state-dump size mismatch".into()));
    }
    let mut amp = Vec::with_capacity(total);
    for i in 0..total {
        let off = 32 + 16 * i;
        let re = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        let im = f64::from_le_bytes(bytes[off + 8..off + 16].try_into().unwrap());
        amp.push(Complex64::new(re, im));
    }
    Ok((grid.clone(), WaveFunction::from_amplitudes(grid, amp)?))
}

pub fn meta_for(command: &str) -> RunMeta {
    RunMeta {
        command: command.into(),
        epsilon: 0.25,
        gamma: 0.25,
        delta: 0.2,
        r1: 4.0,
        r_inf: None,
        grid_n: 24,
        seed: 0,
        h_mode: "algorithm1".into(),
        c_adiabatic: 1.0,
        k_const: 1.0,
        log_base: "natural",
        constants_mode: true,
        threads: 1,
    }
}

/// Convenience JSON fragment describing formula-mode flags for summaries.
pub fn mode_flags(meta: &RunMeta) -> serde_json::Value {
    json!({
        "h_mode": meta.h_mode,
        "log_base": meta.log_base,
        "constants_mode": meta.constants_mode,
        // the width formula and the kinetic-ratio display disagree in
        // their logarithmic constants; the width formula is normative here
        "theta_formula_note":
            "theta = h/mu uses the algorithm width formula; the alternative display with 2 log((2/delta)/4) is not reconciled",
    })
}
