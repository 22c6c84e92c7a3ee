//! CSV and JSON outputs: trajectory checkpoints, diagnostics streams,
//! profile tables and sweep summaries.

use crate::continuation::EpsFamily;
use crate::diagnostics::DiagnosticsRecord;
use crate::error::Result;
use crate::grid::RadialGrid;
use crate::model::ModelParams;
use crate::solver::{recover_density, Trajectory};
use serde::Serialize;
use std::io::Write;
use std::path::Path;

/// Trajectory checkpoints, wide format: one row per checkpoint with columns
/// `t, r_0.., M_0..`.
pub fn write_trajectory_csv(path: &Path, grid: &RadialGrid, traj: &Trajectory) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "t")?;
    for i in 0..=grid.n() {
        write!(f, ",r_{i}")?;
    }
    for i in 0..=grid.n() {
        write!(f, ",M_{i}")?;
    }
    writeln!(f)?;
    for state in &traj.states {
        write!(f, "{:.12e}", state.time)?;
        for &r in grid.nodes() {
            write!(f, ",{r:.12e}")?;
        }
        for &m in &state.values {
            write!(f, ",{m:.12e}")?;
        }
        writeln!(f)?;
    }
    Ok(())
}

pub fn write_diagnostics_csv(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        f,
        "t,free_energy,dissipation,E_0,E_2,E_4,lipschitz_sup,mass_at_R,sup_amplitude,regime"
    )?;
    for r in records {
        let amp = r.sup_amplitude.map(|a| format!("{a:.12e}")).unwrap_or_default();
        let regime = r.regime.map(|g| g.to_string()).unwrap_or_default();
        writeln!(
            f,
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{}",
            r.t,
            r.free_energy,
            r.dissipation,
            r.moment(0).unwrap_or(f64::NAN),
            r.moment(2).unwrap_or(f64::NAN),
            r.moment(4).unwrap_or(f64::NAN),
            r.lipschitz_sup,
            r.mass_at_outer,
            amp,
            regime,
        )?;
    }
    Ok(())
}

/// Profile table: `t, r, g, g_c, A` per checkpoint and node within the
/// profile window.
pub fn write_profile_csv(
    path: &Path,
    params: &ModelParams,
    grid: &RadialGrid,
    traj: &Trajectory,
    r_star: f64,
) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "t,r,g,g_c,A")?;
    let d = params.dim() as f64;
    let start = crate::diagnostics::profile_start_index(grid);
    for state in &traj.states {
        let g = recover_density(params.dim(), grid, &state.values);
        for i in start..=grid.n() {
            let r = grid.node(i);
            if r > r_star {
                break;
            }
            let gc = params.steady_density_unchecked(0.0, r);
            let a = (g[i] - gc) * r.powf(d - 2.0);
            writeln!(f, "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}", state.time, r, g[i], gc, a)?;
        }
    }
    Ok(())
}

/// Extrapolated limit curve of a sweep, same wide format as trajectories.
pub fn write_limit_csv(path: &Path, family: &EpsFamily) -> Result<()> {
    let grid = &family.grid;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "t")?;
    for i in 0..=grid.n() {
        write!(f, ",r_{i}")?;
    }
    for i in 0..=grid.n() {
        write!(f, ",M_{i}")?;
    }
    writeln!(f)?;
    for (t, m) in family.checkpoint_times.iter().zip(&family.limit_mass) {
        write!(f, "{t:.12e}")?;
        for &r in grid.nodes() {
            write!(f, ",{r:.12e}")?;
        }
        for &v in m {
            write!(f, ",{v:.12e}")?;
        }
        writeln!(f)?;
    }
    Ok(())
}

#[derive(Serialize)]
pub struct SweepSummary<'a> {
    pub gamma: f64,
    pub dim: u32,
    pub eps_values: &'a [f64],
    pub monotonicity_ok: bool,
    pub worst_monotonicity_violation: f64,
    pub k_star: Vec<f64>,
    pub richardson_order: Option<f64>,
    pub condensate_series: Vec<(f64, f64, f64, f64)>,
    pub mass: f64,
    pub upper_bound_constant: f64,
}

pub fn write_sweep_summary(path: &Path, family: &EpsFamily) -> Result<()> {
    let summary = SweepSummary {
        gamma: family.params.gamma(),
        dim: family.params.dim(),
        eps_values: &family.eps_values,
        monotonicity_ok: family.monotonicity.ok,
        worst_monotonicity_violation: family.monotonicity.worst_violation,
        k_star: family.k_star_per_eps.clone(),
        richardson_order: family.richardson_order,
        condensate_series: family
            .condensate
            .iter()
            .map(|c| (c.t, c.value, c.lo, c.hi))
            .collect(),
        mass: family.mass,
        upper_bound_constant: family.upper_bound_constant(0.5),
    };
    let text = serde_json::to_string_pretty(&summary)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// Read back a wide-format limit-mass CSV: returns (times, radii, masses).
pub fn read_limit_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| crate::error::Error::Input("empty limit CSV".into()))?;
    let n_cols = header.split(',').count();
    let n_nodes = (n_cols - 1) / 2;
    let mut times = Vec::new();
    let mut radii: Vec<f64> = Vec::new();
    let mut masses = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| crate::error::Error::Input(format!("bad CSV number: {e}")))?;
        if vals.len() != n_cols {
            return Err(crate::error::Error::Input("ragged limit CSV".into()));
        }
        times.push(vals[0]);
        if radii.is_empty() {
            radii = vals[1..=n_nodes].to_vec();
        }
        masses.push(vals[n_nodes + 1..].to_vec());
    }
    Ok((times, radii, masses))
}
