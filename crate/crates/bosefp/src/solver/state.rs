//! Partial-mass state and trajectory containers.

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};

/// Partial mass values `M(t, r_i)` on the solver grid at one time instant.
/// `M` is the mass inside the ball of radius `r` divided by the unit-sphere
/// area, so `values[N]` approaches the mass scale `m_tilde = m / c_d`.
#[derive(Debug, Clone)]
pub struct MassState {
    pub time: f64,
    pub values: Vec<f64>,
    pub eps: f64,
    pub mass_scale: f64,
}

impl MassState {
    /// Check the structural invariants: zero at the origin, non-decreasing
    /// in r (non-negative density), total below the mass scale.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let v = &self.values;
        if v.is_empty() || v[0] != 0.0 {
            return Err(Error::Input("mass state must start at M(0) = 0".into()));
        }
        for i in 0..v.len() - 1 {
            if !(v[i + 1] >= v[i] - tol) {
                return Err(Error::Input(format!(
                    "mass state not monotone at node {i}: {} -> {}",
                    v[i],
                    v[i + 1]
                )));
            }
        }
        let last = *v.last().unwrap();
        if !(last <= self.mass_scale + tol.max(1e-9 * self.mass_scale)) {
            return Err(Error::Input(format!(
                "total mass {last} exceeds scale {}",
                self.mass_scale
            )));
        }
        Ok(())
    }
}

/// Solver statistics accumulated over one run.
#[derive(Debug, Clone, Default)]
pub struct SolverStats {
    pub accepted_steps: u64,
    pub rejected_steps: u64,
    pub dt_min_used: f64,
    pub dt_max_used: f64,
    /// Running sup over steps and nodes of |dM/dt|.
    pub lipschitz_sup: f64,
    /// Max |M(t, R) - M(0, R)| seen over the run.
    pub mass_drift_max: f64,
    /// Estimated explicit-term stability cap on dt, measured at the stiffest
    /// accepted step (reported, not enforced).
    pub dt_explicit_cap_estimate: f64,
}

/// Time-ordered states at diagnostic checkpoints plus the per-checkpoint
/// diagnostics stream and solver statistics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<MassState>,
    pub records: Vec<DiagnosticsRecord>,
    pub stats: SolverStats,
}

impl Trajectory {
    pub fn checkpoint_times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.time).collect()
    }

    pub fn last_state(&self) -> &MassState {
        self.states.last().expect("trajectory has at least one checkpoint")
    }
}
