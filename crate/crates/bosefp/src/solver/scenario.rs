//! Scenario files: the JSON run descriptions consumed by the CLI and the
//! experiment drivers.

use crate::error::{Error, Result};
use crate::grid::GridConfig;
use crate::model::ModelParams;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct DtConfig {
    pub init: f64,
    pub min: f64,
    pub max: f64,
}

impl Default for DtConfig {
    fn default() -> Self {
        Self { init: 1e-4, min: 1e-12, max: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum StepperKind {
    /// Implicit tridiagonal solve for the linear diffusion-drift part,
    /// explicit superlinear mobility term.
    #[default]
    Imex,
    /// Fully implicit backward Euler with Newton iteration; for stiffness
    /// studies and long-horizon runs.
    Newton,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    /// Steady profile `f_{inf,theta}`, optionally rescaled.
    Steady {
        theta: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// Isotropic Gaussian; exactly one of `mass` or `amplitude` must be set.
    Gaussian {
        #[serde(default)]
        mass: Option<f64>,
        #[serde(default)]
        amplitude: Option<f64>,
        width: f64,
    },
    /// Capped power-law spike `min(l r^{-alpha}, cap)` under a Gaussian
    /// envelope of the given width (the envelope keeps the mass finite).
    PowerlawSpike {
        l: f64,
        alpha: f64,
        cap: f64,
        #[serde(default = "one")]
        envelope_width: f64,
    },
    /// Tabulated radial density, linearly interpolated, zero outside.
    Table { r: Vec<f64>, g: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

impl InitialData {
    /// Realize the initial density as a callable. Fails on negative samples
    /// or inconsistent parameters.
    pub fn density(&self, params: &ModelParams) -> Result<Box<dyn Fn(f64) -> f64 + Sync + Send>> {
        match self {
            InitialData::Steady { theta, scale } => {
                if *theta < 0.0 || *scale < 0.0 {
                    return Err(Error::Input("steady initial data requires theta, scale >= 0".into()));
                }
                let p = params.clone();
                let (theta, scale) = (*theta, *scale);
                Ok(Box::new(move |r| scale * p.steady_density_unchecked(theta, r)))
            }
            InitialData::Gaussian { mass, amplitude, width } => {
                if !(width.is_finite() && *width > 0.0) {
                    return Err(Error::Input("gaussian initial data requires width > 0".into()));
                }
                let amp = match (mass, amplitude) {
                    (Some(m), None) => {
                        if *m <= 0.0 {
                            return Err(Error::Input("gaussian mass must be positive".into()));
                        }
                        m / (2.0 * std::f64::consts::PI * width * width).powf(params.dim() as f64 / 2.0)
                    }
                    (None, Some(a)) => {
                        if *a < 0.0 {
                            return Err(Error::Input("gaussian amplitude must be non-negative".into()));
                        }
                        *a
                    }
                    _ => {
                        return Err(Error::Input(
                            "gaussian initial data requires exactly one of mass or amplitude".into(),
                        ))
                    }
                };
                let w2 = width * width;
                Ok(Box::new(move |r| amp * (-0.5 * r * r / w2).exp()))
            }
            InitialData::PowerlawSpike { l, alpha, cap, envelope_width } => {
                if *l <= 0.0 || *cap <= 0.0 || *alpha <= 0.0 || *envelope_width <= 0.0 {
                    return Err(Error::Input("powerlaw spike requires positive l, alpha, cap, envelope".into()));
                }
                if *alpha >= params.dim() as f64 {
                    return Err(Error::Input(format!(
                        "powerlaw exponent alpha = {alpha} must be below d for integrability"
                    )));
                }
                let (l, alpha, cap, w2) = (*l, *alpha, *cap, envelope_width * envelope_width);
                Ok(Box::new(move |r| {
                    let spike = if r <= 0.0 { cap } else { (l * r.powf(-alpha)).min(cap) };
                    spike * (-0.5 * r * r / w2).exp()
                }))
            }
            InitialData::Table { r, g } => {
                if r.len() != g.len() || r.len() < 2 {
                    return Err(Error::Input("table initial data needs matching r/g arrays".into()));
                }
                if r.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Input("table radii must be strictly increasing".into()));
                }
                if let Some(bad) = g.iter().find(|&&v| v < 0.0) {
                    return Err(Error::Input(format!("negative density sample {bad} in table")));
                }
                let (r, g) = (r.clone(), g.clone());
                Ok(Box::new(move |x| {
                    if x < r[0] || x > *r.last().unwrap() {
                        return 0.0;
                    }
                    let j = r.partition_point(|&v| v <= x).min(r.len() - 1).max(1);
                    let t = (x - r[j - 1]) / (r[j] - r[j - 1]);
                    g[j - 1] + t * (g[j] - g[j - 1])
                }))
            }
        }
    }
}

/// A complete run description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub gamma: f64,
    pub dim: u32,
    pub eps: f64,
    #[serde(default)]
    pub grid: GridConfig,
    pub initial: InitialData,
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(default)]
    pub dt: DtConfig,
    pub diagnostics_every: f64,
    #[serde(default)]
    pub stepper: StepperKind,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(text)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::Input("scenario requires finite T > 0".into()));
        }
        if !(self.diagnostics_every > 0.0) {
            return Err(Error::Input("diagnostics_every must be positive".into()));
        }
        if !(self.dt.init > 0.0 && self.dt.min > 0.0 && self.dt.max >= self.dt.init) {
            return Err(Error::Input("dt config requires 0 < min, 0 < init <= max".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.gamma, self.dim, self.eps)
    }

    /// Default checkpoint schedule: multiples of `diagnostics_every` up to T.
    pub fn checkpoints(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        let mut t = self.diagnostics_every;
        while t < self.t_final - 1e-12 * self.t_final {
            out.push(t);
            t += self.diagnostics_every;
        }
        out.push(self.t_final);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_scenario_json() -> &'static str {
        r#"{
            "gamma": 1.0, "dim": 3, "eps": 0.1,
            "grid": {"N": 256, "R": 8.0, "q": 2.0},
            "initial": {"kind": "gaussian", "mass": 10.0, "width": 1.0},
            "T": 0.5, "dt": {"init": 1e-4, "min": 1e-10, "max": 0.01},
            "diagnostics_every": 0.1
        }"#
    }

    #[test]
    fn parses_round_trip() {
        let sc = Scenario::from_json(base_scenario_json()).unwrap();
        assert_eq!(sc.grid.n, 256);
        assert_eq!(sc.stepper, StepperKind::Imex);
        let again = Scenario::from_json(&sc.to_json().unwrap()).unwrap();
        assert_eq!(again.grid, sc.grid);
        assert_eq!(again.t_final, sc.t_final);
    }

    #[test]
    fn gaussian_mass_normalization() {
        let sc = Scenario::from_json(base_scenario_json()).unwrap();
        let params = sc.params().unwrap();
        let g = sc.initial.density(&params).unwrap();
        // integrate numerically to recover the mass
        let m = crate::numerics::quad::integrate(|r| g(r) * r * r, 0.0, 12.0, 1e-10, 1e-10)
            .unwrap()
            * params.c_d();
        approx::assert_relative_eq!(m, 10.0, max_relative = 1e-9);
    }

    #[test]
    fn table_rejects_negative_samples() {
        let params = ModelParams::new(1.0, 3, 0.0).unwrap();
        let bad = InitialData::Table { r: vec![0.0, 1.0], g: vec![1.0, -0.5] };
        assert!(bad.density(&params).is_err());
    }

    #[test]
    fn checkpoints_cover_final_time() {
        let sc = Scenario::from_json(base_scenario_json()).unwrap();
        let cps = sc.checkpoints();
        assert_eq!(cps[0], 0.0);
        assert_eq!(*cps.last().unwrap(), 0.5);
        assert!(cps.windows(2).all(|w| w[1] > w[0]));
    }
}
