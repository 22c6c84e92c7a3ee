//! `bosefp`: scenario runner and verification CLI for the radial
//! Fokker-Planck solver.
//!
//! Exit codes: 0 success, 2 property violation, 3 solver failure.

use bosefp::continuation;
use bosefp::error::Error;
use bosefp::io;
use bosefp::oracle::{self, DuhamelConfig, OracleGrid};
use bosefp::solver::{run_scenario, Scenario};
use bosefp::{ModelParams, RadialGrid};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "bosefp", about = "Radial solver for the bosonic Fokker-Planck equation", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single scenario and write trajectory/diagnostics/profile CSVs.
    Simulate {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run an eps-sweep over a scenario and write per-run CSVs plus a
    /// summary JSON with the extrapolated limit.
    Sweep {
        scenario: PathBuf,
        /// Comma-separated, strictly decreasing eps values (at least 3).
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print steady-state and minimizer tables.
    Minimizer {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        dim: u32,
        /// When given, solve the minimizer at this mass; otherwise print a
        /// theta -> mass table and the critical mass.
        #[arg(long)]
        mass: Option<f64>,
    },
    /// Cross-validate the solver against the Duhamel oracle on a short
    /// horizon, and emit the smoothing-estimate comparison CSV.
    OracleCheck {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Recompute profile fits from a sweep output directory (limit_mass.csv).
    Profile {
        family_dir: PathBuf,
    },
    /// Long-time relaxation experiment (eps-sweep to a large horizon,
    /// convergence metrics against the free-energy minimizer).
    Longtime {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.05, 0.025])]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 50.0)]
        t_large: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::SolverFailure { .. } => ExitCode::from(3),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn dispatch(cli: Cli) -> bosefp::Result<ExitCode> {
    match cli.command {
        Command::Simulate { scenario, out } => {
            let sc = Scenario::from_json(&std::fs::read_to_string(scenario)?)?;
            std::fs::create_dir_all(&out)?;
            let (solver, traj) = run_scenario(&sc)?;
            io::write_trajectory_csv(&out.join("trajectory.csv"), solver.grid(), &traj)?;
            io::write_diagnostics_csv(&out.join("diagnostics.csv"), &traj.records)?;
            if solver.params().profile_regime() {
                io::write_profile_csv(
                    &out.join("profile.csv"),
                    solver.params(),
                    solver.grid(),
                    &traj,
                    1.0,
                )?;
            }
            let drift = traj.stats.mass_drift_max;
            let scale = traj.states[0].mass_scale;
            println!(
                "simulate: {} checkpoints, {} steps ({} rejected), mass drift {:.3e}",
                traj.states.len(),
                traj.stats.accepted_steps,
                traj.stats.rejected_steps,
                drift
            );
            if drift > 1e-6 * scale {
                eprintln!("property violation: mass drift exceeds 1e-6 relative");
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { scenario, eps, out } => {
            let sc = Scenario::from_json(&std::fs::read_to_string(scenario)?)?;
            std::fs::create_dir_all(&out)?;
            let cps: Vec<f64> = sc.checkpoints();
            let family = continuation::eps_sweep(&sc, &eps, &cps)?;
            for (k, traj) in family.trajectories.iter().enumerate() {
                let tag = format!("eps_{}", family.eps_values[k]);
                io::write_trajectory_csv(&out.join(format!("trajectory_{tag}.csv")), &family.grid, traj)?;
                io::write_diagnostics_csv(&out.join(format!("diagnostics_{tag}.csv")), &traj.records)?;
            }
            io::write_limit_csv(&out.join("limit_mass.csv"), &family)?;
            io::write_sweep_summary(&out.join("sweep_summary.json"), &family)?;
            println!(
                "sweep: {} eps values, monotone: {}, K* = {:?}",
                family.eps_values.len(),
                family.monotonicity.ok,
                family.k_star_per_eps
            );
            if !family.monotonicity.ok {
                eprintln!(
                    "property violation: eps-monotonicity failed by {:.3e} at {:?}",
                    family.monotonicity.worst_violation, family.monotonicity.worst_at
                );
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Minimizer { gamma, dim, mass } => {
            let params = ModelParams::new(gamma, dim, 0.0)?;
            let mc = params.critical_mass()?;
            let closed = params.critical_mass_closed_form().ok();
            println!("# gamma = {gamma}, d = {dim}");
            println!("critical_mass_quadrature = {mc:.10}");
            println!(
                "critical_mass_bose_path  = {:.10}",
                params.critical_mass_bose_quadrature()?
            );
            if let Some(c) = closed {
                println!("critical_mass_closed     = {c:.10}");
            }
            match mass {
                Some(m) => {
                    let min = params.minimizer(m)?;
                    println!("mass = {m}");
                    println!("theta = {:.12}", min.theta());
                    println!("condensate = {:.12}", min.condensate());
                    println!("energy = {:.12}", params.minimizer_energy(m)?);
                }
                None => {
                    println!("theta,mass,energy");
                    for k in 0..=12 {
                        let theta = 0.25 * k as f64;
                        let m = params.steady_mass(theta)?;
                        let e = params.minimizer_energy(m)?;
                        println!("{theta:.2},{m:.8},{e:.8}");
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::OracleCheck { scenario, out } => {
            let sc = Scenario::from_json(&std::fs::read_to_string(scenario)?)?;
            std::fs::create_dir_all(&out)?;
            let (solver, traj) = run_scenario(&sc)?;
            let params = solver.params();
            let g_in = sc.initial.density(params)?;
            let cfg = DuhamelConfig {
                grid: OracleGrid::uniform(600, solver.grid().outer_radius()),
                ..Default::default()
            };
            let sol = oracle::duhamel_solve(params, &g_in, sc.t_final, &cfg)?;
            // sample the solver's final density on the oracle grid
            let g_solver = solver.density_of(traj.last_state());
            let nodes = solver.grid().nodes();
            let sampled = oracle::SampledDensity {
                grid: cfg.grid.clone(),
                values: cfg
                    .grid
                    .radii
                    .iter()
                    .map(|&r| interp(nodes, &g_solver, r))
                    .collect(),
            };
            let l1 = oracle::radial_l1_distance(params, &sampled, &sol.density);
            let mass = oracle::radial_mass(params, &sol.density);
            println!(
                "oracle-check: L1 gap {l1:.6e} over mass {mass:.6e} ({} Picard iterations)",
                sol.iterations
            );

            // smoothing comparison CSV over a dyadic time grid
            let mut rows = Vec::new();
            let f = |r: f64| (-0.5 * r * r / 0.01).exp();
            let times: Vec<f64> = (4..=10).map(|j| 2f64.powi(-j)).collect();
            let c = oracle::calibrate_smoothing_c(params, &f, &times, 1.0, f64::INFINITY, 0, 0.0)?;
            for &t in &times {
                let rep = oracle::smoothing_check(params, &f, t, 1.0, f64::INFINITY, 0, 0.0, c)?;
                rows.push((t, rep.lhs, rep.rhs, rep.ratio));
            }
            let mut text = String::from("t,norm_lhs,norm_rhs,ratio\n");
            for (t, lhs, rhs, ratio) in rows {
                text.push_str(&format!("{t:.9e},{lhs:.9e},{rhs:.9e},{ratio:.9e}\n"));
            }
            std::fs::write(out.join("smoothing_check.csv"), text)?;
            if l1 > 1e-4 * mass {
                eprintln!("property violation: oracle disagreement above 1e-4 relative");
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Profile { family_dir } => {
            let (times, radii, masses) = io::read_limit_csv(&family_dir.join("limit_mass.csv"))?;
            // model parameters are stored in the sweep summary
            let summary_text = std::fs::read_to_string(family_dir.join("sweep_summary.json"))?;
            let summary: serde_json::Value = serde_json::from_str(&summary_text)?;
            let gamma = summary["gamma"].as_f64().unwrap_or(1.0);
            let dim = summary["dim"].as_u64().unwrap_or(3) as u32;
            let params = ModelParams::new(gamma, dim, 0.0)?;
            let n = radii.len() - 1;
            let grid = RadialGrid::from_nodes(radii)?;
            let mut out = String::from("t,r,g,g_c,A\n");
            let d = dim as f64;
            let start = bosefp::diagnostics::profile_start_index(&grid);
            for (t, m) in times.iter().zip(&masses) {
                let g = bosefp::solver::recover_density(dim, &grid, m);
                for i in start..=n {
                    let r = grid.node(i);
                    if r > 1.0 {
                        break;
                    }
                    let gc = params.steady_density(0.0, r)?;
                    let a = (g[i] - gc) * r.powf(d - 2.0);
                    out.push_str(&format!("{t:.9e},{r:.9e},{:.9e},{gc:.9e},{a:.9e}\n", g[i]));
                }
            }
            std::fs::write(family_dir.join("profile.csv"), out)?;
            println!("profile: wrote {} checkpoints", times.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Longtime { scenario, eps, t_large, out } => {
            let sc = Scenario::from_json(&std::fs::read_to_string(scenario)?)?;
            std::fs::create_dir_all(&out)?;
            let (family, report) = continuation::longtime_experiment(&sc, &eps, t_large)?;
            io::write_limit_csv(&out.join("limit_mass.csv"), &family)?;
            io::write_sweep_summary(&out.join("sweep_summary.json"), &family)?;
            io::write_json(&out.join("longtime_report.json"), &report)?;
            println!(
                "longtime: final L1 gap {:.3e}, condensate gap {:.3e} (target {:.3e}), H monotone: {}",
                report.final_l1_gap, report.final_condensate_gap, report.condensate_target, report.h_monotone
            );
            if !report.h_monotone || !family.monotonicity.ok {
                eprintln!("property violation: free energy or scheme monotonicity failed");
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn interp(nodes: &[f64], vals: &[f64], r: f64) -> f64 {
    if r <= nodes[0] {
        return vals[0];
    }
    if r >= *nodes.last().unwrap() {
        return *vals.last().unwrap();
    }
    let j = nodes.partition_point(|&x| x <= r).clamp(1, nodes.len() - 1);
    let t = (r - nodes[j - 1]) / (nodes[j] - nodes[j - 1]);
    vals[j - 1] * (1.0 - t) + vals[j] * t
}
