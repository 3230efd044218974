//! Command-line entry point: parses the run configuration, dispatches to a
//! library operation, and persists plain-text outputs plus a run manifest.
//!
//! Exit codes: 0 success, 2 configuration error, 3 precondition violation,
//! 4 solver non-convergence, 5 I/O failure.

mod config;
mod output;

use clap::Parser;
use config::{parse_config, Cli, Command, RunConfig};
use hardylab::*;
use output::{Json, RunOutput};
use std::process::ExitCode;
use std::time::Instant;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match parse_config(&cli) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("config error: {msg}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::NonConvergence { .. } => 4,
                Error::InvalidParameter(_)
                | Error::SupercriticalLambda { .. }
                | Error::GridMismatch(_)
                | Error::NotPositiveDefinite(_) => 3,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cfg: &RunConfig) -> Result<ExitCode> {
    let wall = Instant::now();
    let mut out = RunOutput::new(&cfg.output_dir);
    let mut exit = ExitCode::SUCCESS;

    match cfg.command {
        Command::Eig => {
            let grid = build_grid(cfg.dimension, cfg.n_r, cfg.n_theta, cfg.radius)?;
            let ops = assemble(&grid, cfg.lambda)?;
            let t = Instant::now();
            let pairs = spectral::operator_modes(&ops, cfg.k, 1e-10)?;
            out.timing("smallest_generalized_eigenpairs", t.elapsed().as_secs_f64());
            out.put("lambda", Json::Num(cfg.lambda));
            out.put(
                "eigenvalues",
                Json::List(pairs.iter().map(|p| Json::Num(p.value)).collect()),
            );
            out.put(
                "residuals",
                Json::List(pairs.iter().map(|p| Json::Num(p.residual)).collect()),
            );
            for (i, p) in pairs.iter().enumerate() {
                out.field_csv(&format!("mode_{}", i + 1), &grid, &p.vector);
            }
        }

        Command::HardyConstants => {
            let resolutions: Vec<(usize, usize)> =
                cfg.resolutions.iter().map(|&n| (n, n)).collect();
            let t = Instant::now();
            let est = best_hardy_constant(cfg.dimension, cfg.radius, &resolutions)?;
            out.timing("best_hardy_constant", t.elapsed().as_secs_f64());
            out.put("hardy_constant", Json::Num(est.value));
            out.put(
                "trend_resolutions",
                Json::List(
                    est.refinement_trend
                        .iter()
                        .map(|((a, _), _)| Json::Int(*a as i64))
                        .collect(),
                ),
            );
            out.put(
                "trend_values",
                Json::List(est.refinement_trend.iter().map(|t| Json::Num(t.1)).collect()),
            );
            let finest = *cfg.resolutions.last().unwrap();
            let grid = build_grid(cfg.dimension, finest, finest, cfg.radius)?;
            let t = Instant::now();
            let log_est = refined_log_constant(&grid)?;
            out.timing("refined_log_constant", t.elapsed().as_secs_f64());
            out.put("log_constant", Json::Num(log_est.value));
            out.put("log_constant_coarse_caveat", Json::Bool(log_est.coarse_caveat));
            out.field_csv("hardy_minimizer", &grid, &log_est.minimizer);
        }

        Command::Pohozaev => {
            let grid = build_grid(cfg.dimension, cfg.n_r, cfg.n_theta, cfg.radius)?;
            let ops = assemble(&grid, cfg.lambda)?;
            let t = Instant::now();
            let pairs = spectral::operator_modes(&ops, cfg.mode_index, 1e-10)?;
            let pair = &pairs[cfg.mode_index - 1];
            let f = pair.vector.scaled(pair.value);
            let rep = pohozaev_report(&grid, &ops, &pair.vector, &f)?;
            out.timing("pohozaev_report", t.elapsed().as_secs_f64());
            out.put("eigenvalue", Json::Num(pair.value));
            out.put("boundary_term", Json::Num(rep.boundary_term));
            out.put("volume_term", Json::Num(rep.volume_term));
            out.put("norm_term", Json::Num(rep.norm_term));
            out.put("residual", Json::Num(rep.residual));
            out.put("data_warning", Json::Bool(rep.data_warning));
            out.field_csv("eigenmode", &grid, &pair.vector);
        }

        Command::TraceCheck => {
            let grid = build_grid(cfg.dimension, cfg.n_r, cfg.n_theta, cfg.radius)?;
            let ops = assemble(&grid, cfg.lambda)?;
            let t = Instant::now();
            let pairs = spectral::operator_modes(&ops, cfg.k.max(3), 1e-10)?;
            let mut ratios = Vec::new();
            for p in &pairs {
                let f = p.vector.scaled(p.value);
                ratios.push(trace_inequality_ratio(&grid, &ops, &p.vector, &f)?);
            }
            out.timing("trace_battery", t.elapsed().as_secs_f64());
            let sup = ratios.iter().cloned().fold(0.0f64, f64::max);
            out.put(
                "trace_ratios",
                Json::List(ratios.iter().map(|&r| Json::Num(r)).collect()),
            );
            out.put("trace_ratio_sup", Json::Num(sup));
        }

        Command::GroundState => {
            let grid = build_grid(cfg.dimension, cfg.n_r, cfg.n_theta, cfg.radius)?;
            let ops = assemble(&grid, cfg.lambda)?;
            let mode = if cfg.exploratory {
                GroundStateMode::Exploratory
            } else {
                GroundStateMode::Strict
            };
            let t = Instant::now();
            let gs = ground_state(&ops, cfg.alpha, cfg.max_iter, cfg.tol, mode)?;
            out.timing("ground_state", t.elapsed().as_secs_f64());
            let bal = nonlinear_balance(&grid, &gs)?;
            out.put("i_value", Json::Num(gs.i_value));
            out.put("iterations", Json::Int(gs.iterations as i64));
            out.put("fixed_point_residual", Json::Num(gs.fixed_point_residual));
            out.put("balance_factor", Json::Num(bal.balance_factor));
            out.put("boundary_term", Json::Num(bal.boundary_term));
            out.put("predicted", Json::Num(bal.predicted));
            out.put("relative_gap", Json::Num(bal.relative_gap));
            out.field_csv("ground_state", &grid, &gs.u);
        }

        Command::EvolveWave | Command::Multiplier => {
            let grid = build_grid(cfg.dimension, cfg.n_r, cfg.n_theta, cfg.radius)?;
            let ops = assemble(&grid, cfg.lambda)?;
            let pairs = spectral::operator_modes(&ops, cfg.mode_index, 1e-10)?;
            let v0 = pairs[cfg.mode_index - 1].vector.clone();
            let v1 = Field::zeros(&grid);
            let t = Instant::now();
            let tr = wave_evolve(&ops, &v0, &v1, cfg.t_final, cfg.dt, &RecordOptions::default())?;
            out.timing("wave_evolve", t.elapsed().as_secs_f64());
            let e0 = tr.energy[0];
            let drift = tr.energy.iter().fold(0.0f64, |m, &e| m.max((e - e0).abs())) / e0;
            out.put("initial_energy", Json::Num(e0));
            out.put("energy_drift", Json::Num(drift));
            out.series_csv("series", &tr.times, &tr.energy, &tr.mass);
            out.flux_csv("flux", &tr.times, &tr.flux);
            if cfg.command == Command::Multiplier {
                let rep = multiplier_report(&grid, &ops, &tr)?;
                out.put("lhs", Json::Num(rep.lhs));
                out.put("energy_part", Json::Num(rep.energy_part));
                out.put("cross_part", Json::Num(rep.cross_part));
                out.put("residual", Json::Num(rep.residual));
                let hr = hidden_regularity_ratio(&grid, &ops, &tr)?;
                out.put("hidden_regularity_ratio", Json::Num(hr));
            }
        }

        Command::EvolveSchrodinger => {
            let grid = build_grid(cfg.dimension, cfg.n_r, cfg.n_theta, cfg.radius)?;
            let ops = assemble(&grid, cfg.lambda)?;
            let pairs = spectral::operator_modes(&ops, cfg.mode_index, 1e-10)?;
            let u0 = CxField::from_real(pairs[cfg.mode_index - 1].vector.clone());
            let t = Instant::now();
            let tr = schrodinger_evolve(&ops, &u0, cfg.t_final, cfg.dt)?;
            out.timing("schrodinger_evolve", t.elapsed().as_secs_f64());
            let m0 = tr.mass[0];
            let drift = tr.mass.iter().fold(0.0f64, |m, &x| m.max((x - m0).abs())) / m0;
            out.put("initial_mass", Json::Num(m0));
            out.put("mass_drift", Json::Num(drift));
            out.series_csv("series", &tr.times, &tr.hardy_energy, &tr.mass);
            out.field_csv("final_re", &grid, &tr.final_state.re);
            out.field_csv("final_im", &grid, &tr.final_state.im);
        }

        Command::Observability => {
            let grid = build_grid(cfg.dimension, cfg.n_r, cfg.n_theta, cfg.radius)?;
            let ops = assemble(&grid, cfg.lambda)?;
            let spec = SampleSpec {
                eigenmodes: cfg.modes,
                random: cfg.random,
                seed: cfg.seed,
                power_iterations: cfg.power,
            };
            let t = Instant::now();
            let scan = observability_scan(&ops, cfg.t_final, cfg.dt, &spec)?;
            out.timing("observability_scan", t.elapsed().as_secs_f64());
            out.put("d1_estimate", Json::Num(scan.d1_estimate));
            out.put(
                "ratios",
                Json::List(scan.ratios.iter().map(|&r| Json::Num(r)).collect()),
            );
            out.put("skipped", Json::Int(scan.skipped as i64));
            if let Some(r) = scan.refined_min_ratio {
                out.put("refined_min_ratio", Json::Num(r));
            }
            out.field_csv("worst_datum_position", &grid, &scan.worst_datum.0);
            out.field_csv("worst_datum_velocity", &grid, &scan.worst_datum.1);
        }

        Command::HumWave => {
            let grid = build_grid(cfg.dimension, cfg.n_r, cfg.n_theta, cfg.radius)?;
            let ops = assemble(&grid, cfg.lambda)?;
            let pairs = spectral::operator_modes(&ops, cfg.mode_index, 1e-10)?;
            let u0 = pairs[cfg.mode_index - 1].vector.clone();
            let u1 = Field::zeros(&grid);
            if cfg.t_final < 2.0 * cfg.radius {
                eprintln!(
                    "warning: horizon T = {} is below the sharp control time 2R = {}",
                    cfg.t_final,
                    2.0 * cfg.radius
                );
            }
            let t = Instant::now();
            let res = hum_solve(&ops, &u0, &u1, cfg.t_final, cfg.dt, cfg.tol, cfg.max_iter)?;
            out.timing("hum_solve", t.elapsed().as_secs_f64());
            out.put("cg_iterations", Json::Int(res.cg_iterations as i64));
            out.put("cg_residual", Json::Num(res.cg_residual));
            out.put("converged", Json::Bool(res.converged));
            out.put("j_value", Json::Num(res.j_value));
            out.put("reduction_factor", Json::Num(res.reduction_factor));
            out.put("short_horizon_warning", Json::Bool(res.short_horizon_warning));
            let times: Vec<f64> = (0..res.control_trace.len())
                .map(|n| (n as f64 + 0.5) * cfg.dt)
                .collect();
            out.control_csv("control", &times, &res.control_trace, &res.face_indices);
            out.field_csv("minimizer_position", &grid, &res.minimizer.0);
            out.field_csv("minimizer_velocity", &grid, &res.minimizer.1);
            if !res.converged {
                exit = ExitCode::from(4);
            }
        }

        Command::HumSchrodinger => {
            let grid = build_grid(cfg.dimension, cfg.n_r, cfg.n_theta, cfg.radius)?;
            let ops = assemble(&grid, cfg.lambda)?;
            let pairs = spectral::operator_modes(&ops, cfg.mode_index, 1e-10)?;
            let u0 = CxField::from_real(pairs[cfg.mode_index - 1].vector.clone());
            let t = Instant::now();
            let res =
                schrodinger_hum_solve(&ops, &u0, cfg.t_final, cfg.dt, cfg.tol, cfg.max_iter)?;
            out.timing("schrodinger_hum_solve", t.elapsed().as_secs_f64());
            out.put("cg_iterations", Json::Int(res.cg_iterations as i64));
            out.put("cg_residual", Json::Num(res.cg_residual));
            out.put("converged", Json::Bool(res.converged));
            out.put("j_value", Json::Num(res.j_value));
            out.put("final_mass_ratio", Json::Num(res.final_mass_ratio));
            let times: Vec<f64> = (0..res.control_trace_re.len())
                .map(|n| (n as f64 + 0.5) * cfg.dt)
                .collect();
            out.control_csv("control_re", &times, &res.control_trace_re, &res.face_indices);
            out.control_csv("control_im", &times, &res.control_trace_im, &res.face_indices);
            if res.final_mass_ratio > 1e-4 {
                exit = ExitCode::from(4);
            }
        }

        Command::E1Diagnostic => {
            let grid = build_grid(2, cfg.n_r, cfg.n_theta, cfg.radius)?;
            let t = Instant::now();
            let rows = critical_profile_diagnostic(&grid, &cfg.epsilons)?;
            out.timing("critical_profile_diagnostic", t.elapsed().as_secs_f64());
            out.put(
                "epsilons",
                Json::List(rows.iter().map(|r| Json::Num(r.epsilon)).collect()),
            );
            out.put(
                "truncated_hardy",
                Json::List(rows.iter().map(|r| Json::Num(r.truncated_hardy)).collect()),
            );
            out.put(
                "truncated_dirichlet",
                Json::List(
                    rows.iter()
                        .map(|r| Json::Num(r.truncated_dirichlet))
                        .collect(),
                ),
            );
            out.put("regularized_value", Json::Num(rows[0].regularized_value));
            out.table_csv(
                "diagnostic",
                "epsilon,truncated_hardy,truncated_dirichlet,regularized",
                &rows
                    .iter()
                    .map(|r| {
                        vec![
                            r.epsilon,
                            r.truncated_hardy,
                            r.truncated_dirichlet,
                            r.regularized_value,
                        ]
                    })
                    .collect::<Vec<_>>(),
            );
        }

        Command::Tu8 => {
            let grid = build_grid(cfg.dimension, cfg.n_r, cfg.n_theta, cfg.radius)?;
            let t = Instant::now();
            let est = tu8_constant(&grid)?;
            out.timing("tu8_constant", t.elapsed().as_secs_f64());
            out.put("constant", Json::Num(est.value));
            out.put(
                "trend_values",
                Json::List(est.refinement_trend.iter().map(|t| Json::Num(t.1)).collect()),
            );
            out.put("variation", Json::Num(est.variation));
            out.put("radius_squared", Json::Num(cfg.radius * cfg.radius));
            out.field_csv("maximizer", &grid, &est.minimizer);
        }
    }

    if let Err(e) = out.finish(cfg, wall.elapsed().as_secs_f64()) {
        eprintln!("i/o error while writing outputs: {e}");
        return Ok(ExitCode::from(5));
    }
    println!("wrote {}", cfg.output_dir.display());
    Ok(exit)
}
