use std::io::{self, Write};

use hammerflow::export::{fmt_f64, write_control_curve, write_history, write_state, write_terminal_pressure};
use hammerflow::gradient::{compare_gradients, fd_gradient_with, objective_parts, GradCheckTolerance};
use hammerflow::time_scaling::control_value;
use hammerflow::{
    evaluate_gradient, initial_guess, load_params, optimize, optimize_fixed_grid, simulate, ControlParams,
    DiscretizationConfig, Execution, GradientBundle, OptimOptions, OptimResult, PipelineConfig, RawConfig,
    SpatialGrid, StateTrajectory, Status,
};
use serde::Serialize;

use crate::failure::{Failure, EXIT_GRADCHECK, EXIT_OK, EXIT_OPTIMIZER};
use crate::manifest::{CommandKind, ParamsSource, RunManifest};
use crate::output::OutDir;

/// Relative finite-difference step of the gradient check.
const FD_STEP: f64 = 1e-5;

pub fn run(m: &RunManifest) -> Result<u8, Failure> {
    let (cfg, disc) = load(m)?;
    match m.command {
        CommandKind::Simulate => cmd_simulate(m, &cfg, &disc),
        CommandKind::Optimize => cmd_optimize(m, &cfg, &disc),
        CommandKind::Gradcheck => cmd_gradcheck(m, &cfg, &disc),
        CommandKind::Compare => cmd_compare(m, &cfg, &disc),
    }
}

fn load(m: &RunManifest) -> Result<(PipelineConfig, DiscretizationConfig), Failure> {
    let mut raw = RawConfig::read(&m.config_path)?;
    for o in &m.overrides {
        raw.set(o)?;
    }
    Ok(raw.build()?)
}

fn start(m: &RunManifest, cfg: &PipelineConfig, disc: &DiscretizationConfig) -> Result<ControlParams, Failure> {
    match &m.params {
        ParamsSource::File(path) => Ok(load_params(path)?),
        ParamsSource::Ramp | ParamsSource::Default => Ok(initial_guess(cfg, disc)),
    }
}

fn options(m: &RunManifest) -> OptimOptions {
    let mut opts = OptimOptions::default();
    if let Some(n) = m.max_iters {
        opts.max_iters = n;
    }
    opts
}

#[derive(Serialize)]
struct SimulateSummary {
    #[serde(rename = "J")]
    j: f64,
    j_terminal: f64,
    j_volume: f64,
    /// Largest `(p - P) / P_bar` over the whole grid.
    max_overshoot: f64,
    substeps: usize,
}

fn max_overshoot(cfg: &PipelineConfig, state: &StateTrajectory) -> f64 {
    state
        .p
        .iter()
        .map(|p| (p - cfg.reservoir_pressure) / cfg.pressure_datum)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn cmd_simulate(m: &RunManifest, cfg: &PipelineConfig, disc: &DiscretizationConfig) -> Result<u8, Failure> {
    let params = start(m, cfg, disc)?;
    let out = OutDir::prepare(&m.out_dir, &["state.csv", "terminal_pressure.csv", "summary.json"], m.force)?;
    let state = simulate(cfg, disc, &params)?;
    let parts = objective_parts(cfg, disc, &params, &state)?;
    let grid = SpatialGrid::new(cfg, disc.cells);
    out.write("state.csv", |w| write_state(w, &state, &grid))?;
    out.write("terminal_pressure.csv", |w| write_terminal_pressure(w, &state))?;
    let summary = SimulateSummary {
        j: parts.total(),
        j_terminal: parts.terminal,
        j_volume: parts.volume,
        max_overshoot: max_overshoot(cfg, &state),
        substeps: state.stepping.substeps,
    };
    out.write_json("summary.json", &summary)?;
    println!("J = {:.6e}, max overshoot {:.4}", summary.j, summary.max_overshoot);
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct OptimizeSummary {
    #[serde(rename = "J")]
    j: f64,
    status: String,
    residual_max: f64,
    iterations: usize,
    fixed_grid: bool,
}

fn run_optimizer(
    cfg: &PipelineConfig,
    disc: &DiscretizationConfig,
    init: &ControlParams,
    opts: &OptimOptions,
    fixed_grid: bool,
) -> hammerflow::Result<OptimResult> {
    if fixed_grid {
        optimize_fixed_grid(cfg, disc, init, opts)
    } else {
        optimize(cfg, disc, init, opts)
    }
}

fn status_code(status: Status) -> u8 {
    match status {
        Status::LineSearchFailure => EXIT_OPTIMIZER,
        Status::Converged | Status::MaxIters => EXIT_OK,
    }
}

fn cmd_optimize(m: &RunManifest, cfg: &PipelineConfig, disc: &DiscretizationConfig) -> Result<u8, Failure> {
    let init = start(m, cfg, disc)?;
    let names = [
        "optimal_params.txt",
        "history.csv",
        "state.csv",
        "control_curve.csv",
        "summary.json",
    ];
    let out = OutDir::prepare(&m.out_dir, &names, m.force)?;
    let res = run_optimizer(cfg, disc, &init, &options(m), m.fixed_grid)?;
    let state = simulate(cfg, disc, &res.params)?;
    let grid = SpatialGrid::new(cfg, disc.cells);
    out.write("optimal_params.txt", |w| w.write_all(res.params.to_kv_string().as_bytes()))?;
    out.write("history.csv", |w| write_history(w, &res.history))?;
    out.write("state.csv", |w| write_state(w, &state, &grid))?;
    out.write("control_curve.csv", |w| write_control_curve(w, &state, &res.params))?;
    out.write_json(
        "summary.json",
        &OptimizeSummary {
            j: res.j,
            status: res.status.to_string(),
            residual_max: res.residual_max,
            iterations: res.history.len() - 1,
            fixed_grid: m.fixed_grid,
        },
    )?;
    println!(
        "{}: J = {:.6e}, max residual {:.2e}, {} iterations",
        res.status,
        res.j,
        res.residual_max,
        res.history.len() - 1
    );
    Ok(status_code(res.status))
}

#[derive(Serialize)]
struct FdPart {
    grad_sigma1: Vec<f64>,
    grad_sigma2: Vec<f64>,
    grad_theta: Vec<f64>,
}

#[derive(Serialize)]
struct GradcheckReport {
    #[serde(flatten)]
    adjoint: GradientBundle,
    fd: FdPart,
    /// Relative error where `|fd| > fd_floor`, absolute below it.
    errors: Vec<f64>,
    h: f64,
    tolerance: GradCheckTolerance,
    max_rel_error: f64,
    max_abs_error: f64,
    passed: bool,
}

fn cmd_gradcheck(m: &RunManifest, cfg: &PipelineConfig, disc: &DiscretizationConfig) -> Result<u8, Failure> {
    let params = start(m, cfg, disc)?;
    let out = OutDir::prepare(&m.out_dir, &["gradcheck.json"], m.force)?;
    let exec = Execution::default();
    let (adjoint, fd) = exec.join(
        || evaluate_gradient(cfg, disc, &params),
        || fd_gradient_with(cfg, disc, &params, FD_STEP, exec),
    );
    let (mut adjoint, fd) = (adjoint?, fd?);
    if m.perturb_gradient {
        for g in [&mut adjoint.grad_sigma1, &mut adjoint.grad_sigma2, &mut adjoint.grad_theta] {
            g.iter_mut().for_each(|x| *x *= 1.01);
        }
    }
    let tol = GradCheckTolerance::default();
    let check = compare_gradients(adjoint, fd, tol);
    let passed = check.passed;
    let report = GradcheckReport {
        fd: FdPart {
            grad_sigma1: check.fd.grad_sigma1,
            grad_sigma2: check.fd.grad_sigma2,
            grad_theta: check.fd.grad_theta,
        },
        adjoint: check.adjoint,
        errors: check.errors,
        h: FD_STEP,
        tolerance: tol,
        max_rel_error: check.max_rel_error,
        max_abs_error: check.max_abs_error,
        passed,
    };
    out.write_json("gradcheck.json", &report)?;
    println!(
        "{}: max rel error {:.2e}, max abs error {:.2e}",
        if passed { "pass" } else { "FAIL" },
        report.max_rel_error,
        report.max_abs_error
    );
    Ok(if passed { EXIT_OK } else { EXIT_GRADCHECK })
}

#[derive(Serialize)]
struct CompareReport {
    #[serde(rename = "J_constant")]
    j_constant: f64,
    #[serde(rename = "J_fixed_grid")]
    j_fixed_grid: f64,
    #[serde(rename = "J_time_scaled")]
    j_time_scaled: f64,
    status_fixed_grid: String,
    status_time_scaled: String,
    iterations_fixed_grid: usize,
    iterations_time_scaled: usize,
    /// `J_time_scaled <= J_fixed_grid <= J_constant`.
    ordered: bool,
}

struct Run<'a> {
    name: &'a str,
    params: &'a ControlParams,
    state: StateTrajectory,
}

fn write_long(w: &mut impl Write, header: &str, runs: &[Run], value: impl Fn(&Run, usize) -> io::Result<f64>) -> io::Result<()> {
    writeln!(w, "{header}")?;
    for run in runs {
        for j in run.state.report_indices() {
            let t = run.state.time_at(j);
            writeln!(w, "{},{},{}", run.name, fmt_f64(t), fmt_f64(value(run, j)?))?;
        }
    }
    Ok(())
}

fn cmd_compare(m: &RunManifest, cfg: &PipelineConfig, disc: &DiscretizationConfig) -> Result<u8, Failure> {
    let init = start(m, cfg, disc)?;
    let names = ["compare.json", "compare_controls.csv", "compare_terminal_pressure.csv"];
    let out = OutDir::prepare(&m.out_dir, &names, m.force)?;
    let opts = options(m);
    let exec = Execution::default();
    let (baseline, (fixed, scaled)) = exec.join(
        || simulate(cfg, disc, &init),
        || {
            exec.join(
                || run_optimizer(cfg, disc, &init, &opts, true),
                || run_optimizer(cfg, disc, &init, &opts, false),
            )
        },
    );
    // Report the failure with the highest exit code.
    let mut failures: Vec<Failure> = Vec::new();
    let baseline = baseline.map_err(|e| failures.push(e.into())).ok();
    let fixed = fixed.map_err(|e| failures.push(e.into())).ok();
    let scaled = scaled.map_err(|e| failures.push(e.into())).ok();
    let (Some(baseline), Some(fixed), Some(scaled)) = (baseline, fixed, scaled) else {
        failures.sort_by_key(|f| std::cmp::Reverse(f.exit_code()));
        return Err(failures.remove(0));
    };

    let j_constant = objective_parts(cfg, disc, &init, &baseline)?.total();
    let fixed_state = simulate(cfg, disc, &fixed.params)?;
    let scaled_state = simulate(cfg, disc, &scaled.params)?;
    let runs = [
        Run {
            name: "constant",
            params: &init,
            state: baseline,
        },
        Run {
            name: "fixed_grid",
            params: &fixed.params,
            state: fixed_state,
        },
        Run {
            name: "time_scaled",
            params: &scaled.params,
            state: scaled_state,
        },
    ];
    out.write("compare_controls.csv", |w| {
        write_long(w, "run,t,u", &runs, |run, j| {
            control_value(run.state.s_grid[j], run.params).map_err(io::Error::other)
        })
    })?;
    out.write("compare_terminal_pressure.csv", |w| {
        write_long(w, "run,t,p", &runs, |run, j| {
            Ok(run.state.p[[j, run.state.nodes() - 1]])
        })
    })?;
    let report = CompareReport {
        j_constant,
        j_fixed_grid: fixed.j,
        j_time_scaled: scaled.j,
        status_fixed_grid: fixed.status.to_string(),
        status_time_scaled: scaled.status.to_string(),
        iterations_fixed_grid: fixed.history.len() - 1,
        iterations_time_scaled: scaled.history.len() - 1,
        ordered: scaled.j <= fixed.j && fixed.j <= j_constant,
    };
    out.write_json("compare.json", &report)?;
    println!(
        "J constant {:.6e}, fixed grid {:.6e} ({}), time scaled {:.6e} ({})",
        report.j_constant, report.j_fixed_grid, fixed.status, report.j_time_scaled, scaled.status
    );
    Ok(status_code(fixed.status).max(status_code(scaled.status)))
}
