//! The transformed objective, its adjoint gradient, and a finite-difference
//! oracle.
//!
//! All time integrals are composite Simpson over the integration grid of each
//! segment, and the spatial integral is composite Simpson over the `N` cells,
//! so the state, costate and quadrature all share one set of samples.

use serde::Serialize;

use crate::adjoint::{check_state_grid, solve_costate, CostateTrajectory};
use crate::config::{ControlParams, DiscretizationConfig, PipelineConfig};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::forward::{simulate, SpatialGrid, StateTrajectory};
use crate::quadrature::{simpson_by, simpson_weights};
use crate::time_scaling::{constraint_residuals, control_in_segment, time_in_segment, ConstraintResiduals};

/// Objective value, its gradient with respect to every decision variable, and
/// the constraint residuals at the same point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientBundle {
    #[serde(rename = "J")]
    pub j: f64,
    pub grad_sigma1: Vec<f64>,
    pub grad_sigma2: Vec<f64>,
    pub grad_theta: Vec<f64>,
    pub residuals: ConstraintResiduals,
}

impl GradientBundle {
    /// Flattened as `[sigma1.., sigma2.., theta..]`, matching
    /// [`ControlParams::to_vec`].
    pub fn to_vec(&self) -> Vec<f64> {
        [&self.grad_sigma1[..], &self.grad_sigma2, &self.grad_theta].concat()
    }

    fn checked(self) -> Result<Self> {
        if !self.j.is_finite() {
            return Err(Error::NonFinite {
                what: "objective",
                node: 0,
                sample: 0,
            });
        }
        if let Some(i) = self.to_vec().iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                what: "gradient component",
                node: i,
                sample: 0,
            });
        }
        Ok(self)
    }
}

/// The two parts of the objective: valve-node pressure and pipe volume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveParts {
    pub terminal: f64,
    pub volume: f64,
}

impl ObjectiveParts {
    pub fn total(&self) -> f64 {
        self.terminal + self.volume
    }
}

struct Sampled {
    /// Penalty at the valve node.
    terminal: Vec<f64>,
    /// Simpson spatial integral of the penalty.
    volume: Vec<f64>,
}

fn sample_penalty(cfg: &PipelineConfig, state: &StateTrajectory) -> Sampled {
    let n = state.nodes() - 1;
    let dl = cfg.length / n as f64;
    let w = simpson_weights(n);
    let mut terminal = Vec::with_capacity(state.samples());
    let mut volume = Vec::with_capacity(state.samples());
    for row in state.p.rows() {
        terminal.push(cfg.penalty(row[n]));
        volume.push(dl * row.iter().zip(&w).map(|(&p, wi)| wi * cfg.penalty(p)).sum::<f64>());
    }
    Sampled { terminal, volume }
}

/// Simpson integral over segment `k` of per-sample values.
fn segment_integral(values: &[f64], k: usize, spm: usize, h: f64) -> f64 {
    let base = k * spm;
    simpson_by(spm, h, |m| values[base + m])
}

/// Terminal and volume contributions to the objective.
pub fn objective_parts(
    cfg: &PipelineConfig,
    disc: &DiscretizationConfig,
    params: &ControlParams,
    state: &StateTrajectory,
) -> Result<ObjectiveParts> {
    check_state_grid(disc, params, state)?;
    let sampled = sample_penalty(cfg, state);
    let spm = state.stepping.steps_per_segment;
    let h = state.stepping.h;
    let mut parts = ObjectiveParts {
        terminal: 0.0,
        volume: 0.0,
    };
    for (k, &theta) in params.theta.iter().enumerate() {
        parts.terminal += theta * segment_integral(&sampled.terminal, k, spm, h);
        parts.volume += theta * segment_integral(&sampled.volume, k, spm, h);
    }
    parts.terminal /= cfg.horizon;
    parts.volume /= cfg.length * cfg.horizon;
    Ok(parts)
}

/// `J = (1/T) ∫ g(p(L,t)) dt + (1/(LT)) ∫∫ g(p(l,t)) dl dt` in scaled time,
/// with `g(p) = ((p − P)/P_bar)^{2 gamma}`.
pub fn objective(
    cfg: &PipelineConfig,
    disc: &DiscretizationConfig,
    params: &ControlParams,
    state: &StateTrajectory,
) -> Result<f64> {
    objective_parts(cfg, disc, params, state).map(|p| p.total())
}

/// Adjoint gradient assembled from a state and its costate.
pub fn gradient(
    cfg: &PipelineConfig,
    disc: &DiscretizationConfig,
    params: &ControlParams,
    state: &StateTrajectory,
    costate: &CostateTrajectory,
) -> Result<GradientBundle> {
    check_state_grid(disc, params, state)?;
    if costate.lambda.dim() != state.p.dim()
        || costate.mu.dim() != state.p.dim()
        || costate.stepping != state.stepping
    {
        return Err(Error::GridMismatch("costate and state grids differ".into()));
    }
    let grid = SpatialGrid::new(cfg, disc.cells);
    let n = grid.cells;
    let dl = grid.dl;
    let r = params.segments();
    let spm = state.stepping.steps_per_segment;
    let h = state.stepping.h;
    let rho = cfg.density;
    let rho_c2 = rho * cfg.wave_speed * cfg.wave_speed;
    let half_fric = cfg.friction / (2.0 * cfg.diameter);
    let big_k = rho_c2 / (cfg.horizon * cfg.length);
    let sampled = sample_penalty(cfg, state);
    let mu_l = costate.mu.column(n);

    // Parts of the theta derivative that do not involve the control.
    let pairing: Vec<f64> = (0..state.samples())
        .map(|j| {
            let p = state.p.row(j);
            let v = state.v.row(j);
            let lam = costate.lambda.row(j);
            let mu = costate.mu.row(j);
            let mut pressure = 0.0;
            for i in 1..=n {
                pressure += (lam[i] - lam[i - 1]) * (p[i] - cfg.reservoir_pressure);
            }
            let mut velocity = 0.0;
            for i in 0..n {
                velocity += (lam[i] * half_fric * v[i].abs() - rho_c2 * (mu[i + 1] - mu[i]) / dl) * v[i];
            }
            sampled.volume[j] - pressure / rho + dl * velocity
        })
        .collect();

    let mut grad_sigma1 = vec![0.0; r];
    let mut grad_sigma2 = vec![0.0; r];
    let mut grad_theta = vec![0.0; r];
    // Integral of mu(L) sigma1 theta over each segment, for the coupling term.
    let mut slope_coupling = vec![0.0; r];
    for k in 0..r {
        let base = k * spm;
        let theta = params.theta[k];
        let s1 = params.sigma1[k];
        let s_at = |m: usize| state.s_grid[base + m];
        let mu_int = simpson_by(spm, h, |m| mu_l[base + m]);
        let mu_psi = simpson_by(spm, h, |m| mu_l[base + m] * time_in_segment(s_at(m), k, &params.theta));
        let mu_local = simpson_by(spm, h, |m| mu_l[base + m] * (s_at(m) - k as f64));
        grad_sigma1[k] = big_k * theta * mu_psi;
        grad_sigma2[k] = big_k * theta * mu_int;
        slope_coupling[k] = s1 * theta * mu_int;

        let volume = segment_integral(&pairing, k, spm, h);
        let boundary = simpson_by(spm, h, |m| {
            let j = base + m;
            let p_n = state.p[[j, n]];
            let u = control_in_segment(s_at(m), k, params);
            sampled.terminal[j]
                + costate.lambda[[j, n]] * (p_n - cfg.reservoir_pressure) / (cfg.length * rho)
                + rho_c2 / cfg.length * mu_l[j] * u
        });
        grad_theta[k] = volume / (cfg.length * cfg.horizon)
            + boundary / cfg.horizon
            + big_k * s1 * theta * mu_local;
    }
    let mut later = 0.0;
    for k in (0..r).rev() {
        grad_theta[k] += big_k * later;
        later += slope_coupling[k];
    }

    GradientBundle {
        j: objective(cfg, disc, params, state)?,
        grad_sigma1,
        grad_sigma2,
        grad_theta,
        residuals: constraint_residuals(params, cfg),
    }
    .checked()
}

/// Forward solve, costate solve and gradient assembly in one call.
pub fn evaluate_gradient(
    cfg: &PipelineConfig,
    disc: &DiscretizationConfig,
    params: &ControlParams,
) -> Result<GradientBundle> {
    let state = simulate(cfg, disc, params)?;
    let costate = solve_costate(cfg, disc, params, &state)?;
    gradient(cfg, disc, params, &state, &costate)
}

/// Objective from a fresh forward solve.
pub fn evaluate_objective(
    cfg: &PipelineConfig,
    disc: &DiscretizationConfig,
    params: &ControlParams,
) -> Result<f64> {
    let state = simulate(cfg, disc, params)?;
    objective(cfg, disc, params, &state)
}

/// Gradients at several points, each independent.
pub fn evaluate_batch(
    cfg: &PipelineConfig,
    disc: &DiscretizationConfig,
    points: &[ControlParams],
    exec: Execution,
) -> Vec<Result<GradientBundle>> {
    exec.map(points, |p| evaluate_gradient(cfg, disc, p))
}

/// Central differences of `f` at `x` with step `h * max(|x_i|, 1)`.
///
/// The `2 len(x)` evaluations are independent and may run concurrently; the
/// result does not depend on their order.
pub fn central_differences<F>(x: &[f64], h: f64, exec: Execution, f: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync + Send,
{
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::invalid("h", "finite-difference step must be positive"));
    }
    let jobs: Vec<(usize, f64)> = (0..x.len()).flat_map(|i| [(i, 1.0), (i, -1.0)]).collect();
    let values = exec.map(&jobs, |&(i, sign)| {
        let mut y = x.to_vec();
        y[i] += sign * h * x[i].abs().max(1.0);
        f(&y)
    });
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    Ok((0..x.len())
        .map(|i| {
            let step = h * x[i].abs().max(1.0);
            (values[2 * i] - values[2 * i + 1]) / (2.0 * step)
        })
        .collect())
}

/// Finite-difference gradient, each objective from a fresh forward solve.
pub fn fd_gradient(
    cfg: &PipelineConfig,
    disc: &DiscretizationConfig,
    params: &ControlParams,
    h: f64,
) -> Result<GradientBundle> {
    fd_gradient_with(cfg, disc, params, h, Execution::default())
}

/// [`fd_gradient`] with an explicit execution mode.
pub fn fd_gradient_with(
    cfg: &PipelineConfig,
    disc: &DiscretizationConfig,
    params: &ControlParams,
    h: f64,
    exec: Execution,
) -> Result<GradientBundle> {
    for (k, &theta) in params.theta.iter().enumerate() {
        if theta - h * theta.abs().max(1.0) < disc.theta_min {
            return Err(Error::InvalidParams(format!(
                "theta_{} = {theta} minus the difference step falls below theta_min = {}",
                k + 1,
                disc.theta_min
            )));
        }
    }
    let r = params.segments();
    let x = params.to_vec();
    let g = central_differences(&x, h, exec, |y| {
        evaluate_objective(cfg, disc, &ControlParams::from_slice(y)?)
    })?;
    GradientBundle {
        j: evaluate_objective(cfg, disc, params)?,
        grad_sigma1: g[..r].to_vec(),
        grad_sigma2: g[r..2 * r].to_vec(),
        grad_theta: g[2 * r..].to_vec(),
        residuals: constraint_residuals(params, cfg),
    }
    .checked()
}

/// Componentwise comparison of the adjoint and finite-difference gradients.
#[derive(Debug, Clone, Serialize)]
pub struct GradCheck {
    pub adjoint: GradientBundle,
    pub fd: GradientBundle,
    /// Per-component error: relative where `|fd| > fd_floor`, absolute otherwise.
    pub errors: Vec<f64>,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub passed: bool,
}

/// Tolerances for [`gradcheck`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheckTolerance {
    pub rel: f64,
    pub abs: f64,
    /// Components with `|fd|` at or below this are checked absolutely.
    pub fd_floor: f64,
}

impl Default for GradCheckTolerance {
    fn default() -> Self {
        GradCheckTolerance {
            rel: 1e-3,
            abs: 1e-6,
            fd_floor: 1e-8,
        }
    }
}

/// Compares analytic and finite-difference gradients at `params`.
pub fn gradcheck(
    cfg: &PipelineConfig,
    disc: &DiscretizationConfig,
    params: &ControlParams,
    h: f64,
    tol: GradCheckTolerance,
    exec: Execution,
) -> Result<GradCheck> {
    let (adjoint, fd) = exec.join(
        || evaluate_gradient(cfg, disc, params),
        || fd_gradient_with(cfg, disc, params, h, exec),
    );
    let (adjoint, fd) = (adjoint?, fd?);
    Ok(compare_gradients(adjoint, fd, tol))
}

/// Builds a [`GradCheck`] from two precomputed bundles.
pub fn compare_gradients(adjoint: GradientBundle, fd: GradientBundle, tol: GradCheckTolerance) -> GradCheck {
    let mut errors = Vec::new();
    let mut max_rel_error: f64 = 0.0;
    let mut max_abs_error: f64 = 0.0;
    let mut passed = true;
    for (a, f) in adjoint.to_vec().into_iter().zip(fd.to_vec()) {
        let diff = (a - f).abs();
        if f.abs() > tol.fd_floor {
            let rel = diff / f.abs();
            max_rel_error = max_rel_error.max(rel);
            passed &= rel <= tol.rel;
            errors.push(rel);
        } else {
            max_abs_error = max_abs_error.max(diff);
            passed &= diff <= tol.abs;
            errors.push(diff);
        }
    }
    GradCheck {
        adjoint,
        fd,
        errors,
        max_rel_error,
        max_abs_error,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjoint::CostateTrajectory;
    use ndarray::Array2;

    fn small() -> (PipelineConfig, DiscretizationConfig) {
        let cfg = PipelineConfig::benchmark();
        let disc = DiscretizationConfig::new(10, 5, 40, &cfg);
        (cfg, disc)
    }

    fn ramp(r: usize, cfg: &PipelineConfig) -> ControlParams {
        ControlParams {
            sigma1: vec![-cfg.u_max / cfg.horizon; r],
            sigma2: vec![cfg.u_max; r],
            theta: vec![cfg.horizon / r as f64; r],
        }
    }

    fn with_pressure(state: &StateTrajectory, p: f64) -> StateTrajectory {
        let mut s = state.clone();
        s.p.fill(p);
        s
    }

    #[test]
    fn objective_of_constant_pressures() {
        let (cfg, disc) = small();
        let params = ControlParams {
            theta: vec![1.0, 3.0, 2.5, 1.5, 2.0],
            ..ramp(5, &cfg)
        };
        let state = simulate(&cfg, &disc, &params).unwrap();
        let flat = with_pressure(&state, cfg.reservoir_pressure);
        assert_eq!(objective(&cfg, &disc, &params, &flat).unwrap(), 0.0);
        let raised = with_pressure(&state, cfg.reservoir_pressure + cfg.pressure_datum);
        let j = objective(&cfg, &disc, &params, &raised).unwrap();
        assert!((j - 2.0).abs() < 1e-12, "{j}");
    }

    #[test]
    fn zero_valve_costate_gives_zero_sigma_gradient() {
        let (cfg, disc) = small();
        let params = ramp(5, &cfg);
        let state = simulate(&cfg, &disc, &params).unwrap();
        let dim = state.p.dim();
        let costate = CostateTrajectory {
            s_grid: state.s_grid.clone(),
            lambda: Array2::from_elem(dim, 0.5),
            mu: Array2::zeros(dim),
            stepping: state.stepping,
        };
        let g = gradient(&cfg, &disc, &params, &state, &costate).unwrap();
        assert!(g.grad_sigma1.iter().chain(&g.grad_sigma2).all(|&x| x == 0.0));
    }

    #[test]
    fn central_differences_exact_on_quadratic() {
        let theta = [0.3, 1.7, -2.5, 4.0];
        let g = central_differences(&theta, 1e-4, Execution::Sequential, |x| {
            Ok(x.iter().map(|t| t * t).sum())
        })
        .unwrap();
        for (gi, t) in g.iter().zip(theta) {
            assert!((gi - 2.0 * t).abs() <= 1e-10, "{gi} vs {}", 2.0 * t);
        }
    }

    #[test]
    fn parallel_fd_is_bitwise_identical() {
        let (cfg, disc) = small();
        let params = ramp(5, &cfg);
        let a = fd_gradient_with(&cfg, &disc, &params, 1e-5, Execution::Sequential).unwrap();
        let b = fd_gradient_with(&cfg, &disc, &params, 1e-5, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fd_step_respects_theta_min() {
        let (cfg, mut disc) = small();
        disc.theta_min = 1.99999;
        let err = fd_gradient(&cfg, &disc, &ramp(5, &cfg), 1e-4).unwrap_err();
        assert!(matches!(err, Error::InvalidParams(_)));
    }

    #[test]
    fn adjoint_matches_fd_on_ramp() {
        let (cfg, disc) = small();
        let params = ramp(5, &cfg);
        let check = gradcheck(
            &cfg,
            &disc,
            &params,
            1e-5,
            GradCheckTolerance::default(),
            Execution::default(),
        )
        .unwrap();
        assert!(check.passed, "{:?}", check.errors);
    }
}
