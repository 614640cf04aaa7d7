//! Costate (adjoint) system, integrated backward in scaled time.
//!
//! The unknowns are `lambda_0..lambda_{N-1}` (momentum multiplier) and
//! `mu_1..mu_N` (continuity multiplier). The valve end imposes
//! `lambda_N = -(2 rho L gamma / P_bar^{2 gamma}) (p_N - P)^{2 gamma - 1}`,
//! which carries the terminal-node part of the objective, and the reservoir
//! end imposes `mu_0 = 0`. Both multipliers vanish at `s = r` except the
//! imposed `lambda_N`.
//!
//! The pressure forcing of `mu_i` is multiplied by a nodal weight. With the
//! composite Simpson weights used for the spatial integral of the objective
//! this is the exact adjoint of the discretized objective, and the resulting
//! gradients agree with finite differences to discretization accuracy. Unit
//! weights give the plain nodal scheme ([`rhs_costate`]).
//!
//! Backward RK4 runs on the same grid as the forward solve. Its half-step
//! stages need the state between two stored samples; it is reconstructed with
//! the cubic Hermite midpoint `(x0 + x1)/2 + h (f0 - f1)/8` from the stored
//! slices and the state right-hand side there. A plain average would leave an
//! `O(h^2)` inconsistency that dominates the gradient error.

use ndarray::Array2;

use crate::config::{ControlParams, DiscretizationConfig, PipelineConfig};
use crate::error::{Error, Result};
use crate::forward::{PipeOperator, Rk4, SpatialGrid, StateTrajectory, Stepping};
use crate::quadrature::simpson_weights;
use crate::time_scaling::control_in_segment;

/// Costate samples on the state's grid, indexed `[sample, node]`.
#[derive(Debug, Clone)]
pub struct CostateTrajectory {
    pub s_grid: Vec<f64>,
    pub lambda: Array2<f64>,
    pub mu: Array2<f64>,
    pub stepping: Stepping,
}

impl CostateTrajectory {
    pub fn samples(&self) -> usize {
        self.s_grid.len()
    }

    pub fn nodes(&self) -> usize {
        self.lambda.ncols()
    }

    /// Indices of the `1/M` report grid.
    pub fn report_indices(&self) -> impl Iterator<Item = usize> {
        (0..self.samples()).step_by(self.stepping.substeps)
    }
}

/// Imposed `lambda_N` for valve-node pressure `p_n`.
#[inline]
pub fn boundary_lambda(cfg: &PipelineConfig, p_n: f64) -> f64 {
    -cfg.density * cfg.length * cfg.penalty_derivative(p_n)
}

struct CostateOperator<'a> {
    pipe: PipeOperator,
    cfg: &'a PipelineConfig,
    weights: &'a [f64],
    boundary_scale: f64,
}

impl CostateOperator<'_> {
    /// Entries `lambda[N]` and `mu[0]` are ignored; the imposed values are used.
    #[inline]
    fn rhs(
        &self,
        theta: f64,
        lambda: &[f64],
        mu: &[f64],
        p: &[f64],
        v: &[f64],
        dlambda: &mut [f64],
        dmu: &mut [f64],
    ) {
        let n = self.pipe.n;
        let fric = 2.0 * self.pipe.half_friction;
        let mut mu_here = 0.0;
        for i in 0..n {
            let mu_next = mu[i + 1];
            dlambda[i] = theta * (lambda[i] * fric * v[i].abs() - self.pipe.rho_c2_dl * (mu_next - mu_here));
            mu_here = mu_next;
        }
        dlambda[n] = 0.0;
        dmu[0] = 0.0;
        let inv_rho_dl = self.pipe.inv_rho_dl;
        for i in 1..n {
            dmu[i] = theta
                * (self.weights[i] * self.cfg.penalty_derivative(p[i])
                    - inv_rho_dl * (lambda[i] - lambda[i - 1]));
        }
        let lambda_n = self.boundary_scale * boundary_lambda(self.cfg, p[n]);
        dmu[n] = theta
            * (self.weights[n] * self.cfg.penalty_derivative(p[n]) - inv_rho_dl * (lambda_n - lambda[n - 1]));
    }
}

/// Costate right-hand side `(dlambda/ds, dmu/ds)` with nodal weights `weights`
/// (length `N + 1`) on the pressure forcing. `lambda_N` and `mu_0` are imposed
/// from `p` before evaluation; `dlambda[N]` and `dmu[0]` are zero.
#[allow(clippy::too_many_arguments)]
pub fn rhs_costate_weighted(
    lambda: &[f64],
    mu: &[f64],
    p: &[f64],
    v: &[f64],
    theta: f64,
    weights: &[f64],
    cfg: &PipelineConfig,
    grid: &SpatialGrid,
) -> (Vec<f64>, Vec<f64>) {
    let op = CostateOperator {
        pipe: PipeOperator::new(cfg, grid),
        cfg,
        weights,
        boundary_scale: 1.0,
    };
    let mut dl = vec![0.0; grid.len()];
    let mut dm = vec![0.0; grid.len()];
    op.rhs(theta, lambda, mu, p, v, &mut dl, &mut dm);
    (dl, dm)
}

/// [`rhs_costate_weighted`] with unit weights.
pub fn rhs_costate(
    lambda: &[f64],
    mu: &[f64],
    p: &[f64],
    v: &[f64],
    theta: f64,
    cfg: &PipelineConfig,
    grid: &SpatialGrid,
) -> (Vec<f64>, Vec<f64>) {
    let ones = vec![1.0; grid.len()];
    rhs_costate_weighted(lambda, mu, p, v, theta, &ones, cfg, grid)
}

pub(crate) fn check_state_grid(
    disc: &DiscretizationConfig,
    params: &ControlParams,
    state: &StateTrajectory,
) -> Result<()> {
    let r = disc.segments;
    let expect = state.stepping.samples(r);
    if params.segments() != r || state.params != *params {
        return Err(Error::GridMismatch(
            "state was computed from different control parameters".into(),
        ));
    }
    if state.nodes() != disc.cells + 1
        || state.samples() != expect
        || state.stepping.steps_per_segment != disc.subintervals * state.stepping.substeps
        || state.v.dim() != state.p.dim()
    {
        return Err(Error::GridMismatch(format!(
            "state is {}x{}, discretization expects {}x{}",
            state.samples(),
            state.nodes(),
            expect,
            disc.cells + 1
        )));
    }
    Ok(())
}

/// Solves the costate system with Simpson nodal weights (the adjoint of
/// [`objective`](crate::gradient::objective)).
pub fn solve_costate(
    cfg: &PipelineConfig,
    disc: &DiscretizationConfig,
    params: &ControlParams,
    state: &StateTrajectory,
) -> Result<CostateTrajectory> {
    solve_costate_weighted(cfg, disc, params, state, &simpson_weights(disc.cells))
}

/// Solves the costate system backward from `s = r` with the given nodal
/// weights on the pressure forcing.
pub fn solve_costate_weighted(
    cfg: &PipelineConfig,
    disc: &DiscretizationConfig,
    params: &ControlParams,
    state: &StateTrajectory,
    weights: &[f64],
) -> Result<CostateTrajectory> {
    solve_scaled(cfg, disc, params, state, weights, 1.0)
}

fn solve_scaled(
    cfg: &PipelineConfig,
    disc: &DiscretizationConfig,
    params: &ControlParams,
    state: &StateTrajectory,
    weights: &[f64],
    boundary_scale: f64,
) -> Result<CostateTrajectory> {
    check_state_grid(disc, params, state)?;
    let grid = SpatialGrid::new(cfg, disc.cells);
    if weights.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "{} nodal weights for {} nodes",
            weights.len(),
            grid.len()
        )));
    }
    let n = grid.cells;
    let n1 = grid.len();
    let stepping = state.stepping;
    let spm = stepping.steps_per_segment;
    let h = stepping.h;
    let samples = state.samples();
    let last = samples - 1;

    let pipe = PipeOperator::new(cfg, &grid);
    let op = CostateOperator {
        pipe: pipe.clone(),
        cfg,
        weights,
        boundary_scale,
    };

    let mut lambda = Array2::zeros((samples, n1));
    let mut mu = Array2::zeros((samples, n1));
    let mut x = vec![0.0; 2 * n1];
    x[n] = boundary_scale * boundary_lambda(cfg, state.p[[last, n]]);
    lambda[[last, n]] = x[n];

    // Stored slices and their midpoint reconstruction.
    let mut p0 = vec![0.0; n1];
    let mut v0 = vec![0.0; n1];
    let mut p1 = vec![0.0; n1];
    let mut v1 = vec![0.0; n1];
    let mut pm = vec![0.0; n1];
    let mut vm = vec![0.0; n1];
    let mut fp0 = vec![0.0; n1];
    let mut fv0 = vec![0.0; n1];
    let mut fp1 = vec![0.0; n1];
    let mut fv1 = vec![0.0; n1];

    let mut rk = Rk4::new(2 * n1);
    for j in (1..=last).rev() {
        let k = (j - 1) / spm;
        let theta = params.theta[k];
        for i in 0..n1 {
            p0[i] = state.p[[j - 1, i]];
            v0[i] = state.v[[j - 1, i]];
            p1[i] = state.p[[j, i]];
            v1[i] = state.v[[j, i]];
        }
        let u0 = control_in_segment(state.s_grid[j - 1], k, params);
        let u1 = control_in_segment(state.s_grid[j], k, params);
        pipe.state_rhs(theta, &p0, &v0, u0, &mut fp0, &mut fv0);
        pipe.state_rhs(theta, &p1, &v1, u1, &mut fp1, &mut fv1);
        for i in 0..n1 {
            pm[i] = 0.5 * (p0[i] + p1[i]) + h * (fp0[i] - fp1[i]) / 8.0;
            vm[i] = 0.5 * (v0[i] + v1[i]) + h * (fv0[i] - fv1[i]) / 8.0;
        }
        vm[n] = 0.5 * (u0 + u1);

        rk.step(-h, &mut x, |c, y, dy| {
            let (p, v) = if c == 0.0 {
                (&p1, &v1)
            } else if c == 1.0 {
                (&p0, &v0)
            } else {
                (&pm, &vm)
            };
            let (yl, ym) = y.split_at(n1);
            let (dl, dm) = dy.split_at_mut(n1);
            op.rhs(theta, yl, ym, p, v, dl, dm);
        });
        x[n] = boundary_scale * boundary_lambda(cfg, p0[n]);
        x[n1] = 0.0;
        if let Some(i) = x.iter().position(|z| !z.is_finite()) {
            return Err(Error::NonFinite {
                what: if i < n1 { "costate lambda" } else { "costate mu" },
                node: i % n1,
                sample: j - 1,
            });
        }
        for i in 0..n1 {
            lambda[[j - 1, i]] = x[i];
            mu[[j - 1, i]] = x[n1 + i];
        }
    }

    Ok(CostateTrajectory {
        s_grid: state.s_grid.clone(),
        lambda,
        mu,
        stepping,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::simulate;

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

    #[test]
    fn zero_costate_at_datum_is_stationary() {
        let cfg = PipelineConfig::benchmark();
        let grid = SpatialGrid::new(&cfg, 6);
        let z = vec![0.0; 7];
        let p = vec![cfg.reservoir_pressure; 7];
        let v = vec![1.3; 7];
        let (dl, dm) = rhs_costate(&z, &z, &p, &v, 0.9, &cfg, &grid);
        assert!(dl.iter().chain(&dm).all(|&x| x == 0.0));
    }

    #[test]
    fn theta_scales_costate_rhs() {
        let cfg = PipelineConfig::benchmark();
        let grid = SpatialGrid::new(&cfg, 6);
        let lam: Vec<f64> = (0..7).map(|i| 0.3 * i as f64 - 1.0).collect();
        let mu: Vec<f64> = (0..7).map(|i| (i as f64).sin() * 1e-4).collect();
        let p: Vec<f64> = (0..7).map(|i| 2e5 + 3e3 * (i as f64).cos()).collect();
        let v: Vec<f64> = (0..7).map(|i| 1.0 - 0.4 * i as f64).collect();
        let (dl1, dm1) = rhs_costate(&lam, &mu, &p, &v, 0.7, &cfg, &grid);
        let (dl2, dm2) = rhs_costate(&lam, &mu, &p, &v, 1.4, &cfg, &grid);
        for (a, b) in dl1.iter().zip(&dl2).chain(dm1.iter().zip(&dm2)) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn unit_pressure_excess_forces_mu() {
        let cfg = PipelineConfig::benchmark();
        let n = 8;
        let grid = SpatialGrid::new(&cfg, n);
        let z = vec![0.0; n + 1];
        let p = vec![cfg.reservoir_pressure + cfg.pressure_datum; n + 1];
        let v = vec![1.0; n + 1];
        let theta = 1.7;
        let (_, dm) = rhs_costate(&z, &z, &p, &v, theta, &cfg, &grid);
        let expect = theta * 4.0 / cfg.pressure_datum;
        for &d in &dm[1..n] {
            assert!((d - expect).abs() <= 1e-14 * expect);
        }
        // The imposed lambda_N = -2 rho L gamma / P_bar enters the last node.
        let extra = theta * 2.0 * cfg.length * 2.0 / (cfg.pressure_datum * grid.dl);
        assert!((dm[n] - (expect + extra)).abs() <= 1e-12 * extra);
    }

    #[test]
    fn invariants_and_shape() {
        let (cfg, disc) = small();
        let params = ramp(5, &cfg);
        let state = simulate(&cfg, &disc, &params).unwrap();
        let co = solve_costate(&cfg, &disc, &params, &state).unwrap();
        let n = disc.cells;
        let last = co.samples() - 1;
        assert_eq!(co.lambda.dim(), state.p.dim());
        for i in 0..n {
            assert_eq!(co.lambda[[last, i]], 0.0);
        }
        for i in 0..=n {
            assert_eq!(co.mu[[last, i]], 0.0);
        }
        for j in 0..co.samples() {
            assert_eq!(co.mu[[j, 0]], 0.0);
            assert_eq!(co.lambda[[j, n]], boundary_lambda(&cfg, state.p[[j, n]]));
            let dev = state.p[[j, n]] - cfg.reservoir_pressure;
            if dev != 0.0 {
                assert!(co.lambda[[j, n]] * dev.powi(3) < 0.0);
            }
        }
    }

    #[test]
    fn datum_state_gives_zero_costate() {
        let cfg = PipelineConfig {
            friction: 0.0,
            ..PipelineConfig::benchmark()
        };
        let disc = DiscretizationConfig::new(10, 3, 20, &cfg);
        let params = ControlParams {
            sigma1: vec![0.0; 3],
            sigma2: vec![cfg.u_max; 3],
            theta: vec![cfg.horizon / 3.0; 3],
        };
        let state = simulate(&cfg, &disc, &params).unwrap();
        let co = solve_costate(&cfg, &disc, &params, &state).unwrap();
        assert!(co.lambda.iter().chain(co.mu.iter()).all(|&x| x == 0.0));
    }

    #[test]
    fn costate_is_linear_in_forcing() {
        let (cfg, disc) = small();
        let params = ramp(5, &cfg);
        let state = simulate(&cfg, &disc, &params).unwrap();
        let w = simpson_weights(disc.cells);
        let w2: Vec<f64> = w.iter().map(|x| 2.0 * x).collect();
        let a = solve_scaled(&cfg, &disc, &params, &state, &w, 1.0).unwrap();
        let b = solve_scaled(&cfg, &disc, &params, &state, &w2, 2.0).unwrap();
        assert!(a.mu.iter().any(|&x| x != 0.0));
        for (x, y) in a.lambda.iter().chain(a.mu.iter()).zip(b.lambda.iter().chain(b.mu.iter())) {
            assert!((2.0 * x - y).abs() <= 1e-12 * y.abs(), "{x} {y}");
        }
    }

    #[test]
    fn mismatched_state_is_rejected() {
        let (cfg, disc) = small();
        let params = ramp(5, &cfg);
        let state = simulate(&cfg, &disc, &params).unwrap();
        let other = DiscretizationConfig::new(12, 5, 40, &cfg);
        let err = solve_costate(&cfg, &other, &params, &state).unwrap_err();
        assert!(matches!(err, Error::GridMismatch(_)));
        let mut moved = params.clone();
        moved.sigma1[0] *= 1.01;
        assert!(solve_costate(&cfg, &disc, &moved, &state).is_err());
    }
}
