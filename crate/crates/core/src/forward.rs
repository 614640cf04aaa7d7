//! Method-of-lines solver for the time-scaled pressure/velocity system.
//!
//! Space is split into `N` equal cells with nodes `l_i = i Δl`. Pressure
//! gradients use forward differences and velocity gradients backward
//! differences, which gives a staggered semi-discrete system in the unknowns
//! `v_0..v_{N-1}` and `p_1..p_N`. The reservoir pins `p_0 = P` and the valve
//! pins `v_N = u(s)`.
//!
//! Time integration is classical RK4 with a fixed step of `1/(M q)` in scaled
//! time, where `q` is the number of substeps per quadrature subinterval (see
//! [`Stepping`]). Every step boundary is stored, and segment boundaries
//! (integer `s`) always fall on step boundaries.

use ndarray::Array2;

use crate::config::{validate_params, ControlParams, DiscretizationConfig, PipelineConfig};
use crate::error::{Error, Result};
use crate::time_scaling::{control_in_segment, time_map};

/// Largest admissible `theta * c * h / Δl` for a step.
pub const CFL_LIMIT: f64 = 0.9;

/// Courant number targeted by the automatic substep count. Well inside the
/// stability limit: near 0.9 the costate gradient drifts from the discrete
/// objective by several percent on duration components.
pub const AUTO_COURANT: f64 = 0.25;

/// Uniform spatial grid on `[0, L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    pub cells: usize,
    pub dl: f64,
    pub nodes: Vec<f64>,
}

impl SpatialGrid {
    pub fn new(cfg: &PipelineConfig, cells: usize) -> Self {
        let dl = cfg.length / cells as f64;
        let mut nodes: Vec<f64> = (0..=cells).map(|i| i as f64 * dl).collect();
        nodes[cells] = cfg.length;
        SpatialGrid { cells, dl, nodes }
    }

    /// Number of nodes, `N + 1`.
    pub fn len(&self) -> usize {
        self.cells + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Step-size bookkeeping shared by the forward and costate solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stepping {
    /// RK4 substeps per quadrature subinterval.
    pub substeps: usize,
    /// Steps per control segment, `M * substeps`.
    pub steps_per_segment: usize,
    /// Step in scaled time, `1 / steps_per_segment`.
    pub h: f64,
}

impl Stepping {
    /// Uses `disc.substeps` when given; otherwise the smallest count for which
    /// a segment as long as the whole horizon stays within [`AUTO_COURANT`].
    /// The choice depends only on the configuration, never on `theta`.
    pub fn new(cfg: &PipelineConfig, disc: &DiscretizationConfig) -> Self {
        let dl = cfg.length / disc.cells as f64;
        let substeps = disc.substeps.unwrap_or_else(|| {
            let need = cfg.horizon * cfg.wave_speed / (disc.subintervals as f64 * dl * AUTO_COURANT);
            ((need - 1e-9).ceil() as usize).max(1)
        });
        let steps_per_segment = disc.subintervals * substeps;
        Stepping {
            substeps,
            steps_per_segment,
            h: 1.0 / steps_per_segment as f64,
        }
    }

    /// Errors if a segment of duration `theta_max` would violate the CFL limit.
    pub fn check(
        &self,
        cfg: &PipelineConfig,
        disc: &DiscretizationConfig,
        theta_max: f64,
    ) -> Result<()> {
        let dl = cfg.length / disc.cells as f64;
        let cfl = theta_max * cfg.wave_speed * self.h / dl;
        if cfl > CFL_LIMIT * (1.0 + 1e-12) {
            return Err(Error::Unstable {
                cfl,
                limit: CFL_LIMIT,
                m: disc.subintervals,
                substeps: self.substeps,
            });
        }
        Ok(())
    }

    /// Total stored samples for `segments` segments.
    pub fn samples(&self, segments: usize) -> usize {
        segments * self.steps_per_segment + 1
    }
}

/// Coefficients of the semi-discrete state and costate operators.
#[derive(Debug, Clone)]
pub struct PipeOperator {
    pub(crate) n: usize,
    pub(crate) reservoir: f64,
    pub(crate) inv_rho_dl: f64,
    pub(crate) half_friction: f64,
    pub(crate) rho_c2_dl: f64,
}

impl PipeOperator {
    pub fn new(cfg: &PipelineConfig, grid: &SpatialGrid) -> Self {
        PipeOperator {
            n: grid.cells,
            reservoir: cfg.reservoir_pressure,
            inv_rho_dl: 1.0 / (cfg.density * grid.dl),
            half_friction: cfg.friction / (2.0 * cfg.diameter),
            rho_c2_dl: cfg.density * cfg.wave_speed * cfg.wave_speed / grid.dl,
        }
    }

    /// Writes `dp/ds` and `dv/ds`. The boundary entries `p[0]` and `v[N]` are
    /// ignored in favour of `P` and `u`; `dp[0]` and `dv[N]` are set to zero.
    #[inline]
    pub fn state_rhs(&self, theta: f64, p: &[f64], v: &[f64], u: f64, dp: &mut [f64], dv: &mut [f64]) {
        let n = self.n;
        let mut p_here = self.reservoir;
        for i in 0..n {
            let p_next = p[i + 1];
            let vi = v[i];
            dv[i] = theta * (self.inv_rho_dl * (p_here - p_next) - self.half_friction * vi * vi.abs());
            p_here = p_next;
        }
        dv[n] = 0.0;
        dp[0] = 0.0;
        for i in 1..n {
            dp[i] = theta * self.rho_c2_dl * (v[i - 1] - v[i]);
        }
        dp[n] = theta * self.rho_c2_dl * (v[n - 1] - u);
    }
}

/// Fixed-step classical RK4 over a flat state vector with reusable scratch.
pub(crate) struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub(crate) fn new(dim: usize) -> Self {
        Rk4 {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// Advances `x` by `h`. `f(c, x, dx)` evaluates the derivative at the
    /// stage located a fraction `c ∈ {0, 1/2, 1}` into the step.
    pub(crate) fn step(&mut self, h: f64, x: &mut [f64], mut f: impl FnMut(f64, &[f64], &mut [f64])) {
        let Rk4 { k1, k2, k3, k4, tmp } = self;
        f(0.0, x, k1);
        axpy(tmp, x, 0.5 * h, k1);
        f(0.5, tmp, k2);
        axpy(tmp, x, 0.5 * h, k2);
        f(0.5, tmp, k3);
        axpy(tmp, x, h, k3);
        f(1.0, tmp, k4);
        let w = h / 6.0;
        for i in 0..x.len() {
            x[i] += w * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
    }
}

#[inline]
fn axpy(out: &mut [f64], x: &[f64], a: f64, k: &[f64]) {
    for ((o, xi), ki) in out.iter_mut().zip(x).zip(k) {
        *o = xi + a * ki;
    }
}

/// Friction-balanced steady state carrying `u_max` everywhere:
/// `v = u_max`, `p(l) = P − f ρ u_max² l / (2D)`.
pub fn steady_initial_state(cfg: &PipelineConfig, grid: &SpatialGrid) -> (Vec<f64>, Vec<f64>) {
    let gradient = cfg.friction * cfg.density * cfg.u_max * cfg.u_max / (2.0 * cfg.diameter);
    let phi1 = grid
        .nodes
        .iter()
        .map(|&l| cfg.reservoir_pressure - gradient * l)
        .collect();
    let phi2 = vec![cfg.u_max; grid.len()];
    (phi1, phi2)
}

/// Semi-discrete right-hand side `(dv/ds, dp/ds)` on segment duration `theta`.
pub fn rhs_state(
    p: &[f64],
    v: &[f64],
    u: f64,
    theta: f64,
    cfg: &PipelineConfig,
    grid: &SpatialGrid,
) -> (Vec<f64>, Vec<f64>) {
    let op = PipeOperator::new(cfg, grid);
    let mut dv = vec![0.0; grid.len()];
    let mut dp = vec![0.0; grid.len()];
    op.state_rhs(theta, p, v, u, &mut dp, &mut dv);
    (dv, dp)
}

/// Pressure and velocity at every integration step.
///
/// Arrays are indexed `[sample, node]`. Reports use every `substeps`-th
/// sample, the `r M + 1` points of the `1/M` grid.
#[derive(Debug, Clone)]
pub struct StateTrajectory {
    pub s_grid: Vec<f64>,
    pub p: Array2<f64>,
    pub v: Array2<f64>,
    pub params: ControlParams,
    pub stepping: Stepping,
}

impl StateTrajectory {
    pub fn samples(&self) -> usize {
        self.s_grid.len()
    }

    pub fn nodes(&self) -> usize {
        self.p.ncols()
    }

    pub fn segments(&self) -> usize {
        self.params.segments()
    }

    /// Indices of the `1/M` report grid.
    pub fn report_indices(&self) -> impl Iterator<Item = usize> {
        (0..self.samples()).step_by(self.stepping.substeps)
    }

    /// Physical time of sample `j`.
    pub fn time_at(&self, j: usize) -> f64 {
        time_map(self.s_grid[j], &self.params.theta).unwrap_or(f64::NAN)
    }

    /// Pressure at the valve node.
    pub fn terminal_pressure(&self) -> ndarray::ArrayView1<'_, f64> {
        self.p.column(self.nodes() - 1)
    }
}

fn first_non_finite(row: &[f64]) -> Option<usize> {
    row.iter().position(|x| !x.is_finite())
}

/// Integrates the time-scaled system over `s ∈ [0, r]` from the steady state.
///
/// The parameters need not satisfy the equality constraints.
pub fn simulate(
    cfg: &PipelineConfig,
    disc: &DiscretizationConfig,
    params: &ControlParams,
) -> Result<StateTrajectory> {
    cfg.validate()?;
    disc.validate()?;
    validate_params(params, disc)?;
    let grid = SpatialGrid::new(cfg, disc.cells);
    let stepping = Stepping::new(cfg, disc);
    let theta_max = params.theta.iter().cloned().fold(0.0, f64::max);
    stepping.check(cfg, disc, theta_max)?;

    let op = PipeOperator::new(cfg, &grid);
    let n1 = grid.len();
    let r = disc.segments;
    let spm = stepping.steps_per_segment;
    let h = stepping.h;
    let samples = stepping.samples(r);

    let (phi1, phi2) = steady_initial_state(cfg, &grid);
    let mut x = [phi1, phi2].concat();
    x[0] = cfg.reservoir_pressure;
    x[n1 + grid.cells] = control_in_segment(0.0, 0, params);

    let mut p = Array2::zeros((samples, n1));
    let mut v = Array2::zeros((samples, n1));
    p.row_mut(0).assign(&ndarray::ArrayView1::from(&x[..n1]));
    v.row_mut(0).assign(&ndarray::ArrayView1::from(&x[n1..]));
    let s_grid: Vec<f64> = (0..samples).map(|j| j as f64 / spm as f64).collect();

    let mut rk = Rk4::new(2 * n1);
    for k in 0..r {
        let theta = params.theta[k];
        for step in 0..spm {
            let j = k * spm + step;
            let s0 = s_grid[j];
            rk.step(h, &mut x, |c, y, dy| {
                let u = control_in_segment(s0 + c * h, k, params);
                let (yp, yv) = y.split_at(n1);
                let (dp, dv) = dy.split_at_mut(n1);
                op.state_rhs(theta, yp, yv, u, dp, dv);
            });
            // Knots take the value of the segment on their right.
            let s1 = s_grid[j + 1];
            let next = if step + 1 == spm && k + 1 < r { k + 1 } else { k };
            x[0] = cfg.reservoir_pressure;
            x[n1 + grid.cells] = control_in_segment(s1, next, params);
            if let Some(i) = first_non_finite(&x) {
                return Err(Error::NonFinite {
                    what: if i < n1 { "pressure" } else { "velocity" },
                    node: i % n1,
                    sample: j + 1,
                });
            }
            p.row_mut(j + 1).assign(&ndarray::ArrayView1::from(&x[..n1]));
            v.row_mut(j + 1).assign(&ndarray::ArrayView1::from(&x[n1..]));
        }
    }

    Ok(StateTrajectory {
        s_grid,
        p,
        v,
        params: params.clone(),
        stepping,
    })
}

/// Trajectory of the untransformed system on a physical time grid.
#[derive(Debug, Clone)]
pub struct PhysicalTrajectory {
    pub times: Vec<f64>,
    pub p: Array2<f64>,
    pub v: Array2<f64>,
}

/// Integrates the physical-time system with uniform step `dt` over `[0, T]`
/// under an arbitrary valve law `control(t)`.
pub fn simulate_physical(
    cfg: &PipelineConfig,
    cells: usize,
    dt: f64,
    control: impl Fn(f64) -> f64,
) -> Result<PhysicalTrajectory> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", "dt must be positive"));
    }
    let steps = (cfg.horizon / dt).round().max(1.0) as usize;
    if ((steps as f64) * dt - cfg.horizon).abs() > 1e-9 * cfg.horizon {
        return Err(Error::invalid("dt", "T must be a whole number of steps"));
    }
    let times: Vec<f64> = (0..=steps).map(|j| j as f64 * cfg.horizon / steps as f64).collect();
    simulate_physical_on(cfg, cells, &times, control)
}

/// As [`simulate_physical`] on an arbitrary increasing time grid.
pub fn simulate_physical_on(
    cfg: &PipelineConfig,
    cells: usize,
    times: &[f64],
    control: impl Fn(f64) -> f64,
) -> Result<PhysicalTrajectory> {
    cfg.validate()?;
    if cells < 2 || !cells.is_multiple_of(2) {
        return Err(Error::invalid("N", "N must be even and at least 2"));
    }
    if times.len() < 2 || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("dt", "time grid must be strictly increasing"));
    }
    let grid = SpatialGrid::new(cfg, cells);
    let dt_max = times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let cfl = cfg.wave_speed * dt_max / grid.dl;
    if cfl > CFL_LIMIT * (1.0 + 1e-12) {
        return Err(Error::Unstable {
            cfl,
            limit: CFL_LIMIT,
            m: 0,
            substeps: 1,
        });
    }

    let op = PipeOperator::new(cfg, &grid);
    let n1 = grid.len();
    let (phi1, phi2) = steady_initial_state(cfg, &grid);
    let mut x = [phi1, phi2].concat();
    x[0] = cfg.reservoir_pressure;
    x[n1 + cells] = control(times[0]);

    let mut p = Array2::zeros((times.len(), n1));
    let mut v = Array2::zeros((times.len(), n1));
    p.row_mut(0).assign(&ndarray::ArrayView1::from(&x[..n1]));
    v.row_mut(0).assign(&ndarray::ArrayView1::from(&x[n1..]));
    let mut rk = Rk4::new(2 * n1);
    for j in 0..times.len() - 1 {
        let t0 = times[j];
        let dt = times[j + 1] - t0;
        rk.step(dt, &mut x, |c, y, dy| {
            let u = control(t0 + c * dt);
            let (yp, yv) = y.split_at(n1);
            let (dp, dv) = dy.split_at_mut(n1);
            op.state_rhs(1.0, yp, yv, u, dp, dv);
        });
        x[0] = cfg.reservoir_pressure;
        x[n1 + cells] = control(times[j + 1]);
        if let Some(i) = first_non_finite(&x) {
            return Err(Error::NonFinite {
                what: if i < n1 { "pressure" } else { "velocity" },
                node: i % n1,
                sample: j + 1,
            });
        }
        p.row_mut(j + 1).assign(&ndarray::ArrayView1::from(&x[..n1]));
        v.row_mut(j + 1).assign(&ndarray::ArrayView1::from(&x[n1..]));
    }
    Ok(PhysicalTrajectory {
        times: times.to_vec(),
        p,
        v,
    })
}
