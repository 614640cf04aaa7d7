//! Augmented-Lagrangian solver for the valve-schedule problem.
//!
//! Decision vector: all slopes `sigma1`, the intercepts `sigma2[1..]`, and
//! (for the time-scaled problem) the durations `theta`. `sigma2[0]` is pinned
//! to `u_max`, which satisfies the initial-velocity equality exactly.
//! The remaining equalities (knot continuity and shut valve at `T`, scaled by
//! `1/u_max`, and total duration, scaled by `1/T`) are handled by the merit
//!
//! ```text
//! L(z) = J(z) + y·c(z) + (rho/2) |c(z)|^2
//! ```
//!
//! minimized by projected L-BFGS with Armijo backtracking, durations kept in
//! `[theta_min, T]`. After each inner solve the multipliers are updated and
//! the penalty grows when feasibility stalls.

use std::collections::VecDeque;

use serde::Serialize;

use crate::adjoint::solve_costate;
use crate::config::{validate_params, ControlParams, DiscretizationConfig, PipelineConfig};
use crate::error::{Error, Result};
use crate::forward::{simulate, StateTrajectory};
use crate::gradient::{gradient, objective, GradientBundle};
use crate::time_scaling::constraint_residuals;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimOptions {
    pub max_iters: usize,
    pub tol_obj: f64,
    pub tol_constraint: f64,
    pub penalty_init: f64,
    pub penalty_growth: f64,
    pub ls_shrink: f64,
    pub ls_c1: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        OptimOptions {
            max_iters: 500,
            tol_obj: 1e-6,
            tol_constraint: 1e-6,
            penalty_init: 10.0,
            penalty_growth: 10.0,
            ls_shrink: 0.5,
            ls_c1: 1e-4,
        }
    }
}

impl OptimOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(key, format!("{key} must be positive")))
            }
        };
        positive("tol_obj", self.tol_obj)?;
        positive("tol_constraint", self.tol_constraint)?;
        positive("penalty_init", self.penalty_init)?;
        if !(self.penalty_growth > 1.0 && self.penalty_growth.is_finite()) {
            return Err(Error::invalid("penalty_growth", "penalty_growth must exceed 1"));
        }
        for (key, x) in [("ls_shrink", self.ls_shrink), ("ls_c1", self.ls_c1)] {
            if !(x > 0.0 && x < 1.0) {
                return Err(Error::invalid(key, format!("{key} must lie in (0, 1)")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIters,
    LineSearchFailure,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Converged => "converged",
            Status::MaxIters => "max_iters",
            Status::LineSearchFailure => "line_search_failure",
        })
    }
}

/// One accepted iterate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterRecord {
    pub iter: usize,
    #[serde(rename = "J")]
    pub j: f64,
    pub residual_max: f64,
    /// Line-search step length; 0 for the initial row.
    pub step: f64,
    /// Augmented-Lagrangian merit at this iterate.
    pub merit: f64,
    /// Outer (multiplier) iteration the step belongs to.
    pub outer: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimResult {
    pub params: ControlParams,
    #[serde(rename = "J")]
    pub j: f64,
    pub residual_max: f64,
    pub history: Vec<IterRecord>,
    pub status: Status,
}

/// Uniform durations and one straight ramp from `u_max` to 0 over `T`.
pub fn initial_guess(cfg: &PipelineConfig, disc: &DiscretizationConfig) -> ControlParams {
    let r = disc.segments;
    ControlParams {
        sigma1: vec![-cfg.u_max / cfg.horizon; r],
        sigma2: vec![cfg.u_max; r],
        theta: vec![cfg.horizon / r as f64; r],
    }
}

/// Optimizes slopes, intercepts and segment durations.
pub fn optimize(
    cfg: &PipelineConfig,
    disc: &DiscretizationConfig,
    init: &ControlParams,
    opts: &OptimOptions,
) -> Result<OptimResult> {
    Problem::new(cfg, disc, init, true)?.solve(opts)
}

/// Optimizes slopes and intercepts with the durations frozen at `init.theta`.
pub fn optimize_fixed_grid(
    cfg: &PipelineConfig,
    disc: &DiscretizationConfig,
    init: &ControlParams,
    opts: &OptimOptions,
) -> Result<OptimResult> {
    Problem::new(cfg, disc, init, false)?.solve(opts)
}

struct Problem<'a> {
    cfg: &'a PipelineConfig,
    disc: &'a DiscretizationConfig,
    init: ControlParams,
    time_scaled: bool,
    r: usize,
    /// Segment start times of `init`.
    t0: Vec<f64>,
    /// Objective normalization, `J(init)` when positive.
    j_scale: f64,
}

/// Objective, constraints and state at one point.
struct Point {
    z: Vec<f64>,
    params: ControlParams,
    j: f64,
    c: Vec<f64>,
    residual_max: f64,
    state: StateTrajectory,
}

// Internally each segment is described by the control values `a_k`, `b_k` it
// takes at the start and end times of the initial schedule, a fixed linear
// change of variables from (sigma1, sigma2). In these coordinates the
// continuity residuals are differences of neighbouring variables instead of
// combinations weighted by the switching times, which keeps the merit well
// conditioned. The layout is `[a_1..a_{r-1}, b_0..b_{r-1}, theta..]`; `a_0`
// is pinned to `u_max`.
impl<'a> Problem<'a> {
    fn new(
        cfg: &'a PipelineConfig,
        disc: &'a DiscretizationConfig,
        init: &ControlParams,
        time_scaled: bool,
    ) -> Result<Self> {
        cfg.validate()?;
        disc.validate()?;
        validate_params(init, disc)?;
        if let Some(k) = init.theta.iter().position(|&t| t > cfg.horizon) {
            return Err(Error::InvalidParams(format!(
                "theta_{} = {} exceeds T = {}",
                k + 1,
                init.theta[k],
                cfg.horizon
            )));
        }
        let mut t0 = vec![0.0];
        t0.extend(init.switching_times());
        Ok(Problem {
            cfg,
            disc,
            init: init.clone(),
            time_scaled,
            r: disc.segments,
            t0,
            j_scale: 1.0,
        })
    }

    fn dim(&self) -> usize {
        if self.time_scaled {
            3 * self.r - 1
        } else {
            2 * self.r - 1
        }
    }

    fn encode(&self, p: &ControlParams) -> Vec<f64> {
        let r = self.r;
        let mut z = Vec::with_capacity(self.dim());
        for k in 1..r {
            z.push(p.sigma1[k] * self.t0[k] + p.sigma2[k]);
        }
        for k in 0..r {
            z.push(p.sigma1[k] * self.t0[k + 1] + p.sigma2[k]);
        }
        if self.time_scaled {
            z.extend_from_slice(&p.theta);
        }
        z
    }

    fn decode(&self, z: &[f64]) -> ControlParams {
        let r = self.r;
        let mut sigma1 = Vec::with_capacity(r);
        let mut sigma2 = Vec::with_capacity(r);
        for k in 0..r {
            let a = if k == 0 { self.cfg.u_max } else { z[k - 1] };
            let b = z[r - 1 + k];
            let slope = (b - a) / (self.t0[k + 1] - self.t0[k]);
            sigma1.push(slope);
            sigma2.push(if k == 0 { a } else { a - slope * self.t0[k] });
        }
        ControlParams {
            sigma1,
            sigma2,
            theta: if self.time_scaled {
                z[2 * r - 1..].to_vec()
            } else {
                self.init.theta.clone()
            },
        }
    }

    /// Maps a gradient over `[sigma1.., sigma2.., theta..]` to `z`.
    fn pull_back(&self, g: &[f64]) -> Vec<f64> {
        let r = self.r;
        let mut out = vec![0.0; self.dim()];
        for k in 0..r {
            let width = self.t0[k + 1] - self.t0[k];
            let (g1, g2) = (g[k], g[r + k]);
            let start = self.t0[k];
            // sigma1 = (b - a)/width, sigma2 = a - sigma1 * start
            let db = g1 / width - g2 * start / width;
            out[r - 1 + k] += db;
            if k > 0 {
                out[k - 1] += -g1 / width + g2 * (1.0 + start / width);
            }
        }
        if self.time_scaled {
            out[2 * r - 1..].copy_from_slice(&g[2 * r..]);
        }
        out
    }

    fn lower(&self, i: usize) -> f64 {
        if self.time_scaled && i >= 2 * self.r - 1 {
            self.disc.theta_min
        } else {
            f64::NEG_INFINITY
        }
    }

    fn upper(&self, i: usize) -> f64 {
        if self.time_scaled && i >= 2 * self.r - 1 {
            self.cfg.horizon
        } else {
            f64::INFINITY
        }
    }

    fn project(&self, z: &mut [f64]) {
        for (i, zi) in z.iter_mut().enumerate() {
            *zi = zi.clamp(self.lower(i), self.upper(i));
        }
    }

    /// Scaled equality constraints.
    fn constraints(&self, p: &ControlParams) -> Vec<f64> {
        let res = constraint_residuals(p, self.cfg);
        let mut c: Vec<f64> = res.continuity.iter().map(|x| x / self.cfg.u_max).collect();
        c.push(res.terminal / self.cfg.u_max);
        if self.time_scaled {
            c.push(res.total_time / self.cfg.horizon);
        }
        c
    }

    /// `J^T w` for the Jacobian `J` of the scaled constraints with respect to
    /// `[sigma1.., sigma2.., theta..]`.
    fn constraint_vjp(&self, p: &ControlParams, w: &[f64]) -> Vec<f64> {
        let r = self.r;
        let u = self.cfg.u_max;
        let mut g = vec![0.0; 3 * r];
        let times = p.switching_times();
        for k in 0..r - 1 {
            let wk = w[k] / u;
            let t = times[k];
            g[k] += wk * t;
            g[k + 1] -= wk * t;
            g[r + k] += wk;
            g[r + k + 1] -= wk;
            let d = wk * (p.sigma1[k] - p.sigma1[k + 1]);
            for m in 0..=k {
                g[2 * r + m] += d;
            }
        }
        let wt = w[r - 1] / u;
        g[r - 1] += wt * self.cfg.horizon;
        g[2 * r - 1] += wt;
        if self.time_scaled {
            let wc = w[r] / self.cfg.horizon;
            for m in 0..r {
                g[2 * r + m] += wc;
            }
        }
        g
    }

    fn evaluate(&self, z: Vec<f64>) -> Result<Point> {
        let params = self.decode(&z);
        let state = simulate(self.cfg, self.disc, &params)?;
        let j = objective(self.cfg, self.disc, &params, &state)?;
        if !j.is_finite() {
            return Err(Error::NonFinite {
                what: "objective",
                node: 0,
                sample: 0,
            });
        }
        let c = self.constraints(&params);
        let residual_max = constraint_residuals(&params, self.cfg).max_abs();
        Ok(Point {
            z,
            params,
            j,
            c,
            residual_max,
            state,
        })
    }

    /// Merit with the objective normalized by its initial value.
    fn merit(&self, pt: &Point, y: &[f64], rho: f64) -> f64 {
        pt.j / self.j_scale
            + pt
                .c
                .iter()
                .zip(y)
                .map(|(ci, yi)| yi * ci + 0.5 * rho * ci * ci)
                .sum::<f64>()
    }

    fn merit_gradient(&self, pt: &Point, y: &[f64], rho: f64) -> Result<Vec<f64>> {
        let costate = solve_costate(self.cfg, self.disc, &pt.params, &pt.state)?;
        let gb: GradientBundle = gradient(self.cfg, self.disc, &pt.params, &pt.state, &costate)?;
        let w: Vec<f64> = pt.c.iter().zip(y).map(|(ci, yi)| yi + rho * ci).collect();
        let mut g = gb.to_vec();
        for (gi, ci) in g.iter_mut().zip(self.constraint_vjp(&pt.params, &w)) {
            *gi = *gi / self.j_scale + ci;
        }
        if !self.time_scaled {
            g.truncate(2 * self.r);
        }
        let mut full = g;
        full.resize(3 * self.r, 0.0);
        Ok(self.pull_back(&full))
    }

    fn solve(mut self, opts: &OptimOptions) -> Result<OptimResult> {
        opts.validate()?;
        let res0 = constraint_residuals(&self.init, self.cfg);
        if res0.max_abs() > opts.tol_constraint {
            return Err(Error::Infeasible(format!(
                "max |residual| = {:.3e} exceeds tol_constraint = {:.1e}",
                res0.max_abs(),
                opts.tol_constraint
            )));
        }
        let mut z0 = self.encode(&self.init);
        self.project(&mut z0);
        let mut pt = self.evaluate(z0)?;
        if pt.j > 0.0 {
            self.j_scale = pt.j;
        }
        let mut y = vec![0.0; pt.c.len()];
        let mut rho = opts.penalty_init;
        let mut history = vec![IterRecord {
            iter: 0,
            j: pt.j,
            residual_max: pt.residual_max,
            step: 0.0,
            merit: self.merit(&pt, &y, rho),
            outer: 0,
        }];
        let mut iter = 0;
        let mut outer = 0;
        let mut prev_norm = norm_inf(&pt.c);
        let mut idle_outer = 0;

        let status = loop {
            if iter >= opts.max_iters {
                break Status::MaxIters;
            }
            outer += 1;
            // Inexact inner solves: loose at first, down to tol_obj.
            let inner_tol = (1e-2 * 0.1f64.powi(outer as i32 - 1)).max(opts.tol_obj);
            let inner = self.inner(&mut pt, &y, rho, inner_tol, opts, &mut iter, outer, &mut history)?;
            let stalled = inner.last_rel_change < opts.tol_obj;
            if pt.residual_max <= opts.tol_constraint && stalled {
                break Status::Converged;
            }
            if inner.accepted == 0 && inner.failed {
                idle_outer += 1;
                if idle_outer >= 3 {
                    break Status::LineSearchFailure;
                }
            } else {
                idle_outer = 0;
            }
            for (yi, ci) in y.iter_mut().zip(&pt.c) {
                *yi += rho * ci;
            }
            let norm = norm_inf(&pt.c);
            if norm > 0.25 * prev_norm {
                rho *= opts.penalty_growth;
            }
            prev_norm = norm;
        };

        Ok(OptimResult {
            params: pt.params,
            j: pt.j,
            residual_max: pt.residual_max,
            history,
            status,
        })
    }

    /// Projected L-BFGS on the merit with fixed multipliers and penalty.
    #[allow(clippy::too_many_arguments)]
    fn inner(
        &self,
        pt: &mut Point,
        y: &[f64],
        rho: f64,
        inner_tol: f64,
        opts: &OptimOptions,
        iter: &mut usize,
        outer: usize,
        history: &mut Vec<IterRecord>,
    ) -> Result<InnerOutcome> {
        const MEMORY: usize = 20;
        // Accepted steps per inner solve before the multipliers are refreshed.
        const BUDGET: usize = 50;
        let n = self.dim();
        let mut pairs: VecDeque<(Vec<f64>, Vec<f64>)> = VecDeque::new();
        let mut f = self.merit(pt, y, rho);
        let mut g = self.merit_gradient(pt, y, rho)?;
        let mut out = InnerOutcome {
            accepted: 0,
            failed: false,
            last_rel_change: f64::INFINITY,
        };

        while *iter < opts.max_iters {
            let free: Vec<bool> = (0..n)
                .map(|i| {
                    !((pt.z[i] <= self.lower(i) && g[i] > 0.0) || (pt.z[i] >= self.upper(i) && g[i] < 0.0))
                })
                .collect();
            let pg: Vec<f64> = g.iter().zip(&free).map(|(gi, &fr)| if fr { *gi } else { 0.0 }).collect();
            if norm_inf(&pg) == 0.0 {
                out.last_rel_change = 0.0;
                break;
            }

            let mut d = two_loop(&pg, &pairs);
            for (di, &fr) in d.iter_mut().zip(&free) {
                if !fr {
                    *di = 0.0;
                }
            }
            if dot(&d, &pg) >= 0.0 || pairs.is_empty() {
                // Steepest descent, first trial moving no variable more than
                // 0.1 in its own units.
                let scale = 0.1 / norm_inf(&pg);
                d = pg.iter().map(|gi| -gi * scale).collect();
                pairs.clear();
            }

            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let mut z = pt.z.clone();
                for i in 0..n {
                    z[i] += alpha * d[i];
                }
                self.project(&mut z);
                let dz: Vec<f64> = z.iter().zip(&pt.z).map(|(a, b)| a - b).collect();
                if norm_inf(&dz) == 0.0 {
                    break;
                }
                match self.evaluate(z) {
                    Ok(trial) => {
                        let ft = self.merit(&trial, y, rho);
                        if ft <= f + opts.ls_c1 * dot(&g, &dz).min(0.0) && ft.is_finite() {
                            accepted = Some((trial, ft, dz));
                            break;
                        }
                    }
                    Err(e) if e.is_numerical() => {}
                    Err(e) => return Err(e),
                }
                alpha *= opts.ls_shrink;
            }

            let Some((trial, ft, dz)) = accepted else {
                if !pairs.is_empty() {
                    pairs.clear();
                    continue;
                }
                out.failed = true;
                out.last_rel_change = 0.0;
                break;
            };
            let gt = self.merit_gradient(&trial, y, rho)?;
            let dg: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
            if dot(&dz, &dg) > 1e-12 * norm2(&dz) * norm2(&dg) {
                pairs.push_back((dz, dg));
                if pairs.len() > MEMORY {
                    pairs.pop_front();
                }
            }

            let rel_merit = (f - ft) / ft.abs().max(1e-300);
            let rel_j = (pt.j - trial.j).abs() / trial.j.abs().max(1e-300);
            *pt = trial;
            f = ft;
            g = gt;
            *iter += 1;
            out.accepted += 1;
            out.last_rel_change = rel_j.max(rel_merit);
            history.push(IterRecord {
                iter: *iter,
                j: pt.j,
                residual_max: pt.residual_max,
                step: alpha,
                merit: f,
                outer,
            });
            if rel_merit < inner_tol || out.accepted >= BUDGET {
                break;
            }
        }
        Ok(out)
    }
}

struct InnerOutcome {
    accepted: usize,
    failed: bool,
    last_rel_change: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

/// L-BFGS two-loop recursion: returns `-H g`.
fn two_loop(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y) in pairs.iter().rev() {
        let a = dot(s, &q) / dot(y, s);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y), a) in pairs.iter().zip(alphas.into_iter().rev()) {
        let b = dot(y, &q) / dot(y, s);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|x| *x = -*x);
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (PipelineConfig, DiscretizationConfig) {
        let cfg = PipelineConfig::benchmark();
        let disc = DiscretizationConfig::new(10, 4, 20, &cfg);
        (cfg, disc)
    }

    #[test]
    fn initial_guess_is_feasible_ramp() {
        let cfg = PipelineConfig::benchmark();
        let disc = DiscretizationConfig::benchmark(&cfg);
        let p = initial_guess(&cfg, &disc);
        assert_eq!(p.theta, vec![1.0; 10]);
        assert_eq!(p.sigma1, vec![-0.2; 10]);
        assert_eq!(p.sigma2, vec![2.0; 10]);
        assert!(constraint_residuals(&p, &cfg).max_abs() < 1e-14);
        let u_end = crate::time_scaling::control_value(10.0, &p).unwrap();
        assert!(u_end.abs() < 1e-14);
    }

    #[test]
    fn options_are_validated() {
        assert!(OptimOptions::default().validate().is_ok());
        let bad = OptimOptions {
            ls_c1: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = OptimOptions {
            penalty_growth: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    fn sample_params() -> ControlParams {
        ControlParams {
            sigma1: vec![-0.3, -0.1, -0.25, -0.2],
            sigma2: vec![2.0, 1.7, 2.1, 1.9],
            theta: vec![2.0, 3.0, 1.5, 3.2],
        }
    }

    #[test]
    fn constraint_jacobian_matches_differences() {
        let (cfg, disc) = small();
        let prob = Problem::new(&cfg, &disc, &initial_guess(&cfg, &disc), true).unwrap();
        let p = sample_params();
        let x = p.to_vec();
        let w = [0.3, -1.1, 0.7, 2.0, -0.4];
        let g = prob.constraint_vjp(&p, &w);
        for i in 0..x.len() {
            let h = 1e-6;
            let mut a = x.clone();
            let mut b = x.clone();
            a[i] += h;
            b[i] -= h;
            let ca = prob.constraints(&ControlParams::from_slice(&a).unwrap());
            let cb = prob.constraints(&ControlParams::from_slice(&b).unwrap());
            let fd: f64 = ca.iter().zip(&cb).zip(&w).map(|((x, y), wi)| wi * (x - y) / (2.0 * h)).sum();
            assert!((fd - g[i]).abs() < 1e-8, "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn coordinates_round_trip_and_pull_back() {
        let (cfg, disc) = small();
        let mut init = initial_guess(&cfg, &disc);
        init.theta = vec![2.0, 3.0, 1.5, 3.5];
        for time_scaled in [true, false] {
            let prob = Problem::new(&cfg, &disc, &init, time_scaled).unwrap();
            let mut p = sample_params();
            if !time_scaled {
                p.theta = init.theta.clone();
            }
            let back = prob.decode(&prob.encode(&p));
            for (x, y) in back.to_vec().iter().zip(p.to_vec()) {
                assert!((x - y).abs() < 1e-12, "{x} vs {y}");
            }
            // Linear test functional on parameter space.
            let c: Vec<f64> = (0..12).map(|i| 0.3 * i as f64 - 1.0).collect();
            let f = |z: &[f64]| -> f64 { prob.decode(z).to_vec().iter().zip(&c).map(|(a, b)| a * b).sum() };
            let mut gfull = c.clone();
            if !time_scaled {
                gfull[8..].iter_mut().for_each(|x| *x = 0.0);
            }
            let g = prob.pull_back(&gfull);
            let z = prob.encode(&p);
            for i in 0..z.len() {
                let mut a = z.clone();
                let mut b = z.clone();
                a[i] += 1e-6;
                b[i] -= 1e-6;
                let fd = (f(&a) - f(&b)) / 2e-6;
                assert!((fd - g[i]).abs() < 1e-7, "{i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn zero_budget_returns_init() {
        let (cfg, disc) = small();
        let init = initial_guess(&cfg, &disc);
        let opts = OptimOptions {
            max_iters: 0,
            ..Default::default()
        };
        let res = optimize(&cfg, &disc, &init, &opts).unwrap();
        assert_eq!(res.status, Status::MaxIters);
        assert_eq!(res.params, init);
        assert_eq!(res.history.len(), 1);
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let (cfg, disc) = small();
        let mut init = initial_guess(&cfg, &disc);
        init.sigma2[2] += 0.1;
        let err = optimize_fixed_grid(&cfg, &disc, &init, &OptimOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn two_loop_without_memory_is_steepest_descent() {
        let d = two_loop(&[1.0, -2.0], &VecDeque::new());
        assert_eq!(d, vec![-1.0, 2.0]);
    }
}
