//! The time-scaling map between scaled time `s ∈ [0, r]` and physical time,
//! the piecewise-linear valve control expressed in `s`, and the equality
//! constraints on the decision vector.
//!
//! Segment `k` (0-based here) occupies `s ∈ [k, k+1)` and lasts `theta[k]`
//! seconds. Integer `s` belongs to the segment on its right, except `s = r`
//! which is clamped into the last segment.

use serde::Serialize;

use crate::config::{ControlParams, PipelineConfig};
use crate::error::{Error, Result};

/// Index of the segment containing `s`, using the right-continuous convention.
#[inline]
pub fn segment_of(s: f64, segments: usize) -> usize {
    (s.floor().max(0.0) as usize).min(segments - 1)
}

fn check_domain(s: f64, r: usize) -> Result<()> {
    if (0.0..=r as f64).contains(&s) {
        Ok(())
    } else {
        Err(Error::OutOfDomain { s, r })
    }
}

/// Physical time reached at scaled time `s` on segment `k`, i.e. the linear
/// extension of segment `k`'s branch of the time map. Used for one-sided
/// evaluations at knots.
#[inline]
pub fn time_in_segment(s: f64, k: usize, theta: &[f64]) -> f64 {
    theta[..k].iter().sum::<f64>() + theta[k] * (s - k as f64)
}

/// `t = psi(s | theta)`: sum of completed durations plus the elapsed fraction
/// of the current one. `psi(r) = sum(theta)`.
pub fn time_map(s: f64, theta: &[f64]) -> Result<f64> {
    let r = theta.len();
    check_domain(s, r)?;
    if s == r as f64 {
        return Ok(theta.iter().sum());
    }
    Ok(time_in_segment(s, segment_of(s, r), theta))
}

/// Inverse of [`time_map`] on `[0, sum(theta)]`; values outside are clamped.
pub fn inverse_time_map(t: f64, theta: &[f64]) -> f64 {
    let mut start = 0.0;
    for (k, &th) in theta.iter().enumerate() {
        let end = start + th;
        if t < end || k + 1 == theta.len() {
            let frac = ((t - start) / th).clamp(0.0, 1.0);
            return k as f64 + frac;
        }
        start = end;
    }
    0.0
}

/// Control on segment `k` evaluated at `s` (no domain check); at a knot this
/// gives the one-sided limit from segment `k`.
#[inline]
pub fn control_in_segment(s: f64, k: usize, params: &ControlParams) -> f64 {
    params.sigma1[k] * time_in_segment(s, k, &params.theta) + params.sigma2[k]
}

/// `u(s) = sigma1[k] psi(s) + sigma2[k]` with `k` the segment containing `s`.
pub fn control_value(s: f64, params: &ControlParams) -> Result<f64> {
    let r = params.segments();
    check_domain(s, r)?;
    let k = segment_of(s, r);
    Ok(params.sigma1[k] * time_map(s, &params.theta)? + params.sigma2[k])
}

/// Control as a function of physical time, for plotting and for driving the
/// physical-time simulator. `t` beyond the last knot stays on the last segment.
pub fn control_at_time(t: f64, params: &ControlParams) -> f64 {
    let times = params.switching_times();
    let k = times
        .iter()
        .position(|&tk| t < tk)
        .unwrap_or(params.segments() - 1);
    params.sigma1[k] * t + params.sigma2[k]
}

/// Left-minus-right values of the equality constraints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintResiduals {
    /// Flow continuity at the r−1 interior knots [m/s].
    pub continuity: Vec<f64>,
    /// `sigma1[r] T + sigma2[r]`, the valve must be shut at `T` [m/s].
    pub terminal: f64,
    /// `sigma2[1] − u_max` [m/s].
    pub initial: f64,
    /// `sum(theta) − T` [s].
    pub total_time: f64,
}

impl ConstraintResiduals {
    pub fn max_abs(&self) -> f64 {
        self.continuity
            .iter()
            .chain([&self.terminal, &self.initial, &self.total_time])
            .fold(0.0, |m: f64, x| m.max(x.abs()))
    }
}

pub fn constraint_residuals(params: &ControlParams, cfg: &PipelineConfig) -> ConstraintResiduals {
    let r = params.segments();
    let times = params.switching_times();
    let continuity = (0..r.saturating_sub(1))
        .map(|k| {
            let t = times[k];
            params.sigma1[k] * t + params.sigma2[k] - params.sigma1[k + 1] * t - params.sigma2[k + 1]
        })
        .collect();
    ConstraintResiduals {
        continuity,
        terminal: params.sigma1[r - 1] * cfg.horizon + params.sigma2[r - 1],
        initial: params.sigma2[0] - cfg.u_max,
        total_time: times[r - 1] - cfg.horizon,
    }
}
