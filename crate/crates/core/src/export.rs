//! CSV writers for trajectories, costates, optimizer history and control
//! curves. Numbers use 17 significant digits so files read back bit-exact.
//! Trajectories are written on the `1/M` report grid.

use std::io::{self, Write};

use crate::adjoint::CostateTrajectory;
use crate::config::ControlParams;
use crate::forward::{SpatialGrid, StateTrajectory};
use crate::optimizer::IterRecord;
use crate::time_scaling::control_value;

/// Formats `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// `s,t,l,p,v`, one row per (report sample, node).
pub fn write_state(w: &mut impl Write, state: &StateTrajectory, grid: &SpatialGrid) -> io::Result<()> {
    writeln!(w, "s,t,l,p,v")?;
    for j in state.report_indices() {
        let s = fmt_f64(state.s_grid[j]);
        let t = fmt_f64(state.time_at(j));
        for (i, l) in grid.nodes.iter().enumerate() {
            writeln!(
                w,
                "{s},{t},{},{},{}",
                fmt_f64(*l),
                fmt_f64(state.p[[j, i]]),
                fmt_f64(state.v[[j, i]])
            )?;
        }
    }
    Ok(())
}

/// `s,l,lambda,mu`, one row per (report sample, node).
pub fn write_costate(w: &mut impl Write, costate: &CostateTrajectory, grid: &SpatialGrid) -> io::Result<()> {
    writeln!(w, "s,l,lambda,mu")?;
    for j in costate.report_indices() {
        let s = fmt_f64(costate.s_grid[j]);
        for (i, l) in grid.nodes.iter().enumerate() {
            writeln!(
                w,
                "{s},{},{},{}",
                fmt_f64(*l),
                fmt_f64(costate.lambda[[j, i]]),
                fmt_f64(costate.mu[[j, i]])
            )?;
        }
    }
    Ok(())
}

/// `t,p`: valve-node pressure against physical time.
pub fn write_terminal_pressure(w: &mut impl Write, state: &StateTrajectory) -> io::Result<()> {
    writeln!(w, "t,p")?;
    let n = state.nodes() - 1;
    for j in state.report_indices() {
        writeln!(w, "{},{}", fmt_f64(state.time_at(j)), fmt_f64(state.p[[j, n]]))?;
    }
    Ok(())
}

/// `t,u`: valve velocity against physical time on the report grid.
pub fn write_control_curve(w: &mut impl Write, state: &StateTrajectory, params: &ControlParams) -> io::Result<()> {
    writeln!(w, "t,u")?;
    for j in state.report_indices() {
        let s = state.s_grid[j];
        let u = control_value(s, params).map_err(io::Error::other)?;
        writeln!(w, "{},{}", fmt_f64(state.time_at(j)), fmt_f64(u))?;
    }
    Ok(())
}

/// `iter,J,residual_max,step`.
pub fn write_history(w: &mut impl Write, history: &[IterRecord]) -> io::Result<()> {
    writeln!(w, "iter,J,residual_max,step")?;
    for h in history {
        writeln!(
            w,
            "{},{},{},{}",
            h.iter,
            fmt_f64(h.j),
            fmt_f64(h.residual_max),
            fmt_f64(h.step)
        )?;
    }
    Ok(())
}
