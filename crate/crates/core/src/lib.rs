//! Optimal valve-closure schedules for water-hammer mitigation.
//!
//! A pipe fed by a reservoir is shut by a downstream valve over a fixed
//! horizon `T`. The valve velocity is piecewise linear in time with free
//! breakpoints; each segment is mapped onto a unit interval of a scaled time
//! `s`, so segment durations become ordinary decision variables. The
//! pressure/velocity system is solved by the method of lines with RK4, and the
//! gradient of the pressure-surge objective comes from a costate system
//! integrated backward on the same grid. An augmented-Lagrangian method
//! enforces continuity of the control, a shut valve at `T`, and
//! `sum(theta) = T`.
//!
//! ```no_run
//! use hammerflow::{initial_guess, optimize, DiscretizationConfig, OptimOptions, PipelineConfig};
//!
//! let cfg = PipelineConfig::benchmark();
//! let disc = DiscretizationConfig::benchmark(&cfg);
//! let res = optimize(&cfg, &disc, &initial_guess(&cfg, &disc), &OptimOptions::default())?;
//! println!("J = {} ({})", res.j, res.status);
//! # Ok::<(), hammerflow::Error>(())
//! ```

pub mod adjoint;
pub mod config;
pub mod error;
pub mod exec;
pub mod export;
pub mod forward;
pub mod gradient;
pub mod optimizer;
pub mod quadrature;
pub mod time_scaling;

pub use adjoint::{rhs_costate, solve_costate, CostateTrajectory};
pub use config::{
    load_config, load_params, validate_params, ControlParams, DiscretizationConfig, PipelineConfig, RawConfig,
};
pub use error::{Error, Result};
pub use exec::Execution;
pub use forward::{
    rhs_state, simulate, simulate_physical, simulate_physical_on, steady_initial_state, PhysicalTrajectory,
    SpatialGrid, StateTrajectory, Stepping,
};
pub use gradient::{evaluate_gradient, fd_gradient, gradcheck, gradient, objective, GradientBundle};
pub use optimizer::{initial_guess, optimize, optimize_fixed_grid, OptimOptions, OptimResult, Status};
pub use time_scaling::{constraint_residuals, control_value, time_map, ConstraintResiduals};
