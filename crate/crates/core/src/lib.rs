//! Periodic homogenization by cell averaging.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the stencil and quadrature formulas they implement.
#![allow(clippy::needless_range_loop, clippy::type_complexity)]

pub mod cell_problems;
pub mod coefficients;
pub mod correctors;
pub mod error;
pub mod fem;
pub mod grids;
pub mod linalg;
pub mod pde_solvers;
pub mod study;
pub mod two_scale_ops;

pub use error::{HomogError, Result};

pub use cell_problems::{solve_cell_1d, solve_cell_2d, solve_correctors, CellSolution, CorrectorSet};
pub use coefficients::{CoefficientField, CoefficientKind, Profile, Tensor2};
pub use grids::{
    build_domain_grid, build_periodic_grid, cell_average, l2_norm, DomainField, DomainGrid, L2Norm,
    PeriodicGrid, TwoScaleField,
};
pub use pde_solvers::{Homogenized, OscillatingFamily, ProblemSpec, Source};
pub use study::{
    emit_report, fit_rate, parse_config, run_sweep, ConvergenceReport, Format, RateFit, ReportRow,
    RunConfig,
};
pub use two_scale_ops::{apply_cell_shift, apply_cell_shift_adjoint, CellShift};
