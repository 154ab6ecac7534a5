//! First weighted eigenvalue of the restricted fractional Laplacian on masked
//! uniform grids, its minimization over rearrangement classes of the weights,
//! and polarization-based symmetry diagnostics for the minimizers.
//!
//! The pipeline is: [`geometry`] builds a [`Grid`], [`fracop`] assembles the
//! energy form, [`eigensolve`] computes the first eigenpair, [`rearrange`] and
//! [`optimize`] run the alternating descent, and [`symmetry`] checks the
//! output against half-space families.
//!
//! ```
//! use fracweight::{Grid, DomainSpec, Operator, first_eigenpair};
//!
//! let grid = Grid::new(&DomainSpec::Interval { a: -1.0, b: 1.0 }, 16)?;
//! let op = Operator::assemble(&grid, 0.5)?;
//! let g = vec![1.0; grid.n_cells()];
//! let v = vec![0.0; grid.n_cells()];
//! let pair = first_eigenpair(&op, &g, &v, 1e-10)?;
//! assert!(pair.lambda > 0.0 && pair.u.iter().all(|&x| x > 0.0));
//! # Ok::<(), fracweight::Error>(())
//! ```

pub mod cli;
pub mod eigensolve;
pub mod error;
pub mod fracop;
pub mod geometry;
pub mod optimize;
pub mod rearrange;
pub mod symmetry;

pub use eigensolve::{
    coercivity_check, first_eigenpair, rayleigh_quotient, residual, CoercivityReport, EigenPair, FactoredPencil,
};
pub use error::{Error, Result};
pub use fracop::{assemble_operator, gagliardo_seminorm_sq, normalization_constant, FracParams, Operator};
pub use geometry::{build_grid, DomainSpec, Grid, HalfSpace, HalfSpaceFamily, Image, Side};
pub use optimize::{multi_start, multi_start_seeds, optimize, optimize_from, MultiStart, OptOptions, OptResult, StopReason};
pub use rearrange::{
    check_monotone_dependence, class_from_spec, is_rearrangement, lq_norm, maximizing_rearrangement,
    minimizing_rearrangement, validate_assumptions, AssumptionReport, Monotonicity, StepSpec, WeightClass,
};
pub use symmetry::{
    check_foliated, check_reflection_invariance, check_steiner, dual_polarize, foliated_schwarz_symmetrize,
    hardy_littlewood_gap, polarize, steiner_symmetrize, FoliatedMode, HardyLittlewood, SymmetryReport,
};
