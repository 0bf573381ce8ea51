//! Lagrange-Galerkin finite elements for transient Oseen and Navier-Stokes
//! flow on the unit square.
//!
//! The material derivative is discretized along the upwind foot-point map
//! `X(x) = x - w*(x) dt` with a piecewise-linear `w*`, which keeps the map
//! affine on each element and lets the composite term `(u o X, v)` be
//! integrated exactly by polygon clipping. Velocity and pressure use either
//! the Taylor-Hood pair `P2/P1` or an equal-order pair `Pk/Pk` with the
//! symmetric stabilization
//! `C(p, q) = sum_K h_K^{2k} sum_{|a|=k} (D^a p, D^a q)_K`.
//!
//! ```
//! use lgfem::{example41, run, ProblemKind, RunConfig, SchemeKind};
//!
//! let config = RunConfig {
//!     scheme: SchemeKind::OseenStabilized,
//!     n: 4,
//!     dt: 1.0 / 16.0,
//!     final_time: 0.25,
//!     ..RunConfig::default()
//! };
//! let problem = example41(1.0, 1e-2, ProblemKind::Oseen);
//! let states: Vec<_> = run(config, problem)?.collect::<Result<_, _>>()?;
//! assert_eq!(states.len(), 5);
//! # Ok::<(), lgfem::Error>(())
//! ```

pub mod assembly;
pub mod characteristics;
pub mod clip;
pub mod error;
pub mod fe;
pub mod linsolve;
pub mod mesh;
pub mod metrics;
pub mod problems;
pub mod quadrature;
pub mod scheme;
pub mod sparse;

pub use assembly::{build_system, ElementPair, Operators, SaddleSystem, SystemParams};
pub use characteristics::{CharMap, CompositeMode, JacobianBounds};
pub use error::{Error, Result};
pub use fe::{FeSpace, Field};
pub use linsolve::{LinearSolver, SolveStats, SolverKind, SolverOptions};
pub use mesh::{Mesh, MeshPattern, Point};
pub use metrics::{fit_order, relative_errors, ErrorAccumulator, ErrorReport, OrderFit};
pub use problems::{example41, example42, zero_problem, ProblemDef, ProblemKind};
pub use scheme::{check_hypotheses, run, RunConfig, SchemeKind, Simulation, TrajectoryState};
pub use sparse::{CsrMatrix, SparseSymMatrix};

// Book chapters, compiled and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/meshes.md")]
    mod meshes {}
    #[doc = include_str!("../../../book/src/characteristics.md")]
    mod characteristics {}
    #[doc = include_str!("../../../book/src/stabilization.md")]
    mod stabilization {}
    #[doc = include_str!("../../../book/src/time-stepping.md")]
    mod time_stepping {}
    #[doc = include_str!("../../../book/src/errors.md")]
    mod errors {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
