//! Derivative-free direct-search solvers for bilevel optimization.
//!
//! The toolkit minimizes a reduced objective F(x) = f(x, y(x)), where y(x)
//! solves a parametric lower-level problem, using only upper-level function
//! values and a fixed-accuracy lower-level oracle. Two solver families are
//! provided:
//!
//! * [`ds_directional`]: directional direct search with a sufficient
//!   decrease test, in coordinate, random, and dense direction modes, with
//!   stepsize extrapolation on successful polls.
//! * [`ds_mesh`]: mesh-based direct search with a simple decrease test,
//!   exact rational mesh bookkeeping, and frame-size/mesh-size updates for
//!   smooth and nonsmooth objectives.
//!
//! Around them sit a fixed-accuracy lower-level oracle layer
//! ([`lower_level`]), a-posteriori stationarity certification
//! ([`stationarity`]), and a benchmarking harness with data and performance
//! profiles ([`bench`]).

pub mod audit;
pub mod bench;
pub mod config;
pub mod direction;
pub mod ds_directional;
pub mod ds_mesh;
pub mod error;
pub mod halton;
pub mod ledger;
pub mod linalg;
pub mod lower_level;
pub mod problem;
pub mod rng;
pub mod stationarity;
pub mod trace;

pub use config::{DirectionMode, OracleKind, Rational, SolverConfig};
pub use direction::{cosine_measure, DirectionSet};
pub use ds_directional::{run_directional, solve_directional};
pub use ds_mesh::{mesh_contains, run_mesh, solve_mesh, MeshSpec};
pub use error::{Error, Result};
pub use ledger::{decrease_accepted, evaluate_reduced, DecreaseRule, EvalLedger};
pub use lower_level::{gd_oracle, injected_error_oracle, make_oracle, LowerOracle, OracleReport};
pub use problem::{BilevelProblem, ProblemMetadata};
pub use stationarity::{goldstein_certify, min_norm_point, smooth_bound, GoldsteinCertificate};
pub use trace::{Termination, Trace, TraceRow};
