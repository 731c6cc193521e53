//! Radial numerical laboratory for energy-critical systems of coupled
//! fourth-order Schrödinger equations `i α_k ∂_t u_k + γ_k Δ² u_k = f_k(u)`.
//!
//! Everything numerical is generic over the scalar type `T: Real`; the
//! aliases below fix `T = f64`, which is what the experiment layer and the
//! command-line tool use.

pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod groundstate;
pub mod io;
pub mod literal;
pub mod model;
pub mod propagate;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{Real, C};

pub type Complex64 = C<f64>;
pub type Grid = grid::RadialGrid<f64>;
pub type Space = grid::Discretization<f64>;
pub type Params = model::ModelParams<f64>;
pub type Model = model::NonlinearityModel<f64>;
pub type State = propagate::SolutionState<f64>;
pub type Options = propagate::EvolveOptions<f64>;
pub type Run = propagate::Trajectory<f64>;
pub type Record = diagnostics::DiagnosticsRecord<f64>;
pub type GroundState = groundstate::GroundState<f64>;
