//! Derivative-free trust-region optimization in random subspaces, for problems
//! of the form `min f(x) subject to x in C` where `C` is a closed convex set
//! and only function values of `f` are available.
//!
//! Each iteration builds a linear interpolation model of `f` on a low-dimensional
//! randomly drawn subspace, solves a trust-region subproblem restricted to that
//! subspace, and projects the step back onto `C`. Sample points are recycled
//! across iterations where the geometry allows, so the per-iteration evaluation
//! cost stays well below the ambient dimension.
//!
//! The crate is organized around the pieces of that loop:
//!
//! * [`sets`]: convex set descriptions, exact and Dykstra projections.
//! * [`model`]: simplex-gradient interpolation models and their error constants.
//! * [`sampling`]: seeded random direction and subspace generation.
//! * [`sample_set`]: reuse and pruning of previously evaluated points.
//! * [`subproblem`]: the projected-gradient trust-region subproblem solver.
//! * [`driver`]: the outer loop tying everything together.
//! * [`problems`]: benchmark objectives and ready-made constrained instances.
//!
//! # Example
//!
//! Minimize a quadratic over a box, using only function evaluations:
//!
//! ```
//! use clarsta::driver::{run, SolverConfig};
//! use clarsta::sets::ConvexSet;
//! use nalgebra::DVector;
//!
//! let n = 5;
//! let set = ConvexSet::axis_box(DVector::from_element(n, -1.0), DVector::from_element(n, 1.0))
//!     .unwrap();
//! let x0 = DVector::from_element(n, 0.0);
//! let config = SolverConfig::new(2, 1, 500, 42);
//! let result = run(|x: &DVector<f64>| x.norm_squared(), &set, &x0, &config).unwrap();
//! assert!(result.best_value < 1e-6);
//! ```

pub mod driver;
pub mod ledger;
pub mod model;
pub mod problems;
pub mod sample_set;
pub mod sampling;
pub mod sets;
pub mod subproblem;

pub use driver::{run, DriverError, IterationRecord, RunResult, SolverConfig, StopReason};
pub use sets::{ConvexSet, ProjectionSettings};
