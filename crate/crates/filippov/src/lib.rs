//! Numerical toolkit for piecewise smooth vector fields with crossing switching.
//!
//! A piecewise smooth system is a finite family of smooth vector fields, one
//! per region, separated by regular switching surfaces `h_i = 0`. Orbits are
//! global solutions in the crossing convention: they pass through a switching
//! surface only where the flow is transversal on both sides and points the
//! same way; tangencies, corners and gradient degeneracies terminate the
//! construction and are reported rather than regularized. On top of the flow
//! the crate builds time-T Poincare maps of periodically perturbed systems,
//! their saddle fixed points, stable and unstable manifold atlases, and the
//! quantitative inclination estimates that drive lambda-lemma style
//! accumulation of a transversal disk onto an unstable manifold.
//!
//! Module layout mirrors the pipeline: [`systems`] declares fields, surfaces
//! and pointwise classification; [`flow`] integrates global orbits with event
//! location; [`variational`] transports tangent data across arcs and
//! crossings; [`poincare`] builds return maps and their fixed points;
//! [`manifolds`] grows invariant curve atlases and inclination traces;
//! [`lambda`] measures contraction constants, checks the inclination bound
//! chain, and runs the disk-accumulation experiment; [`config`] and
//! [`report`] handle declarative experiment configs and artifact output.

pub mod benchmarks;
pub mod config;
pub mod error;
pub mod flow;
pub mod lambda;
pub mod linalg;
pub mod manifolds;
pub mod ode;
pub mod poincare;
pub mod report;
pub mod systems;
pub mod variational;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
