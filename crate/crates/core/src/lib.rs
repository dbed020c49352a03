//! Random geometric graphs on the circle S_L = R/LZ.
//!
//! The crate materializes the infinite random geometric graph `G_{L,S,p}`
//! (vertices: a dense countable subset S of the circle; edges: pairs at
//! circle distance < 1, kept independently with probability p) as a lazy,
//! deterministically seeded oracle, and implements the constructive
//! procedures built on it: witness search for geometric existential
//! closure, graph-theoretic recovery of arcs, distances and the
//! circumference L, and the back-and-forth isomorphism construction for
//! rational L.
//!
//! All coordinates are exact elements of Q[sqrt(2)] ([`exact::QuadScalar`]);
//! no decision anywhere depends on floating point.

pub mod error;
pub mod exact;
pub mod geometry;
pub mod iso;
pub mod oracle;
pub mod recovery;

pub use error::CircleError;
pub use exact::{parse_quad, parse_rational, QuadScalar, Rational};
pub use geometry::{Arc, Circle, CirclePoint};
pub use oracle::{GraphOracle, SnapshotGraph, VertexId};
