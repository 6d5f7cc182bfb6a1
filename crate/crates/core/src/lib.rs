//! Dirichlet forms, resistance metric and Harnack experiments on a
//! tree-like self-similar fractal with four contractions.

pub mod addressing;
pub mod error;
pub mod graph;
pub mod harmonics;
pub mod harnack;
pub mod measure;
pub mod rational;
pub mod solver;
pub mod stats;
pub mod exit_time;
pub mod verify;
pub mod cli;

pub use addressing::{canonicalize, cell_intersection, Corner, IntersectionKind, VertexId, Word};
pub use error::{Error, Result};
pub use graph::{schur_trace, BallRegion, LevelGraph};
pub use rational::{Rational, Scalar};
