//! Random walks on affine automorphism groups of homogeneous trees.
//!
//! The tree `T_{q+1}` is modelled as the tree of balls in Laurent series over
//! a finite digit alphabet. Its distinguished end `ω` is the direction of
//! shrinking levels. The affine group `x ↦ tⁿx + b` with finitely supported
//! `b` acts on it, and finite products of such groups are the setting for the
//! walk, boundary and scale computations.
//!
//! Module map:
//! - [`digits`]: finitely supported digit sequences.
//! - [`tree`]: vertices, ends, metric, confluents, Busemann function.
//! - [`group`]: affine elements, products, gauges.
//! - [`walk`]: seeded right random walks and their statistics.
//! - [`boundary`]: hitting histograms, stationarity, temperate gauges.
//! - [`scale`]: scale and modular functions, exceptionality classification.
//! - [`tdlc`]: the coset tree of `V ⋊ ⟨α⟩` for a shift on digits.

pub mod boundary;
pub mod digits;
pub mod error;
pub mod group;
pub mod scale;
pub mod tdlc;
pub mod tree;
pub mod walk;

mod text;

pub use digits::{Alphabet, Digits};
pub use error::{Error, Result};
pub use group::{AffineElem, ProductElem};
pub use tree::{BoundaryPoint, End, Point, Stream, Theta, Vertex};
pub use walk::{Measure, Trajectory, WalkParams, WalkReport};
