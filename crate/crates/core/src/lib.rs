//! Massive random-walk loop soup on Z²: exact walk counts, killed Green's
//! functions, loop sampling and cover times.

// `!(x > 0.0)` rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod lattice;
pub mod laws;
pub mod green_bounds;
pub mod covertime;
pub mod greens;
pub mod hits;
pub mod numerics;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod target;
pub mod verdict;
pub mod walks;
