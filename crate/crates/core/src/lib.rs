//! Loop calculus for binary planar graphical models.
//!
//! Belief propagation on a Forney graph gives the Bethe estimate `Z_BP`. The
//! loop series corrects it exactly, `Z = Z_BP * (1 + sum_C r_C)`. On planar
//! graphs the 2-regular part of that series is one Pfaffian of a
//! Kasteleyn-oriented extended graph, and the whole series regroups into a
//! sum of Pfaffians indexed by even sets of degree-3 nodes.
//!
//! Brute-force oracles (spin enumeration, loop enumeration, perfect-matching
//! enumeration, pairing sums) are provided alongside every fast path.

pub mod bp;
pub mod embedding;
pub mod error;
pub mod experiment;
pub mod forney;
pub mod loops;
pub mod pfaffian;
pub mod planar;
pub mod series;

pub use error::{Error, Result};
