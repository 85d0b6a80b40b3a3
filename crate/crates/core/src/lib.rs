//! Sequential lattice reduction (SR-CVP, SR-Pair, SR-Hash, greedy) with LLL
//! and Seysen baselines and an uplink MIMO detection simulator.
//!
//! Bases are stored as lists of columns; every reducer returns the reduced
//! basis, the exact integer transform `U` with `B_in U = B_out`, and a
//! [`ReductionReport`].

// Matrix code reads best with explicit indices; `!(x > 0)` style tests
// deliberately catch NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cvp;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod lsh;
pub mod mimo;
pub mod random;
pub mod report;
pub mod sr;

pub use error::{LatticeError, Result};
pub use linalg::{Basis, UnimodularTransform};
pub use report::ReductionReport;
