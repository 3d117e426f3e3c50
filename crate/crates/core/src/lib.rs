//! Relay-subset selection and time-slot allocation for half-duplex
//! decode-and-forward cooperative networks.
//!
//! A source reaches a destination with the help of up to `N` relays that
//! transmit one after another in orthogonal time slots. Each relay decodes
//! from everything sent before its own slot. For a given set of active relays
//! the max-min achievable rate is obtained by equalizing the mutual
//! information at every receiver, which reduces to a lower-triangular linear
//! solve. The best relay set is found by exhaustive search, or by a
//! depth-first search that grows inverses incrementally and prunes subtrees
//! that can never yield a feasible allocation.
//!
//! Module map:
//!
//! * [`rate_model`]: link capacities and subset rate matrices.
//! * [`allocator`]: the equalizing solve and feasibility verdict for one subset.
//! * [`selector`]: brute-force, recursive and equal-time subset selection.
//! * [`scenario`]: topologies, path-loss fading and relay numbering schemes.
//! * [`montecarlo`]: seeded outage-rate experiments and their CSV/JSON output.

pub mod allocator;
pub mod error;
pub mod matrix;
pub mod montecarlo;
pub mod rate_model;
pub mod scenario;
pub mod selector;

pub use error::{Error, Result};
