//! Exact and certified hypergeometric probabilities.
//!
//! `hyperberry` evaluates the hypergeometric law `Hyp(n; M, N)` exactly
//! (arbitrary-precision rationals for small populations, a mode-anchored
//! log-space recurrence for populations up to a few billion), encloses point
//! probabilities with a certified two-term Stirling expansion, evaluates
//! uniform and non-uniform Berry-Esseen style bounds, and ships a
//! verification lab that checks all of it against exact enumeration.
//!
//! ```
//! use hyperberry::{exact, HypParams};
//!
//! let params = HypParams::new(2, 2, 4).unwrap();
//! assert_eq!(exact::pmf_exact(&params, 1).to_string(), "2/3");
//! ```

pub mod bounds;
pub mod cli;
pub mod error;
pub mod exact;
pub mod fmt;
pub mod gaussian;
pub mod lab;
pub mod lattice;
pub mod params;
pub mod stirling;

pub use error::{Error, GateFailure, Result};
pub use params::HypParams;
