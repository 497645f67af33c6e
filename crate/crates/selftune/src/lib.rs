//! Self-tuning control architectures for switched linear networks.
//!
//! The toolkit jointly treats the *actuator architecture* (which cardinality-K
//! subset of a candidate column library is active) and the *feedback policy*
//! (the input applied through it) as decision variables:
//!
//! - [`dp`] builds exact finite-horizon cost-to-go tables over joint
//!   subset/input choices as pointwise minima of quadratics, one piece per
//!   actuator-subset sequence, and samples the induced optimal-actuator
//!   partitions of the plane.
//! - [`greedy`] grows a subset one actuator at a time, scoring candidates by
//!   the infinite-horizon quadratic cost at the current state via DARE
//!   solves, and synthesizes the LQR gain for the winner.
//! - [`sysid`] provides least-squares identification of the state matrix and
//!   residual-based mode detection, closing the self-tuning loop.
//! - [`sim`] rolls architecture-policies out on seeded, reproducible
//!   closed-loop scenarios and aggregates cost comparisons.
//! - [`presets`] holds the ready-made experiment scenarios.
//!
//! All matrix work is dense (`nalgebra`); every stochastic component is
//! driven by ChaCha8 streams so artifacts reproduce bit-for-bit.

pub mod config;
pub mod dp;
mod error;
pub mod greedy;
pub mod linalg;
pub mod model;
pub mod presets;
pub mod sim;
pub mod sysid;

pub use error::{Error, Result};
