//! Hierarchical leader-follower optimal control of a parabolic PDE with
//! distributed controls on two disjoint subdomains.
//!
//! The follower tracks a reference trajectory against a nominal model; the
//! leader steers the terminal state into an alpha-ball around a target while
//! accounting for a class of drift-perturbed alternative models generated by
//! a Doob h-transform. The leader problem is solved through its Fenchel dual
//! over a terminal multiplier, with every discrete adjoint realized as an
//! exact matrix transpose of the assembled forward operators.
//!
//! See the `book/` guide for a narrative walk-through of each layer.

pub mod cli;
pub mod error;
pub mod follower;
pub mod htransform;
pub mod leader;
pub(crate) mod linalg;
pub mod mesh;
pub mod parabolic;
pub mod report;
pub mod scenario;
pub mod sde;

pub use error::{Error, Result};
