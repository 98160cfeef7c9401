//! Two-grid non-intrusive reduced basis (NIRB) toolkit for parabolic problems.
//!
//! Offline, fine-mesh trajectories for a training set of parameters are
//! compressed into a time-independent reduced basis (POD-Greedy or Greedy),
//! and per-timestep rectification matrices are fitted against the matching
//! coarse trajectories. Online, a cheap coarse solve is interpolated in time
//! and space onto the fine discretization, projected on the basis, and
//! optionally rectified.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod error;
pub mod fem;
pub mod integrators;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod models;
pub mod pipeline;
pub mod rectification;
pub mod time_interp;

pub use error::{NirbError, Result};
