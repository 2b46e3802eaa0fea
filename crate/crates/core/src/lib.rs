//! Block-structured preconditioning for monolithic coupled linear systems.
//!
//! The crate is organized bottom-up:
//!
//! * [`sparse`], [`vector`], [`dense`], [`mtx`]: CSR kernels, vector plumbing,
//!   a small dense LU and Matrix Market I/O.
//! * [`block`]: N×N block matrices over a field layout, field merging and the
//!   on-disk block system manifest.
//! * [`krylov`]: restarted right-preconditioned GMRES.
//! * [`smoother`] and [`amg`]: point relaxation and smoothed-aggregation AMG.
//! * [`precond`]: block Gauss-Seidel, SIMPLE(C) and monolithic AMG, composed
//!   recursively from a [`precond::PrecondSpec`] tree.
//! * [`problems`]: deterministic synthetic coupled systems.

pub mod amg;
pub mod block;
pub mod dense;
pub mod error;
pub mod krylov;
pub mod mtx;
pub mod precond;
pub mod problems;
pub mod rng;
pub mod smoother;
pub mod sparse;
pub mod vector;

pub use error::{Error, Result};
