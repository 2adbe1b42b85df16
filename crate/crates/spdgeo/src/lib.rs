//! Scaling-rotation geometry on symmetric positive-definite matrices.
//!
//! An SPD matrix `X` factors as `X = U D Uᵀ` with `U ∈ SO(p)` and `D` positive
//! diagonal; the set of such factorizations (the fiber of the eigen-composition
//! map `F(U, D) = U D Uᵀ`) is acted on by the even signed-permutation group.
//! This crate implements:
//!
//! * dense numerics on `SO(p)`: exponential, minimal-norm logarithm, normal
//!   form, geodesic distance, principal angles ([`matrix_core`]);
//! * the even signed-permutation group, its stabilizer subgroups and
//!   double-coset representatives ([`signed_perms`]);
//! * eigenvalue-multiplicity partitions and fiber structure ([`partitions`]);
//! * the scaling-rotation distance `d_SR` via double-coset reduction, the gap
//!   construction, and minimal antipodal witnesses ([`sr_metric`]);
//! * minimal smooth scaling-rotation curves, immersion dichotomy, and
//!   Type I / Type II non-uniqueness classification ([`mssr`]);
//! * involutions, sign-change reducibility, the half-angle relation, the 2x
//!   Grassmannian isometry, and coordinate-plane covering ([`grassmann`]);
//! * a deterministic verification suite reproducing the numeric claims the
//!   library is built around ([`verify`]).

pub mod error;
pub mod grassmann;
pub mod matrix_core;
pub mod mssr;
pub mod partitions;
pub mod sampling;
pub mod signed_perms;
pub mod sr_metric;
pub mod verify;

pub use error::{Error, Result};
