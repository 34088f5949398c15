//! Numerical toolkit for directional shift semigroups on convex domains.
//!
//! The crate discretizes the shift semigroup `T_t f(Q) = f(Q + e t)` along
//! rays emanating from boundary anchor points, its generator `A f = -(∇f, e)`,
//! the ray integral `B`, and the directional quadratic forms these induce.
//! On top of that it estimates norm-equivalence constants as extremal
//! generalized eigenvalues of discrete Gram pairs and verifies the
//! decomposition of divergence-form elliptic operators through generator
//! compositions.
//!
//! Modules mirror the pipeline: [`geometry`] (convex domains, rays, anchor
//! determinant algebra), [`fields`] (masked Cartesian grids, quadrature),
//! [`operators`] (semigroup, generator, ray integral, accretivity checks),
//! [`norms`] (directional forms and equivalence constants), [`elliptic`]
//! (divergence-form operators and their generator decomposition) and
//! [`driver`] (batch verification suites behind the `dirnorm` binary).

pub mod driver;
pub mod elliptic;
pub mod error;
pub mod fields;
pub mod geometry;
pub(crate) mod linalg;
pub mod norms;
pub mod operators;
pub mod par;

pub use error::{Error, Result};
