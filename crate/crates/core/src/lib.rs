//! Berry bundles of parameter-dependent Hamiltonians: eigenspace bundles,
//! gauge sections, transition functions, topological classification and
//! non-abelian holonomy.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eigenbundle;
pub mod error;
pub mod gauge;
pub mod geometry;
pub mod linalg;
pub mod models;
pub mod path;
pub mod random;
pub mod reproduce;
pub mod scenario;
pub mod transport;

pub use error::{Error, Result};
