//! Qubit-field-qubit quantum channels built from Unruh-DeWitt detector gates.
//!
//! The field is a single bosonic mode. Each detector gate is a controlled
//! displacement, so every channel can be evaluated exactly with the
//! displacement algebra in [`coherent_algebra`] and cross-checked in a
//! truncated Fock space via [`fock_linalg`].

pub mod channels;
pub mod coherent_algebra;
pub mod error;
pub mod fock_linalg;
pub mod info_sweeps;
pub mod quadrature;
pub mod udw_gates;

pub use error::{Result, UdwError};
