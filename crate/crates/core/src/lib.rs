//! Local fermion-to-ququart encodings of two-dimensional lattice models, a
//! ququart statevector engine with second-order Trotter evolution, and
//! brute-force fermionic oracles used to validate them.

pub mod config;
pub mod constraint_toric;
pub mod decomposition;
pub mod error;
pub mod fermion_oracle;
pub mod gamma_algebra;
pub mod lattice;
pub mod linalg;
pub mod mappings;
pub mod model;
pub mod recipe;
pub mod sector;
pub mod sparse;
pub mod statevector;
pub mod trotter;
pub mod validation;

pub use error::{Error, Result};
