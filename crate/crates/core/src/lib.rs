//! Laboratory for the uniform infinite well-labeled tree and the random
//! quadrangulation it encodes.
//!
//! The crate provides exact enumeration of k-labeled trees, the closed-form
//! constants attached to their generating functions, the birth-and-death
//! process driving labels along the spine of the infinite tree, multitype
//! Galton-Watson samplers for the finite branches, an exact kernel for
//! expected label occurrences, the tree-to-quadrangulation construction,
//! and experiment drivers that measure the volume-growth exponents.

pub mod assembler;
pub mod branches;
pub mod enumeration;
pub mod fit;
pub mod quadmap;
pub mod spine;
pub mod tree;

pub use num_bigint::BigUint;
pub use num_rational::BigRational;
