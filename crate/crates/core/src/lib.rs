//! Central values `L(f x chi, 1/2)` of Dirichlet twists of a level-one
//! Hecke eigenform, and the second moment over primitive characters.
//!
//! The moment is computed three ways: by summing squared central values
//! over every primitive character, by the double sum obtained from the
//! approximate functional equation after orthogonality, and by the
//! predicted main term `K P_q(1) psi(q) q log q`.

pub mod arith;
pub mod characters;
pub mod eigenform;
pub mod error;
pub mod lvalue;
pub mod moments;
pub mod special;
pub mod sum;

pub use error::{Error, Result};
