//! Symmetry systems of Lie systems and PDE Lie systems.

pub mod expr;
pub mod linalg;
pub mod vectorfield;
pub mod liealg;
pub mod ode;
pub mod liesys;
pub mod pdesys;
pub mod catalog;
pub mod cli;
