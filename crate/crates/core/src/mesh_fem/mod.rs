//! Structured meshes, quadrature and continuous Lagrange spaces.

pub mod mesh;
pub mod quadrature;
pub mod space;

pub use mesh::{Facet, Mesh};
pub use quadrature::Quadrature;
pub use space::{FESpace, SpaceKind};
