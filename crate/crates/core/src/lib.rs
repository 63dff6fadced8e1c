//! Higher-order mean curvatures of parametrized submanifolds.
//!
//! The engine works on immersions `f: M^n → N^{n+m}` given in a single chart
//! of a model ambient space (Euclidean, real space form, complex projective
//! space). Along the immersion it builds orthonormal adapted frames, the
//! second fundamental form and the relative curvature forms, and from those
//! the `2p`-th mean curvatures, their Euler–Lagrange operators, tube volumes
//! and austerity diagnostics.

pub mod ambient;
pub mod error;
pub mod frames;
pub mod immersion;
pub mod invariants;
pub mod jet;
pub mod quadrature;
pub mod tubes;
pub mod variational;

pub use ambient::{AmbientKind, AmbientSpace};
pub use error::{GeometryError, Result};
pub use immersion::{ImmersionPatch, ParamDomain, SubmanifoldMesh};
