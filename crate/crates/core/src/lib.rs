//! Discrete SBV energy calculus for structured deformations and dimension
//! reduction.
//!
//! Fields are affine on the cells of a mesh of the unit square or cube and
//! jump across faces. On this class the cell formulas with purely
//! interfacial energy `|[u]·ν|` become linear programs. The crate provides
//! meshes and fields, the closed-form densities, a cell-problem solver,
//! explicit infimizing sequences and the relaxed functionals.

pub mod cell;
pub mod constructions;
pub mod densities;
pub mod error;
pub mod field;
pub mod functionals;
pub mod geometry;
pub mod hypotheses;
pub mod io;
pub mod lp;
pub mod mesh;


pub use cell::{solve, CellKind, CellProblem, SolveResult};
pub use densities::DensityPair;
pub use error::{Error, Result};
pub use field::{Datum, SbvField};
pub use mesh::{build_mesh, CellShape, Mesh};
