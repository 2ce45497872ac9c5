//! Space-time interpolation operators on tensor and slab-refined meshes over
//! one spatial dimension, with exact evaluation of the norms they are
//! measured in.

pub mod error;
pub mod fem;
pub mod field;
pub mod interp1d;
pub mod legendre;
pub mod mesh;
pub mod norms;
pub mod oracles;
pub mod pw1d;
pub mod spacetime;

pub use error::{Error, Result};
pub use fem::{FemFunction, FemSpace};
pub use field::{AnalyticField, Direction, Partition, TensorPolyField};
pub use mesh::{
    build_figure1_mesh, build_scaled_tensor, build_uniform_tensor, IrregularMesh, Rect,
    ScaledTensor, SpaceMesh, TensorMesh, TimeMesh,
};
pub use norms::{Domain, NormKind};
pub use pw1d::PiecewisePoly;
