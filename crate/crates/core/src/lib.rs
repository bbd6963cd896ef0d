//! Spherical centroidal Voronoi tessellations with density functions.

// `!(x > 0.0)` deliberately treats NaN as a failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cvt;
pub mod error;
pub mod delaunay;
pub mod density;
pub mod geometry;
pub mod io;
pub mod optimizer;
pub mod partition;
pub mod pipeline;
pub mod quality;

pub use error::{Result, ScvtError};
pub use geometry::{Epsilons, SpherePoint, TangentFrame, Vec3};
