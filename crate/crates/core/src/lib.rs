//! Spectral toolkit for two-dimensional free-boundary incompressible Euler flows.
//!
//! Boundaries are star-shaped curves sampled in angle; interior problems are solved by
//! mapped Fourier × Chebyshev collocation on disks and annuli. On top of that sit the
//! operator calculus of the free-boundary problem (Dirichlet–Neumann map, harmonic
//! extension, surface-tension force), material-derivative identities, energies with
//! Rayleigh–Taylor monitoring, two exact solutions and a capillary wave solver.

pub mod energies;
pub mod error;
pub mod exact;
pub mod fields;
pub mod geometry;
pub mod gmres;
pub mod identities;
pub mod kinematics;
pub mod laplace;
pub mod spectral;
pub mod wave;

pub use energies::{EnergyReport, MonitorRatios};
pub use error::{Error, Result};
pub use fields::VectorField2;
pub use geometry::{
    boundary_norm, geometry, geometry_tagged, integrate_boundary, make_star_curve, surface_laplacian,
    AnnulusShape, BoundaryScalar, BoundaryTag, GeometryReport, ParamCurve, StarCurve,
};
pub use laplace::{InteriorField, Shape, SpectralDomain};
pub use wave::{SimConfig, WaveState};
