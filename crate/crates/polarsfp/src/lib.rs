//! Shape from polarization for surfaces with mixed diffuse-specular reflection.
//!
//! A camera behind a rotating linear polarizer sees a sinusoidal intensity at
//! every pixel; the amplitude and phase of that sinusoid encode the zenith and
//! azimuth of the surface normal through the Fresnel equations. Classical
//! recovery assumes the reflection is either purely specular or purely
//! diffuse. Real surfaces return a mixture, which biases both angles and
//! requires knowing the refractive index in advance.
//!
//! This crate estimates diffuse intensity, refractive index, and surface
//! normals jointly from several viewpoints of the same scene:
//!
//! - [`polar`] - closed-form polarization models (polarizer sinusoid, degree
//!   of polarization, specular/diffuse/mixed Fresnel curves),
//! - [`sim`] - an analytic renderer producing multiview polarized image
//!   stacks with exact ground truth,
//! - [`solver`] - the per-point constrained least-squares separation of
//!   diffuse intensity and refractive index,
//! - [`pipeline`] - end-to-end orchestration from image stacks to normal
//!   maps, plus the uncorrected single-model baselines,
//! - [`io`] - PFM images, JSON scene/correspondence documents, CSV metrics.

pub mod grid;
pub mod io;
pub mod pipeline;
pub mod polar;
pub mod sim;
pub mod solver;

pub use grid::Grid;
