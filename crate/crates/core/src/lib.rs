//! Acoustic wave simulation in heterogeneous 2D/3D media and reproducible
//! synthetic seismogram datasets.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid`]: centered Cartesian grids, scalar fields, the Laplacian stencil
//!   and multilinear interpolation.
//! - [`media`]: propagation-speed fields, static presets and time modulation.
//! - [`source`]: the Gaussian-kernel forcing term and its temporal wavelet.
//! - [`solver`]: damped leapfrog time stepping with CFL enforcement.
//! - [`acquisition`]: interrogators and fixed-rate seismograms.
//! - [`dataset`]: seeded dataset generation, NPY files and manifests.
//! - [`harness`]: feature extraction, regressors and MSE evaluation.

pub mod acquisition;
pub mod dataset;
pub mod error;
pub mod grid;
pub mod harness;
pub mod media;
pub mod solver;
pub mod source;

pub use acquisition::{Interrogator, Seismogram};
pub use dataset::{DatasetRecord, DatasetSpec, Manifest};
pub use error::{Error, Result};
pub use grid::{Grid, ScalarField};
pub use media::{MediumSpec, SpeedField};
pub use solver::{Boundary, SimConfig, SimResult, Solver, TimeStep, WaveState};
pub use source::{SourceSpec, Wavelet};
