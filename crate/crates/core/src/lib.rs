//! Discrete interaction energies of point configurations: kernels,
//! energies, measure quantization, minimization and diagnostics.

pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod exact_sum;
pub mod io;
pub mod kernel;
pub mod measure;
pub mod minimizer;
pub mod quadrature;
pub mod quantizer;
pub mod rng;

pub use energy::{Configuration, EnergyValue, Points, SubConfiguration};
pub use error::{Error, Result};
pub use kernel::{Kernel, KernelConfig};
pub use measure::{MeasureConfig, Rect, TargetMeasure};
