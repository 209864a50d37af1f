//! One-dimensional diffusions described by a scale function, a speed measure
//! and a killing measure on an interval.

pub mod measure;
pub mod scale;
pub mod diffusion;
pub mod form;
pub mod boundary;
pub mod chain;
pub mod montecarlo;
mod serde_ext;

pub use measure::{Approx, Interval, IntervalSet, MeasureComponent, MeasureError, RadonMeasure};
pub use diffusion::{DiffusionSpec, Side, SpecError, TriBool, Verdict};
pub use scale::{ScaleError, ScaleFunction};
