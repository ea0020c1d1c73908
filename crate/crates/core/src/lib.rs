//! Point-cloud upsampling building blocks.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`]: dense `f64` tensors, a reverse-mode tape and the Adam optimizer.
//! * [`geometry`]: point clouds, meshes, exact KNN graphs and index expansion.
//! * [`nn`]: shared MLPs, EdgeConv and the coordinate regression head.
//! * [`units`]: the seven feature-expansion units behind one contract.
//! * [`metrics`]: Chamfer, Hausdorff and point-to-face distances.
//! * [`pipeline`]: models, synthetic data, training, evaluation and comparison.
//! * [`io`]: XYZ, OFF, checkpoint, config and CSV report formats.
//! * [`checks`]: the gradient and KNN property suites used by the CLI.

pub mod checks;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod tensor;
pub mod units;

pub use error::{Error, Result};
