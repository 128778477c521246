//! Numerical core for face parsing with a shallow CNN and a spatially gated
//! recurrent propagation layer.
//!
//! Everything in this crate is pure computation over in-memory buffers and
//! builds without `std` (an allocator is required). File formats, threading,
//! timing and the command-line surface live in the `sgrnn` crate.
//!
//! Module map:
//!
//! - [`tensor`]: dense NCHW tensors, small matrices, channel split, spectral
//!   norm projection.
//! - [`layers`]: convolution, pooling, transposed convolution, bilinear
//!   upsampling, losses and the SGD optimizer, each with an explicit backward.
//! - [`scan`]: four-directional gated linear recurrence, max integration and
//!   backpropagation through the scans.
//! - [`model`]: declarative network specs, parameter storage, the stage-1 and
//!   stage-2 parsing networks, boundary ground truth, crops and composition.
//! - [`data`]: synthetic face generator, augmentation and loss sampling masks.
//! - [`metrics`]: confusion matrices, precision/recall/F-measure, accuracy.
//! - [`train`]: minibatch SGD epochs and evaluation over in-memory samples.
#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod data;
pub mod error;
pub mod labels;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod params;
pub mod real;
pub mod scan;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use labels::{LabelMap, Vocabulary, IGNORE};
pub use real::Real;
pub use tensor::{Matrix, Shape, Tensor};
