//! Shadow-robust road region recognition.
//!
//! Four phases run per frame:
//!
//! 1. [`colorfeat`]: road candidates by Mahalanobis distance to a Gaussian
//!    road-color model;
//! 2. [`shadowfilter`]: shadow detection on the saturation/intensity
//!    normalized difference and per-region statistical compensation;
//! 3. [`svmseg`]: linear SVM pixel classification on the compensated frame;
//! 4. [`morphpost`]: opening, closing, largest-component selection and hole
//!    filling.
//!
//! [`metrics`] scores masks against ground truth and [`pipeline`] runs frame
//! streams, synthetic scenes and the with/without-filter comparison.
//!
//! Per-pixel work fans out over rayon when the default `parallel` feature is
//! on; disabling it gives a purely sequential build with identical results.

// NaN-rejecting `!(x > 0.0)` checks and small fixed-size matrix loops read
// better as written.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod colorfeat;
pub mod error;
pub mod imagecore;
pub mod kv;
pub mod metrics;
pub mod morphpost;
pub mod par;
pub mod pipeline;
pub mod shadowfilter;
pub mod svmseg;

pub use error::{Error, Result};
