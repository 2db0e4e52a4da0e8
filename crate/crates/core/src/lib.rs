//! Tree-ring detection on wood cross-section images (CS-TRD), with the
//! evaluation against expert annotations and the dendrometric measurements
//! built on detected rings.
//!
//! The pipeline: [`raster::preprocess`] → [`edges::detect_edges`] →
//! [`spider::sample_chain`] → [`detect::filter_by_gradient`] →
//! [`detect::connect_chains`] → [`detect::close_rings`]. [`detect::detect`]
//! runs all of it.

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod annotation;
mod draw;
pub mod detect;
pub mod edges;
pub mod evaluate;
pub mod measure;
pub mod raster;
pub mod spider;
pub mod synth;

pub use annotation::{AnnotationFile, RingShape};
pub use detect::{detect, detect_masked, DetectError, DetectParams, Ring, RingSource};
pub use spider::{Chain, Node, SpiderWeb};
