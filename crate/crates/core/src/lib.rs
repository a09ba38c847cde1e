//! Encoded Local Projections (ELP) and uniform rotation-invariant LBP face
//! descriptors, with a leave-one-out chi-squared k-NN retrieval harness and
//! a one-vs-one RBF SVM classifier.
//!
//! The pipeline is: [`dataset::ingest`] a `root/<identity>/<image>` tree,
//! describe every image with [`elp::elp_descriptor`] or
//! [`lbp::lbp_descriptor`] over a [`SubImageGrid`], collect the vectors in a
//! [`LabeledCorpus`], then evaluate with [`eval::search`] or
//! [`svm::grid_search`]. The `elp` binary wraps the same steps.

pub mod cli;
pub mod corpus;
pub mod dataset;
pub mod descriptor;
pub mod elp;
pub mod error;
pub mod eval;
pub mod imaging;
pub mod lbp;
pub mod radon;
pub mod svm;

pub use corpus::{describe, extract_all, LabeledCorpus};
pub use descriptor::{length_of, Descriptor, DescriptorParams, Method};
pub use elp::{ElpParams, HistogramMode};
pub use error::{Error, Result};
pub use eval::{DistanceMode, SearchReport};
pub use imaging::{GrayImage, SubImageGrid, Window};
pub use lbp::LbpParams;
pub use radon::{AnchorMode, AngleSet, Projection};
pub use svm::{SvcModel, SvcParams};
