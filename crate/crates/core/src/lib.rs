//! Acquisition-invariant patch embeddings for MR brain tissue segmentation.
//!
//! The crate is organised as a pipeline:
//!
//! * [`phantom`] generates procedural brain label maps and simulates
//!   spoiled gradient-echo scans of them under different protocols.
//! * [`sampling`] extracts tissue-labelled 15x15 patches and builds the
//!   similarity-labelled pair datasets used for Siamese training.
//! * [`siamnet`] is the shared-weight convolutional embedding network with
//!   hand-written backpropagation and RMSprop.
//! * [`evalstats`] holds the linear classifiers, cross-validation, the proxy
//!   A-distance and tissue-error measurement.
//! * [`harness`] wires everything into the four experiments and writes CSV
//!   and SVG results.

pub mod error;
pub mod evalstats;
pub mod harness;
pub mod phantom;
pub mod sampling;
pub mod seeds;
pub mod siamnet;

pub use error::{MraiError, Result};
