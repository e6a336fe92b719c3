//! Saliency-aware multi-view visual encoding with Lorentz-model hyperbolic
//! alignment.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! - [`sas`]: pick `K` fixation centers from a saliency map and a foreground matte
//! - [`foveation`]: suppress the background and render one foveated view per center
//! - [`embedding`]: encode and mean-pool the views; the `EMB1` file format
//! - [`lorentz`] and [`align`]: lift embeddings onto the hyperboloid and train
//!   the symmetric hyperbolic InfoNCE objective
//! - [`retrieval`]: Top-k evaluation
//! - [`dissociation`]: center-offset statistics and threshold stability
//!
//! [`synth`] produces corpora with known answers and [`cli`] wires everything
//! into the `simon` binary.

pub mod align;
pub mod cli;
pub mod config;
pub mod dissociation;
pub mod embedding;
pub mod error;
pub mod foveation;
pub mod imaging;
pub mod lorentz;
pub mod retrieval;
pub mod sas;
pub mod synth;

pub use error::{Error, Result};
