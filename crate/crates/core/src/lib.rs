//! Word-level font-to-font translation with a convolutional recurrent
//! conditional GAN.
//!
//! - [`tensor`]: f64 tensors, tape autodiff, layers, losses and Adam.
//! - [`dataset`]: procedural fonts, word rendering, patch geometry, manifests.
//! - [`models`]: generator (recurrent and baseline), discriminator, classifier
//!   and checkpoints.
//! - [`train`]: pre-training and the alternating adversarial loop.
//! - [`eval`]: L1/PSNR, seam statistics, classifier accuracy, comparisons.

pub mod config;
pub mod dataset;
pub mod eval;
pub mod models;
pub mod tensor;
pub mod train;
