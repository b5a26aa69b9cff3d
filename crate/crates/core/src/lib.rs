//! Screening of wireless capsule endoscopy frames from colour interest points.
//!
//! The pipeline stages are:
//!
//! 1. **Colour space** ([`colorspace`]) – sRGB frames to CIELab (and HSV) planes.
//! 2. **Dataset** ([`dataset`]) – manifests, ROI masks, stratified splits and a
//!    synthetic lesion generator.
//! 3. **Detector** ([`detector`]) – fast-Hessian interest points over integral
//!    images, restricted to the ROI.
//! 4. **Features** ([`features`]) – the 9-value Lab max/min descriptor over a
//!    36×36 neighbourhood.
//! 5. **Learn** ([`learn`]) – standardisation, SMO-trained SVMs (one-vs-one) and
//!    kernel PCA.
//! 6. **Metrics** ([`eval_metrics`]) – confusion matrices, accuracy, F1 and
//!    point-to-image aggregation.
//!
//! [`pipeline`] wires the stages together the way the `capsule-screen` binary
//! runs them; [`overlay`] renders detected points onto frames.

pub mod colorspace;
pub mod dataset;
pub mod detector;
pub mod error;
pub mod eval_metrics;
pub mod features;
pub mod learn;
pub mod overlay;
pub mod pipeline;

pub use error::{Error, ErrorKind, Result};
