//! Copy-move forgery synthesis and unsupervised domain-adaptation training.
//!
//! The crate is organized bottom-up:
//!
//! * [`tensor_nn`]: dense tensors and layers with hand-written backward passes
//! * [`synth`]: copy-move forgery and inpainted-authentic image generation
//! * [`data`]: manifests, splits, color spaces, resizing, paired batching
//! * [`models`]: backbone presets and the two-head (class + domain) network
//! * [`da_train`]: gradient-reversal and MMD-penalty trainers
//! * [`eval_report`]: confusion counts, precision/recall/F1, report tables

pub mod da_train;
pub mod data;
pub mod error;
pub mod eval_report;
pub mod models;
pub mod rng;
pub mod synth;
pub mod tensor_nn;

pub use da_train::{LambdaSchedule, Method, MmdKernel, TrainConfig, TrainHistory};
pub use data::{Batch, ClassLabel, Domain, Manifest, ManifestRecord, Split, TensorDataset};
pub use error::{Error, Result};
pub use eval_report::{ConfusionCounts, MetricsReport};
pub use models::{NetworkSpec, Preset, TwoHeadNetwork};
pub use synth::{ColorSpace, ForgeryProvenance, ObjectMask, RasterImage};
pub use tensor_nn::{Layer, LayerKind, OptimizerKind, OptimizerState, Scalar, Tensor};

/// Version string stamped into provenance records, checkpoints and run metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
