//! Manifests, splits, color conversion, resizing and batch iteration.

pub mod color;
pub mod dataset;
pub mod manifest;
pub mod resize;
pub mod split;

pub use color::{rgb_to_ycrcb, to_color_space, ycrcb_to_rgb};
pub use dataset::{image_to_chw, Batch, IndexStream, PairedBatchIterator, SourceBatches, TensorDataset};
pub use manifest::{ClassLabel, Domain, Manifest, ManifestRecord, Split};
pub use resize::{resize_bilinear, resize_bilinear_to};
pub use split::split_dataset;
