//! Backbone presets and the two-head network.

pub mod checkpoint;
pub mod network;
pub mod spec;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use network::{build_network, FullOutput, TwoHeadNetwork};
pub use spec::{NetworkSpec, Preset};
