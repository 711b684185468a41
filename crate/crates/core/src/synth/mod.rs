//! Forgery synthesis: object masks from COCO-style annotations, copy-move
//! pastes with affine warps and feathered alpha blending, diffusion
//! inpainting, and dataset generation.

pub mod affine;
pub mod blend;
pub mod coco;
pub mod copy_move;
pub mod generate;
pub mod inpaint;
pub mod raster;
pub mod toy;

pub use affine::{apply_affine, AffineParams};
pub use blend::{alpha_blend, feather_weights, BlendParams};
pub use coco::{CocoFile, CocoIndex, Segmentation};
pub use copy_move::{
    make_copy_move_pair, make_inpaint_pair, regenerate_forgery, select_largest_mask, CopyMoveConfig, ForgeryMethod,
    ForgeryPair, ForgeryProvenance,
};
pub use generate::{generate_dataset, GenerateConfig, GenerateSummary};
pub use inpaint::simple_inpaint;
pub use raster::{ColorSpace, ObjectMask, RasterImage};
pub use toy::{generate_toy_corpus, ToyCorpusConfig};
