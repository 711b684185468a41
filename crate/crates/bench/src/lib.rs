//! Seeded fixtures shared by the benchmarks in `benches/`.

use forgeda_core::rng::rng_from;
use forgeda_core::synth::{ColorSpace, ObjectMask, RasterImage};
use forgeda_core::tensor_nn::Tensor;
use rand::Rng;

/// Uniform values in `[-1, 1)`.
pub fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = rng_from(seed, &[]);
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

pub fn random_image(side: u32, seed: u64) -> RasterImage {
    let mut rng = rng_from(seed, &[]);
    let data = (0..side * side * 3).map(|_| rng.random()).collect();
    RasterImage::new(side, side, data, ColorSpace::Rgb).expect("sized")
}

/// Centered square covering a quarter of the frame.
pub fn center_mask(side: u32) -> ObjectMask {
    ObjectMask::rect(side, side, side / 4, side / 4, side / 2, side / 2, "object")
}
