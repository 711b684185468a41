use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::data::{Domain, TensorDataset};
use crate::error::Result;
use crate::rng::rng_from;

/// Two interleaved half circles with Gaussian noise; half the points per
/// class, label 0 on the upper moon.
pub fn two_moons(n: usize, noise: f64, seed: u64) -> (Vec<f32>, Vec<usize>) {
    let mut rng = rng_from(seed, &[0x6d6f_6f6e]);
    let normal = Normal::new(0.0, noise.max(0.0)).expect("noise is finite");
    let mut xs = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % 2;
        let t = rng.random_range(0.0..PI);
        let (x, y) = if label == 0 { (t.cos(), t.sin()) } else { (1.0 - t.cos(), 0.5 - t.sin()) };
        xs.push((x + normal.sample(&mut rng)) as f32);
        xs.push((y + normal.sample(&mut rng)) as f32);
        labels.push(label);
    }
    (xs, labels)
}

/// Rotates 2-D points about the origin.
pub fn rotate_points(xs: &[f32], degrees: f64) -> Vec<f32> {
    let (s, c) = degrees.to_radians().sin_cos();
    xs.chunks_exact(2)
        .flat_map(|p| {
            let (x, y) = (p[0] as f64, p[1] as f64);
            [(c * x - s * y) as f32, (s * x + c * y) as f32]
        })
        .collect()
}

/// Labeled source moons and their rotated counterpart, drawn independently.
/// The target dataset keeps its labels for evaluation only.
pub fn moons_domains(n: usize, noise: f64, degrees: f64, seed: u64) -> Result<(TensorDataset, TensorDataset)> {
    let (xs, ys) = two_moons(n, noise, seed);
    let (xt, yt) = two_moons(n, noise, seed ^ 0x5eed);
    let source = TensorDataset::from_features(xs, vec![2], Some(ys), Domain::Source)?;
    let target = TensorDataset::from_features(rotate_points(&xt, degrees), vec![2], Some(yt), Domain::Target)?;
    Ok((source, target))
}
