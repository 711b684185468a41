//! Procedural stand-in for an annotated photo corpus: textured backgrounds
//! with a few flat-shaded, noisy geometric objects, annotated in COCO form.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::coco::{bits_to_rle, rasterize_polygons, CocoAnnotation, CocoCategory, CocoFile, CocoImage, RleCounts, Segmentation};
use super::raster::{ColorSpace, RasterImage, CHANNELS};
use crate::error::{config_err, Error, Result};
use crate::rng::{rng_from, Rng};

const GRAIN: (f64, f64) = (24.0, 34.0);
const NOISE: f64 = 4.0;

/// Period-2 pixel pattern, +1 / -1.
fn checker(x: u32, y: u32) -> f64 {
    if (x + y) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

pub const TOY_CATEGORIES: [&str; 3] = ["disc", "square", "triangle"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyCorpusConfig {
    pub images: usize,
    pub size: u32,
    pub max_objects: usize,
    pub seed: u64,
}

impl Default for ToyCorpusConfig {
    fn default() -> Self {
        Self {
            images: 48,
            size: 64,
            max_objects: 3,
            seed: 7,
        }
    }
}

fn background(rng: &mut Rng, size: u32) -> RasterImage {
    let base: [f64; 3] = std::array::from_fn(|_| rng.random_range(40.0..200.0));
    let tilt: [f64; 3] = std::array::from_fn(|_| rng.random_range(-50.0..50.0));
    let freq = rng.random_range(0.05..0.35);
    let angle = rng.random_range(0.0..PI);
    let (ca, sa) = (angle.cos(), angle.sin());
    let stripe = rng.random_range(0.0..30.0);
    let grain = rng.random_range(GRAIN.0..GRAIN.1);
    let s = size as f64;
    let mut data = Vec::with_capacity((size * size) as usize * CHANNELS);
    for y in 0..size {
        for x in 0..size {
            let (u, v) = (x as f64 / s, y as f64 / s);
            let wave = (freq * (ca * x as f64 + sa * y as f64)).sin() * stripe;
            let fine = checker(x, y) * grain;
            for c in 0..CHANNELS {
                let n = rng.random_range(-NOISE..NOISE);
                data.push((base[c] + tilt[c] * (u - v) + wave + fine + n).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RasterImage {
        width: size,
        height: size,
        data,
        color_space: ColorSpace::Rgb,
    }
}

fn shape_polygon(rng: &mut Rng, category: &str, size: u32) -> Vec<f64> {
    let s = size as f64;
    let r = rng.random_range(0.10 * s..0.22 * s);
    let cx = rng.random_range(r + 1.0..s - r - 1.0);
    let cy = rng.random_range(r + 1.0..s - r - 1.0);
    let phase = rng.random_range(0.0..2.0 * PI);
    let sides = match category {
        "disc" => 24,
        "square" => 4,
        _ => 3,
    };
    (0..sides)
        .flat_map(|i| {
            let a = phase + 2.0 * PI * i as f64 / sides as f64;
            [cx + r * a.cos(), cy + r * a.sin()]
        })
        .collect()
}

fn paint(image: &mut RasterImage, bits: &[bool], rng: &mut Rng) {
    let color: [f64; 3] = std::array::from_fn(|_| rng.random_range(30.0..225.0));
    let grain = rng.random_range(GRAIN.0..GRAIN.1);
    let width = image.width as usize;
    for (i, _) in bits.iter().enumerate().filter(|(_, b)| **b) {
        let fine = checker((i % width) as u32, (i / width) as u32) * grain;
        for c in 0..CHANNELS {
            let v = color[c] + fine + rng.random_range(-NOISE..NOISE);
            image.data[i * CHANNELS + c] = v.round().clamp(0.0, 255.0) as u8;
        }
    }
}

/// Writes `images/toy-NNN.png` and `annotations.json` under `out_dir` and
/// returns the annotation path. Every third object is stored as
/// uncompressed RLE, the rest as polygons.
pub fn generate_toy_corpus(out_dir: &Path, config: &ToyCorpusConfig) -> Result<PathBuf> {
    if config.images == 0 || config.size < 16 || config.max_objects == 0 {
        return Err(config_err!("toy corpus needs images > 0, size >= 16 and max_objects > 0"));
    }
    let image_dir = out_dir.join("images");
    std::fs::create_dir_all(&image_dir).map_err(|e| Error::io(&image_dir, e))?;
    let size = config.size;
    let mut file = CocoFile {
        categories: TOY_CATEGORIES
            .iter()
            .enumerate()
            .map(|(i, n)| CocoCategory {
                id: i as u64 + 1,
                name: n.to_string(),
            })
            .collect(),
        ..CocoFile::default()
    };
    let mut ann_id = 1;
    for k in 0..config.images {
        let mut rng = rng_from(config.seed, &[k as u64]);
        let mut image = background(&mut rng, size);
        let n_objects = rng.random_range(1..=config.max_objects);
        let image_id = k as u64 + 1;
        for _ in 0..n_objects {
            let cat = rng.random_range(0..TOY_CATEGORIES.len());
            let poly = shape_polygon(&mut rng, TOY_CATEGORIES[cat], size);
            let bits = rasterize_polygons(std::slice::from_ref(&poly), size, size);
            paint(&mut image, &bits, &mut rng);
            let segmentation = if ann_id % 3 == 0 {
                Segmentation::Rle {
                    size: [size, size],
                    counts: RleCounts::Raw(bits_to_rle(&bits, size, size)),
                }
            } else {
                Segmentation::Polygons(vec![poly])
            };
            file.annotations.push(CocoAnnotation {
                id: ann_id,
                image_id,
                category_id: cat as u64 + 1,
                segmentation,
            });
            ann_id += 1;
        }
        let file_name = format!("images/toy-{k:03}.png");
        image.save_png(&out_dir.join(&file_name))?;
        file.images.push(CocoImage {
            id: image_id,
            file_name,
            width: size,
            height: size,
        });
    }
    let path = out_dir.join("annotations.json");
    let text = serde_json::to_string_pretty(&file)?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
