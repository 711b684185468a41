//! Minimal COCO-style annotation reader. Only image dimensions, file names,
//! category names and segmentation masks are consumed; every other field is
//! ignored.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::raster::ObjectMask;
use crate::error::{data_err, Error, Result};

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct CocoImage {
    pub id: u64,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct CocoCategory {
    pub id: u64,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum RleCounts {
    Compressed(String),
    Raw(Vec<u32>),
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Segmentation {
    /// Flat `[x0, y0, x1, y1, ...]` rings; the object is their union.
    Polygons(Vec<Vec<f64>>),
    /// Column-major run lengths starting with a background run; `size` is `[h, w]`.
    Rle { size: [u32; 2], counts: RleCounts },
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct CocoAnnotation {
    #[serde(default)]
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    pub segmentation: Segmentation,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
pub struct CocoFile {
    pub images: Vec<CocoImage>,
    pub annotations: Vec<CocoAnnotation>,
    pub categories: Vec<CocoCategory>,
}

/// Even-odd fill of polygons sampled at pixel centers.
pub fn rasterize_polygons(polys: &[Vec<f64>], width: u32, height: u32) -> Vec<bool> {
    let mut bits = vec![false; width as usize * height as usize];
    for poly in polys {
        let pts: Vec<(f64, f64)> = poly.chunks_exact(2).map(|c| (c[0], c[1])).collect();
        if pts.len() < 3 {
            continue;
        }
        let mut inside = vec![false; bits.len()];
        for y in 0..height {
            let cy = y as f64 + 0.5;
            let mut xs: Vec<f64> = Vec::new();
            for i in 0..pts.len() {
                let (x0, y0) = pts[i];
                let (x1, y1) = pts[(i + 1) % pts.len()];
                if (y0 <= cy && y1 > cy) || (y1 <= cy && y0 > cy) {
                    xs.push(x0 + (cy - y0) * (x1 - x0) / (y1 - y0));
                }
            }
            xs.sort_by(f64::total_cmp);
            for span in xs.chunks_exact(2) {
                // pixel x is inside when span[0] <= x + 0.5 < span[1]
                let start = (span[0] - 0.5).ceil().max(0.0) as i64;
                let end = ((span[1] - 0.5).ceil() as i64).min(width as i64);
                for x in start..end {
                    inside[y as usize * width as usize + x as usize] = true;
                }
            }
        }
        for (b, i) in bits.iter_mut().zip(inside) {
            *b |= i;
        }
    }
    bits
}

/// Decodes the LEB128-like string form of COCO run lengths.
pub fn decode_rle_string(s: &str) -> Result<Vec<u32>> {
    let bytes = s.as_bytes();
    let mut counts: Vec<i64> = Vec::new();
    let mut p = 0;
    while p < bytes.len() {
        let mut x: i64 = 0;
        let mut k = 0;
        loop {
            let c = *bytes
                .get(p)
                .ok_or_else(|| data_err!("truncated RLE string"))? as i64
                - 48;
            if !(0..64).contains(&c) {
                return Err(data_err!("invalid RLE character at offset {p}"));
            }
            x |= (c & 0x1f) << (5 * k);
            let more = c & 0x20 != 0;
            p += 1;
            k += 1;
            if !more {
                if c & 0x10 != 0 {
                    x |= -1i64 << (5 * k);
                }
                break;
            }
            if k > 12 {
                return Err(data_err!("RLE run too long"));
            }
        }
        if counts.len() > 2 {
            x += counts[counts.len() - 2];
        }
        counts.push(x);
    }
    counts
        .into_iter()
        .map(|c| u32::try_from(c).map_err(|_| data_err!("negative RLE run")))
        .collect()
}

/// Expands column-major run lengths into a row-major bitmap.
pub fn rle_to_bits(counts: &[u32], width: u32, height: u32) -> Result<Vec<bool>> {
    let n = width as usize * height as usize;
    let total: u64 = counts.iter().map(|&c| c as u64).sum();
    if total != n as u64 {
        return Err(data_err!("RLE covers {total} pixels, expected {n}"));
    }
    let mut bits = vec![false; n];
    let mut pos = 0usize;
    for (i, &c) in counts.iter().enumerate() {
        if i % 2 == 1 {
            for k in pos..pos + c as usize {
                let (x, y) = (k / height as usize, k % height as usize);
                bits[y * width as usize + x] = true;
            }
        }
        pos += c as usize;
    }
    Ok(bits)
}

/// Column-major run lengths of a row-major bitmap.
pub fn bits_to_rle(bits: &[bool], width: u32, height: u32) -> Vec<u32> {
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u32;
    for x in 0..width as usize {
        for y in 0..height as usize {
            let b = bits[y * width as usize + x];
            if b != current {
                counts.push(run);
                run = 0;
                current = b;
            }
            run += 1;
        }
    }
    counts.push(run);
    counts
}

impl Segmentation {
    pub fn rasterize(&self, width: u32, height: u32) -> Result<Vec<bool>> {
        match self {
            Segmentation::Polygons(p) => Ok(rasterize_polygons(p, width, height)),
            Segmentation::Rle { size, counts } => {
                if size[0] != height || size[1] != width {
                    return Err(data_err!(
                        "RLE size {size:?} does not match image {height}x{width}"
                    ));
                }
                let counts = match counts {
                    RleCounts::Raw(c) => c.clone(),
                    RleCounts::Compressed(s) => decode_rle_string(s)?,
                };
                rle_to_bits(&counts, width, height)
            }
        }
    }
}

/// Parsed annotation file with per-image mask lookup.
#[derive(Clone, Debug)]
pub struct CocoIndex {
    pub file: CocoFile,
    categories: BTreeMap<u64, String>,
    by_image: BTreeMap<u64, Vec<usize>>,
}

impl CocoIndex {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: CocoFile =
            serde_json::from_str(&text).map_err(|e| data_err!("{}: {e}", path.display()))?;
        Ok(Self::new(file))
    }

    pub fn new(file: CocoFile) -> Self {
        let categories = file.categories.iter().map(|c| (c.id, c.name.clone())).collect();
        let mut by_image: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (i, a) in file.annotations.iter().enumerate() {
            by_image.entry(a.image_id).or_default().push(i);
        }
        Self {
            file,
            categories,
            by_image,
        }
    }

    /// Images sorted by id.
    pub fn images(&self) -> Vec<&CocoImage> {
        let mut v: Vec<&CocoImage> = self.file.images.iter().collect();
        v.sort_by_key(|i| i.id);
        v
    }

    /// Masks for an image in annotation-file order. Empty masks are dropped.
    pub fn masks_for(&self, image: &CocoImage) -> Result<Vec<ObjectMask>> {
        let mut out = Vec::new();
        for &i in self.by_image.get(&image.id).map(Vec::as_slice).unwrap_or(&[]) {
            let ann = &self.file.annotations[i];
            let category = self
                .categories
                .get(&ann.category_id)
                .ok_or_else(|| data_err!("annotation {} has unknown category {}", ann.id, ann.category_id))?;
            let bits = ann.segmentation.rasterize(image.width, image.height)?;
            let mask = ObjectMask::new(image.width, image.height, bits, category.clone())?;
            if mask.area > 0 {
                out.push(mask);
            }
        }
        Ok(out)
    }
}
