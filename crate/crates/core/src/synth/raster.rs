use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ColorSpace {
    #[default]
    Rgb,
    #[serde(rename = "ycrcb")]
    YCrCb,
}

/// Decoded 8-bit, 3-channel pixel grid in row-major, channel-interleaved order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RasterImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
    pub color_space: ColorSpace,
}

pub const CHANNELS: usize = 3;

impl RasterImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>, color_space: ColorSpace) -> Result<Self> {
        let expected = width as usize * height as usize * CHANNELS;
        if data.len() != expected {
            return Err(usage!(
                "{width}x{height} image needs {expected} bytes, got {}",
                data.len()
            ));
        }
        Ok(Self {
            width,
            height,
            data,
            color_space,
        })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let n = width as usize * height as usize;
        Self {
            width,
            height,
            data: rgb.iter().copied().cycle().take(n * CHANNELS).collect(),
            color_space: ColorSpace::Rgb,
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * CHANNELS
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = self.index(x, y);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, px: [u8; 3]) {
        let i = self.index(x, y);
        self.data[i..i + 3].copy_from_slice(&px);
    }

    pub fn same_dims(&self, other_w: u32, other_h: u32) -> bool {
        self.width == other_w && self.height == other_h
    }

    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| Error::image(path, e))?.to_rgb8();
        let (w, h) = img.dimensions();
        Self::new(w, h, img.into_raw(), ColorSpace::Rgb)
    }

    /// Writes a PNG. The color-space tag is not stored in the file.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        image::save_buffer_with_format(
            path,
            &self.data,
            self.width,
            self.height,
            image::ExtendedColorType::Rgb8,
            image::ImageFormat::Png,
        )
        .map_err(|e| Error::image(path, e))
    }
}

/// Binary per-pixel object support with its category label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObjectMask {
    pub width: u32,
    pub height: u32,
    pub bits: Vec<bool>,
    pub category: String,
    pub area: usize,
}

impl ObjectMask {
    pub fn new(width: u32, height: u32, bits: Vec<bool>, category: impl Into<String>) -> Result<Self> {
        if bits.len() != width as usize * height as usize {
            return Err(usage!(
                "{width}x{height} mask needs {} bits, got {}",
                width as usize * height as usize,
                bits.len()
            ));
        }
        let area = bits.iter().filter(|b| **b).count();
        Ok(Self {
            width,
            height,
            bits,
            category: category.into(),
            area,
        })
    }

    pub fn empty(width: u32, height: u32, category: impl Into<String>) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
            category: category.into(),
            area: 0,
        }
    }

    /// Axis-aligned rectangle `[x0, x0+w) x [y0, y0+h)`, clipped to the frame.
    pub fn rect(width: u32, height: u32, x0: u32, y0: u32, w: u32, h: u32, category: &str) -> Self {
        let mut m = Self::empty(width, height, category);
        for y in y0..(y0 + h).min(height) {
            for x in x0..(x0 + w).min(width) {
                m.bits[y as usize * width as usize + x as usize] = true;
            }
        }
        m.recount();
        m
    }

    #[inline]
    pub fn get(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as u32) < self.width
            && (y as u32) < self.height
            && self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn recount(&mut self) {
        self.area = self.bits.iter().filter(|b| **b).count();
    }

    /// `(x_min, y_min, x_max, y_max)` inclusive, or `None` for an empty mask.
    pub fn bbox(&self) -> Option<(u32, u32, u32, u32)> {
        let mut bb: Option<(u32, u32, u32, u32)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.bits[y as usize * self.width as usize + x as usize] {
                    bb = Some(match bb {
                        None => (x, y, x, y),
                        Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                    });
                }
            }
        }
        bb
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn area_is_popcount() {
        let m = ObjectMask::rect(10, 10, 2, 3, 4, 5, "cat");
        assert_eq!(m.area, 20);
        assert_eq!(m.bbox(), Some((2, 3, 5, 7)));
        assert_eq!(ObjectMask::empty(3, 3, "x").bbox(), None);
    }

    #[test]
    fn image_length_checked() {
        assert!(RasterImage::new(2, 2, vec![0; 11], ColorSpace::Rgb).is_err());
        assert!(RasterImage::new(2, 2, vec![0; 12], ColorSpace::Rgb).is_ok());
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        let img = RasterImage::new(3, 2, (0..18).map(|v| v as u8 * 13).collect(), ColorSpace::Rgb).unwrap();
        img.save_png(&path).unwrap();
        assert_eq!(RasterImage::load(&path).unwrap(), img);
    }
}
