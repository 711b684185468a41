use serde::{Deserialize, Serialize};

use super::raster::{ObjectMask, RasterImage, CHANNELS};
use crate::error::{usage, Error, Result};

/// Similarity transform applied to an object about its bounding-box center,
/// followed by a translation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    pub rotation: f64,
    pub scale: f64,
    pub translate_x: f64,
    pub translate_y: f64,
    pub flip_horizontal: bool,
}

impl Default for AffineParams {
    fn default() -> Self {
        Self::identity()
    }
}

impl AffineParams {
    pub fn identity() -> Self {
        Self {
            rotation: 0.0,
            scale: 1.0,
            translate_x: 0.0,
            translate_y: 0.0,
            flip_horizontal: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(usage!("affine scale must be positive, got {}", self.scale));
        }
        if !self.rotation.is_finite() || !self.translate_x.is_finite() || !self.translate_y.is_finite() {
            return Err(usage!("affine parameters must be finite"));
        }
        Ok(())
    }
}

/// Inverse map from output to input coordinates for a given center.
struct InverseMap {
    cx: f64,
    cy: f64,
    cos: f64,
    sin: f64,
    inv_scale: f64,
    tx: f64,
    ty: f64,
    flip: bool,
}

impl InverseMap {
    fn new(params: &AffineParams, cx: f64, cy: f64) -> Self {
        let theta = params.rotation.to_radians();
        Self {
            cx,
            cy,
            cos: theta.cos(),
            sin: theta.sin(),
            inv_scale: 1.0 / params.scale,
            tx: params.translate_x,
            ty: params.translate_y,
            flip: params.flip_horizontal,
        }
    }

    #[inline]
    fn source(&self, x: f64, y: f64) -> (f64, f64) {
        let u = x - self.tx - self.cx;
        let v = y - self.ty - self.cy;
        // undo rotation, then scale, then the horizontal flip
        let mut ru = (self.cos * u + self.sin * v) * self.inv_scale;
        let rv = (-self.sin * u + self.cos * v) * self.inv_scale;
        if self.flip {
            ru = -ru;
        }
        (ru + self.cx, rv + self.cy)
    }
}

/// Bilinear sample with edge clamping. Integer coordinates return the stored
/// pixel exactly.
pub(crate) fn sample_bilinear(img: &RasterImage, sx: f64, sy: f64) -> [u8; 3] {
    let max_x = (img.width - 1) as f64;
    let max_y = (img.height - 1) as f64;
    let sx = sx.clamp(0.0, max_x);
    let sy = sy.clamp(0.0, max_y);
    let x0 = sx.floor();
    let y0 = sy.floor();
    let fx = sx - x0;
    let fy = sy - y0;
    let x0 = x0 as u32;
    let y0 = y0 as u32;
    let x1 = (x0 + 1).min(img.width - 1);
    let y1 = (y0 + 1).min(img.height - 1);
    let mut out = [0u8; 3];
    let (i00, i10, i01, i11) = (img.index(x0, y0), img.index(x1, y0), img.index(x0, y1), img.index(x1, y1));
    for c in 0..CHANNELS {
        let top = img.data[i00 + c] as f64 * (1.0 - fx) + img.data[i10 + c] as f64 * fx;
        let bottom = img.data[i01 + c] as f64 * (1.0 - fx) + img.data[i11 + c] as f64 * fx;
        out[c] = (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8;
    }
    out
}

/// Transforms the masked object of `image` about the mask's bounding-box
/// center. Pixels are resampled bilinearly, the mask by nearest neighbour.
/// The output frame has the input's dimensions; outside the transformed mask
/// the output image is black.
pub fn apply_affine(image: &RasterImage, mask: &ObjectMask, params: &AffineParams) -> Result<(RasterImage, ObjectMask)> {
    params.validate()?;
    if !image.same_dims(mask.width, mask.height) {
        return Err(usage!(
            "mask {}x{} does not match image {}x{}",
            mask.width,
            mask.height,
            image.width,
            image.height
        ));
    }
    let (x0, y0, x1, y1) = mask
        .bbox()
        .ok_or_else(|| usage!("cannot transform an empty mask"))?;
    let map = InverseMap::new(params, (x0 + x1) as f64 / 2.0, (y0 + y1) as f64 / 2.0);

    let mut out_img = RasterImage::filled(image.width, image.height, [0, 0, 0]);
    out_img.color_space = image.color_space;
    let mut out_mask = ObjectMask::empty(image.width, image.height, mask.category.clone());
    for y in 0..image.height {
        for x in 0..image.width {
            let (sx, sy) = map.source(x as f64, y as f64);
            if mask.get(sx.round() as i64, sy.round() as i64) {
                out_mask.bits[y as usize * image.width as usize + x as usize] = true;
                out_img.set_pixel(x, y, sample_bilinear(image, sx, sy));
            }
        }
    }
    out_mask.recount();
    if out_mask.area == 0 {
        return Err(Error::Skip("transformed object leaves the frame".into()));
    }
    Ok((out_img, out_mask))
}
