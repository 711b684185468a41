use crate::error::{usage, Result};
use crate::synth::{ColorSpace, RasterImage};

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// BT.601 full range. Channel order of the result is (Y, Cr, Cb).
pub fn rgb_to_ycrcb(image: &RasterImage) -> Result<RasterImage> {
    if image.color_space != ColorSpace::Rgb {
        return Err(usage!("rgb_to_ycrcb needs an RGB image"));
    }
    let mut out = image.clone();
    for px in out.data.chunks_exact_mut(3) {
        let (r, g, b) = (px[0] as f64, px[1] as f64, px[2] as f64);
        let y = 0.299 * r + 0.587 * g + 0.114 * b;
        px[0] = to_u8(y);
        px[1] = to_u8((r - y) * 0.713 + 128.0);
        px[2] = to_u8((b - y) * 0.564 + 128.0);
    }
    out.color_space = ColorSpace::YCrCb;
    Ok(out)
}

/// Exact algebraic inverse of [`rgb_to_ycrcb`] before rounding.
pub fn ycrcb_to_rgb(image: &RasterImage) -> Result<RasterImage> {
    if image.color_space != ColorSpace::YCrCb {
        return Err(usage!("ycrcb_to_rgb needs a YCrCb image"));
    }
    let mut out = image.clone();
    for px in out.data.chunks_exact_mut(3) {
        let (y, cr, cb) = (px[0] as f64, px[1] as f64 - 128.0, px[2] as f64 - 128.0);
        let r = y + cr / 0.713;
        let b = y + cb / 0.564;
        let g = (y - 0.299 * r - 0.114 * b) / 0.587;
        px[0] = to_u8(r);
        px[1] = to_u8(g);
        px[2] = to_u8(b);
    }
    out.color_space = ColorSpace::Rgb;
    Ok(out)
}

/// Converts to `target` if needed.
pub fn to_color_space(image: &RasterImage, target: ColorSpace) -> Result<RasterImage> {
    match (image.color_space, target) {
        (a, b) if a == b => Ok(image.clone()),
        (ColorSpace::Rgb, ColorSpace::YCrCb) => rgb_to_ycrcb(image),
        _ => ycrcb_to_rgb(image),
    }
}
