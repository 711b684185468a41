use rand::Rng;
use serde::{Deserialize, Serialize};

use super::affine::{apply_affine, AffineParams};
use super::blend::{alpha_blend, BlendParams};
use super::inpaint::simple_inpaint;
use super::raster::{ObjectMask, RasterImage};
use crate::error::{usage, Error, Result};
use crate::rng::rng_from;

/// Index and reference of the largest mask of `category`; ties go to the
/// lowest index. No mask of the category yields [`Error::Skip`].
pub fn select_largest_mask<'a>(masks: &'a [ObjectMask], category: &str) -> Result<(usize, &'a ObjectMask)> {
    let mut best: Option<(usize, &ObjectMask)> = None;
    for (i, m) in masks.iter().enumerate() {
        if m.category != category {
            continue;
        }
        if best.is_none_or(|(_, b)| m.area > b.area) {
            best = Some((i, m));
        }
    }
    best.ok_or_else(|| Error::Skip(format!("no mask of category {category:?}")))
}

/// Sampling ranges for copy-move synthesis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CopyMoveConfig {
    /// Rotation drawn uniformly from `[-max_rotation, max_rotation]` degrees.
    pub max_rotation: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    /// Translation drawn uniformly up to this fraction of the frame size.
    pub max_translate_frac: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// Fixes alpha instead of sampling it.
    pub alpha: Option<f64>,
    pub feather_radius: u32,
    /// Minimum fraction of the transformed object that must land in frame.
    pub min_in_frame: f64,
    pub retry_budget: u32,
}

impl Default for CopyMoveConfig {
    fn default() -> Self {
        Self {
            max_rotation: 30.0,
            scale_min: 0.7,
            scale_max: 1.3,
            max_translate_frac: 0.4,
            alpha_min: 0.85,
            alpha_max: 1.0,
            alpha: None,
            feather_radius: 2,
            min_in_frame: 0.8,
            retry_budget: 5,
        }
    }
}

impl CopyMoveConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_rotation >= 0.0
            && self.scale_min > 0.0
            && self.scale_min <= self.scale_max
            && (0.0..=1.0).contains(&self.max_translate_frac)
            && (0.0..=1.0).contains(&self.alpha_min)
            && (0.0..=1.0).contains(&self.alpha_max)
            && self.alpha_min <= self.alpha_max
            && self.alpha.is_none_or(|a| (0.0..=1.0).contains(&a))
            && (0.0..=1.0).contains(&self.min_in_frame)
            && self.retry_budget >= 1;
        if ok {
            Ok(())
        } else {
            Err(crate::error::Error::Config(format!("invalid copy-move config {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForgeryMethod {
    CopyMove,
    Inpaint,
}

/// Everything needed to rebuild a forged image bit-exactly from its source
/// image and annotations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForgeryProvenance {
    pub source_image: String,
    pub method: ForgeryMethod,
    pub mask_index: usize,
    pub category: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affine: Option<AffineParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blend: Option<BlendParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inpaint_iterations: Option<u32>,
    pub generator_version: String,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct ForgeryPair {
    pub authentic: RasterImage,
    pub forged: RasterImage,
    pub provenance: ForgeryProvenance,
}

fn paste(image: &RasterImage, mask: &ObjectMask, affine: &AffineParams, blend: &BlendParams) -> Result<(RasterImage, ObjectMask)> {
    let (fg, moved) = apply_affine(image, mask, affine)?;
    Ok((alpha_blend(&fg, image, &moved, blend)?, moved))
}

/// Copies the largest `category` object, transforms it with a randomly
/// sampled similarity transform and alpha-blends it back into the same image.
pub fn make_copy_move_pair(
    image_id: &str,
    image: &RasterImage,
    masks: &[ObjectMask],
    category: &str,
    seed: u64,
    config: &CopyMoveConfig,
) -> Result<ForgeryPair> {
    config.validate()?;
    if config.alpha == Some(0.0) {
        return Err(Error::DegenerateBlend(0.0));
    }
    let (mask_index, mask) = select_largest_mask(masks, category)?;
    if !image.same_dims(mask.width, mask.height) {
        return Err(usage!("mask and image dimensions differ for {image_id}"));
    }
    let mut rng = rng_from(seed, &[]);
    let (w, h) = (image.width as f64, image.height as f64);
    for _ in 0..config.retry_budget {
        let affine = AffineParams {
            rotation: rng.random_range(-config.max_rotation..=config.max_rotation),
            scale: rng.random_range(config.scale_min..=config.scale_max),
            translate_x: rng.random_range(-config.max_translate_frac..=config.max_translate_frac) * w,
            translate_y: rng.random_range(-config.max_translate_frac..=config.max_translate_frac) * h,
            flip_horizontal: rng.random_bool(0.5),
        };
        let blend = BlendParams {
            alpha: config
                .alpha
                .unwrap_or_else(|| rng.random_range(config.alpha_min..=config.alpha_max)),
            feather_radius: config.feather_radius,
        };
        let (forged, moved) = match paste(image, mask, &affine, &blend) {
            Ok(v) => v,
            Err(Error::Skip(_)) => continue,
            Err(e) => return Err(e),
        };
        let expected_area = mask.area as f64 * affine.scale * affine.scale;
        if (moved.area as f64) < config.min_in_frame * expected_area {
            continue;
        }
        if forged == *image {
            continue;
        }
        return Ok(ForgeryPair {
            authentic: image.clone(),
            forged,
            provenance: ForgeryProvenance {
                source_image: image_id.to_string(),
                method: ForgeryMethod::CopyMove,
                mask_index,
                category: category.to_string(),
                affine: Some(affine),
                blend: Some(blend),
                inpaint_iterations: None,
                generator_version: crate::VERSION.to_string(),
                seed,
            },
        });
    }
    Err(Error::Skip(format!(
        "{image_id}: retry budget of {} exhausted",
        config.retry_budget
    )))
}

/// Removes the largest `category` object and fills the hole by diffusion.
pub fn make_inpaint_pair(
    image_id: &str,
    image: &RasterImage,
    masks: &[ObjectMask],
    category: &str,
    seed: u64,
    iterations: u32,
) -> Result<ForgeryPair> {
    let (mask_index, mask) = select_largest_mask(masks, category)?;
    if mask.area * 2 >= image.pixel_count() {
        return Err(Error::Skip(format!("{image_id}: object covers half the frame or more")));
    }
    let forged = simple_inpaint(image, mask, iterations)?;
    if forged == *image {
        return Err(Error::Skip(format!("{image_id}: inpainting changed nothing")));
    }
    Ok(ForgeryPair {
        authentic: image.clone(),
        forged,
        provenance: ForgeryProvenance {
            source_image: image_id.to_string(),
            method: ForgeryMethod::Inpaint,
            mask_index,
            category: category.to_string(),
            affine: None,
            blend: None,
            inpaint_iterations: Some(iterations),
            generator_version: crate::VERSION.to_string(),
            seed,
        },
    })
}

/// Rebuilds a forged image from its source image, masks and provenance.
pub fn regenerate_forgery(image: &RasterImage, masks: &[ObjectMask], provenance: &ForgeryProvenance) -> Result<RasterImage> {
    let mask = masks
        .get(provenance.mask_index)
        .ok_or_else(|| usage!("provenance mask index {} out of range", provenance.mask_index))?;
    match provenance.method {
        ForgeryMethod::CopyMove => {
            let (affine, blend) = provenance
                .affine
                .zip(provenance.blend)
                .ok_or_else(|| usage!("copy-move provenance lacks affine/blend parameters"))?;
            Ok(paste(image, mask, &affine, &blend)?.0)
        }
        ForgeryMethod::Inpaint => {
            let iterations = provenance
                .inpaint_iterations
                .ok_or_else(|| usage!("inpaint provenance lacks an iteration count"))?;
            simple_inpaint(image, mask, iterations)
        }
    }
}
