use std::path::Path;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::coco::{CocoImage, CocoIndex};
use super::copy_move::{make_copy_move_pair, make_inpaint_pair, CopyMoveConfig, ForgeryMethod, ForgeryPair};
use super::raster::{ObjectMask, RasterImage};
use crate::data::{ClassLabel, Domain, Manifest, ManifestRecord};
use crate::error::{config_err, data_err, Error, Result};
use crate::rng::{derive_seed, hash_str};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    /// Number of manifest records; half authentic, half forged.
    pub count: usize,
    /// Relative weight of copy-move pairs.
    pub mix_copy_move: u32,
    /// Relative weight of inpainted pairs.
    pub mix_inpaint: u32,
    /// Object category to copy or remove. `None` picks each image's largest object.
    pub category: Option<String>,
    pub domain: Domain,
    pub seed: u64,
    pub inpaint_iterations: u32,
    pub copy_move: CopyMoveConfig,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            count: 100,
            mix_copy_move: 3,
            mix_inpaint: 1,
            category: None,
            domain: Domain::Source,
            seed: 0,
            inpaint_iterations: 500,
            copy_move: CopyMoveConfig::default(),
        }
    }
}

impl GenerateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 || self.count % 2 != 0 {
            return Err(config_err!("count must be a positive even number, got {}", self.count));
        }
        if self.mix_copy_move + self.mix_inpaint == 0 {
            return Err(config_err!("mix weights must not both be zero"));
        }
        self.copy_move.validate()
    }

    /// `(copy_move_pairs, inpaint_pairs)`.
    pub fn pair_counts(&self) -> (usize, usize) {
        let pairs = self.count / 2;
        let total = (self.mix_copy_move + self.mix_inpaint) as usize;
        let cmf = pairs * self.mix_copy_move as usize / total;
        (cmf, pairs - cmf)
    }
}

#[derive(Debug)]
pub struct GenerateSummary {
    pub manifest: Manifest,
    pub skipped: usize,
}

fn default_category(masks: &[ObjectMask]) -> Option<String> {
    let mut best: Option<&ObjectMask> = None;
    for m in masks {
        if best.is_none_or(|b| m.area > b.area) {
            best = Some(m);
        }
    }
    best.map(|m| m.category.clone())
}

fn attempt(
    corpus_dir: &Path,
    index: &CocoIndex,
    image: &CocoImage,
    method: ForgeryMethod,
    seed: u64,
    config: &GenerateConfig,
) -> Result<ForgeryPair> {
    let path = corpus_dir.join(&image.file_name);
    let raster = RasterImage::load(&path)?;
    if !raster.same_dims(image.width, image.height) {
        return Err(data_err!(
            "{} is {}x{}, annotations say {}x{}",
            path.display(),
            raster.width,
            raster.height,
            image.width,
            image.height
        ));
    }
    let masks = index.masks_for(image)?;
    let category = match &config.category {
        Some(c) => c.clone(),
        None => default_category(&masks).ok_or_else(|| Error::Skip(format!("{} has no objects", image.file_name)))?,
    };
    match method {
        ForgeryMethod::CopyMove => make_copy_move_pair(&image.file_name, &raster, &masks, &category, seed, &config.copy_move),
        ForgeryMethod::Inpaint => {
            make_inpaint_pair(&image.file_name, &raster, &masks, &category, seed, config.inpaint_iterations)
        }
    }
}

/// Synthesizes `config.count` records of authentic/forged pairs from an
/// annotated corpus and writes PNGs plus `manifest.jsonl` under `out_dir`.
///
/// Pair `k` starts at corpus image `k mod N` and moves to the next image when
/// an attempt is skipped. Each attempt is seeded from `(seed, k, file name)`,
/// so output does not depend on how pairs are scheduled across threads.
pub fn generate_dataset(corpus_dir: &Path, annotations: &Path, out_dir: &Path, config: &GenerateConfig) -> Result<GenerateSummary> {
    config.validate()?;
    let index = CocoIndex::load(annotations)?;
    let images = index.images();
    if images.is_empty() {
        return Err(data_err!("{} lists no images", annotations.display()));
    }
    let image_dir = out_dir.join("images");
    std::fs::create_dir_all(&image_dir).map_err(|e| Error::io(&image_dir, e))?;

    let (cmf_pairs, inpaint_pairs) = config.pair_counts();
    let jobs: Vec<(usize, ForgeryMethod)> = (0..cmf_pairs)
        .map(|k| (k, ForgeryMethod::CopyMove))
        .chain((cmf_pairs..cmf_pairs + inpaint_pairs).map(|k| (k, ForgeryMethod::Inpaint)))
        .collect();

    let results: Vec<Result<(Vec<ManifestRecord>, usize)>> = jobs
        .par_iter()
        .map(|&(k, method)| {
            let mut skipped = 0;
            for a in 0..images.len() {
                let image = images[(k + a) % images.len()];
                let seed = derive_seed(config.seed, &[k as u64, hash_str(&image.file_name)]);
                match attempt(corpus_dir, &index, image, method, seed, config) {
                    Ok(pair) => return write_pair(out_dir, k, method, pair, config.domain).map(|r| (r, skipped)),
                    Err(e @ (Error::Skip(_) | Error::Image { .. } | Error::Data(_))) => {
                        warn!("pair {k}: skipping {}: {e}", image.file_name);
                        skipped += 1;
                    }
                    Err(e) => return Err(e),
                }
            }
            Err(data_err!("pair {k}: no corpus image produced a usable forgery"))
        })
        .collect();

    let mut records = Vec::with_capacity(config.count);
    let mut skipped = 0;
    for r in results {
        let (recs, s) = r?;
        records.extend(recs);
        skipped += s;
    }
    debug!("generated {} records, {skipped} skipped attempts", records.len());
    let manifest = Manifest::new(records, out_dir)?;
    manifest.save(&out_dir.join("manifest.jsonl"))?;
    Ok(GenerateSummary { manifest, skipped })
}

fn write_pair(out_dir: &Path, k: usize, method: ForgeryMethod, pair: ForgeryPair, domain: Domain) -> Result<Vec<ManifestRecord>> {
    let prefix = match method {
        ForgeryMethod::CopyMove => "cmf",
        ForgeryMethod::Inpaint => "inp",
    };
    let mut out = Vec::with_capacity(2);
    for (label, img, prov) in [
        (ClassLabel::Authentic, &pair.authentic, None),
        (ClassLabel::Forged, &pair.forged, Some(pair.provenance.clone())),
    ] {
        let suffix = match label {
            ClassLabel::Authentic => "authentic",
            ClassLabel::Forged => "forged",
        };
        let id = format!("{prefix}-{k:05}-{suffix}");
        let rel = format!("images/{id}.png");
        img.save_png(&out_dir.join(&rel))?;
        out.push(ManifestRecord {
            id,
            path: rel,
            class_label: Some(label),
            domain,
            split: None,
            provenance: prov,
        });
    }
    Ok(out)
}
