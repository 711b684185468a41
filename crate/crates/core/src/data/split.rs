use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::manifest::{Manifest, Split};
use crate::error::{usage, Result};
use crate::rng::rng_from;

/// Per-class stratified shuffle: `floor(fraction * n_c)` records of each
/// class go to train, the rest to test. Unlabeled records form their own
/// group. Record order is preserved; only split tags change.
pub fn split_dataset(manifest: &Manifest, train_fraction: f64, seed: u64) -> Result<Manifest> {
    if manifest.is_empty() {
        return Err(usage!("cannot split an empty manifest"));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(usage!("train fraction must be in (0, 1), got {train_fraction}"));
    }
    let mut groups: BTreeMap<Option<usize>, Vec<usize>> = BTreeMap::new();
    for (i, r) in manifest.records.iter().enumerate() {
        groups.entry(r.class_label.map(|c| c.index())).or_default().push(i);
    }
    let mut out = manifest.clone();
    for (key, mut idx) in groups {
        let group_id = key.map_or(u64::MAX, |k| k as u64);
        idx.shuffle(&mut rng_from(seed, &[group_id]));
        let n_train = (train_fraction * idx.len() as f64 + 1e-9).floor() as usize;
        for (j, &i) in idx.iter().enumerate() {
            out.records[i].split = Some(if j < n_train { Split::Train } else { Split::Test });
        }
    }
    Ok(out)
}
