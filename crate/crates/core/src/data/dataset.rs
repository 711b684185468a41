use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::color::to_color_space;
use super::manifest::{Domain, Manifest};
use super::resize::resize_bilinear;
use crate::error::{data_err, usage, Result};
use crate::rng::{rng_from, Rng};
use crate::synth::{ColorSpace, RasterImage};
use crate::tensor_nn::Tensor;

/// Samples held in memory as one flat `f32` buffer.
#[derive(Clone, Debug)]
pub struct TensorDataset {
    pub sample_shape: Vec<usize>,
    pub features: Vec<f32>,
    /// `None` for unlabeled data.
    pub labels: Option<Vec<usize>>,
    pub domain: Domain,
    pub ids: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Batch {
    pub images: Tensor<f32>,
    /// Present only for labeled source batches.
    pub class_labels: Option<Vec<usize>>,
    /// 0 = source, 1 = target.
    pub domain_labels: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.domain_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domain_labels.is_empty()
    }
}

/// Channel-first `[3, side, side]` tensor data scaled to `[0, 1]`.
pub fn image_to_chw(image: &RasterImage) -> Vec<f32> {
    let n = image.pixel_count();
    let mut out = vec![0.0f32; 3 * n];
    for (i, px) in image.data.chunks_exact(3).enumerate() {
        for c in 0..3 {
            out[c * n + i] = px[c] as f32 / 255.0;
        }
    }
    out
}

impl TensorDataset {
    pub fn from_features(
        features: Vec<f32>,
        sample_shape: Vec<usize>,
        labels: Option<Vec<usize>>,
        domain: Domain,
    ) -> Result<Self> {
        let sample_len: usize = sample_shape.iter().product();
        if sample_len == 0 || features.len() % sample_len != 0 {
            return Err(usage!(
                "{} features do not divide into samples of shape {sample_shape:?}",
                features.len()
            ));
        }
        let n = features.len() / sample_len;
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(usage!("{} labels for {n} samples", l.len()));
            }
        }
        Ok(Self {
            sample_shape,
            features,
            labels,
            domain,
            ids: (0..n).map(|i| i.to_string()).collect(),
        })
    }

    /// Decodes, converts and resizes every image in the manifest. Labels are
    /// kept only if `with_labels` is set and every record has one.
    pub fn load(manifest: &Manifest, side: u32, color_space: ColorSpace, with_labels: bool, domain: Domain) -> Result<Self> {
        if manifest.is_empty() {
            return Err(usage!("manifest is empty"));
        }
        let samples: Vec<Vec<f32>> = manifest
            .records
            .par_iter()
            .map(|r| {
                let img = RasterImage::load(&manifest.resolve(r))?;
                let img = resize_bilinear(&img, side)?;
                Ok(image_to_chw(&to_color_space(&img, color_space)?))
            })
            .collect::<Result<_>>()?;
        let labels = if with_labels { Some(manifest.labels()?) } else { None };
        Ok(Self {
            sample_shape: vec![3, side as usize, side as usize],
            features: samples.concat(),
            labels,
            domain,
            ids: manifest.records.iter().map(|r| r.id.clone()).collect(),
        })
    }

    pub fn sample_len(&self) -> usize {
        self.sample_shape.iter().product()
    }

    pub fn len(&self) -> usize {
        self.features.len() / self.sample_len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn domain_label(&self) -> usize {
        match self.domain {
            Domain::Source => 0,
            Domain::Target => 1,
        }
    }

    /// Gathers samples by index. Class labels are attached only when
    /// `with_labels` is set and the dataset has them.
    pub fn batch(&self, indices: &[usize], with_labels: bool) -> Result<Batch> {
        if indices.is_empty() {
            return Err(usage!("empty batch"));
        }
        let sl = self.sample_len();
        let mut data = Vec::with_capacity(indices.len() * sl);
        for &i in indices {
            if i >= self.len() {
                return Err(data_err!("sample index {i} out of range {}", self.len()));
            }
            data.extend_from_slice(&self.features[i * sl..(i + 1) * sl]);
        }
        let mut shape = vec![indices.len()];
        shape.extend_from_slice(&self.sample_shape);
        let class_labels = match (&self.labels, with_labels) {
            (Some(l), true) => Some(indices.iter().map(|&i| l[i]).collect()),
            _ => None,
        };
        Ok(Batch {
            images: Tensor::new(shape, data)?,
            class_labels,
            domain_labels: vec![self.domain_label(); indices.len()],
        })
    }

    /// Consecutive batches in dataset order, the last one possibly short.
    pub fn sequential_batches(&self, batch_size: usize) -> impl Iterator<Item = Result<Batch>> + '_ {
        let n = self.len();
        (0..n.div_ceil(batch_size.max(1))).map(move |b| {
            let idx: Vec<usize> = (b * batch_size..((b + 1) * batch_size).min(n)).collect();
            self.batch(&idx, true)
        })
    }
}

/// Endless shuffled index stream that reshuffles whenever fewer than one
/// batch of unseen items remains.
#[derive(Clone, Debug)]
pub struct IndexStream {
    order: Vec<usize>,
    cursor: usize,
    rng: Rng,
}

impl IndexStream {
    pub fn new(len: usize, rng: Rng) -> Self {
        Self {
            order: (0..len).collect(),
            cursor: len,
            rng,
        }
    }

    pub fn take(&mut self, batch: usize) -> Vec<usize> {
        if self.cursor + batch > self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let out = self.order[self.cursor..self.cursor + batch].to_vec();
        self.cursor += batch;
        out
    }
}

/// Labeled source batches for single-domain training.
pub struct SourceBatches<'a> {
    data: &'a TensorDataset,
    stream: IndexStream,
    batch_size: usize,
}

impl<'a> SourceBatches<'a> {
    pub fn new(data: &'a TensorDataset, batch_size: usize, seed: u64) -> Result<Self> {
        if batch_size == 0 || batch_size > data.len() {
            return Err(usage!("batch size {batch_size} invalid for {} samples", data.len()));
        }
        Ok(Self {
            data,
            stream: IndexStream::new(data.len(), rng_from(seed, &[0])),
            batch_size,
        })
    }

    pub fn steps_per_epoch(&self) -> usize {
        self.data.len() / self.batch_size
    }

    pub fn next_batch(&mut self) -> Result<Batch> {
        let idx = self.stream.take(self.batch_size);
        self.data.batch(&idx, true)
    }
}

/// Equal-sized (source, target) batches. An epoch is
/// `max(n_source, n_target) / batch_size` steps; the smaller side cycles.
/// Target batches never carry class labels.
pub struct PairedBatchIterator<'a> {
    source: &'a TensorDataset,
    target: &'a TensorDataset,
    source_stream: IndexStream,
    target_stream: IndexStream,
    batch_size: usize,
}

impl<'a> PairedBatchIterator<'a> {
    pub fn new(source: &'a TensorDataset, target: &'a TensorDataset, batch_size: usize, seed: u64) -> Result<Self> {
        if source.is_empty() || target.is_empty() {
            return Err(usage!("source and target must both be non-empty"));
        }
        if batch_size == 0 || batch_size > source.len() || batch_size > target.len() {
            return Err(usage!(
                "batch size {batch_size} invalid for {} source / {} target samples",
                source.len(),
                target.len()
            ));
        }
        if source.sample_shape != target.sample_shape {
            return Err(usage!(
                "source shape {:?} differs from target shape {:?}",
                source.sample_shape,
                target.sample_shape
            ));
        }
        Ok(Self {
            source,
            target,
            source_stream: IndexStream::new(source.len(), rng_from(seed, &[0])),
            target_stream: IndexStream::new(target.len(), rng_from(seed, &[1])),
            batch_size,
        })
    }

    pub fn steps_per_epoch(&self) -> usize {
        self.source.len().max(self.target.len()) / self.batch_size
    }

    pub fn next_pair(&mut self) -> Result<(Batch, Batch)> {
        let s = self.source_stream.take(self.batch_size);
        let t = self.target_stream.take(self.batch_size);
        let mut sb = self.source.batch(&s, true)?;
        let mut tb = self.target.batch(&t, false)?;
        sb.domain_labels.fill(0);
        tb.domain_labels.fill(1);
        Ok((sb, tb))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(n: usize, domain: Domain) -> TensorDataset {
        let feats = (0..n).map(|i| i as f32).collect();
        TensorDataset::from_features(feats, vec![1], Some((0..n).map(|i| i % 2).collect()), domain).unwrap()
    }

    fn ids(b: &Batch) -> Vec<usize> {
        b.images.data().iter().map(|&v| v as usize).collect()
    }

    #[test]
    fn equal_sizes_give_one_pass() {
        let (s, t) = (ds(4, Domain::Source), ds(4, Domain::Target));
        let mut it = PairedBatchIterator::new(&s, &t, 2, 5).unwrap();
        assert_eq!(it.steps_per_epoch(), 2);
        let mut seen = Vec::new();
        for _ in 0..2 {
            let (sb, tb) = it.next_pair().unwrap();
            assert!(tb.class_labels.is_none());
            assert_eq!(tb.domain_labels, vec![1, 1]);
            assert_eq!(sb.domain_labels, vec![0, 0]);
            seen.extend(ids(&sb));
        }
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2, 3]);
    }

    #[test]
    fn smaller_side_cycles() {
        let (s, t) = (ds(6, Domain::Source), ds(2, Domain::Target));
        let mut it = PairedBatchIterator::new(&s, &t, 2, 5).unwrap();
        assert_eq!(it.steps_per_epoch(), 3);
        for _ in 0..3 {
            let (_, tb) = it.next_pair().unwrap();
            let mut t = ids(&tb);
            t.sort();
            assert_eq!(t, vec![0, 1]);
        }
    }

    #[test]
    fn deterministic_and_rejects_big_batch() {
        let (s, t) = (ds(5, Domain::Source), ds(3, Domain::Target));
        let run = || {
            let mut it = PairedBatchIterator::new(&s, &t, 2, 9).unwrap();
            (0..6).map(|_| it.next_pair().map(|(a, b)| (ids(&a), ids(&b))).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
        assert!(PairedBatchIterator::new(&s, &t, 4, 0).is_err());
    }

    #[test]
    fn chw_layout() {
        let img = RasterImage::new(2, 1, vec![255, 0, 0, 0, 255, 0], ColorSpace::Rgb).unwrap();
        assert_eq!(image_to_chw(&img), vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    }
}
