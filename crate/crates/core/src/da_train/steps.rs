use crate::data::Batch;
use crate::error::{usage, Error, Result};
use crate::models::TwoHeadNetwork;
use crate::tensor_nn::{softmax_cross_entropy, OptimizerState, Tensor};

use super::mmd::{mmd_squared_with_grad, MmdKernel};

/// Losses of one optimizer step, measured before the update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepLosses {
    pub class_loss: f64,
    /// Domain cross-entropy for DANN, MMD² for DDC, 0 for source-only.
    pub domain_loss: f64,
    pub source_correct: usize,
    pub source_count: usize,
}

fn source_labels(batch: &Batch) -> Result<&[usize]> {
    batch
        .class_labels
        .as_deref()
        .ok_or_else(|| usage!("source batch carries no class labels"))
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(format!("{what} is {v}")))
    }
}

fn correct(logits: &Tensor, labels: &[usize]) -> Result<usize> {
    Ok(logits.argmax_rows()?.iter().zip(labels).filter(|(a, b)| a == b).count())
}

fn add_into(a: &mut Tensor, b: &Tensor) {
    for (x, &y) in a.data_mut().iter_mut().zip(b.data()) {
        *x += y;
    }
}

/// Supervised step on the class head and extractor only.
pub fn source_only_step(net: &mut TwoHeadNetwork, source: &Batch, opt: &mut OptimizerState) -> Result<StepLosses> {
    let labels = source_labels(source)?;
    net.zero_grad();
    let features = net.features(&source.images)?;
    let logits = net.class_logits(&features)?;
    let (loss, grad) = softmax_cross_entropy(&logits, labels)?;
    let loss = finite(loss as f64, "class loss")?;
    let gf = net.backward_source_head(&grad)?;
    net.backward_extractor(&gf)?;
    opt.apply(&mut net.classifier_params_mut())?;
    Ok(StepLosses {
        class_loss: loss,
        domain_loss: 0.0,
        source_correct: correct(&logits, labels)?,
        source_count: labels.len(),
    })
}

/// Joint class + domain step through the gradient-reversal layer. The
/// extractor sees one concatenated batch; the class loss covers source rows,
/// the domain loss covers all rows. All parameters are stepped.
pub fn dann_step(
    net: &mut TwoHeadNetwork,
    source: &Batch,
    target: &Batch,
    lambda: f64,
    opt: &mut OptimizerState,
) -> Result<StepLosses> {
    let labels = source_labels(source)?;
    let ns = source.len();
    net.zero_grad();
    let x = Tensor::concat_rows(&[&source.images, &target.images])?;
    let out = net.forward_full(&x, lambda)?;

    let src_logits = out.class_logits.slice_rows(0, ns)?;
    let (ls, gs) = softmax_cross_entropy(&src_logits, labels)?;
    let ls = finite(ls as f64, "class loss")?;
    let zeros = Tensor::zeros(&[target.len(), out.class_logits.dim(1)]);
    let g_class = Tensor::concat_rows(&[&gs, &zeros])?;

    let domain_labels: Vec<usize> = source.domain_labels.iter().chain(&target.domain_labels).copied().collect();
    let (ld, gd) = softmax_cross_entropy(&out.domain_logits, &domain_labels)?;
    let ld = finite(ld as f64, "domain loss")?;

    let mut gf = net.backward_source_head(&g_class)?;
    let gf_domain = net.backward_domain_head(&gd)?;
    add_into(&mut gf, &gf_domain);
    net.backward_extractor(&gf)?;
    opt.apply(&mut net.all_params_mut())?;
    Ok(StepLosses {
        class_loss: ls,
        domain_loss: ld,
        source_correct: correct(&src_logits, labels)?,
        source_count: ns,
    })
}

/// Class loss plus `alpha` times squared MMD between source and target
/// features. Only the extractor and class head are stepped.
pub fn ddc_step(
    net: &mut TwoHeadNetwork,
    source: &Batch,
    target: &Batch,
    alpha: f64,
    kernel: MmdKernel,
    opt: &mut OptimizerState,
) -> Result<StepLosses> {
    let labels = source_labels(source)?;
    let ns = source.len();
    net.zero_grad();
    let x = Tensor::concat_rows(&[&source.images, &target.images])?;
    let features = net.features(&x)?;
    let fs = features.slice_rows(0, ns)?;
    let ft = features.slice_rows(ns, features.dim(0))?;
    let logits = net.class_logits(&fs)?;
    let (lc, gc) = softmax_cross_entropy(&logits, labels)?;
    let lc = finite(lc as f64, "class loss")?;
    let mmd = mmd_squared_with_grad(&fs, &ft, kernel)?;
    let mmd2 = finite(mmd.mmd2, "mmd2")?;

    let mut g_src = net.backward_source_head(&gc)?;
    let a = alpha as f32;
    for (g, &m) in g_src.data_mut().iter_mut().zip(mmd.grad_source.data()) {
        *g += a * m;
    }
    let g_tgt = mmd.grad_target.map(|m| a * m);
    net.backward_extractor(&Tensor::concat_rows(&[&g_src, &g_tgt])?)?;
    opt.apply(&mut net.classifier_params_mut())?;
    Ok(StepLosses {
        class_loss: lc,
        domain_loss: mmd2,
        source_correct: correct(&logits, labels)?,
        source_count: ns,
    })
}
