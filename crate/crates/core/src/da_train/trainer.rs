use std::fmt::Write as _;

use log::info;
use serde::{Deserialize, Serialize};

use crate::data::{PairedBatchIterator, SourceBatches, TensorDataset};
use crate::error::{config_err, usage, Result};
use crate::models::TwoHeadNetwork;
use crate::tensor_nn::{OptimizerKind, OptimizerState};

use super::mmd::MmdKernel;
use super::schedule::{lambda_schedule, LambdaSchedule};
use super::steps::{dann_step, ddc_step, source_only_step, StepLosses};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dann,
    Ddc,
    SourceOnly,
}

impl Method {
    pub fn default_optimizer(self) -> OptimizerKind {
        match self {
            Method::Dann | Method::SourceOnly => OptimizerKind::adam(1e-3),
            Method::Ddc => OptimizerKind::sgd_momentum(1e-4, 0.9),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Dann => "dann",
            Method::Ddc => "ddc",
            Method::SourceOnly => "source_only",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub method: Method,
    pub epochs: usize,
    /// Per domain.
    pub batch_size: usize,
    pub seed: u64,
    /// `None` selects the method's default.
    pub optimizer: Option<OptimizerKind>,
    pub lambda: LambdaSchedule,
    pub mmd_alpha: f64,
    pub mmd_kernel: MmdKernel,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::Dann,
            epochs: 30,
            batch_size: 32,
            seed: 0,
            optimizer: None,
            lambda: LambdaSchedule::annealed(),
            mmd_alpha: 0.25,
            mmd_kernel: MmdKernel::Linear,
        }
    }
}

impl TrainConfig {
    pub fn optimizer_kind(&self) -> OptimizerKind {
        self.optimizer.unwrap_or_else(|| self.method.default_optimizer())
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(config_err!("batch_size must be positive"));
        }
        if !(self.mmd_alpha >= 0.0 && self.mmd_alpha.is_finite()) {
            return Err(config_err!("mmd_alpha must be finite and >= 0"));
        }
        self.lambda.validate()?;
        self.mmd_kernel.validate()?;
        self.optimizer_kind().validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub class_loss: f64,
    /// Domain loss (DANN), MMD² (DDC) or 0 (source-only).
    pub domain_loss: f64,
    pub source_accuracy: f64,
    pub target_accuracy: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,class_loss,domain_loss,source_accuracy,target_accuracy\n");
        for r in &self.epochs {
            let tgt = r.target_accuracy.map(|v| format!("{v:.6}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{}",
                r.epoch, r.class_loss, r.domain_loss, r.source_accuracy, tgt
            );
        }
        out
    }
}

/// Called after every epoch with the record (which it may amend, e.g. with
/// a target accuracy) and the current network.
pub type EpochHook<'a> = dyn FnMut(&mut EpochRecord, &mut TwoHeadNetwork) -> Result<()> + 'a;

/// Runs `config.epochs` epochs of the configured method. `target` is
/// required for DANN and DDC and ignored for source-only training; its class
/// labels are never read.
pub fn train(
    net: &mut TwoHeadNetwork,
    source: &TensorDataset,
    target: Option<&TensorDataset>,
    config: &TrainConfig,
    hook: &mut EpochHook<'_>,
) -> Result<TrainHistory> {
    config.validate()?;
    let mut history = TrainHistory::default();
    if config.epochs == 0 {
        return Ok(history);
    }
    let mut opt = OptimizerState::new(config.optimizer_kind())?;
    enum Stream<'a> {
        Paired(PairedBatchIterator<'a>),
        Single(SourceBatches<'a>),
    }
    let mut stream = match (config.method, target) {
        (Method::SourceOnly, _) => Stream::Single(SourceBatches::new(source, config.batch_size, config.seed)?),
        (_, Some(t)) => Stream::Paired(PairedBatchIterator::new(source, t, config.batch_size, config.seed)?),
        (m, None) => return Err(usage!("{} training needs a target dataset", m.name())),
    };
    let steps = match &stream {
        Stream::Paired(p) => p.steps_per_epoch(),
        Stream::Single(s) => s.steps_per_epoch(),
    };
    let total = (steps * config.epochs) as f64;
    for epoch in 0..config.epochs {
        let mut sum = StepLosses::default();
        for step in 0..steps {
            let progress = (epoch * steps + step) as f64 / total;
            let l = match &mut stream {
                Stream::Single(s) => source_only_step(net, &s.next_batch()?, &mut opt),
                Stream::Paired(p) => {
                    let (sb, tb) = p.next_pair()?;
                    match config.method {
                        Method::Dann => dann_step(net, &sb, &tb, lambda_schedule(progress, config.lambda), &mut opt),
                        _ => ddc_step(net, &sb, &tb, config.mmd_alpha, config.mmd_kernel, &mut opt),
                    }
                }
            }
            .map_err(|e| match e {
                crate::Error::Numeric(m) => crate::Error::Numeric(format!("epoch {epoch} step {step}: {m}")),
                e => e,
            })?;
            sum.class_loss += l.class_loss;
            sum.domain_loss += l.domain_loss;
            sum.source_correct += l.source_correct;
            sum.source_count += l.source_count;
        }
        net.clear_caches();
        let mut record = EpochRecord {
            epoch: epoch + 1,
            class_loss: sum.class_loss / steps as f64,
            domain_loss: sum.domain_loss / steps as f64,
            source_accuracy: sum.source_correct as f64 / sum.source_count.max(1) as f64,
            target_accuracy: None,
        };
        hook(&mut record, net)?;
        info!(
            "epoch {}: class {:.4} domain {:.4} src_acc {:.4}",
            record.epoch, record.class_loss, record.domain_loss, record.source_accuracy
        );
        history.epochs.push(record);
    }
    Ok(history)
}

/// Supervised baseline; same as [`train`] with `Method::SourceOnly`.
pub fn train_source_only(
    net: &mut TwoHeadNetwork,
    source: &TensorDataset,
    config: &TrainConfig,
    hook: &mut EpochHook<'_>,
) -> Result<TrainHistory> {
    let config = TrainConfig {
        method: Method::SourceOnly,
        ..config.clone()
    };
    train(net, source, None, &config, hook)
}

/// Fraction of correctly classified samples, evaluated in batches.
pub fn accuracy(net: &mut TwoHeadNetwork, data: &TensorDataset, batch_size: usize) -> Result<f64> {
    let labels = data.labels.as_ref().ok_or_else(|| usage!("accuracy needs labels"))?;
    let mut correct = 0;
    for batch in data.sequential_batches(batch_size) {
        let batch = batch?;
        let preds = net.predict_logits(&batch.images)?.argmax_rows()?;
        let truth = batch.class_labels.as_deref().unwrap_or(&[]);
        correct += preds.iter().zip(truth).filter(|(a, b)| a == b).count();
    }
    Ok(correct as f64 / labels.len() as f64)
}

pub fn no_hook(_: &mut EpochRecord, _: &mut TwoHeadNetwork) -> Result<()> {
    Ok(())
}
