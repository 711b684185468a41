//! TOML run configuration. Each subcommand reads its own section; unknown
//! keys anywhere are rejected.

use std::path::{Path, PathBuf};

use forgeda_core::da_train::{LambdaSchedule, Method, MmdKernel};
use forgeda_core::data::{Domain, Split};
use forgeda_core::models::Preset;
use forgeda_core::synth::{ColorSpace, CopyMoveConfig};
use forgeda_core::tensor_nn::OptimizerKind;
use forgeda_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toy: Option<ToySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<GenerateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ReportSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToySection {
    pub images: usize,
    pub size: u32,
    pub max_objects: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for ToySection {
    fn default() -> Self {
        let d = forgeda_core::synth::ToyCorpusConfig::default();
        Self {
            images: d.images,
            size: d.size,
            max_objects: d.max_objects,
            seed: d.seed,
            out: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateSection {
    pub corpus: Option<PathBuf>,
    /// Defaults to `<corpus>/annotations.json`.
    pub annotations: Option<PathBuf>,
    pub count: usize,
    /// Relative weights `[copy_move, inpaint]`.
    pub mix: [u32; 2],
    pub category: Option<String>,
    pub domain: Domain,
    pub seed: u64,
    pub inpaint_iterations: u32,
    pub copy_move: CopyMoveConfig,
    pub out: Option<PathBuf>,
}

impl Default for GenerateSection {
    fn default() -> Self {
        let d = forgeda_core::synth::GenerateConfig::default();
        Self {
            corpus: None,
            annotations: None,
            count: d.count,
            mix: [d.mix_copy_move, d.mix_inpaint],
            category: d.category,
            domain: d.domain,
            seed: d.seed,
            inpaint_iterations: d.inpaint_iterations,
            copy_move: d.copy_move,
            out: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub manifest: Option<PathBuf>,
    pub train_fraction: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            manifest: None,
            train_fraction: 0.8,
            seed: 0,
            out: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub method: Method,
    pub preset: Preset,
    pub color_space: ColorSpace,
    pub input_side: usize,
    pub source_manifest: Option<PathBuf>,
    pub target_manifest: Option<PathBuf>,
    /// Records used for training; defaults to `train` when the manifest is split.
    pub source_split: Option<Split>,
    pub target_split: Option<Split>,
    /// Labeled records scored after every epoch (never used for updates).
    pub monitor_manifest: Option<PathBuf>,
    pub monitor_split: Option<Split>,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: Option<OptimizerKind>,
    pub lambda: LambdaSchedule,
    pub mmd_alpha: f64,
    pub mmd_kernel: MmdKernel,
    pub feature_dim: usize,
    pub source_hidden: usize,
    pub domain_hidden: usize,
    pub checkpoint_every_epoch: bool,
    pub out: Option<PathBuf>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = forgeda_core::TrainConfig::default();
        let n = forgeda_core::NetworkSpec::default();
        Self {
            method: t.method,
            preset: n.preset,
            color_space: n.color_space,
            input_side: n.input_side,
            source_manifest: None,
            target_manifest: None,
            source_split: None,
            target_split: None,
            monitor_manifest: None,
            monitor_split: None,
            epochs: t.epochs,
            batch_size: t.batch_size,
            seed: t.seed,
            optimizer: None,
            lambda: t.lambda,
            mmd_alpha: t.mmd_alpha,
            mmd_kernel: t.mmd_kernel,
            feature_dim: n.feature_dim,
            source_hidden: n.source_hidden,
            domain_hidden: n.domain_hidden,
            checkpoint_every_epoch: true,
            out: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub checkpoint: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    /// Defaults to `test` when the manifest is split.
    pub split: Option<Split>,
    pub batch_size: usize,
    pub label: Option<String>,
    pub out: Option<PathBuf>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            checkpoint: None,
            manifest: None,
            split: None,
            batch_size: 64,
            label: None,
            out: None,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    /// `metrics.json` files written by `eval`.
    pub inputs: Vec<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Trains once per color space with the `[train]` section and scores each
/// run on `eval_manifest`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub color_spaces: Vec<ColorSpace>,
    pub eval_manifest: Option<PathBuf>,
    pub eval_split: Option<Split>,
    pub out: Option<PathBuf>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            color_spaces: vec![ColorSpace::Rgb, ColorSpace::YCrCb],
            eval_manifest: None,
            eval_split: None,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))
    }

    /// Loads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.rebase(base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(v) = p {
                if v.is_relative() {
                    *v = base.join(&*v);
                }
            }
        };
        if let Some(s) = &mut self.toy {
            fix(&mut s.out);
        }
        if let Some(s) = &mut self.generate {
            fix(&mut s.corpus);
            fix(&mut s.annotations);
            fix(&mut s.out);
        }
        if let Some(s) = &mut self.split {
            fix(&mut s.manifest);
            fix(&mut s.out);
        }
        if let Some(s) = &mut self.train {
            fix(&mut s.source_manifest);
            fix(&mut s.target_manifest);
            fix(&mut s.monitor_manifest);
            fix(&mut s.out);
        }
        if let Some(s) = &mut self.eval {
            fix(&mut s.checkpoint);
            fix(&mut s.manifest);
            fix(&mut s.out);
        }
        if let Some(s) = &mut self.report {
            for p in &mut s.inputs {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
            fix(&mut s.out);
        }
        if let Some(s) = &mut self.grid {
            fix(&mut s.eval_manifest);
            fix(&mut s.out);
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }
}

/// Absolute form of a path without touching the filesystem.
pub fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

pub fn require(p: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    p.as_ref()
        .map(|v| absolute(v))
        .ok_or_else(|| Error::Config(format!("missing required setting `{what}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_reports_line() {
        let err = RunConfig::parse("[train]\nepochs = 3\nbogus = 1\n", "cfg.toml").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3") && msg.contains("bogus"), "{msg}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn unknown_section_rejected() {
        assert!(RunConfig::parse("[trian]\n", "x").is_err());
    }

    #[test]
    fn sections_round_trip() {
        let cfg = RunConfig::parse(
            "[train]\nmethod = \"ddc\"\npreset = \"vgg7\"\ncolor_space = \"ycrcb\"\nmmd_kernel = { kind = \"rbf\", bandwidth = 2.0 }\noptimizer = { kind = \"sgd_momentum\", lr = 0.01, momentum = 0.9 }\n",
            "x",
        )
        .unwrap();
        let t = cfg.train.as_ref().unwrap();
        assert_eq!(t.method, Method::Ddc);
        assert_eq!(t.preset, Preset::Vgg7Small);
        let again = RunConfig::parse(&cfg.to_toml().unwrap(), "y").unwrap();
        assert_eq!(again.to_toml().unwrap(), cfg.to_toml().unwrap());
    }

    #[test]
    fn relative_paths_follow_config_file() {
        let mut cfg = RunConfig::parse("[eval]\nmanifest = \"data/m.jsonl\"\n", "x").unwrap();
        cfg.rebase(Path::new("/cfg"));
        assert_eq!(cfg.eval.unwrap().manifest.unwrap(), PathBuf::from("/cfg/data/m.jsonl"));
    }
}
