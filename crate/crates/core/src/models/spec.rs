use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::synth::ColorSpace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    /// conv16 k5 s2, conv32 k3, conv64 k3 (each followed by relu and 2×2 max
    /// pooling), then fc to the feature width.
    #[serde(rename = "alexnet")]
    AlexNetSmall,
    /// Three pairs of k3 convolutions (16, 32, 64 channels) with pooling after
    /// each pair, then fc to the feature width: seven weight layers.
    #[serde(rename = "vgg7")]
    Vgg7Small,
    /// Fully connected extractor over flat feature vectors.
    #[serde(rename = "mlp")]
    Mlp,
}

/// Which conv stack a preset uses: `(out_channels, kernel, stride, padding, pool_after)`.
pub(crate) fn conv_plan(preset: Preset) -> &'static [(usize, usize, usize, usize, bool)] {
    match preset {
        Preset::AlexNetSmall => &[(16, 5, 2, 0, true), (32, 3, 1, 1, true), (64, 3, 1, 1, true)],
        Preset::Vgg7Small => &[
            (16, 3, 1, 1, false),
            (16, 3, 1, 1, true),
            (32, 3, 1, 1, false),
            (32, 3, 1, 1, true),
            (64, 3, 1, 1, false),
            (64, 3, 1, 1, true),
        ],
        Preset::Mlp => &[],
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSpec {
    pub preset: Preset,
    /// Image channels (conv presets).
    pub input_channels: usize,
    /// Image side length (conv presets).
    pub input_side: usize,
    /// Flat input width (`Mlp` only).
    pub input_dim: usize,
    /// Hidden widths before the feature layer (`Mlp` only).
    pub hidden: Vec<usize>,
    pub feature_dim: usize,
    /// Optional hidden layer in the class head; 0 means a single fc.
    pub source_hidden: usize,
    pub domain_hidden: usize,
    pub classes: usize,
    /// Color space images are converted to before entering the network.
    pub color_space: ColorSpace,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self {
            preset: Preset::AlexNetSmall,
            input_channels: 3,
            input_side: 64,
            input_dim: 2,
            hidden: Vec::new(),
            feature_dim: 256,
            source_hidden: 0,
            domain_hidden: 64,
            classes: 2,
            color_space: ColorSpace::Rgb,
        }
    }
}

impl NetworkSpec {
    pub fn alexnet(input_side: usize) -> Self {
        Self {
            input_side,
            ..Self::default()
        }
    }

    pub fn vgg7(input_side: usize) -> Self {
        Self {
            preset: Preset::Vgg7Small,
            input_side,
            ..Self::default()
        }
    }

    pub fn mlp(input_dim: usize, hidden: Vec<usize>, feature_dim: usize) -> Self {
        Self {
            preset: Preset::Mlp,
            input_dim,
            hidden,
            feature_dim,
            ..Self::default()
        }
    }

    /// Shape of one input sample.
    pub fn sample_shape(&self) -> Vec<usize> {
        match self.preset {
            Preset::Mlp => vec![self.input_dim],
            _ => vec![self.input_channels, self.input_side, self.input_side],
        }
    }

    /// Flattened width entering the feature layer; errors if a stage would
    /// produce an empty map.
    pub fn flattened_dim(&self) -> Result<usize> {
        if self.preset == Preset::Mlp {
            return Ok(self.hidden.last().copied().unwrap_or(self.input_dim));
        }
        let mut c = self.input_channels;
        let mut s = self.input_side;
        for &(out, k, stride, pad, pool) in conv_plan(self.preset) {
            if s + 2 * pad < k {
                return Err(config_err!("input side {} too small for {:?}", self.input_side, self.preset));
            }
            s = (s + 2 * pad - k) / stride + 1;
            if pool {
                s /= 2;
            }
            if s == 0 {
                return Err(config_err!("input side {} too small for {:?}", self.input_side, self.preset));
            }
            c = out;
        }
        Ok(c * s * s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 || self.domain_hidden == 0 || self.classes < 2 {
            return Err(config_err!("feature_dim, domain_hidden must be positive and classes >= 2"));
        }
        match self.preset {
            Preset::Mlp if self.input_dim == 0 || self.hidden.contains(&0) => {
                Err(config_err!("mlp widths must be positive"))
            }
            Preset::Mlp => Ok(()),
            _ if self.input_channels == 0 => Err(config_err!("input_channels must be positive")),
            _ => self.flattened_dim().map(|_| ()),
        }
    }
}
