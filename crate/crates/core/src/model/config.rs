use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which sequence encoder sits between the pairwise encoding and the
/// feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Two convolution blocks (`1x1` then `3x3` in each).
    #[default]
    Cnn,
    /// Ablation: multilayer perceptron over the flattened pairwise tensor.
    MlpBase,
}

pub const DEFAULT_MARKOV_ORDER: usize = 5;
pub const DEFAULT_HORIZON: usize = 3;
pub const DEFAULT_BLOCK_CHANNELS: [usize; 2] = [128, 256];
pub const DEFAULT_KERNELS: [usize; 4] = [1, 3, 1, 3];
pub const DEFAULT_DROPOUT: f64 = 0.5;
pub const DEFAULT_MLP_HIDDEN: usize = 512;

/// Architecture of a [`CosRecModel`](super::CosRecModel).
///
/// The feature width after the convolution blocks always equals `dim`, so
/// the concatenation with the user embedding is `2 * dim` wide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosRecConfig {
    pub num_users: usize,
    /// Real items; ids run `1..=num_items`, id 0 is padding.
    pub num_items: usize,
    pub dim: usize,
    pub markov_order: usize,
    pub horizon: usize,
    /// Channel widths of the two convolution blocks.
    pub block_channels: [usize; 2],
    /// Kernel sizes of conv1_1, conv1_2, conv2_1, conv2_2.
    pub kernels: [usize; 4],
    pub dropout: f64,
    pub variant: Variant,
    /// Width of the first hidden layer of the MLP variant.
    pub mlp_hidden: usize,
}

impl CosRecConfig {
    pub fn new(num_users: usize, num_items: usize, dim: usize) -> Self {
        Self {
            num_users,
            num_items,
            dim,
            markov_order: DEFAULT_MARKOV_ORDER,
            horizon: DEFAULT_HORIZON,
            block_channels: DEFAULT_BLOCK_CHANNELS,
            kernels: DEFAULT_KERNELS,
            dropout: DEFAULT_DROPOUT,
            variant: Variant::Cnn,
            mlp_hidden: DEFAULT_MLP_HIDDEN,
        }
    }

    /// Overrides the first convolution's kernel. Later layers keep their
    /// default kernel where the remaining spatial extent allows it and shrink
    /// to fit otherwise (a `5x5` first kernel on a `5x5` input leaves `1x1`
    /// kernels for the rest).
    pub fn with_first_kernel(mut self, kernel: usize) -> Self {
        let mut extent = self.markov_order;
        for (i, k) in self.kernels.iter_mut().enumerate() {
            let wanted = if i == 0 { kernel } else { DEFAULT_KERNELS[i] };
            *k = if i == 0 { wanted } else { wanted.min(extent.max(1)) };
            extent = extent.saturating_sub(*k) + 1;
        }
        self
    }

    /// Spatial extents `[input, after conv1_1, .., after conv2_2]`, or an
    /// error when some kernel does not fit.
    pub fn spatial_chain(&self) -> Result<[usize; 5]> {
        let mut chain = [self.markov_order; 5];
        for (i, &k) in self.kernels.iter().enumerate() {
            if k == 0 || k > chain[i] {
                return Err(Error::Config(format!(
                    "kernel {k} of conv layer {} does not fit spatial extent {}",
                    i + 1,
                    chain[i]
                )));
            }
            chain[i + 1] = chain[i] - k + 1;
        }
        Ok(chain)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("num_users", self.num_users),
            ("num_items", self.num_items),
            ("dim", self.dim),
            ("markov_order", self.markov_order),
            ("horizon", self.horizon),
            ("block channel D1", self.block_channels[0]),
            ("block channel D2", self.block_channels[1]),
            ("mlp_hidden", self.mlp_hidden),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be at least 1")));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.variant == Variant::Cnn {
            self.spatial_chain()?;
        }
        Ok(())
    }

    /// Flattened width entering the feature layer FC-D3.
    pub(crate) fn encoder_out_width(&self) -> usize {
        match self.variant {
            Variant::Cnn => {
                let s = self.spatial_chain().map(|c| c[4]).unwrap_or(1);
                self.block_channels[1] * s * s
            }
            Variant::MlpBase => self.mlp_hidden,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_chain_reduces_to_one_by_one() {
        let c = CosRecConfig::new(10, 20, 50);
        assert_eq!(c.spatial_chain().unwrap(), [5, 5, 3, 3, 1]);
        assert_eq!(c.encoder_out_width(), 256);
        c.validate().unwrap();
    }

    #[test]
    fn first_kernel_override() {
        let c = CosRecConfig::new(1, 1, 4).with_first_kernel(5);
        assert_eq!(c.kernels, [5, 1, 1, 1]);
        assert_eq!(c.spatial_chain().unwrap(), [5, 1, 1, 1, 1]);
        let c = CosRecConfig::new(1, 1, 4).with_first_kernel(3);
        assert_eq!(c.kernels, [3, 3, 1, 1]);
        assert_eq!(c.spatial_chain().unwrap()[4], 1);
        let c = CosRecConfig::new(1, 1, 4).with_first_kernel(1);
        assert_eq!(c.kernels, DEFAULT_KERNELS);
    }

    #[test]
    fn broken_chain_is_rejected() {
        let mut c = CosRecConfig::new(1, 1, 4);
        c.markov_order = 3;
        assert!(c.validate().is_err());
        c.variant = Variant::MlpBase;
        c.validate().unwrap();
    }

    #[test]
    fn zero_extents_rejected() {
        assert!(CosRecConfig::new(0, 5, 4).validate().is_err());
        let mut c = CosRecConfig::new(1, 5, 4);
        c.block_channels[1] = 0;
        assert!(c.validate().is_err());
        c = CosRecConfig::new(1, 5, 4);
        c.dropout = 1.0;
        assert!(c.validate().is_err());
    }
}
