//! Architecture hyperparameters and the width pairings per global-feature
//! size.

use serde::{Deserialize, Serialize};

use super::{ModelError, ModelResult};

/// Global-feature sizes the architecture supports.
pub const SUPPORTED_GLOBAL_FEATURES: [usize; 6] = [64, 128, 256, 512, 1024, 2048];

/// Architecture hyperparameters.
///
/// Defaults follow the reference layout: shared MLPs of widths (64, 64) and
/// (64, 128, G), T-Nets built from a (64, 128, G) shared MLP plus a
/// (512, 256) head, and a tail MLP paired to the global-feature size. The
/// regression head appends one extra affine layer of the tail's final width
/// (ReLU, no normalization) before the sigmoid output layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Expected points per cloud (enforced in train mode).
    pub n_points: usize,
    /// Spatial input dimension, 2 or 3.
    pub input_dim: usize,
    /// Output channels per point (u, v, p by default).
    pub n_cfd: usize,
    /// Global feature size G.
    pub global_feature: usize,
    /// First shared MLP; its last width is the local feature dimension.
    pub mlp1: Vec<usize>,
    /// Second shared MLP, ending at G.
    pub mlp2: Vec<usize>,
    /// Shared MLP inside each T-Net, ending at G.
    pub tnet_conv: Vec<usize>,
    /// Fully connected stack inside each T-Net after pooling.
    pub tnet_fc: Vec<usize>,
    /// Tail MLP applied to the concatenated per-point features.
    pub tail_mlp: Vec<usize>,
    /// Exponential moving average factor for batch-norm running stats.
    pub bn_momentum: f64,
    /// Denominator guard in batch norm.
    pub bn_eps: f64,
}

impl ModelConfig {
    /// Canonical configuration for a given size: widths as in the reference
    /// architecture, tail paired to G (desk-scale sizes below 256 get
    /// proportionally reduced tails and T-Net heads).
    pub fn new(
        n_points: usize,
        input_dim: usize,
        n_cfd: usize,
        global_feature: usize,
    ) -> ModelResult<Self> {
        let g = global_feature;
        let config = Self {
            n_points,
            input_dim,
            n_cfd,
            global_feature: g,
            mlp1: vec![64, 64],
            mlp2: vec![64, 128, g],
            tnet_conv: vec![64, 128, g],
            tnet_fc: Self::tnet_fc_for(g),
            tail_mlp: Self::tail_for(g),
            bn_momentum: 0.9,
            bn_eps: 1e-5,
        };
        config.validate()?;
        Ok(config)
    }

    /// Tail MLP paired to the global feature size.
    pub fn tail_for(g: usize) -> Vec<usize> {
        match g {
            _ if g >= 1024 => vec![512, 256, 128],
            _ if g >= 256 => vec![256, 256, 128],
            128 => vec![128, 64, 32],
            _ => vec![64, 32, 16],
        }
    }

    /// Post-pooling fully connected stack inside each T-Net.
    pub fn tnet_fc_for(g: usize) -> Vec<usize> {
        match g {
            _ if g >= 256 => vec![512, 256],
            128 => vec![128, 64],
            _ => vec![64, 32],
        }
    }

    /// Width of the per-point local feature that feeds the concatenation.
    pub fn local_dim(&self) -> usize {
        *self.mlp1.last().expect("mlp1 is non-empty")
    }

    /// Width of the concatenated per-point feature (local + global).
    pub fn concat_dim(&self) -> usize {
        self.local_dim() + self.global_feature
    }

    /// Width of the extra pre-head layer (the tail's final width).
    pub fn pre_head_dim(&self) -> usize {
        *self.tail_mlp.last().expect("tail_mlp is non-empty")
    }

    pub fn validate(&self) -> ModelResult<()> {
        let fail = |what: String| Err(ModelError::Config { what });
        if self.n_points == 0 {
            return fail("n_points must be >= 1".into());
        }
        if self.input_dim != 2 && self.input_dim != 3 {
            return fail(format!("input_dim must be 2 or 3, got {}", self.input_dim));
        }
        if self.n_cfd == 0 {
            return fail("n_cfd must be >= 1".into());
        }
        if !SUPPORTED_GLOBAL_FEATURES.contains(&self.global_feature) {
            return fail(format!(
                "global_feature must be one of {SUPPORTED_GLOBAL_FEATURES:?}, got {}",
                self.global_feature
            ));
        }
        for (name, widths) in [
            ("mlp1", &self.mlp1),
            ("mlp2", &self.mlp2),
            ("tnet_conv", &self.tnet_conv),
            ("tnet_fc", &self.tnet_fc),
            ("tail_mlp", &self.tail_mlp),
        ] {
            if widths.is_empty() || widths.contains(&0) {
                return fail(format!("{name} must be non-empty with positive widths"));
            }
        }
        if *self.mlp2.last().unwrap() != self.global_feature {
            return fail(format!(
                "mlp2 must end at the global feature size {}, got {:?}",
                self.global_feature, self.mlp2
            ));
        }
        if *self.tnet_conv.last().unwrap() != self.global_feature {
            return fail(format!(
                "tnet_conv must end at the global feature size {}, got {:?}",
                self.global_feature, self.tnet_conv
            ));
        }
        if !(0.0..1.0).contains(&self.bn_momentum) {
            return fail(format!("bn_momentum must be in [0,1), got {}", self.bn_momentum));
        }
        if self.bn_eps <= 0.0 {
            return fail(format!("bn_eps must be positive, got {}", self.bn_eps));
        }
        Ok(())
    }
}
