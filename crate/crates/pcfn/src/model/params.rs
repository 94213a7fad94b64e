//! Flat parameter registry keyed by layer path, plus the single architecture
//! walk shared by construction, counting and the forward pass.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ModelConfig;
use crate::tensor::{Scalar, Tensor};

/// What a registry tensor is.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
    BnScale,
    BnShift,
    BnMean,
    BnVar,
}

impl ParamKind {
    /// Running statistics are carried in the registry but not trained.
    pub fn trainable(self) -> bool {
        !matches!(self, Self::BnMean | Self::BnVar)
    }
}

/// One registry tensor.
#[derive(Clone, Debug)]
pub struct ParamEntry<T: Scalar> {
    pub path: String,
    pub kind: ParamKind,
    pub tensor: Tensor<T>,
}

/// How a layer's weights start out.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Init {
    Glorot,
    /// Zero weights and an identity-matrix bias: the T-Net output transform
    /// is exactly the identity at step 0.
    ZeroWeightIdentityBias { k: usize },
}

/// One affine layer in traversal order.
#[derive(Clone, Debug)]
pub(crate) struct LayerDef {
    pub path: String,
    pub in_dim: usize,
    pub out_dim: usize,
    pub bn: bool,
    pub relu: bool,
    pub init: Init,
}

impl LayerDef {
    fn plain(path: String, in_dim: usize, out_dim: usize) -> Self {
        Self {
            path,
            in_dim,
            out_dim,
            bn: true,
            relu: true,
            init: Init::Glorot,
        }
    }

    /// Trainable scalars in this layer (weights, bias, bn scale/shift).
    pub fn trainable_count(&self) -> usize {
        let affine = self.out_dim * self.in_dim + self.out_dim;
        if self.bn {
            affine + 2 * self.out_dim
        } else {
            affine
        }
    }
}

fn tnet_layers(defs: &mut Vec<LayerDef>, prefix: &str, k: usize, config: &ModelConfig) {
    let mut dim = k;
    for (i, &w) in config.tnet_conv.iter().enumerate() {
        defs.push(LayerDef::plain(format!("{prefix}.conv{i}"), dim, w));
        dim = w;
    }
    for (i, &w) in config.tnet_fc.iter().enumerate() {
        defs.push(LayerDef::plain(format!("{prefix}.fc{i}"), dim, w));
        dim = w;
    }
    defs.push(LayerDef {
        path: format!("{prefix}.out"),
        in_dim: dim,
        out_dim: k * k,
        bn: false,
        relu: false,
        init: Init::ZeroWeightIdentityBias { k },
    });
}

/// Every affine layer of the network, in the order both `build` and the
/// forward pass traverse them.
pub(crate) fn layer_defs(config: &ModelConfig) -> Vec<LayerDef> {
    let mut defs = Vec::new();
    let d = config.input_dim;
    tnet_layers(&mut defs, "tnet_in", d, config);
    let mut dim = d;
    for (i, &w) in config.mlp1.iter().enumerate() {
        defs.push(LayerDef::plain(format!("mlp1.conv{i}"), dim, w));
        dim = w;
    }
    tnet_layers(&mut defs, "tnet_feat", config.local_dim(), config);
    for (i, &w) in config.mlp2.iter().enumerate() {
        defs.push(LayerDef::plain(format!("mlp2.conv{i}"), dim, w));
        dim = w;
    }
    let mut dim = config.concat_dim();
    for (i, &w) in config.tail_mlp.iter().enumerate() {
        defs.push(LayerDef::plain(format!("tail.conv{i}"), dim, w));
        dim = w;
    }
    defs.push(LayerDef {
        path: "head.pre".into(),
        in_dim: dim,
        out_dim: config.pre_head_dim(),
        bn: false,
        relu: true,
        init: Init::Glorot,
    });
    defs.push(LayerDef {
        path: "head.out".into(),
        in_dim: config.pre_head_dim(),
        out_dim: config.n_cfd,
        bn: false,
        relu: false,
        init: Init::Glorot,
    });
    defs
}

/// Total trainable scalars plus a per-layer breakdown.
pub fn parameter_count(config: &ModelConfig) -> (usize, Vec<(String, usize)>) {
    let mut breakdown = Vec::new();
    let mut total = 0;
    for def in layer_defs(config) {
        let count = def.trainable_count();
        total += count;
        breakdown.push((def.path, count));
    }
    (total, breakdown)
}

/// Allocates and initializes the registry. Deterministic for a given seed:
/// entries are created in traversal order from a counter-seeded stream.
pub(crate) fn build_entries<T: Scalar>(config: &ModelConfig, seed: u64) -> Vec<ParamEntry<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    for def in layer_defs(config) {
        let (w, b) = match def.init {
            Init::Glorot => {
                let bound = (6.0 / (def.in_dim + def.out_dim) as f64).sqrt();
                let w: Vec<T> = (0..def.out_dim * def.in_dim)
                    .map(|_| T::from_f64(rng.gen_range(-bound..bound)))
                    .collect();
                (w, vec![T::ZERO; def.out_dim])
            }
            Init::ZeroWeightIdentityBias { k } => {
                let mut b = vec![T::ZERO; k * k];
                for i in 0..k {
                    b[i * k + i] = T::ONE;
                }
                (vec![T::ZERO; def.out_dim * def.in_dim], b)
            }
        };
        entries.push(ParamEntry {
            path: format!("{}.w", def.path),
            kind: ParamKind::Weight,
            tensor: Tensor::matrix(def.out_dim, def.in_dim, w).expect("sized above"),
        });
        entries.push(ParamEntry {
            path: format!("{}.b", def.path),
            kind: ParamKind::Bias,
            tensor: Tensor::new(vec![def.out_dim], b).expect("sized above"),
        });
        if def.bn {
            let c = def.out_dim;
            for (suffix, kind, fill) in [
                (".bn.gamma", ParamKind::BnScale, T::ONE),
                (".bn.beta", ParamKind::BnShift, T::ZERO),
                (".bn.mean", ParamKind::BnMean, T::ZERO),
                (".bn.var", ParamKind::BnVar, T::ONE),
            ] {
                entries.push(ParamEntry {
                    path: format!("{}{suffix}", def.path),
                    kind,
                    tensor: Tensor::new(vec![c], vec![fill; c]).expect("sized above"),
                });
            }
        }
    }
    entries
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_parameter_count_matches_reference() {
        let config = ModelConfig::new(1024, 3, 3, 1024).unwrap();
        let (total, breakdown) = parameter_count(&config);
        assert_eq!(
            total, 3_552_588,
            "breakdown:\n{}",
            breakdown
                .iter()
                .map(|(p, c)| format!("  {p}: {c}"))
                .collect::<Vec<_>>()
                .join("\n")
        );
    }

    #[test]
    fn registry_total_matches_closed_form() {
        let config = ModelConfig::new(32, 2, 3, 64).unwrap();
        let entries = build_entries::<f64>(&config, 1);
        let registry_total: usize = entries
            .iter()
            .filter(|e| e.kind.trainable())
            .map(|e| e.tensor.numel())
            .sum();
        assert_eq!(registry_total, parameter_count(&config).0);
    }

    /// Hand-computed per-layer sums for a small config: d=2, G=64,
    /// mlp1=(64,64), mlp2=(64,128,64), tnet_conv=(64,128,64),
    /// tnet_fc=(64,32), tail=(64,32,16), n_cfd=3.
    #[test]
    fn small_config_count_matches_hand_table() {
        let config = ModelConfig::new(64, 2, 3, 64).unwrap();
        // tnet_in: convs (2->64)+bn, (64->128)+bn, (128->64)+bn
        //          fcs (64->64)+bn, (64->32)+bn, out 32->4
        let tnet_in = (2 * 64 + 64 + 128)
            + (64 * 128 + 128 + 256)
            + (128 * 64 + 64 + 128)
            + (64 * 64 + 64 + 128)
            + (64 * 32 + 32 + 64)
            + (32 * 4 + 4);
        // mlp1: (2->64)+bn, (64->64)+bn
        let mlp1 = (2 * 64 + 64 + 128) + (64 * 64 + 64 + 128);
        // tnet_feat: convs (64->64)+bn, (64->128)+bn, (128->64)+bn,
        //            fcs (64->64)+bn, (64->32)+bn, out 32->4096
        let tnet_feat = (64 * 64 + 64 + 128)
            + (64 * 128 + 128 + 256)
            + (128 * 64 + 64 + 128)
            + (64 * 64 + 64 + 128)
            + (64 * 32 + 32 + 64)
            + (32 * 4096 + 4096);
        // mlp2: (64->64)+bn, (64->128)+bn, (128->64)+bn
        let mlp2 = (64 * 64 + 64 + 128) + (64 * 128 + 128 + 256) + (128 * 64 + 64 + 128);
        // tail on concat 128: (128->64)+bn, (64->32)+bn, (32->16)+bn
        let tail = (128 * 64 + 64 + 128) + (64 * 32 + 32 + 64) + (32 * 16 + 16 + 32);
        // head: pre 16->16, out 16->3
        let head = (16 * 16 + 16) + (16 * 3 + 3);
        let expected = tnet_in + mlp1 + tnet_feat + mlp2 + tail + head;
        assert_eq!(parameter_count(&config).0, expected);
    }

    #[test]
    fn extra_output_channel_costs_last_width_plus_one() {
        let c3 = ModelConfig::new(64, 2, 3, 64).unwrap();
        let c4 = ModelConfig::new(64, 2, 4, 64).unwrap();
        let delta = parameter_count(&c4).0 - parameter_count(&c3).0;
        assert_eq!(delta, c3.pre_head_dim() + 1);
    }

    #[test]
    fn same_seed_builds_identical_parameters() {
        let config = ModelConfig::new(16, 2, 3, 64).unwrap();
        let a = build_entries::<f64>(&config, 99);
        let b = build_entries::<f64>(&config, 99);
        for (ea, eb) in a.iter().zip(&b) {
            assert_eq!(ea.path, eb.path);
            assert!(ea
                .tensor
                .data()
                .iter()
                .zip(eb.tensor.data())
                .all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        let c = build_entries::<f64>(&config, 100);
        assert!(a
            .iter()
            .zip(&c)
            .any(|(ea, ec)| ea.tensor.data() != ec.tensor.data()));
    }
}
