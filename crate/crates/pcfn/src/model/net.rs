//! Forward evaluation of the segmentation regressor on the tape.
//!
//! Both T-Nets are mini point networks: a shared MLP, a max pool over each
//! cloud, a small fully connected stack, and a final affine whose zero
//! weights and identity bias make the predicted transform exactly the
//! identity at initialization. Per-point features after the feature
//! transform are concatenated with the pooled global feature and regressed
//! through the tail MLP, one extra plain affine layer, and a sigmoid.

use super::params::{build_entries, layer_defs, LayerDef};
use super::{ModelConfig, ModelError, ModelResult, ParamEntry};
use crate::tensor::{
    CoordField, Mode, NodeId, Scalar, Tape, Tensor, TensorError, TensorResult,
};

/// Which of the two T-Nets to evaluate standalone.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TnetStage {
    Input,
    Feature,
}

/// Which leaves of a forward pass receive gradients.
#[derive(Clone, Copy, Debug, Default)]
pub struct Grads {
    pub params: bool,
    pub coords: bool,
}

impl Grads {
    pub fn none() -> Self {
        Self::default()
    }
    pub fn params() -> Self {
        Self {
            params: true,
            coords: false,
        }
    }
    pub fn all() -> Self {
        Self {
            params: true,
            coords: true,
        }
    }
}

/// Per-sample forward byproducts used by the critical-point analysis.
#[derive(Clone, Debug)]
pub struct LatentRecord {
    /// Per-point features feeding the concatenation, n x local_dim.
    pub local_features: Vec<f64>,
    /// Pooled global feature, length G.
    pub global_feature: Vec<f64>,
    /// For each global-feature dimension, the local index of the point that
    /// attained the maximum (ties to the lowest index).
    pub argmax_indices: Vec<usize>,
    /// Deduplicated, sorted argmax indices.
    pub critical_set: Vec<usize>,
}

impl LatentRecord {
    fn from_parts(local: &[f64], global: &[f64], argmax: Vec<usize>) -> Self {
        let mut critical: Vec<usize> = argmax.clone();
        critical.sort_unstable();
        critical.dedup();
        Self {
            local_features: local.to_vec(),
            global_feature: global.to_vec(),
            argmax_indices: argmax,
            critical_set: critical,
        }
    }
}

/// Everything a caller needs after one forward: the tape for backward, the
/// prediction node, leaf ids, and per-sample latent records.
pub struct ForwardPass<T: Scalar> {
    pub tape: Tape<T>,
    pub pred: NodeId,
    pub coords: NodeId,
    /// Tape leaves of the trainable registry entries, in registry order.
    pub param_nodes: Vec<NodeId>,
    pub latents: Vec<LatentRecord>,
    pub batch: usize,
    pub n_points: usize,
}

impl<T: Scalar> ForwardPass<T> {
    /// Predicted values as an owned row-major (batch*n) x n_cfd vector.
    pub fn predictions(&self) -> Vec<T> {
        self.tape.val(self.pred).data().to_vec()
    }
}

/// Batch-norm running statistics produced by one train-mode forward.
struct StatUpdate<T> {
    mean_entry: usize,
    var_entry: usize,
    mean: Vec<T>,
    var: Vec<T>,
}

/// The network: configuration plus the flat parameter registry.
#[derive(Clone, Debug)]
pub struct Model<T: Scalar> {
    config: ModelConfig,
    entries: Vec<ParamEntry<T>>,
}

impl<T: Scalar> Model<T> {
    /// Allocates all layers, deterministically for a given seed.
    pub fn build(config: ModelConfig, seed: u64) -> ModelResult<Self> {
        config.validate()?;
        let entries = build_entries(&config, seed);
        Ok(Self { config, entries })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn entries(&self) -> &[ParamEntry<T>] {
        &self.entries
    }

    /// Mutable registry access (optimizer updates, checkpoint load).
    pub fn entries_mut(&mut self) -> &mut [ParamEntry<T>] {
        &mut self.entries
    }

    /// Indices of trainable entries, in registry order.
    pub fn trainable_indices(&self) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.kind.trainable())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn trainable_scalar_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.kind.trainable())
            .map(|e| e.tensor.numel())
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|e| e.tensor.all_finite())
    }

    /// Train-mode forward over a stacked batch. Updates batch-norm running
    /// statistics. The cloud size must match the configured point count and
    /// the batch must hold at least two samples (the T-Net head normalizes
    /// over the batch dimension).
    pub fn forward_train(
        &mut self,
        coords: &Tensor<T>,
        batch: usize,
        grads: Grads,
    ) -> ModelResult<ForwardPass<T>> {
        let n = self.check_batch(coords, batch)?;
        if n != self.config.n_points {
            return Err(ModelError::WrongPointCount {
                expected: self.config.n_points,
                got: n,
            });
        }
        let mut tape = Tape::new();
        let coords_node = tape.leaf(coords.clone(), grads.coords);
        let (pass, updates) =
            self.run_on_tape(tape, coords_node, batch, n, Mode::Train, grads.params)?;
        let momentum = T::from_f64(self.config.bn_momentum);
        let blend = T::ONE - momentum;
        for u in updates {
            for (slot, idx) in [(&u.mean, u.mean_entry), (&u.var, u.var_entry)] {
                let running = self.entries[idx].tensor.data_mut();
                for (r, &b) in running.iter_mut().zip(slot.iter()) {
                    *r = *r * momentum + b * blend;
                }
            }
        }
        Ok(pass)
    }

    /// Infer-mode forward: frozen statistics, no mutation, any cloud size.
    pub fn forward_infer(&self, coords: &Tensor<T>, batch: usize) -> ModelResult<ForwardPass<T>> {
        let n = self.check_batch(coords, batch)?;
        let mut tape = Tape::new();
        let coords_node = tape.leaf(coords.clone(), false);
        Ok(self
            .run_on_tape(tape, coords_node, batch, n, Mode::Infer, false)?
            .0)
    }

    fn check_batch(&self, coords: &Tensor<T>, batch: usize) -> ModelResult<usize> {
        if coords.cols() != self.config.input_dim {
            return Err(ModelError::WrongDim {
                expected: self.config.input_dim,
                got: coords.cols(),
            });
        }
        let rows = coords.rows();
        if batch == 0 || rows == 0 || rows % batch != 0 {
            return Err(ModelError::WrongPointCount {
                expected: self.config.n_points * batch.max(1),
                got: rows,
            });
        }
        Ok(rows / batch)
    }

    /// Evaluates one T-Net in isolation (infer mode): shared MLP, max pool,
    /// fully connected stack, and the k x k transform prediction. Freshly
    /// built parameters return the identity exactly.
    pub fn tnet_forward(&self, x: &Tensor<T>, stage: TnetStage) -> ModelResult<Tensor<T>> {
        let k = match stage {
            TnetStage::Input => self.config.input_dim,
            TnetStage::Feature => self.config.local_dim(),
        };
        if x.cols() != k {
            return Err(ModelError::WrongDim {
                expected: k,
                got: x.cols(),
            });
        }
        let defs = layer_defs(&self.config);
        let tnet_defs = self.config.tnet_conv.len() + self.config.tnet_fc.len() + 1;
        let def_start = match stage {
            TnetStage::Input => 0,
            TnetStage::Feature => tnet_defs + self.config.mlp1.len(),
        };
        let entry_start: usize = defs[..def_start]
            .iter()
            .map(|d| if d.bn { 6 } else { 2 })
            .sum();
        let mut ctx = Ctx {
            entries: &self.entries,
            defs,
            def_idx: def_start,
            entry_idx: entry_start,
            mode: Mode::Infer,
            params_grad: false,
            eps: T::from_f64(self.config.bn_eps),
            param_nodes: Vec::new(),
            updates: Vec::new(),
        };
        let mut tape = Tape::new();
        let leaf = tape.leaf(x.clone(), false);
        let t = self.tnet(&mut tape, &mut ctx, leaf, 1)?;
        Ok(Tensor::matrix(k, k, tape.val(t).data().to_vec())?)
    }

    /// Records the whole network on `tape` starting from an existing
    /// coordinate node. Tensor-level failures only; callers validate shapes.
    fn run_on_tape(
        &self,
        mut tape: Tape<T>,
        coords: NodeId,
        batch: usize,
        n: usize,
        mode: Mode,
        params_grad: bool,
    ) -> TensorResult<(ForwardPass<T>, Vec<StatUpdate<T>>)> {
        let mut ctx = Ctx {
            entries: &self.entries,
            defs: layer_defs(&self.config),
            def_idx: 0,
            entry_idx: 0,
            mode,
            params_grad,
            eps: T::from_f64(self.config.bn_eps),
            param_nodes: Vec::new(),
            updates: Vec::new(),
        };
        let d = self.config.input_dim;

        let t_in = self.tnet(&mut tape, &mut ctx, coords, batch)?;
        let x = tape.seg_transform(coords, t_in, d)?;

        let mut h = x;
        for _ in 0..self.config.mlp1.len() {
            h = ctx.next_layer(&mut tape, h)?;
        }

        let t_feat = self.tnet(&mut tape, &mut ctx, h, batch)?;
        let local = tape.seg_transform(h, t_feat, self.config.local_dim())?;

        let mut g = local;
        for _ in 0..self.config.mlp2.len() {
            g = ctx.next_layer(&mut tape, g)?;
        }
        let (global, argmax) = tape.seg_max_pool(g, batch)?;

        let cat = tape.seg_concat(local, global)?;
        let mut z = cat;
        for _ in 0..self.config.tail_mlp.len() {
            z = ctx.next_layer(&mut tape, z)?;
        }
        z = ctx.next_layer(&mut tape, z)?; // head.pre (relu, no bn)
        z = ctx.next_layer(&mut tape, z)?; // head.out (plain affine)
        let pred = tape.sigmoid(z);
        debug_assert_eq!(ctx.def_idx, ctx.defs.len(), "layer traversal mismatch");

        let local_dim = self.config.local_dim();
        let g_dim = self.config.global_feature;
        let mut latents = Vec::with_capacity(batch);
        let local_vals = tape.val(local).data();
        let global_vals = tape.val(global).data();
        for s in 0..batch {
            let local_rows: Vec<f64> = local_vals[s * n * local_dim..(s + 1) * n * local_dim]
                .iter()
                .map(|v| v.to_f64())
                .collect();
            let global_row: Vec<f64> = global_vals[s * g_dim..(s + 1) * g_dim]
                .iter()
                .map(|v| v.to_f64())
                .collect();
            let local_argmax: Vec<usize> = argmax[s * g_dim..(s + 1) * g_dim]
                .iter()
                .map(|&row| row - s * n)
                .collect();
            latents.push(LatentRecord::from_parts(
                &local_rows,
                &global_row,
                local_argmax,
            ));
        }

        let pass = ForwardPass {
            tape,
            pred,
            coords,
            param_nodes: ctx.param_nodes,
            latents,
            batch,
            n_points: n,
        };
        Ok((pass, ctx.updates))
    }

    /// Shared MLP, pool over each cloud, fully connected stack, transform
    /// prediction. Consumes the T-Net's layers from the traversal cursor.
    fn tnet(
        &self,
        tape: &mut Tape<T>,
        ctx: &mut Ctx<'_, T>,
        x: NodeId,
        batch: usize,
    ) -> TensorResult<NodeId> {
        let mut h = x;
        for _ in 0..self.config.tnet_conv.len() {
            h = ctx.next_layer(tape, h)?;
        }
        let (pooled, _) = tape.seg_max_pool(h, batch)?;
        let mut f = pooled;
        for _ in 0..self.config.tnet_fc.len() {
            f = ctx.next_layer(tape, f)?;
        }
        ctx.next_layer(tape, f)
    }
}

/// Traversal cursor pairing layer definitions with registry entries.
struct Ctx<'m, T: Scalar> {
    entries: &'m [ParamEntry<T>],
    defs: Vec<LayerDef>,
    def_idx: usize,
    entry_idx: usize,
    mode: Mode,
    params_grad: bool,
    eps: T,
    param_nodes: Vec<NodeId>,
    updates: Vec<StatUpdate<T>>,
}

impl<T: Scalar> Ctx<'_, T> {
    fn take_leaf(&mut self, tape: &mut Tape<T>) -> NodeId {
        let entry = &self.entries[self.entry_idx];
        debug_assert!(entry.kind.trainable());
        self.entry_idx += 1;
        let node = tape.leaf(entry.tensor.clone(), self.params_grad);
        if self.params_grad {
            self.param_nodes.push(node);
        }
        node
    }

    fn next_layer(&mut self, tape: &mut Tape<T>, x: NodeId) -> TensorResult<NodeId> {
        let def = self.defs[self.def_idx].clone();
        self.def_idx += 1;
        debug_assert_eq!(
            format!("{}.w", def.path),
            self.entries[self.entry_idx].path,
            "registry and traversal out of step"
        );
        let w = self.take_leaf(tape);
        let b = self.take_leaf(tape);
        let mut y = tape.affine(x, w, b)?;
        if def.bn {
            let gamma = self.take_leaf(tape);
            let beta = self.take_leaf(tape);
            let mean_entry = self.entry_idx;
            let var_entry = self.entry_idx + 1;
            self.entry_idx += 2;
            match self.mode {
                Mode::Train => {
                    let (node, mean, var) = tape.batch_norm_train(y, gamma, beta, self.eps)?;
                    self.updates.push(StatUpdate {
                        mean_entry,
                        var_entry,
                        mean,
                        var,
                    });
                    y = node;
                }
                Mode::Infer => {
                    y = tape.batch_norm_infer(
                        y,
                        gamma,
                        beta,
                        self.entries[mean_entry].tensor.data(),
                        self.entries[var_entry].tensor.data(),
                        self.eps,
                    )?;
                }
            }
        }
        if def.relu {
            y = tape.relu(y);
        }
        Ok(y)
    }
}

/// Stacks per-cloud coordinates into one (B*n) x input_dim tensor, padding
/// z = 0 when a 3-d model consumes 2-d clouds.
pub fn stack_coords<T: Scalar>(
    clouds: &[&[[f64; 2]]],
    input_dim: usize,
) -> ModelResult<Tensor<T>> {
    if clouds.is_empty() {
        return Err(ModelError::WrongPointCount {
            expected: 1,
            got: 0,
        });
    }
    let n = clouds[0].len();
    let mut data = Vec::with_capacity(clouds.len() * n * input_dim);
    for cloud in clouds {
        if cloud.len() != n {
            return Err(ModelError::WrongPointCount {
                expected: n,
                got: cloud.len(),
            });
        }
        for p in cloud.iter() {
            data.push(T::from_f64(p[0]));
            data.push(T::from_f64(p[1]));
            if input_dim == 3 {
                data.push(T::ZERO);
            }
        }
    }
    Tensor::matrix(clouds.len() * n, input_dim, data).map_err(ModelError::Tensor)
}

/// Adapter exposing the network (optionally followed by denormalization to
/// physical units) as a differentiable field over 2-d coordinates.
pub struct ModelField<'a> {
    model: &'a Model<f64>,
    mode: Mode,
    /// Per-channel (scale, shift): physical = scale * prediction + shift.
    denorm: Option<Vec<(f64, f64)>>,
}

impl<'a> ModelField<'a> {
    pub fn new(model: &'a Model<f64>) -> Self {
        Self {
            model,
            mode: Mode::Infer,
            denorm: None,
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_denorm(mut self, denorm: Vec<(f64, f64)>) -> Self {
        self.denorm = Some(denorm);
        self
    }
}

impl CoordField for ModelField<'_> {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, tape: &mut Tape<f64>, coords: NodeId) -> TensorResult<NodeId> {
        if self.mode == Mode::Train {
            // Derivatives through batch statistics are ill-defined across a
            // batch; the contract demands frozen statistics.
            return Err(TensorError::TrainModeDerivatives);
        }
        let n = tape.val(coords).rows();
        let x = if self.model.config().input_dim == 3 {
            let w = tape.leaf(
                Tensor::matrix(3, 2, vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0])?,
                false,
            );
            let b = tape.leaf(Tensor::new(vec![3], vec![0.0; 3])?, false);
            tape.affine(coords, w, b)?
        } else {
            coords
        };
        // Move the tape through the model and splice the result back.
        let owned = std::mem::take(tape);
        let (pass, _) = self.model.run_on_tape(owned, x, 1, n, Mode::Infer, false)?;
        let pred = pass.pred;
        *tape = pass.tape;
        match &self.denorm {
            None => Ok(pred),
            Some(channels) => {
                let c = channels.len();
                let mut w = vec![0.0; c * c];
                let mut b = vec![0.0; c];
                for (i, &(scale, shift)) in channels.iter().enumerate() {
                    w[i * c + i] = scale;
                    b[i] = shift;
                }
                let w = tape.leaf(Tensor::matrix(c, c, w)?, false);
                let b = tape.leaf(Tensor::new(vec![c], b)?, false);
                tape.affine(pred, w, b)
            }
        }
    }
}
