//! Linear tape of recorded primitives with reverse-mode replay.
//!
//! Nodes are appended in execution order, so operands always precede their
//! consumers and a single reverse sweep visits every node exactly once.
//! Gradient accumulation follows tape order, which makes backward passes
//! bit-reproducible for identical inputs.

use super::{Scalar, Tensor, TensorError, TensorResult};

/// Index of a node on the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(pub(crate) usize);

/// Batch-norm evaluation mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

enum Op<T: Scalar> {
    Leaf,
    /// out[r,o] = sum_i w[o,i] * x[r,i] + b[o]
    Affine { x: NodeId, w: NodeId, b: NodeId },
    Relu { x: NodeId },
    Sigmoid { x: NodeId },
    /// Elementwise product of same-shape tensors.
    Mul { a: NodeId, b: NodeId },
    Add { a: NodeId, b: NodeId },
    Scale { x: NodeId, c: T },
    /// Per-channel normalization over all rows with batch statistics.
    BatchNormTrain {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        eps: T,
        mean: Vec<T>,
        var: Vec<T>,
    },
    /// Per-channel normalization with frozen statistics.
    BatchNormInfer {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        eps: T,
        mean: Vec<T>,
        var: Vec<T>,
    },
    /// Column-wise max over each of `segments` equal row blocks.
    SegMaxPool { x: NodeId, argmax: Vec<usize> },
    /// Per-segment right multiplication x_row * T_b with T_b = t[b] as k x k.
    SegTransform { x: NodeId, t: NodeId, k: usize },
    /// Concatenate per-row local features with the segment's global feature.
    SegConcat { local: NodeId, global: NodeId },
    /// Scalar mean of squared differences over all entries.
    MseLoss { pred: NodeId, target: NodeId },
}

/// Recording tape. Single-writer: one forward builds it, one backward reads it.
pub struct Tape<T: Scalar> {
    vals: Vec<Tensor<T>>,
    ops: Vec<Op<T>>,
    requires: Vec<bool>,
    grads: Vec<Vec<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            vals: Vec::new(),
            ops: Vec::new(),
            requires: Vec::new(),
            grads: Vec::new(),
        }
    }

    /// Drop all nodes but keep allocations for reuse.
    pub fn clear(&mut self) {
        self.vals.clear();
        self.ops.clear();
        self.requires.clear();
        self.grads.clear();
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn val(&self, id: NodeId) -> &Tensor<T> {
        &self.vals[id.0]
    }

    /// Gradient from the last backward pass for `id`, if it was tracked.
    pub fn grad(&self, id: NodeId) -> Option<&[T]> {
        if self.requires[id.0] && !self.grads[id.0].is_empty() {
            Some(&self.grads[id.0])
        } else {
            None
        }
    }

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> NodeId {
        self.push(value, Op::Leaf, requires_grad)
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires: bool) -> NodeId {
        let id = NodeId(self.vals.len());
        self.vals.push(value);
        self.ops.push(op);
        self.requires.push(requires);
        self.grads.push(Vec::new());
        id
    }

    fn req(&self, id: NodeId) -> bool {
        self.requires[id.0]
    }

    // ── Forward primitives ───────────────────────────────────────────

    pub fn affine(&mut self, x: NodeId, w: NodeId, b: NodeId) -> TensorResult<NodeId> {
        let (xv, wv, bv) = (self.val(x), self.val(w), self.val(b));
        let (rows, in_dim) = (xv.rows(), xv.cols());
        let (out_dim, w_in) = (wv.rows(), wv.cols());
        if in_dim != w_in || bv.numel() != out_dim {
            return Err(TensorError::ShapeMismatch {
                op: "affine",
                left: xv.shape().to_vec(),
                right: wv.shape().to_vec(),
            });
        }
        let mut out = vec![T::ZERO; rows * out_dim];
        for r in 0..rows {
            out[r * out_dim..(r + 1) * out_dim].copy_from_slice(bv.data());
        }
        // out += x[rows x in] * w^T[in x out]
        gemm(
            false, true, rows, in_dim, out_dim, T::ONE, xv.data(), wv.data(), T::ONE, &mut out,
        );
        let out = Tensor::matrix(rows, out_dim, out)?;
        debug_assert!(out.all_finite(), "affine produced non-finite output");
        let requires = self.req(x) || self.req(w) || self.req(b);
        Ok(self.push(out, Op::Affine { x, w, b }, requires))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let xv = self.val(x);
        let data = xv
            .data()
            .iter()
            .map(|&v| if v > T::ZERO { v } else { T::ZERO })
            .collect();
        let out = Tensor {
            shape: xv.shape().to_vec(),
            data,
        };
        let requires = self.req(x);
        self.push(out, Op::Relu { x }, requires)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let xv = self.val(x);
        let data = xv.data().iter().map(|&v| sigmoid_stable(v)).collect();
        let out = Tensor {
            shape: xv.shape().to_vec(),
            data,
        };
        let requires = self.req(x);
        self.push(out, Op::Sigmoid { x }, requires)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> TensorResult<NodeId> {
        let (av, bv) = (self.val(a), self.val(b));
        if av.shape() != bv.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "mul",
                left: av.shape().to_vec(),
                right: bv.shape().to_vec(),
            });
        }
        let data = av.data().iter().zip(bv.data()).map(|(&p, &q)| p * q).collect();
        let out = Tensor {
            shape: av.shape().to_vec(),
            data,
        };
        let requires = self.req(a) || self.req(b);
        Ok(self.push(out, Op::Mul { a, b }, requires))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> TensorResult<NodeId> {
        let (av, bv) = (self.val(a), self.val(b));
        if av.shape() != bv.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "add",
                left: av.shape().to_vec(),
                right: bv.shape().to_vec(),
            });
        }
        let data = av.data().iter().zip(bv.data()).map(|(&p, &q)| p + q).collect();
        let out = Tensor {
            shape: av.shape().to_vec(),
            data,
        };
        let requires = self.req(a) || self.req(b);
        Ok(self.push(out, Op::Add { a, b }, requires))
    }

    pub fn scale(&mut self, x: NodeId, c: T) -> NodeId {
        let xv = self.val(x);
        let data = xv.data().iter().map(|&v| v * c).collect();
        let out = Tensor {
            shape: xv.shape().to_vec(),
            data,
        };
        let requires = self.req(x);
        self.push(out, Op::Scale { x, c }, requires)
    }

    /// Train-mode batch norm. Returns the node plus the batch mean/variance
    /// per channel so the caller can update its running statistics.
    pub fn batch_norm_train(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        eps: T,
    ) -> TensorResult<(NodeId, Vec<T>, Vec<T>)> {
        let xv = self.val(x);
        let (rows, cols) = (xv.rows(), xv.cols());
        if rows < 2 {
            return Err(TensorError::DegenerateBatch { rows });
        }
        let gv = self.val(gamma);
        let bv = self.val(beta);
        if gv.numel() != cols || bv.numel() != cols {
            return Err(TensorError::ShapeMismatch {
                op: "batch_norm",
                left: xv.shape().to_vec(),
                right: gv.shape().to_vec(),
            });
        }
        let inv_r = T::from_f64(1.0 / rows as f64);
        let mut mean = vec![T::ZERO; cols];
        let mut var = vec![T::ZERO; cols];
        let xd = xv.data();
        for r in 0..rows {
            for c in 0..cols {
                mean[c] += xd[r * cols + c];
            }
        }
        for m in mean.iter_mut() {
            *m = *m * inv_r;
        }
        for r in 0..rows {
            for c in 0..cols {
                let d = xd[r * cols + c] - mean[c];
                var[c] += d * d;
            }
        }
        for v in var.iter_mut() {
            *v = *v * inv_r;
        }
        let mut data = vec![T::ZERO; rows * cols];
        let gd = gv.data();
        let bd = bv.data();
        for c in 0..cols {
            let inv_std = T::ONE / (var[c] + eps).sqrt();
            for r in 0..rows {
                let xh = (xd[r * cols + c] - mean[c]) * inv_std;
                data[r * cols + c] = gd[c] * xh + bd[c];
            }
        }
        let out = Tensor::matrix(rows, cols, data)?;
        debug_assert!(out.all_finite(), "batch_norm produced non-finite output");
        let requires = self.req(x) || self.req(gamma) || self.req(beta);
        let id = self.push(
            out,
            Op::BatchNormTrain {
                x,
                gamma,
                beta,
                eps,
                mean: mean.clone(),
                var: var.clone(),
            },
            requires,
        );
        Ok((id, mean, var))
    }

    /// Infer-mode batch norm with frozen statistics.
    pub fn batch_norm_infer(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        mean: &[T],
        var: &[T],
        eps: T,
    ) -> TensorResult<NodeId> {
        let xv = self.val(x);
        let (rows, cols) = (xv.rows(), xv.cols());
        let gv = self.val(gamma);
        let bv = self.val(beta);
        if gv.numel() != cols || bv.numel() != cols || mean.len() != cols || var.len() != cols {
            return Err(TensorError::ShapeMismatch {
                op: "batch_norm",
                left: xv.shape().to_vec(),
                right: vec![mean.len()],
            });
        }
        let mut data = vec![T::ZERO; rows * cols];
        let xd = xv.data();
        let gd = gv.data();
        let bd = bv.data();
        for c in 0..cols {
            let inv_std = T::ONE / (var[c] + eps).sqrt();
            for r in 0..rows {
                let xh = (xd[r * cols + c] - mean[c]) * inv_std;
                data[r * cols + c] = gd[c] * xh + bd[c];
            }
        }
        let out = Tensor::matrix(rows, cols, data)?;
        debug_assert!(out.all_finite(), "batch_norm produced non-finite output");
        let requires = self.req(x) || self.req(gamma) || self.req(beta);
        Ok(self.push(
            out,
            Op::BatchNormInfer {
                x,
                gamma,
                beta,
                eps,
                mean: mean.to_vec(),
                var: var.to_vec(),
            },
            requires,
        ))
    }

    /// Max over the point dimension, per feature, for each of `segments`
    /// equal row blocks. Ties resolve to the lowest row index. Returns the
    /// pooled node and the winning global row index per (segment, feature).
    pub fn seg_max_pool(
        &mut self,
        x: NodeId,
        segments: usize,
    ) -> TensorResult<(NodeId, Vec<usize>)> {
        let xv = self.val(x);
        let (rows, cols) = (xv.rows(), xv.cols());
        if segments == 0 || rows == 0 || rows % segments != 0 {
            return Err(TensorError::EmptyPool);
        }
        let n = rows / segments;
        let xd = xv.data();
        let mut out = vec![T::ZERO; segments * cols];
        let mut argmax = vec![0usize; segments * cols];
        for s in 0..segments {
            let base = s * n;
            for c in 0..cols {
                let mut best = xd[base * cols + c];
                let mut best_row = base;
                for r in base + 1..base + n {
                    let v = xd[r * cols + c];
                    if v > best {
                        best = v;
                        best_row = r;
                    }
                }
                out[s * cols + c] = best;
                argmax[s * cols + c] = best_row;
            }
        }
        let out = Tensor::matrix(segments, cols, out)?;
        let requires = self.req(x);
        let id = self.push(
            out,
            Op::SegMaxPool {
                x,
                argmax: argmax.clone(),
            },
            requires,
        );
        Ok((id, argmax))
    }

    /// Single-cloud max pool: per-feature maximum plus argmax indices.
    pub fn max_pool_points(&mut self, x: NodeId) -> TensorResult<(NodeId, Vec<usize>)> {
        self.seg_max_pool(x, 1)
    }

    /// Applies the per-segment k x k transform: out_row = x_row * T_b.
    pub fn seg_transform(&mut self, x: NodeId, t: NodeId, k: usize) -> TensorResult<NodeId> {
        let (xv, tv) = (self.val(x), self.val(t));
        let (rows, cols) = (xv.rows(), xv.cols());
        let segments = tv.rows();
        if cols != k || tv.cols() != k * k || segments == 0 || rows % segments != 0 {
            return Err(TensorError::ShapeMismatch {
                op: "seg_transform",
                left: xv.shape().to_vec(),
                right: tv.shape().to_vec(),
            });
        }
        let n = rows / segments;
        let mut out = vec![T::ZERO; rows * k];
        for s in 0..segments {
            let xs = &xv.data()[s * n * k..(s + 1) * n * k];
            let ts = &tv.data()[s * k * k..(s + 1) * k * k];
            gemm(
                false,
                false,
                n,
                k,
                k,
                T::ONE,
                xs,
                ts,
                T::ZERO,
                &mut out[s * n * k..(s + 1) * n * k],
            );
        }
        let out = Tensor::matrix(rows, k, out)?;
        debug_assert!(out.all_finite(), "seg_transform produced non-finite output");
        let requires = self.req(x) || self.req(t);
        Ok(self.push(out, Op::SegTransform { x, t, k }, requires))
    }

    /// Concatenates each row's local features with its segment's global
    /// feature: local[(B*n) x F1] + global[B x F2] -> [(B*n) x (F1+F2)].
    pub fn seg_concat(&mut self, local: NodeId, global: NodeId) -> TensorResult<NodeId> {
        let (lv, gv) = (self.val(local), self.val(global));
        let (rows, f1) = (lv.rows(), lv.cols());
        let (segments, f2) = (gv.rows(), gv.cols());
        if segments == 0 || rows % segments != 0 {
            return Err(TensorError::ShapeMismatch {
                op: "seg_concat",
                left: lv.shape().to_vec(),
                right: gv.shape().to_vec(),
            });
        }
        let n = rows / segments;
        let width = f1 + f2;
        let mut data = vec![T::ZERO; rows * width];
        for s in 0..segments {
            let gs = &gv.data()[s * f2..(s + 1) * f2];
            for r in s * n..(s + 1) * n {
                data[r * width..r * width + f1].copy_from_slice(&lv.data()[r * f1..(r + 1) * f1]);
                data[r * width + f1..(r + 1) * width].copy_from_slice(gs);
            }
        }
        let out = Tensor::matrix(rows, width, data)?;
        let requires = self.req(local) || self.req(global);
        Ok(self.push(out, Op::SegConcat { local, global }, requires))
    }

    /// Mean of squared differences over all entries; for an N x 3 prediction
    /// this is exactly the 1/(3N)-weighted sum over the three fields.
    pub fn mse_loss(&mut self, pred: NodeId, target: NodeId) -> TensorResult<NodeId> {
        let (pv, tv) = (self.val(pred), self.val(target));
        if pv.shape() != tv.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "mse_loss",
                left: pv.shape().to_vec(),
                right: tv.shape().to_vec(),
            });
        }
        let numel = pv.numel().max(1);
        let mut acc = T::ZERO;
        for (&p, &t) in pv.data().iter().zip(tv.data()) {
            let d = p - t;
            acc += d * d;
        }
        let out = Tensor::scalar(acc * T::from_f64(1.0 / numel as f64));
        debug_assert!(out.all_finite(), "mse_loss produced non-finite output");
        let requires = self.req(pred) || self.req(target);
        Ok(self.push(out, Op::MseLoss { pred, target }, requires))
    }

    // ── Backward ─────────────────────────────────────────────────────

    /// Reverse sweep from a scalar root with seed 1.
    pub fn backward(&mut self, root: NodeId) -> TensorResult<()> {
        if !self.val(root).is_scalar() {
            return Err(TensorError::NonScalarRoot {
                shape: self.val(root).shape().to_vec(),
            });
        }
        self.backward_seeded(root, &[T::ONE])
    }

    /// Reverse sweep from an arbitrary node with a caller-supplied cotangent.
    pub fn backward_seeded(&mut self, root: NodeId, seed: &[T]) -> TensorResult<()> {
        if seed.len() != self.val(root).numel() {
            return Err(TensorError::DataLength {
                expected: self.val(root).numel(),
                got: seed.len(),
            });
        }
        for (i, g) in self.grads.iter_mut().enumerate() {
            g.clear();
            if self.requires[i] {
                g.resize(self.vals[i].numel(), T::ZERO);
            }
        }
        if !self.requires[root.0] {
            return Ok(());
        }
        self.grads[root.0].copy_from_slice(seed);

        for i in (0..=root.0).rev() {
            if !self.requires[i] || self.grads[i].is_empty() {
                continue;
            }
            let g = std::mem::take(&mut self.grads[i]);
            self.accumulate(i, &g);
            self.grads[i] = g;
        }
        Ok(())
    }

    fn accumulate(&mut self, i: usize, g: &[T]) {
        // Move the op out so vals can be read while grads are written; every
        // branch only touches grads of nodes earlier than i.
        let op = std::mem::replace(&mut self.ops[i], Op::Leaf);
        match &op {
            Op::Leaf => {}
            Op::Affine { x, w, b } => {
                let (rows, in_dim) = (self.vals[x.0].rows(), self.vals[x.0].cols());
                let out_dim = self.vals[w.0].rows();
                if self.requires[x.0] {
                    // dx[rows x in] += g[rows x out] * w[out x in]
                    let w_ptr = self.vals[w.0].data().as_ptr();
                    let dx = self.grads[x.0].as_mut_ptr();
                    unsafe {
                        T::gemm(
                            rows,
                            out_dim,
                            in_dim,
                            T::ONE,
                            g.as_ptr(),
                            out_dim as isize,
                            1,
                            w_ptr,
                            in_dim as isize,
                            1,
                            T::ONE,
                            dx,
                            in_dim as isize,
                            1,
                        );
                    }
                }
                if self.requires[w.0] {
                    // dw[out x in] += g^T[out x rows] * x[rows x in]
                    let x_ptr = self.vals[x.0].data().as_ptr();
                    let dw = self.grads[w.0].as_mut_ptr();
                    unsafe {
                        T::gemm(
                            out_dim,
                            rows,
                            in_dim,
                            T::ONE,
                            g.as_ptr(),
                            1,
                            out_dim as isize,
                            x_ptr,
                            in_dim as isize,
                            1,
                            T::ONE,
                            dw,
                            in_dim as isize,
                            1,
                        );
                    }
                }
                if self.requires[b.0] {
                    let db = &mut self.grads[b.0];
                    for r in 0..rows {
                        for o in 0..out_dim {
                            db[o] += g[r * out_dim + o];
                        }
                    }
                }
            }
            Op::Relu { x } => {
                if self.requires[x.0] {
                    let (vals, grads) = (&self.vals, &mut self.grads);
                    let xd = vals[x.0].data();
                    let dx = &mut grads[x.0];
                    for (j, &xv) in xd.iter().enumerate() {
                        if xv > T::ZERO {
                            dx[j] += g[j];
                        }
                    }
                }
            }
            Op::Sigmoid { x } => {
                if self.requires[x.0] {
                    let yd: Vec<T> = self.vals[i].data().to_vec();
                    let dx = &mut self.grads[x.0];
                    for (j, &y) in yd.iter().enumerate() {
                        dx[j] += g[j] * y * (T::ONE - y);
                    }
                }
            }
            Op::Mul { a, b } => {
                if self.requires[a.0] {
                    let bd: Vec<T> = self.vals[b.0].data().to_vec();
                    let da = &mut self.grads[a.0];
                    for j in 0..bd.len() {
                        da[j] += g[j] * bd[j];
                    }
                }
                if self.requires[b.0] {
                    let ad: Vec<T> = self.vals[a.0].data().to_vec();
                    let db = &mut self.grads[b.0];
                    for j in 0..ad.len() {
                        db[j] += g[j] * ad[j];
                    }
                }
            }
            Op::Add { a, b } => {
                for id in [a, b] {
                    if self.requires[id.0] {
                        let d = &mut self.grads[id.0];
                        for j in 0..g.len() {
                            d[j] += g[j];
                        }
                    }
                }
            }
            Op::Scale { x, c } => {
                if self.requires[x.0] {
                    let dx = &mut self.grads[x.0];
                    for j in 0..g.len() {
                        dx[j] += g[j] * *c;
                    }
                }
            }
            Op::BatchNormTrain {
                x,
                gamma,
                beta,
                eps,
                mean,
                var,
            } => {
                let (rows, cols) = (self.vals[x.0].rows(), self.vals[x.0].cols());
                let inv_r = T::from_f64(1.0 / rows as f64);
                let mut inv_std = vec![T::ZERO; cols];
                for c in 0..cols {
                    inv_std[c] = T::ONE / (var[c] + *eps).sqrt();
                }
                if self.requires[beta.0] {
                    let db = &mut self.grads[beta.0];
                    for r in 0..rows {
                        for c in 0..cols {
                            db[c] += g[r * cols + c];
                        }
                    }
                }
                if self.requires[gamma.0] {
                    let xd: Vec<T> = self.vals[x.0].data().to_vec();
                    let dg = &mut self.grads[gamma.0];
                    for r in 0..rows {
                        for c in 0..cols {
                            let xh = (xd[r * cols + c] - mean[c]) * inv_std[c];
                            dg[c] += g[r * cols + c] * xh;
                        }
                    }
                }
                if self.requires[x.0] {
                    let xd: Vec<T> = self.vals[x.0].data().to_vec();
                    let gd: Vec<T> = self.vals[gamma.0].data().to_vec();
                    let mut sum_dxh = vec![T::ZERO; cols];
                    let mut sum_dxh_xh = vec![T::ZERO; cols];
                    for r in 0..rows {
                        for c in 0..cols {
                            let dxh = g[r * cols + c] * gd[c];
                            let xh = (xd[r * cols + c] - mean[c]) * inv_std[c];
                            sum_dxh[c] += dxh;
                            sum_dxh_xh[c] += dxh * xh;
                        }
                    }
                    let dx = &mut self.grads[x.0];
                    for r in 0..rows {
                        for c in 0..cols {
                            let dxh = g[r * cols + c] * gd[c];
                            let xh = (xd[r * cols + c] - mean[c]) * inv_std[c];
                            let t = dxh - sum_dxh[c] * inv_r - xh * (sum_dxh_xh[c] * inv_r);
                            dx[r * cols + c] += t * inv_std[c];
                        }
                    }
                }
            }
            Op::BatchNormInfer {
                x,
                gamma,
                beta,
                eps,
                mean,
                var,
            } => {
                let (rows, cols) = (self.vals[x.0].rows(), self.vals[x.0].cols());
                let mut inv_std = vec![T::ZERO; cols];
                for c in 0..cols {
                    inv_std[c] = T::ONE / (var[c] + *eps).sqrt();
                }
                if self.requires[beta.0] {
                    let db = &mut self.grads[beta.0];
                    for r in 0..rows {
                        for c in 0..cols {
                            db[c] += g[r * cols + c];
                        }
                    }
                }
                if self.requires[gamma.0] {
                    let xd: Vec<T> = self.vals[x.0].data().to_vec();
                    let dg = &mut self.grads[gamma.0];
                    for r in 0..rows {
                        for c in 0..cols {
                            let xh = (xd[r * cols + c] - mean[c]) * inv_std[c];
                            dg[c] += g[r * cols + c] * xh;
                        }
                    }
                }
                if self.requires[x.0] {
                    let gd: Vec<T> = self.vals[gamma.0].data().to_vec();
                    let dx = &mut self.grads[x.0];
                    for r in 0..rows {
                        for c in 0..cols {
                            dx[r * cols + c] += g[r * cols + c] * gd[c] * inv_std[c];
                        }
                    }
                }
            }
            Op::SegMaxPool { x, argmax } => {
                if self.requires[x.0] {
                    let cols = self.vals[x.0].cols();
                    let dx = &mut self.grads[x.0];
                    for (j, &row) in argmax.iter().enumerate() {
                        let c = j % cols;
                        dx[row * cols + c] += g[j];
                    }
                }
            }
            Op::SegTransform { x, t, k } => {
                let k = *k;
                let rows = self.vals[x.0].rows();
                let segments = self.vals[t.0].rows();
                let n = rows / segments;
                if self.requires[x.0] {
                    // dx_seg += g_seg * T_b^T
                    let t_ptr = self.vals[t.0].data().as_ptr();
                    let dx = self.grads[x.0].as_mut_ptr();
                    for s in 0..segments {
                        unsafe {
                            T::gemm(
                                n,
                                k,
                                k,
                                T::ONE,
                                g.as_ptr().add(s * n * k),
                                k as isize,
                                1,
                                t_ptr.add(s * k * k),
                                1,
                                k as isize,
                                T::ONE,
                                dx.add(s * n * k),
                                k as isize,
                                1,
                            );
                        }
                    }
                }
                if self.requires[t.0] {
                    // dT_b += x_seg^T * g_seg
                    let x_ptr = self.vals[x.0].data().as_ptr();
                    let dt = self.grads[t.0].as_mut_ptr();
                    for s in 0..segments {
                        unsafe {
                            T::gemm(
                                k,
                                n,
                                k,
                                T::ONE,
                                x_ptr.add(s * n * k),
                                1,
                                k as isize,
                                g.as_ptr().add(s * n * k),
                                k as isize,
                                1,
                                T::ONE,
                                dt.add(s * k * k),
                                k as isize,
                                1,
                            );
                        }
                    }
                }
            }
            Op::SegConcat { local, global } => {
                let (rows, f1) = (self.vals[local.0].rows(), self.vals[local.0].cols());
                let (segments, f2) = (self.vals[global.0].rows(), self.vals[global.0].cols());
                let n = rows / segments;
                let width = f1 + f2;
                if self.requires[local.0] {
                    let dl = &mut self.grads[local.0];
                    for r in 0..rows {
                        for c in 0..f1 {
                            dl[r * f1 + c] += g[r * width + c];
                        }
                    }
                }
                if self.requires[global.0] {
                    let dg = &mut self.grads[global.0];
                    for s in 0..segments {
                        for r in s * n..(s + 1) * n {
                            for c in 0..f2 {
                                dg[s * f2 + c] += g[r * width + f1 + c];
                            }
                        }
                    }
                }
            }
            Op::MseLoss { pred, target } => {
                let numel = self.vals[pred.0].numel().max(1);
                let scale = g[0] * T::from_f64(2.0 / numel as f64);
                let pd: Vec<T> = self.vals[pred.0].data().to_vec();
                let td: Vec<T> = self.vals[target.0].data().to_vec();
                if self.requires[pred.0] {
                    let dp = &mut self.grads[pred.0];
                    for j in 0..pd.len() {
                        dp[j] += scale * (pd[j] - td[j]);
                    }
                }
                if self.requires[target.0] {
                    let dt = &mut self.grads[target.0];
                    for j in 0..pd.len() {
                        dt[j] = dt[j] - scale * (pd[j] - td[j]);
                    }
                }
            }
        }
        self.ops[i] = op;
    }
}

fn sigmoid_stable<T: Scalar>(x: T) -> T {
    // Split by sign so exp never overflows.
    if x >= T::ZERO {
        T::ONE / (T::ONE + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::ONE + e)
    }
}

/// C[m x n] = alpha * op(A) * op(B) + beta * C for contiguous row-major slices.
pub(crate) fn gemm<T: Scalar>(
    transpose_a: bool,
    transpose_b: bool,
    m: usize,
    k: usize,
    n: usize,
    alpha: T,
    a: &[T],
    b: &[T],
    beta: T,
    c: &mut [T],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let (rsa, csa) = if transpose_a {
        (1, m as isize)
    } else {
        (k as isize, 1)
    };
    let (rsb, csb) = if transpose_b {
        (1, k as isize)
    } else {
        (n as isize, 1)
    };
    unsafe {
        T::gemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::super::{fd_matches, max_rel_err, rel_err};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn randn(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(lo..hi)).collect()
    }

    #[test]
    fn affine_identity_passthrough() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::matrix(2, 3, vec![1.0, -2.0, 0.5, 4.0, 0.0, -1.0]).unwrap(), false);
        let eye = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let w = tape.leaf(Tensor::matrix(3, 3, eye).unwrap(), false);
        let b = tape.leaf(Tensor::new(vec![3], vec![0.0; 3]).unwrap(), false);
        let y = tape.affine(x, w, b).unwrap();
        assert_eq!(tape.val(y).data(), tape.val(x).data());
    }

    #[test]
    fn affine_small_example() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::matrix(1, 2, vec![1.0, 2.0]).unwrap(), false);
        let w = tape.leaf(Tensor::matrix(1, 2, vec![3.0, 4.0]).unwrap(), false);
        let b = tape.leaf(Tensor::new(vec![1], vec![5.0]).unwrap(), false);
        let y = tape.affine(x, w, b).unwrap();
        assert_eq!(tape.val(y).data(), &[16.0]);
    }

    #[test]
    fn affine_shape_mismatch_names_both_shapes() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::matrix(2, 3, vec![0.0; 6]).unwrap(), false);
        let w = tape.leaf(Tensor::matrix(4, 2, vec![0.0; 8]).unwrap(), false);
        let b = tape.leaf(Tensor::new(vec![4], vec![0.0; 4]).unwrap(), false);
        let err = tape.affine(x, w, b).unwrap_err();
        match err {
            TensorError::ShapeMismatch { left, right, .. } => {
                assert_eq!(left, vec![2, 3]);
                assert_eq!(right, vec![4, 2]);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    /// Weighted-sum loss over a single affine output, checked against central
    /// finite differences in every W entry.
    #[test]
    fn affine_weight_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (rows, in_dim, out_dim) = (3, 4, 2);
        let x0 = randn(&mut rng, rows * in_dim, -1.0, 1.0);
        let w0 = randn(&mut rng, out_dim * in_dim, -1.0, 1.0);
        let b0 = randn(&mut rng, out_dim, -1.0, 1.0);
        let seed_w = randn(&mut rng, rows * out_dim, -1.0, 1.0);

        let eval = |w: &[f64]| -> f64 {
            let mut tape = Tape::new();
            let x = tape.leaf(Tensor::matrix(rows, in_dim, x0.clone()).unwrap(), false);
            let w = tape.leaf(Tensor::matrix(out_dim, in_dim, w.to_vec()).unwrap(), false);
            let b = tape.leaf(Tensor::new(vec![out_dim], b0.clone()).unwrap(), false);
            let y = tape.affine(x, w, b).unwrap();
            tape.val(y)
                .data()
                .iter()
                .zip(&seed_w)
                .map(|(&v, &s)| v * s)
                .sum()
        };

        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::matrix(rows, in_dim, x0.clone()).unwrap(), true);
        let w = tape.leaf(Tensor::matrix(out_dim, in_dim, w0.clone()).unwrap(), true);
        let b = tape.leaf(Tensor::new(vec![out_dim], b0.clone()).unwrap(), true);
        let y = tape.affine(x, w, b).unwrap();
        tape.backward_seeded(y, &seed_w).unwrap();
        let analytic = tape.grad(w).unwrap().to_vec();

        let h = 1e-6;
        for j in 0..w0.len() {
            let mut wp = w0.clone();
            wp[j] += h;
            let fp = eval(&wp);
            wp[j] -= 2.0 * h;
            let fm = eval(&wp);
            let fd = (fp - fm) / (2.0 * h);
            assert!(
                rel_err(analytic[j], fd) < 1e-6,
                "dW[{j}]: analytic {} vs fd {}",
                analytic[j],
                fd
            );
        }
    }

    #[test]
    fn relu_clamps_and_zeroes_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::new(vec![3], vec![-1.0, 0.0, 2.0]).unwrap(), true);
        let y = tape.relu(x);
        assert_eq!(tape.val(y).data(), &[0.0, 0.0, 2.0]);

        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::new(vec![3], vec![-1.0, -0.5, -2.0]).unwrap(), true);
        let y = tape.relu(x);
        assert_eq!(tape.val(y).data(), &[0.0, 0.0, 0.0]);
        tape.backward_seeded(y, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn sigmoid_midpoint_saturation_and_derivative() {
        let mut tape = Tape::new();
        let x = tape.leaf(
            Tensor::new(vec![3], vec![0.0, 800.0, -800.0]).unwrap(),
            true,
        );
        let y = tape.sigmoid(x);
        let out = tape.val(y).data().to_vec();
        assert_eq!(out[0], 0.5);
        assert!(out[1] <= 1.0 && out[1] > 0.999999 && out[1].is_finite());
        assert!(out[2] >= 0.0 && out[2] < 1e-300);
        tape.backward_seeded(y, &[1.0, 0.0, 0.0]).unwrap();
        assert!((tape.grad(x).unwrap()[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn batch_norm_train_normalizes_per_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (rows, cols) = (16, 3);
        let x0 = randn(&mut rng, rows * cols, -5.0, 5.0);
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::matrix(rows, cols, x0).unwrap(), false);
        let gamma = tape.leaf(Tensor::new(vec![cols], vec![1.0; cols]).unwrap(), false);
        let beta = tape.leaf(Tensor::new(vec![cols], vec![0.0; cols]).unwrap(), false);
        let (y, _, _) = tape.batch_norm_train(x, gamma, beta, 0.0).unwrap();
        let out = tape.val(y).data();
        for c in 0..cols {
            let mean: f64 = (0..rows).map(|r| out[r * cols + c]).sum::<f64>() / rows as f64;
            let var: f64 =
                (0..rows).map(|r| (out[r * cols + c] - mean).powi(2)).sum::<f64>() / rows as f64;
            assert!(mean.abs() < 1e-10, "channel {c} mean {mean}");
            assert!((var - 1.0).abs() < 1e-10, "channel {c} var {var}");
        }
    }

    #[test]
    fn batch_norm_constant_channel_guarded_by_eps() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::matrix(4, 1, vec![3.0; 4]).unwrap(), false);
        let gamma = tape.leaf(Tensor::new(vec![1], vec![1.0]).unwrap(), false);
        let beta = tape.leaf(Tensor::new(vec![1], vec![0.0]).unwrap(), false);
        let (y, _, var) = tape.batch_norm_train(x, gamma, beta, 1e-5).unwrap();
        assert_eq!(var[0], 0.0);
        for &v in tape.val(y).data() {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn batch_norm_train_rejects_single_row() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::matrix(1, 2, vec![1.0, 2.0]).unwrap(), false);
        let gamma = tape.leaf(Tensor::new(vec![2], vec![1.0; 2]).unwrap(), false);
        let beta = tape.leaf(Tensor::new(vec![2], vec![0.0; 2]).unwrap(), false);
        let err = tape.batch_norm_train(x, gamma, beta, 1e-5).unwrap_err();
        assert_eq!(err, TensorError::DegenerateBatch { rows: 1 });
    }

    #[test]
    fn batch_norm_infer_with_unit_stats_is_near_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x0 = randn(&mut rng, 8, -2.0, 2.0);
        let eps = 1e-5;
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::matrix(4, 2, x0.clone()).unwrap(), false);
        let gamma = tape.leaf(Tensor::new(vec![2], vec![1.0; 2]).unwrap(), false);
        let beta = tape.leaf(Tensor::new(vec![2], vec![0.0; 2]).unwrap(), false);
        let y = tape
            .batch_norm_infer(x, gamma, beta, &[0.0, 0.0], &[1.0, 1.0], eps)
            .unwrap();
        for (a, b) in tape.val(y).data().iter().zip(&x0) {
            assert!((a - b).abs() <= eps * b.abs() + 1e-12);
        }
    }

    #[test]
    fn max_pool_single_point_and_tie_breaking() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::matrix(1, 3, vec![0.3, -1.0, 7.0]).unwrap(), false);
        let (y, idx) = tape.max_pool_points(x).unwrap();
        assert_eq!(tape.val(y).data(), &[0.3, -1.0, 7.0]);
        assert_eq!(idx, vec![0, 0, 0]);

        // Two identical rows: the lower index wins.
        let mut tape = Tape::new();
        let x = tape.leaf(
            Tensor::matrix(3, 2, vec![1.0, 5.0, 2.0, 5.0, 2.0, 4.0]).unwrap(),
            false,
        );
        let (_, idx) = tape.max_pool_points(x).unwrap();
        assert_eq!(idx, vec![1, 0]);
    }

    #[test]
    fn max_pool_permutation_leaves_pooled_values_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (n, f) = (12, 5);
        let x0 = randn(&mut rng, n * f, -3.0, 3.0);
        let perm: Vec<usize> = {
            let mut p: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = rng.gen_range(0..=i);
                p.swap(i, j);
            }
            p
        };
        let mut permuted = vec![0.0; n * f];
        for (to, &from) in perm.iter().enumerate() {
            permuted[to * f..(to + 1) * f].copy_from_slice(&x0[from * f..(from + 1) * f]);
        }
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::matrix(n, f, x0).unwrap(), false);
        let (ya, ia) = tape.max_pool_points(a).unwrap();
        let pooled_a = tape.val(ya).data().to_vec();
        let mut tape = Tape::new();
        let b = tape.leaf(Tensor::matrix(n, f, permuted).unwrap(), false);
        let (yb, ib) = tape.max_pool_points(b).unwrap();
        assert_eq!(pooled_a, tape.val(yb).data());
        // Indices map through the permutation.
        for (c, &row_b) in ib.iter().enumerate() {
            assert_eq!(perm[row_b], ia[c]);
        }
    }

    #[test]
    fn max_pool_rejects_empty() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::matrix(0, 3, vec![]).unwrap(), false);
        assert_eq!(tape.max_pool_points(x).unwrap_err(), TensorError::EmptyPool);
    }

    #[test]
    fn backward_of_sum_of_squares_is_two_x() {
        let x0 = vec![1.0, -2.0, 3.0, 0.5];
        let n = x0.len();
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::new(vec![n], x0.clone()).unwrap(), true);
        let zeros = tape.leaf(Tensor::new(vec![n], vec![0.0; n]).unwrap(), false);
        let mse = tape.mse_loss(x, zeros).unwrap();
        let loss = tape.scale(mse, n as f64); // sum of squares
        tape.backward(loss).unwrap();
        let g = tape.grad(x).unwrap();
        for (gi, xi) in g.iter().zip(&x0) {
            assert!((gi - 2.0 * xi).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_rejects_non_scalar_root() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::matrix(2, 2, vec![1.0; 4]).unwrap(), true);
        let y = tape.relu(x);
        let err = tape.backward(y).unwrap_err();
        assert_eq!(err, TensorError::NonScalarRoot { shape: vec![2, 2] });
    }

    /// Composite graph exercising every primitive, with every leaf checked
    /// against central finite differences of the scalar loss.
    #[test]
    fn composite_graph_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let (segments, n, d, f) = (2, 4, 3, 5);
        let rows = segments * n;
        let leaves = [
            ("x", rows * d, -1.0),
            ("w1", f * d, -0.8),
            ("b1", f, -0.5),
            ("gamma", f, 0.5), // keep gamma away from 0
            ("beta", f, -0.5),
            ("t", segments * d * d, -0.6),
            ("w2", 3 * (d + f), -0.8),
            ("b2", 3, -0.5),
            ("target", rows * 3, 0.1),
        ];
        let mut values: Vec<Vec<f64>> = leaves
            .iter()
            .map(|&(_, len, lo)| randn(&mut rng, len, lo, lo + 1.4))
            .collect();
        // Nudge inputs away from relu kinks and pool ties.
        for v in values[0].iter_mut() {
            if v.abs() < 0.05 {
                *v += 0.1;
            }
        }

        let eval = |vals: &[Vec<f64>], want_grads: bool| -> (f64, Vec<Vec<f64>>) {
            let mut tape = Tape::new();
            let x = tape.leaf(Tensor::matrix(rows, d, vals[0].clone()).unwrap(), true);
            let w1 = tape.leaf(Tensor::matrix(f, d, vals[1].clone()).unwrap(), true);
            let b1 = tape.leaf(Tensor::new(vec![f], vals[2].clone()).unwrap(), true);
            let gamma = tape.leaf(Tensor::new(vec![f], vals[3].clone()).unwrap(), true);
            let beta = tape.leaf(Tensor::new(vec![f], vals[4].clone()).unwrap(), true);
            let t = tape.leaf(
                Tensor::matrix(segments, d * d, vals[5].clone()).unwrap(),
                true,
            );
            let w2 = tape.leaf(Tensor::matrix(3, d + f, vals[6].clone()).unwrap(), true);
            let b2 = tape.leaf(Tensor::new(vec![3], vals[7].clone()).unwrap(), true);
            let target = tape.leaf(Tensor::matrix(rows, 3, vals[8].clone()).unwrap(), true);

            let xt = tape.seg_transform(x, t, d).unwrap();
            let x2 = tape.mul(xt, xt).unwrap();
            let h = tape.affine(x2, w1, b1).unwrap();
            let (hn, _, _) = tape.batch_norm_train(h, gamma, beta, 1e-5).unwrap();
            let hr = tape.relu(hn);
            let (pooled, _) = tape.seg_max_pool(hr, segments).unwrap();
            let cat = tape.seg_concat(xt, pooled).unwrap();
            let z = tape.affine(cat, w2, b2).unwrap();
            let p = tape.sigmoid(z);
            let half = tape.scale(p, 0.5);
            let shifted = tape.add(half, half).unwrap();
            let loss = tape.mse_loss(shifted, target).unwrap();
            let value = tape.val(loss).data()[0];
            let mut grads = Vec::new();
            if want_grads {
                tape.backward(loss).unwrap();
                for id in [x, w1, b1, gamma, beta, t, w2, b2, target] {
                    grads.push(tape.grad(id).unwrap().to_vec());
                }
            }
            (value, grads)
        };

        let (_, analytic) = eval(&values, true);
        for (li, (name, len, _)) in leaves.iter().enumerate() {
            for j in 0..*len {
                let orig = values[li][j];
                let probe = |v: f64| {
                    let mut vals = values.clone();
                    vals[li][j] = v;
                    eval(&vals, false).0
                };
                let (ok, fd, re) = fd_matches(probe, orig, analytic[li][j], 1e-4);
                assert!(
                    ok,
                    "{name}[{j}]: analytic {} vs fd {fd} (rel {re})",
                    analytic[li][j]
                );
            }
        }
    }

    #[test]
    fn backward_is_bit_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let (rows, d) = (6, 4);
        let x0 = randn(&mut rng, rows * d, -1.0, 1.0);
        let w0 = randn(&mut rng, 3 * d, -1.0, 1.0);
        let run = || -> Vec<f64> {
            let mut tape = Tape::new();
            let x = tape.leaf(Tensor::matrix(rows, d, x0.clone()).unwrap(), true);
            let w = tape.leaf(Tensor::matrix(3, d, w0.clone()).unwrap(), true);
            let b = tape.leaf(Tensor::new(vec![3], vec![0.0; 3]).unwrap(), true);
            let y = tape.affine(x, w, b).unwrap();
            let s = tape.sigmoid(y);
            let zeros = tape.leaf(Tensor::matrix(rows, 3, vec![0.25; rows * 3]).unwrap(), false);
            let loss = tape.mse_loss(s, zeros).unwrap();
            tape.backward(loss).unwrap();
            let mut out = tape.grad(w).unwrap().to_vec();
            out.extend_from_slice(tape.grad(x).unwrap());
            out
        };
        let a = run();
        let b = run();
        assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn activation_ranges_hold_on_random_inputs() {
        // Strict (0,1) holds up to the 64-bit saturation threshold (~37).
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let x0 = randn(&mut rng, 40, -30.0, 30.0);
            let mut tape = Tape::new();
            let x = tape.leaf(Tensor::new(vec![40], x0).unwrap(), false);
            let r = tape.relu(x);
            let s = tape.sigmoid(x);
            assert!(tape.val(r).data().iter().all(|&v| v >= 0.0));
            assert!(tape.val(s).data().iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn mse_loss_matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let (n, c) = (9, 3);
        let p0 = randn(&mut rng, n * c, 0.0, 1.0);
        let t0 = randn(&mut rng, n * c, 0.0, 1.0);
        let mut tape = Tape::new();
        let p = tape.leaf(Tensor::matrix(n, c, p0.clone()).unwrap(), false);
        let t = tape.leaf(Tensor::matrix(n, c, t0.clone()).unwrap(), false);
        let loss = tape.mse_loss(p, t).unwrap();
        let mut acc = 0.0;
        for i in 0..n * c {
            acc += (p0[i] - t0[i]) * (p0[i] - t0[i]);
        }
        acc /= (n * c) as f64;
        assert!((tape.val(loss).data()[0] - acc).abs() < 1e-12);
    }

    #[test]
    fn gemm_helper_transposes_correctly() {
        // A[2x3] * B[3x2]
        let a = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0];
        let mut c = vec![0.0; 4];
        gemm(false, false, 2, 3, 2, 1.0, &a, &b, 0.0, &mut c);
        assert_eq!(c, vec![58.0, 64.0, 139.0, 154.0]);
        // A^T stored as [3x2]: logical A[2x3] with values transposed back
        let a_t = vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0];
        let mut c2 = vec![0.0; 4];
        gemm(true, false, 2, 3, 2, 1.0, &a_t, &b, 0.0, &mut c2);
        assert_eq!(c2, c);
    }

    #[test]
    fn max_rel_err_helper_spots_differences() {
        assert!(max_rel_err(&[1.0, 2.0], &[1.0, 2.0]) == 0.0);
        assert!(max_rel_err(&[1.0, 2.0], &[1.0, 2.1]) > 0.01);
    }
}
