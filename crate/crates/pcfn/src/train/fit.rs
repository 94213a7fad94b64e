//! The fit loop: shuffled minibatches, one Adam step per batch, per-epoch
//! validation, best-checkpoint retention, and a reproducible trajectory for
//! a fixed (seed, data, config) triple.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{mse_loss_slices, AdamState, TrainConfig, TrainError, TrainResult};
use crate::data::{NormStats, PointCloud};
use crate::model::{Grads, Model};
use crate::tensor::{Scalar, Tensor};

/// One row of the loss curve.
#[derive(Clone, Copy, Debug)]
pub struct EpochStat {
    pub epoch: usize,
    pub train_loss: f64,
    /// NaN when no validation split was provided.
    pub val_loss: f64,
    pub seconds: f64,
}

/// Loss curve plus best-checkpoint bookkeeping.
#[derive(Clone, Debug)]
pub struct TrainingReport {
    pub epochs: Vec<EpochStat>,
    pub best_epoch: usize,
    /// Validation loss at the best epoch (train loss when no validation).
    pub best_loss: f64,
    pub wall_seconds: f64,
}

impl TrainingReport {
    /// `epoch,train_loss,val_loss,seconds` rows.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut out = String::from("epoch,train_loss,val_loss,seconds\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.epoch, e.train_loss, e.val_loss, e.seconds
            ));
        }
        std::fs::write(path, out)
    }
}

/// Fit result: the report and the parameters of the best epoch.
pub struct FitOutput<T: Scalar> {
    pub report: TrainingReport,
    pub best: Model<T>,
}

struct Prepared<T: Scalar> {
    coords: Vec<Vec<T>>,
    targets: Vec<Vec<T>>,
    n: usize,
    dim: usize,
}

fn prepare<T: Scalar>(
    clouds: &[PointCloud],
    norm: &NormStats,
    n_expected: usize,
    input_dim: usize,
    role: &str,
) -> TrainResult<Prepared<T>> {
    let mut coords = Vec::with_capacity(clouds.len());
    let mut targets = Vec::with_capacity(clouds.len());
    for (i, cloud) in clouds.iter().enumerate() {
        if cloud.len() != n_expected {
            return Err(TrainError::Dataset {
                what: format!(
                    "{role} cloud {i} has {} points, expected {n_expected}",
                    cloud.len()
                ),
            });
        }
        let fields = cloud.fields.as_ref().ok_or_else(|| TrainError::Dataset {
            what: format!("{role} cloud {i} carries no target fields"),
        })?;
        let mut c = Vec::with_capacity(n_expected * input_dim);
        for p in &cloud.coords {
            c.push(T::from_f64(p[0]));
            c.push(T::from_f64(p[1]));
            if input_dim == 3 {
                c.push(T::ZERO);
            }
        }
        let mut t = Vec::with_capacity(n_expected * 3);
        for &f in fields {
            let scaled = norm.normalize(f);
            t.extend(scaled.iter().map(|&v| T::from_f64(v)));
        }
        coords.push(c);
        targets.push(t);
    }
    Ok(Prepared {
        coords,
        targets,
        n: n_expected,
        dim: input_dim,
    })
}

fn stack<T: Scalar>(prep: &Prepared<T>, idx: &[usize], which: bool) -> Tensor<T> {
    let src = if which { &prep.coords } else { &prep.targets };
    let cols = if which { prep.dim } else { 3 };
    let mut data = Vec::with_capacity(idx.len() * prep.n * cols);
    for &i in idx {
        data.extend_from_slice(&src[i]);
    }
    Tensor::matrix(idx.len() * prep.n, cols, data).expect("sized by construction")
}

/// Trains in place, validating after each epoch and retaining the parameters
/// of the best epoch. `on_epoch` fires after every epoch (logging hook).
pub fn fit<T: Scalar>(
    model: &mut Model<T>,
    train: &[PointCloud],
    val: &[PointCloud],
    norm: &NormStats,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStat),
) -> TrainResult<FitOutput<T>> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(TrainError::Dataset {
            what: "empty training split".into(),
        });
    }
    if cfg.batch_size > train.len() {
        return Err(TrainError::Dataset {
            what: format!(
                "batch_size {} exceeds training split of {}",
                cfg.batch_size,
                train.len()
            ),
        });
    }
    let n = model.config().n_points;
    let dim = model.config().input_dim;
    let train_prep = prepare::<T>(train, norm, n, dim, "train")?;
    let val_prep = if val.is_empty() {
        None
    } else {
        Some(prepare::<T>(val, norm, n, dim, "val")?)
    };
    let val_all: Vec<usize> = (0..val.len()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(model);
    let mut report = TrainingReport {
        epochs: Vec::with_capacity(cfg.epochs),
        best_epoch: 0,
        best_loss: f64::INFINITY,
        wall_seconds: 0.0,
    };
    let mut best = model.clone();
    let total = Instant::now();

    for epoch in 0..cfg.epochs {
        let tick = Instant::now();
        let mut order: Vec<usize> = (0..train.len()).collect();
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }

        let mut loss_sum = 0.0;
        let mut sample_sum = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < 2 {
                continue; // batch norm needs two samples
            }
            let coords = stack(&train_prep, chunk, true);
            let targets = stack(&train_prep, chunk, false);
            let pass = model.forward_train(&coords, chunk.len(), Grads::params())?;
            let mut tape = pass.tape;
            let t_node = tape.leaf(targets, false);
            let loss_node = tape.mse_loss(pass.pred, t_node)?;
            let batch_loss = tape.val(loss_node).data()[0].to_f64();
            if !batch_loss.is_finite() {
                return Err(TrainError::Divergence {
                    epoch,
                    last_good: epoch.checked_sub(1),
                });
            }
            tape.backward(loss_node)?;
            let grads: Vec<Vec<T>> = pass
                .param_nodes
                .iter()
                .map(|&node| tape.grad(node).expect("trainable leaf").to_vec())
                .collect();
            adam.step(model, &grads, cfg)?;
            loss_sum += batch_loss * chunk.len() as f64;
            sample_sum += chunk.len();
        }
        let train_loss = loss_sum / sample_sum.max(1) as f64;

        let val_loss = match &val_prep {
            Some(prep) => {
                let coords = stack(prep, &val_all, true);
                let targets = stack(prep, &val_all, false);
                let pass = model.forward_infer(&coords, val_all.len())?;
                mse_loss_slices(&pass.predictions(), targets.data())
            }
            None => f64::NAN,
        };
        let tracked = if val_prep.is_some() { val_loss } else { train_loss };
        if !tracked.is_finite() && val_prep.is_some() {
            return Err(TrainError::Divergence {
                epoch,
                last_good: epoch.checked_sub(1),
            });
        }
        if tracked < report.best_loss {
            report.best_loss = tracked;
            report.best_epoch = epoch;
            best = model.clone();
        }

        let stat = EpochStat {
            epoch,
            train_loss,
            val_loss,
            seconds: tick.elapsed().as_secs_f64(),
        };
        on_epoch(&stat);
        report.epochs.push(stat);
    }
    report.wall_seconds = total.elapsed().as_secs_f64();
    Ok(FitOutput { report, best })
}

/// Infer-mode loss of a model over tagged clouds (validation/test metric).
pub fn evaluate_loss<T: Scalar>(
    model: &Model<T>,
    clouds: &[PointCloud],
    norm: &NormStats,
) -> TrainResult<f64> {
    if clouds.is_empty() {
        return Err(TrainError::Dataset {
            what: "cannot evaluate over an empty split".into(),
        });
    }
    let n = clouds[0].len();
    let prep = prepare::<T>(clouds, norm, n, model.config().input_dim, "eval")?;
    let idx: Vec<usize> = (0..clouds.len()).collect();
    let coords = stack(&prep, &idx, true);
    let targets = stack(&prep, &idx, false);
    let pass = model.forward_infer(&coords, clouds.len())?;
    Ok(mse_loss_slices(&pass.predictions(), targets.data()))
}
