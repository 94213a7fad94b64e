//! Grid search over (global feature size, batch size) with the tail MLP
//! paired per size, one row per cell, and infeasible cells marked instead of
//! failing the run.

use std::time::Instant;

use super::fit::evaluate_loss;
use super::{fit, TrainConfig, TrainResult};
use crate::data::{NormStats, PointCloud};
use crate::model::{parameter_count, Model, ModelConfig};
use crate::tensor::Scalar;

/// Axes and budget of a grid run.
#[derive(Clone, Debug)]
pub struct GridSpec {
    pub global_features: Vec<usize>,
    pub batch_sizes: Vec<usize>,
    pub epochs: usize,
    pub seed: u64,
    /// Cells whose estimated working set exceeds this are marked infeasible.
    pub memory_budget_bytes: Option<u64>,
}

/// What happened in one cell.
#[derive(Clone, Debug, PartialEq)]
pub enum CellOutcome {
    Done {
        train_loss: f64,
        val_loss: f64,
        test_loss: f64,
        seconds: f64,
    },
    /// Estimated memory exceeded the budget; mirrors a cross marker.
    Infeasible { estimated_bytes: u64 },
    /// Present in a resumed report; not recomputed.
    Skipped,
}

#[derive(Clone, Debug)]
pub struct GridCell {
    pub global_feature: usize,
    pub batch_size: usize,
    pub tail_mlp: Vec<usize>,
    pub outcome: CellOutcome,
}

/// Rough working-set estimate for one cell: parameters plus optimizer state,
/// forward values and gradients for a full batch, and the tape's parameter
/// copies.
pub fn estimate_cell_bytes(config: &ModelConfig, batch: usize, scalar_bytes: u64) -> u64 {
    let (params, _) = parameter_count(config);
    let per_point_width: usize = config.input_dim
        + config.mlp1.iter().sum::<usize>()
        + config.mlp2.iter().sum::<usize>()
        + 2 * config.tnet_conv.iter().sum::<usize>()
        + config.concat_dim()
        + config.tail_mlp.iter().sum::<usize>()
        + config.pre_head_dim()
        + config.n_cfd;
    let rows = (batch * config.n_points) as u64;
    let activations = 2 * rows * per_point_width as u64;
    // params + grads + two Adam moments + two tape-side copies.
    let param_side = 6 * params as u64;
    scalar_bytes * (param_side + activations)
}

/// Runs every (G, batch) cell not in `skip`, training from scratch per cell
/// and reporting train/val/test loss of the best-validation parameters plus
/// wall time. `on_cell` fires after each cell for incremental reporting.
#[allow(clippy::too_many_arguments)]
pub fn grid_search<T: Scalar>(
    train: &[PointCloud],
    val: &[PointCloud],
    test: &[PointCloud],
    norm: &NormStats,
    n_points: usize,
    spec: &GridSpec,
    skip: &[(usize, usize)],
    mut on_cell: impl FnMut(&GridCell),
) -> TrainResult<Vec<GridCell>> {
    let mut cells = Vec::new();
    for &g in &spec.global_features {
        for &batch in &spec.batch_sizes {
            let tail = ModelConfig::tail_for(g);
            if skip.contains(&(g, batch)) {
                let cell = GridCell {
                    global_feature: g,
                    batch_size: batch,
                    tail_mlp: tail,
                    outcome: CellOutcome::Skipped,
                };
                on_cell(&cell);
                cells.push(cell);
                continue;
            }
            let config = ModelConfig::new(n_points, 2, 3, g)?;
            if let Some(budget) = spec.memory_budget_bytes {
                let estimated = estimate_cell_bytes(&config, batch, std::mem::size_of::<T>() as u64);
                if estimated > budget {
                    let cell = GridCell {
                        global_feature: g,
                        batch_size: batch,
                        tail_mlp: config.tail_mlp.clone(),
                        outcome: CellOutcome::Infeasible {
                            estimated_bytes: estimated,
                        },
                    };
                    on_cell(&cell);
                    cells.push(cell);
                    continue;
                }
            }
            let started = Instant::now();
            let mut model = Model::<T>::build(config.clone(), spec.seed)?;
            let cfg = TrainConfig {
                batch_size: batch,
                epochs: spec.epochs,
                seed: spec.seed,
                ..TrainConfig::default()
            };
            let out = fit(&mut model, train, val, norm, &cfg, |_| {})?;
            let last = out.report.epochs.last().expect("epochs >= 1");
            let test_loss = evaluate_loss(&out.best, test, norm)?;
            let cell = GridCell {
                global_feature: g,
                batch_size: batch,
                tail_mlp: config.tail_mlp.clone(),
                outcome: CellOutcome::Done {
                    train_loss: last.train_loss,
                    val_loss: out.report.best_loss,
                    test_loss,
                    seconds: started.elapsed().as_secs_f64(),
                },
            };
            on_cell(&cell);
            cells.push(cell);
        }
    }
    Ok(cells)
}
