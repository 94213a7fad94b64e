//! Fit-loop behavior on small oracle datasets: loss goes down, trajectories
//! reproduce bit-exactly, best-checkpoint bookkeeping holds.

use pcfn::data::{
    fill_oracle_fields, sample_cloud, FlowConditions, GeometryMeta, Grading, NormStats, PointCloud,
};
use pcfn::model::{Model, ModelConfig};
use pcfn::train::{evaluate_loss, fit, grid_search, CellOutcome, GridSpec, TrainConfig};

fn oracle_clouds(n_points: usize, radii: &[f64], per_radius: usize, seed: u64) -> Vec<PointCloud> {
    let cond = FlowConditions::default();
    let mut out = Vec::new();
    for (ri, &radius) in radii.iter().enumerate() {
        for k in 0..per_radius {
            let meta = GeometryMeta::Circle {
                center: [8.0, 16.0],
                radius,
            };
            let mut cloud = sample_cloud(
                &meta,
                n_points,
                Grading::auto(n_points),
                seed + (ri * per_radius + k) as u64,
            )
            .unwrap();
            fill_oracle_fields(&mut cloud, &cond).unwrap();
            out.push(cloud);
        }
    }
    out
}

fn small_config(n: usize, g: usize) -> ModelConfig {
    ModelConfig::new(n, 2, 3, g).unwrap()
}

#[test]
fn fit_reduces_training_loss_substantially() {
    let n = 64;
    let clouds = oracle_clouds(n, &[0.6, 1.0], 2, 3);
    let cond = FlowConditions::default();
    let refs: Vec<&PointCloud> = clouds.iter().collect();
    let norm = NormStats::fit(&refs, cond.rho, cond.u_inf, cond.p0).unwrap();
    let mut model = Model::<f64>::build(small_config(n, 64), 7).unwrap();
    let cfg = TrainConfig {
        batch_size: 2,
        epochs: 300,
        seed: 5,
        ..TrainConfig::default()
    };
    let out = fit(&mut model, &clouds, &[], &norm, &cfg, |_| {}).unwrap();
    let first = out.report.epochs.first().unwrap().train_loss;
    let last = out.report.epochs.last().unwrap().train_loss;
    assert!(first.is_finite() && first <= 1.0, "epoch-0 loss bounded: {first}");
    assert!(
        last < first / 10.0,
        "training should reduce loss by 10x: first {first}, last {last}"
    );
}

#[test]
fn fit_is_bit_reproducible_in_f64() {
    let n = 32;
    let clouds = oracle_clouds(n, &[0.8], 4, 11);
    let cond = FlowConditions::default();
    let refs: Vec<&PointCloud> = clouds.iter().collect();
    let norm = NormStats::fit(&refs, cond.rho, cond.u_inf, cond.p0).unwrap();
    let run = || {
        let mut model = Model::<f64>::build(small_config(n, 64), 9).unwrap();
        let cfg = TrainConfig {
            batch_size: 2,
            epochs: 20,
            seed: 13,
            ..TrainConfig::default()
        };
        let out = fit(&mut model, &clouds[..3], &clouds[3..], &norm, &cfg, |_| {}).unwrap();
        let curve: Vec<(u64, u64)> = out
            .report
            .epochs
            .iter()
            .map(|e| (e.train_loss.to_bits(), e.val_loss.to_bits()))
            .collect();
        let params: Vec<u64> = model
            .entries()
            .iter()
            .flat_map(|e| e.tensor.data().iter().map(|v| v.to_bits()))
            .collect();
        (curve, params)
    };
    let a = run();
    let b = run();
    assert_eq!(a.0, b.0, "loss curves must match bit-exactly");
    assert_eq!(a.1, b.1, "final parameters must match bit-exactly");
}

#[test]
fn best_checkpoint_is_no_worse_than_final_epoch() {
    let n = 32;
    let clouds = oracle_clouds(n, &[0.5, 1.1], 3, 17);
    let cond = FlowConditions::default();
    let refs: Vec<&PointCloud> = clouds.iter().collect();
    let norm = NormStats::fit(&refs, cond.rho, cond.u_inf, cond.p0).unwrap();
    let mut model = Model::<f64>::build(small_config(n, 64), 3).unwrap();
    let cfg = TrainConfig {
        batch_size: 2,
        epochs: 40,
        seed: 1,
        ..TrainConfig::default()
    };
    let out = fit(&mut model, &clouds[..4], &clouds[4..], &norm, &cfg, |_| {}).unwrap();
    let final_val = out.report.epochs.last().unwrap().val_loss;
    assert!(out.report.best_loss <= final_val || final_val.is_nan());
    let best_val = evaluate_loss(&out.best, &clouds[4..], &norm).unwrap();
    assert!((best_val - out.report.best_loss).abs() < 1e-12);
}

#[test]
fn batch_size_larger_than_train_split_is_rejected() {
    let n = 32;
    let clouds = oracle_clouds(n, &[0.7], 2, 23);
    let cond = FlowConditions::default();
    let refs: Vec<&PointCloud> = clouds.iter().collect();
    let norm = NormStats::fit(&refs, cond.rho, cond.u_inf, cond.p0).unwrap();
    let mut model = Model::<f64>::build(small_config(n, 64), 3).unwrap();
    let cfg = TrainConfig {
        batch_size: 8,
        epochs: 1,
        ..TrainConfig::default()
    };
    assert!(fit(&mut model, &clouds, &[], &norm, &cfg, |_| {}).is_err());
}

#[test]
fn grid_search_covers_cells_and_marks_infeasible_ones() {
    let n = 32;
    let clouds = oracle_clouds(n, &[0.6, 1.0], 3, 29);
    let cond = FlowConditions::default();
    let refs: Vec<&PointCloud> = clouds.iter().collect();
    let norm = NormStats::fit(&refs, cond.rho, cond.u_inf, cond.p0).unwrap();
    let (train, rest) = clouds.split_at(4);
    let (val, test) = rest.split_at(1);
    let spec = GridSpec {
        global_features: vec![64, 128],
        batch_sizes: vec![2],
        epochs: 3,
        seed: 2,
        memory_budget_bytes: None,
    };
    let cells = grid_search::<f64>(train, val, test, &norm, n, &spec, &[], |_| {}).unwrap();
    assert_eq!(cells.len(), 2);
    for cell in &cells {
        match &cell.outcome {
            CellOutcome::Done {
                train_loss,
                val_loss,
                test_loss,
                seconds,
            } => {
                assert!(train_loss.is_finite() && val_loss.is_finite() && test_loss.is_finite());
                assert!(*seconds > 0.0);
            }
            other => panic!("expected a completed cell, got {other:?}"),
        }
    }

    // A one-byte budget makes every cell infeasible; skipped keys are kept.
    let spec = GridSpec {
        memory_budget_bytes: Some(1),
        ..spec
    };
    let cells = grid_search::<f64>(train, val, test, &norm, n, &spec, &[(64, 2)], |_| {}).unwrap();
    assert!(matches!(cells[0].outcome, CellOutcome::Skipped));
    assert!(matches!(cells[1].outcome, CellOutcome::Infeasible { .. }));
}
