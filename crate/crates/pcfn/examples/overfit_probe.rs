//! Calibration probe for the overfit training run.

use pcfn::data::{fill_oracle_fields, sample_cloud, FlowConditions, GeometryMeta, Grading, NormStats, PointCloud};
use pcfn::model::{Model, ModelConfig};
use pcfn::train::{fit, TrainConfig};
use std::time::Instant;

fn main() {
    let n = 256;
    let cond = FlowConditions::default();
    let radii = [0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1];
    let mut clouds = Vec::new();
    for (i, &r) in radii.iter().enumerate() {
        let meta = GeometryMeta::Circle { center: [8.0, 16.0], radius: r };
        let mut c = sample_cloud(&meta, n, Grading::auto(n), 40 + i as u64).unwrap();
        fill_oracle_fields(&mut c, &cond).unwrap();
        clouds.push(c);
    }
    let refs: Vec<&PointCloud> = clouds.iter().collect();
    let norm = NormStats::fit(&refs, cond.rho, cond.u_inf, cond.p0).unwrap();
    let config = ModelConfig::new(n, 2, 3, 128).unwrap();
    println!("params: {}", pcfn::model::parameter_count(&config).0);
    let mut model = Model::<f64>::build(config, 7).unwrap();
    let cfg = TrainConfig { batch_size: 4, epochs: 2000, seed: 11, ..TrainConfig::default() };
    let t = Instant::now();
    let out = fit(&mut model, &clouds, &[], &norm, &cfg, |e| {
        if e.epoch % 100 == 0 || e.epoch == 1999 {
            println!("epoch {:4}  train {:.3e}  ({:.2}s/epoch)", e.epoch, e.train_loss, e.seconds);
        }
    }).unwrap();
    println!("total {:.1}s  final train loss {:.3e}", t.elapsed().as_secs_f64(),
        out.report.epochs.last().unwrap().train_loss);
}
