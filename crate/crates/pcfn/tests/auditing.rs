//! End-to-end auditing on a briefly trained model: gradient residuals
//! partition the interior, reports stay finite, and the critical-point
//! report stays consistent with the latent record.

use pcfn::data::{
    fill_oracle_fields, sample_cloud, FlowConditions, GeometryMeta, Grading, NormStats, PointCloud,
};
use pcfn::eval::{build_stencils, critical_points, gradient_residuals, pointwise_errors};
use pcfn::model::{Model, ModelConfig};
use pcfn::train::{fit, TrainConfig};
use pcfn::tensor::Tensor;

fn oracle_cloud(n: usize, radius: f64, seed: u64) -> PointCloud {
    let meta = GeometryMeta::Circle {
        center: [8.0, 16.0],
        radius,
    };
    let mut cloud = sample_cloud(&meta, n, Grading::auto(n), seed).unwrap();
    fill_oracle_fields(&mut cloud, &FlowConditions::default()).unwrap();
    cloud
}

#[test]
fn gradient_residuals_partition_the_interior() {
    let n = 96;
    let cond = FlowConditions::default();
    let clouds: Vec<PointCloud> = (0..4).map(|i| oracle_cloud(n, 0.6 + 0.1 * i as f64, i as u64)).collect();
    let refs: Vec<&PointCloud> = clouds.iter().collect();
    let norm = NormStats::fit(&refs, cond.rho, cond.u_inf, cond.p0).unwrap();

    let mut config = ModelConfig::new(n, 2, 3, 64).unwrap();
    config.mlp1 = vec![16, 16];
    config.mlp2 = vec![16, 32, 64];
    config.tnet_conv = vec![16, 32, 64];
    config.tnet_fc = vec![32, 16];
    config.tail_mlp = vec![32, 16];
    let mut model = Model::<f64>::build(config, 5).unwrap();
    let cfg = TrainConfig {
        batch_size: 2,
        epochs: 30,
        seed: 3,
        ..TrainConfig::default()
    };
    fit(&mut model, &clouds, &[], &norm, &cfg, |_| {}).unwrap();

    let cloud = &clouds[0];
    let stencils = build_stencils(cloud, 12).unwrap();
    let interior = stencils.class.interior_indices();
    let rep = gradient_residuals(&model, cloud, &norm, &stencils, cond.mu).unwrap();

    assert_eq!(
        rep.m_critical + rep.m_non_critical,
        interior.len(),
        "critical and non-critical interior sets must partition the interior"
    );
    let mut merged: Vec<usize> = rep
        .critical_interior
        .iter()
        .chain(&rep.non_critical_interior)
        .copied()
        .collect();
    merged.sort_unstable();
    assert_eq!(merged, interior);

    for triple in [rep.critical.as_ref(), rep.non_critical.as_ref()].into_iter().flatten() {
        assert!(triple.momentum_x.is_finite() && triple.momentum_x >= 0.0);
        assert!(triple.momentum_y.is_finite() && triple.momentum_y >= 0.0);
        assert!(triple.continuity.is_finite() && triple.continuity >= 0.0);
    }
    assert!(rep.m_critical > 0, "trained pooling should select interior points too");

    // Deterministic for a fixed checkpoint.
    let rep2 = gradient_residuals(&model, cloud, &norm, &stencils, cond.mu).unwrap();
    assert_eq!(rep.critical.map(|t| t.momentum_x.to_bits()), rep2.critical.map(|t| t.momentum_x.to_bits()));
}

#[test]
fn critical_report_tracks_surface_coverage_counts() {
    let n = 96;
    let cloud = oracle_cloud(n, 0.9, 9);
    let mut config = ModelConfig::new(n, 2, 3, 64).unwrap();
    config.mlp1 = vec![8, 8];
    config.mlp2 = vec![8, 16, 64];
    config.tnet_conv = vec![8, 16, 64];
    config.tnet_fc = vec![16, 8];
    config.tail_mlp = vec![16, 8];
    let model = Model::<f64>::build(config, 11).unwrap();
    let coords = Tensor::matrix(
        n,
        2,
        cloud.coords.iter().flat_map(|p| [p[0], p[1]]).collect(),
    )
    .unwrap();
    let pass = model.forward_infer(&coords, 1).unwrap();
    let rep = critical_points(&pass.latents[0], &cloud);
    assert_eq!(rep.indices, pass.latents[0].critical_set);
    assert!(rep.n_surface > 0);
    assert!(rep.n_surface_critical <= rep.n_surface);
    assert_eq!(
        rep.boundary_coverage,
        Some(rep.n_surface_critical == rep.n_surface)
    );
}

#[test]
fn error_report_flags_zero_truth_norm_instead_of_nan() {
    let n = 32;
    let mut cloud = oracle_cloud(n, 0.7, 13);
    // Zero out the v channel so its relative norm is undefined.
    if let Some(fields) = cloud.fields.as_mut() {
        for f in fields.iter_mut() {
            f[1] = 0.0;
        }
    }
    let pred: Vec<f64> = (0..n * 3).map(|i| i as f64 * 1e-3).collect();
    let rep = pointwise_errors(&cloud, &pred).unwrap();
    assert!(rep.v.relative.is_none());
    assert!(rep.u.relative.is_some());
    assert!(rep.per_point_abs.len() == n);
}
