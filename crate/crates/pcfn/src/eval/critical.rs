//! Critical-point extraction from forward-pass latents: the deduplicated
//! argmax provenance of the global feature, plus whether the object surface
//! is fully covered by critical points.

use super::stencil::classify_points;
use crate::data::PointCloud;
use crate::model::LatentRecord;

/// Critical indices plus surface-coverage diagnostics.
#[derive(Clone, Debug)]
pub struct CriticalReport {
    /// Sorted, deduplicated point indices that win at least one pooling
    /// dimension.
    pub indices: Vec<usize>,
    /// True when every on-surface point is critical; `None` when the cloud's
    /// geometry is unknown and the surface cannot be identified.
    pub boundary_coverage: Option<bool>,
    pub n_surface: usize,
    pub n_surface_critical: usize,
}

/// Builds the report from a forward pass latent and its cloud.
pub fn critical_points(latent: &LatentRecord, cloud: &PointCloud) -> CriticalReport {
    let indices = latent.critical_set.clone();
    let class = classify_points(cloud);
    let known_surface = class.on_surface.iter().any(|&b| b);
    let mut n_surface = 0;
    let mut n_surface_critical = 0;
    if known_surface {
        let mut critical = vec![false; cloud.len()];
        for &i in &indices {
            if i < critical.len() {
                critical[i] = true;
            }
        }
        for (i, &on) in class.on_surface.iter().enumerate() {
            if on {
                n_surface += 1;
                if critical[i] {
                    n_surface_critical += 1;
                }
            }
        }
    }
    CriticalReport {
        indices,
        boundary_coverage: if known_surface {
            Some(n_surface_critical == n_surface)
        } else {
            None
        },
        n_surface,
        n_surface_critical,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{sample_cloud, GeometryMeta, Grading};
    use crate::model::{Model, ModelConfig};
    use crate::tensor::Tensor;

    fn tiny_model(n: usize) -> Model<f64> {
        let mut c = ModelConfig::new(n, 2, 3, 64).unwrap();
        c.mlp1 = vec![8, 8];
        c.mlp2 = vec![8, 16, 64];
        c.tnet_conv = vec![8, 16, 64];
        c.tnet_fc = vec![16, 8];
        c.tail_mlp = vec![16, 8];
        Model::build(c, 3).unwrap()
    }

    #[test]
    fn single_point_cloud_is_entirely_critical() {
        let model = tiny_model(1);
        let coords = Tensor::matrix(1, 2, vec![0.3, -0.7]).unwrap();
        let pass = model.forward_infer(&coords, 1).unwrap();
        let cloud = PointCloud {
            coords: vec![[0.3, -0.7]],
            fields: None,
            meta: GeometryMeta::Unknown,
        };
        let rep = critical_points(&pass.latents[0], &cloud);
        assert_eq!(rep.indices, vec![0]);
        assert_eq!(pass.latents[0].argmax_indices, vec![0; 64]);
        assert!(rep.boundary_coverage.is_none());
    }

    #[test]
    fn count_is_bounded_by_min_of_n_and_g() {
        let n = 48;
        let model = tiny_model(n);
        let meta = GeometryMeta::Circle {
            center: [8.0, 16.0],
            radius: 0.8,
        };
        let cloud = sample_cloud(&meta, n, Grading::auto(n), 5).unwrap();
        let data: Vec<f64> = cloud.coords.iter().flat_map(|p| [p[0], p[1]]).collect();
        let coords = Tensor::matrix(n, 2, data).unwrap();
        let pass = model.forward_infer(&coords, 1).unwrap();
        let rep = critical_points(&pass.latents[0], &cloud);
        assert!(rep.indices.len() <= n.min(64));
        assert!(rep.boundary_coverage.is_some());
        assert_eq!(rep.n_surface, Grading::auto(n).surface_points);
    }
}
