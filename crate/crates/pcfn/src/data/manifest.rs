//! Dataset manifest: versioned TOML listing sample files with split tags,
//! the frozen normalization stats, and the generator provenance.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::oracle::fill_oracle_fields;
use super::{
    reynolds, sample_cloud, DataError, DataResult, FlowConditions, GeometryMeta, Grading,
    NormStats, PointCloud,
};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// One sample file plus its split tag and provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub file: String,
    pub split: Split,
    pub meta: GeometryMeta,
    /// Reynolds number implied by the geometry's length scale (diameter for
    /// circles), when known.
    pub reynolds: Option<f64>,
}

/// Generation request: radii grid, clouds per radius, cloud size, grading.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub n_points: usize,
    pub radii: Vec<f64>,
    pub clouds_per_radius: usize,
    pub center: [f64; 2],
    pub conditions: FlowConditions,
    pub grading: Grading,
}

impl GeneratorParams {
    pub fn desk(n_points: usize, radii: Vec<f64>, clouds_per_radius: usize) -> Self {
        Self {
            n_points,
            radii,
            clouds_per_radius,
            center: [8.0, 16.0],
            conditions: FlowConditions::default(),
            grading: Grading::auto(n_points),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub seed: u64,
    pub norm: NormStats,
    pub generator: Option<GeneratorParams>,
    pub samples: Vec<SampleRecord>,
}

impl DatasetManifest {
    pub fn save(&self, path: &Path) -> DataResult<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| DataError::Manifest { what: e.to_string() })?;
        fs::write(path, text)?;
        Ok(())
    }

    /// Loads and validates: version check plus existence of every listed
    /// sample file (relative to the manifest's directory).
    pub fn load(path: &Path) -> DataResult<Self> {
        let text = fs::read_to_string(path)?;
        let manifest: Self = toml::from_str(&text)
            .map_err(|e| DataError::Manifest { what: e.to_string() })?;
        if manifest.format_version != MANIFEST_VERSION {
            return Err(DataError::Manifest {
                what: format!(
                    "format_version {} unsupported (expected {MANIFEST_VERSION})",
                    manifest.format_version
                ),
            });
        }
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        for s in &manifest.samples {
            if !dir.join(&s.file).is_file() {
                return Err(DataError::Manifest {
                    what: format!("listed sample `{}` does not exist", s.file),
                });
            }
        }
        Ok(manifest)
    }

    pub fn files(&self, split: Split) -> impl Iterator<Item = &SampleRecord> {
        self.samples.iter().filter(move |s| s.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.files(split).count()
    }

    /// Loads all clouds of one split, in manifest order.
    pub fn load_split(&self, dir: &Path, split: Split) -> DataResult<Vec<PointCloud>> {
        self.files(split)
            .map(|s| super::read_sample(&dir.join(&s.file)))
            .collect()
    }
}

/// 80/10/10 split tags by seeded shuffle: round(0.8 n) train, round(0.1 n)
/// validation, remainder test. Stable for a fixed seed.
pub fn split_dataset(count: usize, seed: u64) -> DataResult<Vec<Split>> {
    if count < 10 {
        return Err(DataError::TooFewSamples {
            got: count,
            need: 10,
        });
    }
    let n_train = (0.8 * count as f64).round() as usize;
    let n_val = (0.1 * count as f64).round() as usize;
    let mut order: Vec<usize> = (0..count).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..count).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let mut tags = vec![Split::Test; count];
    for (rank, &idx) in order.iter().enumerate() {
        tags[idx] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }
    Ok(tags)
}

/// Generates the desk-scale dataset: oracle-solved clouds on a radius grid,
/// split 80/10/10, normalization stats fitted on the training split, all
/// files plus the manifest written under `dir`.
pub fn generate_dataset(
    dir: &Path,
    params: &GeneratorParams,
    seed: u64,
) -> DataResult<DatasetManifest> {
    fs::create_dir_all(dir)?;
    let mut clouds = Vec::new();
    let mut names = Vec::new();
    let mut metas = Vec::new();
    for (ri, &radius) in params.radii.iter().enumerate() {
        for k in 0..params.clouds_per_radius {
            let meta = GeometryMeta::Circle {
                center: params.center,
                radius,
            };
            let cloud_seed = seed
                .wrapping_mul(1_000_003)
                .wrapping_add((ri * params.clouds_per_radius + k) as u64);
            let mut cloud = sample_cloud(&meta, params.n_points, params.grading, cloud_seed)?;
            fill_oracle_fields(&mut cloud, &params.conditions)?;
            names.push(format!("sample_r{radius:.3}_{k:02}.csv"));
            metas.push(meta);
            clouds.push(cloud);
        }
    }

    let tags = split_dataset(clouds.len(), seed)?;
    let train_clouds: Vec<&PointCloud> = clouds
        .iter()
        .zip(&tags)
        .filter(|(_, t)| **t == Split::Train)
        .map(|(c, _)| c)
        .collect();
    let cond = params.conditions;
    let norm = NormStats::fit(&train_clouds, cond.rho, cond.u_inf, cond.p0)?;

    let mut samples = Vec::new();
    for ((cloud, name), (tag, meta)) in clouds
        .iter()
        .zip(&names)
        .zip(tags.iter().zip(&metas))
    {
        super::write_sample(&dir.join(name), cloud)?;
        let re = match meta {
            GeometryMeta::Circle { radius, .. } => {
                Some(reynolds(cond.rho, cond.u_inf, cond.mu, 2.0 * radius)?)
            }
            GeometryMeta::Unknown => None,
        };
        samples.push(SampleRecord {
            file: name.clone(),
            split: *tag,
            meta: meta.clone(),
            reynolds: re,
        });
    }

    let manifest = DatasetManifest {
        format_version: MANIFEST_VERSION,
        seed,
        norm,
        generator: Some(params.clone()),
        samples,
    };
    manifest.save(&dir.join("manifest.toml"))?;
    Ok(manifest)
}

/// Manifest path inside a dataset directory.
pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join("manifest.toml")
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn split_counts_follow_the_eighty_ten_ten_rule() {
        let tags = split_dataset(10, 7).unwrap();
        let count = |s: Split| tags.iter().filter(|&&t| t == s).count();
        assert_eq!(count(Split::Train), 8);
        assert_eq!(count(Split::Val), 1);
        assert_eq!(count(Split::Test), 1);

        let tags = split_dataset(2595, 7).unwrap();
        let count = |s: Split| tags.iter().filter(|&&t| t == s).count();
        assert_eq!(count(Split::Train), 2076);
        assert_eq!(count(Split::Val), 260);
        assert_eq!(count(Split::Test), 259);
    }

    #[test]
    fn split_is_stable_for_a_seed() {
        assert_eq!(split_dataset(50, 3).unwrap(), split_dataset(50, 3).unwrap());
        assert_ne!(split_dataset(50, 3).unwrap(), split_dataset(50, 4).unwrap());
    }

    #[test]
    fn too_few_samples_is_an_error() {
        assert!(matches!(
            split_dataset(9, 0).unwrap_err(),
            DataError::TooFewSamples { got: 9, need: 10 }
        ));
    }

    #[test]
    fn generated_dataset_round_trips_and_revalidates() {
        let dir = tempdir().unwrap();
        let params = GeneratorParams::desk(64, vec![0.5, 1.0], 5);
        let manifest = generate_dataset(dir.path(), &params, 11).unwrap();
        assert_eq!(manifest.samples.len(), 10);
        assert_eq!(manifest.count(Split::Train), 8);
        let loaded = DatasetManifest::load(&manifest_path(dir.path())).unwrap();
        assert_eq!(loaded, manifest);
        let train = loaded.load_split(dir.path(), Split::Train).unwrap();
        assert_eq!(train.len(), 8);
        assert!(train.iter().all(|c| c.has_fields() && c.len() == 64));
    }

    #[test]
    fn regeneration_with_same_seed_is_byte_identical() {
        let dir_a = tempdir().unwrap();
        let dir_b = tempdir().unwrap();
        let params = GeneratorParams::desk(48, vec![0.6, 0.9], 5);
        generate_dataset(dir_a.path(), &params, 21).unwrap();
        generate_dataset(dir_b.path(), &params, 21).unwrap();
        for entry in fs::read_dir(dir_a.path()).unwrap() {
            let name = entry.unwrap().file_name();
            let a = fs::read(dir_a.path().join(&name)).unwrap();
            let b = fs::read(dir_b.path().join(&name)).unwrap();
            assert_eq!(a, b, "file {name:?} differs between identical runs");
        }
    }
}
