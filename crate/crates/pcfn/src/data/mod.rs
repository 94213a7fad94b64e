//! Sample generation, ingestion, normalization and dataset bookkeeping.
//!
//! Desk-scale training data comes from an analytical potential-flow solution
//! around circular cylinders; externally produced samples are ingested
//! through the same CSV schema. Targets are non-dimensionalized and min-max
//! scaled with exact inverses; input coordinates are never normalized.

use std::fmt;
use std::path::PathBuf;

mod csvio;
mod manifest;
mod normalize;
mod oracle;
mod sample;

pub use csvio::{read_sample, write_sample};
pub use manifest::{
    generate_dataset, manifest_path,
    split_dataset, DatasetManifest, GeneratorParams, SampleRecord, Split, MANIFEST_VERSION,
};
pub use normalize::{minmax_scale, minmax_unscale, nondimensionalize, NormStats, VarStats};
pub use oracle::{fill_oracle_fields, potential_flow_cylinder, reynolds, FlowConditions};
pub use sample::{sample_cloud, Grading};

pub type DataResult<T> = Result<T, DataError>;

/// Errors from generation, parsing and normalization.
#[derive(Debug)]
pub enum DataError {
    /// A physical quantity that must be positive was not.
    NonPositive { name: &'static str, value: f64 },
    /// A query point lies strictly inside the object.
    PointInsideObject { x: f64, y: f64 },
    /// Cloud generation cannot satisfy the request.
    InfeasibleGeometry { what: String },
    /// Degenerate normalization statistics (max == min).
    DegenerateStats { variable: &'static str },
    /// A malformed row in a sample file.
    Parse {
        path: PathBuf,
        line: usize,
        what: String,
    },
    /// A required column is missing from the header.
    MissingColumn { path: PathBuf, column: String },
    /// Fewer samples than the split requires.
    TooFewSamples { got: usize, need: usize },
    /// Manifest parsing or consistency failure.
    Manifest { what: String },
    Io(std::io::Error),
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonPositive { name, value } => {
                write!(f, "{name} must be positive, got {value}")
            }
            Self::PointInsideObject { x, y } => {
                write!(f, "query point ({x}, {y}) lies inside the object")
            }
            Self::InfeasibleGeometry { what } => write!(f, "infeasible geometry: {what}"),
            Self::DegenerateStats { variable } => {
                write!(f, "degenerate min-max stats for {variable}: max equals min")
            }
            Self::Parse { path, line, what } => {
                write!(f, "{}:{line}: {what}", path.display())
            }
            Self::MissingColumn { path, column } => {
                write!(f, "{}: missing column `{column}`", path.display())
            }
            Self::TooFewSamples { got, need } => {
                write!(f, "dataset split needs at least {need} samples, got {got}")
            }
            Self::Manifest { what } => write!(f, "manifest error: {what}"),
            Self::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for DataError {}

impl From<std::io::Error> for DataError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}

/// Shape metadata carried with generated clouds; `None` aspects for ingested
/// clouds of unknown provenance.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum GeometryMeta {
    /// Circular cylinder cross section.
    Circle { center: [f64; 2], radius: f64 },
    /// Ingested cloud without shape information.
    Unknown,
}

impl GeometryMeta {
    /// Signed-ish distance to the object surface: 0 on the boundary,
    /// positive outside. `None` when the shape is unknown.
    pub fn surface_distance(&self, p: [f64; 2]) -> Option<f64> {
        match self {
            Self::Circle { center, radius } => {
                let r = ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt();
                Some(r - radius)
            }
            Self::Unknown => None,
        }
    }

    /// Enclosed area, if known.
    pub fn area(&self) -> Option<f64> {
        match self {
            Self::Circle { radius, .. } => Some(std::f64::consts::PI * radius * radius),
            Self::Unknown => None,
        }
    }

    /// Object center (the reference point for nearest-point selection).
    pub fn center(&self) -> Option<[f64; 2]> {
        match self {
            Self::Circle { center, .. } => Some(*center),
            Self::Unknown => None,
        }
    }
}

/// N points with coordinates in physical units and optional per-point
/// target fields (u, v, p).
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    pub coords: Vec<[f64; 2]>,
    pub fields: Option<Vec<[f64; 3]>>,
    pub meta: GeometryMeta,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn has_fields(&self) -> bool {
        self.fields.is_some()
    }

    /// Axis-aligned bounding box as (min, max) corners.
    pub fn bbox(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.coords {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    /// No point may lie strictly inside the object (null-space encoding).
    pub fn respects_null_space(&self, tol: f64) -> bool {
        self.coords.iter().all(|&p| {
            self.meta
                .surface_distance(p)
                .map_or(true, |d| d >= -tol)
        })
    }
}
