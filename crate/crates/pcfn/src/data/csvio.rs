//! Sample files: CSV with header `x,y,u,v,p` (or `x,y` for prediction
//! inputs), `#` comment lines allowed. Geometry metadata rides along in a
//! comment so generated clouds survive a round trip. Values are rendered
//! with Rust's shortest-round-trip float formatting, which parses back to
//! the identical 64-bit value.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{DataError, DataResult, GeometryMeta, PointCloud};

const GEOMETRY_PREFIX: &str = "# geometry: circle";

/// Writes a cloud; the header carries the field columns only when the cloud
/// has fields.
pub fn write_sample(path: &Path, cloud: &PointCloud) -> DataResult<()> {
    let mut out = String::new();
    if let GeometryMeta::Circle { center, radius } = &cloud.meta {
        writeln!(out, "{GEOMETRY_PREFIX} {} {} {}", center[0], center[1], radius).unwrap();
    }
    match &cloud.fields {
        Some(fields) => {
            out.push_str("x,y,u,v,p\n");
            for (c, f) in cloud.coords.iter().zip(fields) {
                writeln!(out, "{},{},{},{},{}", c[0], c[1], f[0], f[1], f[2]).unwrap();
            }
        }
        None => {
            out.push_str("x,y\n");
            for c in &cloud.coords {
                writeln!(out, "{},{}", c[0], c[1]).unwrap();
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a cloud; files with only coordinates are accepted (prediction
/// input).
pub fn read_sample(path: &Path) -> DataResult<PointCloud> {
    let text = fs::read_to_string(path)?;
    let mut meta = GeometryMeta::Unknown;
    let mut header: Option<Vec<String>> = None;
    let mut coords = Vec::new();
    let mut fields = Vec::new();
    let parse_err = |line: usize, what: String| DataError::Parse {
        path: path.to_path_buf(),
        line,
        what,
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix(GEOMETRY_PREFIX) {
            let nums: Vec<f64> = rest
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| parse_err(line_no, format!("bad geometry comment: {e}")))?;
            if nums.len() != 3 {
                return Err(parse_err(line_no, "geometry comment needs cx cy r".into()));
            }
            meta = GeometryMeta::Circle {
                center: [nums[0], nums[1]],
                radius: nums[2],
            };
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        match &header {
            None => {
                let names: Vec<String> = cols.iter().map(|s| s.to_lowercase()).collect();
                let expected: &[&str] = if names.len() <= 2 {
                    &["x", "y"]
                } else {
                    &["x", "y", "u", "v", "p"]
                };
                for (i, want) in expected.iter().enumerate() {
                    if names.get(i).map(String::as_str) != Some(*want) {
                        return Err(DataError::MissingColumn {
                            path: path.to_path_buf(),
                            column: (*want).into(),
                        });
                    }
                }
                if names.len() > expected.len() {
                    return Err(parse_err(
                        line_no,
                        format!("unexpected extra columns {:?}", &names[expected.len()..]),
                    ));
                }
                header = Some(names);
            }
            Some(names) => {
                if cols.len() != names.len() {
                    return Err(parse_err(
                        line_no,
                        format!("expected {} columns, got {}", names.len(), cols.len()),
                    ));
                }
                let mut vals = [0.0f64; 5];
                for (k, tok) in cols.iter().enumerate() {
                    vals[k] = tok
                        .parse::<f64>()
                        .map_err(|e| parse_err(line_no, format!("bad number `{tok}`: {e}")))?;
                    if !vals[k].is_finite() {
                        return Err(parse_err(line_no, format!("non-finite value `{tok}`")));
                    }
                }
                coords.push([vals[0], vals[1]]);
                if names.len() == 5 {
                    fields.push([vals[2], vals[3], vals[4]]);
                }
            }
        }
    }

    let header = header.ok_or_else(|| DataError::Parse {
        path: path.to_path_buf(),
        line: 0,
        what: "file has no header row".into(),
    })?;
    Ok(PointCloud {
        coords,
        fields: if header.len() == 5 { Some(fields) } else { None },
        meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use tempfile::tempdir;

    fn random_cloud(seed: u64, n: usize) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointCloud {
            coords: (0..n)
                .map(|_| [rng.gen_range(-10.0..30.0), rng.gen_range(-5.0..35.0)])
                .collect(),
            fields: Some(
                (0..n)
                    .map(|_| {
                        [
                            rng.gen_range(-2.0..2.0),
                            rng.gen_range(-2.0..2.0),
                            rng.gen_range(-1.0..1.0),
                        ]
                    })
                    .collect(),
            ),
            meta: GeometryMeta::Circle {
                center: [8.0, 16.0],
                radius: 0.75,
            },
        }
    }

    #[test]
    fn round_trip_preserves_values_and_meta() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let cloud = random_cloud(1, 64);
        write_sample(&path, &cloud).unwrap();
        let back = read_sample(&path).unwrap();
        assert_eq!(back.meta, cloud.meta);
        assert_eq!(back.len(), cloud.len());
        let fields = cloud.fields.as_ref().unwrap();
        let back_fields = back.fields.as_ref().unwrap();
        for i in 0..cloud.len() {
            for k in 0..2 {
                assert!((back.coords[i][k] - cloud.coords[i][k]).abs() < 1e-12);
            }
            for k in 0..3 {
                assert!((back_fields[i][k] - fields[i][k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn coordinates_only_files_are_accepted() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("coords.csv");
        fs::write(&path, "# a comment\nx,y\n1.5,2.5\n3.5,4.5\n").unwrap();
        let cloud = read_sample(&path).unwrap();
        assert_eq!(cloud.len(), 2);
        assert!(cloud.fields.is_none());
        assert_eq!(cloud.meta, GeometryMeta::Unknown);
    }

    #[test]
    fn missing_column_is_named() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "x,y,u,p,v\n1,2,3,4,5\n").unwrap();
        match read_sample(&path).unwrap_err() {
            DataError::MissingColumn { column, .. } => assert_eq!(column, "v"),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "x,y,u,v,p\n1,2,3,4,5\n1,2,oops,4,5\n").unwrap();
        match read_sample(&path).unwrap_err() {
            DataError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other}"),
        }
    }
}
