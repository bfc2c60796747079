//! On-disk formats: raw little-endian `f64` fields with a JSON sidecar,
//! CSV text, and the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{KineticError, Result};
use crate::phasegrid::{DistributionField, PhaseGrid};

/// Sidecar of a field file. Values are stored x-cell major: for every
/// spatial cell, its whole velocity slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub d: usize,
    pub nx: usize,
    pub nv: usize,
    pub dx: f64,
    pub dv: f64,
    pub x0: f64,
    pub v0: f64,
    pub time: f64,
}

impl FieldMeta {
    pub fn of(f: &DistributionField) -> Self {
        let g = f.grid;
        Self {
            d: g.d(),
            nx: g.nx(),
            nv: g.nv(),
            dx: g.dx(),
            dv: g.dv(),
            x0: g.x0(),
            v0: g.v0(),
            time: f.time,
        }
    }

    pub fn grid(&self) -> Result<PhaseGrid> {
        PhaseGrid::with_origin(
            self.d,
            self.dx * self.nx as f64,
            self.dv * self.nv as f64,
            self.nx,
            self.nv,
            self.x0,
            self.v0,
        )
    }

    pub fn len(&self) -> usize {
        (self.nx * self.nv).pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn sidecar_path(field: &Path) -> PathBuf {
    field.with_extension("json")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> KineticError + '_ {
    move |e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            KineticError::MissingFile(path.to_path_buf())
        } else {
            KineticError::io(path, e)
        }
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| KineticError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    write_text(path, &(text + "\n"))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| KineticError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes `path` (`.f64`) and its `.json` sidecar.
pub fn write_field(path: &Path, f: &DistributionField) -> Result<()> {
    let bytes: Vec<u8> = f.values.iter().flat_map(|v| v.to_le_bytes()).collect();
    std::fs::write(path, bytes).map_err(io_err(path))?;
    write_json(&sidecar_path(path), &FieldMeta::of(f))
}

pub fn read_field(path: &Path) -> Result<DistributionField> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let meta: FieldMeta = read_json(&sidecar_path(path))?;
    if bytes.len() != 8 * meta.len() {
        return Err(KineticError::Format {
            path: path.to_path_buf(),
            message: format!("{} bytes, sidecar expects {} values", bytes.len(), meta.len()),
        });
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")))
        .collect();
    DistributionField::from_values(meta.grid()?, values, meta.time)
}

/// Version stamped on every schema listed in a manifest.
pub const SCHEMA_VERSION: u32 = 1;

/// Record of one invocation, written last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: BTreeMap<String, String>,
    pub seed: u64,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
    pub schemas: BTreeMap<String, u32>,
    /// Subcommand-specific scalars (convergence horizon, blow-up time, ...).
    #[serde(default)]
    pub summary: BTreeMap<String, serde_json::Value>,
}

pub const MANIFEST: &str = "manifest.json";

impl RunManifest {
    pub fn new(subcommand: &str, config: BTreeMap<String, String>, seed: u64) -> Self {
        Self {
            subcommand: subcommand.into(),
            config,
            seed,
            artifacts: Vec::new(),
            schemas: BTreeMap::new(),
            summary: BTreeMap::new(),
        }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        read_json(&dir.join(MANIFEST))
    }

    pub fn note(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.summary.insert(key.into(), value.into());
    }
}

/// Collects artifacts into an output directory and the manifest.
pub struct Outputs {
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

impl Outputs {
    pub fn create(dir: &Path, manifest: RunManifest) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| KineticError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    fn record(&mut self, name: &str) {
        self.manifest.artifacts.push(name.to_string());
    }

    /// Writes a CSV whose schema is named after the file stem.
    pub fn csv(&mut self, name: &str, text: &str) -> Result<()> {
        write_text(&self.dir.join(name), text)?;
        let schema = name
            .trim_end_matches(".csv")
            .trim_end_matches(|c: char| c.is_ascii_digit())
            .trim_end_matches('_');
        self.manifest.schemas.insert(schema.to_string(), SCHEMA_VERSION);
        self.record(name);
        Ok(())
    }

    pub fn field(&mut self, name: &str, f: &DistributionField) -> Result<()> {
        write_field(&self.dir.join(name), f)?;
        self.manifest.schemas.insert("field".into(), SCHEMA_VERSION);
        self.record(name);
        let side = Path::new(name).with_extension("json");
        self.record(&side.to_string_lossy());
        Ok(())
    }

    /// Writes the manifest; every listed artifact must exist.
    pub fn finish(self) -> Result<RunManifest> {
        for a in &self.manifest.artifacts {
            let p = self.dir.join(a);
            if !p.exists() {
                return Err(KineticError::MissingFile(p));
            }
        }
        write_json(&self.dir.join(MANIFEST), &self.manifest)?;
        Ok(self.manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = PhaseGrid::with_origin(2, 2.0, 1.0, 4, 3, -1.0, -0.5).unwrap();
        let f = DistributionField::from_fn(g, 0.25, |x, v| x[0] + 2.0 * x[1] + v[0] * v[1]);
        let p = dir.path().join("snapshot_0.f64");
        write_field(&p, &f).unwrap();
        let back = read_field(&p).unwrap();
        assert_eq!(back.values, f.values);
        assert_eq!(back.time, 0.25);
        assert!(back.grid.same_as(&g));
        let meta: FieldMeta = read_json(&sidecar_path(&p)).unwrap();
        assert_eq!(std::fs::metadata(&p).unwrap().len() as usize, 8 * meta.len());
    }

    #[test]
    fn truncated_field_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let g = PhaseGrid::new(1, 1.0, 1.0, 4, 4).unwrap();
        let p = dir.path().join("f.f64");
        write_field(&p, &DistributionField::zeros(g)).unwrap();
        std::fs::write(&p, [0u8; 24]).unwrap();
        let err = read_field(&p).unwrap_err();
        assert!(matches!(err, KineticError::Format { .. }));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn missing_file_is_named() {
        let err = read_field(Path::new("/nonexistent/snapshot_3.f64")).unwrap_err();
        assert!(err.to_string().contains("snapshot_3.f64"), "{err}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn manifest_lists_existing_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Outputs::create(dir.path(), RunManifest::new("run", BTreeMap::new(), 1)).unwrap();
        out.csv("observables.csv", "t\n").unwrap();
        let m = out.finish().unwrap();
        assert_eq!(m.artifacts, vec!["observables.csv".to_string()]);
        assert_eq!(RunManifest::load(dir.path()).unwrap(), m);
    }
}
