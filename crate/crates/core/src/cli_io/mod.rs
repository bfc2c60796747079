//! Configuration, file formats and run orchestration behind the CLI.

mod config;
mod files;
pub mod orchestrate;

pub use config::{parse_config, parse_str, Config, MonoSettings, ParticleSettings, PicardSettings, KEYS};
pub use files::{
    read_field, read_json, read_text, sidecar_path, write_field, write_json, write_text, FieldMeta, Outputs,
    RunManifest, MANIFEST, SCHEMA_VERSION,
};

/// Caps the worker pool at `KINETIC_THREADS` when it is set.
pub fn init_threads_from_env() -> crate::Result<Option<usize>> {
    let Ok(raw) = std::env::var("KINETIC_THREADS") else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| crate::KineticError::Validation(format!("KINETIC_THREADS must be a positive integer, got `{raw}`")))?;
    // a pool built earlier in the process keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(Some(n))
}
