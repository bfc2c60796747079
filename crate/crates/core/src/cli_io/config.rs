//! Flat `key = value` configuration with documented defaults.
//!
//! Blank lines and `#` comments are ignored. Every key has a default, so an
//! empty file is the reference setup; unknown and repeated keys are errors.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{KineticError, Result};
use crate::particles::{Integrator, Psi, Shape};
use crate::phasegrid::PhaseGrid;
use crate::remap::Limiter;
use crate::solver::{InitialCondition, PatchSpec, SolverConfig, Splitting, TransportScheme};

/// `(key, default, description)`; an empty default means "derived".
pub const KEYS: &[(&str, &str, &str)] = &[
    ("d", "1", "spatial and velocity dimension, 1 or 2"),
    ("gamma", "1.0", "alignment strength"),
    ("lx", "20", "spatial box length"),
    ("lv", "6", "velocity box length"),
    ("x0", "0", "lower spatial edge"),
    ("v0", "", "lower velocity edge; default -lv/2"),
    ("dx", "0.05", "spatial cell size"),
    ("dv", "0.01", "velocity cell size"),
    ("dt", "1e-4", "time step"),
    ("t_final", "3.0", "final time"),
    ("patch_side", "2", "side of the initial uniform patch"),
    ("patch_x", "11", "patch center in x, every axis"),
    ("patch_v", "-0.3", "patch center in v, every axis"),
    ("patch_height", "", "patch density; default unit mass"),
    ("patch_smoothing", "0", "Jacobi smoothing passes on the patch"),
    ("splitting", "strang", "lie or strang"),
    ("limiter", "superbee", "donor, minmod, vanleer, mc or superbee"),
    ("transport", "lattice", "lattice or remap"),
    ("snapshot_stride", "3000", "steps between stored snapshots"),
    ("sample_stride", "100", "steps between observable rows"),
    ("p_list", "2", "comma separated Lp exponents"),
    ("seed", "42", "seed for particle sampling"),
    ("picard_intervals", "10", "time slices of the Picard stack"),
    ("picard_t_loc", "0.05", "Picard horizon"),
    ("picard_tol", "1e-10", "sup-norm increment tolerance"),
    ("picard_max_iter", "40", "iterations before halving the horizon"),
    ("picard_halvings", "3", "horizon halvings before giving up"),
    ("particle_counts", "1000,10000,100000", "ensemble sizes N"),
    ("particle_shape", "indicator", "indicator or triangular"),
    ("particle_radius", "1", "support radius of psi"),
    ("particle_dt", "1e-3", "particle time step"),
    ("particle_integrator", "contact", "contact or rk4"),
    ("particle_bin", "10", "coarsening factor of the comparison grid"),
    ("mono_markers", "1000", "number of mono-kinetic markers"),
    ("mono_x_min", "-0.5", "left end of the initial density support"),
    ("mono_x_max", "0.5", "right end of the initial density support"),
    ("mono_slope", "-1", "u0(x) = mono_offset + mono_slope x"),
    ("mono_offset", "0", "u0(x) = mono_offset + mono_slope x"),
    ("mono_dt", "1e-3", "marker time step"),
    ("mono_t_final", "2", "stop time if no crossing occurs"),
    ("mono_width", "0", "velocity width of the deposited field; 0 skips it"),
];

/// Resolved configuration: every key with its value and source line
/// (`0` for defaults).
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<String, (String, usize)>,
}

impl Default for Config {
    fn default() -> Self {
        let values = KEYS
            .iter()
            .map(|(k, v, _)| (k.to_string(), (v.to_string(), 0)))
            .collect();
        Self { values }
    }
}

pub fn parse_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            KineticError::MissingFile(path.to_path_buf())
        } else {
            KineticError::io(path, e)
        }
    })?;
    parse_str(&text)
}

pub fn parse_str(text: &str) -> Result<Config> {
    let mut cfg = Config::default();
    let mut seen = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| KineticError::Parse {
            line,
            message: format!("expected `key = value`, got `{body}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !cfg.values.contains_key(key) {
            return Err(KineticError::Parse {
                line,
                message: format!("unknown key `{key}`"),
            });
        }
        if let Some(first) = seen.insert(key.to_string(), line) {
            return Err(KineticError::Parse {
                line,
                message: format!("key `{key}` already set on line {first}"),
            });
        }
        cfg.values.insert(key.to_string(), (value.to_string(), line));
    }
    Ok(cfg)
}

/// Picard oracle settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardSettings {
    pub intervals: usize,
    pub t_loc: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub halvings: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSettings {
    pub counts: Vec<usize>,
    pub psi: Psi,
    pub dt: f64,
    pub integrator: Integrator,
    pub bin: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonoSettings {
    pub markers: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub slope: f64,
    pub offset: f64,
    pub dt: f64,
    pub t_final: f64,
    pub width: f64,
}

impl Config {
    /// Overrides one key, as if it appeared in the file.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                slot.0 = value.into();
                Ok(())
            }
            None => Err(KineticError::Parse {
                line: 0,
                message: format!("unknown key `{key}`"),
            }),
        }
    }

    pub fn raw(&self, key: &str) -> &str {
        &self.values[key].0
    }

    /// Every key with its resolved value, derived defaults filled in.
    pub fn snapshot(&self) -> BTreeMap<String, String> {
        let mut out: BTreeMap<String, String> = self.values.iter().map(|(k, (v, _))| (k.clone(), v.clone())).collect();
        if out["v0"].is_empty() {
            let lv: f64 = self.get("lv").unwrap_or(f64::NAN);
            out.insert("v0".into(), format!("{}", -0.5 * lv));
        }
        out
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let (v, line) = &self.values[key];
        v.parse().map_err(|e: T::Err| KineticError::Parse {
            line: *line,
            message: format!("bad value `{v}` for `{key}`: {e}"),
        })
    }

    fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if self.raw(key).is_empty() {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }

    fn get_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        let (v, line) = &self.values[key];
        v.split(',')
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse().map_err(|e: T::Err| KineticError::Parse {
                    line: *line,
                    message: format!("bad entry `{s}` in `{key}`: {e}"),
                })
            })
            .collect()
    }

    pub fn seed(&self) -> Result<u64> {
        self.get("seed")
    }

    pub fn grid(&self) -> Result<PhaseGrid> {
        let d: usize = self.get("d")?;
        let lx: f64 = self.get("lx")?;
        let lv: f64 = self.get("lv")?;
        let dx: f64 = self.get("dx")?;
        let dv: f64 = self.get("dv")?;
        let x0: f64 = self.get("x0")?;
        let v0: f64 = self.get_opt("v0")?.unwrap_or(-0.5 * lv);
        let cells = |l: f64, h: f64, name: &str| -> Result<usize> {
            let n = l / h;
            if !(h > 0.0) || n.round() < 1.0 || (n - n.round()).abs() > 1e-6 * n {
                return Err(KineticError::Validation(format!("{name}: box length is not a whole number of cells")));
            }
            Ok(n.round() as usize)
        };
        PhaseGrid::with_origin(d, lx, lv, cells(lx, dx, "dx")?, cells(lv, dv, "dv")?, x0, v0)
    }

    pub fn patch(&self) -> Result<PatchSpec> {
        let px: f64 = self.get("patch_x")?;
        let pv: f64 = self.get("patch_v")?;
        Ok(PatchSpec {
            center_x: [px, px],
            center_v: [pv, pv],
            side: self.get("patch_side")?,
            height: self.get_opt("patch_height")?,
            smoothing: self.get("patch_smoothing")?,
        })
    }

    /// Solver configuration, validated (CFL included).
    pub fn solver(&self) -> Result<SolverConfig> {
        let c = SolverConfig {
            grid: self.grid()?,
            gamma: self.get("gamma")?,
            dt: self.get("dt")?,
            t_final: self.get("t_final")?,
            splitting: self.get::<Splitting>("splitting")?,
            limiter: self.get::<Limiter>("limiter")?,
            transport: self.get::<TransportScheme>("transport")?,
            snapshot_stride: self.get("snapshot_stride")?,
            sample_stride: self.get("sample_stride")?,
            initial: InitialCondition::Patch(self.patch()?),
            p_list: self.get_list("p_list")?,
            record_nonlinear: true,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn picard(&self) -> Result<PicardSettings> {
        Ok(PicardSettings {
            intervals: self.get("picard_intervals")?,
            t_loc: self.get("picard_t_loc")?,
            tol: self.get("picard_tol")?,
            max_iter: self.get("picard_max_iter")?,
            halvings: self.get("picard_halvings")?,
        })
    }

    pub fn particles(&self) -> Result<ParticleSettings> {
        let s = ParticleSettings {
            counts: self.get_list("particle_counts")?,
            psi: Psi {
                shape: self.get::<Shape>("particle_shape")?,
                radius: self.get("particle_radius")?,
            },
            dt: self.get("particle_dt")?,
            integrator: self.get::<Integrator>("particle_integrator")?,
            bin: self.get("particle_bin")?,
        };
        if s.counts.is_empty() || s.counts.contains(&0) {
            return Err(KineticError::Validation("particle_counts must list positive sizes".into()));
        }
        if !(s.dt > 0.0) || s.bin == 0 {
            return Err(KineticError::Validation("particle_dt and particle_bin must be positive".into()));
        }
        Ok(s)
    }

    pub fn mono(&self) -> Result<MonoSettings> {
        let s = MonoSettings {
            markers: self.get("mono_markers")?,
            x_min: self.get("mono_x_min")?,
            x_max: self.get("mono_x_max")?,
            slope: self.get("mono_slope")?,
            offset: self.get("mono_offset")?,
            dt: self.get("mono_dt")?,
            t_final: self.get("mono_t_final")?,
            width: self.get("mono_width")?,
        };
        if !(s.dt > 0.0 && s.t_final > 0.0) {
            return Err(KineticError::Validation("mono_dt and mono_t_final must be positive".into()));
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_reference_setup() {
        let c = parse_str("").unwrap().solver().unwrap();
        let t = SolverConfig::reference();
        assert_eq!(c.grid, t.grid);
        assert_eq!((c.gamma, c.dt, c.t_final), (1.0, 1e-4, 3.0));
        assert_eq!(c.initial, t.initial);
    }

    #[test]
    fn override_and_comments() {
        let c = parse_str("# strong\ngamma = 5.0  # override\n\n").unwrap();
        assert_eq!(c.solver().unwrap().gamma, 5.0);
    }

    #[test]
    fn cfl_violation_is_a_validation_error() {
        let err = parse_str("dt = 1.0").unwrap().solver().unwrap_err();
        assert!(matches!(err, KineticError::Validation(ref m) if m.contains("CFL")), "{err}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_str("gamma = 1\nbogus = 2").unwrap_err();
        assert!(matches!(err, KineticError::Parse { line: 2, .. }), "{err}");
        let err = parse_str("\n\njust words").unwrap_err();
        assert!(matches!(err, KineticError::Parse { line: 3, .. }));
        let err = parse_str("gamma = 1\ngamma = 2").unwrap_err();
        assert!(matches!(err, KineticError::Parse { line: 2, .. }));
        let err = parse_str("dt = fast").unwrap().solver().unwrap_err();
        assert!(matches!(err, KineticError::Parse { line: 1, .. }));
    }

    #[test]
    fn snapshot_resolves_derived_defaults() {
        let s = parse_str("lv = 4").unwrap().snapshot();
        assert_eq!(s["v0"], "-2");
        assert_eq!(s.len(), KEYS.len());
    }

    #[test]
    fn lists_parse() {
        let c = parse_str("particle_counts = 10, 20\np_list = 1,2,4").unwrap();
        assert_eq!(c.particles().unwrap().counts, vec![10, 20]);
        assert_eq!(c.solver().unwrap().p_list, vec![1.0, 2.0, 4.0]);
    }
}
