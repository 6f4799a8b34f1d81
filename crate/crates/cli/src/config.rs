use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wki_core::direct_scattering::ForwardConfig;
use wki_core::lax::{E2Config, Profile};
use wki_core::reconstruction::ReconstructionConfig;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Forward,
    Evolve,
    Inverse,
    Roundtrip,
    ComparePde,
    Soliton,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Forward => "forward",
            Pipeline::Evolve => "evolve",
            Pipeline::Inverse => "inverse",
            Pipeline::Roundtrip => "roundtrip",
            Pipeline::ComparePde => "compare-pde",
            Pipeline::Soliton => "soliton",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub half_width: f64,
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            half_width: 20.0,
            points: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    pub points: usize,
    /// Scale `κ` of the circle map `z = -κ·cot(φ/2)`.
    pub scale: f64,
    pub z_min: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            points: 1024,
            scale: 0.5,
            z_min: 0.125,
        }
    }
}

/// Either a named family or a CSV file with columns `x,re,im`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialSpec {
    File { file: PathBuf },
    Family(Profile),
}

impl Default for PotentialSpec {
    fn default() -> Self {
        PotentialSpec::Family(Profile::Gaussian {
            amplitude: 0.05,
            width: 1.0,
            center: 0.0,
            wavenumber: 0.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub times: Vec<f64>,
    /// Zero selects the largest stable step `cfl·h²`.
    pub dt: f64,
    pub cfl: f64,
    pub blowup_guard: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig {
            times: vec![0.0],
            dt: 0.0,
            cfl: 0.2,
            blowup_guard: 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolitonConfig {
    pub xi: f64,
    pub eta: f64,
    pub t: f64,
}

impl Default for SolitonConfig {
    fn default() -> Self {
        SolitonConfig {
            xi: 3.0,
            eta: 1.0,
            t: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InverseConfig {
    /// Reflection CSV (`z,r_re,r_im`) written by `forward`.
    pub data: Option<PathBuf>,
    /// Time the data refers to.
    pub data_time: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoundtripConfig {
    /// Repeat at doubled spatial and spectral resolution.
    pub convergence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DumpConfig {
    /// Write `a`, `b` on a uniform `λ` grid.
    pub lambda: bool,
    pub lambda_max: f64,
    pub lambda_points: usize,
    /// Write the gauge fields `Q, B, H, p`.
    pub akns: bool,
}

impl Default for DumpConfig {
    fn default() -> Self {
        DumpConfig {
            lambda: false,
            lambda_max: 10.0,
            lambda_points: 401,
            akns: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub pipeline: Option<Pipeline>,
    pub output: PathBuf,
    pub grid: GridConfig,
    pub spectral: SpectralConfig,
    pub potential: PotentialSpec,
    pub time: TimeConfig,
    pub forward: ForwardConfig,
    pub reconstruction: ReconstructionConfig,
    pub e2: E2Config,
    pub soliton: SolitonConfig,
    pub inverse: InverseConfig,
    pub roundtrip: RoundtripConfig,
    pub dump: DumpConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            pipeline: None,
            output: PathBuf::from("wki-out"),
            grid: GridConfig::default(),
            spectral: SpectralConfig::default(),
            potential: PotentialSpec::default(),
            time: TimeConfig::default(),
            forward: ForwardConfig::default(),
            reconstruction: ReconstructionConfig::default(),
            e2: E2Config::default(),
            soliton: SolitonConfig::default(),
            inverse: InverseConfig::default(),
            roundtrip: RoundtripConfig::default(),
            dump: DumpConfig::default(),
        }
    }
}

/// Parses the right-hand side of `key=value` as a TOML value, falling back
/// to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| {
        CliError::Input(format!(
            "override `{assignment}` is not of the form key=value"
        ))
    })?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Input(format!("bad override key `{key}`")));
    }
    let mut node = table;
    for part in &path[..path.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Input(format!("`{part}` in `{key}` is not a table")))?;
    }
    node.insert(path[path.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

/// Reads the optional config file, applies overrides in order and resolves
/// relative paths against the config file's directory.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
            toml::from_str::<toml::Table>(&text)
                .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let mut cfg: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Input(format!("config: {e}")))?;
    if let Some(base) = path.and_then(Path::parent) {
        if let PotentialSpec::File { file } = &mut cfg.potential {
            if file.is_relative() {
                *file = base.join(&*file);
            }
        }
        if let Some(data) = &mut cfg.inverse.data {
            if data.is_relative() {
                *data = base.join(&*data);
            }
        }
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn check(&self) -> Result<(), CliError> {
        let positive = [
            ("time.cfl", self.time.cfl),
            ("time.blowup_guard", self.time.blowup_guard),
            ("forward.commutator_bound", self.forward.commutator_bound),
            (
                "reconstruction.fixed_point_tolerance",
                self.reconstruction.fixed_point_tolerance,
            ),
            (
                "reconstruction.solver.tolerance",
                self.reconstruction.solver.tolerance,
            ),
            ("e2.guard", self.e2.guard),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CliError::Input(format!("{name} must be positive, got {v}")));
            }
        }
        if self.time.dt < 0.0 || !self.time.dt.is_finite() {
            return Err(CliError::Input(format!(
                "time.dt must be nonnegative, got {}",
                self.time.dt
            )));
        }
        if self
            .time
            .times
            .iter()
            .any(|t| !(*t >= 0.0) || !t.is_finite())
        {
            return Err(CliError::Input(
                "time.times must be finite and nonnegative".into(),
            ));
        }
        if let PotentialSpec::File { file } = &self.potential {
            if !file.exists() {
                return Err(CliError::Input(format!(
                    "potential file {} does not exist",
                    file.display()
                )));
            }
        }
        if let Some(d) = &self.inverse.data {
            if !d.exists() {
                return Err(CliError::Input(format!(
                    "scattering data {} does not exist",
                    d.display()
                )));
            }
        }
        Ok(())
    }
}
