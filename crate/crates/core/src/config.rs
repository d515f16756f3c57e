//! Run configuration and the dimensionless unit system.
//!
//! Everything downstream of the parser works in dimensionless units:
//!
//! - lengths are pre-multiplied by the resonant wavevector `k0`, so the
//!   resonant wavelength is `λ0 = 2π` in code units,
//! - frequencies and detunings are in units of the single-atom linewidth
//!   `Γ0` (`Δ = (ω − ω0)/Γ0`),
//! - fields are in units of the incident amplitude `E0` at the beam focus,
//! - the refractive index is dimensionless.
//!
//! Config files use `λ0`-denominated lengths because that is how geometries
//! are normally quoted; the parser converts them on the way in so that no
//! other module ever sees a `λ0` unit.

use serde::{Deserialize, Serialize};

use crate::ensemble::Geometry;

/// Resonant wavelength in code units (`k0 = 1`).
pub const LAMBDA0: f64 = 2.0 * std::f64::consts::PI;

/// Marker describing the unit system; carried in manifests for provenance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitsConvention;

impl UnitsConvention {
    /// Lengths in units of `1/k0`; `λ0 = 2π` exactly.
    pub fn lambda0(&self) -> f64 {
        LAMBDA0
    }
}

/// Default RG cutoff `K_cutoff`.
pub const DEFAULT_K_CUTOFF: f64 = 1.0;
/// Default RG batch size as a fraction of the atom number.
pub const DEFAULT_STEP_FRACTION: f64 = 0.025;
/// Default pair-separation floor, in `1/k0` units.
///
/// Uniform sampling has no exclusion radius; this tiny floor only prevents
/// `1/ρ³` overflow. The fraction of affected pairs is below 1e-7 at every
/// density studied.
pub const DEFAULT_RHO_MIN: f64 = 1e-3;

/// Linear solver backend selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SolverMethod {
    /// One LU factorization per detuning (robust default).
    #[default]
    Lu,
    /// Complex-symmetric Bunch-Kaufman factorization per detuning.
    SymLu,
    /// One non-Hermitian eigendecomposition, then a diagonal resolvent per
    /// detuning. Rejected at runtime if the eigenvector matrix is too
    /// ill-conditioned.
    Eigen,
    /// One Hessenberg reduction, then an O(N²) shifted solve per detuning.
    /// The reduction runs in single precision and every solution is refined
    /// to, and verified at, the double-precision residual tolerance.
    Hessenberg,
}

/// Detuning grid in units of `Γ0`, strictly increasing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetuningGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl DetuningGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.min + step * i as f64).collect()
    }
}

/// Fully validated run configuration, in dimensionless units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Sample geometry (lengths in `1/k0`).
    pub geometry: Geometry,
    /// Beam waist at focus, in `1/k0`.
    pub waist: f64,
    /// Dimensionless density `η = N/(V k0³)`.
    pub eta: f64,
    pub detuning: DetuningGrid,
    /// Number of random atomic configurations to average over.
    pub configs: usize,
    pub master_seed: u64,
    pub k_cutoff: f64,
    pub step_fraction: f64,
    pub solver_method: SolverMethod,
    pub rho_min: f64,
    /// Output directory for sweep products.
    pub out_dir: std::path::PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config is not valid TOML: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("missing key `{0}`")]
    MissingKey(&'static str),
    #[error("key `{key}`: {reason}")]
    OutOfRange { key: &'static str, reason: String },
    #[error("key `geometry.type`: unknown geometry `{0}` (expected `cylinder` or `sphere`)")]
    UnknownGeometry(String),
}

fn out_of_range(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::OutOfRange { key, reason: reason.into() }
}

// Raw on-disk schema. Lengths here are in units of λ0.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    geometry: Option<RawGeometry>,
    beam: Option<RawBeam>,
    density: Option<RawDensity>,
    detuning: Option<RawDetuning>,
    runs: Option<RawRuns>,
    rg: Option<RawRg>,
    solver: Option<RawSolver>,
    sampling: Option<RawSampling>,
    output: Option<RawOutput>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    #[serde(rename = "type")]
    kind: String,
    radius_lambda0: Option<f64>,
    thickness_lambda0: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBeam {
    waist_lambda0: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDensity {
    eta: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetuning {
    min: Option<f64>,
    max: Option<f64>,
    count: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRuns {
    configs: Option<usize>,
    master_seed: Option<u64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRg {
    cutoff: Option<f64>,
    step_fraction: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    method: Option<SolverMethod>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSampling {
    rho_min: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
}

/// Parse and validate a TOML run configuration.
///
/// `λ0`-denominated keys are converted to dimensionless units here; optional
/// keys receive the documented defaults (`rg.cutoff = 1`,
/// `rg.step_fraction = 0.025`, `sampling.rho_min = 1e-3`, `solver.method =
/// "lu"`).
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text)?;

    let geo = raw.geometry.ok_or(ConfigError::MissingKey("geometry"))?;
    let geometry = match geo.kind.as_str() {
        "cylinder" => {
            let radius = geo
                .radius_lambda0
                .ok_or(ConfigError::MissingKey("geometry.radius_lambda0"))?;
            let thickness = geo
                .thickness_lambda0
                .ok_or(ConfigError::MissingKey("geometry.thickness_lambda0"))?;
            if radius <= 0.0 {
                return Err(out_of_range("geometry.radius_lambda0", "must be > 0"));
            }
            if thickness <= 0.0 {
                return Err(out_of_range("geometry.thickness_lambda0", "must be > 0"));
            }
            Geometry::Cylinder { radius: radius * LAMBDA0, thickness: thickness * LAMBDA0 }
        }
        "sphere" => {
            let radius = geo
                .radius_lambda0
                .ok_or(ConfigError::MissingKey("geometry.radius_lambda0"))?;
            if radius <= 0.0 {
                return Err(out_of_range("geometry.radius_lambda0", "must be > 0"));
            }
            if geo.thickness_lambda0.is_some() {
                return Err(out_of_range(
                    "geometry.thickness_lambda0",
                    "not meaningful for a sphere",
                ));
            }
            Geometry::Sphere { radius: radius * LAMBDA0 }
        }
        other => return Err(ConfigError::UnknownGeometry(other.to_string())),
    };

    let waist_lambda0 = raw
        .beam
        .and_then(|b| b.waist_lambda0)
        .ok_or(ConfigError::MissingKey("beam.waist_lambda0"))?;
    if waist_lambda0 <= 0.0 {
        return Err(out_of_range("beam.waist_lambda0", "must be > 0"));
    }
    if waist_lambda0 < 1.5 {
        // The paraxial drive degrades for tight focusing; the run proceeds.
        eprintln!(
            "warning: beam.waist_lambda0 = {waist_lambda0} < 1.5; paraxial drive is questionable"
        );
    }

    let eta = raw
        .density
        .and_then(|d| d.eta)
        .ok_or(ConfigError::MissingKey("density.eta"))?;
    if !(eta > 0.0) {
        return Err(out_of_range("density.eta", format!("must be > 0, got {eta}")));
    }

    let det = raw.detuning.ok_or(ConfigError::MissingKey("detuning"))?;
    let detuning = DetuningGrid {
        min: det.min.ok_or(ConfigError::MissingKey("detuning.min"))?,
        max: det.max.ok_or(ConfigError::MissingKey("detuning.max"))?,
        count: det.count.ok_or(ConfigError::MissingKey("detuning.count"))?,
    };
    if detuning.count == 0 {
        return Err(out_of_range("detuning.count", "must be >= 1"));
    }
    if detuning.count > 1 && detuning.max <= detuning.min {
        return Err(out_of_range("detuning.max", "grid must be strictly increasing"));
    }

    let runs = raw.runs.ok_or(ConfigError::MissingKey("runs"))?;
    let configs = runs.configs.ok_or(ConfigError::MissingKey("runs.configs"))?;
    if configs == 0 {
        return Err(out_of_range("runs.configs", "must be >= 1"));
    }
    let master_seed = runs.master_seed.ok_or(ConfigError::MissingKey("runs.master_seed"))?;

    let rg = raw.rg.unwrap_or_default();
    let k_cutoff = rg.cutoff.unwrap_or(DEFAULT_K_CUTOFF);
    if !(k_cutoff > 0.0) {
        return Err(out_of_range("rg.cutoff", "must be > 0"));
    }
    let step_fraction = rg.step_fraction.unwrap_or(DEFAULT_STEP_FRACTION);
    if !(step_fraction > 0.0 && step_fraction <= 0.5) {
        return Err(out_of_range("rg.step_fraction", "must lie in (0, 0.5]"));
    }

    let solver_method = raw.solver.unwrap_or_default().method.unwrap_or_default();

    let rho_min = raw.sampling.unwrap_or_default().rho_min.unwrap_or(DEFAULT_RHO_MIN);
    if !(rho_min >= 0.0) {
        return Err(out_of_range("sampling.rho_min", "must be >= 0"));
    }

    let out_dir = raw.output.unwrap_or_default().dir.unwrap_or_else(|| "out".to_string());

    Ok(RunConfig {
        geometry,
        waist: waist_lambda0 * LAMBDA0,
        eta,
        detuning,
        configs,
        master_seed,
        k_cutoff,
        step_fraction,
        solver_method,
        rho_min,
        out_dir: out_dir.into(),
    })
}

/// Render a config back to TOML. `parse_config(render_config(c)) == c`.
pub fn render_config(config: &RunConfig) -> String {
    let geometry = match config.geometry {
        Geometry::Cylinder { radius, thickness } => RawGeometry {
            kind: "cylinder".into(),
            radius_lambda0: Some(radius / LAMBDA0),
            thickness_lambda0: Some(thickness / LAMBDA0),
        },
        Geometry::Sphere { radius } => RawGeometry {
            kind: "sphere".into(),
            radius_lambda0: Some(radius / LAMBDA0),
            thickness_lambda0: None,
        },
    };
    let raw = RawConfig {
        geometry: Some(geometry),
        beam: Some(RawBeam { waist_lambda0: Some(config.waist / LAMBDA0) }),
        density: Some(RawDensity { eta: Some(config.eta) }),
        detuning: Some(RawDetuning {
            min: Some(config.detuning.min),
            max: Some(config.detuning.max),
            count: Some(config.detuning.count),
        }),
        runs: Some(RawRuns { configs: Some(config.configs), master_seed: Some(config.master_seed) }),
        rg: Some(RawRg {
            cutoff: Some(config.k_cutoff),
            step_fraction: Some(config.step_fraction),
        }),
        solver: Some(RawSolver { method: Some(config.solver_method) }),
        sampling: Some(RawSampling { rho_min: Some(config.rho_min) }),
        output: Some(RawOutput { dir: Some(config.out_dir.display().to_string()) }),
    };
    toml::to_string_pretty(&raw).expect("config serialization cannot fail")
}
