//! On-disk run configuration.

use std::path::{Path, PathBuf};

use kerrcat::dynamics::InitialState;
use kerrcat::model::{ExperimentUnits, KappaConvention};
use kerrcat::winding::Route;
use kerrcat::ModelParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Operating point in laboratory units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// K/2π in MHz.
    pub kerr_mhz: f64,
    /// P/2π in MHz.
    pub two_photon_mhz: f64,
    /// κ in 1/µs, or cyclic MHz with `kappa_angular`.
    pub kappa: f64,
    /// ε/2π in MHz.
    pub drive_mhz: f64,
    /// Δ/2π in MHz.
    pub delta_mhz: f64,
    pub kappa_angular: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let d = ExperimentUnits::kerr_cat_device();
        Self {
            kerr_mhz: d.kerr_mhz,
            two_photon_mhz: d.two_photon_mhz,
            kappa: d.kappa,
            drive_mhz: d.drive_mhz,
            delta_mhz: d.delta_mhz,
            kappa_angular: false,
        }
    }
}

impl ModelConfig {
    pub fn params(&self) -> Result<ModelParams, CliError> {
        let conv = if self.kappa_angular {
            KappaConvention::Angular
        } else {
            KappaConvention::PlainRate
        };
        ExperimentUnits {
            kerr_mhz: self.kerr_mhz,
            two_photon_mhz: self.two_photon_mhz,
            kappa: self.kappa,
            drive_mhz: self.drive_mhz,
            delta_mhz: self.delta_mhz,
        }
        .to_params(conv)
        .map_err(|e| CliError::Config(format!("model: {e}")))
    }
}

/// `points` evenly spaced values from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Grid {
    pub const fn new(start: f64, stop: f64, points: usize) -> Self {
        Self { start, stop, points }
    }

    pub fn values(&self, name: &str) -> Result<Vec<f64>, CliError> {
        if self.points == 0 {
            return Err(CliError::Config(format!(
                "grid `{name}` is empty; give it at least one point (e.g. \"points\": 21)"
            )));
        }
        if !self.start.is_finite() || !self.stop.is_finite() {
            return Err(CliError::Config(format!("grid `{name}` has non-finite bounds")));
        }
        Ok(kerrcat::dynamics::linspace(self.start, self.stop, self.points))
    }
}

/// (ε, Δ) grid in rad/µs for the reduced-model sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub eps: Grid,
    pub delta: Grid,
    /// Also solve the 4×4 generator numerically.
    pub numeric: bool,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            eps: Grid::new(-0.02, 0.02, 41),
            delta: Grid::new(-3.0, 3.0, 61),
            numeric: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpMapConfig {
    /// ε slices in rad/µs.
    pub eps: Grid,
    /// Δ ≥ 0 scan resolution per slice.
    pub n_delta: usize,
    /// Upper end of the Δ scan in rad/µs.
    pub delta_max: Option<f64>,
}

impl Default for EpMapConfig {
    fn default() -> Self {
        Self {
            eps: Grid::new(-0.02, 0.02, 201),
            n_delta: 4000,
            delta_max: None,
        }
    }
}

/// A winding contour in the (ε, Δ) plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ContourSpec {
    /// Absolute circle, rad/µs.
    Circle { center: (f64, f64), radius: f64 },
    /// Absolute closed polyline, rad/µs.
    Polyline { vertices: Vec<(f64, f64)> },
    /// Circle with center `(a·ε₃, b·Δ₃)` and radius `r·ε₃`, where (ε₃, Δ₃)
    /// are the third-order point magnitudes.
    Scaled { center: (f64, f64), radius: f64 },
    /// Circle of radius `r·ε₃` around the ε = 0 double-root point.
    Lep2 { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindingConfig {
    pub contours: Vec<ContourSpec>,
    pub samples: usize,
    pub route: Route,
}

impl Default for WindingConfig {
    fn default() -> Self {
        let mut contours: Vec<ContourSpec> = [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)]
            .into_iter()
            .map(|center| ContourSpec::Scaled { center, radius: 0.3 })
            .collect();
        contours.push(ContourSpec::Scaled {
            center: (1.5, 0.0),
            radius: 0.3,
        });
        contours.push(ContourSpec::Lep2 { radius: 0.01 });
        Self {
            contours,
            samples: kerrcat::winding::DEFAULT_SAMPLES,
            route: Route::Invariants,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FidelityConfig {
    /// Δ/2π in MHz.
    pub delta_mhz: Grid,
    /// Times in µs.
    pub t_us: Grid,
    pub initial: Vec<InitialState>,
    /// Run with the configured drive (`true`) and/or with ε = 0 (`false`).
    pub drive_on: Vec<bool>,
}

impl Default for FidelityConfig {
    fn default() -> Self {
        Self {
            delta_mhz: Grid::new(-0.5, 0.5, 21),
            t_us: Grid::new(0.0, 60.0, 121),
            initial: vec![InitialState::CatPlus, InitialState::Coherent],
            drive_on: vec![true, false],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WignerState {
    SteadyState,
    CatPlus,
    CatMinus,
    Coherent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WignerConfig {
    pub state: WignerState,
    pub x: Grid,
    pub p: Grid,
}

impl Default for WignerConfig {
    fn default() -> Self {
        Self {
            state: WignerState::SteadyState,
            x: Grid::new(-3.5, 3.5, 71),
            p: Grid::new(-3.5, 3.5, 71),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SteadyStateConfig {
    /// Also dump the full Liouvillian spectrum.
    pub spectrum: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Allowed |raw − round(raw)| for a winding number.
    pub winding_quantization: f64,
    /// Closed-form versus numeric eigenvalue agreement.
    pub spectral: f64,
    /// Minimum fidelity over the sweep.
    pub fidelity_min: f64,
    /// Minimum fidelity at the last time.
    pub fidelity_final: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            winding_quantization: kerrcat::winding::QUANTIZATION_TOL,
            spectral: 1e-9,
            fidelity_min: 0.93,
            fidelity_final: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    /// Fock truncation for full-space commands.
    pub dim: usize,
    pub out: PathBuf,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub seed: u64,
    pub spectrum: SpectrumConfig,
    pub ep_map: EpMapConfig,
    pub winding: WindingConfig,
    pub fidelity: FidelityConfig,
    pub wigner: WignerConfig,
    pub steady_state: SteadyStateConfig,
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            dim: kerrcat::fock::DEFAULT_DIM,
            out: PathBuf::from("out"),
            workers: 0,
            seed: 2024,
            spectrum: SpectrumConfig::default(),
            ep_map: EpMapConfig::default(),
            winding: WindingConfig::default(),
            fidelity: FidelityConfig::default(),
            wigner: WignerConfig::default(),
            steady_state: SteadyStateConfig::default(),
            tolerances: Tolerances::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the configuration with the worker count and output
    /// directory blanked, so neither changes output bytes.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.workers = 0;
        canon.out = PathBuf::new();
        let digest = Sha256::digest(serde_json::to_vec(&canon).expect("config serializes"));
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model.params()?;
        if self.dim < 2 {
            return Err(CliError::Config("dim must be at least 2".into()));
        }
        Ok(())
    }
}
