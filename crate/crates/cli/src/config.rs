use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qsl_core::geometry::DEFAULT_NOISE_FLOOR;
use qsl_core::ingest::{DEFAULT_DEGREE, DEFAULT_WINDOW};
use qsl_core::presets;
use qsl_core::quadrature::QuadConfig;
use qsl_core::{BlochVector, Error, RelaxationParams, Result};

pub const OUT_DIR_ENV: &str = "QSL_OUT_DIR";
pub const MIN_POINTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub x0: f64,
    pub z0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub t_max: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Smoothing {
    pub window: usize,
    pub degree: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub params: RelaxationParams,
    pub initial_state: InitialState,
    pub grid: Grid,
    pub quadrature: Tolerances,
    pub smoothing: Smoothing,
    pub crossover_noise_floor: f64,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let q = QuadConfig::default();
        Self {
            params: presets::lookup("20mM-sim").expect("built-in preset").params(),
            initial_state: InitialState {
                x0: std::f64::consts::FRAC_1_SQRT_2,
                z0: std::f64::consts::FRAC_1_SQRT_2,
            },
            grid: Grid {
                t_max: 0.15,
                n_points: 2000,
            },
            quadrature: Tolerances {
                rel_tol: q.rel_tol,
                abs_tol: q.abs_tol,
            },
            smoothing: Smoothing {
                window: DEFAULT_WINDOW,
                degree: DEFAULT_DEGREE,
            },
            crossover_noise_floor: DEFAULT_NOISE_FLOOR,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Parameter(format!("config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.initial_state()?;
        if !(self.grid.t_max.is_finite() && self.grid.t_max > 0.0) {
            return Err(Error::Parameter(format!("t_max must be positive, got {}", self.grid.t_max)));
        }
        if self.grid.n_points < MIN_POINTS {
            return Err(Error::Parameter(format!(
                "n_points must be at least {MIN_POINTS}, got {}",
                self.grid.n_points
            )));
        }
        self.quad().validate()?;
        if !(self.crossover_noise_floor >= 0.0) {
            return Err(Error::Parameter("crossover_noise_floor must be >= 0".into()));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> Result<BlochVector> {
        BlochVector::xz(self.initial_state.x0, self.initial_state.z0)
            .map_err(|e| Error::Parameter(format!("initial_state: {e}")))
    }

    pub fn quad(&self) -> QuadConfig {
        QuadConfig {
            rel_tol: self.quadrature.rel_tol,
            abs_tol: self.quadrature.abs_tol,
            ..QuadConfig::default()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        qsl_core::series::linspace(0.0, self.grid.t_max, self.grid.n_points)
    }

    /// Explicit setting, then `QSL_OUT_DIR`, then `./qsl-out`.
    pub fn resolve_output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("qsl-out"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_roundtrip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&json).unwrap(), c);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"grid": {"t_max": 0.05, "n_points": 100}}"#).unwrap();
        assert_eq!(c.grid.n_points, 100);
        assert_eq!(c.params, RunConfig::default().params);
        assert!(serde_json::from_str::<RunConfig>(r#"{"gird": {}}"#).is_err());
    }

    #[test]
    fn invariants() {
        let mut c = RunConfig::default();
        c.grid.t_max = 0.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.grid.n_points = 15;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.quadrature.rel_tol = 0.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.initial_state.x0 = 0.9;
        assert!(c.validate().is_err());
    }
}
