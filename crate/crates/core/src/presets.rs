//! Named parameter sets for the 20, 120 and 300 mM samples.
//!
//! `-sim` sets are the simulation best fits, `-meas` the directly measured
//! relaxation times. A bare concentration ("120mM") means the `-sim` set.

use serde::{Deserialize, Serialize};

use crate::state::RelaxationParams;
use crate::{Error, Result};

pub const J_HZ: f64 = 209.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: &'static str,
    pub concentration_mm: f64,
    pub t1h: f64,
    pub t2c: f64,
    pub j: f64,
}

impl Preset {
    pub fn params(&self) -> RelaxationParams {
        RelaxationParams {
            t1h: self.t1h,
            t2c: self.t2c,
            j: self.j,
        }
    }
}

const fn preset(name: &'static str, concentration_mm: f64, t1h_ms: f64, t2c_ms: f64) -> Preset {
    Preset {
        name,
        concentration_mm,
        t1h: t1h_ms * 1e-3,
        t2c: t2c_ms * 1e-3,
        j: J_HZ,
    }
}

pub const PRESETS: [Preset; 6] = [
    preset("20mM-sim", 20.0, 7.1, 38.55),
    preset("120mM-sim", 120.0, 1.15, 12.8),
    preset("300mM-sim", 300.0, 0.425, 5.49),
    preset("20mM-meas", 20.0, 12.0, 480.0),
    preset("120mM-meas", 120.0, 1.7, 87.0),
    preset("300mM-meas", 300.0, 0.63, 29.0),
];

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.name).collect()
}

/// Looks up a preset by name, case-insensitively.
pub fn lookup(name: &str) -> Result<Preset> {
    let key = name.trim().to_ascii_lowercase();
    let key = if key.ends_with("-sim") || key.ends_with("-meas") {
        key
    } else {
        format!("{key}-sim")
    };
    PRESETS
        .iter()
        .find(|p| p.name.to_ascii_lowercase() == key)
        .copied()
        .ok_or_else(|| Error::Parameter(format!("unknown preset '{name}' (known: {})", names().join(", "))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aliases_and_values() {
        assert_eq!(lookup("20mM").unwrap().name, "20mM-sim");
        assert_eq!(lookup("300MM-meas").unwrap().t2c, 29e-3);
        let p = lookup("120mM").unwrap().params();
        assert_eq!((p.t1h, p.t2c, p.j), (1.15e-3, 12.8e-3, 209.1));
        assert!(lookup("50mM").is_err());
        for p in PRESETS {
            p.params().validate().unwrap();
        }
    }
}
