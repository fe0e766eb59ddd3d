//! ℓ1-coherence witness of non-Markovian dynamics.
//!
//! Under incoherent (Markovian) dynamics the ℓ1 coherence cannot grow, so any
//! revival of C(ρ_t)/C(ρ_0) above a noise threshold flags memory effects.

use serde::{Deserialize, Serialize};

use crate::series::TimeSeries;
use crate::state::BlochVector;
use crate::{Error, Result};

pub const DEFAULT_REVIVAL_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovianityVerdict {
    pub is_non_markovian: bool,
    /// (start, end) times in seconds of every detected revival.
    pub revival_intervals: Vec<(f64, f64)>,
    /// Summed coherence gain over the revivals, in units of the initial coherence.
    pub measure: f64,
}

impl MarkovianityVerdict {
    pub fn validate(&self) -> Result<()> {
        if self.is_non_markovian == self.revival_intervals.is_empty() {
            return Err(Error::Data("verdict disagrees with its revival list".into()));
        }
        if !(self.measure >= 0.0) || (self.measure == 0.0) != self.revival_intervals.is_empty() {
            return Err(Error::Data(format!("inconsistent revival measure {}", self.measure)));
        }
        Ok(())
    }

    /// Mean spacing between successive revival onsets, if there are at least two.
    pub fn revival_period(&self) -> Option<f64> {
        let n = self.revival_intervals.len();
        if n < 2 {
            return None;
        }
        Some((self.revival_intervals[n - 1].0 - self.revival_intervals[0].0) / (n - 1) as f64)
    }
}

/// Sum of off-diagonal moduli in the computational basis, √(x² + y²).
pub fn l1_coherence(b: &BlochVector) -> f64 {
    b.x.hypot(b.y)
}

/// |⟨σx⟩_t| / |⟨σx⟩_0|.
pub fn coherence_series(sx: &TimeSeries) -> Result<TimeSeries> {
    let first = *sx
        .values()
        .first()
        .ok_or_else(|| Error::Data("empty series".into()))?;
    if first == 0.0 {
        return Err(Error::Degenerate("initial coherence is zero".into()));
    }
    let c0 = first.abs();
    sx.with_values(sx.values().iter().map(|v| v.abs() / c0).collect(), "coherence")
}

/// Maximal runs over which the coherence increases by more than `threshold`,
/// after normalizing by the first sample.
pub fn revival_intervals(c: &TimeSeries, threshold: f64) -> Result<MarkovianityVerdict> {
    if c.len() < 3 {
        return Err(Error::Data(format!(
            "revival detection needs at least 3 samples, got {}",
            c.len()
        )));
    }
    if !(threshold >= 0.0 && threshold.is_finite()) {
        return Err(Error::Parameter(format!("threshold must be >= 0, got {threshold}")));
    }
    let (t, v) = (c.times(), c.values());
    let scale = if v[0] != 0.0 {
        v[0].abs()
    } else {
        v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    };
    let mut intervals = Vec::new();
    let mut measure = 0.0;
    if scale > 0.0 {
        let mut i = 0;
        while i + 1 < v.len() {
            if v[i + 1] > v[i] {
                let start = i;
                while i + 1 < v.len() && v[i + 1] > v[i] {
                    i += 1;
                }
                let gain = (v[i] - v[start]) / scale;
                if gain > threshold {
                    intervals.push((t[start], t[i]));
                    measure += gain;
                }
            } else {
                i += 1;
            }
        }
    }
    Ok(MarkovianityVerdict {
        is_non_markovian: !intervals.is_empty(),
        revival_intervals: intervals,
        measure,
    })
}

/// Coherence series of `sx` classified with `threshold`.
pub fn classify(sx: &TimeSeries, threshold: f64) -> Result<MarkovianityVerdict> {
    revival_intervals(&coherence_series(sx)?, threshold)
}
