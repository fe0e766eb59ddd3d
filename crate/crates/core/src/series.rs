use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Sampled scalar observable on strictly increasing, non-negative times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    t: Vec<f64>,
    value: Vec<f64>,
    label: String,
}

impl TimeSeries {
    pub fn new(t: Vec<f64>, value: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if t.len() != value.len() {
            return Err(Error::Data(format!(
                "time and value arrays differ in length ({} vs {})",
                t.len(),
                value.len()
            )));
        }
        if let Some(first) = t.first() {
            if !(first.is_finite() && *first >= 0.0) {
                return Err(Error::Data(format!("first time stamp must be >= 0, got {first}")));
            }
        }
        if let Some(i) = t.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Data(format!(
                "time stamps must be strictly increasing (t[{}] = {}, t[{}] = {})",
                i,
                t[i],
                i + 1,
                t[i + 1]
            )));
        }
        if let Some(i) = value.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite value at index {i}")));
        }
        Ok(Self {
            t,
            value,
            label: label.into(),
        })
    }

    /// Samples `f` on `times`.
    pub fn from_fn(
        times: Vec<f64>,
        label: impl Into<String>,
        f: impl FnMut(f64) -> Result<f64>,
    ) -> Result<Self> {
        let value = times.iter().copied().map(f).collect::<Result<Vec<_>>>()?;
        Self::new(times, value, label)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.value
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Same grid, new values.
    pub fn with_values(&self, value: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        Self::new(self.t.clone(), value, label)
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.t.iter().copied().zip(self.value.iter().copied())
    }

    pub fn same_grid(&self, other: &TimeSeries) -> bool {
        self.t == other.t
    }

    pub fn require_len(&self, min: usize) -> Result<()> {
        if self.len() < min {
            return Err(Error::Data(format!(
                "series '{}' has {} samples, at least {min} required",
                self.label,
                self.len()
            )));
        }
        Ok(())
    }
}

/// `n` evenly spaced points from `start` to `end` inclusive.
pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (end - start) / (n - 1) as f64;
            let mut v: Vec<f64> = (0..n).map(|i| start + step * i as f64).collect();
            v[n - 1] = end;
            v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_grid() {
        assert!(TimeSeries::new(vec![0.0, 1.0], vec![1.0], "x").is_err());
        assert!(TimeSeries::new(vec![0.0, 0.0], vec![1.0, 2.0], "x").is_err());
        assert!(TimeSeries::new(vec![1.0, 0.5], vec![1.0, 2.0], "x").is_err());
        assert!(TimeSeries::new(vec![-1.0, 0.5], vec![1.0, 2.0], "x").is_err());
        assert!(TimeSeries::new(vec![0.0, 0.5], vec![1.0, f64::NAN], "x").is_err());
        let s = TimeSeries::new(vec![0.0, 0.5], vec![1.0, 2.0], "x").unwrap();
        assert!(s.require_len(3).is_err());
        assert!(s.require_len(2).is_ok());
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(0.0, 0.15, 2000);
        assert_eq!(v.len(), 2000);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[1999], 0.15);
        assert!(v.windows(2).all(|w| w[1] > w[0]));
    }
}
