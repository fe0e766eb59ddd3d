//! Measured-data pipeline: load, normalize, smooth and fit relaxation models.

mod fit;
mod io;
mod smooth;

pub use fit::{fit_exp_cos, fit_xi_model, ExpCosGuess, FitResult, LmConfig, XiGuess, TIME_BOUNDS};
pub use io::{load_series, read_series, write_series, write_series_to, SeriesFormat, HEADER};
pub use smooth::{smooth, DEFAULT_DEGREE, DEFAULT_WINDOW};

use serde::{Deserialize, Serialize};

use crate::series::TimeSeries;
use crate::{Error, Result};

/// Divides every value by `reference`.
pub fn normalize(series: &TimeSeries, reference: f64) -> Result<TimeSeries> {
    if reference == 0.0 || !reference.is_finite() {
        return Err(Error::Domain(format!("normalization reference must be finite and nonzero, got {reference}")));
    }
    series.with_values(
        series.values().iter().map(|v| v / reference).collect(),
        format!("{}_normalized", series.label()),
    )
}

/// T1 = t_null / ln 2 for an inversion-recovery null time.
pub fn t1_from_null(t_null: f64) -> Result<f64> {
    if !(t_null > 0.0 && t_null.is_finite()) {
        return Err(Error::Domain(format!("null time must be positive, got {t_null}")));
    }
    Ok(t_null / std::f64::consts::LN_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxivityFit {
    /// 1/(s·mM)
    pub slope: f64,
    /// 1/s
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least-squares line rate = slope·concentration + intercept.
pub fn fit_relaxivity(concentrations_mm: &[f64], rates: &[f64]) -> Result<RelaxivityFit> {
    if concentrations_mm.len() != rates.len() {
        return Err(Error::Data(format!(
            "{} concentrations but {} rates",
            concentrations_mm.len(),
            rates.len()
        )));
    }
    if concentrations_mm.iter().chain(rates).any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite relaxivity input".into()));
    }
    let n = rates.len() as f64;
    if rates.len() < 2 {
        return Err(Error::Domain("need at least two points".into()));
    }
    let mx = concentrations_mm.iter().sum::<f64>() / n;
    let my = rates.iter().sum::<f64>() / n;
    let sxx: f64 = concentrations_mm.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Domain("need at least two distinct concentrations".into()));
    }
    let sxy: f64 = concentrations_mm.iter().zip(rates).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = rates.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = concentrations_mm
        .iter()
        .zip(rates)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(RelaxivityFit {
        slope,
        intercept,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::linspace;

    #[test]
    fn normalize_examples() {
        let s = TimeSeries::new(vec![0.0, 1.0], vec![4.0, 2.0], "fid").unwrap();
        assert_eq!(normalize(&s, 4.0).unwrap().values(), &[1.0, 0.5]);
        assert_eq!(normalize(&s, 2.0).unwrap().values(), &[2.0, 1.0]);
        assert_eq!(normalize(&s, 2.0).unwrap().label(), "fid_normalized");
        assert!(matches!(normalize(&s, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn normalize_commutes_with_smoothing() {
        let s = TimeSeries::from_fn(linspace(0.0, 1.0, 50), "s", |t| Ok((7.0 * t).sin() + 0.3 * (31.0 * t).cos())).unwrap();
        let a = smooth(&normalize(&s, 3.7).unwrap(), 11, 3).unwrap();
        let b = normalize(&smooth(&s, 11, 3).unwrap(), 3.7).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn t1_examples() {
        assert!((t1_from_null(std::f64::consts::LN_2).unwrap() - 1.0).abs() < 1e-15);
        assert!((t1_from_null(8.3e-3).unwrap() - 11.974e-3).abs() < 1e-5);
        assert!((t1_from_null(2.0).unwrap() - 2.0 * t1_from_null(1.0).unwrap()).abs() < 1e-15);
        assert!(t1_from_null(0.0).is_err());
        assert!(t1_from_null(-1.0).is_err());
    }

    #[test]
    fn relaxivity() {
        let c = [0.0, 10.0, 20.0];
        let r = [1.0, 3.0, 5.0];
        let f = fit_relaxivity(&c, &r).unwrap();
        assert!((f.slope - 0.2).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);

        let c = [20.0, 120.0, 300.0];
        let r = [1.0 / 12e-3, 1.0 / 1.7e-3, 1.0 / 0.63e-3];
        let f = fit_relaxivity(&c, &r).unwrap();
        assert!(f.r_squared > 0.99);
        let g = fit_relaxivity(&[300.0, 20.0, 120.0], &[r[2], r[0], r[1]]).unwrap();
        assert!((f.slope - g.slope).abs() < 1e-12 * f.slope && (f.intercept - g.intercept).abs() < 1e-9);

        assert!(matches!(fit_relaxivity(&[5.0, 5.0], &[1.0, 2.0]), Err(Error::Domain(_))));
        assert!(fit_relaxivity(&[5.0], &[1.0]).is_err());
    }
}
