use nalgebra::{DMatrix, DVector};

use crate::series::TimeSeries;
use crate::{Error, Result};

pub const DEFAULT_WINDOW: usize = 11;
pub const DEFAULT_DEGREE: usize = 3;

/// Local least-squares polynomial (Savitzky–Golay) smoothing.
///
/// Each output sample is the value at its own time of a degree-`degree`
/// polynomial fitted to `window` neighbouring samples. Near the ends the
/// window shifts inward instead of shrinking. Works on non-uniform grids.
pub fn smooth(series: &TimeSeries, window: usize, degree: usize) -> Result<TimeSeries> {
    if window < 5 || window % 2 == 0 {
        return Err(Error::Parameter(format!("window must be odd and >= 5, got {window}")));
    }
    if !(2..=4).contains(&degree) {
        return Err(Error::Parameter(format!("degree must be in [2, 4], got {degree}")));
    }
    if degree >= window {
        return Err(Error::Parameter("degree must be below the window length".into()));
    }
    let n = series.len();
    if window > n {
        return Err(Error::Parameter(format!(
            "window {window} exceeds series length {n}"
        )));
    }
    let (t, v) = (series.times(), series.values());
    let half = window / 2;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(half).min(n - window);
        let (center, scale) = (t[i], t[lo + window - 1] - t[lo]);
        let design = DMatrix::from_fn(window, degree + 1, |r, c| ((t[lo + r] - center) / scale).powi(c as i32));
        let rhs = DVector::from_column_slice(&v[lo..lo + window]);
        let qr = design.qr();
        let qtb = qr.q().transpose() * rhs;
        let coef = qr.r().solve_upper_triangular(&qtb).ok_or_else(|| {
            Error::Data(format!("singular smoothing window around t = {center}"))
        })?;
        out.push(coef[0]);
    }
    series.with_values(out, format!("{}_smoothed", series.label()))
}
