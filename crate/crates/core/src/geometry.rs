//! Path lengths, geodesic lengths and relative deviations for the QFI and WY metrics.
//!
//! States of the family ρ_t = (I + x_t σx + z0 σz)/2 trace a path whose
//! length under metric f is
//!
//! ```text
//! ℓ^f = ½ ∫ √(h^f(x_t)) |dx_t/dt| dt
//! ```
//!
//! and whose endpoints are at geodesic distance arccos√F (QFI, Bures angle)
//! or arccos A (WY, Hellinger angle). The relative deviation
//! δ = (ℓ − L)/L measures how far the evolution is from the geodesic.

use serde::{Deserialize, Serialize};

use crate::dynamics::{require_xz_plane, xi_complements, xi_with_derivative};
use crate::markovianity::MarkovianityVerdict;
use crate::quadrature::{integrate, integrate_sqrt_endpoints, Estimate, QuadConfig};
use crate::series::TimeSeries;
use crate::state::{BlochVector, RelaxationParams, PHYSICALITY_TOL};
use crate::{Error, Result};

/// Geodesic lengths at or below this are treated as a degenerate path.
pub const DEGENERATE_LENGTH: f64 = 1e-9;
/// Purity gap 1 − |r|² below which an endpoint gets the u = √(t − t*) substitution.
pub const SINGULAR_GAP: f64 = 0.01;
/// Kink bracketing grid density, points per 1/J.
pub const KINK_GRID_PER_PERIOD: f64 = 2000.0;
pub const DEFAULT_NOISE_FLOOR: f64 = 1e-4;

const ARCCOS_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetricKind {
    /// Quantum Fisher information metric; geodesic length is the Bures angle.
    #[serde(rename = "QFI")]
    Qfi,
    /// Wigner–Yanase skew-information metric; geodesic length is the Hellinger angle.
    #[serde(rename = "WY")]
    Wy,
}

impl MetricKind {
    pub const ALL: [MetricKind; 2] = [MetricKind::Qfi, MetricKind::Wy];

    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Qfi => "QFI",
            MetricKind::Wy => "WY",
        }
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn check_interior(x: f64, z0: f64) -> Result<f64> {
    let r2 = x * x + z0 * z0;
    if !r2.is_finite() || r2 >= 1.0 {
        return Err(Error::BoundarySingularity(format!(
            "x_t^2 + z0^2 = {r2} is not inside the Bloch ball"
        )));
    }
    Ok(r2)
}

/// QFI metric factor (1 − z0²)/(1 − x² − z0²).
pub fn h_qfi(x: f64, z0: f64) -> Result<f64> {
    let r2 = check_interior(x, z0)?;
    Ok((1.0 - z0 * z0) / (1.0 - r2))
}

/// WY metric factor
/// x²/(r²(1 − r²)) + 2 z0² (1 − √(1 − r²))/r⁴ with r² = x² + z0².
pub fn h_wy(x: f64, z0: f64) -> Result<f64> {
    let r2 = check_interior(x, z0)?;
    if r2 == 0.0 {
        return Err(Error::Degenerate(
            "WY metric factor is undefined at the maximally mixed state".into(),
        ));
    }
    Ok(h_wy_from_gap(x, z0, 1.0 - r2))
}

// 1 − √(1 − r²) = r²/(1 + √(1 − r²)) keeps the second term accurate for small r.
fn h_wy_from_gap(x: f64, z0: f64, gap: f64) -> f64 {
    let r2 = x * x + z0 * z0;
    if r2 == 0.0 {
        return 1.0;
    }
    x * x / (r2 * gap) + 2.0 * z0 * z0 / (r2 * (1.0 + gap.sqrt()))
}

fn h_from_gap(metric: MetricKind, x: f64, z0: f64, gap: f64) -> f64 {
    match metric {
        MetricKind::Qfi => (1.0 - z0 * z0) / gap,
        MetricKind::Wy => h_wy_from_gap(x, z0, gap),
    }
}

/// Where a path comes from: the closed-form model or a sampled ⟨σx⟩ series.
#[derive(Debug, Clone, Copy)]
pub enum PathSource<'a> {
    Model {
        params: RelaxationParams,
        initial: BlochVector,
    },
    /// Sampled ⟨σx⟩_t for states with fixed ⟨σz⟩ = z0.
    Data { series: &'a TimeSeries, z0: f64 },
}

impl<'a> PathSource<'a> {
    pub fn model(params: RelaxationParams, initial: BlochVector) -> Self {
        PathSource::Model { params, initial }
    }

    pub fn data(series: &'a TimeSeries, z0: f64) -> Self {
        PathSource::Data { series, z0 }
    }

    fn validate(&self) -> Result<()> {
        match self {
            PathSource::Model { params, initial } => {
                params.validate()?;
                require_xz_plane(initial)
            }
            PathSource::Data { series, z0 } => {
                series.require_len(2)?;
                if !(z0.abs() <= 1.0) {
                    return Err(Error::Domain(format!("z0 = {z0} outside [-1, 1]")));
                }
                Ok(())
            }
        }
    }

    pub fn z0(&self) -> f64 {
        match self {
            PathSource::Model { initial, .. } => initial.z,
            PathSource::Data { z0, .. } => *z0,
        }
    }

    /// ⟨σx⟩ at time `t` (sampled sources must have a sample at `t`).
    fn x_at(&self, t: f64) -> Result<f64> {
        match self {
            PathSource::Model { params, initial } => Ok(xi_with_derivative(t, params).0 * initial.x),
            PathSource::Data { series, .. } => {
                let idx = series
                    .times()
                    .iter()
                    .position(|&s| s == t)
                    .ok_or_else(|| Error::Data(format!("no sample at t = {t}")))?;
                Ok(series.values()[idx])
            }
        }
    }
}

/// Integrand ½√h|dx/dt| and purity gap along the model trajectory.
struct ModelPath {
    params: RelaxationParams,
    x0: f64,
    z0: f64,
    deficit0: f64,
    metric: MetricKind,
}

impl ModelPath {
    fn new(params: RelaxationParams, initial: BlochVector, metric: MetricKind) -> Self {
        let deficit0 = (1.0 - initial.x * initial.x - initial.z * initial.z).max(0.0);
        Self {
            params,
            x0: initial.x,
            z0: initial.z,
            deficit0,
            metric,
        }
    }

    fn gap_at(&self, t: f64) -> f64 {
        let (minus, plus) = xi_complements(t, &self.params);
        self.deficit0 + self.x0 * self.x0 * minus * plus
    }

    fn speed(&self, t: f64) -> f64 {
        let (xi, dxi) = xi_with_derivative(t, &self.params);
        let dx = (self.x0 * dxi).abs();
        if dx == 0.0 {
            return 0.0;
        }
        let gap = self.gap_at(t);
        0.5 * h_from_gap(self.metric, self.x0 * xi, self.z0, gap).sqrt() * dx
    }

    fn integrate_piece(&self, a: f64, b: f64, cfg: &QuadConfig) -> Result<Estimate> {
        if b <= a || self.x0 == 0.0 {
            return Ok(Estimate::default());
        }
        let f = |t: f64| self.speed(t);
        let left = self.gap_at(a) < SINGULAR_GAP;
        let right = self.gap_at(b) < SINGULAR_GAP;
        if !left && !right {
            return integrate(f, a, b, cfg);
        }
        // locate the edges of the near-singular zones on a coarse scan
        const SCAN: usize = 64;
        let probe = |i: usize| a + (b - a) * i as f64 / SCAN as f64;
        let left_edge = if left {
            (1..=SCAN).map(probe).find(|&t| self.gap_at(t) >= SINGULAR_GAP).unwrap_or(b)
        } else {
            a
        };
        let right_edge = if right {
            (0..SCAN).rev().map(probe).find(|&t| self.gap_at(t) >= SINGULAR_GAP).unwrap_or(a)
        } else {
            b
        };
        if left && right && left_edge >= right_edge {
            return integrate_sqrt_endpoints(f, a, b, true, true, cfg);
        }
        let mut total = Estimate::default();
        if left {
            total = total + integrate_sqrt_endpoints(f, a, left_edge, true, false, cfg)?;
        }
        total = total + integrate(f, left_edge, right_edge, cfg)?;
        if right {
            total = total + integrate_sqrt_endpoints(f, right_edge, b, false, true, cfg)?;
        }
        Ok(total)
    }
}

/// Zeros of dξ/dt in (t0, t1), bracketed on a grid of 2000 points per 1/J and
/// refined by bisection. These are the kinks of |d⟨σx⟩/dt|.
pub fn derivative_zeros(params: &RelaxationParams, t0: f64, t1: f64) -> Vec<f64> {
    if t1 <= t0 {
        return Vec::new();
    }
    let n = ((KINK_GRID_PER_PERIOD * params.j * (t1 - t0)).ceil() as usize).max(64);
    let d = |t: f64| xi_with_derivative(t, params).1;
    let mut zeros = Vec::new();
    let mut prev_t = t0;
    let mut prev_d = d(t0);
    for i in 1..=n {
        let t = if i == n { t1 } else { t0 + (t1 - t0) * i as f64 / n as f64 };
        let dt = d(t);
        if dt == 0.0 && i < n {
            zeros.push(t);
        } else if prev_d != 0.0 && prev_d.signum() != dt.signum() && dt != 0.0 {
            let (mut lo, mut hi, mut dlo) = (prev_t, t, prev_d);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let dm = d(mid);
                if dm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if dm.signum() == dlo.signum() {
                    lo = mid;
                    dlo = dm;
                } else {
                    hi = mid;
                }
            }
            zeros.push(0.5 * (lo + hi));
        }
        prev_t = t;
        prev_d = dt;
    }
    zeros
}

/// √h at a sample, or `None` on the Bloch-sphere boundary.
fn sample_sqrt_h(metric: MetricKind, x: f64, z0: f64) -> Result<Option<f64>> {
    let gap = (1.0 - z0 * z0) - x * x;
    if gap < -PHYSICALITY_TOL {
        return Err(Error::Data(format!(
            "sample x = {x} with z0 = {z0} lies outside the Bloch ball"
        )));
    }
    if gap <= 0.0 {
        return Ok(None);
    }
    Ok(Some(h_from_gap(metric, x, z0, gap).sqrt()))
}

/// Central-difference derivative, one-sided at the ends.
pub fn numerical_derivative(series: &TimeSeries) -> Result<Vec<f64>> {
    series.require_len(2)?;
    let (t, x) = (series.times(), series.values());
    let n = t.len();
    Ok((0..n)
        .map(|i| match i {
            0 => (x[1] - x[0]) / (t[1] - t[0]),
            _ if i == n - 1 => (x[n - 1] - x[n - 2]) / (t[n - 1] - t[n - 2]),
            _ => (x[i + 1] - x[i - 1]) / (t[i + 1] - t[i - 1]),
        })
        .collect())
}

/// Running path length at every sample of a data series (trapezoid rule).
/// Segments touching the Bloch-sphere boundary fall back to the midpoint rule.
fn data_cumulative(series: &TimeSeries, z0: f64, metric: MetricKind) -> Result<Vec<f64>> {
    let dx = numerical_derivative(series)?;
    let (t, x) = (series.times(), series.values());
    let speeds = x
        .iter()
        .zip(&dx)
        .map(|(&xi, &di)| Ok(sample_sqrt_h(metric, xi, z0)?.map(|s| 0.5 * s * di.abs())))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(t.len());
    out.push(0.0);
    let mut acc = 0.0;
    for i in 0..t.len() - 1 {
        let h = t[i + 1] - t[i];
        let inc = match (speeds[i], speeds[i + 1]) {
            (Some(a), Some(b)) => 0.5 * h * (a + b),
            _ => {
                let xm = 0.5 * (x[i] + x[i + 1]);
                let slope = (x[i + 1] - x[i]) / h;
                let s = sample_sqrt_h(metric, xm, z0)?.ok_or_else(|| {
                    Error::Data(format!("series stays on the Bloch sphere near t = {}", t[i]))
                })?;
                0.5 * s * slope.abs() * h
            }
        };
        acc += inc;
        out.push(acc);
    }
    Ok(out)
}

fn interpolate(t: &[f64], v: &[f64], at: f64) -> Result<f64> {
    let n = t.len();
    if at < t[0] || at > t[n - 1] {
        return Err(Error::Data(format!(
            "t = {at} outside the sampled range [{}, {}]",
            t[0],
            t[n - 1]
        )));
    }
    let i = t.partition_point(|&s| s <= at).clamp(1, n - 1);
    let w = (at - t[i - 1]) / (t[i] - t[i - 1]);
    Ok(v[i - 1] + w * (v[i] - v[i - 1]))
}

/// ℓ^f over [t0, t1].
///
/// Model paths use adaptive quadrature split at every kink of |dx/dt|, with
/// square-root substitution next to pure-state endpoints. Data paths use the
/// trapezoid rule on numerically differentiated samples; their error estimate
/// is reported as zero.
pub fn path_length(
    source: &PathSource<'_>,
    metric: MetricKind,
    t0: f64,
    t1: f64,
    cfg: &QuadConfig,
) -> Result<Estimate> {
    source.validate()?;
    cfg.validate()?;
    if !(t0 >= 0.0 && t1 > t0) {
        return Err(Error::Domain(format!("need 0 <= t0 < t1, got [{t0}, {t1}]")));
    }
    match *source {
        PathSource::Model { params, initial } => {
            let path = ModelPath::new(params, initial, metric);
            let mut cuts = vec![t0];
            cuts.extend(derivative_zeros(&params, t0, t1));
            cuts.push(t1);
            cuts.windows(2).map(|w| path.integrate_piece(w[0], w[1], cfg)).sum()
        }
        PathSource::Data { series, z0 } => {
            let cum = data_cumulative(series, z0, metric)?;
            let value = interpolate(series.times(), &cum, t1)? - interpolate(series.times(), &cum, t0)?;
            Ok(Estimate {
                value,
                error: 0.0,
                evaluations: series.len(),
            })
        }
    }
}

/// ℓ^f from `times[0]` to each entry of `times` (running endpoint).
pub fn cumulative_path_length(
    source: &PathSource<'_>,
    metric: MetricKind,
    times: &[f64],
    cfg: &QuadConfig,
) -> Result<Vec<Estimate>> {
    source.validate()?;
    cfg.validate()?;
    if times.is_empty() {
        return Ok(Vec::new());
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || times[0] < 0.0 {
        return Err(Error::Data("evaluation times must be non-negative and increasing".into()));
    }
    match *source {
        PathSource::Model { params, initial } => {
            let path = ModelPath::new(params, initial, metric);
            let kinks = derivative_zeros(&params, times[0], times[times.len() - 1]);
            let mut k = 0;
            let mut out = Vec::with_capacity(times.len());
            let mut acc = Estimate::default();
            out.push(acc);
            for w in times.windows(2) {
                let mut a = w[0];
                while k < kinks.len() && kinks[k] <= a {
                    k += 1;
                }
                while k < kinks.len() && kinks[k] < w[1] {
                    acc = acc + path.integrate_piece(a, kinks[k], cfg)?;
                    a = kinks[k];
                    k += 1;
                }
                acc = acc + path.integrate_piece(a, w[1], cfg)?;
                out.push(acc);
            }
            Ok(out)
        }
        PathSource::Data { series, z0 } => {
            let cum = data_cumulative(series, z0, metric)?;
            let base = interpolate(series.times(), &cum, times[0])?;
            times
                .iter()
                .map(|&t| {
                    Ok(Estimate {
                        value: interpolate(series.times(), &cum, t)? - base,
                        error: 0.0,
                        evaluations: 0,
                    })
                })
                .collect()
        }
    }
}

fn purity_root(x: f64, z0: f64) -> Result<f64> {
    let gap = 1.0 - x * x - z0 * z0;
    if !gap.is_finite() || gap < -PHYSICALITY_TOL {
        return Err(Error::Domain(format!(
            "state (x = {x}, z0 = {z0}) lies outside the Bloch ball"
        )));
    }
    Ok(gap.max(0.0).sqrt())
}

/// Uhlmann fidelity between (x0, z0) and (xt, z0).
pub fn fidelity(x0: f64, xt: f64, z0: f64) -> Result<f64> {
    let s0 = purity_root(x0, z0)?;
    let st = purity_root(xt, z0)?;
    let f = 0.5 * (1.0 + x0 * xt + z0 * z0 + s0 * st);
    Ok(f.clamp(0.0, 1.0))
}

/// Quantum affinity tr(√ρ0 √ρt) between (x0, z0) and (xt, z0).
pub fn affinity(x0: f64, xt: f64, z0: f64) -> Result<f64> {
    let s0 = purity_root(x0, z0)?;
    let st = purity_root(xt, z0)?;
    let norm = |x: f64| {
        let r = (x * x + z0 * z0).sqrt().min(1.0);
        (1.0 + r).sqrt() + (1.0 - r).sqrt()
    };
    let a = (x0 * xt + z0 * z0 + (1.0 + s0) * (1.0 + st)) / (norm(x0) * norm(xt));
    Ok(a.clamp(0.0, 1.0))
}

fn checked_arccos(c: f64) -> Result<f64> {
    if c > 1.0 + ARCCOS_CLAMP || c < -1.0 - ARCCOS_CLAMP || c.is_nan() {
        return Err(Error::Domain(format!("arccos argument {c} outside [-1, 1]")));
    }
    Ok(c.clamp(-1.0, 1.0).acos())
}

/// Bures angle (QFI) or Hellinger angle (WY) between the two states.
pub fn geodesic_length(x0: f64, xt: f64, z0: f64, metric: MetricKind) -> Result<f64> {
    match metric {
        MetricKind::Qfi => checked_arccos(fidelity(x0, xt, z0)?.sqrt()),
        MetricKind::Wy => checked_arccos(affinity(x0, xt, z0)?),
    }
}

/// δ = (ℓ − L)/L.
pub fn relative_deviation(ell: f64, geodesic: f64) -> Result<f64> {
    relative_deviation_with_floor(ell, geodesic, DEGENERATE_LENGTH)
}

pub fn relative_deviation_with_floor(ell: f64, geodesic: f64, floor: f64) -> Result<f64> {
    if !(geodesic > floor) {
        return Err(Error::Degenerate(format!(
            "geodesic length {geodesic:e} is at or below {floor:e}; relative deviation undefined"
        )));
    }
    Ok((ell - geodesic) / geodesic)
}

/// Smallest t* in (0, τ] with ℓ(0, t*) ≥ L(ρ0, ρτ), found by bisection.
pub fn qsl_time(
    params: &RelaxationParams,
    initial: &BlochVector,
    tau: f64,
    metric: MetricKind,
    cfg: &QuadConfig,
) -> Result<f64> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::Domain(format!("tau must be positive, got {tau}")));
    }
    let source = PathSource::model(*params, *initial);
    source.validate()?;
    let xt = xi_with_derivative(tau, params).0 * initial.x;
    let target = geodesic_length(initial.x, xt, initial.z, metric)?;
    if target <= DEGENERATE_LENGTH {
        return Err(Error::Degenerate(format!(
            "geodesic length {target:e} too small for a speed-limit time"
        )));
    }
    let ell = |t: f64| -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        Ok(path_length(&source, metric, 0.0, t, cfg)?.value)
    };
    if ell(tau)? < target {
        // only possible within quadrature error; the bound is saturated
        return Ok(tau);
    }
    let (mut lo, mut hi) = (0.0, tau);
    while hi - lo > 1e-12 * tau {
        let mid = 0.5 * (lo + hi);
        if ell(mid)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Running-endpoint relative deviations on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaCurves {
    pub t: Vec<f64>,
    pub path_qfi: Vec<f64>,
    pub path_wy: Vec<f64>,
    pub geodesic_qfi: Vec<f64>,
    pub geodesic_wy: Vec<f64>,
    /// `None` where the geodesic length is degenerate.
    pub delta_qfi: Vec<Option<f64>>,
    pub delta_wy: Vec<Option<f64>>,
    /// Summed quadrature error estimates at the final time.
    pub path_error_qfi: f64,
    pub path_error_wy: f64,
}

impl DeltaCurves {
    fn defined(&self, which: &[Option<f64>], label: &str) -> Result<TimeSeries> {
        let (t, v): (Vec<f64>, Vec<f64>) = self
            .t
            .iter()
            .zip(which)
            .filter_map(|(&t, d)| d.map(|d| (t, d)))
            .unzip();
        TimeSeries::new(t, v, label)
    }

    pub fn delta_series(&self, metric: MetricKind) -> Result<TimeSeries> {
        match metric {
            MetricKind::Qfi => self.defined(&self.delta_qfi, "delta_qfi"),
            MetricKind::Wy => self.defined(&self.delta_wy, "delta_wy"),
        }
    }

    /// δ^QFI and δ^WY restricted to grid points where both are defined.
    pub fn paired_series(&self) -> Result<(TimeSeries, TimeSeries)> {
        let mut t = Vec::new();
        let (mut q, mut w) = (Vec::new(), Vec::new());
        for i in 0..self.t.len() {
            if let (Some(a), Some(b)) = (self.delta_qfi[i], self.delta_wy[i]) {
                t.push(self.t[i]);
                q.push(a);
                w.push(b);
            }
        }
        Ok((
            TimeSeries::new(t.clone(), q, "delta_qfi")?,
            TimeSeries::new(t, w, "delta_wy")?,
        ))
    }

    /// δ^QFI − δ^WY where both are defined.
    pub fn difference_series(&self) -> Result<TimeSeries> {
        let (q, w) = self.paired_series()?;
        let d = q.values().iter().zip(w.values()).map(|(a, b)| a - b).collect();
        q.with_values(d, "delta_diff")
    }

    pub fn undefined_points(&self) -> usize {
        self.delta_qfi
            .iter()
            .zip(&self.delta_wy)
            .filter(|(a, b)| a.is_none() || b.is_none())
            .count()
    }
}

/// δ^QFI(τ) and δ^WY(τ) for every τ in `times`, with ρ0 the state at `times[0]`.
pub fn delta_curves(source: &PathSource<'_>, times: &[f64], cfg: &QuadConfig) -> Result<DeltaCurves> {
    if times.len() < 2 {
        return Err(Error::Data("delta curves need at least two grid points".into()));
    }
    let z0 = source.z0();
    let x0 = source.x_at(times[0])?;
    let xs = times.iter().map(|&t| source.x_at(t)).collect::<Result<Vec<_>>>()?;
    let path_qfi = cumulative_path_length(source, MetricKind::Qfi, times, cfg)?;
    let path_wy = cumulative_path_length(source, MetricKind::Wy, times, cfg)?;
    let geodesic_qfi = xs
        .iter()
        .map(|&x| geodesic_length(x0, x, z0, MetricKind::Qfi))
        .collect::<Result<Vec<_>>>()?;
    let geodesic_wy = xs
        .iter()
        .map(|&x| geodesic_length(x0, x, z0, MetricKind::Wy))
        .collect::<Result<Vec<_>>>()?;
    let delta = |ell: &[Estimate], geo: &[f64]| -> Vec<Option<f64>> {
        ell.iter()
            .zip(geo)
            .map(|(e, &g)| relative_deviation(e.value, g).ok())
            .collect()
    };
    let delta_qfi = delta(&path_qfi, &geodesic_qfi);
    let delta_wy = delta(&path_wy, &geodesic_wy);
    Ok(DeltaCurves {
        t: times.to_vec(),
        path_error_qfi: path_qfi.last().map(|e| e.error).unwrap_or(0.0),
        path_error_wy: path_wy.last().map(|e| e.error).unwrap_or(0.0),
        path_qfi: path_qfi.iter().map(|e| e.value).collect(),
        path_wy: path_wy.iter().map(|e| e.value).collect(),
        geodesic_qfi,
        geodesic_wy,
        delta_qfi,
        delta_wy,
    })
}

/// Time interval over which one metric gives the tighter speed limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TighterInterval {
    pub start: f64,
    pub end: f64,
    pub metric: MetricKind,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Crossovers {
    pub times: Vec<f64>,
    pub timeline: Vec<TighterInterval>,
}

/// Zero crossings of d = δ^QFI − δ^WY.
///
/// Samples with |d| ≤ `noise_floor` carry no sign; a crossing is registered
/// only when d moves from beyond +floor to beyond −floor (or back), and is
/// placed at the linearly interpolated zero between those samples.
/// d > 0 marks WY as tighter, d < 0 marks QFI.
pub fn crossover_times(
    delta_qfi: &TimeSeries,
    delta_wy: &TimeSeries,
    noise_floor: f64,
) -> Result<Crossovers> {
    if !delta_qfi.same_grid(delta_wy) {
        return Err(Error::Data("delta series are not on the same time grid".into()));
    }
    if !(noise_floor >= 0.0) {
        return Err(Error::Parameter(format!("noise floor must be >= 0, got {noise_floor}")));
    }
    let t = delta_qfi.times();
    let d: Vec<f64> = delta_qfi
        .values()
        .iter()
        .zip(delta_wy.values())
        .map(|(a, b)| a - b)
        .collect();
    let tighter = |s: f64| if s > 0.0 { MetricKind::Wy } else { MetricKind::Qfi };

    let mut out = Crossovers::default();
    let mut last: Option<(usize, f64)> = None;
    let mut interval_start = t.first().copied().unwrap_or(0.0);
    for (i, &di) in d.iter().enumerate() {
        if di.abs() <= noise_floor {
            continue;
        }
        let sign = di.signum();
        match last {
            None => {}
            Some((j, s)) if s != sign => {
                // first raw sign change between the two determined samples
                let k = (j..i)
                    .find(|&k| d[k] * d[k + 1] <= 0.0 && d[k] != d[k + 1])
                    .unwrap_or(i - 1);
                let tc = t[k] + (t[k + 1] - t[k]) * d[k] / (d[k] - d[k + 1]);
                out.times.push(tc);
                out.timeline.push(TighterInterval {
                    start: interval_start,
                    end: tc,
                    metric: tighter(s),
                });
                interval_start = tc;
            }
            Some(_) => {}
        }
        last = Some((i, sign));
    }
    if let Some((_, s)) = last {
        out.timeline.push(TighterInterval {
            start: interval_start,
            end: *t.last().expect("non-empty when a sign was seen"),
            metric: tighter(s),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub path_length: f64,
    pub geodesic_length: f64,
    /// `None` when the geodesic length is degenerate.
    pub delta: Option<f64>,
    pub path_error_estimate: f64,
}

impl MetricSummary {
    pub fn new(path: Estimate, geodesic: f64) -> Self {
        Self {
            path_length: path.value,
            geodesic_length: geodesic,
            delta: relative_deviation(path.value, geodesic).ok(),
            path_error_estimate: path.error,
        }
    }
}

/// Speed-limit summary at the final time of an analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QslReport {
    pub tau: f64,
    pub qfi: MetricSummary,
    pub wy: MetricSummary,
    pub crossover_times: Vec<f64>,
    pub tighter_metric_timeline: Vec<TighterInterval>,
    pub markovianity: Option<MarkovianityVerdict>,
    /// Grid points whose relative deviation is undefined.
    pub undefined_points: usize,
}

impl QslReport {
    pub fn from_curves(
        curves: &DeltaCurves,
        noise_floor: f64,
        markovianity: Option<MarkovianityVerdict>,
    ) -> Result<Self> {
        let last = curves.t.len() - 1;
        let summary = |path: f64, err: f64, geo: f64| {
            MetricSummary::new(
                Estimate {
                    value: path,
                    error: err,
                    evaluations: 0,
                },
                geo,
            )
        };
        let (q, w) = curves.paired_series()?;
        if q.is_empty() {
            return Err(Error::Degenerate(
                "relative deviation undefined at every grid point (zero-length path)".into(),
            ));
        }
        let crossovers = if q.len() >= 2 {
            crossover_times(&q, &w, noise_floor)?
        } else {
            Crossovers::default()
        };
        Ok(Self {
            tau: curves.t[last],
            qfi: summary(curves.path_qfi[last], curves.path_error_qfi, curves.geodesic_qfi[last]),
            wy: summary(curves.path_wy[last], curves.path_error_wy, curves.geodesic_wy[last]),
            crossover_times: crossovers.times,
            tighter_metric_timeline: crossovers.timeline,
            markovianity,
            undefined_points: curves.undefined_points(),
        })
    }

    pub fn metric(&self, metric: MetricKind) -> &MetricSummary {
        match metric {
            MetricKind::Qfi => &self.qfi,
            MetricKind::Wy => &self.wy,
        }
    }

    /// Checks ℓ ≥ L − `quadrature_tol` and δ = (ℓ − L)/L for both metrics.
    pub fn validate(&self, quadrature_tol: f64) -> Result<()> {
        for metric in MetricKind::ALL {
            let m = self.metric(metric);
            let slack = quadrature_tol.max(m.path_error_estimate) * m.geodesic_length.max(1.0);
            if m.path_length < m.geodesic_length - slack {
                return Err(Error::Data(format!(
                    "{metric}: path length {} below geodesic length {}",
                    m.path_length, m.geodesic_length
                )));
            }
            if let Some(delta) = m.delta {
                let expected = (m.path_length - m.geodesic_length) / m.geodesic_length;
                if (delta - expected).abs() > 1e-12 * expected.abs().max(1.0) {
                    return Err(Error::Data(format!("{metric}: inconsistent relative deviation")));
                }
            }
        }
        if let Some(v) = &self.markovianity {
            v.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    // Independent 2×2 oracles: √M = (M + √det·I)/√(tr M + 2√det) for PSD M.
    fn sqrtm(m: Matrix2<f64>) -> Matrix2<f64> {
        let det = m.determinant().max(0.0);
        let s = det.sqrt();
        let t = (m.trace() + 2.0 * s).sqrt();
        (m + Matrix2::identity() * s) / t
    }

    fn rho(x: f64, z: f64) -> Matrix2<f64> {
        Matrix2::new(1.0 + z, x, x, 1.0 - z) * 0.5
    }

    fn oracle_fidelity(x0: f64, xt: f64, z0: f64) -> f64 {
        let s = sqrtm(rho(x0, z0));
        sqrtm(s * rho(xt, z0) * s).trace().powi(2)
    }

    fn oracle_affinity(x0: f64, xt: f64, z0: f64) -> f64 {
        (sqrtm(rho(x0, z0)) * sqrtm(rho(xt, z0))).trace()
    }

    #[test]
    fn metric_factor_examples() {
        assert_eq!(h_qfi(0.0, 0.0).unwrap(), 1.0);
        assert!((h_qfi(0.5, 0.0).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!((h_wy(0.5, 0.0).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!((h_wy(0.5, 0.5).unwrap() - (3.0 - 2f64.sqrt())).abs() < 1e-14);
        assert!(matches!(h_qfi(0.8, 0.6), Err(Error::BoundarySingularity(_))));
        assert!(matches!(h_wy(0.0, 0.0), Err(Error::Degenerate(_))));
        assert!(matches!(h_wy(1.0, 0.0), Err(Error::BoundarySingularity(_))));
        // the QFI pole scales as 1/(1 − r²)
        let near = h_qfi(1.0 - 1e-8, 0.0).unwrap();
        assert!((near * (1.0 - (1.0 - 1e-8f64).powi(2)) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn wy_reduces_to_qfi_without_polarization() {
        for i in 0..=1998 {
            let x = -0.999 + i as f64 * 1e-3;
            if x == 0.0 {
                continue;
            }
            let (a, b) = (h_qfi(x, 0.0).unwrap(), h_wy(x, 0.0).unwrap());
            assert!((a - b).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn fidelity_affinity_examples() {
        assert_eq!(fidelity(0.3, 0.3, 0.4).unwrap(), 1.0);
        let f = fidelity(FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2).unwrap();
        assert!((f - 0.75).abs() < 1e-15);
        assert!((geodesic_length(FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2, MetricKind::Qfi).unwrap() - PI / 6.0).abs() < 1e-12);

        assert!((affinity(0.3, 0.3, 0.4).unwrap() - 1.0).abs() < 1e-15);
        let a = affinity(FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2).unwrap();
        let num = 1.5 + FRAC_1_SQRT_2;
        let den = 2f64.sqrt() * ((1.0 + FRAC_1_SQRT_2).sqrt() + (1.0 - FRAC_1_SQRT_2).sqrt());
        assert!((a - num / den).abs() < 1e-15);
        assert!((a - 0.844_623_198_620_733_1).abs() < 1e-12);
        assert!((a - oracle_affinity(FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2)).abs() < 1e-12);
        let hellinger = geodesic_length(FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2, MetricKind::Wy).unwrap();
        assert!((hellinger - 0.564_935_377_402_190_8).abs() < 1e-12);
        assert!(hellinger >= PI / 6.0);

        assert!((fidelity(0.2, -0.5, 0.3).unwrap() - fidelity(-0.5, 0.2, 0.3).unwrap()).abs() < 1e-16);
        assert!((affinity(0.2, -0.5, 0.3).unwrap() - affinity(-0.5, 0.2, 0.3).unwrap()).abs() < 1e-16);
        assert!(fidelity(0.9, 0.0, 0.9).is_err());
        assert!(affinity(0.0, 0.9, 0.9).is_err());
        for metric in MetricKind::ALL {
            assert_eq!(geodesic_length(0.4, 0.4, 0.1, metric).unwrap(), 0.0);
        }
    }

    #[test]
    fn closed_forms_match_matrix_oracles() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let z0: f64 = rng.random_range(-1.0..1.0);
            let xmax = (1.0 - z0 * z0).sqrt();
            let x0 = rng.random_range(-xmax..=xmax);
            let xt = rng.random_range(-xmax..=xmax);
            let f = fidelity(x0, xt, z0).unwrap();
            let a = affinity(x0, xt, z0).unwrap();
            assert!((f - oracle_fidelity(x0, xt, z0)).abs() < 1e-10, "F at ({x0}, {xt}, {z0})");
            assert!((a - oracle_affinity(x0, xt, z0)).abs() < 1e-10, "A at ({x0}, {xt}, {z0})");
        }
    }

    #[test]
    fn arccos_guard() {
        assert_eq!(checked_arccos(1.0 + 5e-13).unwrap(), 0.0);
        assert!(checked_arccos(1.0 + 1e-9).is_err());
    }

    #[test]
    fn relative_deviation_contract() {
        assert_eq!(relative_deviation(0.3, 0.3).unwrap(), 0.0);
        assert_eq!(relative_deviation(0.6, 0.3).unwrap(), 1.0);
        assert!(matches!(relative_deviation(1.0, 1e-10), Err(Error::Degenerate(_))));
    }

    #[test]
    fn derivative_zeros_are_on_the_grid_of_revivals() {
        let p = RelaxationParams::new(7.1e-3, 38.55e-3, 209.1).unwrap();
        let zeros = derivative_zeros(&p, 0.0, 0.05);
        // one extremum per half-period of the coupling modulation 1/J ≈ 4.78 ms
        assert_eq!(zeros.len(), 10);
        for z in &zeros {
            assert!(xi_with_derivative(*z, &p).1.abs() < 1e-6);
        }
    }

    #[test]
    fn unitary_half_oscillation_is_a_quarter_turn() {
        let j = 209.1;
        let p = RelaxationParams::new(1e18, 1e18, j).unwrap();
        let b0 = BlochVector::xz(1.0, 0.0).unwrap();
        let src = PathSource::model(p, b0);
        for metric in MetricKind::ALL {
            let e = path_length(&src, metric, 0.0, 1.0 / j, &QuadConfig::with_rel_tol(1e-10)).unwrap();
            assert!((e.value - PI / 2.0).abs() < 1e-6, "{metric}: {}", e.value);
        }
    }

    #[test]
    fn constant_signal_has_zero_length() {
        let s = TimeSeries::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.3; 4], "sx").unwrap();
        let e = path_length(&PathSource::data(&s, 0.2), MetricKind::Qfi, 0.0, 3.0, &QuadConfig::default())
            .unwrap();
        assert_eq!(e.value, 0.0);
        let b0 = BlochVector::xz(0.0, 1.0).unwrap();
        let p = RelaxationParams::new(1e-3, 1e-2, 200.0).unwrap();
        let e = path_length(&PathSource::model(p, b0), MetricKind::Wy, 0.0, 0.1, &QuadConfig::default())
            .unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn data_path_converges_to_model_path() {
        let p = RelaxationParams::new(1.15e-3, 12.8e-3, 209.1).unwrap();
        // mixed initial state keeps the data integrand bounded
        let b0 = BlochVector::xz(0.6, 0.5).unwrap();
        let tau = 0.02;
        let model = path_length(&PathSource::model(p, b0), MetricKind::Qfi, 0.0, tau, &QuadConfig::default())
            .unwrap()
            .value;
        let series = crate::dynamics::sx_series(crate::series::linspace(0.0, tau, 20_001), &b0, &p).unwrap();
        let data = path_length(&PathSource::data(&series, b0.z), MetricKind::Qfi, 0.0, tau, &QuadConfig::default())
            .unwrap()
            .value;
        assert!((data - model).abs() < 1e-3 * model, "data {data} model {model}");
    }

    #[test]
    fn data_path_handles_pure_first_sample() {
        let p = RelaxationParams::new(7.1e-3, 38.55e-3, 209.1).unwrap();
        let b0 = BlochVector::xz(FRAC_1_SQRT_2, FRAC_1_SQRT_2).unwrap();
        let series = crate::dynamics::sx_series(crate::series::linspace(0.0, 0.01, 1001), &b0, &p).unwrap();
        let e = path_length(&PathSource::data(&series, b0.z), MetricKind::Qfi, 0.0, 0.01, &QuadConfig::default())
            .unwrap();
        assert!(e.value.is_finite() && e.value > 0.0);
        let outside = TimeSeries::new(vec![0.0, 1.0], vec![0.9, 0.8], "sx").unwrap();
        assert!(path_length(&PathSource::data(&outside, 0.9), MetricKind::Qfi, 0.0, 1.0, &QuadConfig::default())
            .is_err());
    }

    #[test]
    fn cumulative_matches_direct() {
        let p = RelaxationParams::new(7.1e-3, 38.55e-3, 209.1).unwrap();
        let b0 = BlochVector::xz(FRAC_1_SQRT_2, FRAC_1_SQRT_2).unwrap();
        let src = PathSource::model(p, b0);
        let times = crate::series::linspace(0.0, 0.03, 31);
        let cfg = QuadConfig::with_rel_tol(1e-10);
        for metric in MetricKind::ALL {
            let cum = cumulative_path_length(&src, metric, &times, &cfg).unwrap();
            for (i, &t) in times.iter().enumerate().skip(1).step_by(7) {
                let direct = path_length(&src, metric, 0.0, t, &cfg).unwrap().value;
                assert!((cum[i].value - direct).abs() < 1e-9 * direct);
            }
        }
    }

    #[test]
    fn halving_tolerance_stays_within_error_estimate() {
        let p = RelaxationParams::new(1.15e-3, 12.8e-3, 209.1).unwrap();
        let b0 = BlochVector::xz(FRAC_1_SQRT_2, FRAC_1_SQRT_2).unwrap();
        let src = PathSource::model(p, b0);
        for metric in MetricKind::ALL {
            let a = path_length(&src, metric, 0.0, 0.04, &QuadConfig::with_rel_tol(1e-7)).unwrap();
            let b = path_length(&src, metric, 0.0, 0.04, &QuadConfig::with_rel_tol(5e-8)).unwrap();
            assert!((a.value - b.value).abs() < a.error, "{metric}: {a:?} vs {b:?}");
        }
    }

    #[test]
    fn qsl_time_saturates_on_geodesic() {
        let j = 209.1;
        let p = RelaxationParams::new(1e18, 1e18, j).unwrap();
        let b0 = BlochVector::xz(1.0, 0.0).unwrap();
        let tau = 0.6 / j;
        let t_star = qsl_time(&p, &b0, tau, MetricKind::Qfi, &QuadConfig::with_rel_tol(1e-10)).unwrap();
        assert!((t_star - tau).abs() < 1e-6 * tau);
    }

    #[test]
    fn qsl_time_bounded_by_tau() {
        let b0 = BlochVector::xz(FRAC_1_SQRT_2, FRAC_1_SQRT_2).unwrap();
        for (t1h, t2c) in [(7.1e-3, 38.55e-3), (1.15e-3, 12.8e-3), (0.425e-3, 5.49e-3)] {
            let p = RelaxationParams::new(t1h, t2c, 209.1).unwrap();
            for metric in MetricKind::ALL {
                let t = qsl_time(&p, &b0, 0.02, metric, &QuadConfig::default()).unwrap();
                assert!(t > 0.0 && t <= 0.02);
            }
        }
        let p = RelaxationParams::new(1e-3, 1e-2, 209.1).unwrap();
        let incoherent = BlochVector::xz(0.0, 1.0).unwrap();
        assert!(matches!(
            qsl_time(&p, &incoherent, 0.01, MetricKind::Qfi, &QuadConfig::default()),
            Err(Error::Degenerate(_))
        ));
    }

    fn series(t: &[f64], v: &[f64]) -> TimeSeries {
        TimeSeries::new(t.to_vec(), v.to_vec(), "d").unwrap()
    }

    #[test]
    fn crossover_detection() {
        let t: Vec<f64> = (0..100).map(|i| i as f64 * 0.01).collect();
        let zero = series(&t, &vec![0.0; 100]);
        let pos = series(&t, &vec![0.1; 100]);
        let c = crossover_times(&pos, &zero, DEFAULT_NOISE_FLOOR).unwrap();
        assert!(c.times.is_empty());
        assert_eq!(c.timeline.len(), 1);
        assert_eq!(c.timeline[0].metric, MetricKind::Wy);

        let wave: Vec<f64> = t.iter().map(|&t| (2.0 * PI * t).sin() * 0.1 + 0.01).collect();
        let c = crossover_times(&series(&t, &wave), &zero, DEFAULT_NOISE_FLOOR).unwrap();
        // sin(2πt) = −0.1 at t ≈ 0.516 and t ≈ 0.984
        assert_eq!(c.times.len(), 2);
        let exact = 0.5 + (0.1f64).asin() / (2.0 * PI);
        assert!((c.times[0] - exact).abs() < 1e-3);
        assert_eq!(
            c.timeline.iter().map(|i| i.metric).collect::<Vec<_>>(),
            vec![MetricKind::Wy, MetricKind::Qfi, MetricKind::Wy]
        );

        // sub-floor jitter around zero does not count
        let jitter: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 5e-5 } else { -5e-5 }).collect();
        let c = crossover_times(&series(&t, &jitter), &zero, DEFAULT_NOISE_FLOOR).unwrap();
        assert!(c.times.is_empty() && c.timeline.is_empty());

        let other = series(&t[..50], &vec![0.0; 50]);
        assert!(matches!(crossover_times(&pos, &other, 1e-4), Err(Error::Data(_))));
    }
}
