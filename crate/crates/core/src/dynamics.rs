//! Closed-form reduced dynamics of the carbon coherence.
//!
//! The transverse magnetization decays as ⟨σx⟩_t = ξ(t)⟨σx⟩_0 with
//!
//! ```text
//! ξ(t) = e^{−t/2T2C} e^{−kt} [ k·t·sinc(ωt) + cos(ωt) ],   k = 1/(4 T1H),
//! ω = k·√(16π²J²T1H² − 1)
//! ```
//!
//! For 16π²J²T1H² < 1 the frequency is imaginary and sinc/cos continue to
//! sinh(x)/x and cosh(x). Writing g(t) = e^{−kt}[k·t·sinc(ωt) + cos(ωt)], g
//! solves the damped oscillator g'' + 2k g' + π²J² g = 0 with g(0) = 1,
//! g'(0) = 0, which gives the compact derivative g' = −π²J² t e^{−kt} sinc(ωt).

use std::f64::consts::PI;

use crate::quadrature::kronrod15;
use crate::state::{BlochVector, RelaxationParams};
use crate::{Error, Result};

pub use crate::series::TimeSeries;

/// |16π²J²T1H² − 1| below which the critically damped limit is used.
pub const BRANCH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// 16π²J²T1H² > 1: damped oscillation.
    Oscillatory,
    Critical,
    /// 16π²J²T1H² < 1: overdamped, no oscillation.
    Overdamped,
}

pub fn branch(p: &RelaxationParams) -> Branch {
    let s = p.discriminant();
    if s.abs() <= BRANCH_TOL {
        Branch::Critical
    } else if s > 0.0 {
        Branch::Oscillatory
    } else {
        Branch::Overdamped
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 + x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sinh() / x
    }
}

/// (e^{−kt}·t·sinc(ωt), e^{−kt}·cos(ωt)) with the branch continuation applied.
fn kernel(t: f64, p: &RelaxationParams) -> (f64, f64) {
    let k = 0.25 / p.t1h;
    let s = p.discriminant();
    match branch(p) {
        Branch::Critical => {
            let e = (-k * t).exp();
            (t * e, e)
        }
        Branch::Oscillatory => {
            let w = k * s.sqrt();
            let e = (-k * t).exp();
            (e * t * sinc(w * t), e * (w * t).cos())
        }
        Branch::Overdamped => {
            let w = k * (-s).sqrt();
            let x = w * t;
            if x < 30.0 {
                let e = (-k * t).exp();
                (e * t * sinhc(x), e * x.cosh())
            } else {
                // e^{−kt}cosh(wt) = (e^{−(k−w)t} + e^{−(k+w)t})/2 with k − w = π²J²/(k + w)
                let slow = (-(PI * PI * p.j * p.j) / (k + w) * t).exp();
                let fast = (-(k + w) * t).exp();
                (0.5 * (slow - fast) / w, 0.5 * (slow + fast))
            }
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Domain(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// Coherence envelope ξ(t); ξ(0) = 1 and |ξ| ≤ 1.
pub fn xi(t: f64, p: &RelaxationParams) -> Result<f64> {
    check_time(t)?;
    p.validate()?;
    let k = 0.25 / p.t1h;
    let (es, ec) = kernel(t, p);
    Ok((-t / (2.0 * p.t2c)).exp() * (k * es + ec))
}

/// dξ/dt in 1/s.
pub fn xi_derivative(t: f64, p: &RelaxationParams) -> Result<f64> {
    check_time(t)?;
    p.validate()?;
    let k = 0.25 / p.t1h;
    let gamma = 0.5 / p.t2c;
    let (es, ec) = kernel(t, p);
    let g = k * es + ec;
    let dg = -(PI * p.j).powi(2) * es;
    Ok((-gamma * t).exp() * (dg - gamma * g))
}

/// (ξ, dξ/dt) in one kernel evaluation.
pub(crate) fn xi_with_derivative(t: f64, p: &RelaxationParams) -> (f64, f64) {
    let k = 0.25 / p.t1h;
    let gamma = 0.5 / p.t2c;
    let (es, ec) = kernel(t, p);
    let g = k * es + ec;
    let dg = -(PI * p.j).powi(2) * es;
    let env = (-gamma * t).exp();
    (env * g, env * (dg - gamma * g))
}

/// (1 − ξ(t), 1 + ξ(t)), each accurate where it is small.
pub(crate) fn xi_complements(t: f64, p: &RelaxationParams) -> (f64, f64) {
    let k = 0.25 / p.t1h;
    let gamma = 0.5 / p.t2c;
    let s = p.discriminant();
    let (es, ec) = kernel(t, p);
    let g = k * es + ec;
    let env = (-gamma * t).exp();
    let rate = k * (1.0 + s.abs().sqrt());
    let one_minus_g = if rate * t < 0.5 {
        // 1 − g = π²J² ∫_0^t e^{−ks} s sinc(ωs) ds
        (PI * p.j).powi(2) * kronrod15(|s| kernel(s, p).0, 0.0, t)
    } else {
        1.0 - g
    };
    let one_minus = -(-gamma * t).exp_m1() + env * one_minus_g;
    let one_plus = if branch(p) == Branch::Oscillatory && g < 0.0 {
        // 1 + g = 2cos²(ωt/2) + (e^{−kt} − 1)cos(ωt) + k e^{−kt} t sinc(ωt)
        let w = k * s.sqrt();
        let one_plus_g = 2.0 * (0.5 * w * t).cos().powi(2) + (-k * t).exp_m1() * (w * t).cos() + k * es;
        one_plus_g + g * (-gamma * t).exp_m1()
    } else {
        1.0 + env * g
    };
    (one_minus, one_plus)
}

pub(crate) fn require_xz_plane(b: &BlochVector) -> Result<()> {
    if b.y.abs() > 1e-12 {
        return Err(Error::UnsupportedState(format!(
            "initial states must lie in the x-z plane, got <sigma_y> = {}",
            b.y
        )));
    }
    b.check_physical()
}

/// ρ_t of the carbon spin: (ξ(t)·x0, 0, z0).
pub fn evolve_bloch(t: f64, b0: &BlochVector, p: &RelaxationParams) -> Result<BlochVector> {
    require_xz_plane(b0)?;
    Ok(BlochVector {
        x: xi(t, p)? * b0.x,
        y: 0.0,
        z: b0.z,
    })
}

/// ⟨σx⟩_t sampled on `times`.
pub fn sx_series(times: Vec<f64>, b0: &BlochVector, p: &RelaxationParams) -> Result<TimeSeries> {
    require_xz_plane(b0)?;
    TimeSeries::from_fn(times, "sx", |t| Ok(xi(t, p)? * b0.x))
}
