//! Damped least squares (Levenberg–Marquardt) with a numerical Jacobian.

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::xi;
use crate::series::TimeSeries;
use crate::state::RelaxationParams;
use crate::{Error, Result};

/// Time constants outside this range (seconds) are flagged as collapsed.
pub const TIME_BOUNDS: (f64, f64) = (1e-9, 1e3);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: IndexMap<String, f64>,
    pub residual_rms: f64,
    /// Row-major, ordered like the fitted entries of `params`.
    pub covariance: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
    #[serde(default)]
    pub iterations: usize,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    /// 1σ standard error of a fitted parameter.
    pub fn std_error(&self, name: &str) -> Option<f64> {
        let i = self.params.get_index_of(name)?;
        self.covariance.get(i)?.get(i).map(|v| v.max(0.0).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmConfig {
    pub max_iterations: usize,
    pub param_tol: f64,
    pub residual_tol: f64,
    pub initial_lambda: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            param_tol: 1e-10,
            residual_tol: 1e-12,
            initial_lambda: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Transform {
    Identity,
    /// Positive parameter optimized as its logarithm.
    Log,
}

impl Transform {
    fn to_internal(self, v: f64) -> f64 {
        match self {
            Transform::Identity => v,
            Transform::Log => v.ln(),
        }
    }
    fn to_external(self, u: f64) -> f64 {
        match self {
            Transform::Identity => u,
            Transform::Log => u.exp(),
        }
    }
}

struct Param {
    name: &'static str,
    guess: f64,
    transform: Transform,
}

fn rss(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

fn jacobian<F: Fn(&[f64]) -> Option<Vec<f64>>>(f: &F, p: &[f64], r0: &[f64]) -> Option<DMatrix<f64>> {
    let (m, n) = (r0.len(), p.len());
    let mut jac = DMatrix::zeros(m, n);
    let mut q = p.to_vec();
    for j in 0..n {
        let h = 6e-6 * p[j].abs().max(1e-3);
        q[j] = p[j] + h;
        let fp = f(&q);
        q[j] = p[j] - h;
        let fm = f(&q);
        q[j] = p[j];
        let col: Vec<f64> = match (fp, fm) {
            (Some(a), Some(b)) => a.iter().zip(&b).map(|(a, b)| (a - b) / (2.0 * h)).collect(),
            (Some(a), None) => a.iter().zip(r0).map(|(a, b)| (a - b) / h).collect(),
            (None, Some(b)) => r0.iter().zip(&b).map(|(a, b)| (a - b) / h).collect(),
            (None, None) => return None,
        };
        jac.set_column(j, &DVector::from_vec(col));
    }
    Some(jac)
}

struct Outcome {
    params: Vec<f64>,
    residuals: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// Minimizes Σ r_i(p)². Every accepted step strictly lowers the sum; `f`
/// returns `None` where the model is undefined, which rejects the step.
fn levenberg_marquardt<F: Fn(&[f64]) -> Option<Vec<f64>>>(f: &F, p0: Vec<f64>, cfg: &LmConfig) -> Result<Outcome> {
    let mut p = p0;
    let mut r = f(&p).ok_or_else(|| Error::Parameter("model undefined at the initial guess".into()))?;
    let mut cost = rss(&r);
    let mut lambda = cfg.initial_lambda;
    let n = p.len();
    // damping scale keeps the largest curvature seen per parameter
    let mut scale = vec![0.0f64; n];
    for iter in 1..=cfg.max_iterations {
        let jac = jacobian(f, &p, &r).ok_or_else(|| Error::Data("Jacobian undefined".into()))?;
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * DVector::from_column_slice(&r);
        let dmax = jtj.diagonal().max().max(f64::MIN_POSITIVE);
        for (i, s) in scale.iter_mut().enumerate() {
            *s = s.max(jtj[(i, i)]).max(1e-12 * dmax);
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * scale[i];
            }
            let step = match a.clone().cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => match a.pseudo_inverse(1e-14 * dmax) {
                    Ok(pinv) => pinv * (-&grad),
                    Err(_) => break,
                },
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            match f(&trial) {
                Some(rt) if rss(&rt) < cost => {
                    let new_cost = rss(&rt);
                    let p_norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let small_step = step.norm() <= cfg.param_tol * (p_norm + cfg.param_tol);
                    let small_change = cost - new_cost <= cfg.residual_tol * cost;
                    p = trial;
                    r = rt;
                    cost = new_cost;
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    if small_step || small_change {
                        return Ok(Outcome {
                            params: p,
                            residuals: r,
                            iterations: iter,
                            converged: true,
                        });
                    }
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if !accepted {
            // no descent direction left at working precision
            return Ok(Outcome {
                params: p,
                residuals: r,
                iterations: iter,
                converged: true,
            });
        }
    }
    Ok(Outcome {
        params: p,
        residuals: r,
        iterations: cfg.max_iterations,
        converged: false,
    })
}

/// Runs the fit in internal coordinates and assembles the result in physical ones.
fn run_fit<M: Fn(f64, &[f64]) -> Option<f64>>(
    series: &TimeSeries,
    params: &[Param],
    fixed: &[(&'static str, f64)],
    model: M,
    cfg: &LmConfig,
) -> Result<FitResult> {
    let (t, y) = (series.times(), series.values());
    let external = |u: &[f64]| -> Vec<f64> {
        u.iter().zip(params).map(|(u, p)| p.transform.to_external(*u)).collect()
    };
    let residuals_phys = |q: &[f64]| -> Option<Vec<f64>> {
        t.iter()
            .zip(y)
            .map(|(&t, &y)| model(t, q).filter(|m| m.is_finite()).map(|m| m - y))
            .collect()
    };
    let residuals = |u: &[f64]| residuals_phys(&external(u));
    let u0: Vec<f64> = params.iter().map(|p| p.transform.to_internal(p.guess)).collect();
    if u0.iter().any(|u| !u.is_finite()) {
        return Err(Error::Parameter("initial guess must have positive time constants".into()));
    }
    let out = levenberg_marquardt(&residuals, u0, cfg)?;
    let q = external(&out.params);
    let m = t.len();
    let residual_rms = (rss(&out.residuals) / m as f64).sqrt();

    let dof = m.saturating_sub(q.len()).max(1);
    let s2 = rss(&out.residuals) / dof as f64;
    let covariance = match jacobian(&residuals_phys, &q, &out.residuals) {
        Some(jac) => {
            let jtj = jac.transpose() * &jac;
            let scale = jtj.diagonal().max().max(f64::MIN_POSITIVE);
            match jtj.pseudo_inverse(1e-14 * scale) {
                Ok(inv) => (0..q.len())
                    .map(|i| (0..q.len()).map(|j| s2 * inv[(i, j)]).collect())
                    .collect(),
                Err(_) => vec![vec![f64::NAN; q.len()]; q.len()],
            }
        }
        None => vec![vec![f64::NAN; q.len()]; q.len()],
    };

    let mut map = IndexMap::new();
    let mut flags = Vec::new();
    for (p, &v) in params.iter().zip(&q) {
        map.insert(p.name.to_string(), v);
        if p.transform == Transform::Log && !(TIME_BOUNDS.0..=TIME_BOUNDS.1).contains(&v) {
            flags.push(format!("{} collapsed to {v:e}", p.name));
        }
    }
    for &(name, v) in fixed {
        map.insert(name.to_string(), v);
        flags.push(format!("{name} fixed"));
    }
    let result = FitResult {
        params: map,
        residual_rms,
        covariance,
        flags,
        iterations: out.iterations,
    };
    if !out.converged {
        return Err(Error::FitNotConverged {
            iterations: out.iterations,
            best: Box::new(result),
        });
    }
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpCosGuess {
    pub m0: f64,
    pub t2c: f64,
    pub omega: f64,
}

impl ExpCosGuess {
    /// Rough starting point from the first sample, the span and the zero-crossing count.
    pub fn from_series(series: &TimeSeries) -> Result<Self> {
        series.require_len(2)?;
        let (t, v) = (series.times(), series.values());
        let span = t[t.len() - 1] - t[0];
        let crossings = v.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
        Ok(Self {
            m0: v[0],
            t2c: span / 3.0,
            omega: std::f64::consts::PI * crossings as f64 / span,
        })
    }
}

/// Fits M0·e^{−t/T2C}·cos(ωt). Parameters are named `M0`, `T2C` and `omega`.
pub fn fit_exp_cos(series: &TimeSeries, guess: &ExpCosGuess, cfg: &LmConfig) -> Result<FitResult> {
    series.require_len(8)?;
    if !(guess.t2c > 0.0) {
        return Err(Error::Parameter(format!("T2C guess must be positive, got {}", guess.t2c)));
    }
    let params = [
        Param { name: "M0", guess: guess.m0, transform: Transform::Identity },
        Param { name: "T2C", guess: guess.t2c, transform: Transform::Log },
        Param { name: "omega", guess: guess.omega, transform: Transform::Identity },
    ];
    run_fit(
        series,
        &params,
        &[],
        |t, q| Some(q[0] * (-t / q[1]).exp() * (q[2] * t).cos()),
        cfg,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiGuess {
    pub amplitude: f64,
    pub params: RelaxationParams,
    /// Keep J at its guessed value.
    pub fix_j: bool,
    /// Starting value for a cos(ω_off·t) frequency-offset factor; `None` disables it.
    pub omega_off: Option<f64>,
}

/// Fits amplitude·ξ(t; T1H, T2C, J) (optionally times cos(ω_off t)).
/// Parameters are named `amplitude`, `T1H`, `T2C`, `J` and `omega_off`.
pub fn fit_xi_model(series: &TimeSeries, guess: &XiGuess, cfg: &LmConfig) -> Result<FitResult> {
    series.require_len(8)?;
    guess.params.validate()?;
    let mut params = vec![
        Param { name: "amplitude", guess: guess.amplitude, transform: Transform::Identity },
        Param { name: "T1H", guess: guess.params.t1h, transform: Transform::Log },
        Param { name: "T2C", guess: guess.params.t2c, transform: Transform::Log },
    ];
    let mut fixed = Vec::new();
    if guess.fix_j {
        fixed.push(("J", guess.params.j));
    } else {
        params.push(Param { name: "J", guess: guess.params.j, transform: Transform::Log });
    }
    let offset_index = guess.omega_off.map(|w| {
        params.push(Param { name: "omega_off", guess: w, transform: Transform::Identity });
        params.len() - 1
    });
    let j_fixed = guess.params.j;
    let fix_j = guess.fix_j;
    run_fit(
        series,
        &params,
        &fixed,
        |t, q| {
            let j = if fix_j { j_fixed } else { q[3] };
            let p = RelaxationParams::new(q[1], q[2], j).ok()?;
            let base = q[0] * xi(t, &p).ok()?;
            Some(match offset_index {
                Some(k) => base * (q[k] * t).cos(),
                None => base,
            })
        },
        cfg,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::linspace;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::PI;

    fn exp_cos(m0: f64, t2c: f64, omega: f64) -> TimeSeries {
        TimeSeries::from_fn(linspace(0.0, 0.1, 400), "fid", |t| Ok(m0 * (-t / t2c).exp() * (omega * t).cos())).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn exp_cos_noiseless() {
        let omega = 2.0 * PI * 5.0;
        let s = exp_cos(1.0, 0.03, omega);
        let g = ExpCosGuess { m0: 0.8, t2c: 0.05, omega: 28.0 };
        let f = fit_exp_cos(&s, &g, &LmConfig::default()).unwrap();
        assert!(rel(f.get("M0").unwrap(), 1.0) < 1e-6);
        assert!(rel(f.get("T2C").unwrap(), 0.03) < 1e-6);
        assert!(rel(f.get("omega").unwrap(), omega) < 1e-6);
        assert!(f.residual_rms < 1e-8);
        assert_eq!(f.covariance.len(), 3);
    }

    #[test]
    fn exp_cos_noisy() {
        let omega = 2.0 * PI * 5.0;
        let clean = exp_cos(1.0, 0.03, omega);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let s = clean.with_values(clean.values().iter().map(|v| v + noise.sample(&mut rng)).collect(), "n").unwrap();
        let f = fit_exp_cos(&s, &ExpCosGuess::from_series(&s).unwrap(), &LmConfig::default()).unwrap();
        assert!(rel(f.get("M0").unwrap(), 1.0) < 0.05);
        assert!(rel(f.get("T2C").unwrap(), 0.03) < 0.05);
        assert!(rel(f.get("omega").unwrap(), omega) < 0.05);
        assert!(f.std_error("T2C").unwrap() > 0.0);
    }

    #[test]
    fn exp_cos_pure_exponential() {
        let s = exp_cos(1.0, 0.03, 0.0);
        let f = fit_exp_cos(&s, &ExpCosGuess { m0: 1.1, t2c: 0.02, omega: 3.0 }, &LmConfig::default()).unwrap();
        assert!(rel(f.get("T2C").unwrap(), 0.03) < 1e-4);
        assert!(f.get("omega").unwrap().abs() < 0.1);
    }

    #[test]
    fn rejects_bad_input() {
        let short = TimeSeries::new(linspace(0.0, 1.0, 5), vec![1.0; 5], "s").unwrap();
        assert!(fit_exp_cos(&short, &ExpCosGuess { m0: 1.0, t2c: 1.0, omega: 0.0 }, &LmConfig::default()).is_err());
        let s = exp_cos(1.0, 0.03, 1.0);
        assert!(fit_exp_cos(&s, &ExpCosGuess { m0: 1.0, t2c: -1.0, omega: 0.0 }, &LmConfig::default()).is_err());
    }

    #[test]
    fn non_convergence_carries_best_so_far() {
        let s = exp_cos(1.0, 0.03, 2.0 * PI * 5.0);
        let cfg = LmConfig { max_iterations: 1, ..LmConfig::default() };
        match fit_exp_cos(&s, &ExpCosGuess { m0: 0.5, t2c: 0.01, omega: 20.0 }, &cfg) {
            Err(Error::FitNotConverged { iterations, best }) => {
                assert_eq!(iterations, 1);
                assert!(best.params.contains_key("T2C"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    fn xi_data(p: &RelaxationParams, amplitude: f64, tau: f64) -> TimeSeries {
        TimeSeries::from_fn(linspace(0.0, tau, 600), "sx", |t| Ok(amplitude * xi(t, p)?)).unwrap()
    }

    #[test]
    fn xi_model_recovers_20mm() {
        let p = RelaxationParams::new(7.1e-3, 38.55e-3, 209.1).unwrap();
        let s = xi_data(&p, 0.7071, 0.1);
        let g = XiGuess {
            amplitude: 0.6,
            params: RelaxationParams::new(5e-3, 30e-3, 209.1).unwrap(),
            fix_j: true,
            omega_off: None,
        };
        let f = fit_xi_model(&s, &g, &LmConfig::default()).unwrap();
        assert!(rel(f.get("T1H").unwrap(), 7.1e-3) < 1e-4);
        assert!(rel(f.get("T2C").unwrap(), 38.55e-3) < 1e-4);
        assert_eq!(f.get("J"), Some(209.1));
        assert!(f.flags.iter().any(|s| s == "J fixed"));
        let json = serde_json::to_value(&f).unwrap();
        assert!(json["params"]["T1H"].is_number());
        assert!(json["covariance"].is_array());
    }

    #[test]
    fn xi_model_deep_markovian() {
        let p = RelaxationParams::new(0.2e-3, 5e-3, 209.1).unwrap();
        assert!(4.0 * PI * p.j * p.t1h < 1.0);
        let s = xi_data(&p, 1.0, 0.03);
        let g = XiGuess {
            amplitude: 0.9,
            params: RelaxationParams::new(0.3e-3, 4e-3, 209.1).unwrap(),
            fix_j: true,
            omega_off: None,
        };
        let f = fit_xi_model(&s, &g, &LmConfig::default()).unwrap();
        assert!(rel(f.get("T2C").unwrap(), 5e-3) < 1e-3);
        assert!(rel(f.get("T1H").unwrap(), 0.2e-3) < 1e-2);
    }

    #[test]
    fn xi_model_with_free_j_and_offset() {
        let p = RelaxationParams::new(7.1e-3, 38.55e-3, 209.1).unwrap();
        let s = TimeSeries::from_fn(linspace(0.0, 0.08, 800), "sx", |t| Ok(xi(t, &p)? * (15.0 * t).cos())).unwrap();
        let g = XiGuess {
            amplitude: 1.0,
            params: RelaxationParams::new(6e-3, 35e-3, 205.0).unwrap(),
            fix_j: false,
            omega_off: Some(10.0),
        };
        let f = fit_xi_model(&s, &g, &LmConfig::default()).unwrap();
        assert!(rel(f.get("J").unwrap(), 209.1) < 1e-4);
        assert!(rel(f.get("omega_off").unwrap().abs(), 15.0) < 1e-3);
    }
}
