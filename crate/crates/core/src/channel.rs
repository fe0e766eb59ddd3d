//! Kraus channels and the scalar-coupling unitary acting on the two-spin system.

use num_complex::Complex64;

use crate::state::{identity2, kron, sigma_y, sigma_z, Matrix4c, TwoQubitDensity};
use crate::{Error, Result};

pub const COMPLETENESS_TOL: f64 = 1e-12;

/// Ordered list of Kraus operators with Σ K†K = I.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet {
    ops: Vec<Matrix4c>,
}

impl KrausSet {
    pub fn new(ops: Vec<Matrix4c>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::Domain("a Kraus set needs at least one operator".into()));
        }
        let set = Self { ops };
        let err = set.completeness_error();
        if err > COMPLETENESS_TOL {
            return Err(Error::Domain(format!("Kraus operators are not complete ({err:e})")));
        }
        Ok(set)
    }

    pub fn operators(&self) -> &[Matrix4c] {
        &self.ops
    }

    /// max |Σ K†K − I|.
    pub fn completeness_error(&self) -> f64 {
        let sum: Matrix4c = self.ops.iter().map(|k| k.adjoint() * k).sum();
        (sum - Matrix4c::identity()).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// ρ ↦ Σ K ρ K†.
    pub fn apply_matrix(&self, rho: &Matrix4c) -> Matrix4c {
        self.ops.iter().map(|k| k * rho * k.adjoint()).sum()
    }

    pub fn apply(&self, rho: &TwoQubitDensity) -> TwoQubitDensity {
        TwoQubitDensity::new_unchecked(self.apply_matrix(rho.matrix()))
    }

    /// Channel that applies `self` first and then `next`.
    pub fn then(&self, next: &KrausSet) -> KrausSet {
        let ops = next
            .ops
            .iter()
            .flat_map(|b| self.ops.iter().map(move |a| b * a))
            .collect();
        KrausSet { ops }
    }
}

fn scaled(m: Matrix4c, s: f64) -> Matrix4c {
    m * Complex64::new(s, 0.0)
}

fn check_step(dt: f64, relaxation: f64, name: &str) -> Result<()> {
    if !(relaxation.is_finite() && relaxation > 0.0) {
        return Err(Error::Domain(format!("{name} must be positive, got {relaxation}")));
    }
    if !(dt.is_finite() && dt >= 0.0) {
        return Err(Error::Domain(format!("time step must be non-negative, got {dt}")));
    }
    Ok(())
}

/// (1 + e^{−dt/2T})/2, the weight of the identity branch.
pub fn survival_weight(dt: f64, relaxation: f64) -> f64 {
    0.5 * (1.0 + (-dt / (2.0 * relaxation)).exp())
}

/// Phase damping on the carbon qubit: √q I⊗I and √(1−q) σz⊗I.
pub fn phase_damping_kraus(dt: f64, t2c: f64) -> Result<KrausSet> {
    check_step(dt, t2c, "T2C")?;
    let q = survival_weight(dt, t2c);
    let id = kron(&identity2(), &identity2());
    let zc = kron(&sigma_z(), &identity2());
    Ok(KrausSet {
        ops: vec![scaled(id, q.sqrt()), scaled(zc, (1.0 - q).sqrt())],
    })
}

/// Bit-phase flip on the hydrogen qubit: √p I⊗I and √(1−p) I⊗σy.
pub fn bit_phase_flip_kraus(dt: f64, t1h: f64) -> Result<KrausSet> {
    check_step(dt, t1h, "T1H")?;
    let p = survival_weight(dt, t1h);
    let id = kron(&identity2(), &identity2());
    let yh = kron(&identity2(), &sigma_y());
    Ok(KrausSet {
        ops: vec![scaled(id, p.sqrt()), scaled(yh, (1.0 - p).sqrt())],
    })
}

/// exp(−i H dt) for H = (πJ/2) σz⊗σz.
pub fn coupling_unitary(dt: f64, j: f64) -> Result<Matrix4c> {
    if !(dt.is_finite() && dt >= 0.0) {
        return Err(Error::Domain(format!("time step must be non-negative, got {dt}")));
    }
    if !j.is_finite() {
        return Err(Error::Domain(format!("coupling must be finite, got {j}")));
    }
    let phase = std::f64::consts::PI * j * dt / 2.0;
    let minus = Complex64::from_polar(1.0, -phase);
    let plus = Complex64::from_polar(1.0, phase);
    // diag(σz⊗σz) = (+1, −1, −1, +1)
    Ok(Matrix4c::from_diagonal(&nalgebra::Vector4::new(minus, plus, plus, minus)))
}
