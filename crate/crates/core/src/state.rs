//! Single-qubit Bloch vectors, two-qubit density matrices and relaxation parameters.
//!
//! Two-qubit matrices are 4×4 in the basis |00⟩, |01⟩, |10⟩, |11⟩ with the
//! carbon (system) qubit as the first tensor factor and hydrogen as the second.

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Matrix2c = Matrix2<Complex64>;
pub type Matrix4c = Matrix4<Complex64>;

/// Slack allowed on |r|² ≤ 1.
pub const PHYSICALITY_TOL: f64 = 1e-12;
pub const HERMITICITY_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
/// Smallest eigenvalue accepted for a positive semidefinite matrix.
pub const PSD_TOL: f64 = -1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn identity2() -> Matrix2c {
    Matrix2c::identity()
}

pub fn sigma_x() -> Matrix2c {
    Matrix2c::new(ZERO, ONE, ONE, ZERO)
}

pub fn sigma_y() -> Matrix2c {
    Matrix2c::new(ZERO, -I, I, ZERO)
}

pub fn sigma_z() -> Matrix2c {
    Matrix2c::new(ONE, ZERO, ZERO, -ONE)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Matrix2c, b: &Matrix2c) -> Matrix4c {
    Matrix4c::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

/// Qubit state as the expectation values (⟨σx⟩, ⟨σy⟩, ⟨σz⟩).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    /// Builds a physical Bloch vector, rejecting |r|² > 1 + 1e-12.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let b = Self { x, y, z };
        b.check_physical()?;
        Ok(b)
    }

    /// State in the x–z plane, the only family the relaxation model produces.
    pub fn xz(x: f64, z: f64) -> Result<Self> {
        Self::new(x, 0.0, z)
    }

    pub fn norm_squared(&self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn is_pure(&self) -> bool {
        (self.norm_squared() - 1.0).abs() <= PHYSICALITY_TOL
    }

    pub fn check_physical(&self) -> Result<()> {
        let n2 = self.norm_squared();
        if !n2.is_finite() || n2 > 1.0 + PHYSICALITY_TOL {
            return Err(Error::Domain(format!(
                "Bloch vector ({}, {}, {}) has |r|^2 = {n2} > 1",
                self.x, self.y, self.z
            )));
        }
        Ok(())
    }

    /// ρ = (I + x σx + y σy + z σz) / 2.
    pub fn to_density(&self) -> Result<Matrix2c> {
        self.check_physical()?;
        let half = 0.5;
        Ok(Matrix2c::new(
            Complex64::new(half * (1.0 + self.z), 0.0),
            Complex64::new(half * self.x, -half * self.y),
            Complex64::new(half * self.x, half * self.y),
            Complex64::new(half * (1.0 - self.z), 0.0),
        ))
    }

    /// Inverse of [`BlochVector::to_density`].
    pub fn from_density(rho: &Matrix2c) -> Result<Self> {
        let herm = (rho - rho.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max);
        if herm > HERMITICITY_TOL {
            return Err(Error::Domain(format!(
                "matrix is not Hermitian (max |rho - rho^dag| = {herm:e})"
            )));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::Domain(format!("trace {tr} is not 1")));
        }
        let off = rho[(0, 1)];
        Self::new(2.0 * off.re, -2.0 * off.im, (rho[(0, 0)] - rho[(1, 1)]).re)
    }
}

/// Thin wrappers matching the operation names used elsewhere in the toolkit.
pub fn bloch_to_density(b: &BlochVector) -> Result<Matrix2c> {
    b.to_density()
}

pub fn density_to_bloch(rho: &Matrix2c) -> Result<BlochVector> {
    BlochVector::from_density(rho)
}

/// Hermitian, unit-trace, positive semidefinite 4×4 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitDensity(Matrix4c);

impl TwoQubitDensity {
    pub fn new(m: Matrix4c) -> Result<Self> {
        let rho = Self(m);
        rho.validate()?;
        Ok(rho)
    }

    /// Wraps a matrix without validation; callers that iterate channels use
    /// this and validate on demand.
    pub fn new_unchecked(m: Matrix4c) -> Self {
        Self(m)
    }

    pub fn product(carbon: &Matrix2c, hydrogen: &Matrix2c) -> Result<Self> {
        Self::new(kron(carbon, hydrogen))
    }

    pub fn matrix(&self) -> &Matrix4c {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix4c {
        self.0
    }

    pub fn hermiticity_error(&self) -> f64 {
        (self.0 - self.0.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        // Symmetrize so round-off in the anti-Hermitian part does not leak in.
        let h = (self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > HERMITICITY_TOL {
            return Err(Error::Domain(format!("density matrix is not Hermitian ({herm:e})")));
        }
        let tr = self.0.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::Domain(format!("density matrix trace {tr} is not 1")));
        }
        let min_eig = self.min_eigenvalue();
        if min_eig < PSD_TOL {
            return Err(Error::Domain(format!(
                "density matrix is not positive semidefinite (min eigenvalue {min_eig:e})"
            )));
        }
        Ok(())
    }

    /// Reduced state of the first (carbon) qubit.
    pub fn carbon_marginal(&self) -> Matrix2c {
        Matrix2c::from_fn(|r, c| self.0[(2 * r, 2 * c)] + self.0[(2 * r + 1, 2 * c + 1)])
    }

    /// Reduced state of the second (hydrogen) qubit.
    pub fn hydrogen_marginal(&self) -> Matrix2c {
        Matrix2c::from_fn(|r, c| self.0[(r, c)] + self.0[(r + 2, c + 2)])
    }

    /// Bloch components of the carbon marginal, without re-validating.
    pub fn carbon_bloch(&self) -> BlochVector {
        let m = self.carbon_marginal();
        let off = m[(0, 1)];
        BlochVector {
            x: 2.0 * off.re,
            y: -2.0 * off.im,
            z: (m[(0, 0)] - m[(1, 1)]).re,
        }
    }
}

/// Relaxation constants of the scalar-relaxation model, in seconds and hertz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxationParams {
    /// Longitudinal relaxation time of the hydrogen spin.
    pub t1h: f64,
    /// Transverse relaxation time of the carbon spin.
    pub t2c: f64,
    /// Scalar coupling strength.
    pub j: f64,
}

impl RelaxationParams {
    pub fn new(t1h: f64, t2c: f64, j: f64) -> Result<Self> {
        let p = Self { t1h, t2c, j };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("T1H", self.t1h), ("T2C", self.t2c), ("J", self.j)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// 16π²J²T1H² − 1, evaluated as a product to stay accurate near zero.
    pub fn discriminant(&self) -> f64 {
        let a = 4.0 * std::f64::consts::PI * self.j * self.t1h;
        (a - 1.0) * (a + 1.0)
    }
}
