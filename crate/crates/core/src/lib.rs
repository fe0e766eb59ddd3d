//! Simulation and information-geometric analysis of a dephasing qubit.
//!
//! The carbon spin of a heteronuclear two-spin system loses coherence through
//! its scalar coupling to a rapidly relaxing partner spin. This crate provides
//!
//! - single- and two-qubit state types plus the Kraus channels and coupling
//!   unitary acting on them ([`state`], [`channel`]),
//! - the closed-form reduced dynamics and a trotterized two-qubit simulator
//!   that converges to it ([`dynamics`], [`trotter`]),
//! - path lengths, geodesic lengths and relative deviations for the quantum
//!   Fisher information and Wigner–Yanase metrics ([`geometry`]),
//! - an ℓ1-coherence revival witness of non-Markovianity ([`markovianity`]),
//! - a data pipeline for measured transverse-magnetization series ([`ingest`]).

pub mod channel;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod ingest;
pub mod markovianity;
pub mod presets;
pub mod quadrature;
pub mod series;
pub mod state;
pub mod trotter;

pub use error::{Error, Result};
pub use series::TimeSeries;
pub use state::{BlochVector, RelaxationParams, TwoQubitDensity};
