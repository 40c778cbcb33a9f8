//! Non-Hermitian dynamics of laser-driven bosonic atom pairs with strong
//! two-body losses.
//!
//! The library models a pair of two-level atoms confined to one lattice site,
//! driven by a near-resonant laser and subject to inelastic losses when both
//! atoms are excited. It provides:
//!
//! - [`hamiltonian`]: the 3x3 effective non-Hermitian Hamiltonian over
//!   `(|gg>, |eg>, |ee>)` and its two-level reduction in the quantum Zeno
//!   regime of strong dissipation;
//! - [`spectrum`]: complex eigenvalues, biorthogonal left/right eigenvectors
//!   and branch tracking across detuning sweeps;
//! - [`dynamics`]: time propagation along Landau-Zener ramp protocols, with
//!   Lindblad and quantum-trajectory Monte Carlo cross-validations;
//! - [`adiabatic`]: quasi-adiabatic transport diagnostics (Berry connections,
//!   attenuation exponents, survival-probability bounds);
//! - [`experiment`]: the ensemble measurement model (singly/doubly occupied
//!   sites, repumping efficiency) and decay-curve fitting.
//!
//! All internal quantities are angular frequencies in rad/s; file and config
//! I/O uses ordinary frequencies in Hz with the convention `nu = omega / 2pi`.

pub mod adiabatic;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod hamiltonian;
pub mod math;
pub mod ode;
pub mod spectrum;

mod guide;

pub use error::{Error, Result};
pub use hamiltonian::{
    build_coupling, build_effective_two_level, build_h0, build_heff, derive_pq, derive_pq_as,
    lambda12_approx, EffectiveTwoLevel, PairOperator, PairParams, PqConvention,
};
pub use spectrum::{
    diagonalize, linspace, perturbative_decay_rates, sweep_spectrum, zeno_crossover_report,
    DressedState, SpectralSweep,
};

use std::f64::consts::TAU;

/// Ordinary frequency (Hz) to angular frequency (rad/s).
pub fn hz(f: f64) -> f64 {
    TAU * f
}

/// Angular frequency (rad/s) to ordinary frequency (Hz).
pub fn to_hz(omega: f64) -> f64 {
    omega / TAU
}
