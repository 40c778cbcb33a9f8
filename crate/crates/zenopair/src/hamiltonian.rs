//! Construction of the non-Hermitian pair Hamiltonian and its reduction to an
//! effective two-level problem in the strong-dissipation (quantum Zeno) regime.
//!
//! All quantities are angular frequencies (rad/s). The three-dimensional basis
//! is ordered `(|gg>, |eg>, |ee>)` throughout.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{czero, M3};

/// Physical parameters of one atom pair. Interaction energies and rates are
/// angular frequencies (energy divided by hbar), rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairParams {
    pub u_gg: f64,
    pub u_eg: f64,
    pub u_ee: f64,
    /// Bare two-body loss rate for the doubly-excited state.
    pub gamma_ee: f64,
    /// Rabi frequency of the drive.
    pub omega: f64,
}

/// Which definition of the interaction-shift parameters (p, q) to apply when
/// deriving them from the interaction energies. The two published conventions
/// differ by a factor two in p and a sign in q.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PqConvention {
    /// p = (U_ee - U_gg)/2, q = U_eg - (U_gg + U_ee)/2.
    #[default]
    MainText,
    /// p = U_ee - U_gg, q = (U_ee + U_gg)/2 - U_eg.
    Table1,
}

impl PairParams {
    /// Reference collisional parameters: U_gg/h = 1.4 kHz with the measured
    /// ratios U_eg/U_gg = 0.905, U_ee/U_gg = 1.21 and hbar*Gamma_ee/U_gg = 1.02.
    pub fn reference(omega: f64) -> Self {
        let u_gg = std::f64::consts::TAU * 1400.0;
        PairParams {
            u_gg,
            u_eg: 0.905 * u_gg,
            u_ee: 1.21 * u_gg,
            gamma_ee: 1.02 * u_gg,
            omega,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_ee >= 0.0) {
            return Err(Error::InvalidParams("gamma_ee must be >= 0".into()));
        }
        if !(self.omega >= 0.0) {
            return Err(Error::InvalidParams("omega must be >= 0".into()));
        }
        let (p, q) = derive_pq(self);
        if !p.is_finite() || !q.is_finite() {
            return Err(Error::InvalidParams("derived p, q must be finite".into()));
        }
        Ok(())
    }

    pub fn p(&self) -> f64 {
        derive_pq(self).0
    }

    pub fn q(&self) -> f64 {
        derive_pq(self).1
    }
}

/// p = (U_ee - U_gg)/2 and q = U_eg - (U_gg + U_ee)/2, rad/s.
pub fn derive_pq(params: &PairParams) -> (f64, f64) {
    derive_pq_as(params, PqConvention::MainText)
}

pub fn derive_pq_as(params: &PairParams, convention: PqConvention) -> (f64, f64) {
    match convention {
        PqConvention::MainText => (
            (params.u_ee - params.u_gg) / 2.0,
            params.u_eg - (params.u_gg + params.u_ee) / 2.0,
        ),
        PqConvention::Table1 => (
            params.u_ee - params.u_gg,
            (params.u_ee + params.u_gg) / 2.0 - params.u_eg,
        ),
    }
}

/// A 3x3 operator over the ordered basis `(|gg>, |eg>, |ee>)`, entries in
/// rad/s (Hamiltonian divided by hbar).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairOperator {
    pub m: M3,
}

impl PairOperator {
    pub fn zero() -> Self {
        PairOperator { m: [[czero(); 3]; 3] }
    }

    pub fn add(&self, other: &PairOperator) -> PairOperator {
        let mut m = self.m;
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += other.m[i][j];
            }
        }
        PairOperator { m }
    }

    pub fn sub(&self, other: &PairOperator) -> PairOperator {
        let mut m = self.m;
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] -= other.m[i][j];
            }
        }
        PairOperator { m }
    }

    pub fn trace(&self) -> C64 {
        crate::math::trace(&self.m)
    }

    /// Max deviation from Hermiticity, |H - H^dagger|_max.
    pub fn hermiticity_residual(&self) -> f64 {
        let mut r: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                r = r.max((self.m[i][j] - self.m[j][i].conj()).norm());
            }
        }
        r
    }
}

/// Uncoupled Hamiltonian (p - hbar*delta) S_z - q S_z^2, diagonal in the bare
/// basis. `delta` is the laser detuning in rad/s.
pub fn build_h0(params: &PairParams, delta: f64) -> PairOperator {
    let (p, q) = derive_pq(params);
    let mut m = [[czero(); 3]; 3];
    m[0][0] = C64::new(-(p - delta) - q, 0.0);
    m[2][2] = C64::new((p - delta) - q, 0.0);
    PairOperator { m }
}

/// Laser coupling W = hbar*Omega*S_x: off-diagonal entries Omega/sqrt(2)
/// linking gg <-> eg and eg <-> ee.
pub fn build_coupling(omega: f64) -> PairOperator {
    let c = C64::new(omega / 2f64.sqrt(), 0.0);
    let mut m = [[czero(); 3]; 3];
    m[0][1] = c;
    m[1][0] = c;
    m[1][2] = c;
    m[2][1] = c;
    PairOperator { m }
}

/// Full effective Hamiltonian H_0 + W - i(Gamma_ee/2)|ee><ee|.
pub fn build_heff(params: &PairParams, delta: f64) -> PairOperator {
    let mut h = build_h0(params, delta).add(&build_coupling(params.omega));
    h.m[2][2] += C64::new(0.0, -params.gamma_ee / 2.0);
    h
}

/// Second-order reduction of the pair problem to the lossless `{gg, eg}`
/// subspace, valid for Omega << Gamma_ee.
#[derive(Debug, Clone, Copy)]
pub struct EffectiveTwoLevel {
    /// 2x2 matrix over (|gg>, |eg>), rad/s.
    pub matrix: [[C64; 2]; 2],
    /// Level shift of the eg level induced by the eliminated lossy state.
    pub delta_q: f64,
    /// Effective decay rate of the eg level.
    pub gamma_eff: f64,
    /// Dimensionless detuning x = 2(p - q - hbar*delta)/(hbar*Gamma_ee).
    pub x: f64,
    /// Shifted detuning delta' = delta - (p + q - delta_q)/hbar, rad/s.
    pub delta_prime: f64,
}

/// Adiabatic elimination of the lossy ee level: the eg level acquires the
/// complex shift delta_q + i*gamma_eff/2 = (Omega^2/Gamma_ee)(x + i)/(1 + x^2).
pub fn build_effective_two_level(params: &PairParams, delta: f64) -> Result<EffectiveTwoLevel> {
    if params.gamma_ee <= 0.0 {
        return Err(Error::ZenoReductionUndefined);
    }
    let (p, q) = derive_pq(params);
    let x = 2.0 * (p - q - delta) / params.gamma_ee;
    let shift = (params.omega.powi(2) / params.gamma_ee) * C64::new(x, 1.0) / (1.0 + x * x);
    let delta_q = shift.re;
    let gamma_eff = 2.0 * shift.im;
    let delta_prime = delta - (p + q - delta_q);
    let half = 0.5;
    let coupling = C64::new(half * 2f64.sqrt() * params.omega, 0.0);
    let matrix = [
        [C64::new(half * delta_prime, 0.0), coupling],
        [coupling, C64::new(-half * delta_prime, -half * gamma_eff)],
    ];
    Ok(EffectiveTwoLevel {
        matrix,
        delta_q,
        gamma_eff,
        x,
        delta_prime,
    })
}

/// First-order eigenvalues of the reduced two-level problem,
/// +/- Omega_2x2/2 - i(Gamma_eff/4)(1 -/+ delta'/Omega_2x2), rad/s.
#[derive(Debug, Clone, Copy)]
pub struct Lambda12 {
    pub lambda1: C64,
    pub lambda2: C64,
    /// Set when omega/gamma_ee > 0.3 and the perturbative expressions are not
    /// expected to be accurate.
    pub outside_zeno_regime: bool,
}

pub fn lambda12_approx(params: &PairParams, delta: f64) -> Result<Lambda12> {
    let eff = build_effective_two_level(params, delta)?;
    let omega_22 = (eff.delta_prime.powi(2) + 2.0 * params.omega.powi(2)).sqrt();
    let ratio = if omega_22 > 0.0 {
        eff.delta_prime / omega_22
    } else {
        0.0
    };
    let lambda1 = C64::new(omega_22 / 2.0, -eff.gamma_eff / 4.0 * (1.0 - ratio));
    let lambda2 = C64::new(-omega_22 / 2.0, -eff.gamma_eff / 4.0 * (1.0 + ratio));
    Ok(Lambda12 {
        lambda1,
        lambda2,
        outside_zeno_regime: params.omega / params.gamma_ee > 0.3,
    })
}

/// Exact eigenvalues of the 2x2 reduced matrix, for checking the first-order
/// expressions against the same reduction.
pub fn two_level_exact_eigenvalues(eff: &EffectiveTwoLevel) -> (C64, C64) {
    let a = eff.matrix[0][0];
    let d = eff.matrix[1][1];
    let b = eff.matrix[0][1];
    let mean = (a + d) * 0.5;
    let disc = ((a - d) * (a - d) * 0.25 + b * b).sqrt();
    (mean + disc, mean - disc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn approx(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} != {b} (tol {tol})");
    }

    #[test]
    fn pq_symmetric_interactions_vanish() {
        let u = TAU * 500.0;
        let params = PairParams {
            u_gg: u,
            u_eg: u,
            u_ee: u,
            gamma_ee: 0.0,
            omega: 0.0,
        };
        let (p, q) = derive_pq(&params);
        assert_eq!(p, 0.0);
        assert_eq!(q, 0.0);
    }

    #[test]
    fn pq_reference_values() {
        // U_gg/h = 1400 Hz with the measured ratios gives p/h = 147 Hz and
        // q/h = -280 Hz in the main-text convention.
        let params = PairParams::reference(0.0);
        let (p, q) = derive_pq(&params);
        approx(p / TAU, 147.0, 1e-9);
        approx(q / TAU, -280.0, 1e-9);
        // The alternative convention differs by a factor 2 and a sign.
        let (p2, q2) = derive_pq_as(&params, PqConvention::Table1);
        approx(p2 / TAU, 294.0, 1e-9);
        approx(q2 / TAU, 280.0, 1e-9);
    }

    #[test]
    fn pq_p_depends_only_on_uee_minus_ugg() {
        let params = PairParams {
            u_gg: TAU * 700.0,
            u_eg: TAU * 123.0,
            u_ee: TAU * 700.0,
            gamma_ee: 0.0,
            omega: 0.0,
        };
        assert_eq!(derive_pq(&params).0, 0.0);
    }

    #[test]
    fn h0_pure_detuning() {
        let params = PairParams {
            u_gg: 0.0,
            u_eg: 0.0,
            u_ee: 0.0,
            gamma_ee: 0.0,
            omega: 0.0,
        };
        let h = build_h0(&params, 0.0);
        assert_eq!(h, PairOperator::zero());
        let d = TAU * 100.0;
        let h = build_h0(&params, d);
        approx(h.m[0][0].re, d, 1e-12);
        approx(h.m[1][1].re, 0.0, 1e-12);
        approx(h.m[2][2].re, -d, 1e-12);
    }

    #[test]
    fn h0_gg_eg_crossing_at_p_plus_q() {
        let params = PairParams::reference(0.0);
        let (p, q) = derive_pq(&params);
        let h = build_h0(&params, p + q);
        // gg and eg diagonal entries are equal at the one-photon resonance.
        approx(h.m[0][0].re, h.m[1][1].re, 1e-9);
    }

    #[test]
    fn coupling_structure() {
        assert_eq!(build_coupling(0.0), PairOperator::zero());
        let omega = TAU * 150.0;
        let w = build_coupling(omega);
        let expect = omega / 2f64.sqrt();
        approx(w.m[0][1].re, expect, 1e-12);
        approx(w.m[1][2].re, expect, 1e-12);
        assert_eq!(w.m[0][2], czero());
        assert_eq!(w.m[0][0], czero());
        assert!(w.hermiticity_residual() == 0.0);
    }

    #[test]
    fn heff_decomposition_and_trace() {
        let params = PairParams::reference(TAU * 150.0);
        let delta = TAU * 300.0;
        let h = build_heff(&params, delta);
        let rest = h
            .sub(&build_h0(&params, delta))
            .sub(&build_coupling(params.omega));
        for i in 0..3 {
            for j in 0..3 {
                if (i, j) == (2, 2) {
                    assert!((rest.m[i][j] - C64::new(0.0, -params.gamma_ee / 2.0)).norm() < 1e-12);
                } else {
                    assert_eq!(rest.m[i][j], czero());
                }
            }
        }
        approx(h.trace().im, -params.gamma_ee / 2.0, 1e-12);
    }

    #[test]
    fn heff_bare_lossy_level() {
        let gamma = TAU * 1000.0;
        let params = PairParams {
            u_gg: 0.0,
            u_eg: 0.0,
            u_ee: 0.0,
            gamma_ee: gamma,
            omega: 0.0,
        };
        let h = build_heff(&params, 0.0);
        assert_eq!(h.m[0][0], czero());
        assert_eq!(h.m[1][1], czero());
        assert!((h.m[2][2] - C64::new(0.0, -gamma / 2.0)).norm() < 1e-12);
        // Gamma_ee = 0 gives a Hermitian matrix.
        let herm = build_heff(&PairParams { gamma_ee: 0.0, ..params }, TAU * 50.0);
        assert!(herm.hermiticity_residual() == 0.0);
    }

    #[test]
    fn two_level_on_resonance() {
        let params = PairParams::reference(TAU * 150.0);
        let (p, q) = derive_pq(&params);
        // x = 0 at delta = (p - q)/hbar.
        let eff = build_effective_two_level(&params, p - q).unwrap();
        approx(eff.x, 0.0, 1e-12);
        approx(eff.delta_q, 0.0, 1e-12);
        approx(
            eff.gamma_eff,
            2.0 * params.omega.powi(2) / params.gamma_ee,
            1e-9,
        );
        // Gamma_ee/(2pi) = 1428 Hz here, so gamma_eff/(2pi) = 31.5 Hz.
        approx(eff.gamma_eff / TAU, 2.0 * 150.0_f64.powi(2) / 1428.0, 1e-9);
    }

    #[test]
    fn two_level_far_detuned_limit() {
        let params = PairParams::reference(TAU * 150.0);
        let eff = build_effective_two_level(&params, TAU * 1e7).unwrap();
        assert!(eff.gamma_eff.abs() < TAU * 1e-3);
        assert!(eff.delta_q.abs() < TAU * 1.0);
    }

    #[test]
    fn two_level_requires_dissipation() {
        let params = PairParams {
            gamma_ee: 0.0,
            ..PairParams::reference(TAU * 150.0)
        };
        assert!(matches!(
            build_effective_two_level(&params, 0.0),
            Err(Error::ZenoReductionUndefined)
        ));
    }

    #[test]
    fn two_level_shift_symmetry_in_x() {
        // gamma_eff is even and delta_q odd in x.
        let params = PairParams::reference(TAU * 150.0);
        let (p, q) = derive_pq(&params);
        for &x in &[0.3, 1.0, 2.5, 7.0] {
            let delta_plus = (p - q) - x * params.gamma_ee / 2.0;
            let delta_minus = (p - q) + x * params.gamma_ee / 2.0;
            let e1 = build_effective_two_level(&params, delta_plus).unwrap();
            let e2 = build_effective_two_level(&params, delta_minus).unwrap();
            approx(e1.gamma_eff, e2.gamma_eff, 1e-9);
            approx(e1.delta_q, -e2.delta_q, 1e-9);
        }
    }

    #[test]
    fn lambda12_symmetric_point_and_sum_rule() {
        let params = PairParams::reference(TAU * 150.0);
        let (p, q) = derive_pq(&params);
        // delta' = 0: both imaginary parts equal -gamma_eff/4.
        let mut delta = p + q;
        for _ in 0..50 {
            let eff = build_effective_two_level(&params, delta).unwrap();
            delta -= eff.delta_prime;
        }
        let eff = build_effective_two_level(&params, delta).unwrap();
        approx(eff.delta_prime, 0.0, 1e-6);
        let l = lambda12_approx(&params, delta).unwrap();
        approx(l.lambda1.im, -eff.gamma_eff / 4.0, 1e-6);
        approx(l.lambda2.im, -eff.gamma_eff / 4.0, 1e-6);
        // Sum of imaginary parts is -gamma_eff/2 for any delta'.
        for &d in &[0.0, TAU * 100.0, TAU * 900.0, -TAU * 2000.0] {
            let eff = build_effective_two_level(&params, d).unwrap();
            let l = lambda12_approx(&params, d).unwrap();
            approx(l.lambda1.im + l.lambda2.im, -eff.gamma_eff / 2.0, 1e-9);
        }
    }

    #[test]
    fn lambda12_matches_exact_two_level_diagonalization() {
        // First-order imaginary parts agree with the exact 2x2 eigenvalues to
        // 10% deep in the Zeno regime.
        let mut params = PairParams::reference(0.0);
        params.omega = 0.1 * params.gamma_ee;
        let (p, q) = derive_pq(&params);
        for k in -10..=10 {
            let delta_prime_target = k as f64 / 2.0 * params.omega;
            let delta = p + q + delta_prime_target;
            let eff = build_effective_two_level(&params, delta).unwrap();
            if eff.delta_prime.abs() > 5.0 * params.omega {
                continue;
            }
            let l = lambda12_approx(&params, delta).unwrap();
            let (e1, e2) = two_level_exact_eigenvalues(&eff);
            // Match by real part.
            let (e1, e2) = if e1.re >= e2.re { (e1, e2) } else { (e2, e1) };
            for (a, b) in [(l.lambda1, e1), (l.lambda2, e2)] {
                let rel = (a.im - b.im).abs() / b.im.abs().max(1e-300);
                assert!(rel <= 0.10, "rel error {rel} at delta' = {}", eff.delta_prime);
            }
        }
    }
}
