//! Ensemble measurement model: singly-occupied sites as lossless two-level
//! atoms, doubly-occupied sites as lossy pairs, repumped detection of e-state
//! atoms, exponential decay-curve fitting, and the end-to-end figure
//! pipelines.

use num_complex::Complex64 as C64;

use crate::adiabatic::{transport_integrals, TransportOptions};
use crate::dynamics::{
    evolve_nonhermitian, ket_gg, prepared_state_lifetime, RampProtocol,
};
use crate::error::{Error, Result};
use crate::hamiltonian::{lambda12_approx, Lambda12, PairParams};
use crate::ode::{integrate, Tolerances};
use crate::spectrum::{linspace, perturbative_decay_rates, sweep_spectrum, SpectralSweep};

/// Occupation statistics of the lattice and the e-state detection efficiency.
#[derive(Debug, Clone, Copy)]
pub struct EnsembleModel {
    /// Singly-occupied sites (outer shell).
    pub n1: f64,
    /// Doubly-occupied sites (central core).
    pub n2: f64,
    /// Repumping/detection efficiency for e-state atoms.
    pub eta_rp: f64,
}

impl EnsembleModel {
    pub fn validate(&self) -> Result<()> {
        if self.n1 < 0.0 || self.n2 < 0.0 {
            return Err(Error::InvalidParams("n1, n2 must be >= 0".into()));
        }
        if !(self.eta_rp > 0.0 && self.eta_rp <= 1.0) {
            return Err(Error::InvalidParams("eta_rp must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Bare-state populations of one lossless two-level atom along a ramp.
#[derive(Debug, Clone)]
pub struct TwoLevelResult {
    pub times: Vec<f64>,
    pub p_g: Vec<f64>,
    pub p_e: Vec<f64>,
    /// Raw amplitudes (c_g, c_e) at each sample.
    pub amps: Vec<[C64; 2]>,
}

/// Propagate a single lossless two-level atom (basis `(|g>, |e>)`) through the
/// same drive schedule as the pairs: detuning delta(t), coupling Omega(t)/2
/// off-diagonal. Starts in |g>.
pub fn two_level_evolve(
    ramp: &RampProtocol,
    sample_times: &[f64],
    tol: &Tolerances,
) -> Result<TwoLevelResult> {
    two_level_evolve_from(
        ramp,
        [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        sample_times,
        tol,
    )
}

/// Same as [`two_level_evolve`] but from an arbitrary initial amplitude pair
/// (c_g, c_e).
pub fn two_level_evolve_from(
    ramp: &RampProtocol,
    y0: [C64; 2],
    sample_times: &[f64],
    tol: &Tolerances,
) -> Result<TwoLevelResult> {
    ramp.validate()?;
    let minus_i = C64::new(0.0, -1.0);
    let f = |t: f64, y: &[C64; 2]| {
        let d = ramp.delta_at(t);
        let w = ramp.omega_at(t) / 2.0;
        [
            minus_i * (0.5 * d * y[0] + w * y[1]),
            minus_i * (w * y[0] - 0.5 * d * y[1]),
        ]
    };
    let t_end = sample_times
        .last()
        .copied()
        .unwrap_or(ramp.total_time())
        .max(ramp.total_time());
    let ys = integrate(f, 0.0, t_end, y0, sample_times, tol)?;
    Ok(TwoLevelResult {
        times: sample_times.to_vec(),
        p_g: ys.iter().map(|y| y[0].norm_sqr()).collect(),
        p_e: ys.iter().map(|y| y[1].norm_sqr()).collect(),
        amps: ys,
    })
}

/// Analytic Landau-Zener transfer probability 1 - exp(-pi Omega^2 / (2 |d
/// delta/dt|)) for a full sweep through resonance.
pub fn lz_transfer_probability(omega: f64, delta_dot: f64) -> f64 {
    1.0 - (-std::f64::consts::PI * omega * omega / (2.0 * delta_dot.abs())).exp()
}

/// Counts produced by the measurement model.
#[derive(Debug, Clone, Copy)]
pub struct Observables {
    /// Ground-state atom count N_g = n1 P_g1 + n2 (P_eg + 2 P_gg).
    pub n_g: f64,
    /// Excited-state atom count before detection scaling.
    pub n_e: f64,
    /// Detected e-state count eta_rp * N_e.
    pub n_e_detected: f64,
    /// Total detected count N_g + eta_rp * N_e.
    pub n_total_detected: f64,
}

/// Map pair probabilities `(P_gg, P_eg, P_ee)` and single-atom probabilities
/// `(P_g1, P_e1)` to atom counts.
pub fn observables(
    model: &EnsembleModel,
    pair_probs: [f64; 3],
    single_probs: (f64, f64),
) -> Result<Observables> {
    model.validate()?;
    for &p in pair_probs
        .iter()
        .chain([single_probs.0, single_probs.1].iter())
    {
        if !(-1e-12..=1.0 + 1e-12).contains(&p) {
            return Err(Error::InvalidParams(format!(
                "probability {p} outside [0, 1]"
            )));
        }
    }
    let [p_gg, p_eg, p_ee] = pair_probs;
    let n_g = model.n1 * single_probs.0 + model.n2 * (p_eg + 2.0 * p_gg);
    let n_e = model.n1 * single_probs.1 + model.n2 * (p_eg + 2.0 * p_ee);
    let n_e_detected = model.eta_rp * n_e;
    Ok(Observables {
        n_g,
        n_e,
        n_e_detected,
        n_total_detected: n_g + n_e_detected,
    })
}

/// Result of fitting counts(t) = f1 + f2 exp(-gamma t).
#[derive(Debug, Clone)]
pub struct DecayFit {
    pub f1: f64,
    pub f2: f64,
    /// Decay rate, 1/s.
    pub gamma: f64,
    /// Covariance of (f1, f2, gamma) from the Jacobian at the optimum.
    pub covariance: [[f64; 3]; 3],
    /// RMS weighted residual at the optimum.
    pub residual: f64,
    /// Set when gamma sits on the lower bound 0 or the decaying amplitude is
    /// negligible: no decay resolved in the data.
    pub no_decay_resolved: bool,
}

fn solve3(a: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<[f64; 3]> {
    let mut m = *a;
    let mut r = *b;
    for k in 0..3 {
        let piv = (k..3).max_by(|&i, &j| m[i][k].abs().partial_cmp(&m[j][k].abs()).unwrap())?;
        if m[piv][k].abs() < 1e-300 {
            return None;
        }
        m.swap(k, piv);
        r.swap(k, piv);
        for i in (k + 1)..3 {
            let f = m[i][k] / m[k][k];
            for j in k..3 {
                m[i][j] -= f * m[k][j];
            }
            r[i] -= f * r[k];
        }
    }
    let mut x = [0.0; 3];
    for k in (0..3).rev() {
        let mut s = r[k];
        for j in (k + 1)..3 {
            s -= m[k][j] * x[j];
        }
        x[k] = s / m[k][k];
    }
    Some(x)
}

fn inv3_real(a: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let mut out = [[0.0; 3]; 3];
    for c in 0..3 {
        let mut e = [0.0; 3];
        e[c] = 1.0;
        let col = solve3(a, &e)?;
        for r in 0..3 {
            out[r][c] = col[r];
        }
    }
    Some(out)
}

/// Box-constrained (f1, f2, gamma >= 0) Levenberg-Marquardt fit of
/// f1 + f2 exp(-gamma t). Weights default to 1; when provided they multiply
/// the residuals.
pub fn fit_decay(times: &[f64], counts: &[f64], weights: Option<&[f64]>) -> Result<DecayFit> {
    let n = times.len();
    if n < 4 || counts.len() != n {
        return Err(Error::FitUnderdetermined);
    }
    if times.iter().any(|&t| t < 0.0) {
        return Err(Error::InvalidParams("times must be non-negative".into()));
    }
    let t0 = times[0];
    if times.iter().all(|&t| t == t0) {
        return Err(Error::FitUnderdetermined);
    }
    let w: Vec<f64> = match weights {
        Some(w) if w.len() == n => w.to_vec(),
        Some(_) => return Err(Error::InvalidParams("weights length mismatch".into())),
        None => vec![1.0; n],
    };

    // Initialization: f1 = min, f2 = max - min, gamma from a log-linear
    // regression of counts - f1 (shifted slightly off zero).
    let cmin = counts.iter().cloned().fold(f64::INFINITY, f64::min);
    let cmax = counts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let amp = (cmax - cmin).max(1e-12);
    let floor = 1e-3 * amp;
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(counts)
        .filter(|(_, &c)| c - cmin > floor)
        .map(|(&t, &c)| (t, (c - cmin).ln()))
        .collect();
    let gamma0 = if pts.len() >= 2 {
        let tm = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let lm = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - lm)).sum();
        if sxx > 0.0 { (-sxy / sxx).max(0.0) } else { 0.0 }
    } else {
        0.0
    };
    let mut theta = [cmin.max(0.0), amp, gamma0];

    let residuals = |th: &[f64; 3]| -> Vec<f64> {
        times
            .iter()
            .zip(counts)
            .zip(&w)
            .map(|((&t, &c), &wi)| wi * (th[0] + th[1] * (-th[2] * t).exp() - c))
            .collect()
    };
    let cost = |r: &[f64]| -> f64 { r.iter().map(|e| e * e).sum::<f64>() };

    let mut r = residuals(&theta);
    let mut c = cost(&r);
    let mut mu = 1e-3;
    let max_iter = 200;
    let mut converged = false;
    for _ in 0..max_iter {
        // Jacobian of the weighted residuals.
        let jac: Vec<[f64; 3]> = times
            .iter()
            .zip(&w)
            .map(|(&t, &wi)| {
                let e = (-theta[2] * t).exp();
                [wi, wi * e, -wi * theta[1] * t * e]
            })
            .collect();
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (row, ri) in jac.iter().zip(&r) {
            for i in 0..3 {
                jtr[i] += row[i] * ri;
                for j in 0..3 {
                    jtj[i][j] += row[i] * row[j];
                }
            }
        }
        let grad_norm = jtr.iter().map(|g| g.abs()).fold(0.0, f64::max);
        let scale = c.max(1.0);
        if grad_norm < 1e-12 * scale {
            converged = true;
            break;
        }

        let mut stepped = false;
        for _ in 0..30 {
            let mut damped = jtj;
            for i in 0..3 {
                damped[i][i] += mu * jtj[i][i].max(1e-12);
            }
            let rhs = [-jtr[0], -jtr[1], -jtr[2]];
            let step = match solve3(&damped, &rhs) {
                Some(s) => s,
                None => {
                    mu *= 10.0;
                    continue;
                }
            };
            let cand = [
                (theta[0] + step[0]).max(0.0),
                (theta[1] + step[1]).max(0.0),
                (theta[2] + step[2]).max(0.0),
            ];
            let rc = residuals(&cand);
            let cc = cost(&rc);
            if cc < c {
                let moved: f64 = (0..3)
                    .map(|i| (cand[i] - theta[i]).abs() / theta[i].abs().max(1.0))
                    .sum();
                theta = cand;
                r = rc;
                let improved = (c - cc) / c.max(1e-300);
                c = cc;
                mu = (mu * 0.3).max(1e-12);
                stepped = true;
                if improved < 1e-14 || moved < 1e-14 {
                    converged = true;
                }
                break;
            }
            mu *= 10.0;
        }
        if converged {
            break;
        }
        if !stepped {
            // No downhill step found at any damping: treat the current point
            // as the (possibly constrained) optimum.
            converged = true;
            break;
        }
    }
    let rms = (c / n as f64).sqrt();
    if !converged {
        return Err(Error::FitDidNotConverge {
            iterations: max_iter,
            residual: rms,
        });
    }

    // Covariance sigma^2 (J^T J)^-1 at the optimum.
    let jac: Vec<[f64; 3]> = times
        .iter()
        .zip(&w)
        .map(|(&t, &wi)| {
            let e = (-theta[2] * t).exp();
            [wi, wi * e, -wi * theta[1] * t * e]
        })
        .collect();
    let mut jtj = [[0.0; 3]; 3];
    for row in &jac {
        for i in 0..3 {
            for j in 0..3 {
                jtj[i][j] += row[i] * row[j];
            }
        }
    }
    let dof = (n as f64 - 3.0).max(1.0);
    let sigma2 = c / dof;
    let covariance = inv3_real(&jtj)
        .map(|inv| {
            let mut cov = inv;
            for row in cov.iter_mut() {
                for v in row.iter_mut() {
                    *v *= sigma2;
                }
            }
            cov
        })
        .unwrap_or([[f64::INFINITY; 3]; 3]);

    let no_decay_resolved = theta[2] == 0.0 || theta[1] <= 1e-9 * (theta[0] + amp);
    Ok(DecayFit {
        f1: theta[0],
        f2: theta[1],
        gamma: theta[2],
        covariance,
        residual: rms,
        no_decay_resolved,
    })
}

/// Spectral data behind the eigenvalue figure: one strong-drive and one
/// Zeno-regime sweep over the detuning window, plus the first-order two-level
/// overlay for the Zeno case.
#[derive(Debug, Clone)]
pub struct Figure1Data {
    pub deltas: Vec<f64>,
    pub strong: SpectralSweep,
    pub zeno: SpectralSweep,
    /// First-order reduced eigenvalues at each detuning (Zeno parameters).
    pub overlay: Vec<Lambda12>,
    pub omega_strong: f64,
    pub omega_zeno: f64,
}

/// Eigenvalue sweeps over delta/2pi in [-1500, 1500] Hz for
/// Omega/Gamma_ee = 1 (strong) and 0.1 (Zeno), with the reduced-model overlay.
pub fn figure1_pipeline(params: &PairParams, n_points: usize) -> Result<Figure1Data> {
    if n_points < 2 {
        return Err(Error::BadGrid);
    }
    let deltas = linspace(
        crate::hz(-1500.0),
        crate::hz(1500.0),
        n_points,
    );
    let strong_params = PairParams {
        omega: params.gamma_ee,
        ..*params
    };
    let zeno_params = PairParams {
        omega: 0.1 * params.gamma_ee,
        ..*params
    };
    let strong = sweep_spectrum(&strong_params, &deltas)?;
    let zeno = sweep_spectrum(&zeno_params, &deltas)?;
    let overlay = deltas
        .iter()
        .map(|&d| lambda12_approx(&zeno_params, d))
        .collect::<Result<Vec<_>>>()?;
    Ok(Figure1Data {
        deltas,
        strong,
        zeno,
        overlay,
        omega_strong: strong_params.omega,
        omega_zeno: zeno_params.omega,
    })
}

/// Decay rate of the prepared state versus final detuning: simulated lifetime
/// from the full ramp, the followed branch's spectral decay rate, and the
/// perturbative prediction.
#[derive(Debug, Clone)]
pub struct Figure3Curve {
    pub delta_f: Vec<f64>,
    /// Lifetime fitted from the hold-segment norm decay, 1/s.
    pub gamma_sim: Vec<f64>,
    /// Branch decay rate gamma(delta_f) from the spectrum, rad/s (= 1/s).
    pub gamma_branch: Vec<f64>,
    /// Perturbative decay rate on the same branch.
    pub gamma_pert: Vec<f64>,
    pub nonexponential: Vec<bool>,
}

impl Figure3Curve {
    /// Largest Zeno enhancement gamma_pert / gamma_branch over the grid.
    pub fn max_enhancement(&self) -> f64 {
        self.gamma_pert
            .iter()
            .zip(&self.gamma_branch)
            .map(|(&p, &f)| if f > 0.0 { p / f } else { 0.0 })
            .fold(0.0, f64::max)
    }
}

/// For each final detuning, ramp from `delta_i` at `speed` (magnitude,
/// rad/s^2), hold for `t_hold`, and extract the decay rate three ways. The
/// followed branch is the gg-character branch at `delta_i`.
pub fn figure3_pipeline(
    params: &PairParams,
    delta_i: f64,
    delta_fs: &[f64],
    speed: f64,
    t_hold: f64,
    tol: &Tolerances,
) -> Result<Figure3Curve> {
    params.validate()?;
    let mut gamma_sim = Vec::with_capacity(delta_fs.len());
    let mut gamma_branch = Vec::with_capacity(delta_fs.len());
    let mut gamma_pert = Vec::with_capacity(delta_fs.len());
    let mut nonexponential = Vec::with_capacity(delta_fs.len());
    for &delta_f in delta_fs {
        let ramp = RampProtocol::landau_zener(delta_i, delta_f, speed, params.omega, t_hold)?;
        let fit = prepared_state_lifetime(params, &ramp, tol)?;
        gamma_sim.push(fit.gamma_fit);
        nonexponential.push(fit.nonexponential);

        // Branch-tracked spectral rates from delta_i to delta_f.
        let grid = if delta_f == delta_i {
            vec![delta_i]
        } else {
            linspace(delta_i, delta_f, 201)
        };
        let sweep = sweep_spectrum(params, &grid)?;
        gamma_branch.push(sweep.states.last().unwrap()[0].gamma());
        let pert = perturbative_decay_rates(params, &grid)?;
        gamma_pert.push(pert.last().unwrap()[0]);
    }
    Ok(Figure3Curve {
        delta_f: delta_fs.to_vec(),
        gamma_sim,
        gamma_branch,
        gamma_pert,
        nonexponential,
    })
}

/// Atom counts versus final detuning for the adiabatic-transfer figure.
#[derive(Debug, Clone)]
pub struct Figure4Data {
    pub delta_f: Vec<f64>,
    pub n_g: Vec<f64>,
    pub n_total: Vec<f64>,
    /// Atoms on singly-occupied sites (before detection scaling).
    pub n1_atoms: Vec<f64>,
    /// Atoms on doubly-occupied sites, 2 n2 P_s from the dynamics.
    pub n2_atoms: Vec<f64>,
    /// Adiabatic prediction 2 n2 exp(-kappa) for the followed branch.
    pub n2_predicted: Vec<f64>,
    /// max |n2_atoms - n2_predicted| / (2 n2) over the grid.
    pub max_n2_mismatch: f64,
    /// max |n1_atoms - n1| / n1 over the grid.
    pub max_n1_drift: f64,
}

/// End-to-end figure pipeline: for each final detuning, propagate pairs
/// (non-Hermitian) and singles (lossless two-level) through the same ramp,
/// apply the measurement model, and compare the surviving-pair count with the
/// adiabatic bound 2 n2 exp(-kappa).
pub fn figure4_pipeline(
    model: &EnsembleModel,
    params: &PairParams,
    delta_i: f64,
    delta_fs: &[f64],
    speed: f64,
    tol: &Tolerances,
) -> Result<Figure4Data> {
    model.validate()?;
    params.validate()?;
    let opts = TransportOptions::default();
    let mut out = Figure4Data {
        delta_f: delta_fs.to_vec(),
        n_g: Vec::with_capacity(delta_fs.len()),
        n_total: Vec::with_capacity(delta_fs.len()),
        n1_atoms: Vec::with_capacity(delta_fs.len()),
        n2_atoms: Vec::with_capacity(delta_fs.len()),
        n2_predicted: Vec::with_capacity(delta_fs.len()),
        max_n2_mismatch: 0.0,
        max_n1_drift: 0.0,
    };
    for &delta_f in delta_fs {
        let ramp = RampProtocol::landau_zener(delta_i, delta_f, speed, params.omega, 0.0)?;
        let t_end = ramp.total_time();
        let samples = [t_end];
        let pair = evolve_nonhermitian(params, &ramp, &ket_gg(), &samples, tol)?;
        let single = two_level_evolve(&ramp, &samples, tol)?;
        let pops = pair.populations[0];
        let obs = observables(
            model,
            [
                pops[0].clamp(0.0, 1.0),
                pops[1].clamp(0.0, 1.0),
                pops[2].clamp(0.0, 1.0),
            ],
            (single.p_g[0].clamp(0.0, 1.0), single.p_e[0].clamp(0.0, 1.0)),
        )?;
        let p_s = pair.norm2[0];
        let report = transport_integrals(params, &ramp, 0, &opts)?;

        out.n_g.push(obs.n_g);
        out.n_total.push(obs.n_total_detected);
        let n1_atoms = model.n1 * (single.p_g[0] + single.p_e[0]);
        out.n1_atoms.push(n1_atoms);
        let n2_atoms = 2.0 * model.n2 * p_s;
        let n2_pred = 2.0 * model.n2 * report.survival;
        out.n2_atoms.push(n2_atoms);
        out.n2_predicted.push(n2_pred);
        if model.n2 > 0.0 {
            out.max_n2_mismatch = out
                .max_n2_mismatch
                .max((n2_atoms - n2_pred).abs() / (2.0 * model.n2));
        }
        if model.n1 > 0.0 {
            out.max_n1_drift = out
                .max_n1_drift
                .max((n1_atoms - model.n1).abs() / model.n1);
        }
    }
    Ok(out)
}
