//! Time propagation under the time-dependent non-Hermitian Hamiltonian along
//! Landau-Zener ramp protocols, with Lindblad density-matrix and
//! quantum-trajectory Monte Carlo cross-validations.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{build_heff, PairParams};
use crate::math::{czero, mat_vec, V3};
use crate::ode::{integrate, Tolerances};

/// Whether the intensity ramp is linear in the Rabi frequency (field) or in
/// the laser intensity (Omega^2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaRampShape {
    #[default]
    Field,
    Intensity,
}

/// Piecewise-linear drive schedule: the Rabi frequency ramps from zero to its
/// nominal value over `t_omega` at fixed initial detuning, then the detuning
/// ramps linearly at speed `delta_dot`, then both stay constant for `t_hold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampProtocol {
    /// Initial detuning, rad/s.
    pub delta_i: f64,
    /// Final detuning, rad/s.
    pub delta_f: f64,
    /// Signed ramp speed, rad/s per second.
    pub delta_dot: f64,
    /// Plateau Rabi frequency, rad/s.
    pub omega_nominal: f64,
    /// Intensity-ramp duration, s.
    pub t_omega: f64,
    /// Post-ramp hold duration, s.
    pub t_hold: f64,
    #[serde(default)]
    pub omega_ramp_shape: OmegaRampShape,
}

impl RampProtocol {
    /// Ramp with the experimental convention t_omega = T_R / 10 (one tenth of
    /// the total ramp time, i.e. t_delta / 9). `speed` is a magnitude; its
    /// sign is set from `delta_f - delta_i`.
    pub fn landau_zener(
        delta_i: f64,
        delta_f: f64,
        speed: f64,
        omega_nominal: f64,
        t_hold: f64,
    ) -> Result<Self> {
        if !(speed > 0.0) {
            return Err(Error::InvalidParams("ramp speed must be positive".into()));
        }
        let delta_dot = speed * (delta_f - delta_i).signum();
        let t_delta = if delta_f == delta_i {
            0.0
        } else {
            (delta_f - delta_i) / delta_dot
        };
        Ok(RampProtocol {
            delta_i,
            delta_f,
            delta_dot: if delta_f == delta_i { speed } else { delta_dot },
            omega_nominal,
            t_omega: t_delta / 9.0,
            t_hold,
            omega_ramp_shape: OmegaRampShape::Field,
        })
    }

    pub fn with_t_omega(mut self, t_omega: f64) -> Self {
        self.t_omega = t_omega;
        self
    }

    pub fn with_omega_ramp_shape(mut self, shape: OmegaRampShape) -> Self {
        self.omega_ramp_shape = shape;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta_f != self.delta_i
            && (self.delta_f - self.delta_i).signum() != self.delta_dot.signum()
        {
            return Err(Error::InvalidParams(
                "sign(delta_dot) must match sign(delta_f - delta_i)".into(),
            ));
        }
        if self.t_omega < 0.0 || self.t_hold < 0.0 {
            return Err(Error::InvalidParams("durations must be non-negative".into()));
        }
        if self.delta_dot == 0.0 && self.delta_f != self.delta_i {
            return Err(Error::InvalidParams("delta_dot must be nonzero".into()));
        }
        Ok(())
    }

    /// Detuning-ramp duration, s.
    pub fn t_delta(&self) -> f64 {
        if self.delta_f == self.delta_i {
            0.0
        } else {
            (self.delta_f - self.delta_i) / self.delta_dot
        }
    }

    /// Total preparation ramp time T_R = t_omega + t_delta, s.
    pub fn ramp_time(&self) -> f64 {
        self.t_omega + self.t_delta()
    }

    pub fn total_time(&self) -> f64 {
        self.ramp_time() + self.t_hold
    }

    pub fn omega_at(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= self.t_omega || self.t_omega == 0.0 {
            return self.omega_nominal;
        }
        let frac = t / self.t_omega;
        match self.omega_ramp_shape {
            OmegaRampShape::Field => self.omega_nominal * frac,
            OmegaRampShape::Intensity => self.omega_nominal * frac.sqrt(),
        }
    }

    pub fn delta_at(&self, t: f64) -> f64 {
        if t <= self.t_omega {
            return self.delta_i;
        }
        let td = self.t_delta();
        if t >= self.t_omega + td {
            return self.delta_f;
        }
        self.delta_i + self.delta_dot * (t - self.t_omega)
    }
}

/// State amplitudes (c_gg, c_eg, c_ee) of one pair.
pub type PairState = V3;

pub fn ket_gg() -> PairState {
    [C64::new(1.0, 0.0), czero(), czero()]
}

pub fn ket_eg() -> PairState {
    [czero(), C64::new(1.0, 0.0), czero()]
}

pub fn ket_ee() -> PairState {
    [czero(), czero(), C64::new(1.0, 0.0)]
}

/// Sampled non-Hermitian evolution: amplitudes, populations, and squared norm
/// (the survival probability; no renormalization is ever applied).
#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    pub states: Vec<PairState>,
    pub norm2: Vec<f64>,
    pub populations: Vec<[f64; 3]>,
}

impl EvolutionResult {
    fn from_samples(times: &[f64], states: Vec<PairState>) -> Self {
        let norm2 = states.iter().map(crate::math::norm2).collect();
        let populations = states
            .iter()
            .map(|s| [s[0].norm_sqr(), s[1].norm_sqr(), s[2].norm_sqr()])
            .collect();
        EvolutionResult {
            times: times.to_vec(),
            states,
            norm2,
            populations,
        }
    }
}

/// Instantaneous effective Hamiltonian along a ramp.
pub fn hamiltonian_at(
    params: &PairParams,
    ramp: &RampProtocol,
    t: f64,
) -> crate::hamiltonian::PairOperator {
    let p = PairParams {
        omega: ramp.omega_at(t),
        ..*params
    };
    build_heff(&p, ramp.delta_at(t))
}

/// Integrate i d(psi)/dt = H_eff(t) psi along the ramp, sampling at the
/// requested times. `psi0` must be normalized.
pub fn evolve_nonhermitian(
    params: &PairParams,
    ramp: &RampProtocol,
    psi0: &PairState,
    sample_times: &[f64],
    tol: &Tolerances,
) -> Result<EvolutionResult> {
    params.validate()?;
    ramp.validate()?;
    if (crate::math::norm2(psi0) - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidParams("psi0 must be normalized".into()));
    }
    let minus_i = C64::new(0.0, -1.0);
    let f = |t: f64, y: &[C64; 3]| {
        let h = hamiltonian_at(params, ramp, t);
        let hy = mat_vec(&h.m, y);
        [minus_i * hy[0], minus_i * hy[1], minus_i * hy[2]]
    };
    let t_end = sample_times
        .last()
        .copied()
        .unwrap_or(ramp.total_time())
        .max(ramp.total_time());
    let states = integrate(f, 0.0, t_end, *psi0, sample_times, tol)?;
    Ok(EvolutionResult::from_samples(sample_times, states))
}

/// 4x4 density matrix over the ordered basis (gg, eg, ee, vac).
pub type DensityMatrix = [[C64; 4]; 4];

pub fn pure_state_density(psi: &PairState) -> DensityMatrix {
    let mut rho = [[czero(); 4]; 4];
    for i in 0..3 {
        for j in 0..3 {
            rho[i][j] = psi[i] * psi[j].conj();
        }
    }
    rho
}

pub fn density_trace(rho: &DensityMatrix) -> C64 {
    rho[0][0] + rho[1][1] + rho[2][2] + rho[3][3]
}

/// Trace of the non-vacuum 3x3 block (pair survival probability).
pub fn nonvacuum_trace(rho: &DensityMatrix) -> f64 {
    (rho[0][0] + rho[1][1] + rho[2][2]).re
}

fn validate_density(rho: &DensityMatrix) -> Result<()> {
    for i in 0..4 {
        for j in 0..4 {
            if (rho[i][j] - rho[j][i].conj()).norm() > 1e-9 {
                return Err(Error::NonPhysicalDensityMatrix("not Hermitian".into()));
            }
        }
    }
    if (density_trace(rho).re - 1.0).abs() > 1e-9 {
        return Err(Error::NonPhysicalDensityMatrix("trace != 1".into()));
    }
    // Positive semidefiniteness via Cholesky with a small negative slack.
    let mut a = *rho;
    for k in 0..4 {
        let d = a[k][k].re;
        if d < -1e-10 {
            return Err(Error::NonPhysicalDensityMatrix(
                "negative eigenvalue".into(),
            ));
        }
        if d <= 1e-14 {
            continue;
        }
        let inv = 1.0 / d;
        for i in (k + 1)..4 {
            for j in (k + 1)..4 {
                let update = a[i][k] * a[k][j] * inv;
                a[i][j] -= update;
            }
        }
    }
    Ok(())
}

/// Sampled Lindblad evolution with the single jump operator |vac><ee| at rate
/// Gamma_ee. The trace is conserved.
#[derive(Debug, Clone)]
pub struct LindbladResult {
    pub times: Vec<f64>,
    pub rhos: Vec<DensityMatrix>,
}

pub fn evolve_lindblad(
    params: &PairParams,
    ramp: &RampProtocol,
    rho0: &DensityMatrix,
    sample_times: &[f64],
    tol: &Tolerances,
) -> Result<LindbladResult> {
    params.validate()?;
    ramp.validate()?;
    validate_density(rho0)?;

    let pack = |rho: &DensityMatrix| {
        let mut y = [czero(); 16];
        for i in 0..4 {
            for j in 0..4 {
                y[4 * i + j] = rho[i][j];
            }
        }
        y
    };
    let unpack = |y: &[C64; 16]| {
        let mut rho = [[czero(); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                rho[i][j] = y[4 * i + j];
            }
        }
        rho
    };

    let gamma = params.gamma_ee;
    let minus_i = C64::new(0.0, -1.0);
    let f = |t: f64, y: &[C64; 16]| {
        let h3 = hamiltonian_at(params, ramp, t);
        let rho = unpack(y);
        // d rho/dt = -i (H rho - rho H^dagger) + Gamma rho_ee,ee |vac><vac|,
        // with H the 3x3 effective Hamiltonian embedded in the 4x4 space.
        let mut out = [[czero(); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let mut h_rho = czero();
                let mut rho_hd = czero();
                if i < 3 {
                    for k in 0..3 {
                        h_rho += h3.m[i][k] * rho[k][j];
                    }
                }
                if j < 3 {
                    for k in 0..3 {
                        rho_hd += rho[i][k] * h3.m[j][k].conj();
                    }
                }
                out[i][j] = minus_i * (h_rho - rho_hd);
            }
        }
        out[3][3] += gamma * rho[2][2];
        pack(&out)
    };

    let t_end = sample_times
        .last()
        .copied()
        .unwrap_or(ramp.total_time())
        .max(ramp.total_time());
    let ys = integrate(f, 0.0, t_end, pack(rho0), sample_times, tol)?;
    Ok(LindbladResult {
        times: sample_times.to_vec(),
        rhos: ys.iter().map(unpack).collect(),
    })
}

/// Ensemble statistics from the quantum-trajectory unraveling. Because the
/// jump target (vacuum) is dark, every trajectory follows the deterministic
/// no-jump evolution until its pre-drawn norm threshold is crossed and is
/// vacuum afterwards.
#[derive(Debug, Clone)]
pub struct TrajectoryResult {
    pub times: Vec<f64>,
    /// Fraction of trajectories that have not jumped by each sample time.
    pub survival: Vec<f64>,
    /// Binomial standard error of the survival fraction.
    pub survival_stderr: Vec<f64>,
    /// Ensemble-mean bare-state populations (jumped trajectories contribute
    /// zero).
    pub populations: Vec<[f64; 3]>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Pre-drawn uniform jump threshold for trajectory `index` under `seed`.
/// Each trajectory gets an independent deterministic stream.
fn jump_threshold(seed: u64, index: u64) -> f64 {
    let key = splitmix64(seed ^ splitmix64(index.wrapping_add(0xa5a5_a5a5)));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.gen::<f64>()
}

pub fn evolve_trajectories(
    params: &PairParams,
    ramp: &RampProtocol,
    psi0: &PairState,
    n_traj: usize,
    seed: u64,
    sample_times: &[f64],
    tol: &Tolerances,
) -> Result<TrajectoryResult> {
    if n_traj == 0 {
        return Err(Error::InvalidParams("n_traj must be >= 1".into()));
    }
    let nominal = evolve_nonhermitian(params, ramp, psi0, sample_times, tol)?;
    let thresholds: Vec<f64> = (0..n_traj as u64).map(|j| jump_threshold(seed, j)).collect();

    let n = n_traj as f64;
    let mut survival = Vec::with_capacity(sample_times.len());
    let mut survival_stderr = Vec::with_capacity(sample_times.len());
    let mut populations = Vec::with_capacity(sample_times.len());
    for (k, &norm2) in nominal.norm2.iter().enumerate() {
        // The squared norm is monotone non-increasing, so a trajectory is
        // alive at time t iff its threshold is below norm2(t).
        let alive = thresholds.iter().filter(|&&u| u < norm2).count();
        let frac = alive as f64 / n;
        survival.push(frac);
        survival_stderr.push((frac * (1.0 - frac) / n).sqrt());
        let pops = nominal.populations[k];
        let scale = if norm2 > 0.0 { frac / norm2 } else { 0.0 };
        populations.push([pops[0] * scale, pops[1] * scale, pops[2] * scale]);
    }
    Ok(TrajectoryResult {
        times: sample_times.to_vec(),
        survival,
        survival_stderr,
        populations,
    })
}

/// Jump time of each trajectory (None if it survives the whole protocol),
/// found by inverting the monotone squared-norm curve.
pub fn trajectory_jump_times(
    params: &PairParams,
    ramp: &RampProtocol,
    psi0: &PairState,
    n_traj: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<Vec<Option<f64>>> {
    if n_traj == 0 {
        return Err(Error::InvalidParams("n_traj must be >= 1".into()));
    }
    let n_grid = 4096;
    let t_end = ramp.total_time();
    let times: Vec<f64> = (0..=n_grid).map(|k| t_end * k as f64 / n_grid as f64).collect();
    let nominal = evolve_nonhermitian(params, ramp, psi0, &times, tol)?;
    let norm2 = &nominal.norm2;

    let invert = |u: f64| -> Option<f64> {
        if u < *norm2.last().unwrap() {
            return None;
        }
        // First index where norm2 drops below u (norm2 is non-increasing).
        let mut lo = 0usize;
        let mut hi = n_grid;
        while lo + 1 < hi {
            let mid = (lo + hi) / 2;
            if norm2[mid] > u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (n0, n1) = (norm2[lo], norm2[hi]);
        let frac = if n0 > n1 { (n0 - u) / (n0 - n1) } else { 0.0 };
        Some(times[lo] + frac * (times[hi] - times[lo]))
    };

    Ok((0..n_traj as u64)
        .map(|j| invert(jump_threshold(seed, j)))
        .collect())
}

/// Exponential decay rate extracted from the squared norm during the hold
/// segment of a ramp, by log-linear least squares.
#[derive(Debug, Clone, Copy)]
pub struct LifetimeFit {
    /// Fitted decay rate, rad/s (equals 1/s here since it is a plain rate).
    pub gamma_fit: f64,
    /// RMS relative residual of the exponential model over the hold window.
    pub residual: f64,
    /// Set when the residual indicates non-exponential decay (non-adiabatic
    /// admixture beating).
    pub nonexponential: bool,
}

/// Threshold on the RMS relative residual above which a lifetime fit is
/// flagged as non-exponential.
pub const NONEXPONENTIAL_RESIDUAL: f64 = 1e-3;

pub fn prepared_state_lifetime(
    params: &PairParams,
    ramp: &RampProtocol,
    tol: &Tolerances,
) -> Result<LifetimeFit> {
    if ramp.t_hold <= 0.0 {
        return Err(Error::InvalidParams(
            "ramp must include a hold segment".into(),
        ));
    }
    let t_ramp = ramp.ramp_time();
    let n = 60;
    let hold_times: Vec<f64> = (0..n)
        .map(|k| t_ramp + ramp.t_hold * k as f64 / (n - 1) as f64)
        .collect();
    let evo = evolve_nonhermitian(params, ramp, &ket_gg(), &hold_times, tol)?;

    // Log-linear regression ln(norm2) = a - gamma * t.
    let logs: Vec<f64> = evo.norm2.iter().map(|&v| v.max(1e-300).ln()).collect();
    let tm = hold_times.iter().sum::<f64>() / n as f64;
    let lm = logs.iter().sum::<f64>() / n as f64;
    let sxx: f64 = hold_times.iter().map(|t| (t - tm).powi(2)).sum();
    let sxy: f64 = hold_times
        .iter()
        .zip(&logs)
        .map(|(t, l)| (t - tm) * (l - lm))
        .sum();
    let slope = sxy / sxx;
    let gamma_fit = -slope;

    let residual = (hold_times
        .iter()
        .zip(&logs)
        .map(|(t, l)| (l - (lm + slope * (t - tm))).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    Ok(LifetimeFit {
        gamma_fit,
        residual,
        nonexponential: residual > NONEXPONENTIAL_RESIDUAL,
    })
}
