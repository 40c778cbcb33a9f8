//! Complex eigendecomposition of the 3x3 pair Hamiltonian with biorthogonal
//! left/right eigenvectors, branch tracking across parameter sweeps, and
//! dressed-state decay rates (full and perturbative).

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hamiltonian::{build_heff, PairOperator, PairParams};
use crate::math::{char_poly, cone, cross, cubic_roots, czero, dot, frobenius, inv3, norm2, scale, M3, V3};

/// Eigenvector-matrix condition number above which a decomposition is flagged
/// as sitting near an exceptional point.
pub const EP_CONDITION_THRESHOLD: f64 = 1e6;

/// Overlap gap below which a branch assignment between adjacent sweep points
/// counts as ambiguous and triggers grid bisection.
pub const AMBIGUITY_GAP: f64 = 1e-3;

const BISECTION_DEPTH: usize = 16;

/// One eigen-triplet of the non-Hermitian pair Hamiltonian.
///
/// The right vector has unit Hermitian norm and its largest-magnitude
/// component is real positive; the left vector is the matching row of the
/// inverse right-eigenvector matrix, so that `dot(left_m, right_n) = delta_mn`.
#[derive(Debug, Clone, Copy)]
pub struct DressedState {
    /// Complex eigenvalue lambda = epsilon - i*gamma/2, rad/s.
    pub lambda: C64,
    pub right: V3,
    pub left: V3,
    /// Branch label, stable across a sweep. 0, 1, 2 map to the bare state
    /// (gg, eg, ee) the branch resembles at the first sweep point.
    pub branch_id: usize,
}

impl DressedState {
    /// Real part of the eigenvalue, rad/s.
    pub fn epsilon(&self) -> f64 {
        self.lambda.re
    }

    /// Decay rate gamma = -2 Im(lambda), rad/s.
    pub fn gamma(&self) -> f64 {
        -2.0 * self.lambda.im
    }

    /// Bare-state populations |c_gg|^2, |c_eg|^2, |c_ee|^2 of the right vector.
    pub fn populations(&self) -> [f64; 3] {
        [
            self.right[0].norm_sqr(),
            self.right[1].norm_sqr(),
            self.right[2].norm_sqr(),
        ]
    }
}

/// Result of a single-point diagonalization.
#[derive(Debug, Clone, Copy)]
pub struct Eigensystem {
    /// Sorted by (Re lambda, Im lambda); branch ids are not yet meaningful.
    pub states: [DressedState; 3],
    /// Frobenius condition number of the right-eigenvector matrix.
    pub condition: f64,
    pub near_exceptional: bool,
}

/// How the deterministic global phase of each right eigenvector is fixed.
/// `LargestComponent` is the library convention; the alternative exists for
/// gauge-consistency checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseConvention {
    /// Largest-magnitude component made real positive.
    #[default]
    LargestComponent,
    /// First component above 1e-8 of the vector norm made real positive.
    FirstComponent,
}

pub fn diagonalize(h: &PairOperator) -> Eigensystem {
    diagonalize_with(h, PhaseConvention::LargestComponent)
}

pub fn diagonalize_with(h: &PairOperator, phase: PhaseConvention) -> Eigensystem {
    let m = &h.m;
    let scale_norm = frobenius(m).max(1e-300);
    let (c2, c1, c0) = char_poly(m);
    let mut lambdas = cubic_roots(c2, c1, c0);
    lambdas.sort_by(|a, b| {
        (a.re, a.im)
            .partial_cmp(&(b.re, b.im))
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    // Group (numerically) degenerate eigenvalues so repeated roots get a full
    // null-space basis instead of three copies of the same vector.
    let degeneracy_tol = 1e-8 * scale_norm;
    let mut rights = [[czero(); 3]; 3];
    let mut i = 0;
    while i < 3 {
        let mut j = i + 1;
        while j < 3 && (lambdas[j] - lambdas[i]).norm() <= degeneracy_tol {
            j += 1;
        }
        let cluster = j - i;
        match cluster {
            1 => rights[i] = null_vector(m, lambdas[i], scale_norm),
            2 => {
                let mid = (lambdas[i] + lambdas[i + 1]) * 0.5;
                let pair = null_pair(m, mid, scale_norm);
                rights[i] = pair[0];
                rights[i + 1] = pair[1];
            }
            _ => {
                rights[0] = [cone(), czero(), czero()];
                rights[1] = [czero(), cone(), czero()];
                rights[2] = [czero(), czero(), cone()];
            }
        }
        i = j;
    }

    for r in rights.iter_mut() {
        normalize_and_fix_phase(r, phase);
    }

    // Columns of R are the right vectors; rows of R^-1 are the left vectors.
    let r_mat: M3 = [
        [rights[0][0], rights[1][0], rights[2][0]],
        [rights[0][1], rights[1][1], rights[2][1]],
        [rights[0][2], rights[1][2], rights[2][2]],
    ];
    let (lefts, condition, invertible) = match inv3(&r_mat) {
        Some(inv) => {
            let cond = frobenius(&r_mat) * frobenius(&inv);
            (
                [inv[0], inv[1], inv[2]],
                cond,
                true,
            )
        }
        None => {
            // Defective to machine precision: fall back to rescaled conjugate
            // rows so callers still get finite numbers, with the warning set.
            let mut lefts = [[czero(); 3]; 3];
            for (k, l) in lefts.iter_mut().enumerate() {
                let conj = [rights[k][0].conj(), rights[k][1].conj(), rights[k][2].conj()];
                let d = dot(&conj, &rights[k]);
                *l = if d.norm() > 1e-300 {
                    scale(&conj, cone() / d)
                } else {
                    conj
                };
            }
            (lefts, f64::INFINITY, false)
        }
    };

    let mk = |k: usize| DressedState {
        lambda: lambdas[k],
        right: rights[k],
        left: lefts[k],
        branch_id: k,
    };
    Eigensystem {
        states: [mk(0), mk(1), mk(2)],
        condition,
        near_exceptional: !invertible || condition > EP_CONDITION_THRESHOLD,
    }
}

/// Null vector of (m - lambda I) for a simple eigenvalue, via the
/// largest-magnitude cross product of two rows.
fn null_vector(m: &M3, lambda: C64, scale_norm: f64) -> V3 {
    let a = shifted(m, lambda);
    let mut best = [czero(); 3];
    let mut best_n = -1.0;
    for (i, j) in [(0usize, 1usize), (0, 2), (1, 2)] {
        let v = cross(&a[i], &a[j]);
        let n = norm2(&v);
        if n > best_n {
            best_n = n;
            best = v;
        }
    }
    if best_n.sqrt() <= 1e-13 * scale_norm * scale_norm {
        // Rows are (numerically) pairwise parallel: rank deficiency beyond a
        // simple eigenvalue. Use the rank-1 null space instead.
        return null_pair(m, lambda, scale_norm)[0];
    }
    best
}

/// Two independent null vectors of (m - lambda I) when the shifted matrix has
/// rank one (doubly degenerate eigenvalue).
fn null_pair(m: &M3, lambda: C64, scale_norm: f64) -> [V3; 2] {
    let a = shifted(m, lambda);
    // Row with the largest norm carries the single constraint r . v = 0.
    let (r, rn) = a
        .iter()
        .map(|row| (*row, norm2(row)))
        .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
        .unwrap();
    if rn.sqrt() <= 1e-13 * scale_norm {
        // Shifted matrix is numerically zero; any basis works.
        return [[cone(), czero(), czero()], [czero(), cone(), czero()]];
    }
    let pivot = (0..3).max_by(|&i, &j| r[i].norm().partial_cmp(&r[j].norm()).unwrap()).unwrap();
    let mut out = [[czero(); 3]; 2];
    let mut k = 0;
    for idx in 0..3 {
        if idx == pivot {
            continue;
        }
        let mut v = [czero(); 3];
        v[idx] = cone();
        v[pivot] = -r[idx] / r[pivot];
        out[k] = v;
        k += 1;
    }
    out
}

fn shifted(m: &M3, lambda: C64) -> M3 {
    let mut a = *m;
    for i in 0..3 {
        a[i][i] -= lambda;
    }
    a
}

fn normalize_and_fix_phase(v: &mut V3, phase: PhaseConvention) {
    let n = norm2(v).sqrt();
    if n > 0.0 {
        for e in v.iter_mut() {
            *e /= n;
        }
    }
    let idx = match phase {
        PhaseConvention::LargestComponent => (0..3)
            .max_by(|&i, &j| v[i].norm().partial_cmp(&v[j].norm()).unwrap())
            .unwrap(),
        PhaseConvention::FirstComponent => (0..3)
            .find(|&i| v[i].norm() > 1e-8)
            .unwrap_or(0),
    };
    let c = v[idx];
    if c.norm() > 0.0 {
        let ph = c.conj() / c.norm();
        for e in v.iter_mut() {
            *e *= ph;
        }
    }
}

/// Branch-tracked eigendecomposition along a one-parameter family of
/// Hamiltonians. `states[k][b]` is branch `b` at grid point `k`.
#[derive(Debug, Clone)]
pub struct SpectralSweep {
    pub xs: Vec<f64>,
    pub states: Vec<[DressedState; 3]>,
    /// Set when any grid point was flagged near an exceptional point.
    pub near_exceptional: bool,
}

impl SpectralSweep {
    pub fn gammas(&self, branch: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[branch].gamma()).collect()
    }

    pub fn epsilons(&self, branch: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[branch].epsilon()).collect()
    }

    /// Branch whose decay rate at grid point `k` is smallest.
    pub fn least_dissipative_branch(&self, k: usize) -> usize {
        let s = &self.states[k];
        (0..3)
            .min_by(|&a, &b| s[a].gamma().partial_cmp(&s[b].gamma()).unwrap())
            .unwrap()
    }
}

/// Sweep an arbitrary Hamiltonian path with branch continuity. Branch ids at
/// the first grid point are assigned by bare-state character.
pub fn sweep_path<F>(h_of: F, xs: &[f64]) -> Result<SpectralSweep>
where
    F: Fn(f64) -> PairOperator,
{
    sweep_path_with(h_of, xs, PhaseConvention::LargestComponent)
}

/// Like [`sweep_path`] with an explicit eigenvector phase convention.
pub fn sweep_path_with<F>(h_of: F, xs: &[f64], phase: PhaseConvention) -> Result<SpectralSweep>
where
    F: Fn(f64) -> PairOperator,
{
    if xs.is_empty() {
        return Err(Error::BadGrid);
    }
    let increasing = xs.windows(2).all(|w| w[1] > w[0]);
    let decreasing = xs.windows(2).all(|w| w[1] < w[0]);
    if xs.len() > 1 && !increasing && !decreasing {
        return Err(Error::BadGrid);
    }

    let mut near_ep = false;
    let first = diagonalize_with(&h_of(xs[0]), phase);
    near_ep |= first.near_exceptional;
    let mut current = assign_bare_character(&first.states);
    let mut states = Vec::with_capacity(xs.len());
    states.push(current);

    for w in xs.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let next = continue_branches(&h_of, &current, x0, x1, BISECTION_DEPTH, &mut near_ep, phase)?;
        current = next;
        states.push(current);
    }
    Ok(SpectralSweep {
        xs: xs.to_vec(),
        states,
        near_exceptional: near_ep,
    })
}

/// Spectrum of the full effective Hamiltonian over a detuning grid.
pub fn sweep_spectrum(params: &PairParams, deltas: &[f64]) -> Result<SpectralSweep> {
    params.validate()?;
    sweep_path(|d| build_heff(params, d), deltas)
}

/// Slot each state into the bare-state index it most resembles.
fn assign_bare_character(states: &[DressedState; 3]) -> [DressedState; 3] {
    let mut weight = [[0.0f64; 3]; 3]; // weight[state][bare]
    for (n, s) in states.iter().enumerate() {
        for b in 0..3 {
            weight[n][b] = s.right[b].norm_sqr();
        }
    }
    let mut out = *states;
    let mut used_state = [false; 3];
    let mut used_slot = [false; 3];
    for _ in 0..3 {
        let mut best = (-1.0, 0usize, 0usize);
        for n in 0..3 {
            for b in 0..3 {
                if !used_state[n] && !used_slot[b] && weight[n][b] > best.0 {
                    best = (weight[n][b], n, b);
                }
            }
        }
        let (_, n, b) = best;
        used_state[n] = true;
        used_slot[b] = true;
        out[b] = states[n];
        out[b].branch_id = b;
    }
    out
}

/// Greedy maximum-overlap assignment between the previous branches and a new
/// unordered eigensystem. Returns `None` if two candidate overlaps for the
/// same previous branch are within `AMBIGUITY_GAP`.
fn match_overlaps(prev: &[DressedState; 3], next: &[DressedState; 3]) -> Option<[usize; 3]> {
    let mut overlap = [[0.0f64; 3]; 3];
    for m in 0..3 {
        for n in 0..3 {
            overlap[m][n] = dot(&prev[m].left, &next[n].right).norm();
        }
    }
    let mut assignment = [usize::MAX; 3];
    let mut used_row = [false; 3];
    let mut used_col = [false; 3];
    for _ in 0..3 {
        let mut best = (-1.0, 0usize, 0usize);
        for m in 0..3 {
            for n in 0..3 {
                if !used_row[m] && !used_col[n] && overlap[m][n] > best.0 {
                    best = (overlap[m][n], m, n);
                }
            }
        }
        let (val, m, n) = best;
        // Ambiguity: another available column for this row is nearly as good.
        let second = (0..3)
            .filter(|&c| c != n && !used_col[c])
            .map(|c| overlap[m][c])
            .fold(f64::NEG_INFINITY, f64::max);
        if second.is_finite() && (val - second).abs() < AMBIGUITY_GAP {
            return None;
        }
        used_row[m] = true;
        used_col[n] = true;
        assignment[m] = n;
    }
    Some(assignment)
}

fn continue_branches<F>(
    h_of: &F,
    prev: &[DressedState; 3],
    x0: f64,
    x1: f64,
    depth: usize,
    near_ep: &mut bool,
    phase: PhaseConvention,
) -> Result<[DressedState; 3]>
where
    F: Fn(f64) -> PairOperator,
{
    let eig = diagonalize_with(&h_of(x1), phase);
    *near_ep |= eig.near_exceptional;
    if let Some(assignment) = match_overlaps(prev, &eig.states) {
        let mut out = eig.states;
        for b in 0..3 {
            out[b] = eig.states[assignment[b]];
            out[b].branch_id = prev[b].branch_id;
        }
        return Ok(out);
    }
    if depth == 0 {
        return Err(Error::AmbiguousBranches {
            x: x1,
            gap: AMBIGUITY_GAP,
            depth: BISECTION_DEPTH,
        });
    }
    let xm = 0.5 * (x0 + x1);
    if xm == x0 || xm == x1 {
        return Err(Error::AmbiguousBranches {
            x: x1,
            gap: AMBIGUITY_GAP,
            depth: BISECTION_DEPTH - depth,
        });
    }
    let mid = continue_branches(h_of, prev, x0, xm, depth - 1, near_ep, phase)?;
    continue_branches(h_of, &mid, xm, x1, depth - 1, near_ep, phase)
}

/// Single-point diagonalization with the three states slotted into the bare
/// basis index (gg, eg, ee) they most resemble.
pub fn dressed_states_by_character(h: &PairOperator) -> [DressedState; 3] {
    assign_bare_character(&diagonalize(h).states)
}

/// Permute `next` so each entry continues the corresponding branch of `prev`,
/// by maximum left-right overlap. `None` when the assignment is ambiguous.
pub(crate) fn align_to(prev: &[DressedState; 3], next: &[DressedState; 3]) -> Option<[DressedState; 3]> {
    match_overlaps(prev, next).map(|assignment| {
        let mut out = *next;
        for b in 0..3 {
            out[b] = next[assignment[b]];
            out[b].branch_id = prev[b].branch_id;
        }
        out
    })
}

/// Decay rates predicted by treating the anti-Hermitian part as a
/// perturbation: diagonalize the Hermitian part and apply
/// gamma = Gamma_ee |<ee|state>|^2 to its eigenvectors. Branch ids follow the
/// same bare-character labeling as `sweep_spectrum` on the same grid.
pub fn perturbative_decay_rates(params: &PairParams, deltas: &[f64]) -> Result<Vec<[f64; 3]>> {
    let hermitian = PairParams {
        gamma_ee: 0.0,
        ..*params
    };
    let sweep = sweep_path(|d| build_heff(&hermitian, d), deltas)?;
    Ok(sweep
        .states
        .iter()
        .map(|s| {
            [
                params.gamma_ee * s[0].right[2].norm_sqr(),
                params.gamma_ee * s[1].right[2].norm_sqr(),
                params.gamma_ee * s[2].right[2].norm_sqr(),
            ]
        })
        .collect())
}

/// Decay rates versus drive strength at fixed detuning, branch-tracked in
/// Omega. Rows are `(omega, [gamma_gg_like, gamma_eg_like, gamma_ee_like])`.
pub fn zeno_crossover_report(
    params: &PairParams,
    delta: f64,
    omegas: &[f64],
) -> Result<Vec<(f64, [f64; 3])>> {
    let sweep = sweep_path(
        |omega| {
            build_heff(
                &PairParams {
                    omega,
                    ..*params
                },
                delta,
            )
        },
        omegas,
    )?;
    Ok(sweep
        .xs
        .iter()
        .zip(sweep.states.iter())
        .map(|(&omega, s)| (omega, [s[0].gamma(), s[1].gamma(), s[2].gamma()]))
        .collect())
}

/// Uniform grid helper, inclusive of both endpoints.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::derive_pq;
    use crate::math::mat_vec;
    use std::f64::consts::TAU;

    /// Independent oracle: Durand-Kerner iteration on the explicitly expanded
    /// characteristic cubic. No companion matrix, no shared code path with
    /// Cardano beyond the coefficients.
    fn durand_kerner_roots(m: &M3) -> [C64; 3] {
        let (c2, c1, c0) = char_poly(m);
        let p = |z: C64| ((z + c2) * z + c1) * z + c0;
        let radius = 1.0 + c2.norm().max(c1.norm()).max(c0.norm());
        let seed = C64::new(0.4, 0.9);
        let mut z = [seed * radius, seed * seed * radius, seed * seed * seed * radius];
        for _ in 0..500 {
            let mut next = z;
            for i in 0..3 {
                let mut denom = cone();
                for j in 0..3 {
                    if j != i {
                        denom *= z[i] - z[j];
                    }
                }
                if denom.norm() > 0.0 {
                    next[i] = z[i] - p(z[i]) / denom;
                }
            }
            let moved: f64 = (0..3).map(|i| (next[i] - z[i]).norm()).sum();
            z = next;
            if moved < 1e-14 * radius {
                break;
            }
        }
        z
    }

    fn random_params(rng: &mut impl FnMut() -> f64) -> (PairParams, f64) {
        let gamma = TAU * (500.0 + 2000.0 * rng());
        let params = PairParams {
            u_gg: gamma / 1.02,
            u_eg: 0.905 * gamma / 1.02,
            u_ee: 1.21 * gamma / 1.02,
            gamma_ee: gamma,
            omega: 2.0 * gamma * rng(),
        };
        let delta = (2.0 * rng() - 1.0) * 3.0 * gamma;
        (params, delta)
    }

    fn lcg(seed: u64) -> impl FnMut() -> f64 {
        let mut state = seed;
        move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    #[test]
    fn diagonal_lossy_input() {
        let gamma = TAU * 1000.0;
        let params = PairParams {
            u_gg: 0.0,
            u_eg: 0.0,
            u_ee: 0.0,
            gamma_ee: gamma,
            omega: 0.0,
        };
        let eig = diagonalize(&build_heff(&params, 0.0));
        let mut gammas: Vec<f64> = eig.states.iter().map(|s| s.gamma()).collect();
        gammas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(gammas[0].abs() < 1e-9 * gamma);
        assert!(gammas[1].abs() < 1e-9 * gamma);
        assert!((gammas[2] - gamma).abs() < 1e-9 * gamma);
        // Eigenvectors are the bare basis.
        for s in &eig.states {
            let pops = s.populations();
            let max = pops.iter().cloned().fold(0.0, f64::max);
            assert!(max > 1.0 - 1e-12);
        }
    }

    #[test]
    fn hermitian_limit_left_is_conjugate_right() {
        let params = PairParams {
            gamma_ee: 0.0,
            ..PairParams::reference(TAU * 200.0)
        };
        let eig = diagonalize(&build_heff(&params, TAU * 120.0));
        for s in &eig.states {
            assert!(s.gamma().abs() < 1e-9 * TAU * 1400.0);
            for k in 0..3 {
                assert!((s.left[k] - s.right[k].conj()).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn zeno_regime_lossless_subspace() {
        let mut params = PairParams::reference(0.0);
        params.omega = 0.1 * params.gamma_ee;
        let (p, q) = derive_pq(&params);
        let eig = diagonalize(&build_heff(&params, p + q));
        let mut gammas: Vec<f64> = eig.states.iter().map(|s| s.gamma()).collect();
        gammas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(gammas[0] < 0.05 * params.gamma_ee);
        assert!(gammas[1] < 0.05 * params.gamma_ee);
        assert!(gammas[2] > 0.9 * params.gamma_ee);
    }

    #[test]
    fn invariants_on_random_points() {
        let mut rng = lcg(0x5eed);
        for _ in 0..200 {
            let (params, delta) = random_params(&mut rng);
            let h = build_heff(&params, delta);
            let eig = diagonalize(&h);
            if eig.near_exceptional {
                continue;
            }
            // Sum rule.
            let sum: f64 = eig.states.iter().map(|s| s.gamma()).sum();
            assert!((sum - params.gamma_ee).abs() < 1e-10 * params.gamma_ee);
            // Decay rate equals loss rate times ee population.
            for s in &eig.states {
                let expect = params.gamma_ee * s.right[2].norm_sqr();
                assert!((s.gamma() - expect).abs() < 1e-9 * params.gamma_ee);
            }
            // Biorthogonality.
            for m in 0..3 {
                for n in 0..3 {
                    let o = dot(&eig.states[m].left, &eig.states[n].right);
                    let expect = if m == n { 1.0 } else { 0.0 };
                    assert!((o - C64::new(expect, 0.0)).norm() < 1e-9);
                }
            }
            // Spectral reconstruction sum_n lambda_n |r_n><l_n|.
            let mut recon = [[czero(); 3]; 3];
            for s in &eig.states {
                for i in 0..3 {
                    for j in 0..3 {
                        recon[i][j] += s.lambda * s.right[i] * s.left[j];
                    }
                }
            }
            let mut err = 0.0f64;
            for i in 0..3 {
                for j in 0..3 {
                    err += (recon[i][j] - h.m[i][j]).norm_sqr();
                }
            }
            assert!(err.sqrt() < 1e-9 * frobenius(&h.m));
            // Eigenvalues satisfy the residual equation (H - lambda) r = 0.
            for s in &eig.states {
                let mut a = h.m;
                for i in 0..3 {
                    a[i][i] -= s.lambda;
                }
                let res = mat_vec(&a, &s.right);
                assert!(norm2(&res).sqrt() < 1e-8 * frobenius(&h.m));
            }
        }
    }

    #[test]
    fn cardano_matches_durand_kerner_oracle() {
        let mut rng = lcg(0xfeed);
        for _ in 0..200 {
            let (params, delta) = random_params(&mut rng);
            let h = build_heff(&params, delta);
            let eig = diagonalize(&h);
            let oracle = durand_kerner_roots(&h.m);
            let scale = frobenius(&h.m);
            for s in &eig.states {
                let best = oracle
                    .iter()
                    .map(|r| (r - s.lambda).norm())
                    .fold(f64::INFINITY, f64::min);
                assert!(best < 1e-8 * scale, "eigenvalue {} off by {best:e}", s.lambda);
            }
        }
    }

    #[test]
    fn sweep_uncoupled_gives_bare_lines() {
        let params = PairParams::reference(0.0);
        let (p, q) = derive_pq(&params);
        let deltas = linspace(-TAU * 1500.0, TAU * 1500.0, 101);
        let sweep = sweep_spectrum(&params, &deltas).unwrap();
        for (k, &d) in deltas.iter().enumerate() {
            let s = &sweep.states[k];
            assert!((s[0].epsilon() - (-(p - d) - q)).abs() < 1e-6);
            assert!(s[1].epsilon().abs() < 1e-6);
            assert!((s[2].epsilon() - ((p - d) - q)).abs() < 1e-6);
        }
    }

    #[test]
    fn sweep_strong_drive_all_rates_comparable() {
        let mut params = PairParams::reference(0.0);
        params.omega = params.gamma_ee;
        let deltas = linspace(-TAU * 1500.0, TAU * 1500.0, 601);
        let sweep = sweep_spectrum(&params, &deltas).unwrap();
        // Near resonance every branch decays at a rate comparable to Gamma_ee.
        let (p, q) = derive_pq(&params);
        let k = deltas
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - (p + q)).abs().partial_cmp(&(b.1 - (p + q)).abs()).unwrap()
            })
            .unwrap()
            .0;
        for b in 0..3 {
            assert!(sweep.states[k][b].gamma() > 0.05 * params.gamma_ee);
        }
        // Branch continuity along the grid.
        let c_bound = {
            let dmax: f64 = deltas.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
            20.0 * dmax
        };
        for b in 0..3 {
            for w in sweep.states.windows(2) {
                assert!((w[1][b].lambda - w[0][b].lambda).norm() < c_bound);
            }
        }
    }

    #[test]
    fn sweep_zeno_only_one_avoided_crossing() {
        let mut params = PairParams::reference(0.0);
        params.omega = 0.1 * params.gamma_ee;
        let deltas = linspace(-TAU * 1500.0, TAU * 1500.0, 1501);
        let sweep = sweep_spectrum(&params, &deltas).unwrap();
        // The eg-ee real parts cross (no avoided crossing survives there): the
        // sign of their difference changes along the sweep.
        let diff: Vec<f64> = (0..deltas.len())
            .map(|k| sweep.states[k][1].epsilon() - sweep.states[k][2].epsilon())
            .collect();
        assert!(diff.first().unwrap() * diff.last().unwrap() < 0.0);
        // The gg-eg gap never closes (avoided crossing survives).
        let min_gap = (0..deltas.len())
            .map(|k| (sweep.states[k][0].epsilon() - sweep.states[k][1].epsilon()).abs())
            .fold(f64::INFINITY, f64::min);
        assert!(min_gap > 0.2 * params.omega, "gap {min_gap}");
    }

    #[test]
    fn perturbative_rates_basics() {
        let params = PairParams::reference(0.0);
        let deltas = linspace(-TAU * 1500.0, TAU * 1500.0, 31);
        let rates = perturbative_decay_rates(&params, &deltas).unwrap();
        // Omega = 0: the gg branch has no ee admixture at all.
        for row in &rates {
            assert!(row[0].abs() < 1e-12 * params.gamma_ee);
        }
    }

    #[test]
    fn perturbative_far_detuned_quartic_slope() {
        let mut params = PairParams::reference(0.0);
        params.omega = TAU * 150.0;
        let deltas: Vec<f64> = (0..30)
            .map(|k| TAU * 5000.0 * (10.0f64).powf(k as f64 / 29.0))
            .collect();
        let rates = perturbative_decay_rates(&params, &deltas).unwrap();
        let (slope, _) = log_log_slope(
            &deltas,
            &rates.iter().map(|r| r[0]).collect::<Vec<_>>(),
        );
        assert!((slope + 4.0).abs() < 0.2, "slope {slope}");
    }

    #[test]
    fn perturbative_exceeds_full_near_resonance() {
        let mut params = PairParams::reference(0.0);
        params.omega = TAU * 150.0;
        let deltas = linspace(-TAU * 1500.0, TAU * 1500.0, 301);
        let full = sweep_spectrum(&params, &deltas).unwrap();
        let pert = perturbative_decay_rates(&params, &deltas).unwrap();
        let max_ratio = (0..deltas.len())
            .map(|k| {
                let b = full.least_dissipative_branch(k);
                pert[k][b] / full.states[k][b].gamma().max(1e-300)
            })
            .fold(0.0f64, f64::max);
        assert!(max_ratio >= 100.0, "enhancement {max_ratio}");
    }

    #[test]
    fn crossover_quadratic_in_omega_and_gamma_scaling() {
        let params = PairParams::reference(0.0);
        let (p, q) = derive_pq(&params);
        let delta = p + q; // on the gg-eg resonance
        let omegas: Vec<f64> = (1..=20).map(|k| k as f64 * 0.005 * params.gamma_ee).collect();
        let report = zeno_crossover_report(&params, delta, &omegas).unwrap();
        let min_gammas: Vec<f64> = report
            .iter()
            .map(|(_, g)| g.iter().cloned().fold(f64::INFINITY, f64::min))
            .collect();
        // gamma_min -> 0 quadratically in Omega.
        let (slope, _) = log_log_slope(&omegas, &min_gammas);
        assert!((slope - 2.0).abs() < 0.1, "slope {slope}");
        // Monotone growth with drive strength in this range.
        for w in min_gammas.windows(2) {
            assert!(w[1] > w[0]);
        }
        // Doubling Gamma_ee halves the eg-like branch's Zeno rate 2 Omega^2 /
        // Gamma_ee at x = 0 (delta = p - q, the eg-ee resonance), where the
        // Zeno shift vanishes for every Gamma_ee.
        let delta = p - q;
        let omega = 0.02 * params.gamma_ee;
        let g1 = zeno_crossover_report(&params, delta, &[omega]).unwrap()[0].1;
        let doubled = PairParams {
            gamma_ee: 2.0 * params.gamma_ee,
            ..params
        };
        let g2 = zeno_crossover_report(&doubled, delta, &[omega]).unwrap()[0].1;
        assert!((g2[1] / g1[1] - 0.5).abs() < 0.05, "ratio {}", g2[1] / g1[1]);
    }

    fn log_log_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
        let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
        let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
        let n = lx.len() as f64;
        let mx = lx.iter().sum::<f64>() / n;
        let my = ly.iter().sum::<f64>() / n;
        let sxx: f64 = lx.iter().map(|v| (v - mx).powi(2)).sum();
        let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
        (sxy / sxx, my - sxy / sxx * mx)
    }
}
