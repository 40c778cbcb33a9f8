//! Small fixed-size complex linear algebra for the 3x3 pair problem, plus a
//! closed-form cubic root solver used by the eigendecomposition.

use num_complex::Complex64 as C64;

pub type V3 = [C64; 3];
pub type M3 = [[C64; 3]; 3];

pub const ZERO3: V3 = [C64::new(0.0, 0.0); 3];

pub fn czero() -> C64 {
    C64::new(0.0, 0.0)
}

pub fn cone() -> C64 {
    C64::new(1.0, 0.0)
}

/// Plain (bilinear) dot product, no conjugation. This is the pairing used
/// between left and right eigenvectors.
pub fn dot(a: &V3, b: &V3) -> C64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Hermitian inner product <a|b> (conjugate on the left argument).
pub fn cdot(a: &V3, b: &V3) -> C64 {
    a[0].conj() * b[0] + a[1].conj() * b[1] + a[2].conj() * b[2]
}

pub fn norm2(a: &V3) -> f64 {
    a[0].norm_sqr() + a[1].norm_sqr() + a[2].norm_sqr()
}

pub fn scale(a: &V3, c: C64) -> V3 {
    [a[0] * c, a[1] * c, a[2] * c]
}

pub fn sub(a: &V3, b: &V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: &V3, b: &V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// Cross product over C^3 with the plain bilinear form: `dot(cross(a, b), a) = 0`.
pub fn cross(a: &V3, b: &V3) -> V3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn mat_vec(m: &M3, v: &V3) -> V3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn mat_mul(a: &M3, b: &M3) -> M3 {
    let mut out = [[czero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub fn trace(m: &M3) -> C64 {
    m[0][0] + m[1][1] + m[2][2]
}

pub fn det3(m: &M3) -> C64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Inverse via the adjugate. Returns `None` when the determinant underflows
/// relative to the matrix scale.
pub fn inv3(m: &M3) -> Option<M3> {
    let d = det3(m);
    let scale = frobenius(m);
    if d.norm() <= 1e-300 || d.norm() < 1e-60 * scale.powi(3) {
        return None;
    }
    let inv_d = cone() / d;
    let cof = |r1: usize, r2: usize, c1: usize, c2: usize| {
        m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]
    };
    Some([
        [cof(1, 2, 1, 2) * inv_d, -cof(0, 2, 1, 2) * inv_d, cof(0, 1, 1, 2) * inv_d],
        [-cof(1, 2, 0, 2) * inv_d, cof(0, 2, 0, 2) * inv_d, -cof(0, 1, 0, 2) * inv_d],
        [cof(1, 2, 0, 1) * inv_d, -cof(0, 2, 0, 1) * inv_d, cof(0, 1, 0, 1) * inv_d],
    ])
}

pub fn frobenius(m: &M3) -> f64 {
    let mut s = 0.0;
    for row in m {
        for e in row {
            s += e.norm_sqr();
        }
    }
    s.sqrt()
}

/// Coefficients (c2, c1, c0) of the characteristic polynomial
/// `lambda^3 + c2 lambda^2 + c1 lambda + c0` of `m`.
pub fn char_poly(m: &M3) -> (C64, C64, C64) {
    let tr = trace(m);
    // Sum of principal 2x2 minors.
    let m2 = (m[0][0] * m[1][1] - m[0][1] * m[1][0])
        + (m[0][0] * m[2][2] - m[0][2] * m[2][0])
        + (m[1][1] * m[2][2] - m[1][2] * m[2][1]);
    (-tr, m2, -det3(m))
}

/// Roots of `z^3 + a z^2 + b z + c = 0` by Cardano's formula with the
/// square-root branch chosen to avoid cancellation, followed by one Newton
/// polish per root. The roots are then shifted uniformly so their sum equals
/// `-a` exactly; this keeps trace-derived sum rules exact while leaving the
/// pairwise differences untouched.
pub fn cubic_roots(a: C64, b: C64, c: C64) -> [C64; 3] {
    let third = 1.0 / 3.0;
    let shift = a * third;
    // Depressed cubic t^3 + p t + q with z = t - a/3.
    let p = b - a * a * third;
    let q = c + a * (2.0 * a * a - 9.0 * b) / 27.0;

    let half_q = q * 0.5;
    let disc = half_q * half_q + p * p * p / 27.0;
    let s = disc.sqrt();
    // Pick the branch that maximizes |u^3| to keep u well away from zero.
    let u3 = if (-half_q + s).norm() >= (-half_q - s).norm() {
        -half_q + s
    } else {
        -half_q - s
    };

    let mut roots = [czero(); 3];
    if u3.norm() == 0.0 {
        // p == q == 0: triple root.
        roots = [-shift; 3];
    } else {
        let u = u3.cbrt();
        let w = C64::new(-0.5, 0.75f64.sqrt());
        for (k, r) in roots.iter_mut().enumerate() {
            let uk = match k {
                0 => u,
                1 => u * w,
                _ => u * w.conj(),
            };
            *r = uk - p / (3.0 * uk) - shift;
        }
    }

    // One Newton step per root against the original polynomial.
    for r in roots.iter_mut() {
        let f = ((*r + a) * *r + b) * *r + c;
        let df = (3.0 * *r + 2.0 * a) * *r + b;
        if df.norm() > 0.0 {
            let step = f / df;
            if step.norm() < 0.5 * (r.norm() + 1.0) {
                *r -= step;
            }
        }
    }

    // Enforce the exact sum rule sum(roots) = -a.
    let correction = (-a - (roots[0] + roots[1] + roots[2])) / 3.0;
    for r in roots.iter_mut() {
        *r += correction;
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn cubic_recovers_known_roots() {
        // (z - 1)(z - 2i)(z + 3) = z^3 + (2 - 2i) z^2 + (-3 - 4i) z + 6i
        let roots = cubic_roots(c(2.0, -2.0), c(-3.0, -4.0), c(0.0, 6.0));
        let expected = [c(1.0, 0.0), c(0.0, 2.0), c(-3.0, 0.0)];
        for e in expected {
            let best = roots
                .iter()
                .map(|r| (r - e).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-12, "missing root {e}, got {roots:?}");
        }
    }

    #[test]
    fn cubic_triple_root() {
        // (z - 2)^3 = z^3 - 6 z^2 + 12 z - 8
        let roots = cubic_roots(c(-6.0, 0.0), c(12.0, 0.0), c(-8.0, 0.0));
        for r in roots {
            assert!((r - c(2.0, 0.0)).norm() < 1e-4);
        }
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let m: M3 = [
            [c(1.0, 0.5), c(0.0, 1.0), c(2.0, 0.0)],
            [c(0.0, 0.0), c(3.0, -1.0), c(1.0, 1.0)],
            [c(1.0, 0.0), c(0.0, 0.0), c(-2.0, 0.3)],
        ];
        let inv = inv3(&m).unwrap();
        let prod = mat_mul(&inv, &m);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((prod[i][j] - c(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn cross_is_bilinear_orthogonal() {
        let a = [c(1.0, 2.0), c(-0.5, 0.1), c(0.3, -0.7)];
        let b = [c(0.2, -1.0), c(1.5, 0.0), c(-0.4, 0.9)];
        let x = cross(&a, &b);
        assert!(dot(&x, &a).norm() < 1e-14);
        assert!(dot(&x, &b).norm() < 1e-14);
    }
}
