//! Minimal 3x3 matrix helpers for calibration.

use crate::scalar::Real;

pub(crate) type Mat3<T> = [[T; 3]; 3];

pub(crate) fn zero<T: Real>() -> Mat3<T> {
    [[T::zero(); 3]; 3]
}

pub(crate) fn transpose<T: Real>(a: &Mat3<T>) -> Mat3<T> {
    let mut out = zero();
    for (i, row) in a.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            out[j][i] = v;
        }
    }
    out
}

pub(crate) fn mul<T: Real>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let mut out = zero();
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub(crate) fn mul_vec<T: Real>(a: &Mat3<T>, v: &[T; 3]) -> [T; 3] {
    [
        a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
        a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
        a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
    ]
}

pub(crate) fn det<T: Real>(a: &Mat3<T>) -> T {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// Inverse via the adjugate; `None` when the determinant is exactly zero.
pub(crate) fn inverse<T: Real>(a: &Mat3<T>) -> Option<Mat3<T>> {
    let d = det(a);
    if d == T::zero() || !d.is_finite() {
        return None;
    }
    let c = |r0: usize, c0: usize, r1: usize, c1: usize| a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0];
    let adj = [
        [c(1, 1, 2, 2), -c(0, 1, 2, 2), c(0, 1, 1, 2)],
        [-c(1, 0, 2, 2), c(0, 0, 2, 2), -c(0, 0, 1, 2)],
        [c(1, 0, 2, 1), -c(0, 0, 2, 1), c(0, 0, 1, 1)],
    ];
    let mut out = zero();
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = adj[i][j] / d;
        }
    }
    Some(out)
}

pub(crate) fn frobenius_diff<T: Real>(a: &Mat3<T>, b: &Mat3<T>) -> T {
    let mut s = T::zero();
    for i in 0..3 {
        for j in 0..3 {
            let d = a[i][j] - b[i][j];
            s = s + d * d;
        }
    }
    s.sqrt()
}

/// Orthogonal polar factor by Newton iteration `X <- (X + X^-T) / 2`.
///
/// For `det(a) > 0` this is the rotation nearest to `a` in Frobenius norm.
pub(crate) fn nearest_rotation<T: Real>(a: &Mat3<T>) -> Option<Mat3<T>> {
    if !(det(a) > T::zero()) {
        return None;
    }
    let half = T::of(0.5);
    let tol = T::epsilon() * T::of(16.0);
    let mut x = *a;
    for _ in 0..100 {
        let inv_t = transpose(&inverse(&x)?);
        let mut next = zero();
        for i in 0..3 {
            for j in 0..3 {
                next[i][j] = half * (x[i][j] + inv_t[i][j]);
            }
        }
        let step = frobenius_diff(&next, &x);
        x = next;
        if step <= tol {
            break;
        }
    }
    Some(x)
}
