//! Logistic calibration of margins (Platt scaling, Newton with backtracking).

use crate::scalar::Real;

/// Returns `(a, b)` with `P(y = +1 | m) = sigmoid(a m + b)`. Falls back to
/// `(1, 0)` when the fit is not increasing in the margin.
pub(super) fn fit<T: Real>(margins: &[T], labels: &[i8]) -> (T, T) {
    let f: Vec<f64> = margins.iter().map(|m| m.as_f64()).collect();
    let pos = labels.iter().filter(|&&y| y > 0).count() as f64;
    let neg = labels.len() as f64 - pos;
    let hi = (pos + 1.0) / (pos + 2.0);
    let lo = 1.0 / (neg + 2.0);
    let target: Vec<f64> = labels.iter().map(|&y| if y > 0 { hi } else { lo }).collect();

    // fits P = 1 / (1 + exp(A f + B)); the returned slope is -A
    let objective = |a: f64, b: f64| -> f64 {
        f.iter()
            .zip(&target)
            .map(|(&fi, &t)| {
                let z = fi * a + b;
                if z >= 0.0 {
                    t * z + (-z).exp().ln_1p()
                } else {
                    (t - 1.0) * z + z.exp().ln_1p()
                }
            })
            .sum()
    };
    let (mut a, mut b) = (0.0, ((neg + 1.0) / (pos + 1.0)).ln());
    let mut fval = objective(a, b);
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (1e-12, 1e-12, 0.0, 0.0, 0.0);
        for (&fi, &t) in f.iter().zip(&target) {
            let z = fi * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += fi * fi * d2;
            h22 += d2;
            h21 += fi * d2;
            let d1 = t - p;
            g1 += fi * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < 1e-10 {
            break;
        }
    }
    let slope = -a;
    if slope > 0.0 && slope.is_finite() && b.is_finite() {
        (T::of(slope), T::of(-b))
    } else {
        (T::one(), T::zero())
    }
}
