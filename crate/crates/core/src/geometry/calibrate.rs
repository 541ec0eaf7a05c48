use super::mat3::{self, Mat3};
use super::RigidTransform;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Result of fitting the camera-to-world transform.
#[derive(Debug, Clone, Copy)]
pub struct Calibration<T> {
    pub transform: RigidTransform<T>,
    /// RMS residual (mm) of the unconstrained affine least-squares fit.
    pub rms_affine: T,
    /// RMS residual (mm) after projecting onto the nearest rigid transform.
    pub rms_rigid: T,
}

fn centroid<T: Real>(pts: &[[T; 3]]) -> [T; 3] {
    let n = T::of_usize(pts.len());
    let mut c = [T::zero(); 3];
    for p in pts {
        for k in 0..3 {
            c[k] = c[k] + p[k];
        }
    }
    c.map(|v| v / n)
}

fn rms<T: Real>(world: &[[T; 3]], cam: &[[T; 3]], rot: &Mat3<T>, t: &[T; 3]) -> T {
    let sum: T = world
        .iter()
        .zip(cam)
        .map(|(w, c)| {
            let p = mat3::mul_vec(rot, c);
            (0..3).map(|k| (w[k] - p[k] - t[k]).powi(2)).sum::<T>()
        })
        .sum();
    (sum / T::of_usize(world.len())).sqrt()
}

/// Least-squares fit of `world ~ T * cam` over `N > 4` correspondences.
///
/// The unconstrained affine solution is computed on centered coordinates,
/// its linear block is replaced by the nearest rotation, and the translation
/// is refit for that rotation.
pub fn calibrate_extrinsics<T: Real>(world: &[[T; 3]], cam: &[[T; 3]]) -> Result<Calibration<T>> {
    if world.len() != cam.len() {
        return Err(Error::InvalidParameter(format!(
            "{} world points vs {} camera points",
            world.len(),
            cam.len()
        )));
    }
    if world.len() <= 4 {
        return Err(Error::TooFewPoints(world.len()));
    }
    if world.iter().chain(cam).flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite calibration point".into()));
    }
    let cw = centroid(world);
    let cc = centroid(cam);

    // normal equations M * A = B with A = sum c c^T, B = sum w c^T
    let mut a = mat3::zero::<T>();
    let mut b = mat3::zero::<T>();
    for (w, c) in world.iter().zip(cam) {
        let dc = [c[0] - cc[0], c[1] - cc[1], c[2] - cc[2]];
        let dw = [w[0] - cw[0], w[1] - cw[1], w[2] - cw[2]];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] = a[i][j] + dc[i] * dc[j];
                b[i][j] = b[i][j] + dw[i] * dc[j];
            }
        }
    }
    let scale = (a[0][0] + a[1][1] + a[2][2]) / T::of(3.0);
    let det = mat3::det(&a);
    if !(scale > T::zero()) || det.abs() <= T::of(1e-12) * scale.powi(3) {
        return Err(Error::Degenerate("camera points are coplanar or collinear".into()));
    }
    let a_inv = mat3::inverse(&a).ok_or_else(|| Error::Degenerate("singular normal matrix".into()))?;
    let m = mat3::mul(&b, &a_inv);
    let m_c = mat3::mul_vec(&m, &cc);
    let t_affine = [cw[0] - m_c[0], cw[1] - m_c[1], cw[2] - m_c[2]];
    let rms_affine = rms(world, cam, &m, &t_affine);

    let rot =
        mat3::nearest_rotation(&m).ok_or_else(|| Error::Degenerate("fitted linear block is a reflection".into()))?;
    let r_c = mat3::mul_vec(&rot, &cc);
    let t = [cw[0] - r_c[0], cw[1] - r_c[1], cw[2] - r_c[2]];
    let rms_rigid = rms(world, cam, &rot, &t);

    Ok(Calibration {
        transform: RigidTransform::from_parts(rot, t),
        rms_affine,
        rms_rigid,
    })
}
