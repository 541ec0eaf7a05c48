//! Head-proposal and trajectory descriptors.
//!
//! Head feature layout (16):
//! `H_r, W_r, R, P, S_H, S_V, N_0, R_0, Psi_1..Psi_5, NRDF_x, NRDF_y, NRDF_z`.
//!
//! Trajectory feature layout (10):
//! `mean x, mean y, mean seed, var x, var y, var seed, updates, v_x, v_y, seed range`.

use crate::error::{Error, Result};
use crate::geometry::HeightImage;
use crate::proposals::{expand_seed, Rect};
use crate::scalar::Real;
use crate::tracker::TrackEntry;

pub const HEAD_FEATURE_DIM: usize = 16;
pub const TRAJECTORY_FEATURE_DIM: usize = 10;

/// Alternate seed-fill tolerances (mm) for the expansion-ratio feature.
pub const EXPANSION_DELTAS_MM: [u16; 5] = [200, 250, 300, 350, 400];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadFeature<T>(pub [T; HEAD_FEATURE_DIM]);

impl<T: Real> HeadFeature<T> {
    pub fn as_slice(&self) -> &[T] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryFeature<T>(pub [T; TRAJECTORY_FEATURE_DIM]);

impl<T: Real> TrajectoryFeature<T> {
    pub fn as_slice(&self) -> &[T] {
        &self.0
    }
}

/// Seed-fill settings shared with proposal generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpansionParams {
    pub deltas_mm: [u16; 5],
    pub w_max: usize,
    pub l_max: usize,
}

impl Default for ExpansionParams {
    fn default() -> Self {
        Self {
            deltas_mm: EXPANSION_DELTAS_MM,
            w_max: 25,
            l_max: 25,
        }
    }
}

/// `(H_r, W_r, R = W_r / H_r, P = H_r * W_r)`.
pub fn shape_feature<T: Real>(rect: &Rect) -> [T; 4] {
    let h = T::of_usize(rect.length());
    let w = T::of_usize(rect.width());
    [h, w, w / h, h * w]
}

/// Mirror differences across the vertical (`S_H`) and horizontal (`S_V`)
/// midlines, each mirrored pair counted once and scaled by `2 / (H_r W_r)`.
pub fn symmetry_feature<T: Real>(height: &HeightImage, rect: &Rect) -> [T; 2] {
    let (h_r, w_r) = (rect.length(), rect.width());
    let mut s_h = 0u64;
    for y in rect.t..=rect.b {
        for x in rect.l..rect.l + w_r / 2 {
            s_h += u64::from(height.get(x, y).abs_diff(height.get(rect.l + rect.r - x, y)));
        }
    }
    let mut s_v = 0u64;
    for x in rect.l..=rect.r {
        for y in rect.t..rect.t + h_r / 2 {
            s_v += u64::from(height.get(x, y).abs_diff(height.get(x, rect.t + rect.b - y)));
        }
    }
    let norm = T::of(2.0) / T::of_usize(h_r * w_r);
    [T::of(s_h as f64) * norm, T::of(s_v as f64) * norm]
}

/// `(N_0, R_0)`: zero-cell count inside the rectangle and its rate.
pub fn zero_pixel_feature<T: Real>(height: &HeightImage, rect: &Rect) -> [T; 2] {
    let zeros = (rect.t..=rect.b)
        .map(|y| (rect.l..=rect.r).filter(|&x| height.get(x, y) == 0).count())
        .sum::<usize>();
    [T::of_usize(zeros), T::of_usize(zeros) / T::of_usize(rect.area())]
}

/// Area of `base` over the area of the seed fill re-run at each alternate
/// tolerance.
pub fn expansion_ratio_feature<T: Real>(height: &HeightImage, base: &Rect, params: &ExpansionParams) -> [T; 5] {
    let base_area = T::of_usize(base.area());
    params.deltas_mm.map(|d| {
        let r = expand_seed(height, base.seed, d, params.w_max, params.l_max);
        base_area / T::of_usize(r.area())
    })
}

/// 3D center: rectangle center in cells plus the seed height (mm).
pub fn center3<T: Real>(rect: &Rect) -> [T; 3] {
    let (x, y) = rect.center::<T>();
    [x, y, T::of(rect.seed.value as f64)]
}

/// Vector from the nearest other rectangle's 3D center to this one's.
/// Zero when the set has a single element. Ties go to the lower index.
pub fn nrdf<T: Real>(rects: &[Rect], index: usize) -> [T; 3] {
    let c = center3::<T>(&rects[index]);
    let mut best: Option<(T, [T; 3])> = None;
    for (j, r) in rects.iter().enumerate() {
        if j == index {
            continue;
        }
        let o = center3::<T>(r);
        let d2 = (0..3).map(|k| (c[k] - o[k]).powi(2)).sum::<T>();
        if best.is_none_or(|(bd, _)| d2 < bd) {
            best = Some((d2, o));
        }
    }
    match best {
        Some((_, o)) => [c[0] - o[0], c[1] - o[1], c[2] - o[2]],
        None => [T::zero(); 3],
    }
}

pub fn head_feature<T: Real>(
    height: &HeightImage,
    rects: &[Rect],
    index: usize,
    params: &ExpansionParams,
) -> HeadFeature<T> {
    let rect = &rects[index];
    let mut v = [T::zero(); HEAD_FEATURE_DIM];
    v[0..4].copy_from_slice(&shape_feature(rect));
    v[4..6].copy_from_slice(&symmetry_feature(height, rect));
    v[6..8].copy_from_slice(&zero_pixel_feature(height, rect));
    v[8..13].copy_from_slice(&expansion_ratio_feature(height, rect, params));
    v[13..16].copy_from_slice(&nrdf(rects, index));
    HeadFeature(v)
}

/// Summary statistics of a track's node history (population variances,
/// mean per-frame displacement).
pub fn trajectory_feature<T: Real>(history: &[TrackEntry<T>]) -> Result<TrajectoryFeature<T>> {
    if history.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let n = T::of_usize(history.len());
    let mean = |f: &dyn Fn(&TrackEntry<T>) -> T| history.iter().map(f).sum::<T>() / n;
    let (mx, my, ms) = (mean(&|e| e.x), mean(&|e| e.y), mean(&|e| e.seed));
    let var = |f: &dyn Fn(&TrackEntry<T>) -> T, m: T| history.iter().map(|e| (f(e) - m).powi(2)).sum::<T>() / n;
    let (vx, vy, vs) = (var(&|e| e.x, mx), var(&|e| e.y, my), var(&|e| e.seed, ms));

    let (mut velx, mut vely) = (T::zero(), T::zero());
    if history.len() > 1 {
        for w in history.windows(2) {
            let dt = T::of((w[1].frame - w[0].frame) as f64);
            velx = velx + (w[1].x - w[0].x) / dt;
            vely = vely + (w[1].y - w[0].y) / dt;
        }
        let pairs = T::of_usize(history.len() - 1);
        velx = velx / pairs;
        vely = vely / pairs;
    }
    let smax = history.iter().map(|e| e.seed).fold(T::neg_infinity(), T::max);
    let smin = history.iter().map(|e| e.seed).fold(T::infinity(), T::min);
    Ok(TrajectoryFeature([mx, my, ms, vx, vy, vs, n, velx, vely, smax - smin]))
}
