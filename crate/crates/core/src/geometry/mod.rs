//! Camera model, extrinsic calibration, and ground-plane height images.
//!
//! Camera frame: X right, Y down the image, Z along the optical axis (depth).
//! World frame: origin on the floor below the camera, Z up, all units mm.

mod calibrate;
pub(crate) mod mat3;

pub use calibrate::{calibrate_extrinsics, Calibration};

use crate::error::{Error, Result};
use crate::frameio::DepthFrame;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics<T> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
}

impl<T: Real> CameraIntrinsics<T> {
    pub fn new(fx: T, fy: T, cx: T, cy: T) -> Result<Self> {
        if !(fx > T::zero() && fy > T::zero()) || !(fx.is_finite() && fy.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "focal lengths must be positive, got fx={fx} fy={fy}"
            )));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::InvalidParameter("principal point must be finite".into()));
        }
        Ok(Self { fx, fy, cx, cy })
    }

    /// Pinhole projection of a camera-frame point to `(u, v, depth)`.
    pub fn project(&self, p: [T; 3]) -> [T; 3] {
        [p[0] / p[2] * self.fx + self.cx, p[1] / p[2] * self.fy + self.cy, p[2]]
    }

    /// Camera-frame point for pixel `(u, v)` at depth `d`.
    #[inline]
    pub fn unproject(&self, u: T, v: T, d: T) -> [T; 3] {
        [(u - self.cx) / self.fx * d, (v - self.cy) / self.fy * d, d]
    }
}

/// Homogeneous camera-to-world transform with an orthonormal rotation block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform<T> {
    m: [[T; 4]; 4],
}

impl<T: Real> RigidTransform<T> {
    pub fn identity() -> Self {
        let mut m = [[T::zero(); 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = T::one();
        }
        Self { m }
    }

    fn tolerance() -> T {
        T::of(1e-6).max(T::epsilon() * T::of(100.0))
    }

    /// Validates a row-major 4x4 matrix.
    pub fn from_matrix(m: [[T; 4]; 4]) -> Result<Self> {
        let (z, o) = (T::zero(), T::one());
        if m[3] != [z, z, z, o] {
            return Err(Error::InvalidParameter(
                "last row of transform must be (0,0,0,1)".into(),
            ));
        }
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("transform has non-finite entries".into()));
        }
        let t = Self { m };
        let r = t.rotation();
        let rtr = mat3::mul(&mat3::transpose(&r), &r);
        let tol = Self::tolerance();
        for (i, row) in rtr.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let e = if i == j { o } else { z };
                if (v - e).abs() > tol {
                    return Err(Error::InvalidParameter("rotation block is not orthonormal".into()));
                }
            }
        }
        if (mat3::det(&r) - o).abs() > tol {
            return Err(Error::InvalidParameter(
                "rotation block must have determinant +1".into(),
            ));
        }
        Ok(t)
    }

    /// Builds from a rotation and translation; the rotation is not re-checked.
    pub fn from_parts(rotation: [[T; 3]; 3], translation: [T; 3]) -> Self {
        let mut m = Self::identity().m;
        for i in 0..3 {
            m[i][..3].copy_from_slice(&rotation[i]);
            m[i][3] = translation[i];
        }
        Self { m }
    }

    /// Camera pitched by `pitch` radians about world X, mounted `height` above
    /// the world origin. At zero pitch the optical axis points straight down
    /// and image-down maps to world -Y; positive pitch tilts the view toward +Y.
    pub fn overhead(pitch: T, height: T) -> Self {
        let (s, c) = pitch.sin_cos();
        let (z, o) = (T::zero(), T::one());
        // columns: camera X -> (1,0,0), camera Y -> (0,-c,-s), camera Z -> (0,s,-c)
        let r = [[o, z, z], [z, -c, s], [z, -s, -c]];
        Self::from_parts(r, [z, z, height])
    }

    pub fn matrix(&self) -> &[[T; 4]; 4] {
        &self.m
    }

    pub fn rotation(&self) -> [[T; 3]; 3] {
        let mut r = [[T::zero(); 3]; 3];
        for i in 0..3 {
            r[i].copy_from_slice(&self.m[i][..3]);
        }
        r
    }

    pub fn translation(&self) -> [T; 3] {
        [self.m[0][3], self.m[1][3], self.m[2][3]]
    }

    #[inline]
    pub fn apply(&self, p: [T; 3]) -> [T; 3] {
        let m = &self.m;
        [
            m[0][0] * p[0] + m[0][1] * p[1] + m[0][2] * p[2] + m[0][3],
            m[1][0] * p[0] + m[1][1] * p[1] + m[1][2] * p[2] + m[1][3],
            m[2][0] * p[0] + m[2][1] * p[1] + m[2][2] * p[2] + m[2][3],
        ]
    }

    pub fn inverse(&self) -> Self {
        let rt = mat3::transpose(&self.rotation());
        let t = mat3::mul_vec(&rt, &self.translation());
        Self::from_parts(rt, [-t[0], -t[1], -t[2]])
    }

    /// `self * other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        let mut m = [[T::zero(); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = (0..4).map(|k| self.m[i][k] * other.m[k][j]).sum();
            }
        }
        Self { m }
    }

    pub fn frobenius_distance(&self, other: &Self) -> T {
        self.m
            .iter()
            .flatten()
            .zip(other.m.iter().flatten())
            .map(|(a, b)| (*a - *b) * (*a - *b))
            .sum::<T>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordFrame {
    Camera,
    World,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<T> {
    pub points: Vec<[T; 3]>,
    pub frame_index: u64,
    pub frame: CoordFrame,
}

/// Back-projects every nonzero foreground pixel into the camera frame.
pub fn backproject<T: Real>(intrinsics: &CameraIntrinsics<T>, foreground: &DepthFrame) -> PointCloud<T> {
    let mut points = Vec::new();
    for (v, row) in foreground.data.chunks_exact(foreground.width).enumerate() {
        let vf = T::of_usize(v);
        for (u, &d) in row.iter().enumerate() {
            if d != 0 {
                points.push(intrinsics.unproject(T::of_usize(u), vf, T::of(d as f64)));
            }
        }
    }
    PointCloud {
        points,
        frame_index: foreground.index,
        frame: CoordFrame::Camera,
    }
}

pub fn transform_points<T: Real>(transform: &RigidTransform<T>, cloud: &PointCloud<T>) -> PointCloud<T> {
    debug_assert_eq!(cloud.frame, CoordFrame::Camera);
    PointCloud {
        points: cloud.points.iter().map(|&p| transform.apply(p)).collect(),
        frame_index: cloud.frame_index,
        frame: CoordFrame::World,
    }
}

/// Ground-plane raster geometry: cell `(col, row)` covers world
/// `[ox + col*cell, ox + (col+1)*cell) x [oy + row*cell, oy + (row+1)*cell)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    pub origin: [T; 2],
    pub cell_mm: T,
    pub cols: usize,
    pub rows: usize,
    pub height_cap_mm: T,
}

impl<T: Real> GridSpec<T> {
    pub fn new(origin: [T; 2], cell_mm: T, cols: usize, rows: usize, height_cap_mm: T) -> Result<Self> {
        if !(cell_mm > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "cell size must be positive, got {cell_mm}"
            )));
        }
        if cols == 0 || rows == 0 {
            return Err(Error::InvalidParameter("grid must have at least one cell".into()));
        }
        if !(height_cap_mm > T::zero()) || height_cap_mm > T::of(u16::MAX as f64) {
            return Err(Error::InvalidParameter(format!(
                "height cap out of range: {height_cap_mm}"
            )));
        }
        Ok(Self {
            origin,
            cell_mm,
            cols,
            rows,
            height_cap_mm,
        })
    }

    /// Grid covering `extent` (mm, x by y) starting at `origin`.
    pub fn from_extent(origin: [T; 2], extent: [T; 2], cell_mm: T, height_cap_mm: T) -> Result<Self> {
        if !(cell_mm > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "cell size must be positive, got {cell_mm}"
            )));
        }
        let cols = (extent[0] / cell_mm).ceil().to_usize().unwrap_or(0);
        let rows = (extent[1] / cell_mm).ceil().to_usize().unwrap_or(0);
        Self::new(origin, cell_mm, cols, rows, height_cap_mm)
    }

    /// 3 m x 3 m centered below the camera, 10 mm cells, 2200 mm cap.
    pub fn door_default() -> Self {
        Self::from_extent([T::of(-1500.0); 2], [T::of(3000.0); 2], T::of(10.0), T::of(2200.0))
            .expect("valid default grid")
    }

    #[inline]
    pub fn cell_of(&self, x: T, y: T) -> Option<(usize, usize)> {
        let c = ((x - self.origin[0]) / self.cell_mm).floor();
        let r = ((y - self.origin[1]) / self.cell_mm).floor();
        if c < T::zero() || r < T::zero() {
            return None;
        }
        let (c, r) = (c.to_usize()?, r.to_usize()?);
        (c < self.cols && r < self.rows).then_some((c, r))
    }

    /// World coordinates of a (possibly fractional) cell position's center.
    pub fn world_of(&self, col: T, row: T) -> [T; 2] {
        let half = T::of(0.5);
        [
            self.origin[0] + (col + half) * self.cell_mm,
            self.origin[1] + (row + half) * self.cell_mm,
        ]
    }
}

/// Maximum height above the floor per ground cell, in whole millimeters.
/// Zero marks an empty cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeightImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u16>,
}

impl HeightImage {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<u16>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                what: "height image",
                expected: (width, height),
                got: (data.len(), 1),
            });
        }
        Ok(Self { width, height, data })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u16) {
        self.data[y * self.width + x] = v;
    }
}

/// Projects a world-frame cloud onto the ground grid keeping the highest
/// point per cell. Points below the floor or above the cap are dropped, as
/// are points outside the grid extent.
pub fn rasterize_height<T: Real>(cloud: &PointCloud<T>, grid: &GridSpec<T>) -> Result<HeightImage> {
    if !(grid.cell_mm > T::zero()) {
        return Err(Error::InvalidParameter("cell size must be positive".into()));
    }
    let mut img = HeightImage::zeros(grid.cols, grid.rows);
    for p in &cloud.points {
        let z = p[2];
        if !(z >= T::zero()) || z > grid.height_cap_mm {
            continue;
        }
        if let Some((c, r)) = grid.cell_of(p[0], p[1]) {
            let h = z.round().to_u16().unwrap_or(0);
            let cell = &mut img.data[r * grid.cols + c];
            if h > *cell {
                *cell = h;
            }
        }
    }
    Ok(img)
}
