//! Candidate head rectangles on the height image.
//!
//! Down-sample by block means, take 8-neighborhood local maxima of the block
//! grid, map each back to its block's highest height cell, grow a bounded
//! seed fill around it, filter by head size, and keep one rectangle per group
//! of overlapping rectangles.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::geometry::HeightImage;
use crate::scalar::Real;

/// Human body-part size bounds. Lengths/widths in height-image cells,
/// heights in mm. Shoulder and lower-body bounds are carried but unused by
/// the head filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HumanModelThresholds {
    pub head_l: (u32, u32),
    pub head_w: (u32, u32),
    pub head_h_mm: (u32, u32),
    pub shoulder_l: (u32, u32),
    pub shoulder_w: (u32, u32),
    pub shoulder_h_mm: (u32, u32),
    pub lower_body_h_mm: (u32, u32),
}

impl Default for HumanModelThresholds {
    fn default() -> Self {
        Self {
            head_l: (10, 25),
            head_w: (10, 25),
            head_h_mm: (150, 300),
            shoulder_l: (25, 60),
            shoulder_w: (10, 20),
            shoulder_h_mm: (100, 300),
            lower_body_h_mm: (600, 1700),
        }
    }
}

impl HumanModelThresholds {
    pub fn validate(&self) -> Result<()> {
        let pairs = [
            ("head L", self.head_l),
            ("head W", self.head_w),
            ("head H", self.head_h_mm),
            ("shoulder L", self.shoulder_l),
            ("shoulder W", self.shoulder_w),
            ("shoulder H", self.shoulder_h_mm),
            ("lower body H", self.lower_body_h_mm),
        ];
        for (name, (lo, hi)) in pairs {
            if lo == 0 || lo >= hi {
                return Err(Error::InvalidParameter(format!(
                    "{name} bounds must satisfy 0 < min < max"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SeedPoint {
    pub x: usize,
    pub y: usize,
    pub value: u16,
}

/// Inclusive cell bounds: columns `l..=r`, rows `t..=b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub l: usize,
    pub r: usize,
    pub t: usize,
    pub b: usize,
    pub seed: SeedPoint,
}

impl Rect {
    pub fn width(&self) -> usize {
        self.r - self.l + 1
    }

    pub fn length(&self) -> usize {
        self.b - self.t + 1
    }

    pub fn area(&self) -> usize {
        self.width() * self.length()
    }

    /// Center in cell coordinates.
    pub fn center<T: Real>(&self) -> (T, T) {
        let two = T::of(2.0);
        (T::of_usize(self.l + self.r) / two, T::of_usize(self.t + self.b) / two)
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.l..=self.r).contains(&x) && (self.t..=self.b).contains(&y)
    }

    pub fn overlaps(&self, other: &Rect) -> bool {
        self.l <= other.r && other.l <= self.r && self.t <= other.b && other.t <= self.b
    }

    fn sort_key(&self) -> (usize, usize, usize, usize, usize, usize) {
        (self.t, self.l, self.b, self.r, self.seed.y, self.seed.x)
    }
}

/// Block-mean grid produced by [`downsample`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

impl<T: Copy> Grid<T> {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }
}

/// Means of disjoint `w_b x w_b` blocks; ragged border blocks average over
/// the cells they actually cover.
pub fn downsample<T: Real>(height: &HeightImage, w_b: usize) -> Result<Grid<T>> {
    if w_b == 0 || w_b > height.width || w_b > height.height {
        return Err(Error::InvalidParameter(format!(
            "block size {w_b} invalid for {}x{} image",
            height.width, height.height
        )));
    }
    let bw = height.width.div_ceil(w_b);
    let bh = height.height.div_ceil(w_b);
    let mut sums = vec![0u64; bw * bh];
    for y in 0..height.height {
        let row = &height.data[y * height.width..(y + 1) * height.width];
        let base = (y / w_b) * bw;
        for (x, &v) in row.iter().enumerate() {
            sums[base + x / w_b] += u64::from(v);
        }
    }
    let mut data = Vec::with_capacity(bw * bh);
    for by in 0..bh {
        let rows = (height.height - by * w_b).min(w_b);
        for bx in 0..bw {
            let cols = (height.width - bx * w_b).min(w_b);
            data.push(T::of(sums[by * bw + bx] as f64) / T::of_usize(rows * cols));
        }
    }
    Ok(Grid {
        width: bw,
        height: bh,
        data,
    })
}

/// Seeds at block-grid cells that are positive and no smaller than any of
/// their 8 neighbors. Each seed is the highest cell of its block (first in
/// row-major order on ties); seeds lower than `min_person_height` are dropped.
pub fn local_maxima<T: Real>(
    blocks: &Grid<T>,
    height: &HeightImage,
    w_b: usize,
    min_person_height: u16,
) -> Vec<SeedPoint> {
    let mut seeds = Vec::new();
    for by in 0..blocks.height {
        for bx in 0..blocks.width {
            let v = blocks.get(bx, by);
            if !(v > T::zero()) {
                continue;
            }
            let mut is_max = true;
            'nb: for ny in by.saturating_sub(1)..=(by + 1).min(blocks.height - 1) {
                for nx in bx.saturating_sub(1)..=(bx + 1).min(blocks.width - 1) {
                    if (nx, ny) != (bx, by) && blocks.get(nx, ny) > v {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if !is_max {
                continue;
            }
            let mut best = SeedPoint { x: 0, y: 0, value: 0 };
            for y in by * w_b..((by + 1) * w_b).min(height.height) {
                for x in bx * w_b..((bx + 1) * w_b).min(height.width) {
                    let h = height.get(x, y);
                    if h > best.value {
                        best = SeedPoint { x, y, value: h };
                    }
                }
            }
            if best.value > 0 && best.value >= min_person_height {
                seeds.push(best);
            }
        }
    }
    seeds
}

/// Bounded 8-connected seed fill. A cell joins when its height is within
/// `delta_h` of the seed and the running bounding box stays within
/// `w_max` columns by `l_max` rows. Returns the accepted region's box.
pub fn expand_seed(height: &HeightImage, seed: SeedPoint, delta_h: u16, w_max: usize, l_max: usize) -> Rect {
    expand_region(height, seed, delta_h, w_max, l_max).0
}

/// As [`expand_seed`], also returning the accepted cells in visit order.
pub fn expand_region(
    height: &HeightImage,
    seed: SeedPoint,
    delta_h: u16,
    w_max: usize,
    l_max: usize,
) -> (Rect, Vec<(usize, usize)>) {
    let (w_max, l_max) = (w_max.max(1), l_max.max(1));
    // every accepted cell lies in this window
    let x0 = seed.x.saturating_sub(w_max - 1);
    let y0 = seed.y.saturating_sub(l_max - 1);
    let x1 = (seed.x + w_max - 1).min(height.width - 1);
    let y1 = (seed.y + l_max - 1).min(height.height - 1);
    let ww = x1 - x0 + 1;
    let mut visited = vec![false; ww * (y1 - y0 + 1)];
    let idx = |x: usize, y: usize| (y - y0) * ww + (x - x0);

    let mut rect = Rect {
        l: seed.x,
        r: seed.x,
        t: seed.y,
        b: seed.y,
        seed,
    };
    let mut accepted = vec![(seed.x, seed.y)];
    let mut queue = VecDeque::from([(seed.x, seed.y)]);
    visited[idx(seed.x, seed.y)] = true;
    while let Some((u, v)) = queue.pop_front() {
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (Some(x), Some(y)) = (u.checked_add_signed(dx), v.checked_add_signed(dy)) else {
                    continue;
                };
                if x < x0 || x > x1 || y < y0 || y > y1 || visited[idx(x, y)] {
                    continue;
                }
                // rejections are final: the value test is fixed and the box only grows
                visited[idx(x, y)] = true;
                if height.get(x, y).abs_diff(seed.value) > delta_h {
                    continue;
                }
                let (l, r) = (rect.l.min(x), rect.r.max(x));
                let (t, b) = (rect.t.min(y), rect.b.max(y));
                if r - l + 1 > w_max || b - t + 1 > l_max {
                    continue;
                }
                rect = Rect { l, r, t, b, seed };
                accepted.push((x, y));
                queue.push_back((x, y));
            }
        }
    }
    (rect, accepted)
}

/// Keeps rectangles with `L_min/2 <= L <= L_max` and `W_min/2 <= W <= W_max`.
pub fn filter_by_size(rects: &[Rect], thresholds: &HumanModelThresholds) -> Vec<Rect> {
    let (l_min, l_max) = thresholds.head_l;
    let (w_min, w_max) = thresholds.head_w;
    rects
        .iter()
        .filter(|r| {
            let (l, w) = (r.length() as u32, r.width() as u32);
            2 * l >= l_min && l <= l_max && 2 * w >= w_min && w <= w_max
        })
        .copied()
        .collect()
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Preference among overlapping rectangles: highest seed, then larger area,
/// then smaller `(t, l, b, r)`.
fn better(a: &Rect, b: &Rect) -> bool {
    use std::cmp::Ordering::*;
    match a.seed.value.cmp(&b.seed.value) {
        Greater => return true,
        Less => return false,
        Equal => {}
    }
    match a.area().cmp(&b.area()) {
        Greater => return true,
        Less => return false,
        Equal => {}
    }
    a.sort_key() < b.sort_key()
}

/// Groups rectangles by transitive overlap and keeps the best of each group.
/// Output is sorted by `(t, l)`.
pub fn suppress_overlaps(rects: &[Rect]) -> Vec<Rect> {
    let n = rects.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if rects[i].overlaps(&rects[j]) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut winner: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        match winner[root] {
            Some(w) if !better(&rects[i], &rects[w]) => {}
            _ => winner[root] = Some(i),
        }
    }
    let mut out: Vec<Rect> = winner.into_iter().flatten().map(|i| rects[i]).collect();
    out.sort_by_key(Rect::sort_key);
    out.dedup();
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProposalParams {
    pub w_b: usize,
    /// Seed-fill tolerance in mm.
    pub delta_h_mm: u16,
    pub min_person_height_mm: u16,
    pub thresholds: HumanModelThresholds,
}

impl Default for ProposalParams {
    fn default() -> Self {
        Self {
            w_b: 4,
            delta_h_mm: 150,
            min_person_height_mm: 900,
            thresholds: HumanModelThresholds::default(),
        }
    }
}

/// Full chain from height image to the refined, non-overlapping set.
pub fn generate(height: &HeightImage, params: &ProposalParams) -> Result<Vec<Rect>> {
    let blocks: Grid<f64> = downsample(height, params.w_b)?;
    let seeds = local_maxima(&blocks, height, params.w_b, params.min_person_height_mm);
    let (w_max, l_max) = (params.thresholds.head_w.1 as usize, params.thresholds.head_l.1 as usize);
    let expanded: Vec<Rect> = seeds
        .iter()
        .map(|&s| expand_seed(height, s, params.delta_h_mm, w_max, l_max))
        .collect();
    let sized = filter_by_size(&expanded, &params.thresholds);
    Ok(suppress_overlaps(&sized))
}
