//! Reference implementations used as test oracles. Each one is written
//! for clarity over speed and avoids sharing code paths with the library.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};
use std::sync::{Arc, OnceLock};

use depthcount::classifier::{rbf, ModelSlot, SvmModel};
use depthcount::geometry::HeightImage;
use depthcount::pipeline::{
    extract_head_samples, extract_track_samples, train_head_models, train_track_models, Models, PipelineConfig,
    TrainingOptions,
};
use depthcount::proposals::{HumanModelThresholds, Rect, SeedPoint};
use depthcount::synthgen::{random_scene, RandomSceneConfig};

// ---------------------------------------------------------------- background

/// Scalar per-pixel simulation of the three-cache background recurrence,
/// driven by explicit "next event" counters.
pub struct BackgroundOracle {
    n_c: u64,
    n_2c: u64,
    t: u64,
    next_short: u64,
    next_long: u64,
    pub b_i: Vec<u16>,
    pub b_c: Vec<u16>,
    pub b_2c: Vec<u16>,
}

impl BackgroundOracle {
    pub fn new(first: &[u16], n_c: u64, n_2c: u64) -> Self {
        Self {
            n_c,
            n_2c,
            t: 1,
            next_short: n_c,
            next_long: n_c + n_2c,
            b_i: first.to_vec(),
            b_c: first.to_vec(),
            b_2c: first.to_vec(),
        }
    }

    pub fn push(&mut self, frame: &[u16]) {
        self.t += 1;
        for p in 0..frame.len() {
            if frame[p] > 0 {
                self.b_c[p] = self.b_c[p].max(frame[p]);
                self.b_2c[p] = self.b_2c[p].max(frame[p]);
            }
        }
        let mut fired = false;
        if self.t == self.next_long {
            self.next_long += self.n_2c;
            self.b_c = self.b_2c.clone();
            self.b_i = self.b_2c.clone();
            fired = true;
        }
        if self.t == self.next_short {
            self.next_short += self.n_c;
            self.b_i = self.b_c.clone();
            fired = true;
        }
        if fired {
            self.b_2c = frame.to_vec();
        }
    }
}

// ----------------------------------------------------------------- proposals

pub fn block_means(h: &HeightImage, w_b: usize) -> (usize, usize, Vec<f64>) {
    let bw = h.width.div_ceil(w_b);
    let bh = h.height.div_ceil(w_b);
    let mut out = Vec::new();
    for by in 0..bh {
        for bx in 0..bw {
            let mut s = 0.0;
            let mut n = 0.0;
            for y in by * w_b..h.height.min((by + 1) * w_b) {
                for x in bx * w_b..h.width.min((bx + 1) * w_b) {
                    s += h.get(x, y) as f64;
                    n += 1.0;
                }
            }
            out.push(s / n);
        }
    }
    (bw, bh, out)
}

pub fn seeds_oracle(h: &HeightImage, w_b: usize, min_h: u16) -> Vec<SeedPoint> {
    let (bw, bh, m) = block_means(h, w_b);
    let mut seeds = Vec::new();
    for by in 0..bh as i64 {
        for bx in 0..bw as i64 {
            let v = m[(by as usize) * bw + bx as usize];
            let dominated = (-1..=1i64).any(|dy| {
                (-1..=1i64).any(|dx| {
                    let (nx, ny) = (bx + dx, by + dy);
                    (dx, dy) != (0, 0)
                        && nx >= 0
                        && ny >= 0
                        && nx < bw as i64
                        && ny < bh as i64
                        && m[ny as usize * bw + nx as usize] > v
                })
            });
            if v <= 0.0 || dominated {
                continue;
            }
            // highest cell of the block, first in row-major order
            let mut best: Option<SeedPoint> = None;
            for y in (by as usize) * w_b..h.height.min((by as usize + 1) * w_b) {
                for x in (bx as usize) * w_b..h.width.min((bx as usize + 1) * w_b) {
                    let val = h.get(x, y);
                    if best.is_none_or(|b| val > b.value) {
                        best = Some(SeedPoint { x, y, value: val });
                    }
                }
            }
            let b = best.unwrap();
            if b.value > 0 && b.value >= min_h {
                seeds.push(b);
            }
        }
    }
    seeds
}

/// Breadth-first growth processed one generation at a time over the whole
/// image. Candidates failing the box test are re-examined whenever reached.
pub fn expand_oracle(
    h: &HeightImage,
    seed: SeedPoint,
    delta_h: u16,
    w_max: usize,
    l_max: usize,
) -> (Rect, HashSet<(usize, usize)>) {
    let mut region: HashSet<(usize, usize)> = HashSet::from([(seed.x, seed.y)]);
    let mut value_rejected: HashSet<(usize, usize)> = HashSet::new();
    let (mut l, mut r, mut t, mut b) = (seed.x, seed.x, seed.y, seed.y);
    let mut queue = std::collections::VecDeque::from([(seed.x as i64, seed.y as i64)]);
    while let Some((u, v)) = queue.pop_front() {
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                let (x, y) = (u + dx, v + dy);
                if x < 0 || y < 0 || x >= h.width as i64 || y >= h.height as i64 {
                    continue;
                }
                let c = (x as usize, y as usize);
                if region.contains(&c) || value_rejected.contains(&c) {
                    continue;
                }
                let val = h.get(c.0, c.1) as i64;
                if (val - seed.value as i64).abs() > delta_h as i64 {
                    value_rejected.insert(c);
                    continue;
                }
                let (nl, nr, nt, nb) = (l.min(c.0), r.max(c.0), t.min(c.1), b.max(c.1));
                if nr - nl + 1 > w_max.max(1) || nb - nt + 1 > l_max.max(1) {
                    continue;
                }
                (l, r, t, b) = (nl, nr, nt, nb);
                region.insert(c);
                queue.push_back((x, y));
            }
        }
    }
    (Rect { l, r, t, b, seed }, region)
}

pub fn size_ok(rect: &Rect, th: &HumanModelThresholds) -> bool {
    let (len, wid) = (rect.length() as f64, rect.width() as f64);
    len >= th.head_l.0 as f64 / 2.0
        && len <= th.head_l.1 as f64
        && wid >= th.head_w.0 as f64 / 2.0
        && wid <= th.head_w.1 as f64
}

/// Connected components of the overlap graph by label propagation, best
/// member per component, sorted by `(t, l, b, r, seed.y, seed.x)`.
pub fn suppress_oracle(rects: &[Rect]) -> Vec<Rect> {
    let n = rects.len();
    let overlap = |a: &Rect, b: &Rect| !(a.r < b.l || b.r < a.l || a.b < b.t || b.b < a.t);
    let mut label: Vec<usize> = (0..n).collect();
    loop {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                if overlap(&rects[i], &rects[j]) && label[j] < label[i] {
                    label[i] = label[j];
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let key = |r: &Rect| {
        (
            std::cmp::Reverse(r.seed.value),
            std::cmp::Reverse(r.area()),
            (r.t, r.l, r.b, r.r, r.seed.y, r.seed.x),
        )
    };
    let mut groups: BTreeMap<usize, Rect> = BTreeMap::new();
    for i in 0..n {
        groups
            .entry(label[i])
            .and_modify(|w| {
                if key(&rects[i]) < key(w) {
                    *w = rects[i];
                }
            })
            .or_insert(rects[i]);
    }
    let mut out: Vec<Rect> = groups.into_values().collect();
    out.sort_by_key(|r| (r.t, r.l, r.b, r.r, r.seed.y, r.seed.x));
    out.dedup();
    out
}

// ------------------------------------------------------------------ features

/// Mirrored-pair sums over the full rectangle (each pair seen twice) divided
/// by the rectangle area.
pub fn symmetry_oracle(h: &HeightImage, r: &Rect) -> (f64, f64) {
    let (mut sh, mut sv) = (0.0, 0.0);
    for y in r.t..=r.b {
        for x in r.l..=r.r {
            let v = h.get(x, y) as f64;
            sh += (v - h.get(r.l + r.r - x, y) as f64).abs();
            sv += (v - h.get(x, r.t + r.b - y) as f64).abs();
        }
    }
    let p = r.area() as f64;
    (sh / p, sv / p)
}

pub fn zero_oracle(h: &HeightImage, r: &Rect) -> (f64, f64) {
    let mut n = 0usize;
    for y in r.t..=r.b {
        for x in r.l..=r.r {
            n += usize::from(h.get(x, y) == 0);
        }
    }
    (n as f64, n as f64 / r.area() as f64)
}

/// All-pairs nearest neighbor by squared 3D center distance, lowest index on
/// ties.
pub fn nrdf_oracle(rects: &[Rect], i: usize) -> [f64; 3] {
    let c = |r: &Rect| [(r.l + r.r) as f64 / 2.0, (r.t + r.b) as f64 / 2.0, r.seed.value as f64];
    let ci = c(&rects[i]);
    let mut best: Option<(f64, usize)> = None;
    for j in 0..rects.len() {
        if j == i {
            continue;
        }
        let cj = c(&rects[j]);
        let d = (ci[0] - cj[0]).powi(2) + (ci[1] - cj[1]).powi(2) + (ci[2] - cj[2]).powi(2);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, j));
        }
    }
    match best {
        None => [0.0; 3],
        Some((_, j)) => {
            let cj = c(&rects[j]);
            [ci[0] - cj[0], ci[1] - cj[1], ci[2] - cj[2]]
        }
    }
}

// ---------------------------------------------------------------- classifier

/// Decision value as an explicit kernel sum over the support set.
pub fn decision_oracle(m: &SvmModel<f64>, x: &[f64]) -> f64 {
    let z: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(i, v)| (v - m.standardizer.mean[i]) / m.standardizer.scale[i])
        .collect();
    m.support
        .iter()
        .map(|sv| sv.coef * rbf(m.gamma, &sv.x, &z))
        .sum::<f64>()
        + m.bias
}

// ------------------------------------------------------------------ pipeline

pub const TRAIN_SEED_BASE: u64 = 10_000;

/// Models for all four slots trained on `n` synthetic scenes alternating
/// clean and cluttered, with default hyperparameters.
pub fn train_synthetic_models(n: u64) -> Models<f64> {
    let cfg = PipelineConfig::unclassified();
    let opts = TrainingOptions::default();
    let specs: Vec<_> = (0..n)
        .map(|s| {
            let rc = if s % 2 == 0 {
                RandomSceneConfig::default()
            } else {
                RandomSceneConfig::cluttered()
            };
            random_scene(TRAIN_SEED_BASE + s, &rc)
        })
        .collect();
    let mut heads = Vec::new();
    for s in &specs {
        heads.extend(extract_head_samples::<f64>(&cfg, s, &opts).expect("head samples"));
    }
    let [he, hx] = train_head_models(
        &heads,
        [
            &ModelSlot::HeadEnter.default_params(),
            &ModelSlot::HeadExit.default_params(),
        ],
        &opts,
    )
    .expect("head models");
    let mut models = Models {
        head_enter: Some(Arc::new(he)),
        head_exit: Some(Arc::new(hx)),
        ..Models::default()
    };
    let with_heads = PipelineConfig {
        head_classifier: true,
        ..cfg
    };
    let mut tracks = Vec::new();
    for s in &specs {
        tracks.extend(extract_track_samples::<f64>(&with_heads, &models, s, &opts).expect("track samples"));
    }
    let [te, tx] = train_track_models(
        &tracks,
        [
            &ModelSlot::TrackEnter.default_params(),
            &ModelSlot::TrackExit.default_params(),
        ],
        &opts,
    )
    .expect("track models");
    models.track_enter = Some(Arc::new(te));
    models.track_exit = Some(Arc::new(tx));
    models
}

/// Shared models for one test binary.
pub fn shared_models() -> &'static Models<f64> {
    static MODELS: OnceLock<Models<f64>> = OnceLock::new();
    MODELS.get_or_init(|| train_synthetic_models(30))
}

pub fn full_config() -> PipelineConfig {
    PipelineConfig {
        head_classifier: true,
        track_classifier: true,
        ..PipelineConfig::unclassified()
    }
}
