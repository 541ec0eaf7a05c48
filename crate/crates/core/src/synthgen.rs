//! Synthetic overhead depth scenes with exact ground truth.
//!
//! Actors are simple solids ray-cast through a pinhole camera:
//! a person is a sphere head on a neck cylinder on a wider body cylinder,
//! a bag is a sphere-capped cylinder that stays where it was dropped, and a
//! noise blob is a floating sphere that lives a few frames. Sensor noise is
//! additive Gaussian depth error plus Bernoulli dropout to zero.
//!
//! Scene text format (`#` starts a comment):
//!
//! ```text
//! name demo
//! width 320
//! height 240
//! fps 25
//! fx 285
//! fy 285
//! cx 160
//! cy 120
//! floor_depth 3200
//! pitch_deg 10
//! cell_mm 10
//! extent_mm 3000
//! sigma 0
//! dropout 0
//! frames 120
//! seed 7
//! actor person height=1750 radius=100 start=-300,-1000 end=-300,1200 speed=3 entry=5
//! actor bag height=1100 radius=120 start=800,0 entry=10
//! actor noise height=1300 radius=80 start=0,200 entry=30 life=3
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::frameio::{
    write_labels, write_sequence, Category, DepthFrame, Extrinsics, GroundTruthLabel, SequenceManifest,
};
use crate::geometry::{CameraIntrinsics, RigidTransform};
use crate::tracker::Direction;

pub const MIN_PERSON_HEIGHT_MM: f64 = 900.0;
pub const MAX_PERSON_HEIGHT_MM: f64 = 2100.0;

/// Crown-to-shoulder drop and body radius, in head radii.
const SHOULDER_DROP: f64 = 2.8;
const BODY_RADIUS: f64 = 2.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActorKind {
    Person,
    Bag,
    Noise,
}

impl ActorKind {
    fn name(self) -> &'static str {
        match self {
            ActorKind::Person => "person",
            ActorKind::Bag => "bag",
            ActorKind::Noise => "noise",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Actor {
    pub kind: ActorKind,
    pub height_mm: f64,
    pub head_radius_mm: f64,
    /// Ground-plane path in world mm. Bags and noise blobs stay at `start`.
    pub start: [f64; 2],
    pub end: [f64; 2],
    /// Cells per frame.
    pub speed: f64,
    pub entry: u64,
    /// Frames a noise blob stays visible.
    pub life: u64,
}

impl Actor {
    pub fn person(height_mm: f64, head_radius_mm: f64, start: [f64; 2], end: [f64; 2], speed: f64, entry: u64) -> Self {
        Self {
            kind: ActorKind::Person,
            height_mm,
            head_radius_mm,
            start,
            end,
            speed,
            entry,
            life: 0,
        }
    }

    pub fn bag(height_mm: f64, radius_mm: f64, at: [f64; 2], entry: u64) -> Self {
        Self {
            kind: ActorKind::Bag,
            height_mm,
            head_radius_mm: radius_mm,
            start: at,
            end: at,
            speed: 0.0,
            entry,
            life: 0,
        }
    }

    pub fn noise(height_mm: f64, radius_mm: f64, at: [f64; 2], entry: u64, life: u64) -> Self {
        Self {
            kind: ActorKind::Noise,
            height_mm,
            head_radius_mm: radius_mm,
            start: at,
            end: at,
            speed: 0.0,
            entry,
            life,
        }
    }

    fn path_len(&self) -> f64 {
        (self.end[0] - self.start[0]).hypot(self.end[1] - self.start[1])
    }

    /// Frames needed to walk the whole path.
    fn walk_frames(&self, cell_mm: f64) -> u64 {
        (self.path_len() / (self.speed * cell_mm)).ceil() as u64
    }

    /// Ground position at `frame`, or `None` when not in the scene.
    pub fn position(&self, frame: u64, cell_mm: f64) -> Option<[f64; 2]> {
        if frame < self.entry {
            return None;
        }
        let k = frame - self.entry;
        match self.kind {
            ActorKind::Bag => Some(self.start),
            ActorKind::Noise => (k < self.life).then_some(self.start),
            ActorKind::Person => {
                let len = self.path_len();
                let s = k as f64 * self.speed * cell_mm;
                if s > len {
                    return None;
                }
                let f = s / len;
                Some([
                    self.start[0] + f * (self.end[0] - self.start[0]),
                    self.start[1] + f * (self.end[1] - self.start[1]),
                ])
            }
        }
    }

    /// Last frame this actor is visible, if bounded.
    pub fn last_frame(&self, cell_mm: f64) -> Option<u64> {
        match self.kind {
            ActorKind::Bag => None,
            ActorKind::Noise => Some(self.entry + self.life.saturating_sub(1)),
            ActorKind::Person => Some(self.entry + (self.path_len() / (self.speed * cell_mm)).floor() as u64),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub intrinsics: CameraIntrinsics<f64>,
    /// Camera height above the floor (mm).
    pub floor_depth_mm: f64,
    pub pitch_deg: f64,
    pub cell_mm: f64,
    /// Side of the square ground region centered under the camera (mm).
    pub extent_mm: f64,
    pub sigma_mm: f64,
    pub dropout: f64,
    pub frames: u64,
    pub seed: u64,
    pub actors: Vec<Actor>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            name: "scene".into(),
            width: 320,
            height: 240,
            fps: 25.0,
            intrinsics: CameraIntrinsics {
                fx: 285.0,
                fy: 285.0,
                cx: 160.0,
                cy: 120.0,
            },
            floor_depth_mm: 3200.0,
            pitch_deg: 10.0,
            cell_mm: 10.0,
            extent_mm: 3000.0,
            sigma_mm: 0.0,
            dropout: 0.0,
            frames: 100,
            seed: 0,
            actors: Vec::new(),
        }
    }
}

fn scene_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Scene(format!("line {line}: {msg}"))
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| scene_err(line, format!("{key}: bad value {v:?}")))
}

fn parse_point(line: usize, key: &str, v: &str) -> Result<[f64; 2]> {
    let (a, b) = v
        .split_once(',')
        .ok_or_else(|| scene_err(line, format!("{key}: expected x,y")))?;
    Ok([parse_num(line, key, a)?, parse_num(line, key, b)?])
}

impl SceneSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = SceneSpec::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut toks = content.split_whitespace();
            let key = toks.next().unwrap_or_default();
            if key == "actor" {
                s.actors.push(parse_actor(line, toks)?);
                continue;
            }
            let val = toks
                .next()
                .ok_or_else(|| scene_err(line, format!("{key}: missing value")))?;
            if toks.next().is_some() {
                return Err(scene_err(line, format!("{key}: trailing tokens")));
            }
            match key {
                "name" => s.name = val.to_string(),
                "width" => s.width = parse_num(line, key, val)?,
                "height" => s.height = parse_num(line, key, val)?,
                "fps" => s.fps = parse_num(line, key, val)?,
                "fx" => s.intrinsics.fx = parse_num(line, key, val)?,
                "fy" => s.intrinsics.fy = parse_num(line, key, val)?,
                "cx" => s.intrinsics.cx = parse_num(line, key, val)?,
                "cy" => s.intrinsics.cy = parse_num(line, key, val)?,
                "floor_depth" => s.floor_depth_mm = parse_num(line, key, val)?,
                "pitch_deg" => s.pitch_deg = parse_num(line, key, val)?,
                "cell_mm" => s.cell_mm = parse_num(line, key, val)?,
                "extent_mm" => s.extent_mm = parse_num(line, key, val)?,
                "sigma" => s.sigma_mm = parse_num(line, key, val)?,
                "dropout" => s.dropout = parse_num(line, key, val)?,
                "frames" => s.frames = parse_num(line, key, val)?,
                "seed" => s.seed = parse_num(line, key, val)?,
                _ => return Err(scene_err(line, format!("unknown key {key:?}"))),
            }
        }
        s.validate()?;
        Ok(s)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let i = &self.intrinsics;
        let _ = writeln!(out, "name {}", self.name);
        let _ = writeln!(out, "width {}\nheight {}\nfps {}", self.width, self.height, self.fps);
        let _ = writeln!(out, "fx {}\nfy {}\ncx {}\ncy {}", i.fx, i.fy, i.cx, i.cy);
        let _ = writeln!(out, "floor_depth {}\npitch_deg {}", self.floor_depth_mm, self.pitch_deg);
        let _ = writeln!(out, "cell_mm {}\nextent_mm {}", self.cell_mm, self.extent_mm);
        let _ = writeln!(out, "sigma {}\ndropout {}", self.sigma_mm, self.dropout);
        let _ = writeln!(out, "frames {}\nseed {}", self.frames, self.seed);
        for a in &self.actors {
            let _ = write!(
                out,
                "actor {} height={} radius={} start={},{}",
                a.kind.name(),
                a.height_mm,
                a.head_radius_mm,
                a.start[0],
                a.start[1]
            );
            match a.kind {
                ActorKind::Person => {
                    let _ = write!(out, " end={},{} speed={}", a.end[0], a.end[1], a.speed);
                }
                ActorKind::Noise => {
                    let _ = write!(out, " life={}", a.life);
                }
                ActorKind::Bag => {}
            }
            let _ = writeln!(out, " entry={}", a.entry);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Scene(m));
        if self.width == 0 || self.height == 0 || self.frames == 0 {
            return bad("width, height and frames must be positive".into());
        }
        if !(self.fps > 0.0 && self.cell_mm > 0.0 && self.extent_mm > 0.0 && self.floor_depth_mm > 0.0) {
            return bad("fps, cell_mm, extent_mm and floor_depth must be positive".into());
        }
        CameraIntrinsics::new(
            self.intrinsics.fx,
            self.intrinsics.fy,
            self.intrinsics.cx,
            self.intrinsics.cy,
        )?;
        if !(self.sigma_mm >= 0.0) {
            return bad(format!("sigma must be non-negative, got {}", self.sigma_mm));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if !self.pitch_deg.is_finite() || self.pitch_deg.abs() >= 80.0 {
            return bad(format!("pitch out of range: {}", self.pitch_deg));
        }
        for (i, a) in self.actors.iter().enumerate() {
            if !(a.head_radius_mm > 0.0 && a.height_mm > 2.0 * a.head_radius_mm) {
                return bad(format!("actor {i}: height must exceed twice the radius"));
            }
            match a.kind {
                ActorKind::Person => {
                    if !(MIN_PERSON_HEIGHT_MM..=MAX_PERSON_HEIGHT_MM).contains(&a.height_mm) {
                        return bad(format!("actor {i}: person height {} outside [900, 2100]", a.height_mm));
                    }
                    if !(a.speed > 0.0 && a.speed.is_finite()) {
                        return bad(format!("actor {i}: speed must be positive"));
                    }
                    if a.end[1] == a.start[1] {
                        return bad(format!("actor {i}: path must move along Y"));
                    }
                }
                ActorKind::Noise if a.life == 0 => return bad(format!("actor {i}: noise life must be positive")),
                _ => {}
            }
            if !self.path_touches_extent(a) {
                return bad(format!("actor {i}: path lies entirely outside the ground extent"));
            }
        }
        Ok(())
    }

    fn path_touches_extent(&self, a: &Actor) -> bool {
        let half = self.extent_mm / 2.0;
        let inside = |p: [f64; 2]| p[0].abs() <= half && p[1].abs() <= half;
        let steps = (a.path_len() / self.cell_mm).ceil().max(1.0) as usize;
        (0..=steps).any(|k| {
            let f = k as f64 / steps as f64;
            inside([
                a.start[0] + f * (a.end[0] - a.start[0]),
                a.start[1] + f * (a.end[1] - a.start[1]),
            ])
        })
    }

    /// Camera-to-world transform.
    pub fn extrinsics(&self) -> RigidTransform<f64> {
        RigidTransform::overhead(self.pitch_deg.to_radians(), self.floor_depth_mm)
    }

    pub fn manifest(&self) -> SequenceManifest {
        let mut m = SequenceManifest::new(self.fps, self.width, self.height, self.intrinsics);
        m.extrinsics = Some(Extrinsics::Transform(self.extrinsics()));
        m
    }

    pub fn direction_of(&self, a: &Actor) -> Option<Direction> {
        match a.kind {
            ActorKind::Person if a.end[1] > a.start[1] => Some(Direction::Enter),
            ActorKind::Person => Some(Direction::Exit),
            _ => None,
        }
    }

    /// Noisy when any sensor noise is present; crowded when two persons are
    /// ever in the scene together.
    pub fn category(&self) -> Category {
        let noisy = self.sigma_mm > 0.0 || self.dropout > 0.0;
        let persons: Vec<&Actor> = self.actors.iter().filter(|a| a.kind == ActorKind::Person).collect();
        let crowded =
            (0..self.frames).any(|f| persons.iter().filter(|a| a.position(f, self.cell_mm).is_some()).count() > 1);
        Category::new(noisy, crowded)
    }
}

fn parse_actor<'a>(line: usize, mut toks: impl Iterator<Item = &'a str>) -> Result<Actor> {
    let kind = match toks.next() {
        Some("person") => ActorKind::Person,
        Some("bag") => ActorKind::Bag,
        Some("noise") => ActorKind::Noise,
        other => return Err(scene_err(line, format!("unknown actor kind {other:?}"))),
    };
    let mut a = Actor {
        kind,
        height_mm: 0.0,
        head_radius_mm: 100.0,
        start: [0.0; 2],
        end: [f64::NAN; 2],
        speed: 0.0,
        entry: 0,
        life: 3,
    };
    let mut seen_height = false;
    for tok in toks {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| scene_err(line, format!("expected key=value, got {tok:?}")))?;
        match k {
            "height" => {
                a.height_mm = parse_num(line, k, v)?;
                seen_height = true;
            }
            "radius" => a.head_radius_mm = parse_num(line, k, v)?,
            "start" => a.start = parse_point(line, k, v)?,
            "end" => a.end = parse_point(line, k, v)?,
            "speed" => a.speed = parse_num(line, k, v)?,
            "entry" => a.entry = parse_num(line, k, v)?,
            "life" => a.life = parse_num(line, k, v)?,
            _ => return Err(scene_err(line, format!("unknown actor field {k:?}"))),
        }
    }
    if !seen_height {
        return Err(scene_err(line, "actor needs height="));
    }
    if kind == ActorKind::Person {
        if a.end[0].is_nan() {
            return Err(scene_err(line, "person needs end="));
        }
    } else {
        a.end = a.start;
        a.speed = 0.0;
    }
    if kind != ActorKind::Noise {
        a.life = 0;
    }
    Ok(a)
}

/// Per-frame ground-truth head sample (world mm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadSample {
    pub frame: u64,
    pub x: f64,
    pub y: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadTrack {
    pub actor: usize,
    pub direction: Direction,
    pub samples: Vec<HeadSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub entering: u32,
    pub exiting: u32,
    pub category: Category,
    pub heads: Vec<HeadTrack>,
}

impl GroundTruth {
    pub fn label(&self, video_id: &str) -> GroundTruthLabel {
        GroundTruthLabel {
            video_id: video_id.to_string(),
            category: self.category,
            entering: self.entering,
            exiting: self.exiting,
        }
    }

    /// Ground-truth head position of every person present at `frame`.
    pub fn heads_at(&self, frame: u64) -> impl Iterator<Item = (&HeadTrack, &HeadSample)> {
        self.heads.iter().filter_map(move |t| {
            let i = t.samples.binary_search_by_key(&frame, |s| s.frame).ok()?;
            Some((t, &t.samples[i]))
        })
    }
}

pub fn ground_truth(spec: &SceneSpec) -> GroundTruth {
    let mut gt = GroundTruth {
        entering: 0,
        exiting: 0,
        category: spec.category(),
        heads: Vec::new(),
    };
    for (i, a) in spec.actors.iter().enumerate() {
        let Some(direction) = spec.direction_of(a) else {
            continue;
        };
        match direction {
            Direction::Enter => gt.entering += 1,
            Direction::Exit => gt.exiting += 1,
        }
        let samples = (0..spec.frames)
            .filter_map(|f| {
                a.position(f, spec.cell_mm).map(|p| HeadSample {
                    frame: f,
                    x: p[0],
                    y: p[1],
                    height: a.height_mm,
                })
            })
            .collect();
        gt.heads.push(HeadTrack {
            actor: i,
            direction,
            samples,
        });
    }
    gt
}

#[derive(Debug, Clone, Copy)]
enum Prim {
    Sphere {
        c: [f64; 3],
        r: f64,
    },
    /// Vertical cylinder with flat caps.
    Cylinder {
        c: [f64; 2],
        r: f64,
        z0: f64,
        z1: f64,
    },
}

impl Prim {
    /// Smallest positive ray parameter of a hit.
    #[inline]
    fn hit(&self, o: &[f64; 3], d: &[f64; 3]) -> Option<f64> {
        match *self {
            Prim::Sphere { c, r } => {
                let oc = [o[0] - c[0], o[1] - c[1], o[2] - c[2]];
                let a = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                let b = oc[0] * d[0] + oc[1] * d[1] + oc[2] * d[2];
                let cc = oc[0] * oc[0] + oc[1] * oc[1] + oc[2] * oc[2] - r * r;
                let disc = b * b - a * cc;
                if disc < 0.0 {
                    return None;
                }
                let t = (-b - disc.sqrt()) / a;
                (t > 0.0).then_some(t)
            }
            Prim::Cylinder { c, r, z0, z1 } => {
                let (ox, oy) = (o[0] - c[0], o[1] - c[1]);
                let mut best: Option<f64> = None;
                let mut take = |t: f64| {
                    if t > 0.0 && best.is_none_or(|b| t < b) {
                        best = Some(t);
                    }
                };
                let a = d[0] * d[0] + d[1] * d[1];
                if a > 0.0 {
                    let b = ox * d[0] + oy * d[1];
                    let cc = ox * ox + oy * oy - r * r;
                    let disc = b * b - a * cc;
                    if disc >= 0.0 {
                        let t = (-b - disc.sqrt()) / a;
                        let z = o[2] + t * d[2];
                        if (z0..=z1).contains(&z) {
                            take(t);
                        }
                    }
                }
                if d[2] != 0.0 {
                    for zc in [z0, z1] {
                        let t = (zc - o[2]) / d[2];
                        let (x, y) = (ox + t * d[0], oy + t * d[1]);
                        if x * x + y * y <= r * r {
                            take(t);
                        }
                    }
                }
                best
            }
        }
    }
}

/// Solids making up an actor at ground position `p`, plus its bounding box
/// `(min, max)`.
fn actor_solids(a: &Actor, p: [f64; 2]) -> (Vec<Prim>, [f64; 3], [f64; 3]) {
    let (h, r) = (a.height_mm, a.head_radius_mm);
    let head = Prim::Sphere {
        c: [p[0], p[1], h - r],
        r,
    };
    match a.kind {
        ActorKind::Person => {
            let shoulder = (h - SHOULDER_DROP * r).max(0.0);
            let body_r = BODY_RADIUS * r;
            let prims = vec![
                head,
                Prim::Cylinder {
                    c: p,
                    r,
                    z0: shoulder,
                    z1: h - r,
                },
                Prim::Cylinder {
                    c: p,
                    r: body_r,
                    z0: 0.0,
                    z1: shoulder,
                },
            ];
            (
                prims,
                [p[0] - body_r, p[1] - body_r, 0.0],
                [p[0] + body_r, p[1] + body_r, h],
            )
        }
        ActorKind::Bag => {
            let prims = vec![
                head,
                Prim::Cylinder {
                    c: p,
                    r,
                    z0: 0.0,
                    z1: h - r,
                },
            ];
            (prims, [p[0] - r, p[1] - r, 0.0], [p[0] + r, p[1] + r, h])
        }
        ActorKind::Noise => (vec![head], [p[0] - r, p[1] - r, h - 2.0 * r], [p[0] + r, p[1] + r, h]),
    }
}

/// Random-access frame renderer for one scene.
pub struct Renderer {
    spec: SceneSpec,
    origin: [f64; 3],
    /// Per-pixel world ray directions, scaled so the parameter is camera depth.
    rays: Vec<[f64; 3]>,
    floor: Vec<f64>,
    world_to_cam: RigidTransform<f64>,
}

impl Renderer {
    pub fn new(spec: &SceneSpec) -> Result<Self> {
        spec.validate()?;
        let t = spec.extrinsics();
        let rot = t.rotation();
        let origin = t.translation();
        let intr = &spec.intrinsics;
        let mut rays = Vec::with_capacity(spec.width * spec.height);
        let mut floor = Vec::with_capacity(spec.width * spec.height);
        for v in 0..spec.height {
            for u in 0..spec.width {
                let dc = intr.unproject(u as f64, v as f64, 1.0);
                let d = [0, 1, 2].map(|i| rot[i][0] * dc[0] + rot[i][1] * dc[1] + rot[i][2] * dc[2]);
                floor.push(if d[2] < 0.0 { -origin[2] / d[2] } else { f64::INFINITY });
                rays.push(d);
            }
        }
        Ok(Self {
            spec: spec.clone(),
            origin,
            rays,
            floor,
            world_to_cam: t.inverse(),
        })
    }

    pub fn spec(&self) -> &SceneSpec {
        &self.spec
    }

    /// Pixel bounding box `(u0, v0, u1, v1)` (inclusive) of a world box.
    fn pixel_box(&self, lo: [f64; 3], hi: [f64; 3]) -> Option<(usize, usize, usize, usize)> {
        let (w, h) = (self.spec.width as f64, self.spec.height as f64);
        let intr = &self.spec.intrinsics;
        let (mut u0, mut v0, mut u1, mut v1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for k in 0..8 {
            let p = [
                if k & 1 == 0 { lo[0] } else { hi[0] },
                if k & 2 == 0 { lo[1] } else { hi[1] },
                if k & 4 == 0 { lo[2] } else { hi[2] },
            ];
            let c = self.world_to_cam.apply(p);
            if c[2] <= 1.0 {
                return Some((0, 0, self.spec.width - 1, self.spec.height - 1));
            }
            let q = intr.project(c);
            u0 = u0.min(q[0]);
            u1 = u1.max(q[0]);
            v0 = v0.min(q[1]);
            v1 = v1.max(q[1]);
        }
        if u1 < 0.0 || v1 < 0.0 || u0 > w - 1.0 || v0 > h - 1.0 {
            return None;
        }
        let clamp = |x: f64, m: f64| x.clamp(0.0, m - 1.0) as usize;
        Some((
            clamp(u0.floor(), w),
            clamp(v0.floor(), h),
            clamp(u1.ceil(), w),
            clamp(v1.ceil(), h),
        ))
    }

    /// Noise-free camera depth (mm, unrounded) per pixel.
    pub fn render_exact(&self, frame: u64) -> Vec<f64> {
        let mut depth = self.floor.clone();
        for a in &self.spec.actors {
            let Some(p) = a.position(frame, self.spec.cell_mm) else {
                continue;
            };
            let (prims, lo, hi) = actor_solids(a, p);
            let Some((u0, v0, u1, v1)) = self.pixel_box(lo, hi) else {
                continue;
            };
            for v in v0..=v1 {
                for u in u0..=u1 {
                    let i = v * self.spec.width + u;
                    let d = &self.rays[i];
                    for prim in &prims {
                        if let Some(t) = prim.hit(&self.origin, d) {
                            if t < depth[i] {
                                depth[i] = t;
                            }
                        }
                    }
                }
            }
        }
        depth
    }

    /// Frame `frame` with sensor noise. Each frame has its own random
    /// stream, so frames can be rendered in any order.
    pub fn render(&self, frame: u64) -> DepthFrame {
        let exact = self.render_exact(frame);
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(frame);
        let normal = (self.spec.sigma_mm > 0.0).then(|| Normal::new(0.0, self.spec.sigma_mm).expect("valid sigma"));
        let dropout = self.spec.dropout;
        let data = exact
            .into_iter()
            .map(|t| {
                if !t.is_finite() {
                    return 0;
                }
                let noisy = t + normal.as_ref().map_or(0.0, |n| n.sample(&mut rng));
                if dropout > 0.0 && rng.gen::<f64>() < dropout {
                    return 0;
                }
                noisy.round().clamp(1.0, u16::MAX as f64) as u16
            })
            .collect();
        DepthFrame {
            width: self.spec.width,
            height: self.spec.height,
            data,
            index: frame,
        }
    }

    pub fn frames(&self) -> impl Iterator<Item = DepthFrame> + '_ {
        (0..self.spec.frames).map(|f| self.render(f))
    }
}

/// Rendered scene: frames, manifest and exact ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub spec: SceneSpec,
    pub manifest: SequenceManifest,
    pub frames: Vec<DepthFrame>,
    pub truth: GroundTruth,
}

pub fn generate(spec: &SceneSpec) -> Result<SyntheticScene> {
    let r = Renderer::new(spec)?;
    Ok(SyntheticScene {
        spec: spec.clone(),
        manifest: spec.manifest(),
        frames: r.frames().collect(),
        truth: ground_truth(spec),
    })
}

pub const LABELS_FILE: &str = "labels.csv";
pub const TRAJECTORIES_FILE: &str = "trajectories.csv";

/// Writes the sequence plus `labels.csv` and `trajectories.csv`
/// (`actor,frame,x_mm,y_mm,height_mm`).
pub fn write_scene(dir: impl AsRef<Path>, scene: &SyntheticScene) -> Result<()> {
    let dir = dir.as_ref();
    write_sequence(dir, scene.manifest.clone(), &scene.frames)?;
    let path = dir.join(LABELS_FILE);
    let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_labels(f, &[scene.truth.label(&scene.spec.name)])?;
    let mut text = String::from("actor,frame,x_mm,y_mm,height_mm\n");
    for t in &scene.truth.heads {
        for s in &t.samples {
            let _ = writeln!(text, "{},{},{},{},{}", t.actor, s.frame, s.x, s.y, s.height);
        }
    }
    let path = dir.join(TRAJECTORIES_FILE);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Knobs for [`random_scene`].
#[derive(Debug, Clone, PartialEq)]
pub struct RandomSceneConfig {
    pub persons_per_direction: (u32, u32),
    pub bags: (u32, u32),
    pub noise_blobs: (u32, u32),
    pub sigma_mm: f64,
    pub dropout: f64,
    pub height_mm: (f64, f64),
    pub head_radius_mm: (f64, f64),
    pub speed: (f64, f64),
    /// Lane center offsets along X for entering / exiting walkers.
    pub enter_lane_x: f64,
    pub exit_lane_x: f64,
    pub path_y: (f64, f64),
    /// Minimum gap between consecutive walkers in one lane (mm).
    pub min_gap_mm: f64,
    pub warmup_frames: u64,
    pub tail_frames: u64,
}

impl Default for RandomSceneConfig {
    fn default() -> Self {
        Self {
            persons_per_direction: (1, 3),
            bags: (0, 0),
            noise_blobs: (0, 0),
            sigma_mm: 0.0,
            dropout: 0.0,
            height_mm: (1500.0, 1950.0),
            head_radius_mm: (85.0, 110.0),
            speed: (2.0, 5.0),
            enter_lane_x: -300.0,
            exit_lane_x: 300.0,
            path_y: (-1100.0, 1300.0),
            min_gap_mm: 900.0,
            warmup_frames: 3,
            tail_frames: 12,
        }
    }
}

impl RandomSceneConfig {
    pub fn cluttered() -> Self {
        Self {
            bags: (1, 2),
            noise_blobs: (0, 3),
            sigma_mm: 20.0,
            dropout: 0.05,
            ..Self::default()
        }
    }
}

/// Deterministic random scene: walkers in two lanes (entering toward +Y,
/// exiting toward -Y) spaced so same-lane walkers never close within
/// `min_gap_mm`, optional bags dropped beside the lanes and short-lived
/// noise blobs.
pub fn random_scene(seed: u64, cfg: &RandomSceneConfig) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed);
    let mut spec = SceneSpec {
        name: format!("synth_{seed:06}"),
        sigma_mm: cfg.sigma_mm,
        dropout: cfg.dropout,
        seed,
        ..SceneSpec::default()
    };
    let cell = spec.cell_mm;
    let mut end_frame = cfg.warmup_frames;
    for dir in [Direction::Enter, Direction::Exit] {
        let n = rng.gen_range(cfg.persons_per_direction.0..=cfg.persons_per_direction.1);
        let lane = match dir {
            Direction::Enter => cfg.enter_lane_x,
            Direction::Exit => cfg.exit_lane_x,
        };
        let (y0, y1) = match dir {
            Direction::Enter => cfg.path_y,
            Direction::Exit => (cfg.path_y.1, cfg.path_y.0),
        };
        // (entry, speed in mm/frame, path length) of the previous walker
        let mut prev: Option<(f64, f64, f64)> = None;
        let first_entry = cfg.warmup_frames + rng.gen_range(0..10);
        for _ in 0..n {
            let v = rng.gen_range(cfg.speed.0..=cfg.speed.1);
            let x0 = lane + rng.gen_range(-50.0..=50.0);
            let x1 = lane + rng.gen_range(-50.0..=50.0);
            let len = (x1 - x0).hypot(y1 - y0);
            let vmm = v * cell;
            let entry = match prev {
                None => first_entry as f64,
                Some((e1, v1, l1)) => {
                    // gap at the follower's entry and at the leader's exit
                    let a = e1 + cfg.min_gap_mm / v1;
                    let b = e1 + l1 / v1 - (l1 - cfg.min_gap_mm) / vmm;
                    a.max(b).ceil() + rng.gen_range(0..8) as f64
                }
            };
            prev = Some((entry, vmm, len));
            let actor = Actor::person(
                rng.gen_range(cfg.height_mm.0..=cfg.height_mm.1).round(),
                rng.gen_range(cfg.head_radius_mm.0..=cfg.head_radius_mm.1).round(),
                [x0.round(), y0],
                [x1.round(), y1],
                v,
                entry as u64,
            );
            end_frame = end_frame.max(actor.entry + actor.walk_frames(cell));
            spec.actors.push(actor);
        }
    }
    let active = end_frame.max(cfg.warmup_frames + 1);
    for _ in 0..rng.gen_range(cfg.bags.0..=cfg.bags.1) {
        let side = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let at = [side * rng.gen_range(750.0..=950.0), rng.gen_range(-300.0..=600.0)];
        let entry = rng.gen_range(cfg.warmup_frames..=(active / 2).max(cfg.warmup_frames));
        spec.actors.push(Actor::bag(
            rng.gen_range(950.0..=1200.0_f64).round(),
            rng.gen_range(95.0..=130.0_f64).round(),
            at,
            entry,
        ));
    }
    for _ in 0..rng.gen_range(cfg.noise_blobs.0..=cfg.noise_blobs.1) {
        let at = [
            rng.gen_range(-700.0..=700.0_f64).round(),
            rng.gen_range(-300.0..=700.0_f64).round(),
        ];
        spec.actors.push(Actor::noise(
            rng.gen_range(1000.0..=1800.0_f64).round(),
            rng.gen_range(60.0..=110.0_f64).round(),
            at,
            rng.gen_range(cfg.warmup_frames..active),
            rng.gen_range(1..=3),
        ));
    }
    spec.frames = end_frame + cfg.tail_frames;
    spec
}
