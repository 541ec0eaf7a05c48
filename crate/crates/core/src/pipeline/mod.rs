//! Per-frame orchestration, stream processing, evaluation and benchmarking.

mod config;
mod eval;
mod training;

use std::sync::Arc;
use std::time::Instant;

use crate::background::BackgroundModel;
use crate::classifier::SvmModel;
use crate::error::{Error, Result};
use crate::features::{head_feature, ExpansionParams, HeadFeature};
use crate::frameio::{load_model, DepthFrame};
use crate::geometry::{
    backproject, rasterize_height, transform_points, CameraIntrinsics, GridSpec, HeightImage, RigidTransform,
};
use crate::proposals::{self, Rect};
use crate::scalar::Real;
use crate::tracker::{Candidate, CountResult, RetirementEvent, TrackGate, Tracker, TrackerParams};

pub use config::{ModelPaths, PipelineConfig};
pub use eval::{evaluate, parse_predictions, write_predictions, DeltaStat, EvalReport, VideoCounts};
pub use training::{
    extract_head_samples, extract_track_samples, head_training_sets, parse_feature_csv, track_training_sets,
    train_head_models, train_track_models, write_feature_csv, LabeledSample, TrainingOptions,
};

/// The four classifier slots, loaded and shared.
#[derive(Debug, Clone)]
pub struct Models<T> {
    pub head_enter: Option<Arc<SvmModel<T>>>,
    pub head_exit: Option<Arc<SvmModel<T>>>,
    pub track_enter: Option<Arc<SvmModel<T>>>,
    pub track_exit: Option<Arc<SvmModel<T>>>,
}

impl<T> Default for Models<T> {
    fn default() -> Self {
        Self {
            head_enter: None,
            head_exit: None,
            track_enter: None,
            track_exit: None,
        }
    }
}

impl<T: Real> Models<T> {
    pub fn load(paths: &ModelPaths) -> Result<Self> {
        let load = |p: &Option<std::path::PathBuf>| -> Result<Option<Arc<SvmModel<T>>>> {
            p.as_ref().map(|p| load_model(p).map(Arc::new)).transpose()
        };
        Ok(Self {
            head_enter: load(&paths.head_enter)?,
            head_exit: load(&paths.head_exit)?,
            track_enter: load(&paths.track_enter)?,
            track_exit: load(&paths.track_exit)?,
        })
    }
}

pub const STAGE_NAMES: [&str; 5] = ["background", "reproject", "proposals", "classify", "tracking"];
const STAGES: usize = STAGE_NAMES.len();

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageStats {
    pub mean_ms: f64,
    pub p95_ms: f64,
}

impl StageStats {
    fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self {
                mean_ms: 0.0,
                p95_ms: 0.0,
            };
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let rank = ((0.95 * s.len() as f64).ceil() as usize).clamp(1, s.len());
        Self {
            mean_ms: s.iter().sum::<f64>() / s.len() as f64,
            p95_ms: s[rank - 1],
        }
    }
}

/// Per-stage wall-clock statistics in milliseconds per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyReport {
    pub frames: usize,
    pub stages: [StageStats; STAGES],
    pub total: StageStats,
}

impl LatencyReport {
    pub fn stage(&self, name: &str) -> Option<StageStats> {
        STAGE_NAMES.iter().position(|n| *n == name).map(|i| self.stages[i])
    }

    pub fn render(&self) -> String {
        let mut out = format!("{:<12} {:>10} {:>10}\n", "stage", "mean_ms", "p95_ms");
        for (name, s) in STAGE_NAMES.iter().zip(&self.stages) {
            out += &format!("{:<12} {:>10.3} {:>10.3}\n", name, s.mean_ms, s.p95_ms);
        }
        out += &format!(
            "{:<12} {:>10.3} {:>10.3}\n",
            "total", self.total.mean_ms, self.total.p95_ms
        );
        out += &format!("frames {}\n", self.frames);
        out
    }
}

#[derive(Debug, Clone, Default)]
struct Timings {
    stages: [Vec<f64>; STAGES],
    total: Vec<f64>,
}

impl Timings {
    fn report(&self) -> LatencyReport {
        LatencyReport {
            frames: self.total.len(),
            stages: std::array::from_fn(|i| StageStats::from_samples(&self.stages[i])),
            total: StageStats::from_samples(&self.total),
        }
    }

    fn extend(&mut self, other: &Timings, skip: usize) {
        for i in 0..STAGES {
            self.stages[i].extend(other.stages[i].iter().skip(skip));
        }
        self.total.extend(other.total.iter().skip(skip));
    }
}

/// A proposal with its feature vector and head probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredProposal<T> {
    pub rect: Rect,
    pub feature: HeadFeature<T>,
    /// `None` when the head classifier stage is disabled.
    pub prob: Option<T>,
    pub kept: bool,
}

#[derive(Debug, Clone)]
pub struct FrameOutput<T> {
    pub index: u64,
    pub proposals: Vec<ScoredProposal<T>>,
    pub events: Vec<RetirementEvent<T>>,
}

/// Streaming pipeline state for one sequence.
pub struct Pipeline<T: Real> {
    config: PipelineConfig,
    intrinsics: CameraIntrinsics<T>,
    extrinsics: RigidTransform<T>,
    grid: GridSpec<T>,
    expansion: ExpansionParams,
    head_models: Vec<Arc<SvmModel<T>>>,
    background: Option<BackgroundModel>,
    tracker: Tracker<T>,
    last_index: Option<u64>,
    last_height: Option<HeightImage>,
    timings: Timings,
}

fn cast<T: Real>(v: f64) -> T {
    T::of(v)
}

impl<T: Real> Pipeline<T> {
    pub fn new(
        config: &PipelineConfig,
        models: &Models<T>,
        intrinsics: &CameraIntrinsics<f64>,
        extrinsics: &RigidTransform<f64>,
    ) -> Result<Self> {
        let head_models: Vec<_> = if config.head_classifier {
            [&models.head_enter, &models.head_exit]
                .into_iter()
                .flatten()
                .cloned()
                .collect()
        } else {
            Vec::new()
        };
        if config.head_classifier && head_models.is_empty() {
            return Err(Error::Config {
                key: "model.head_enter".into(),
                msg: "head classifier enabled but no head model loaded".into(),
            });
        }
        let gate = if config.track_classifier {
            TrackGate::Models {
                enter: models.track_enter.clone(),
                exit: models.track_exit.clone(),
            }
        } else {
            TrackGate::AcceptAll
        };
        let tp = TrackerParams {
            delta_m: cast(config.tracker.delta_m),
            q: config.tracker.q,
            enter_sign: config.tracker.enter_sign,
        };
        let g = &config.grid;
        let m = extrinsics.matrix();
        let th = &config.proposals.thresholds;
        Ok(Self {
            config: config.clone(),
            intrinsics: CameraIntrinsics::new(
                cast(intrinsics.fx),
                cast(intrinsics.fy),
                cast(intrinsics.cx),
                cast(intrinsics.cy),
            )?,
            extrinsics: RigidTransform::from_matrix(m.map(|row| row.map(cast)))?,
            grid: GridSpec::new(
                [cast(g.origin[0]), cast(g.origin[1])],
                cast(g.cell_mm),
                g.cols,
                g.rows,
                cast(g.height_cap_mm),
            )?,
            expansion: ExpansionParams {
                w_max: th.head_w.1 as usize,
                l_max: th.head_l.1 as usize,
                ..ExpansionParams::default()
            },
            head_models,
            background: None,
            tracker: Tracker::new(tp, gate)?,
            last_index: None,
            last_height: None,
            timings: Timings::default(),
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn counts(&self) -> CountResult {
        self.tracker.counts()
    }

    /// Height image of the most recent frame.
    pub fn last_height(&self) -> Option<&HeightImage> {
        self.last_height.as_ref()
    }

    pub fn latency(&self) -> LatencyReport {
        self.timings.report()
    }

    /// Highest head probability over the loaded head models.
    fn head_prob(&self, feature: &HeadFeature<T>) -> Result<T> {
        let mut best = T::zero();
        for m in &self.head_models {
            best = best.max(m.predict_prob(feature.as_slice())?);
        }
        Ok(best)
    }

    pub fn process_frame(&mut self, frame: &DepthFrame) -> Result<FrameOutput<T>> {
        self.process_inner(frame).map_err(|e| e.at_frame(frame.index))
    }

    fn process_inner(&mut self, frame: &DepthFrame) -> Result<FrameOutput<T>> {
        if let Some(last) = self.last_index {
            if frame.index <= last {
                return Err(Error::FrameOrder { last, got: frame.index });
            }
        }
        let mut lap = [0.0; STAGES];
        let t_start = Instant::now();
        let mut t = t_start;
        let mut tick = |slot: usize, t: &mut Instant| {
            let now = Instant::now();
            lap[slot] = (now - *t).as_secs_f64() * 1e3;
            *t = now;
        };

        let foreground = match &mut self.background {
            None => {
                self.background = Some(BackgroundModel::init(frame, self.config.background)?);
                DepthFrame::filled(frame.width, frame.height, 0, frame.index)
            }
            Some(bg) => {
                bg.update(frame)?;
                bg.extract_foreground(frame)?
            }
        };
        tick(0, &mut t);

        let cloud = transform_points(&self.extrinsics, &backproject(&self.intrinsics, &foreground));
        let height = rasterize_height(&cloud, &self.grid)?;
        tick(1, &mut t);

        let rects = proposals::generate(&height, &self.config.proposals)?;
        tick(2, &mut t);

        let threshold = T::of(self.config.head_threshold);
        let mut scored = Vec::with_capacity(rects.len());
        for i in 0..rects.len() {
            let feature = head_feature(&height, &rects, i, &self.expansion);
            let (prob, kept) = if self.head_models.is_empty() {
                (None, true)
            } else {
                let p = self.head_prob(&feature)?;
                (Some(p), p >= threshold)
            };
            scored.push(ScoredProposal {
                rect: rects[i],
                feature,
                prob,
                kept,
            });
        }
        tick(3, &mut t);

        let candidates: Vec<Candidate<T>> = scored
            .iter()
            .filter(|p| p.kept)
            .map(|p| {
                let (x, y) = p.rect.center::<T>();
                Candidate {
                    x,
                    y,
                    seed: T::of(p.rect.seed.value as f64),
                    prob: p.prob.unwrap_or_else(T::one),
                }
            })
            .collect();
        let events = self.tracker.step(frame.index, &candidates)?;
        tick(4, &mut t);

        for (i, v) in lap.iter().enumerate() {
            self.timings.stages[i].push(*v);
        }
        self.timings.total.push((Instant::now() - t_start).as_secs_f64() * 1e3);
        self.last_index = Some(frame.index);
        self.last_height = Some(height);
        Ok(FrameOutput {
            index: frame.index,
            proposals: scored,
            events,
        })
    }

    /// Force-retires every live track at the last processed frame.
    pub fn finish(&mut self) -> Result<Vec<RetirementEvent<T>>> {
        let frame = self.last_index.unwrap_or(0);
        self.tracker.finish(frame).map_err(|e| e.at_frame(frame))
    }
}

/// Per-frame summary kept by [`process_stream`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameSummary {
    pub index: u64,
    pub proposals: usize,
    pub heads: usize,
}

#[derive(Debug, Clone)]
pub struct StreamResult<T> {
    pub frames: Vec<FrameSummary>,
    pub events: Vec<RetirementEvent<T>>,
    pub counts: CountResult,
    pub latency: LatencyReport,
}

impl<T> StreamResult<T> {
    /// Event log with header, one retirement per line.
    pub fn event_log(&self) -> String {
        let mut out = String::from(crate::tracker::EVENT_LOG_HEADER);
        out.push('\n');
        for e in &self.events {
            out += &e.log_line();
            out.push('\n');
        }
        out
    }
}

/// Runs a whole sequence and force-retires the remaining tracks at its end.
pub fn process_stream<T: Real, I>(
    config: &PipelineConfig,
    models: &Models<T>,
    intrinsics: &CameraIntrinsics<f64>,
    extrinsics: &RigidTransform<f64>,
    frames: I,
) -> Result<StreamResult<T>>
where
    I: IntoIterator<Item = Result<DepthFrame>>,
{
    let mut p = Pipeline::new(config, models, intrinsics, extrinsics)?;
    let mut summaries = Vec::new();
    let mut events = Vec::new();
    for frame in frames {
        let out = p.process_frame(&frame?)?;
        summaries.push(FrameSummary {
            index: out.index,
            proposals: out.proposals.len(),
            heads: out.proposals.iter().filter(|s| s.kept).count(),
        });
        events.extend(out.events);
    }
    events.extend(p.finish()?);
    Ok(StreamResult {
        frames: summaries,
        events,
        counts: p.counts(),
        latency: p.latency(),
    })
}

/// Processes `frames` `reps` times with a fresh pipeline each time; the
/// first `config.bench_warmup` frames of every repetition are excluded.
pub fn bench<T: Real>(
    config: &PipelineConfig,
    models: &Models<T>,
    intrinsics: &CameraIntrinsics<f64>,
    extrinsics: &RigidTransform<f64>,
    frames: &[DepthFrame],
    reps: usize,
) -> Result<LatencyReport> {
    let mut all = Timings::default();
    for _ in 0..reps.max(1) {
        let mut p = Pipeline::new(config, models, intrinsics, extrinsics)?;
        for f in frames {
            p.process_frame(f)?;
        }
        p.finish()?;
        all.extend(&p.timings, config.bench_warmup);
    }
    Ok(all.report())
}
