//! Labeled training data from synthetic scenes and model fitting.
//!
//! Head samples: every proposal whose center lies within `head_match_mm` of
//! a true head at that frame is positive (tagged with the walker's
//! direction); proposals farther than `head_reject_mm` from every head are
//! negative; the band in between is ambiguous and skipped.
//!
//! Track samples: each retired moving track is associated with the walker
//! most of its nodes sit on. The longest such track per walker, if it moves
//! in the walker's direction, is positive; all other tracks are negative.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Models, Pipeline, PipelineConfig};
use crate::classifier::{train, SvmModel, SvmParams};
use crate::error::{Error, Result};
use crate::features::trajectory_feature;
use crate::scalar::Real;
use crate::synthgen::{ground_truth, GroundTruth, Renderer, SceneSpec};
use crate::tracker::{Decision, Direction};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample<T> {
    /// `+1` or `-1`.
    pub label: i8,
    pub direction: Option<Direction>,
    pub features: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingOptions {
    pub head_match_mm: f64,
    pub head_reject_mm: f64,
    /// Track nodes within this distance of a walker's head count toward it.
    pub track_match_mm: f64,
    /// Use every n-th frame for head samples.
    pub frame_stride: u64,
    /// Per-class cap after a seeded shuffle; 0 keeps everything.
    pub max_per_class: usize,
    pub seed: u64,
}

impl Default for TrainingOptions {
    fn default() -> Self {
        Self {
            head_match_mm: 60.0,
            head_reject_mm: 200.0,
            track_match_mm: 150.0,
            frame_stride: 2,
            max_per_class: 1500,
            seed: 0,
        }
    }
}

fn nearest_head(truth: &GroundTruth, frame: u64, p: [f64; 2]) -> Option<(usize, Direction, f64)> {
    truth
        .heads_at(frame)
        .map(|(t, s)| (t.actor, t.direction, (s.x - p[0]).hypot(s.y - p[1])))
        .min_by(|a, b| a.2.total_cmp(&b.2))
}

fn world_of<T: Real>(config: &PipelineConfig, x: T, y: T) -> [f64; 2] {
    config.grid.world_of(x.as_f64(), y.as_f64())
}

/// Labeled head features from all proposals of a rendered scene.
pub fn extract_head_samples<T: Real>(
    config: &PipelineConfig,
    spec: &SceneSpec,
    opts: &TrainingOptions,
) -> Result<Vec<LabeledSample<T>>> {
    let cfg = PipelineConfig {
        head_classifier: false,
        track_classifier: false,
        ..config.clone()
    };
    let renderer = Renderer::new(spec)?;
    let truth = ground_truth(spec);
    let mut p = Pipeline::<T>::new(&cfg, &Models::default(), &spec.intrinsics, &spec.extrinsics())?;
    let mut out = Vec::new();
    for frame in renderer.frames() {
        let res = p.process_frame(&frame)?;
        if frame.index % opts.frame_stride.max(1) != 0 {
            continue;
        }
        for prop in &res.proposals {
            let (cx, cy) = prop.rect.center::<T>();
            let w = world_of(&cfg, cx, cy);
            let label = match nearest_head(&truth, frame.index, w) {
                Some((_, dir, d)) if d <= opts.head_match_mm => Some((1, Some(dir))),
                Some((_, _, d)) if d < opts.head_reject_mm => None,
                _ => Some((-1, None)),
            };
            if let Some((label, direction)) = label {
                out.push(LabeledSample {
                    label,
                    direction,
                    features: prop.feature.0.to_vec(),
                });
            }
        }
    }
    Ok(out)
}

/// Labeled trajectory features from every retired moving track of a scene,
/// using whatever head models `models` carries and no track gate.
pub fn extract_track_samples<T: Real>(
    config: &PipelineConfig,
    models: &Models<T>,
    spec: &SceneSpec,
    opts: &TrainingOptions,
) -> Result<Vec<LabeledSample<T>>> {
    let has_head = models.head_enter.is_some() || models.head_exit.is_some();
    let cfg = PipelineConfig {
        head_classifier: config.head_classifier && has_head,
        track_classifier: false,
        ..config.clone()
    };
    let renderer = Renderer::new(spec)?;
    let truth = ground_truth(spec);
    let mut p = Pipeline::<T>::new(&cfg, models, &spec.intrinsics, &spec.extrinsics())?;
    let mut events = Vec::new();
    for frame in renderer.frames() {
        events.extend(p.process_frame(&frame)?.events);
    }
    events.extend(p.finish()?);

    struct Assoc {
        actor: Option<usize>,
        votes: usize,
    }
    let mut assoc = Vec::new();
    for e in &events {
        let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
        for n in &e.history {
            let w = world_of(&cfg, n.x, n.y);
            if let Some((actor, _, d)) = nearest_head(&truth, n.frame, w) {
                if d <= opts.track_match_mm {
                    *votes.entry(actor).or_default() += 1;
                }
            }
        }
        let best = votes.into_iter().max_by_key(|&(a, v)| (v, std::cmp::Reverse(a)));
        assoc.push(match best {
            Some((a, v)) if 2 * v >= e.history.len() => Assoc {
                actor: Some(a),
                votes: v,
            },
            _ => Assoc { actor: None, votes: 0 },
        });
    }
    // longest associated track per walker
    let mut winner: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (i, a) in assoc.iter().enumerate() {
        if let (Some(actor), Some(_)) = (a.actor, events[i].direction) {
            let w = winner.entry(actor).or_insert((i, a.votes));
            if a.votes > w.1 {
                *w = (i, a.votes);
            }
        }
    }
    let mut out = Vec::new();
    for (i, e) in events.iter().enumerate() {
        let Some(direction) = e.direction else { continue };
        if !matches!(e.decision, Decision::Counted | Decision::NonHead) {
            continue;
        }
        let positive = assoc[i].actor.is_some_and(|actor| {
            winner.get(&actor).is_some_and(|w| w.0 == i)
                && truth.heads.iter().any(|h| h.actor == actor && h.direction == direction)
        });
        out.push(LabeledSample {
            label: if positive { 1 } else { -1 },
            direction: Some(direction),
            features: trajectory_feature(&e.history)?.0.to_vec(),
        });
    }
    Ok(out)
}

/// Positives of one direction plus all negatives.
fn head_set<T: Real>(samples: &[LabeledSample<T>], dir: Direction) -> Vec<&LabeledSample<T>> {
    samples
        .iter()
        .filter(|s| s.label < 0 || s.direction == Some(dir))
        .collect()
}

fn track_set<T: Real>(samples: &[LabeledSample<T>], dir: Direction) -> Vec<&LabeledSample<T>> {
    samples.iter().filter(|s| s.direction == Some(dir)).collect()
}

/// Seeded per-class cap, preserving nothing about input order.
fn balance<T: Real>(set: Vec<&LabeledSample<T>>, cap: usize, seed: u64) -> (Vec<Vec<T>>, Vec<i8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut pos, mut neg): (Vec<_>, Vec<_>) = set.into_iter().partition(|s| s.label > 0);
    for class in [&mut pos, &mut neg] {
        class.shuffle(&mut rng);
        if cap > 0 {
            class.truncate(cap);
        }
    }
    pos.into_iter()
        .chain(neg)
        .map(|s| (s.features.clone(), s.label))
        .unzip()
}

/// `(enter, exit)` training sets for the head classifier.
pub fn head_training_sets<T: Real>(
    samples: &[LabeledSample<T>],
    opts: &TrainingOptions,
) -> [(Vec<Vec<T>>, Vec<i8>); 2] {
    [Direction::Enter, Direction::Exit].map(|d| balance(head_set(samples, d), opts.max_per_class, opts.seed))
}

/// `(enter, exit)` training sets for the trajectory classifier.
pub fn track_training_sets<T: Real>(
    samples: &[LabeledSample<T>],
    opts: &TrainingOptions,
) -> [(Vec<Vec<T>>, Vec<i8>); 2] {
    [Direction::Enter, Direction::Exit].map(|d| balance(track_set(samples, d), opts.max_per_class, opts.seed))
}

pub fn train_head_models<T: Real>(
    samples: &[LabeledSample<T>],
    params: [&SvmParams<T>; 2],
    opts: &TrainingOptions,
) -> Result<[SvmModel<T>; 2]> {
    let [(xe, ye), (xx, yx)] = head_training_sets(samples, opts);
    Ok([train(&xe, &ye, params[0])?, train(&xx, &yx, params[1])?])
}

pub fn train_track_models<T: Real>(
    samples: &[LabeledSample<T>],
    params: [&SvmParams<T>; 2],
    opts: &TrainingOptions,
) -> Result<[SvmModel<T>; 2]> {
    let [(xe, ye), (xx, yx)] = track_training_sets(samples, opts);
    Ok([train(&xe, &ye, params[0])?, train(&xx, &yx, params[1])?])
}

/// `label,f0,f1,...` rows with a header.
pub fn write_feature_csv<T: Real, W: Write>(writer: W, samples: &[(Vec<T>, i8)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let wrap = |e: csv::Error| Error::Csv {
        row: 0,
        msg: e.to_string(),
    };
    let dim = samples.first().map_or(0, |s| s.0.len());
    let header: Vec<String> = std::iter::once("label".to_string())
        .chain((0..dim).map(|i| format!("f{i}")))
        .collect();
    w.write_record(&header).map_err(wrap)?;
    for (x, y) in samples {
        let row: Vec<String> = std::iter::once(y.to_string())
            .chain(x.iter().map(|v| v.to_string()))
            .collect();
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::Csv {
        row: 0,
        msg: e.to_string(),
    })
}

pub fn parse_feature_csv<T: Real, R: Read>(reader: R) -> Result<(Vec<Vec<T>>, Vec<i8>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Csv {
            row,
            msg: e.to_string(),
        })?;
        let bad = |msg: String| Error::Csv { row, msg };
        let label: i8 = rec
            .get(0)
            .and_then(|v| v.parse().ok())
            .filter(|v| *v == 1 || *v == -1)
            .ok_or_else(|| bad("label must be 1 or -1".into()))?;
        let x = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<T>().map_err(|_| bad(format!("bad feature value {v:?}"))))
            .collect::<Result<Vec<T>>>()?;
        if x.is_empty() {
            return Err(bad("no feature columns".into()));
        }
        xs.push(x);
        ys.push(label);
    }
    Ok((xs, ys))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_csv_round_trip() {
        let rows = vec![(vec![1.5, -2.0, 3.25], 1i8), (vec![0.0, 1e-9, 7.0], -1)];
        let mut buf = Vec::new();
        write_feature_csv(&mut buf, &rows).unwrap();
        let (x, y) = parse_feature_csv::<f64, _>(buf.as_slice()).unwrap();
        assert_eq!(y, vec![1, -1]);
        assert_eq!(x, vec![rows[0].0.clone(), rows[1].0.clone()]);
        assert!(parse_feature_csv::<f64, _>("label,f0\n2,1.0\n".as_bytes()).is_err());
    }

    #[test]
    fn balance_caps_each_class() {
        let s: Vec<LabeledSample<f64>> = (0..10)
            .map(|i| LabeledSample {
                label: if i < 7 { 1 } else { -1 },
                direction: None,
                features: vec![i as f64],
            })
            .collect();
        let (x, y) = balance(s.iter().collect(), 2, 1);
        assert_eq!(y, vec![1, 1, -1, -1]);
        assert_eq!(x.len(), 4);
    }
}
