//! Frame-to-frame association of head proposals and door-crossing counts.
//!
//! Positions are height-image cell coordinates; seed heights are mm. The
//! match cost compares seeds in cm so one unit of height change weighs about
//! as much as one 10 mm cell of motion.

use std::fmt;
use std::sync::Arc;

use crate::classifier::SvmModel;
use crate::error::{Error, Result};
use crate::features::trajectory_feature;
use crate::scalar::Real;

pub const DEFAULT_DELTA_M: f64 = 15.0;
pub const DEFAULT_Q: u64 = 8;

/// One matched proposal in a track's history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackEntry<T> {
    pub frame: u64,
    pub x: T,
    pub y: T,
    /// Seed height in mm.
    pub seed: T,
    /// Head probability of the proposal.
    pub prob: T,
}

/// A refined proposal offered to [`Tracker::step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate<T> {
    pub x: T,
    pub y: T,
    pub seed: T,
    pub prob: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackNode<T> {
    pub id: u64,
    history: Vec<TrackEntry<T>>,
}

impl<T: Real> TrackNode<T> {
    pub fn history(&self) -> &[TrackEntry<T>] {
        &self.history
    }

    pub fn update_count(&self) -> usize {
        self.history.len()
    }

    pub fn last(&self) -> &TrackEntry<T> {
        self.history.last().expect("track history is never empty")
    }

    pub fn last_frame(&self) -> u64 {
        self.last().frame
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Enter,
    Exit,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Enter => "enter",
            Direction::Exit => "exit",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Counted,
    /// Classified as a non-head trajectory.
    NonHead,
    /// No net displacement along the door axis.
    NoMotion,
    /// Fewer than two nodes; never classified.
    TooShort,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Counted => "counted",
            Decision::NonHead => "non-head",
            Decision::NoMotion => "no-motion",
            Decision::TooShort => "too-short",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetirementEvent<T> {
    pub frame: u64,
    pub track_id: u64,
    pub direction: Option<Direction>,
    pub decision: Decision,
    pub track_len: usize,
    /// Track-classifier probability when one was consulted.
    pub prob: Option<T>,
    pub history: Vec<TrackEntry<T>>,
}

impl<T> RetirementEvent<T> {
    /// `frame,direction,decision,track_len`
    pub fn log_line(&self) -> String {
        let dir = self.direction.map_or_else(|| "none".to_string(), |d| d.to_string());
        format!("{},{},{},{}", self.frame, dir, self.decision, self.track_len)
    }
}

pub const EVENT_LOG_HEADER: &str = "frame,direction,decision,track_len";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CountResult {
    pub entered: u64,
    pub exited: u64,
    /// Tracks with at least two nodes that were not counted.
    pub rejected: u64,
    /// Single-node tracks dropped before classification.
    pub short_discarded: u64,
}

/// How retired trajectories are judged.
#[derive(Debug, Clone)]
pub enum TrackGate<T> {
    /// Every moving track with two or more nodes counts.
    AcceptAll,
    Models {
        enter: Option<Arc<SvmModel<T>>>,
        exit: Option<Arc<SvmModel<T>>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerParams<T> {
    pub delta_m: T,
    /// Frames of silence tolerated before retirement.
    pub q: u64,
    /// `+1`: motion toward +Y is entering; `-1`: toward -Y.
    pub enter_sign: i8,
}

impl<T: Real> Default for TrackerParams<T> {
    fn default() -> Self {
        Self {
            delta_m: T::of(DEFAULT_DELTA_M),
            q: DEFAULT_Q,
            enter_sign: 1,
        }
    }
}

impl<T: Real> TrackerParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_m > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "delta_m must be positive, got {}",
                self.delta_m
            )));
        }
        if self.enter_sign != 1 && self.enter_sign != -1 {
            return Err(Error::InvalidParameter(format!(
                "enter_sign must be +1 or -1, got {}",
                self.enter_sign
            )));
        }
        Ok(())
    }
}

/// `||(dx, dy, ds_cm)||` against the node's latest entry.
pub fn match_cost<T: Real>(node: &TrackNode<T>, cand: &Candidate<T>) -> T {
    let last = node.last();
    let ds = (last.seed - cand.seed) / T::of(10.0);
    ((last.x - cand.x).powi(2) + (last.y - cand.y).powi(2) + ds * ds).sqrt()
}

/// `None` for fewer than two entries or no net displacement along Y.
pub fn direction<T: Real>(history: &[TrackEntry<T>], enter_sign: i8) -> Option<Direction> {
    if history.len() < 2 {
        return None;
    }
    let dy = history[history.len() - 1].y - history[0].y;
    let signed = if enter_sign < 0 { -dy } else { dy };
    if signed > T::zero() {
        Some(Direction::Enter)
    } else if signed < T::zero() {
        Some(Direction::Exit)
    } else {
        None
    }
}

#[derive(Debug, Clone)]
pub struct Tracker<T> {
    params: TrackerParams<T>,
    gate: TrackGate<T>,
    nodes: Vec<TrackNode<T>>,
    next_id: u64,
    last_frame: Option<u64>,
    counts: CountResult,
}

impl<T: Real> Tracker<T> {
    pub fn new(params: TrackerParams<T>, gate: TrackGate<T>) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            gate,
            nodes: Vec::new(),
            next_id: 0,
            last_frame: None,
            counts: CountResult::default(),
        })
    }

    pub fn params(&self) -> &TrackerParams<T> {
        &self.params
    }

    /// Live nodes in creation order.
    pub fn nodes(&self) -> &[TrackNode<T>] {
        &self.nodes
    }

    pub fn counts(&self) -> CountResult {
        self.counts
    }

    /// Associates this frame's candidates, then retires nodes silent for
    /// more than `Q` frames. Frame indices must strictly increase.
    pub fn step(&mut self, frame: u64, candidates: &[Candidate<T>]) -> Result<Vec<RetirementEvent<T>>> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(Error::FrameOrder { last, got: frame });
            }
        }
        self.last_frame = Some(frame);

        let mut pairs: Vec<(T, usize, usize)> = Vec::new();
        for (ni, node) in self.nodes.iter().enumerate() {
            for (ci, c) in candidates.iter().enumerate() {
                let eta = match_cost(node, c);
                if eta < self.params.delta_m {
                    pairs.push((eta, ni, ci));
                }
            }
        }
        pairs.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then((a.1, a.2).cmp(&(b.1, b.2)))
        });
        let mut node_used = vec![false; self.nodes.len()];
        let mut cand_used = vec![false; candidates.len()];
        for (_, ni, ci) in pairs {
            if node_used[ni] || cand_used[ci] {
                continue;
            }
            node_used[ni] = true;
            cand_used[ci] = true;
            let c = candidates[ci];
            self.nodes[ni].history.push(entry(frame, &c));
        }
        for (ci, c) in candidates.iter().enumerate() {
            if !cand_used[ci] {
                self.spawn(frame, c);
            }
        }

        let q = self.params.q;
        let (stale, live): (Vec<_>, Vec<_>) = std::mem::take(&mut self.nodes)
            .into_iter()
            .partition(|n| frame - n.last_frame() > q);
        self.nodes = live;
        stale.iter().map(|n| self.finalize_retirement(n, frame)).collect()
    }

    /// Retires every live node at `frame` (end of stream).
    pub fn finish(&mut self, frame: u64) -> Result<Vec<RetirementEvent<T>>> {
        let nodes = std::mem::take(&mut self.nodes);
        nodes.iter().map(|n| self.finalize_retirement(n, frame)).collect()
    }

    fn spawn(&mut self, frame: u64, c: &Candidate<T>) {
        self.nodes.push(TrackNode {
            id: self.next_id,
            history: vec![entry(frame, c)],
        });
        self.next_id += 1;
    }

    fn finalize_retirement(&mut self, node: &TrackNode<T>, frame: u64) -> Result<RetirementEvent<T>> {
        let len = node.update_count();
        let mut event = RetirementEvent {
            frame,
            track_id: node.id,
            direction: None,
            decision: Decision::TooShort,
            track_len: len,
            prob: None,
            history: node.history.clone(),
        };
        if len < 2 {
            self.counts.short_discarded += 1;
            return Ok(event);
        }
        let Some(dir) = direction(&node.history, self.params.enter_sign) else {
            event.decision = Decision::NoMotion;
            self.counts.rejected += 1;
            return Ok(event);
        };
        event.direction = Some(dir);
        let is_head = match &self.gate {
            TrackGate::AcceptAll => true,
            TrackGate::Models { enter, exit } => {
                let (model, name) = match dir {
                    Direction::Enter => (enter, "enter"),
                    Direction::Exit => (exit, "exit"),
                };
                let model = model.as_ref().ok_or(Error::MissingTrackModel(name))?;
                let feat = trajectory_feature(&node.history)?;
                let p = model.predict_prob(feat.as_slice())?;
                event.prob = Some(p);
                p >= T::of(0.5)
            }
        };
        if is_head {
            event.decision = Decision::Counted;
            match dir {
                Direction::Enter => self.counts.entered += 1,
                Direction::Exit => self.counts.exited += 1,
            }
        } else {
            event.decision = Decision::NonHead;
            self.counts.rejected += 1;
        }
        Ok(event)
    }
}

fn entry<T: Real>(frame: u64, c: &Candidate<T>) -> TrackEntry<T> {
    TrackEntry {
        frame,
        x: c.x,
        y: c.y,
        seed: c.seed,
        prob: c.prob,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(x: f64, y: f64, seed: f64) -> Candidate<f64> {
        Candidate { x, y, seed, prob: 1.0 }
    }

    fn tracker() -> Tracker<f64> {
        Tracker::new(TrackerParams::default(), TrackGate::AcceptAll).unwrap()
    }

    fn node(x: f64, y: f64, seed: f64) -> TrackNode<f64> {
        TrackNode {
            id: 0,
            history: vec![entry(0, &cand(x, y, seed))],
        }
    }

    #[test]
    fn match_cost_examples() {
        assert_eq!(match_cost(&node(10.0, 10.0, 1700.0), &cand(10.0, 10.0, 1700.0)), 0.0);
        assert_eq!(match_cost(&node(0.0, 0.0, 1700.0), &cand(3.0, 4.0, 1700.0)), 5.0);
        let eta = match_cost(&node(0.0, 0.0, 1700.0), &cand(3.0, 4.0, 2700.0));
        assert!((eta - 100.124_921_972_503_93).abs() < 1e-9);
    }

    #[test]
    fn initialization_and_update() {
        let mut t = tracker();
        t.step(0, &[cand(10.0, 10.0, 1700.0), cand(100.0, 100.0, 1600.0)])
            .unwrap();
        assert_eq!(t.nodes().len(), 2);
        t.step(1, &[cand(13.0, 14.0, 1700.0)]).unwrap();
        assert_eq!(t.nodes().len(), 2);
        assert_eq!(t.nodes()[0].update_count(), 2);
    }

    #[test]
    fn retirement_schedule() {
        let mut t = tracker();
        t.step(0, &[cand(10.0, 10.0, 1700.0)]).unwrap();
        t.step(1, &[cand(10.0, 15.0, 1700.0)]).unwrap();
        for f in 2..=9 {
            assert!(t.step(f, &[]).unwrap().is_empty(), "frame {f}");
        }
        let ev = t.step(10, &[]).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].frame, 10);
        assert_eq!(ev[0].direction, Some(Direction::Enter));
        assert_eq!(t.counts().entered, 1);
        assert!(t.nodes().is_empty());
    }

    #[test]
    fn direction_rules() {
        let h = |ys: &[f64]| {
            ys.iter()
                .enumerate()
                .map(|(i, &y)| entry(i as u64, &cand(0.0, y, 1700.0)))
                .collect::<Vec<_>>()
        };
        assert_eq!(direction(&h(&[10.0, 25.0, 40.0]), 1), Some(Direction::Enter));
        assert_eq!(direction(&h(&[40.0, 10.0]), 1), Some(Direction::Exit));
        assert_eq!(direction(&h(&[40.0, 10.0]), -1), Some(Direction::Enter));
        assert_eq!(direction(&h(&[25.0, 25.0]), 1), None);
        assert_eq!(direction(&h(&[25.0]), 1), None);
    }

    #[test]
    fn duplicate_frame_rejected() {
        let mut t = tracker();
        t.step(3, &[]).unwrap();
        assert!(matches!(t.step(3, &[]), Err(Error::FrameOrder { last: 3, got: 3 })));
    }

    #[test]
    fn greedy_prefers_lower_cost() {
        let mut t = tracker();
        t.step(0, &[cand(0.0, 0.0, 1700.0), cand(10.0, 0.0, 1700.0)]).unwrap();
        t.step(1, &[cand(6.0, 0.0, 1700.0), cand(9.0, 0.0, 1700.0)]).unwrap();
        let n = t.nodes();
        assert_eq!(n.len(), 2);
        assert_eq!(n[1].last().x, 9.0);
        assert_eq!(n[0].last().x, 6.0);
    }

    #[test]
    fn flicker_and_stationary_tracks_are_not_counted() {
        let mut t = tracker();
        t.step(0, &[cand(0.0, 0.0, 1700.0), cand(50.0, 50.0, 1100.0)]).unwrap();
        t.step(1, &[cand(50.0, 50.0, 1100.0)]).unwrap();
        let ev = t.finish(2).unwrap();
        assert_eq!(ev.len(), 2);
        let c = t.counts();
        assert_eq!((c.entered, c.exited, c.rejected, c.short_discarded), (0, 0, 1, 1));
        assert_eq!(ev[0].log_line(), "2,none,too-short,1");
        assert_eq!(ev[1].log_line(), "2,none,no-motion,2");
    }

    #[test]
    fn missing_model_is_error() {
        let gate = TrackGate::Models {
            enter: None,
            exit: None,
        };
        let mut t = Tracker::new(TrackerParams::<f64>::default(), gate).unwrap();
        t.step(0, &[cand(0.0, 0.0, 1700.0)]).unwrap();
        t.step(1, &[cand(0.0, 5.0, 1700.0)]).unwrap();
        assert!(matches!(t.finish(2), Err(Error::MissingTrackModel("enter"))));
    }

    #[test]
    fn fresh_counts_are_zero_and_stable() {
        let t = tracker();
        assert_eq!(t.counts(), CountResult::default());
        assert_eq!(t.counts(), t.counts());
    }
}
