//! Plain `key value` pipeline configuration.
//!
//! ```text
//! bg.n_c 150
//! bg.n_2c 500
//! bg.delta_dis 200
//! grid.origin_x -1500
//! grid.origin_y -1500
//! grid.cell_mm 10
//! grid.cols 300
//! grid.rows 300
//! geom.height_cap_mm 2200
//! prop.w_b 4
//! prop.delta_h 150
//! prop.min_height 900
//! prop.head_l 10 25
//! prop.head_w 10 25
//! track.delta_m 15
//! track.Q 8
//! track.enter_sign 1
//! head.threshold 0.5
//! model.head_enter heads_enter.svm
//! model.head_exit heads_exit.svm
//! model.track_enter tracks_enter.svm
//! model.track_exit tracks_exit.svm
//! stage.head_classifier on
//! stage.track_classifier on
//! ```
//!
//! Relative model paths resolve against the config file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use crate::background::BackgroundParams;
use crate::error::{Error, Result};
use crate::geometry::GridSpec;
use crate::proposals::ProposalParams;
use crate::tracker::TrackerParams;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModelPaths {
    pub head_enter: Option<PathBuf>,
    pub head_exit: Option<PathBuf>,
    pub track_enter: Option<PathBuf>,
    pub track_exit: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub background: BackgroundParams,
    pub grid: GridSpec<f64>,
    pub proposals: ProposalParams,
    pub tracker: TrackerParams<f64>,
    /// Minimum head probability for a proposal to reach the tracker.
    pub head_threshold: f64,
    pub models: ModelPaths,
    pub head_classifier: bool,
    pub track_classifier: bool,
    /// Frames excluded from latency statistics when benchmarking.
    pub bench_warmup: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            background: BackgroundParams::default(),
            grid: GridSpec::door_default(),
            proposals: ProposalParams::default(),
            tracker: TrackerParams::default(),
            head_threshold: 0.5,
            models: ModelPaths::default(),
            head_classifier: true,
            track_classifier: true,
            bench_warmup: 5,
        }
    }
}

fn cfg_err(key: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        msg: msg.into(),
    }
}

fn one<'a>(key: &str, vals: &[&'a str]) -> Result<&'a str> {
    match vals {
        [v] => Ok(v),
        _ => Err(cfg_err(key, format!("expected one value, got {}", vals.len()))),
    }
}

fn num<T: std::str::FromStr>(key: &str, vals: &[&str]) -> Result<T> {
    let v = one(key, vals)?;
    v.parse().map_err(|_| cfg_err(key, format!("bad value {v:?}")))
}

fn pair(key: &str, vals: &[&str]) -> Result<(u32, u32)> {
    match vals {
        [a, b] => {
            let p = |v: &str| v.parse().map_err(|_| cfg_err(key, format!("bad value {v:?}")));
            Ok((p(a)?, p(b)?))
        }
        _ => Err(cfg_err(key, "expected `min max`")),
    }
}

fn toggle(key: &str, vals: &[&str]) -> Result<bool> {
    match one(key, vals)? {
        "on" | "true" | "1" | "yes" => Ok(true),
        "off" | "false" | "0" | "no" => Ok(false),
        v => Err(cfg_err(key, format!("expected on/off, got {v:?}"))),
    }
}

impl PipelineConfig {
    /// Parses config text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut c = PipelineConfig::default();
        let mut grid = (
            c.grid.origin,
            c.grid.cell_mm,
            c.grid.cols,
            c.grid.rows,
            c.grid.height_cap_mm,
        );
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut toks = line.split_whitespace();
            let key = toks.next().unwrap_or_default();
            let vals: Vec<&str> = toks.collect();
            let path = |vals: &[&str]| -> Result<Option<PathBuf>> { Ok(Some(base.join(one(key, vals)?))) };
            match key {
                "bg.n_c" => c.background.n_c = num(key, &vals)?,
                "bg.n_2c" => c.background.n_2c = num(key, &vals)?,
                "bg.delta_dis" => c.background.delta_dis = num(key, &vals)?,
                "grid.origin_x" => grid.0[0] = num(key, &vals)?,
                "grid.origin_y" => grid.0[1] = num(key, &vals)?,
                "grid.cell_mm" => grid.1 = num(key, &vals)?,
                "grid.cols" => grid.2 = num(key, &vals)?,
                "grid.rows" => grid.3 = num(key, &vals)?,
                "geom.height_cap_mm" => grid.4 = num(key, &vals)?,
                "prop.w_b" => c.proposals.w_b = num(key, &vals)?,
                "prop.delta_h" => c.proposals.delta_h_mm = num(key, &vals)?,
                "prop.min_height" => c.proposals.min_person_height_mm = num(key, &vals)?,
                "prop.head_l" => c.proposals.thresholds.head_l = pair(key, &vals)?,
                "prop.head_w" => c.proposals.thresholds.head_w = pair(key, &vals)?,
                "prop.head_h" => c.proposals.thresholds.head_h_mm = pair(key, &vals)?,
                "track.delta_m" => c.tracker.delta_m = num(key, &vals)?,
                "track.Q" => c.tracker.q = num(key, &vals)?,
                "track.enter_sign" => c.tracker.enter_sign = num(key, &vals)?,
                "head.threshold" => c.head_threshold = num(key, &vals)?,
                "model.head_enter" => c.models.head_enter = path(&vals)?,
                "model.head_exit" => c.models.head_exit = path(&vals)?,
                "model.track_enter" => c.models.track_enter = path(&vals)?,
                "model.track_exit" => c.models.track_exit = path(&vals)?,
                "stage.head_classifier" => c.head_classifier = toggle(key, &vals)?,
                "stage.track_classifier" => c.track_classifier = toggle(key, &vals)?,
                "bench.warmup" => c.bench_warmup = num(key, &vals)?,
                _ => return Err(cfg_err(key, "unknown key")),
            }
        }
        c.grid = GridSpec::new(grid.0, grid.1, grid.2, grid.3, grid.4).map_err(|e| cfg_err("grid", e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        self.background.validate().map_err(|e| cfg_err("bg", e.to_string()))?;
        self.proposals
            .thresholds
            .validate()
            .map_err(|e| cfg_err("prop", e.to_string()))?;
        if self.proposals.w_b == 0 {
            return Err(cfg_err("prop.w_b", "must be positive"));
        }
        self.tracker.validate().map_err(|e| cfg_err("track", e.to_string()))?;
        if !(0.0..=1.0).contains(&self.head_threshold) {
            return Err(cfg_err("head.threshold", "must lie in [0, 1]"));
        }
        let m = &self.models;
        if self.head_classifier && m.head_enter.is_none() && m.head_exit.is_none() {
            return Err(cfg_err(
                "model.head_enter",
                "head classifier enabled but no head model given",
            ));
        }
        if self.track_classifier && (m.track_enter.is_none() || m.track_exit.is_none()) {
            return Err(cfg_err(
                "model.track_enter",
                "track classifier enabled but a track model is missing",
            ));
        }
        for p in [&m.head_enter, &m.head_exit, &m.track_enter, &m.track_exit]
            .into_iter()
            .flatten()
        {
            if !p.is_file() {
                return Err(cfg_err("model", format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// Config with both classifier stages off (no model files needed).
    pub fn unclassified() -> Self {
        Self {
            head_classifier: false,
            track_classifier: false,
            ..Self::default()
        }
    }
}
