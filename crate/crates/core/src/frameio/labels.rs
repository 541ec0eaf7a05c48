//! Per-video ground-truth counts: `video_id,category,entering,exiting`.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Scene category crossing sensor noise (N) with crowding (C).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    CleanSparse,
    CleanCrowded,
    NoisySparse,
    NoisyCrowded,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::CleanSparse,
        Category::CleanCrowded,
        Category::NoisySparse,
        Category::NoisyCrowded,
    ];

    pub fn new(noisy: bool, crowded: bool) -> Self {
        match (noisy, crowded) {
            (false, false) => Category::CleanSparse,
            (false, true) => Category::CleanCrowded,
            (true, false) => Category::NoisySparse,
            (true, true) => Category::NoisyCrowded,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Category::CleanSparse => "N-C-",
            Category::CleanCrowded => "N-C+",
            Category::NoisySparse => "N+C-",
            Category::NoisyCrowded => "N+C+",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

fn normalize(s: &str) -> String {
    s.trim().replace('\u{2212}', "-").to_ascii_uppercase()
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.code() == normalize(s))
            .ok_or_else(|| Error::UnknownCategory(s.to_string()))
    }
}

/// Derives the category from `N±` / `C±` path components (or a combined
/// `N±C±` component) of a PCDS-style path.
pub fn category_from_path(path: &str) -> Option<Category> {
    let mut noisy = None;
    let mut crowded = None;
    for comp in path.split(['/', '\\']).map(normalize) {
        if let Ok(c) = comp.parse::<Category>() {
            return Some(c);
        }
        match comp.as_str() {
            "N+" => noisy = Some(true),
            "N-" => noisy = Some(false),
            "C+" => crowded = Some(true),
            "C-" => crowded = Some(false),
            _ => {}
        }
    }
    Some(Category::new(noisy?, crowded?))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthLabel {
    pub video_id: String,
    pub category: Category,
    pub entering: u32,
    pub exiting: u32,
}

fn count(row: usize, field: &str, raw: Option<&str>) -> Result<u32> {
    let raw = raw.ok_or_else(|| Error::Csv {
        row,
        msg: format!("missing {field}"),
    })?;
    let v: i64 = raw.trim().parse().map_err(|_| Error::Csv {
        row,
        msg: format!("{field} {raw:?} is not an integer"),
    })?;
    u32::try_from(v).map_err(|_| Error::Csv {
        row,
        msg: format!("{field} must be non-negative, got {v}"),
    })
}

pub fn parse_labels<R: Read>(reader: R) -> Result<Vec<GroundTruthLabel>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Csv {
            row,
            msg: e.to_string(),
        })?;
        if rec.len() != 4 {
            return Err(Error::Csv {
                row,
                msg: format!("expected 4 fields, got {}", rec.len()),
            });
        }
        let video_id = rec[0].to_string();
        let category = if rec[1].is_empty() {
            category_from_path(&video_id).ok_or_else(|| Error::Csv {
                row,
                msg: format!("no category given and none derivable from {video_id:?}"),
            })?
        } else {
            rec[1].parse()?
        };
        out.push(GroundTruthLabel {
            video_id,
            category,
            entering: count(row, "entering", rec.get(2))?,
            exiting: count(row, "exiting", rec.get(3))?,
        });
    }
    Ok(out)
}

pub fn load_pcds_labels(path: impl AsRef<Path>) -> Result<Vec<GroundTruthLabel>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_labels(f)
}

pub fn write_labels<W: Write>(writer: W, labels: &[GroundTruthLabel]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let wrap = |e: csv::Error| Error::Csv {
        row: 0,
        msg: e.to_string(),
    };
    w.write_record(["video_id", "category", "entering", "exiting"])
        .map_err(wrap)?;
    for l in labels {
        w.write_record([
            l.video_id.clone(),
            l.category.to_string(),
            l.entering.to_string(),
            l.exiting.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::Csv {
        row: 0,
        msg: e.to_string(),
    })
}
