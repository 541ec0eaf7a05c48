//! Count-error metric over a set of videos.
//!
//! `delta = sum |n_i - predicted_i| / sum n_i`, per direction and category.
//! `1 - delta` is reported alongside for comparison with accuracy-style
//! tables. A category with no true crossings has an undefined delta.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::frameio::{Category, GroundTruthLabel};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoCounts {
    pub video_id: String,
    pub entering: u32,
    pub exiting: u32,
}

/// Reads `video_id,entering,exiting` rows (with header).
pub fn parse_predictions<R: Read>(reader: R) -> Result<Vec<VideoCounts>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Csv {
            row,
            msg: e.to_string(),
        })?;
        if rec.len() != 3 {
            return Err(Error::Csv {
                row,
                msg: format!("expected 3 fields, got {}", rec.len()),
            });
        }
        let n = |j: usize| {
            rec[j].parse::<u32>().map_err(|_| Error::Csv {
                row,
                msg: format!("count {:?} is not a non-negative integer", &rec[j]),
            })
        };
        out.push(VideoCounts {
            video_id: rec[0].to_string(),
            entering: n(1)?,
            exiting: n(2)?,
        });
    }
    Ok(out)
}

pub fn write_predictions<W: Write>(writer: W, preds: &[VideoCounts]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let wrap = |e: csv::Error| Error::Csv {
        row: 0,
        msg: e.to_string(),
    };
    w.write_record(["video_id", "entering", "exiting"]).map_err(wrap)?;
    for p in preds {
        w.write_record([p.video_id.clone(), p.entering.to_string(), p.exiting.to_string()])
            .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::Csv {
        row: 0,
        msg: e.to_string(),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DeltaStat {
    pub true_total: u64,
    pub abs_error: u64,
}

impl DeltaStat {
    fn add(&mut self, truth: u32, pred: u32) {
        self.true_total += u64::from(truth);
        self.abs_error += u64::from(truth.abs_diff(pred));
    }

    /// `None` when there were no true crossings.
    pub fn delta(&self) -> Option<f64> {
        (self.true_total > 0).then(|| self.abs_error as f64 / self.true_total as f64)
    }

    pub fn accuracy(&self) -> Option<f64> {
        self.delta().map(|d| 1.0 - d)
    }
}

/// `[entering, exiting]` statistics per category and overall.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_category: BTreeMap<Category, [DeltaStat; 2]>,
    pub overall: [DeltaStat; 2],
    pub videos: usize,
}

pub fn evaluate(predictions: &[VideoCounts], labels: &[GroundTruthLabel]) -> Result<EvalReport> {
    let mut by_id: BTreeMap<&str, &VideoCounts> = BTreeMap::new();
    for p in predictions {
        if by_id.insert(&p.video_id, p).is_some() {
            return Err(Error::InvalidParameter(format!(
                "duplicate prediction for {:?}",
                p.video_id
            )));
        }
    }
    let mut per_category: BTreeMap<Category, [DeltaStat; 2]> =
        Category::ALL.iter().map(|&c| (c, Default::default())).collect();
    let mut overall = [DeltaStat::default(); 2];
    for l in labels {
        let p = by_id
            .remove(l.video_id.as_str())
            .ok_or_else(|| Error::InvalidParameter(format!("no prediction for video {:?}", l.video_id)))?;
        let cat = per_category.get_mut(&l.category).expect("all categories present");
        cat[0].add(l.entering, p.entering);
        cat[1].add(l.exiting, p.exiting);
        overall[0].add(l.entering, p.entering);
        overall[1].add(l.exiting, p.exiting);
    }
    if let Some(id) = by_id.keys().next() {
        return Err(Error::InvalidParameter(format!(
            "prediction for unlabeled video {id:?}"
        )));
    }
    Ok(EvalReport {
        per_category,
        overall,
        videos: labels.len(),
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "N/A".to_string(), |x| format!("{:.2}%", 100.0 * x))
}

impl EvalReport {
    /// Table with one row per category and an overall row.
    pub fn render(&self) -> String {
        let mut out = format!(
            "{:<8} {:>10} {:>10} {:>10} {:>10}\n",
            "category", "enter Δ", "enter 1-Δ", "exit Δ", "exit 1-Δ"
        );
        let row = |name: &str, s: &[DeltaStat; 2]| {
            format!(
                "{:<8} {:>10} {:>10} {:>10} {:>10}\n",
                name,
                cell(s[0].delta()),
                cell(s[0].accuracy()),
                cell(s[1].delta()),
                cell(s[1].accuracy())
            )
        };
        for (c, s) in &self.per_category {
            out += &row(c.code(), s);
        }
        out += &row("all", &self.overall);
        out += &format!("videos {}\n", self.videos);
        out
    }
}
