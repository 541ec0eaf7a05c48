//! Versioned text format for trained classifiers.
//!
//! ```text
//! depthcount-svm v1
//! gamma <g>
//! c <C>
//! bias <b>
//! calibration <slope> <intercept>
//! dim <d>
//! mean <d values>
//! scale <d values>
//! support <n>
//! <d coefficients> <dual weight>      # n lines
//! ```
//!
//! Values are written with shortest round-trip formatting, so a reload
//! reproduces every coefficient bit for bit.

use std::fs;
use std::path::Path;

use crate::classifier::{Standardizer, SupportVector, SvmModel};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MODEL_MAGIC: &str = "depthcount-svm";
const VERSION: &str = "v1";

fn join<T: Real>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn render_model<T: Real>(model: &SvmModel<T>) -> String {
    let mut out = format!("{MODEL_MAGIC} {VERSION}\n");
    out += &format!("gamma {}\nc {}\nbias {}\n", model.gamma, model.c, model.bias);
    out += &format!("calibration {} {}\n", model.calib_a, model.calib_b);
    out += &format!("dim {}\n", model.dim());
    out += &format!("mean {}\n", join(&model.standardizer.mean));
    out += &format!("scale {}\n", join(&model.standardizer.scale));
    out += &format!("support {}\n", model.support.len());
    for sv in &model.support {
        out += &format!("{} {}\n", join(&sv.x), sv.coef);
    }
    out
}

pub fn save_model<T: Real>(path: impl AsRef<Path>, model: &SvmModel<T>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_model(model)).map_err(|e| Error::io(path, e))
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self, what: &str) -> Result<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            let l = l.trim();
            if !l.is_empty() {
                return Ok((i + 1, l));
            }
        }
        Err(Error::ModelFormat(format!("truncated file: expected {what}")))
    }

    fn keyed(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (n, line) = self.next_line(key)?;
        let mut toks = line.split_whitespace();
        if toks.next() != Some(key) {
            return Err(Error::ModelFormat(format!("line {n}: expected {key:?}")));
        }
        Ok((n, toks.collect()))
    }
}

fn parse_vals<T: Real>(line: usize, toks: &[&str], expect: usize) -> Result<Vec<T>> {
    if toks.len() != expect {
        return Err(Error::ModelFormat(format!(
            "line {line}: expected {expect} values, got {}",
            toks.len()
        )));
    }
    toks.iter()
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| Error::ModelFormat(format!("line {line}: bad number {t:?}")))
        })
        .collect()
}

pub fn parse_model<T: Real>(text: &str) -> Result<SvmModel<T>> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (_, header) = lines.next_line("header")?;
    let mut h = header.split_whitespace();
    if h.next() != Some(MODEL_MAGIC) {
        return Err(Error::ModelFormat(format!("bad magic header {header:?}")));
    }
    match h.next() {
        Some(VERSION) => {}
        other => return Err(Error::ModelVersion(other.unwrap_or("").to_string())),
    }
    let scalar = |lines: &mut Lines, key: &str| -> Result<T> {
        let (n, toks) = lines.keyed(key)?;
        Ok(parse_vals::<T>(n, &toks, 1)?[0])
    };
    let gamma = scalar(&mut lines, "gamma")?;
    let c = scalar(&mut lines, "c")?;
    let bias = scalar(&mut lines, "bias")?;
    let (n, toks) = lines.keyed("calibration")?;
    let cal = parse_vals::<T>(n, &toks, 2)?;
    let (n, toks) = lines.keyed("dim")?;
    let dim: usize = match toks.as_slice() {
        [d] => d
            .parse()
            .map_err(|_| Error::ModelFormat(format!("line {n}: bad dimension")))?,
        _ => return Err(Error::ModelFormat(format!("line {n}: bad dimension"))),
    };
    let (n, toks) = lines.keyed("mean")?;
    let mean = parse_vals::<T>(n, &toks, dim)?;
    let (n, toks) = lines.keyed("scale")?;
    let scale = parse_vals::<T>(n, &toks, dim)?;
    let (n, toks) = lines.keyed("support")?;
    let count: usize = match toks.as_slice() {
        [d] => d
            .parse()
            .map_err(|_| Error::ModelFormat(format!("line {n}: bad support count")))?,
        _ => return Err(Error::ModelFormat(format!("line {n}: bad support count"))),
    };
    let mut support = Vec::with_capacity(count);
    for _ in 0..count {
        let (n, line) = lines.next_line("support vector")?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        let mut vals = parse_vals::<T>(n, &toks, dim + 1)?;
        let coef = vals.pop().expect("dim + 1 values");
        support.push(SupportVector { x: vals, coef });
    }
    if let Ok((n, _)) = lines.next_line("") {
        return Err(Error::ModelFormat(format!("line {n}: trailing content")));
    }
    let model = SvmModel {
        gamma,
        c,
        bias,
        calib_a: cal[0],
        calib_b: cal[1],
        standardizer: Standardizer { mean, scale },
        support,
    };
    model.validate()?;
    Ok(model)
}

pub fn load_model<T: Real>(path: impl AsRef<Path>) -> Result<SvmModel<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text)
}
