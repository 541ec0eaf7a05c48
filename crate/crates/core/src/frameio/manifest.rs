//! Line-oriented sequence manifest.
//!
//! ```text
//! fps 25
//! width 320
//! height 240
//! fx 285.0
//! fy 285.0
//! cx 160.0
//! cy 120.0
//! scale 1.0                      # optional depth scale applied at load
//! T 0 0 1.0                      # optional transform entries: row col value
//! calib xw yw zw xc yc zc        # optional calibration correspondences
//! frame frame_000000.pgm
//! ```

use crate::error::{Error, Result};
use crate::geometry::{calibrate_extrinsics, CameraIntrinsics, RigidTransform};

pub const MANIFEST_FILE: &str = "manifest.txt";

/// Camera-to-world extrinsics, given directly or as correspondences to fit.
#[derive(Debug, Clone, PartialEq)]
pub enum Extrinsics {
    Transform(RigidTransform<f64>),
    Points(Vec<([f64; 3], [f64; 3])>),
}

impl Extrinsics {
    pub fn resolve(&self) -> Result<RigidTransform<f64>> {
        match self {
            Extrinsics::Transform(t) => Ok(*t),
            Extrinsics::Points(pairs) => {
                let (w, c): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
                Ok(calibrate_extrinsics(&w, &c)?.transform)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceManifest {
    pub fps: f64,
    pub width: usize,
    pub height: usize,
    pub intrinsics: CameraIntrinsics<f64>,
    pub extrinsics: Option<Extrinsics>,
    pub depth_scale: f64,
    pub frames: Vec<String>,
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Manifest { line, msg: msg.into() }
}

fn num<T: std::str::FromStr>(line: usize, key: &str, tok: Option<&str>) -> Result<T> {
    tok.ok_or_else(|| err(line, format!("{key}: missing value")))?
        .parse()
        .map_err(|_| err(line, format!("{key}: bad number")))
}

impl SequenceManifest {
    pub fn new(fps: f64, width: usize, height: usize, intrinsics: CameraIntrinsics<f64>) -> Self {
        Self {
            fps,
            width,
            height,
            intrinsics,
            extrinsics: None,
            depth_scale: 1.0,
            frames: Vec::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut fps = None;
        let (mut width, mut height) = (None, None);
        let (mut fx, mut fy, mut cx, mut cy) = (None, None, None, None);
        let mut scale = 1.0;
        let mut t_entries: Option<[[f64; 4]; 4]> = None;
        let mut calib = Vec::new();
        let mut frames = Vec::new();

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut toks = line.split_whitespace();
            let key = toks.next().unwrap_or_default();
            match key {
                "fps" => fps = Some(num::<f64>(line_no, key, toks.next())?),
                "width" => width = Some(num::<usize>(line_no, key, toks.next())?),
                "height" => height = Some(num::<usize>(line_no, key, toks.next())?),
                "fx" => fx = Some(num::<f64>(line_no, key, toks.next())?),
                "fy" => fy = Some(num::<f64>(line_no, key, toks.next())?),
                "cx" => cx = Some(num::<f64>(line_no, key, toks.next())?),
                "cy" => cy = Some(num::<f64>(line_no, key, toks.next())?),
                "scale" => scale = num::<f64>(line_no, key, toks.next())?,
                "T" => {
                    let r: usize = num(line_no, "T row", toks.next())?;
                    let c: usize = num(line_no, "T col", toks.next())?;
                    let v: f64 = num(line_no, "T value", toks.next())?;
                    if r > 3 || c > 3 {
                        return Err(err(line_no, "T index out of range"));
                    }
                    t_entries.get_or_insert(*RigidTransform::identity().matrix())[r][c] = v;
                }
                "calib" => {
                    let mut v = [0.0; 6];
                    for slot in v.iter_mut() {
                        *slot = num(line_no, key, toks.next())?;
                    }
                    calib.push(([v[0], v[1], v[2]], [v[3], v[4], v[5]]));
                }
                "frame" => {
                    let name = line["frame".len()..].trim();
                    if name.is_empty() {
                        return Err(err(line_no, "frame: missing file name"));
                    }
                    frames.push(name.to_string());
                }
                other => return Err(err(line_no, format!("unknown key {other:?}"))),
            }
            if key != "frame" && toks.next().is_some() {
                return Err(err(line_no, format!("{key}: trailing tokens")));
            }
        }

        let missing = |k: &str| err(0, format!("missing required key {k}"));
        let intrinsics = CameraIntrinsics::new(
            fx.ok_or_else(|| missing("fx"))?,
            fy.ok_or_else(|| missing("fy"))?,
            cx.ok_or_else(|| missing("cx"))?,
            cy.ok_or_else(|| missing("cy"))?,
        )?;
        let extrinsics = match (t_entries, calib.is_empty()) {
            (Some(_), false) => return Err(err(0, "both T rows and calib points given")),
            (Some(m), true) => Some(Extrinsics::Transform(RigidTransform::from_matrix(m)?)),
            (None, false) => Some(Extrinsics::Points(calib)),
            (None, true) => None,
        };
        let m = Self {
            fps: fps.ok_or_else(|| missing("fps"))?,
            width: width.ok_or_else(|| missing("width"))?,
            height: height.ok_or_else(|| missing("height"))?,
            intrinsics,
            extrinsics,
            depth_scale: scale,
            frames,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fps > 0.0) {
            return Err(err(0, "fps must be positive"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(err(0, "frame dimensions must be positive"));
        }
        if !(self.depth_scale > 0.0) {
            return Err(err(0, "scale must be positive"));
        }
        if self.frames.is_empty() {
            return Err(Error::EmptySequence);
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let i = &self.intrinsics;
        out += &format!("fps {}\nwidth {}\nheight {}\n", self.fps, self.width, self.height);
        out += &format!("fx {}\nfy {}\ncx {}\ncy {}\n", i.fx, i.fy, i.cx, i.cy);
        if self.depth_scale != 1.0 {
            out += &format!("scale {}\n", self.depth_scale);
        }
        match &self.extrinsics {
            Some(Extrinsics::Transform(t)) => out += &transform_rows(t),
            Some(Extrinsics::Points(pairs)) => {
                for (w, c) in pairs {
                    out += &format!("calib {} {} {} {} {} {}\n", w[0], w[1], w[2], c[0], c[1], c[2]);
                }
            }
            None => {}
        }
        for f in &self.frames {
            out += &format!("frame {f}\n");
        }
        out
    }
}

/// `T r c v` lines for all sixteen entries.
pub fn transform_rows(t: &RigidTransform<f64>) -> String {
    let mut out = String::new();
    for (r, row) in t.matrix().iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            out += &format!("T {r} {c} {v}\n");
        }
    }
    out
}
