//! Depth-frame ingestion and the on-disk formats used by the pipeline.

mod labels;
mod manifest;
mod model_file;
pub mod pgm;

use std::fs;
use std::path::{Path, PathBuf};

pub use labels::{category_from_path, load_pcds_labels, parse_labels, write_labels, Category, GroundTruthLabel};
pub use manifest::{transform_rows, Extrinsics, SequenceManifest, MANIFEST_FILE};
pub use model_file::{load_model, parse_model, render_model, save_model, MODEL_MAGIC};

use crate::error::{Error, Result};

/// One depth sample of the scene: row-major millimeters, 0 = no return.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthFrame {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u16>,
    pub index: u64,
}

impl DepthFrame {
    pub fn new(width: usize, height: usize, data: Vec<u16>, index: u64) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                what: "depth frame",
                expected: (width, height),
                got: (data.len(), 1),
            });
        }
        Ok(Self {
            width,
            height,
            data,
            index,
        })
    }

    pub fn filled(width: usize, height: usize, value: u16, index: u64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
            index,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u16) {
        self.data[y * self.width + x] = v;
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        pgm::encode16(self.width, self.height, &self.data)
    }
}

/// Frames of a sequence directory, in manifest order.
///
/// Each item is read lazily; a dimension mismatch or unreadable file is
/// reported for that frame.
#[derive(Debug)]
pub struct FrameSource {
    dir: PathBuf,
    manifest: SequenceManifest,
    next: usize,
}

impl FrameSource {
    pub fn manifest(&self) -> &SequenceManifest {
        &self.manifest
    }

    pub fn len(&self) -> usize {
        self.manifest.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.frames.is_empty()
    }

    fn read(&self, i: usize) -> Result<DepthFrame> {
        let path = self.dir.join(&self.manifest.frames[i]);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let img = pgm::decode(&bytes)?;
        let (w, h) = (self.manifest.width, self.manifest.height);
        if (img.width, img.height) != (w, h) {
            return Err(Error::FrameDimensions {
                index: i,
                expected_w: w,
                expected_h: h,
                got_w: img.width,
                got_h: img.height,
            });
        }
        let scale = self.manifest.depth_scale;
        let data = if scale == 1.0 {
            img.samples
        } else {
            img.samples
                .into_iter()
                .map(|s| (s as f64 * scale).round().clamp(0.0, u16::MAX as f64) as u16)
                .collect()
        };
        DepthFrame::new(w, h, data, i as u64)
    }
}

impl Iterator for FrameSource {
    type Item = Result<DepthFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.manifest.frames.len() {
            return None;
        }
        let item = self.read(self.next);
        self.next += 1;
        Some(item)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rest = self.manifest.frames.len() - self.next;
        (rest, Some(rest))
    }
}

/// Opens a sequence directory containing `manifest.txt` and its frame files.
pub fn open_sequence(dir: impl AsRef<Path>) -> Result<FrameSource> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.is_file() {
        return Err(Error::MissingManifest(dir.to_path_buf()));
    }
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest = SequenceManifest::parse(&text)?;
    Ok(FrameSource {
        dir: dir.to_path_buf(),
        manifest,
        next: 0,
    })
}

/// Writes frames as `frame_NNNNNN.pgm` plus a manifest; returns the manifest.
pub fn write_sequence(
    dir: impl AsRef<Path>,
    mut manifest: SequenceManifest,
    frames: &[DepthFrame],
) -> Result<SequenceManifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    manifest.frames.clear();
    for (i, f) in frames.iter().enumerate() {
        if f.dims() != (manifest.width, manifest.height) {
            return Err(Error::FrameDimensions {
                index: i,
                expected_w: manifest.width,
                expected_h: manifest.height,
                got_w: f.width,
                got_h: f.height,
            });
        }
        let name = format!("frame_{i:06}.pgm");
        let path = dir.join(&name);
        fs::write(&path, f.to_pgm()).map_err(|e| Error::io(&path, e))?;
        manifest.frames.push(name);
    }
    manifest.validate()?;
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, manifest.to_text()).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
