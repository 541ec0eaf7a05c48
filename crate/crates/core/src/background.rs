//! Farthest-background model with two asynchronous caches.
//!
//! Frames are counted including the initialization frame, so the first
//! update sees `t = 2`. Per frame `t`:
//!
//! 1. `b_c` and `b_2c` absorb the frame by element-wise max.
//! 2. At `t = n_c + k * n_2c` (k >= 1): `b_c <- b_2c`, `b_i <- b_2c`.
//! 3. At `t = k * n_c`: `b_i <- b_c`.
//! 4. Whenever `b_i` was written in steps 2-3, `b_2c` restarts from the frame.
//!
//! Zero (no-return) pixels never take part in the max updates.

use crate::error::{Error, Result};
use crate::frameio::DepthFrame;

pub const DEFAULT_N_C: u32 = 150;
pub const DEFAULT_N_2C: u32 = 500;
pub const DEFAULT_DELTA_DIS_MM: u16 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BackgroundParams {
    pub n_c: u32,
    pub n_2c: u32,
    pub delta_dis: u16,
}

impl Default for BackgroundParams {
    fn default() -> Self {
        Self {
            n_c: DEFAULT_N_C,
            n_2c: DEFAULT_N_2C,
            delta_dis: DEFAULT_DELTA_DIS_MM,
        }
    }
}

impl BackgroundParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_c == 0 {
            return Err(Error::InvalidParameter("n_c must be positive".into()));
        }
        if u64::from(self.n_2c) <= 2 * u64::from(self.n_c) {
            return Err(Error::InvalidParameter(format!(
                "n_2c ({}) must exceed 2 * n_c ({})",
                self.n_2c, self.n_c
            )));
        }
        if self.delta_dis == 0 {
            return Err(Error::InvalidParameter("delta_dis must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackgroundModel {
    width: usize,
    height: usize,
    pub b_i: Vec<u16>,
    pub b_c: Vec<u16>,
    pub b_2c: Vec<u16>,
    params: BackgroundParams,
    frame_counter: u64,
}

impl BackgroundModel {
    pub fn init(frame: &DepthFrame, params: BackgroundParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            width: frame.width,
            height: frame.height,
            b_i: frame.data.clone(),
            b_c: frame.data.clone(),
            b_2c: frame.data.clone(),
            params,
            frame_counter: 0,
        })
    }

    pub fn params(&self) -> &BackgroundParams {
        &self.params
    }

    pub fn frame_counter(&self) -> u64 {
        self.frame_counter
    }

    fn check(&self, frame: &DepthFrame) -> Result<()> {
        if frame.dims() != (self.width, self.height) {
            return Err(Error::DimensionMismatch {
                what: "background model",
                expected: (self.width, self.height),
                got: frame.dims(),
            });
        }
        Ok(())
    }

    pub fn update(&mut self, frame: &DepthFrame) -> Result<()> {
        self.check(frame)?;
        self.frame_counter += 1;
        let t = self.frame_counter + 1;
        let n_c = u64::from(self.params.n_c);
        let n_2c = u64::from(self.params.n_2c);

        for ((c, c2), &d) in self.b_c.iter_mut().zip(self.b_2c.iter_mut()).zip(&frame.data) {
            if d != 0 {
                if d > *c {
                    *c = d;
                }
                if d > *c2 {
                    *c2 = d;
                }
            }
        }

        let long_cycle = t > n_c && (t - n_c).is_multiple_of(n_2c);
        let short_cycle = t.is_multiple_of(n_c);
        if long_cycle {
            self.b_c.copy_from_slice(&self.b_2c);
            self.b_i.copy_from_slice(&self.b_2c);
        }
        if short_cycle {
            self.b_i.copy_from_slice(&self.b_c);
        }
        if long_cycle || short_cycle {
            self.b_2c.copy_from_slice(&frame.data);
        }
        Ok(())
    }

    /// Zeroes pixels within `delta_dis` of the background; no-return pixels
    /// are always zero.
    pub fn extract_foreground(&self, frame: &DepthFrame) -> Result<DepthFrame> {
        self.check(frame)?;
        let delta = self.params.delta_dis;
        let data = frame
            .data
            .iter()
            .zip(&self.b_i)
            .map(|(&d, &b)| if d == 0 || b.abs_diff(d) < delta { 0 } else { d })
            .collect();
        Ok(DepthFrame {
            width: frame.width,
            height: frame.height,
            data,
            index: frame.index,
        })
    }
}
