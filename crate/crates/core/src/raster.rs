//! In-memory rasters: linear RGB frames and metric depth maps.

use crate::error::{Error, Result};

/// Interleaved RGB image with channel values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Argument("image dimensions must be non-zero".into()));
        }
        if data.len() != width * height * 3 {
            return Err(Error::Argument(format!(
                "expected {} channel values for a {width}x{height} image, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f32; 3],
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn row(&self, y: usize) -> &[f32] {
        &self.data[y * self.width * 3..(y + 1) * self.width * 3]
    }

    /// Bilinear lookup with clamp-to-edge addressing.
    ///
    /// Exact at integer coordinates: the three zero-weight taps contribute
    /// exactly nothing.
    #[inline]
    pub fn sample_bilinear(&self, x: f64, y: f64) -> [f32; 3] {
        let (x0, x1, fx) = clamp_taps(x, self.width);
        let (y0, y1, fy) = clamp_taps(y, self.height);
        let w = self.width;
        let i00 = (y0 * w + x0) * 3;
        let i10 = (y0 * w + x1) * 3;
        let i01 = (y1 * w + x0) * 3;
        let i11 = (y1 * w + x1) * 3;
        let fx = fx as f32;
        let fy = fy as f32;
        let w00 = (1.0 - fx) * (1.0 - fy);
        let w10 = fx * (1.0 - fy);
        let w01 = (1.0 - fx) * fy;
        let w11 = fx * fy;
        let d = &self.data;
        let mut out = [0.0f32; 3];
        for (c, o) in out.iter_mut().enumerate() {
            *o = w00 * d[i00 + c] + w10 * d[i10 + c] + w01 * d[i01 + c] + w11 * d[i11 + c];
        }
        out
    }

    /// Rec. 601 luma, one value per pixel.
    pub fn to_gray(&self) -> Vec<f32> {
        self.data
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect()
    }

    /// Largest absolute per-channel difference to `other`.
    pub fn max_abs_diff(&self, other: &RgbImage) -> f32 {
        assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }

    /// Quantize to 8 bits per channel (round to nearest).
    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        let data = bytes.iter().map(|&b| b as f32 / 255.0).collect();
        Self::new(width, height, data)
    }
}

#[inline]
pub(crate) fn clamp_taps(v: f64, len: usize) -> (usize, usize, f64) {
    let max = (len - 1) as f64;
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, max) };
    let i0 = v.floor();
    let frac = v - i0;
    let i0 = i0 as usize;
    let i1 = (i0 + 1).min(len - 1);
    (i0, i1, frac)
}

/// Per-pixel metric depth, stored in millimeters, with a validity mask.
///
/// A pixel is valid when its depth is finite and strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    depth_mm: Vec<f32>,
    valid: Vec<bool>,
}

impl DepthMap {
    /// Build from raw millimeter values; non-positive or non-finite entries
    /// are marked invalid. Fails when nothing is valid.
    pub fn from_mm(width: usize, height: usize, depth_mm: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Argument(
                "depth map dimensions must be non-zero".into(),
            ));
        }
        if depth_mm.len() != width * height {
            return Err(Error::Argument(format!(
                "expected {} depth values for a {width}x{height} map, got {}",
                width * height,
                depth_mm.len()
            )));
        }
        let valid: Vec<bool> = depth_mm.iter().map(|d| d.is_finite() && *d > 0.0).collect();
        if !valid.iter().any(|v| *v) {
            return Err(Error::Data("depth map has no valid pixels".into()));
        }
        Ok(Self {
            width,
            height,
            depth_mm,
            valid,
        })
    }

    pub fn uniform(width: usize, height: usize, depth_mm: f32) -> Result<Self> {
        Self::from_mm(width, height, vec![depth_mm; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::from_mm(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn raw_mm(&self) -> &[f32] {
        &self.depth_mm
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn is_fully_valid(&self) -> bool {
        self.valid.iter().all(|v| *v)
    }

    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let i = y * self.width + x;
        self.valid[i].then(|| self.depth_mm[i] as f64)
    }

    /// Replace invalid pixels by the nearest valid depth along their row.
    /// Rows without any valid pixel copy the nearest row that has one.
    pub fn filled(&self) -> DepthMap {
        let w = self.width;
        let mut data = self.depth_mm.clone();
        let mut row_ok = vec![false; self.height];
        for (y, ok) in row_ok.iter_mut().enumerate() {
            let valid = &self.valid[y * w..(y + 1) * w];
            let row = &mut data[y * w..(y + 1) * w];
            let idx: Vec<usize> = (0..w).filter(|&x| valid[x]).collect();
            if idx.is_empty() {
                continue;
            }
            *ok = true;
            for x in 0..w {
                if valid[x] {
                    continue;
                }
                let pos = idx.partition_point(|&i| i < x);
                let left = pos.checked_sub(1).map(|p| idx[p]);
                let right = idx.get(pos).copied();
                let best = match (left, right) {
                    (Some(l), Some(r)) => {
                        if x - l <= r - x {
                            l
                        } else {
                            r
                        }
                    }
                    (Some(l), None) => l,
                    (None, Some(r)) => r,
                    (None, None) => unreachable!("row has a valid pixel"),
                };
                row[x] = self.depth_mm[y * w + best];
            }
        }
        for y in 0..self.height {
            if row_ok[y] {
                continue;
            }
            let src = (0..self.height)
                .filter(|&r| row_ok[r])
                .min_by_key(|&r| (r.abs_diff(y), r))
                .expect("at least one valid row");
            let (a, b) = (src * w, y * w);
            let copy: Vec<f32> = data[a..a + w].to_vec();
            data[b..b + w].copy_from_slice(&copy);
        }
        DepthMap {
            width: w,
            height: self.height,
            valid: vec![true; data.len()],
            depth_mm: data,
        }
    }

    /// Bilinear depth lookup (clamp-to-edge). Intended for filled maps;
    /// invalid taps contribute their stored raw value.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let (x0, x1, fx) = clamp_taps(x, self.width);
        let (y0, y1, fy) = clamp_taps(y, self.height);
        let w = self.width;
        let d = |xx: usize, yy: usize| self.depth_mm[yy * w + xx] as f64;
        (1.0 - fx) * (1.0 - fy) * d(x0, y0)
            + fx * (1.0 - fy) * d(x1, y0)
            + (1.0 - fx) * fy * d(x0, y1)
            + fx * fy * d(x1, y1)
    }
}
