//! Seeded synthetic inputs: handheld gyro traces and textured RGB-D scenes.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::raster::{DepthMap, RgbImage};
use crate::trajectory::{Trajectory, TrajectoryLabel};

/// Length of the reference handheld recording.
pub const GYRO_DURATION_MS: f64 = 67_140.0;
pub const GYRO_INTERVAL_MS: f64 = 2.0;

#[derive(Debug, Clone, Copy)]
struct Partial {
    amplitude: f64,
    freq_hz: f64,
    phase: f64,
}

/// Shake spectrum parameters for [`handheld_gyro`].
#[derive(Debug, Clone, PartialEq)]
pub struct ShakeProfile {
    /// Peak amplitude (rad) of the slow sway component, per axis `[α, β, γ]`.
    pub sway_rad: [f64; 3],
    /// Amplitude of the physiological tremor band (8-12 Hz).
    pub tremor_rad: [f64; 3],
    /// Number of sway partials per axis, spread over 0.15-2 Hz.
    pub partials: usize,
}

impl Default for ShakeProfile {
    fn default() -> Self {
        Self {
            sway_rad: [3e-3, 3e-3, 3e-3],
            tremor_rad: [1.5e-5, 1.5e-5, 1e-5],
            partials: 6,
        }
    }
}

/// Handheld-style rotation trace: per axis a seeded sum of sinusoids with a
/// 1/f amplitude falloff plus a weak tremor band.
pub fn handheld_gyro(
    seed: u64,
    duration_ms: f64,
    interval_ms: f64,
    profile: &ShakeProfile,
) -> Result<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut axes: Vec<Vec<Partial>> = Vec::with_capacity(3);
    for axis in 0..3 {
        let mut parts = Vec::new();
        let norm: f64 = (0..profile.partials).map(|k| 1.0 / (k as f64 + 1.0)).sum();
        for k in 0..profile.partials {
            let lo = 0.15 * 1.6f64.powi(k as i32);
            parts.push(Partial {
                amplitude: profile.sway_rad[axis] / norm / (k as f64 + 1.0)
                    * rng.random_range(0.6..1.0),
                freq_hz: rng.random_range(lo..lo * 1.6),
                phase: rng.random_range(0.0..TAU),
            });
        }
        for _ in 0..3 {
            parts.push(Partial {
                amplitude: profile.tremor_rad[axis] * rng.random_range(0.5..1.0),
                freq_hz: rng.random_range(8.0..12.0),
                phase: rng.random_range(0.0..TAU),
            });
        }
        axes.push(parts);
    }
    let count = (duration_ms / interval_ms).round() as usize + 1;
    Trajectory::from_fn(
        0.0,
        interval_ms,
        count,
        TrajectoryLabel::DenseGroundTruth,
        |t| {
            let s = t * 1e-3;
            let eval = |parts: &[Partial]| {
                parts
                    .iter()
                    .map(|p| p.amplitude * (TAU * p.freq_hz * s + p.phase).sin())
                    .sum::<f64>()
            };
            [eval(&axes[0]), eval(&axes[1]), eval(&axes[2])]
        },
    )
}

/// The stand-in for the reference 67.14 s, 2 ms handheld file.
pub fn reference_gyro(seed: u64) -> Result<Trajectory> {
    handheld_gyro(
        seed,
        GYRO_DURATION_MS,
        GYRO_INTERVAL_MS,
        &ShakeProfile::default(),
    )
}

/// Smooth random lattice noise in `[0, 1]`, bilinearly interpolated.
struct ValueNoise {
    cell: f64,
    cols: usize,
    values: Vec<f64>,
}

impl ValueNoise {
    fn new(rng: &mut ChaCha8Rng, width: usize, height: usize, cell: f64) -> Self {
        let cols = (width as f64 / cell).ceil() as usize + 2;
        let rows = (height as f64 / cell).ceil() as usize + 2;
        let values = (0..cols * rows).map(|_| rng.random::<f64>()).collect();
        Self { cell, cols, values }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let (u, v) = (x / self.cell, y / self.cell);
        let (i, j) = (u.floor() as usize, v.floor() as usize);
        let (fu, fv) = (u - i as f64, v - j as f64);
        // smoothstep keeps the gradient continuous across cells
        let (fu, fv) = (fu * fu * (3.0 - 2.0 * fu), fv * fv * (3.0 - 2.0 * fv));
        let g = |a: usize, b: usize| self.values[b * self.cols + a];
        (1.0 - fu) * (1.0 - fv) * g(i, j)
            + fu * (1.0 - fv) * g(i + 1, j)
            + (1.0 - fu) * fv * g(i, j + 1)
            + fu * fv * g(i + 1, j + 1)
    }
}

/// Seeded multi-octave color texture with strong mid-frequency content.
pub fn textured_rgb(seed: u64, width: usize, height: usize) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7e57_u64);
    let octaves: Vec<(ValueNoise, f64)> = [(24.0, 0.4), (9.0, 0.35), (4.5, 0.25)]
        .into_iter()
        .map(|(cell, w)| (ValueNoise::new(&mut rng, width, height, cell), w))
        .collect();
    let tint: Vec<[f64; 3]> = (0..octaves.len())
        .map(|_| {
            [
                rng.random_range(0.6..1.0),
                rng.random_range(0.6..1.0),
                rng.random_range(0.6..1.0),
            ]
        })
        .collect();
    RgbImage::from_fn(width, height, |x, y| {
        let mut c = [0.0f64; 3];
        for ((noise, w), tint) in octaves.iter().zip(&tint) {
            let v = noise.at(x as f64, y as f64);
            for k in 0..3 {
                c[k] += w * tint[k] * v;
            }
        }
        c.map(|v| (0.1 + 0.9 * v).clamp(0.0, 1.0) as f32)
    })
}

/// Smooth depth (mm): a tilted plane plus a few soft bumps, within
/// roughly `[near_mm, far_mm]`.
pub fn smooth_depth(
    seed: u64,
    width: usize,
    height: usize,
    near_mm: f64,
    far_mm: f64,
) -> Result<DepthMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xdeb7_u64);
    let mid = 0.5 * (near_mm + far_mm);
    let span = far_mm - near_mm;
    let gx = rng.random_range(-0.3..0.3) * span;
    let gy = rng.random_range(-0.3..0.3) * span;
    let bumps: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.random_range(0.0..width as f64),
                rng.random_range(0.0..height as f64),
                rng.random_range(0.1..0.3) * width.min(height) as f64,
                rng.random_range(-0.2..0.2) * span,
            )
        })
        .collect();
    let (w, h) = (width as f64, height as f64);
    DepthMap::from_fn(width, height, |x, y| {
        let (u, v) = (x as f64 / w - 0.5, y as f64 / h - 0.5);
        let mut d = mid + gx * u + gy * v;
        for &(bx, by, r, amp) in &bumps {
            let q = ((x as f64 - bx).powi(2) + (y as f64 - by).powi(2)) / (r * r);
            d += amp * (-q).exp();
        }
        d.clamp(near_mm, far_mm) as f32
    })
}

/// One textured RGB-D fixture.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub rgb: RgbImage,
    pub depth: DepthMap,
}

pub fn textured_fixture(seed: u64, width: usize, height: usize) -> Result<Fixture> {
    Ok(Fixture {
        rgb: textured_rgb(seed, width, height),
        depth: smooth_depth(seed, width, height, 1500.0, 4500.0)?,
    })
}
