//! Rolling-shutter motion-blur renderer.
//!
//! Each output row integrates the source image over its own exposure window.
//! At every quadrature time the scene content is displaced by the delta
//! field of the camera rotation (relative to the video's reference
//! rotation), so an output pixel gathers the source at `p - d(p, t)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraModel, DeltaKernel, FieldPoint, RotationSample};
use crate::raster::{DepthMap, RgbImage};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Per-row exposure `t_E`.
    pub exposure_ms: f64,
    pub row_transfer_us: f64,
    pub frames: usize,
    /// Exposure onset on the trajectory clock; drawn from `seed` when unset.
    pub onset_ms: Option<f64>,
    /// Time quadrature step; defaults to the trajectory sampling interval.
    pub integral_step_ms: Option<f64>,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            exposure_ms: 60.0,
            row_transfer_us: 4.0,
            frames: 30,
            onset_ms: None,
            integral_step_ms: None,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn row_transfer_ms(&self) -> f64 {
        self.row_transfer_us * 1e-3
    }

    /// Exposure plus full readout of `height` rows; no idle gap.
    pub fn frame_period_ms(&self, height: usize) -> f64 {
        self.exposure_ms + height as f64 * self.row_transfer_ms()
    }

    /// Trajectory time needed from onset to the end of the last row of the last frame.
    pub fn capture_span_ms(&self, height: usize) -> f64 {
        self.frames as f64 * self.frame_period_ms(height)
    }

    pub fn step_ms(&self, traj: &Trajectory) -> f64 {
        self.integral_step_ms.unwrap_or(traj.sampling_interval())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.exposure_ms.is_finite() && self.exposure_ms > 0.0) {
            return Err(Error::Argument(format!(
                "exposure must be positive, got {} ms",
                self.exposure_ms
            )));
        }
        if !(self.row_transfer_us.is_finite() && self.row_transfer_us >= 0.0) {
            return Err(Error::Argument(format!(
                "row transfer time must be non-negative, got {} µs",
                self.row_transfer_us
            )));
        }
        if self.frames == 0 {
            return Err(Error::Argument("at least one frame is required".into()));
        }
        if let Some(step) = self.integral_step_ms {
            if !(step.is_finite() && step > 0.0) {
                return Err(Error::Argument(format!(
                    "quadrature step must be positive, got {step} ms"
                )));
            }
        }
        if let Some(onset) = self.onset_ms {
            if !onset.is_finite() {
                return Err(Error::Argument(format!(
                    "onset must be finite, got {onset}"
                )));
            }
        }
        Ok(())
    }

    fn validate_step(&self, step: f64) -> Result<()> {
        if !(step > 0.0) || step > self.exposure_ms / 4.0 {
            return Err(Error::Argument(format!(
                "quadrature step {step} ms must be positive and at most a quarter of the {} ms exposure",
                self.exposure_ms
            )));
        }
        Ok(())
    }

    /// The explicit onset, or a seeded uniform draw over the admissible range.
    pub fn resolve_onset(&self, traj: &Trajectory, height: usize) -> Result<f64> {
        let span = self.capture_span_ms(height);
        let latest = traj.end() - span;
        if latest < traj.start() {
            return Err(Error::Range {
                what: "required capture span (ms)",
                value: span,
                start: 0.0,
                end: traj.duration(),
            });
        }
        match self.onset_ms {
            Some(onset) => {
                if onset < traj.start() || onset > latest {
                    Err(Error::Range {
                        what: "exposure onset (ms)",
                        value: onset,
                        start: traj.start(),
                        end: latest,
                    })
                } else {
                    Ok(onset)
                }
            }
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                if latest == traj.start() {
                    Ok(latest)
                } else {
                    Ok(rng.random_range(traj.start()..=latest))
                }
            }
        }
    }

    /// Time at which a frame's pose is read: mid-exposure of the row through
    /// the principal point.
    pub fn reference_time(&self, frame_start: f64, cam: &CameraModel) -> f64 {
        frame_start + cam.principal_point[1] * self.row_transfer_ms() + 0.5 * self.exposure_ms
    }
}

/// Rendered video with its timing.
#[derive(Debug, Clone)]
pub struct VideoFrames {
    pub frames: Vec<RgbImage>,
    pub frame_start_times: Vec<f64>,
    pub reference_times: Vec<f64>,
    /// Resolved config: `onset_ms` and `integral_step_ms` are always set.
    pub config: SimConfig,
}

impl VideoFrames {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn onset_ms(&self) -> f64 {
        self.frame_start_times[0]
    }
}

/// Per-pixel depth divided by the on-axis depth, invalid pixels filled.
pub fn depth_ratios(depth: &DepthMap, l_on: f64) -> Vec<f64> {
    let owned;
    let map = if depth.is_fully_valid() {
        depth
    } else {
        owned = depth.filled();
        &owned
    };
    map.raw_mm().iter().map(|&d| d as f64 / l_on).collect()
}

/// Trapezoid nodes `(offset, weight)` over `[0, length]`; the last step may be short.
pub fn trapezoid_nodes(length: f64, step: f64) -> Vec<(f64, f64)> {
    let n = ((length / step) - 1e-9).ceil().max(1.0) as usize;
    let mut nodes: Vec<(f64, f64)> = (0..=n)
        .map(|j| ((j as f64 * step).min(length), 0.0))
        .collect();
    for j in 0..n {
        let h = nodes[j + 1].0 - nodes[j].0;
        nodes[j].1 += 0.5 * h;
        nodes[j + 1].1 += 0.5 * h;
    }
    nodes
}

struct Scene<'a> {
    rgb: &'a RgbImage,
    ratios: Vec<f64>,
    l_on: f64,
    cam: &'a CameraModel,
}

impl<'a> Scene<'a> {
    fn new(rgb: &'a RgbImage, depth: &DepthMap, cam: &'a CameraModel) -> Result<Self> {
        cam.validate()?;
        if rgb.width() != cam.width || rgb.height() != cam.height {
            return Err(Error::Argument(format!(
                "image is {}x{} but the camera is {}x{}",
                rgb.width(),
                rgb.height(),
                cam.width,
                cam.height
            )));
        }
        let l_on = cam.on_axis_depth(depth)?;
        Ok(Self {
            rgb,
            ratios: depth_ratios(depth, l_on),
            l_on,
            cam,
        })
    }

    fn render(
        &self,
        traj: &Trajectory,
        cfg: &SimConfig,
        step: f64,
        frame_start: f64,
        reference: &RotationSample,
    ) -> Result<RgbImage> {
        let (w, h) = (self.cam.width, self.cam.height);
        let rt = cfg.row_transfer_ms();
        let last = frame_start + (h - 1) as f64 * rt + cfg.exposure_ms;
        for t in [frame_start, last] {
            if !traj.contains(t) {
                return Err(Error::Range {
                    what: "exposure time (ms)",
                    value: t,
                    start: traj.start(),
                    end: traj.end(),
                });
            }
        }
        let nodes = trapezoid_nodes(cfg.exposure_ms, step);
        let inv_te = 1.0 / cfg.exposure_ms;
        let [cx, cy] = self.cam.principal_point;
        let mut out = vec![0.0f32; w * h * 3];
        out.par_chunks_mut(w * 3)
            .enumerate()
            .try_for_each(|(r, row_out)| -> Result<()> {
                let row_start = frame_start + r as f64 * rt;
                let base = self.rgb.row(r);
                let mut acc = vec![0.0f64; w * 3];
                let oy = r as f64 - cy;
                let ratios = &self.ratios[r * w..(r + 1) * w];
                for &(offset, weight) in &nodes {
                    let rot = traj.sample_at(row_start + offset)?.minus(reference);
                    let kernel = DeltaKernel::new(&rot, self.l_on, self.cam);
                    let wk = weight * inv_te;
                    for (x, a) in acc.chunks_exact_mut(3).enumerate() {
                        let ox = x as f64 - cx;
                        let d = kernel.displacement(ox, oy, ratios[x]).map_err(|den| {
                            Error::Singularity {
                                index: r * w + x,
                                message: format!("off-axis denominator {den:e} while rendering"),
                            }
                        })?;
                        let s = self.rgb.sample_bilinear(x as f64 - d[0], r as f64 - d[1]);
                        let b = &base[x * 3..x * 3 + 3];
                        for c in 0..3 {
                            a[c] += wk * (s[c] - b[c]) as f64;
                        }
                    }
                }
                for ((o, a), b) in row_out.iter_mut().zip(&acc).zip(base) {
                    *o = (*b as f64 + a).clamp(0.0, 1.0) as f32;
                }
                Ok(())
            })?;
        RgbImage::new(w, h, out)
    }
}

/// Render one frame whose first row starts exposing at `frame_start`.
/// Displacements are taken relative to the rotation `reference`.
pub fn render_frame(
    rgb: &RgbImage,
    depth: &DepthMap,
    traj: &Trajectory,
    cam: &CameraModel,
    cfg: &SimConfig,
    frame_start: f64,
    reference: &RotationSample,
) -> Result<RgbImage> {
    cfg.validate()?;
    let step = cfg.step_ms(traj);
    cfg.validate_step(step)?;
    Scene::new(rgb, depth, cam)?.render(traj, cfg, step, frame_start, reference)
}

/// Render `cfg.frames` consecutive frames. All displacements are relative
/// to the rotation at the first frame's reference time.
pub fn render_video(
    rgb: &RgbImage,
    depth: &DepthMap,
    traj: &Trajectory,
    cam: &CameraModel,
    cfg: &SimConfig,
) -> Result<VideoFrames> {
    cfg.validate()?;
    let step = cfg.step_ms(traj);
    cfg.validate_step(step)?;
    let scene = Scene::new(rgb, depth, cam)?;
    let onset = cfg.resolve_onset(traj, cam.height)?;
    let period = cfg.frame_period_ms(cam.height);
    let starts: Vec<f64> = (0..cfg.frames).map(|k| onset + k as f64 * period).collect();
    let refs: Vec<f64> = starts.iter().map(|&s| cfg.reference_time(s, cam)).collect();
    let reference = traj.sample_at(refs[0])?;
    let frames = starts
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            scene
                .render(traj, cfg, step, s, &reference)
                .map_err(|e| e.in_frame(k))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VideoFrames {
        frames,
        frame_start_times: starts,
        reference_times: refs,
        config: SimConfig {
            onset_ms: Some(onset),
            integral_step_ms: Some(step),
            ..cfg.clone()
        },
    })
}

/// Arc length (pixels) of the displacement path of `point` over `[t0, t1]`,
/// sampled at the trajectory's own interval plus both window ends.
pub fn compute_blur_extent(
    traj: &Trajectory,
    cam: &CameraModel,
    l_on: f64,
    point: &FieldPoint,
    t0: f64,
    t1: f64,
) -> Result<f64> {
    if !(t1 >= t0) {
        return Err(Error::Argument(format!("empty window [{t0}, {t1}]")));
    }
    let origin = traj.sample_at(t0)?;
    traj.sample_at(t1)?;
    let mut times = vec![t0];
    times.extend(traj.times().into_iter().filter(|&t| t > t0 && t < t1));
    times.push(t1);
    let ratio = point.depth / l_on;
    let mut prev = [0.0, 0.0];
    let mut length = 0.0;
    for &t in &times[1..] {
        let rot = traj.sample_at(t)?.minus(&origin);
        let d = DeltaKernel::new(&rot, l_on, cam)
            .displacement(point.px, point.py, ratio)
            .map_err(|den| Error::Singularity {
                index: 0,
                message: format!("off-axis denominator {den:e} along the blur path"),
            })?;
        length += (d[0] - prev[0]).hypot(d[1] - prev[1]);
        prev = d;
    }
    Ok(length)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::off_axis_delta;
    use crate::trajectory::TrajectoryLabel;

    fn cam(w: usize, h: usize) -> CameraModel {
        CameraModel::telephoto_reference(w, h).unwrap()
    }

    fn texture(w: usize, h: usize) -> RgbImage {
        RgbImage::from_fn(w, h, |x, y| {
            let (x, y) = (x as f32, y as f32);
            [
                0.5 + 0.4 * (0.31 * x + 0.17 * y).sin(),
                0.5 + 0.4 * (0.23 * y - 0.11 * x).cos(),
                0.5 + 0.3 * (0.05 * x * y).sin(),
            ]
        })
    }

    fn ramp(alpha_rate: f64, beta_rate: f64, gamma_rate: f64, ms: f64) -> Trajectory {
        Trajectory::from_fn(
            0.0,
            2.0,
            (ms / 2.0) as usize + 1,
            TrajectoryLabel::DenseGroundTruth,
            |t| [alpha_rate * t, beta_rate * t, gamma_rate * t],
        )
        .unwrap()
    }

    fn small_cfg(frames: usize) -> SimConfig {
        SimConfig {
            exposure_ms: 20.0,
            row_transfer_us: 4.0,
            frames,
            onset_ms: Some(0.0),
            integral_step_ms: None,
            seed: 1,
        }
    }

    #[test]
    fn frame_period_and_span_for_reference_protocol() {
        let cfg = SimConfig::default();
        assert!((cfg.frame_period_ms(518) - 62.072).abs() < 1e-12);
        assert!((cfg.capture_span_ms(518) - 1862.16).abs() < 1e-9);
    }

    #[test]
    fn trapezoid_weights_sum_to_length() {
        for (len, step) in [(60.0, 2.0), (60.0, 7.0), (1.0, 0.25)] {
            let nodes = trapezoid_nodes(len, step);
            let total: f64 = nodes.iter().map(|n| n.1).sum();
            assert!((total - len).abs() < 1e-12);
            assert_eq!(nodes.last().unwrap().0, len);
        }
        assert_eq!(trapezoid_nodes(60.0, 2.0).len(), 31);
    }

    #[test]
    fn zero_trajectory_is_identity() {
        let (w, h) = (40, 30);
        let img = texture(w, h);
        let depth = DepthMap::from_fn(w, h, |x, _| 1500.0 + 30.0 * x as f32).unwrap();
        let traj = ramp(0.0, 0.0, 0.0, 400.0);
        let v = render_video(&img, &depth, &traj, &cam(w, h), &small_cfg(3)).unwrap();
        for f in &v.frames {
            assert_eq!(f, &img);
        }
    }

    #[test]
    fn constant_rotation_is_a_single_warp() {
        let (w, h) = (32, 24);
        let img = texture(w, h);
        let depth = DepthMap::uniform(w, h, 2000.0).unwrap();
        let c = cam(w, h);
        let traj = Trajectory::from_fn(0.0, 2.0, 100, TrajectoryLabel::DenseGroundTruth, |_| {
            [3e-4, -2e-4, 1e-3]
        })
        .unwrap();
        let zero = RotationSample::default();
        let out = render_frame(&img, &depth, &traj, &c, &small_cfg(1), 0.0, &zero).unwrap();
        let rot = RotationSample::angles(0.0, 3e-4, -2e-4, 1e-3);
        let kernel = DeltaKernel::new(&rot, 2000.0, &c);
        let warped = RgbImage::from_fn(w, h, |x, y| {
            let [ox, oy] = c.offset(x as f64, y as f64);
            let d = kernel.displacement(ox, oy, 1.0).unwrap();
            img.sample_bilinear(x as f64 - d[0], y as f64 - d[1])
        });
        assert!(out.max_abs_diff(&warped) < 1e-5);
    }

    #[test]
    fn uniform_input_stays_uniform() {
        let (w, h) = (24, 24);
        let img = RgbImage::filled(w, h, [0.3, 0.6, 0.9]);
        let depth = DepthMap::from_fn(w, h, |x, y| 900.0 + (x * y) as f32).unwrap();
        let traj = ramp(5e-5, -4e-5, 1e-5, 300.0);
        let v = render_video(&img, &depth, &traj, &cam(w, h), &small_cfg(2)).unwrap();
        for f in &v.frames {
            assert!(f.max_abs_diff(&img) < 1e-6);
        }
    }

    #[test]
    fn linear_pitch_smears_a_dot_into_a_streak() {
        // a bright horizontal line on a dark background; linear pitch moves
        // content along +y at a constant rate during the exposure
        let (w, h) = (21, 41);
        let c = CameraModel::telephoto_reference(w, h).unwrap();
        let img = RgbImage::from_fn(w, h, |_, y| if y == 20 { [1.0; 3] } else { [0.0; 3] });
        let depth = DepthMap::uniform(w, h, 2000.0).unwrap();
        // about 8 px of travel over 20 ms
        let rate = 8.0 / 20.0 / 5000.0 / (2000.0 / 2026.0);
        let traj = ramp(rate, 0.0, 0.0, 100.0);
        let zero = RotationSample::default();
        let cfg = SimConfig {
            row_transfer_us: 0.0,
            integral_step_ms: Some(0.05),
            ..small_cfg(1)
        };
        let out = render_frame(&img, &depth, &traj, &c, &cfg, 0.0, &zero).unwrap();
        let col: Vec<f32> = (0..h).map(|y| out.pixel(10, y)[0]).collect();
        let mass: f32 = col.iter().sum();
        assert!((mass - 1.0).abs() < 1e-3);
        // interior of the streak is flat at 1/length
        let len = on_axis_len(&c, rate * 20.0);
        for v in &col[22..27] {
            assert!(
                (v - (1.0 / len) as f32).abs() < 2e-3,
                "{v} vs {}",
                1.0 / len
            );
        }
        assert!(col[19] < 1e-6 && col[30] < 1e-6);
    }

    fn on_axis_len(c: &CameraModel, theta: f64) -> f64 {
        crate::geometry::on_axis_delta(2000.0, theta, c)
            .unwrap()
            .abs()
            / c.pixel_pitch_mm()
    }

    #[test]
    fn rolling_shutter_step_splits_rows() {
        let (w, h) = (16, 40);
        let c = cam(w, h);
        let img = texture(w, h);
        let depth = DepthMap::uniform(w, h, 2000.0).unwrap();
        // 10 µs rows, 4 ms exposure, step at t = 0.2 s
        let step_at = 200.0;
        let traj = Trajectory::from_fn(0.0, 0.5, 1000, TrajectoryLabel::DenseGroundTruth, |t| {
            if t < step_at {
                [0.0; 3]
            } else {
                [2e-4, 0.0, 0.0]
            }
        })
        .unwrap();
        let cfg = SimConfig {
            exposure_ms: 4.0,
            row_transfer_us: 100.0,
            frames: 1,
            onset_ms: Some(0.0),
            integral_step_ms: Some(0.5),
            seed: 0,
        };
        let zero = RotationSample::default();
        // rows 0..=20 expose in [r*0.1, r*0.1 + 4] starting at 196.0
        let start = 196.0 - 0.5;
        let out = render_frame(&img, &depth, &traj, &c, &cfg, start, &zero).unwrap();
        let pre = Trajectory::from_fn(0.0, 0.5, 1000, TrajectoryLabel::DenseGroundTruth, |_| {
            [0.0; 3]
        })
        .unwrap();
        let post = Trajectory::from_fn(0.0, 0.5, 1000, TrajectoryLabel::DenseGroundTruth, |_| {
            [2e-4, 0.0, 0.0]
        })
        .unwrap();
        let a = render_frame(&img, &depth, &pre, &c, &cfg, start, &zero).unwrap();
        let b = render_frame(&img, &depth, &post, &c, &cfg, start, &zero).unwrap();
        // rows finishing before 199.5 (the linear ramp starts after the 199.5 sample)
        for r in 0..=h - 1 {
            let row_start = start + r as f64 * 0.1;
            let row_end = row_start + 4.0;
            if row_end <= step_at - 0.5 {
                assert_eq!(out.row(r), a.row(r), "row {r}");
            } else if row_start >= step_at {
                assert_eq!(out.row(r), b.row(r), "row {r}");
            }
        }
        assert_ne!(out.row(h - 1), a.row(h - 1));
    }

    #[test]
    fn onset_is_seeded_and_bounded() {
        let traj = ramp(0.0, 0.0, 0.0, 67140.0);
        let cfg = SimConfig {
            seed: 42,
            ..SimConfig::default()
        };
        let a = cfg.resolve_onset(&traj, 518).unwrap();
        let b = cfg.resolve_onset(&traj, 518).unwrap();
        assert_eq!(a, b);
        assert!((0.0..=65277.84 + 1e-9).contains(&a));
        let late = SimConfig {
            onset_ms: Some(66000.0),
            ..SimConfig::default()
        };
        assert!(matches!(
            late.resolve_onset(&traj, 518),
            Err(Error::Range { .. })
        ));
    }

    #[test]
    fn coarse_step_is_rejected() {
        let (w, h) = (8, 8);
        let cfg = SimConfig {
            integral_step_ms: Some(6.0),
            ..small_cfg(1)
        };
        let r = render_video(
            &texture(w, h),
            &DepthMap::uniform(w, h, 1000.0).unwrap(),
            &ramp(0.0, 0.0, 0.0, 200.0),
            &cam(w, h),
            &cfg,
        );
        assert!(matches!(r, Err(Error::Argument(_))));
    }

    #[test]
    fn blur_extent_of_a_ramp_is_the_endpoint_delta() {
        let c = cam(518, 518);
        let traj = ramp(3e-5, 4e-5, 0.0, 200.0);
        let p = FieldPoint::new(120.0, -80.0, 3100.0, &c).unwrap();
        let ext = compute_blur_extent(&traj, &c, 2000.0, &p, 10.0, 70.0).unwrap();
        let end = RotationSample::angles(0.0, 3e-5 * 60.0, 4e-5 * 60.0, 0.0);
        let d = DeltaKernel::new(&end, 2000.0, &c)
            .displacement(120.0, -80.0, 3100.0 / 2000.0)
            .unwrap();
        assert!((ext - d[0].hypot(d[1])).abs() < 1e-9 * ext);
        let static_traj = ramp(0.0, 0.0, 0.0, 200.0);
        assert_eq!(
            compute_blur_extent(&static_traj, &c, 2000.0, &p, 0.0, 60.0).unwrap(),
            0.0
        );
        // ratio to an on-axis patch follows the off-axis factor
        let on = FieldPoint::new(0.0, 0.0, 2000.0, &c).unwrap();
        let ext_on = compute_blur_extent(&traj, &c, 2000.0, &on, 10.0, 70.0).unwrap();
        let theta = (3e-5f64 * 60.0).hypot(4e-5 * 60.0);
        let y = (120.0 * 0.8 + -80.0 * -0.6) * c.pixel_pitch_mm() * 3100.0 / 26.0;
        let expected = off_axis_delta(2000.0, 3100.0, y, theta, &c).unwrap()
            / crate::geometry::on_axis_delta(2000.0, theta, &c).unwrap();
        assert!((ext / ext_on - expected).abs() < 1e-9 * expected);
    }
}
