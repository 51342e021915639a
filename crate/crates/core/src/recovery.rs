//! Per-frame rotation recovery from a displacement field and depth.
//!
//! Roll comes first, from the vertical displacements along the grid's
//! center row: after removing the tilt-induced part, they are `x sin γ`.
//! With roll removed, each point's residual displacement fixes the tilt
//! direction and, by solving the off-axis relation for `tan θ`, its
//! magnitude; yaw is averaged over the center column and pitch over all
//! points. The three stages are repeated, feeding the latest tilt back into
//! the roll stage, until the estimates stop changing.

use ndarray::{Array1, Zip};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraModel, DeltaKernel, RotationSample};
use crate::raster::DepthMap;
use crate::tracker::{DeltaField, QueryGrid};
use crate::trajectory::{Trajectory, TrajectoryLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightTaper {
    /// `w(r) = max(0, 1 - r / r_max)`, `r_max` the outermost grid radius.
    LinearWithFieldExtent,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointSet {
    /// Lattice row through the principal point (`y = 0`).
    CenterRow,
    /// Lattice column through the principal point (`x = 0`).
    CenterColumn,
    All,
}

impl PointSet {
    fn contains(self, lattice: [i32; 2]) -> bool {
        match self {
            PointSet::CenterRow => lattice[1] == 0,
            PointSet::CenterColumn => lattice[0] == 0,
            PointSet::All => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    pub weight_taper: WeightTaper,
    /// Points below this confidence get zero weight.
    pub min_confidence: f64,
    pub roll_points: PointSet,
    pub yaw_points: PointSet,
    pub pitch_points: PointSet,
    /// Upper bound on roll/yaw/pitch passes per frame.
    pub max_sweeps: usize,
    /// Passes stop once no angle moves by more than this (rad).
    pub tolerance: f64,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            weight_taper: WeightTaper::LinearWithFieldExtent,
            min_confidence: 0.3,
            roll_points: PointSet::CenterRow,
            yaw_points: PointSet::CenterColumn,
            pitch_points: PointSet::All,
            max_sweeps: 50,
            tolerance: 1e-13,
        }
    }
}

impl RecoveryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(Error::Argument(format!(
                "min_confidence must lie in [0, 1], got {}",
                self.min_confidence
            )));
        }
        if self.max_sweeps == 0 {
            return Err(Error::Argument("max_sweeps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-point quantities that do not change between frames.
#[derive(Debug, Clone)]
pub struct RecoveryGeometry {
    pub ox: Array1<f64>,
    pub oy: Array1<f64>,
    /// Point depth over on-axis depth.
    pub depth_ratio: Array1<f64>,
    /// Field-extent taper, before confidence.
    pub taper: Array1<f64>,
    pub lattice: Vec<[i32; 2]>,
    pub l_on: f64,
    /// On-axis displacement (px) per unit `tan θ`, sign dropped.
    pub gain: f64,
    /// Pixel pitch over focal length.
    pub height_scale: f64,
    cam: CameraModel,
}

impl RecoveryGeometry {
    pub fn new(
        grid: &QueryGrid,
        depth: &DepthMap,
        cam: &CameraModel,
        taper: WeightTaper,
    ) -> Result<Self> {
        let filled = if depth.is_fully_valid() {
            depth.clone()
        } else {
            depth.filled()
        };
        let l_on = cam.on_axis_depth(&filled)?;
        let n = grid.len();
        let offsets = grid.offsets();
        let ox = Array1::from_iter(offsets.iter().map(|o| o[0]));
        let oy = Array1::from_iter(offsets.iter().map(|o| o[1]));
        let depth_ratio = Array1::from_iter(
            grid.points
                .iter()
                .map(|p| filled.sample_bilinear(p[0], p[1]) / l_on),
        );
        let radius: Array1<f64> = Zip::from(&ox).and(&oy).map_collect(|x, y| x.hypot(*y));
        let r_max = radius.iter().cloned().fold(0.0, f64::max);
        let interior = radius.iter().any(|&r| r < r_max);
        let taper = match taper {
            WeightTaper::LinearWithFieldExtent if r_max > 0.0 && interior => {
                radius.mapv(|r| (1.0 - r / r_max).max(0.0))
            }
            _ => Array1::ones(n),
        };
        let f = cam.focal_length_mm;
        Ok(Self {
            ox,
            oy,
            depth_ratio,
            taper,
            lattice: grid.lattice.clone(),
            l_on,
            gain: l_on * f / ((l_on + f) * cam.pixel_pitch_mm()),
            height_scale: cam.pixel_pitch_mm() / f,
            cam: cam.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.ox.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ox.is_empty()
    }

    /// Stage weights: confidence, times the taper when `tapered`; zero below
    /// `min_confidence` or outside `set`. Falls back to uniform weights over the usable points
    /// when the taper zeroes them all.
    fn weights(
        &self,
        set: PointSet,
        conf: &[f64],
        tapered: bool,
        cfg: &RecoveryConfig,
    ) -> (Vec<f64>, usize) {
        let usable: Vec<bool> = (0..self.len())
            .map(|i| {
                set.contains(self.lattice[i]) && conf[i] >= cfg.min_confidence && conf[i] > 0.0
            })
            .collect();
        let mut w: Vec<f64> = (0..self.len())
            .map(|i| match (usable[i], tapered) {
                (false, _) => 0.0,
                (true, true) => self.taper[i] * conf[i],
                (true, false) => conf[i],
            })
            .collect();
        let count = usable.iter().filter(|u| **u).count();
        if count > 0 && w.iter().sum::<f64>() == 0.0 {
            w = usable.iter().map(|&u| if u { 1.0 } else { 0.0 }).collect();
        }
        (w, count)
    }

    /// Tilt-only displacement of point `i` for pitch `alpha` and yaw `beta`.
    fn tilt_at(&self, kernel: &DeltaKernel, i: usize) -> [f64; 2] {
        kernel
            .tilt(self.ox[i], self.oy[i], self.depth_ratio[i])
            .unwrap_or([0.0, 0.0])
    }

    fn roll_at(&self, gamma: f64, i: usize) -> [f64; 2] {
        let (s, c) = gamma.sin_cos();
        let (x, y) = (self.ox[i], self.oy[i]);
        [x * c - y * s - x, x * s + y * c - y]
    }

    /// Solve one point's tilt-only displacement `r` for `(alpha, beta)`.
    /// `None` when the inversion is degenerate.
    pub fn invert_point(&self, i: usize, r: [f64; 2]) -> Option<[f64; 2]> {
        let m = r[0].hypot(r[1]);
        if m == 0.0 {
            return Some([0.0, 0.0]);
        }
        if !m.is_finite() {
            return None;
        }
        let lam = self.depth_ratio[i];
        let (ux, uy) = (r[0] / m, r[1] / m);
        let y0 = (self.ox[i] * ux + self.oy[i] * uy) * self.height_scale * lam;
        let a = lam - y0 * y0;
        if a.abs() < 1e-12 {
            return None;
        }
        let s = -a.signum();
        let y = s * y0;
        let den = self.gain * a.abs() + m * lam * y;
        if !(den > 1e-12 * self.gain) {
            return None;
        }
        let theta = (m * lam * lam / den).atan();
        let (cx, cy) = (s * ux, s * uy);
        Some([-theta * cy, theta * cx])
    }
}

fn weighted_mean(values: &[(f64, f64)]) -> Option<f64> {
    let (mut sw, mut sv) = (0.0, 0.0);
    for &(w, v) in values {
        sw += w;
        sv += w * v;
    }
    (sw > 0.0).then(|| sv / sw)
}

/// Roll from the center-row vertical displacements, confidence-weighted.
/// The field taper is not applied here: the slope is carried by the outer
/// points.
///
/// `tilt_prior = Some([alpha, beta])` removes that tilt's exact displacement
/// first. The residual is fitted by weighted least squares as
/// `a / depth_ratio + x sin γ`; the first term absorbs whatever tilt remains.
pub fn estimate_roll(
    geom: &RecoveryGeometry,
    deltas: &[[f64; 2]],
    conf: &[f64],
    tilt_prior: Option<[f64; 2]>,
    cfg: &RecoveryConfig,
) -> Result<f64> {
    let (w, count) = geom.weights(cfg.roll_points, conf, false, cfg);
    if count < 3 {
        return Err(Error::InsufficientData(format!(
            "roll needs at least 3 confident points on the center row, found {count}"
        )));
    }
    let kernel = tilt_prior.map(|[a, b]| {
        DeltaKernel::new(
            &RotationSample::angles(0.0, a, b, 0.0),
            geom.l_on,
            &geom.cam,
        )
    });
    let (mut sgg, mut sgx, mut sxx, mut sgr, mut sxr) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..geom.len() {
        if w[i] == 0.0 {
            continue;
        }
        let prior = kernel.as_ref().map_or(0.0, |k| geom.tilt_at(k, i)[1]);
        let r = deltas[i][1] - prior;
        let g = 1.0 / geom.depth_ratio[i];
        let x = geom.ox[i];
        sgg += w[i] * g * g;
        sgx += w[i] * g * x;
        sxx += w[i] * x * x;
        sgr += w[i] * g * r;
        sxr += w[i] * x * r;
    }
    let det = sgg * sxx - sgx * sgx;
    if !(det > 1e-12 * sgg * sxx) {
        return Err(Error::InsufficientData(
            "center-row points do not separate roll from tilt".into(),
        ));
    }
    let slope = (sgg * sxr - sgx * sgr) / det;
    Ok(slope.clamp(-1.0, 1.0).asin())
}

/// Per-point `(alpha, beta)` of roll-corrected residuals, weighted by stage.
fn tilt_stage(
    geom: &RecoveryGeometry,
    deltas: &[[f64; 2]],
    conf: &[f64],
    roll: f64,
    set: PointSet,
    axis: usize,
    cfg: &RecoveryConfig,
) -> Result<f64> {
    let (w, _) = geom.weights(set, conf, true, cfg);
    let samples: Vec<(f64, f64)> = (0..geom.len())
        .filter(|&i| w[i] > 0.0)
        .filter_map(|i| {
            let rr = geom.roll_at(roll, i);
            let r = [deltas[i][0] - rr[0], deltas[i][1] - rr[1]];
            geom.invert_point(i, r).map(|ab| (w[i], ab[axis]))
        })
        .collect();
    weighted_mean(&samples).ok_or_else(|| {
        Error::InsufficientData(format!(
            "no usable points for the {} stage",
            if axis == 0 { "pitch" } else { "yaw" }
        ))
    })
}

/// Yaw from the center column, after removing the roll displacement.
pub fn estimate_yaw(
    geom: &RecoveryGeometry,
    deltas: &[[f64; 2]],
    conf: &[f64],
    roll: f64,
    cfg: &RecoveryConfig,
) -> Result<f64> {
    tilt_stage(geom, deltas, conf, roll, cfg.yaw_points, 1, cfg)
}

/// Pitch over all points, after removing the roll displacement. Each point
/// is inverted with both displacement components, which resolves the
/// pitch-yaw coupling locally.
pub fn estimate_pitch(
    geom: &RecoveryGeometry,
    deltas: &[[f64; 2]],
    conf: &[f64],
    roll: f64,
    cfg: &RecoveryConfig,
) -> Result<f64> {
    tilt_stage(geom, deltas, conf, roll, cfg.pitch_points, 0, cfg)
}

/// `[alpha, beta, gamma]` for one frame.
pub fn recover_frame(
    geom: &RecoveryGeometry,
    deltas: &[[f64; 2]],
    conf: &[f64],
    cfg: &RecoveryConfig,
) -> Result<[f64; 3]> {
    if deltas.len() != geom.len() || conf.len() != geom.len() {
        return Err(Error::Argument(format!(
            "frame has {} deltas and {} confidences for {} grid points",
            deltas.len(),
            conf.len(),
            geom.len()
        )));
    }
    let mut prior = None;
    let mut est = [0.0; 3];
    for sweep in 0..cfg.max_sweeps {
        let gamma = estimate_roll(geom, deltas, conf, prior, cfg)?;
        let beta = estimate_yaw(geom, deltas, conf, gamma, cfg)?;
        let alpha = estimate_pitch(geom, deltas, conf, gamma, cfg)?;
        let next = [alpha, beta, gamma];
        let change = next
            .iter()
            .zip(&est)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        est = next;
        prior = Some([alpha, beta]);
        if sweep > 0 && change <= cfg.tolerance {
            break;
        }
    }
    Ok(est)
}

/// One rotation per frame, at the field's frame times; frame 1 is zero.
pub fn recover_trajectory(
    field: &DeltaField,
    depth: &DepthMap,
    grid: &QueryGrid,
    cam: &CameraModel,
    cfg: &RecoveryConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    field.validate()?;
    if field.n_points() != grid.len() {
        return Err(Error::Argument(format!(
            "delta field has {} points but the half-width {} grid has {}",
            field.n_points(),
            grid.half_width,
            grid.len()
        )));
    }
    let geom = RecoveryGeometry::new(grid, depth, cam, cfg.weight_taper)?;
    let angles = (0..field.n_frames())
        .into_par_iter()
        .map(|t| {
            if t == 0 {
                return Ok([0.0; 3]);
            }
            recover_frame(
                &geom,
                &field.frame_deltas(t),
                &field.frame_confidences(t),
                cfg,
            )
            .map_err(|e| e.in_frame(t))
        })
        .collect::<Result<Vec<_>>>()?;
    let samples = field
        .frame_times
        .iter()
        .zip(&angles)
        .map(|(&t, &[a, b, g])| RotationSample::new(t, a, b, g))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(samples, TrajectoryLabel::SparsePerFrame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{delta_field_with_on_axis, CameraKind, FieldPoint};
    use crate::tracker::make_query_grid;
    use proptest::prelude::*;

    struct Setup {
        cam: CameraModel,
        depth: DepthMap,
        grid: QueryGrid,
        geom: RecoveryGeometry,
        points: Vec<FieldPoint>,
    }

    fn setup(kind: CameraKind, uniform: bool) -> Setup {
        let cam = match kind {
            CameraKind::Telephoto => CameraModel::telephoto_reference(518, 518).unwrap(),
            CameraKind::ShortFocus => CameraModel::short_focus_reference(518, 518).unwrap(),
        };
        let depth = if uniform {
            DepthMap::uniform(518, 518, 2500.0).unwrap()
        } else {
            DepthMap::from_fn(518, 518, |x, y| {
                1500.0 + 4.0 * x as f32 + 2.5 * y as f32 + 300.0 * ((x as f32) * 0.02).sin()
            })
            .unwrap()
        };
        let grid = make_query_grid(&cam, 12, 16).unwrap();
        let geom =
            RecoveryGeometry::new(&grid, &depth, &cam, WeightTaper::LinearWithFieldExtent).unwrap();
        let points = grid
            .points
            .iter()
            .map(|p| FieldPoint::at_pixel(p[0], p[1], &depth, &cam).unwrap())
            .collect();
        Setup {
            cam,
            depth,
            grid,
            geom,
            points,
        }
    }

    fn field(s: &Setup, a: f64, b: f64, g: f64) -> Vec<[f64; 2]> {
        delta_field_with_on_axis(
            &RotationSample::angles(0.0, a, b, g),
            s.geom.l_on,
            &s.cam,
            &s.points,
        )
        .unwrap()
    }

    fn ones(n: usize) -> Vec<f64> {
        vec![1.0; n]
    }

    #[test]
    fn roll_examples() {
        let s = setup(CameraKind::Telephoto, true);
        let cfg = RecoveryConfig::default();
        let c = ones(s.grid.len());
        let pitch = field(&s, 1.5e-3, 0.0, 0.0);
        // pure pitch on uniform depth: the center row moves uniformly
        assert!(
            estimate_roll(&s.geom, &pitch, &c, None, &cfg)
                .unwrap()
                .abs()
                < 1e-15
        );
        let roll = field(&s, 0.0, 0.0, 0.01);
        assert!((estimate_roll(&s.geom, &roll, &c, None, &cfg).unwrap() - 0.01).abs() < 1e-9);
        let both = field(&s, 1.5e-3, 0.0, 0.01);
        assert!((estimate_roll(&s.geom, &both, &c, None, &cfg).unwrap() - 0.01).abs() < 1e-9);
    }

    #[test]
    fn roll_needs_three_points() {
        let s = setup(CameraKind::Telephoto, true);
        let mut c = vec![0.0; s.grid.len()];
        let row: Vec<usize> = (0..s.grid.len())
            .filter(|&i| s.grid.lattice[i][1] == 0)
            .collect();
        c[row[0]] = 1.0;
        c[row[5]] = 1.0;
        let d = field(&s, 0.0, 0.0, 0.01);
        assert!(matches!(
            estimate_roll(&s.geom, &d, &c, None, &RecoveryConfig::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn yaw_and_pitch_examples() {
        let s = setup(CameraKind::Telephoto, false);
        let cfg = RecoveryConfig::default();
        let c = ones(s.grid.len());
        let zero = vec![[0.0, 0.0]; s.grid.len()];
        assert_eq!(estimate_yaw(&s.geom, &zero, &c, 0.0, &cfg).unwrap(), 0.0);
        assert_eq!(estimate_pitch(&s.geom, &zero, &c, 0.0, &cfg).unwrap(), 0.0);
        let yaw = field(&s, 0.0, 2e-3, 0.0);
        assert!((estimate_yaw(&s.geom, &yaw, &c, 0.0, &cfg).unwrap() - 2e-3).abs() < 1e-9);
        let pitch = field(&s, 1.5e-3, 0.0, 0.0);
        assert!((estimate_pitch(&s.geom, &pitch, &c, 0.0, &cfg).unwrap() - 1.5e-3).abs() < 1e-9);
        let both = field(&s, 1.5e-3, 2e-3, 0.0);
        assert!((estimate_pitch(&s.geom, &both, &c, 0.0, &cfg).unwrap() - 1.5e-3).abs() < 1e-9);
        assert!((estimate_yaw(&s.geom, &both, &c, 0.0, &cfg).unwrap() - 2e-3).abs() < 1e-9);
    }

    #[test]
    fn scaled_depth_biases_yaw_as_predicted() {
        // data generated at true depth, inverted assuming 10% deeper everywhere
        let s = setup(CameraKind::ShortFocus, true);
        let yaw = field(&s, 0.0, 2e-3, 0.0);
        let deeper = DepthMap::uniform(518, 518, 2750.0).unwrap();
        let g2 =
            RecoveryGeometry::new(&s.grid, &deeper, &s.cam, WeightTaper::LinearWithFieldExtent)
                .unwrap();
        let cfg = RecoveryConfig::default();
        let est = estimate_yaw(&g2, &yaw, &ones(s.grid.len()), 0.0, &cfg).unwrap();
        let (l, l2, f) = (2500.0, 2750.0, 4.0);
        let predicted = 2e-3 * (l * (l2 + f)) / ((l + f) * l2);
        assert!(est < 2e-3);
        assert!(
            (est - predicted).abs() < 2e-3 * 1e-3,
            "{est} vs {predicted}"
        );
    }

    #[test]
    fn zero_field_gives_zero_trajectory() {
        let s = setup(CameraKind::Telephoto, false);
        let f = DeltaField::zeros(s.grid.len(), vec![0.0, 62.0, 124.0]);
        let tr =
            recover_trajectory(&f, &s.depth, &s.grid, &s.cam, &RecoveryConfig::default()).unwrap();
        assert!(tr.samples().iter().all(|x| x.as_array() == [0.0; 3]));
        assert_eq!(tr.label(), TrajectoryLabel::SparsePerFrame);
    }

    #[test]
    fn confidence_subset_does_not_matter_on_clean_data() {
        let s = setup(CameraKind::Telephoto, false);
        let d = field(&s, 1e-3, -2e-3, 3e-3);
        let cfg = RecoveryConfig::default();
        let full = recover_frame(&s.geom, &d, &ones(s.grid.len()), &cfg).unwrap();
        let c: Vec<f64> = (0..s.grid.len())
            .map(|i| if i % 3 == 1 { 0.0 } else { 1.0 })
            .collect();
        let part = recover_frame(&s.geom, &d, &c, &cfg).unwrap();
        for k in 0..3 {
            assert!((full[k] - part[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn taper_choice_does_not_matter_on_clean_data() {
        let s = setup(CameraKind::ShortFocus, false);
        let d = field(&s, 4e-3, 1e-3, -2e-3);
        let uniform =
            RecoveryGeometry::new(&s.grid, &s.depth, &s.cam, WeightTaper::Uniform).unwrap();
        let cfg = RecoveryConfig::default();
        let a = recover_frame(&s.geom, &d, &ones(s.grid.len()), &cfg).unwrap();
        let b = recover_frame(&uniform, &d, &ones(s.grid.len()), &cfg).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn clean_fields_invert_exactly(
            a in -5e-3f64..5e-3, b in -5e-3f64..5e-3, g in -5e-3f64..5e-3, tele in any::<bool>()
        ) {
            let s = setup(if tele { CameraKind::Telephoto } else { CameraKind::ShortFocus }, false);
            let d = field(&s, a, b, g);
            let est = recover_frame(&s.geom, &d, &ones(s.grid.len()), &RecoveryConfig::default()).unwrap();
            prop_assert!((est[0] - a).abs() < 1e-6, "pitch {} vs {}", est[0], a);
            prop_assert!((est[1] - b).abs() < 1e-6, "yaw {} vs {}", est[1], b);
            prop_assert!((est[2] - g).abs() < 1e-6, "roll {} vs {}", est[2], g);
        }
    }
}
