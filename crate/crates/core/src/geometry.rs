//! Optical model for rotation-induced image displacement.
//!
//! A camera rotation `(alpha, beta, gamma)` is split into a tilt, described by
//! its [`RotationPlane`], and an in-plane roll about the optical axis. The
//! tilt moves a scene point along the plane direction by an amount that
//! depends on its depth relative to the in-focus (on-axis) depth and on its
//! object height along that direction; the roll rotates the pixel offset
//! about the principal point. The two parts are superposed.
//!
//! Conventions used everywhere in the crate:
//!
//! * image x grows to the right, image y grows downward;
//! * positive `alpha` (pitch) moves image content toward `+y`, positive
//!   `beta` (yaw) toward `-x`;
//! * positive `gamma` maps an offset `(x, y)` to
//!   `(x cos γ - y sin γ, x sin γ + y cos γ)`;
//! * optical lengths are millimeters, angles radians; pixels only appear at
//!   the [`delta_field`] boundary.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::DepthMap;

/// Denominators closer to zero than this are treated as singular.
pub const SINGULARITY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CameraKind {
    ShortFocus,
    Telephoto,
}

/// Ideal pinhole camera with a physical focal length and pixel pitch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub focal_length_mm: f64,
    pub pixel_pitch_um: f64,
    /// `(cx, cy)` in pixels.
    pub principal_point: [f64; 2],
    pub width: usize,
    pub height: usize,
    pub kind: CameraKind,
}

impl CameraModel {
    pub fn new(
        focal_length_mm: f64,
        pixel_pitch_um: f64,
        principal_point: [f64; 2],
        width: usize,
        height: usize,
        kind: CameraKind,
    ) -> Result<Self> {
        let cam = Self {
            focal_length_mm,
            pixel_pitch_um,
            principal_point,
            width,
            height,
            kind,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Principal point at `(floor(w/2), floor(h/2))`, i.e. on a pixel center.
    pub fn centered(
        focal_length_mm: f64,
        pixel_pitch_um: f64,
        width: usize,
        height: usize,
        kind: CameraKind,
    ) -> Result<Self> {
        Self::new(
            focal_length_mm,
            pixel_pitch_um,
            [(width / 2) as f64, (height / 2) as f64],
            width,
            height,
            kind,
        )
    }

    /// Narrow-field sample optics: 26 mm behind 5.2 µm pixels (5000 px focal).
    pub fn telephoto_reference(width: usize, height: usize) -> Result<Self> {
        Self::centered(26.0, 5.2, width, height, CameraKind::Telephoto)
    }

    /// Wide-field sample optics: 4 mm behind 7.7 µm pixels (about 519 px focal).
    pub fn short_focus_reference(width: usize, height: usize) -> Result<Self> {
        Self::centered(4.0, 7.7, width, height, CameraKind::ShortFocus)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal_length_mm.is_finite() && self.focal_length_mm > 0.0) {
            return Err(Error::Argument(format!(
                "focal length must be positive, got {}",
                self.focal_length_mm
            )));
        }
        if !(self.pixel_pitch_um.is_finite() && self.pixel_pitch_um > 0.0) {
            return Err(Error::Argument(format!(
                "pixel pitch must be positive, got {}",
                self.pixel_pitch_um
            )));
        }
        if self.width < 3 || self.height < 3 {
            return Err(Error::Argument(format!(
                "image must be at least 3x3, got {}x{}",
                self.width, self.height
            )));
        }
        let [cx, cy] = self.principal_point;
        let inside = |v: f64, len: usize| v.is_finite() && v >= 0.0 && v <= (len - 1) as f64;
        if !inside(cx, self.width) || !inside(cy, self.height) {
            return Err(Error::Argument(format!(
                "principal point ({cx}, {cy}) lies outside the {}x{} image",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn pixel_pitch_mm(&self) -> f64 {
        self.pixel_pitch_um * 1e-3
    }

    pub fn focal_px(&self) -> f64 {
        self.focal_length_mm / self.pixel_pitch_mm()
    }

    /// Pixel position relative to the principal point.
    pub fn offset(&self, x: f64, y: f64) -> [f64; 2] {
        [x - self.principal_point[0], y - self.principal_point[1]]
    }

    /// Pinhole object height (mm) of a point `offset_px` pixels off-axis at `depth_mm`.
    pub fn object_height(&self, offset_px: f64, depth_mm: f64) -> f64 {
        offset_px * self.pixel_pitch_mm() * depth_mm / self.focal_length_mm
    }

    /// Depth at the principal point, i.e. the in-focus conjugate distance.
    pub fn on_axis_depth(&self, depth: &DepthMap) -> Result<f64> {
        if depth.width() != self.width || depth.height() != self.height {
            return Err(Error::Argument(format!(
                "depth map is {}x{} but the camera is {}x{}",
                depth.width(),
                depth.height(),
                self.width,
                self.height
            )));
        }
        let [cx, cy] = self.principal_point;
        let l_on = if depth.is_fully_valid() {
            depth.sample_bilinear(cx, cy)
        } else {
            depth.filled().sample_bilinear(cx, cy)
        };
        Ok(l_on)
    }
}

/// Camera rotation at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RotationSample {
    pub t_ms: f64,
    /// Pitch, about the image x-axis.
    pub alpha: f64,
    /// Yaw, about the image y-axis.
    pub beta: f64,
    /// Roll, about the optical axis.
    pub gamma: f64,
}

impl RotationSample {
    /// Validated constructor; rejects non-finite angles and `|angle| >= π/2`.
    pub fn new(t_ms: f64, alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let s = Self {
            t_ms,
            alpha,
            beta,
            gamma,
        };
        s.validate()?;
        Ok(s)
    }

    pub const fn angles(t_ms: f64, alpha: f64, beta: f64, gamma: f64) -> Self {
        Self {
            t_ms,
            alpha,
            beta,
            gamma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t_ms.is_finite() {
            return Err(Error::Data(format!("non-finite timestamp {}", self.t_ms)));
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !v.is_finite() || v.abs() >= FRAC_PI_2 {
                return Err(Error::Data(format!(
                    "{name} = {v} rad at t = {} ms is outside (-π/2, π/2)",
                    self.t_ms
                )));
            }
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.alpha, self.beta, self.gamma]
    }

    /// Angle-wise difference; keeps `self`'s timestamp.
    pub fn minus(&self, other: &RotationSample) -> RotationSample {
        RotationSample {
            t_ms: self.t_ms,
            alpha: self.alpha - other.alpha,
            beta: self.beta - other.beta,
            gamma: self.gamma - other.gamma,
        }
    }

    pub fn scaled(&self, k: f64) -> RotationSample {
        RotationSample {
            t_ms: self.t_ms,
            alpha: self.alpha * k,
            beta: self.beta * k,
            gamma: self.gamma * k,
        }
    }

    /// `(1 - f) * a + f * b` per angle; exact at `f = 0` and `f = 1`.
    pub fn lerp(a: &RotationSample, b: &RotationSample, f: f64, t_ms: f64) -> RotationSample {
        let mix = |x: f64, y: f64| (1.0 - f) * x + f * y;
        RotationSample {
            t_ms,
            alpha: mix(a.alpha, b.alpha),
            beta: mix(a.beta, b.beta),
            gamma: mix(a.gamma, b.gamma),
        }
    }
}

/// Tilt part of a rotation: magnitude `theta` in the plane spanned by the
/// rotation vector and the optical axis, plus the plane's angles to the
/// image axes. `cos(phi_x)`, `cos(phi_y)` are the direction cosines of the
/// optical-axis displacement in the image plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationPlane {
    pub theta: f64,
    pub phi_x: f64,
    pub phi_y: f64,
}

impl RotationPlane {
    /// Value returned for rotations without tilt (identity or pure roll).
    pub const DEGENERATE: RotationPlane = RotationPlane {
        theta: 0.0,
        phi_x: FRAC_PI_2,
        phi_y: FRAC_PI_2,
    };

    pub fn is_degenerate(&self) -> bool {
        self.theta == 0.0
    }

    pub fn direction_cosines(&self) -> [f64; 2] {
        if self.is_degenerate() {
            [0.0, 0.0]
        } else {
            [self.phi_x.cos(), self.phi_y.cos()]
        }
    }
}

/// Split the tilt out of a rotation. Roll does not take part; a rotation
/// with `alpha = beta = 0` yields [`RotationPlane::DEGENERATE`].
pub fn decompose_rotation(s: &RotationSample) -> RotationPlane {
    match tilt_direction(s.alpha, s.beta) {
        None => RotationPlane::DEGENERATE,
        Some((theta, [cx, cy])) => RotationPlane {
            theta,
            phi_x: cx.clamp(-1.0, 1.0).acos(),
            phi_y: cy.clamp(-1.0, 1.0).acos(),
        },
    }
}

#[inline]
fn tilt_direction(alpha: f64, beta: f64) -> Option<(f64, [f64; 2])> {
    let theta = alpha.hypot(beta);
    (theta > 0.0).then(|| (theta, [beta / theta, -alpha / theta]))
}

fn check_length(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("{name} must be positive, got {v}")))
    }
}

fn check_angle(theta: f64) -> Result<()> {
    if theta.is_finite() && theta.abs() < FRAC_PI_2 {
        Ok(())
    } else {
        Err(Error::Argument(format!(
            "rotation angle {theta} is outside (-π/2, π/2)"
        )))
    }
}

/// Sensor-plane displacement (mm) of the on-axis point for a tilt `theta`:
/// `-l_on · tan θ · f' / (l_on + f')`.
pub fn on_axis_delta(l_on: f64, theta: f64, cam: &CameraModel) -> Result<f64> {
    check_length("on-axis depth", l_on)?;
    check_angle(theta)?;
    Ok(on_axis_unchecked(l_on, theta.tan(), cam.focal_length_mm))
}

#[inline]
fn on_axis_unchecked(l_on: f64, tan_theta: f64, focal_mm: f64) -> f64 {
    -l_on * tan_theta * focal_mm / (l_on + focal_mm)
}

/// Multiplier turning the on-axis displacement into the off-axis one.
///
/// `depth_ratio` and `height_ratio` are the off-axis depth and object height
/// measured in units of the on-axis depth.
#[inline]
fn off_axis_factor(depth_ratio: f64, height_ratio: f64, tan_theta: f64) -> (f64, f64) {
    let den = depth_ratio - height_ratio * tan_theta;
    let factor = (depth_ratio - height_ratio * height_ratio) / (depth_ratio * den);
    (factor, den)
}

/// Sensor-plane displacement (mm) of an off-axis point at depth `l_off`
/// with object height `y` (mm, signed along the tilt direction).
///
/// The off-axis depth and height enter relative to `l_on`:
/// `δ_off = δ_on · (1/L) · (L - Y²) / (L - Y tan θ)` with `L = l_off / l_on`
/// and `Y = y / l_on`, which collapses to the on-axis value at `y = 0`,
/// `l_off = l_on`.
pub fn off_axis_delta(l_on: f64, l_off: f64, y: f64, theta: f64, cam: &CameraModel) -> Result<f64> {
    check_length("on-axis depth", l_on)?;
    check_length("off-axis depth", l_off)?;
    check_angle(theta)?;
    if !y.is_finite() {
        return Err(Error::Argument(format!(
            "object height must be finite, got {y}"
        )));
    }
    let tan_theta = theta.tan();
    let (factor, den) = off_axis_factor(l_off / l_on, y / l_on, tan_theta);
    if den.abs() < SINGULARITY_EPS {
        return Err(Error::Singularity {
            index: 0,
            message: format!(
                "off-axis denominator vanishes (l_off = {l_off} mm, y = {y} mm, θ = {theta})"
            ),
        });
    }
    Ok(on_axis_unchecked(l_on, tan_theta, cam.focal_length_mm) * factor)
}

/// A scene point seen at a pixel offset from the principal point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldPoint {
    /// Pixels right of the principal point.
    pub px: f64,
    /// Pixels below the principal point.
    pub py: f64,
    /// Radial object height (mm).
    pub object_height_y: f64,
    /// Depth (mm).
    pub depth: f64,
}

impl FieldPoint {
    pub fn new(px: f64, py: f64, depth_mm: f64, cam: &CameraModel) -> Result<Self> {
        check_length("point depth", depth_mm)?;
        if !(px.is_finite() && py.is_finite()) {
            return Err(Error::Argument("pixel offset must be finite".into()));
        }
        Ok(Self {
            px,
            py,
            object_height_y: cam.object_height(px.hypot(py), depth_mm),
            depth: depth_mm,
        })
    }

    /// Point at absolute pixel `(x, y)`, depth looked up bilinearly.
    pub fn at_pixel(x: f64, y: f64, depth: &DepthMap, cam: &CameraModel) -> Result<Self> {
        let [px, py] = cam.offset(x, y);
        Self::new(px, py, depth.sample_bilinear(x, y), cam)
    }

    /// Checks the pinhole relation between height, offset, and depth.
    pub fn is_consistent(&self, cam: &CameraModel) -> bool {
        let expected = cam.object_height(self.px.hypot(self.py), self.depth);
        (self.object_height_y - expected).abs() <= 1e-6 * expected.abs().max(f64::MIN_POSITIVE)
    }
}

/// Precomputed per-rotation state for evaluating displacements at many
/// points: the tilt direction and magnitude, plus the roll terms.
#[derive(Debug, Clone, Copy)]
pub struct DeltaKernel {
    tan_theta: f64,
    dir: [f64; 2],
    /// On-axis displacement in pixels.
    on_axis_px: f64,
    /// `pitch / f'`; multiplied by the depth ratio gives the height ratio per pixel.
    height_scale: f64,
    cos_g: f64,
    sin_g: f64,
    tilt: bool,
}

impl DeltaKernel {
    pub fn new(s: &RotationSample, l_on: f64, cam: &CameraModel) -> Self {
        let (tan_theta, dir, tilt) = match tilt_direction(s.alpha, s.beta) {
            Some((theta, dir)) => (theta.tan(), dir, true),
            None => (0.0, [0.0, 0.0], false),
        };
        let pitch = cam.pixel_pitch_mm();
        Self {
            tan_theta,
            dir,
            on_axis_px: on_axis_unchecked(l_on, tan_theta, cam.focal_length_mm) / pitch,
            height_scale: pitch / cam.focal_length_mm,
            cos_g: s.gamma.cos(),
            sin_g: s.gamma.sin(),
            tilt,
        }
    }

    /// Tilt-only displacement (pixels) of the point at offset `(x, y)` with
    /// depth ratio `depth_ratio = l_off / l_on`. `Err` carries the vanishing
    /// denominator.
    #[inline]
    pub fn tilt(&self, x: f64, y: f64, depth_ratio: f64) -> std::result::Result<[f64; 2], f64> {
        if !self.tilt {
            return Ok([0.0, 0.0]);
        }
        let height_ratio = (x * self.dir[0] + y * self.dir[1]) * self.height_scale * depth_ratio;
        let (factor, den) = off_axis_factor(depth_ratio, height_ratio, self.tan_theta);
        if den.abs() < SINGULARITY_EPS {
            return Err(den);
        }
        let d = self.on_axis_px * factor;
        Ok([d * self.dir[0], d * self.dir[1]])
    }

    #[inline]
    pub fn roll(&self, x: f64, y: f64) -> [f64; 2] {
        [
            x * self.cos_g - y * self.sin_g - x,
            x * self.sin_g + y * self.cos_g - y,
        ]
    }

    #[inline]
    pub fn displacement(
        &self,
        x: f64,
        y: f64,
        depth_ratio: f64,
    ) -> std::result::Result<[f64; 2], f64> {
        let t = self.tilt(x, y, depth_ratio)?;
        let r = self.roll(x, y);
        Ok([t[0] + r[0], t[1] + r[1]])
    }
}

/// Image displacement (pixels) of every point under rotation `s`.
///
/// The on-axis depth is read from `depth` at the principal point; each
/// point carries its own depth.
pub fn delta_field(
    s: &RotationSample,
    depth: &DepthMap,
    cam: &CameraModel,
    points: &[FieldPoint],
) -> Result<Vec<[f64; 2]>> {
    let l_on = cam.on_axis_depth(depth)?;
    delta_field_with_on_axis(s, l_on, cam, points)
}

/// [`delta_field`] with an explicit on-axis depth.
pub fn delta_field_with_on_axis(
    s: &RotationSample,
    l_on: f64,
    cam: &CameraModel,
    points: &[FieldPoint],
) -> Result<Vec<[f64; 2]>> {
    check_length("on-axis depth", l_on)?;
    let kernel = DeltaKernel::new(s, l_on, cam);
    points
        .iter()
        .enumerate()
        .map(|(index, p)| {
            check_length("point depth", p.depth)?;
            kernel
                .displacement(p.px, p.py, p.depth / l_on)
                .map_err(|den| Error::Singularity {
                    index,
                    message: format!(
                        "off-axis denominator {den:e} at offset ({}, {})",
                        p.px, p.py
                    ),
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cam26() -> CameraModel {
        CameraModel::centered(26.0, 5.2, 518, 518, CameraKind::Telephoto).unwrap()
    }

    #[test]
    fn identity_rotation_is_degenerate() {
        let p = decompose_rotation(&RotationSample::default());
        assert!(p.is_degenerate());
        assert_eq!(p.direction_cosines(), [0.0, 0.0]);
        let roll_only = decompose_rotation(&RotationSample::angles(0.0, 0.0, 0.0, 0.01));
        assert_eq!(roll_only, RotationPlane::DEGENERATE);
    }

    #[test]
    fn pure_pitch_moves_along_y() {
        let p = decompose_rotation(&RotationSample::angles(0.0, 1e-3, 0.0, 0.0));
        assert_eq!(p.theta, 1e-3);
        let [cx, cy] = p.direction_cosines();
        assert!(cx.abs() < 1e-15);
        assert_relative_eq!(cy.abs(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn three_four_five_tilt() {
        let p = decompose_rotation(&RotationSample::angles(0.0, 3e-4, 4e-4, 0.0));
        assert_relative_eq!(p.theta, 5e-4, epsilon = 1e-18);
        let [cx, cy] = p.direction_cosines();
        assert_relative_eq!(cx, 0.8, epsilon = 1e-12);
        assert_relative_eq!(cy, -0.6, epsilon = 1e-12);
    }

    #[test]
    fn on_axis_values() {
        let cam = cam26();
        assert_eq!(on_axis_delta(2000.0, 0.0, &cam).unwrap(), 0.0);
        // scripted evaluation of -l tanθ f'/(l + f')
        assert_relative_eq!(
            on_axis_delta(2000.0, 1e-3, &cam).unwrap(),
            -0.025666346166505566,
            max_relative = 1e-14
        );
        // infinite-conjugate limit -tanθ f'
        assert_relative_eq!(
            on_axis_delta(1e12, 1e-3, &cam).unwrap(),
            -0.026000008666670134,
            max_relative = 1e-9
        );
    }

    #[test]
    fn off_axis_values() {
        let cam = cam26();
        let on = on_axis_delta(2000.0, 1e-3, &cam).unwrap();
        assert_eq!(off_axis_delta(2000.0, 2000.0, 0.0, 1e-3, &cam).unwrap(), on);
        assert_eq!(
            off_axis_delta(2000.0, 3100.0, 55.0, 0.0, &cam).unwrap(),
            0.0
        );
        assert_relative_eq!(
            off_axis_delta(2000.0, 4000.0, 100.0, 1e-3, &cam).unwrap(),
            -0.012817452053306862,
            max_relative = 1e-13
        );
    }

    #[test]
    fn off_axis_singularity_is_reported() {
        let cam = cam26();
        // L - Y tanθ = 0 with L = 1 requires Y = 1/tanθ
        let theta: f64 = 0.25;
        let y = 2000.0 / theta.tan();
        let err = off_axis_delta(2000.0, 2000.0, y, theta, &cam).unwrap_err();
        assert!(matches!(err, Error::Singularity { .. }));
    }

    #[test]
    fn domain_errors() {
        let cam = cam26();
        assert!(on_axis_delta(0.0, 1e-3, &cam).is_err());
        assert!(on_axis_delta(100.0, 2.0, &cam).is_err());
        assert!(off_axis_delta(100.0, -1.0, 0.0, 1e-3, &cam).is_err());
    }

    #[test]
    fn zero_rotation_gives_zero_field() {
        let cam = cam26();
        let depth = DepthMap::uniform(518, 518, 2500.0).unwrap();
        let pts: Vec<_> = (0..10)
            .map(|i| {
                FieldPoint::new(i as f64 * 20.0 - 100.0, 37.0, 2500.0 + i as f64, &cam).unwrap()
            })
            .collect();
        let f = delta_field(&RotationSample::default(), &depth, &cam, &pts).unwrap();
        assert!(f.iter().all(|d| d[0] == 0.0 && d[1] == 0.0));
    }

    #[test]
    fn pure_roll_rotates_offset() {
        let cam = cam26();
        let depth = DepthMap::uniform(518, 518, 2500.0).unwrap();
        let pts = [FieldPoint::new(100.0, 0.0, 2500.0, &cam).unwrap()];
        let f = delta_field(
            &RotationSample::angles(0.0, 0.0, 0.0, 0.01),
            &depth,
            &cam,
            &pts,
        )
        .unwrap();
        assert_relative_eq!(f[0][0], -0.004999958333471, max_relative = 1e-9);
        assert_relative_eq!(f[0][1], 0.9999833334166665, max_relative = 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn roll_term_matches_rotation_matrix(
            x in -300.0f64..300.0,
            y in -300.0f64..300.0,
            gamma in -0.05f64..0.05,
        ) {
            let k = DeltaKernel::new(&RotationSample::angles(0.0, 0.0, 0.0, gamma), 2500.0, &cam26());
            let p = nalgebra::Vector2::new(x, y);
            let moved = nalgebra::Rotation2::new(gamma) * p - p;
            let d = k.displacement(x, y, 1.0).unwrap();
            proptest::prop_assert!((d[0] - moved.x).abs() < 1e-9 && (d[1] - moved.y).abs() < 1e-9);
        }
    }

    #[test]
    fn pure_pitch_is_uniform_on_center_row() {
        let cam = cam26();
        let depth = DepthMap::uniform(518, 518, 3000.0).unwrap();
        let pts: Vec<_> = (-5..=5)
            .map(|i| FieldPoint::new(i as f64 * 40.0, 0.0, 3000.0, &cam).unwrap())
            .collect();
        let f = delta_field(
            &RotationSample::angles(0.0, 2e-3, 0.0, 0.0),
            &depth,
            &cam,
            &pts,
        )
        .unwrap();
        for d in &f {
            assert_eq!(d[1], f[0][1]);
            assert!(d[0].abs() < 1e-15);
        }
        assert!(f[0][1] > 0.0, "positive pitch moves content toward +y");
    }

    #[test]
    fn field_point_height_is_pinhole() {
        let cam = cam26();
        let p = FieldPoint::new(30.0, 40.0, 1000.0, &cam).unwrap();
        assert_relative_eq!(
            p.object_height_y,
            50.0 * 0.0052 * 1000.0 / 26.0,
            max_relative = 1e-14
        );
        assert!(p.is_consistent(&cam));
    }

    #[test]
    fn camera_validation() {
        assert!(CameraModel::centered(26.0, 5.2, 2, 10, CameraKind::Telephoto).is_err());
        assert!(CameraModel::new(26.0, 5.2, [12.0, 3.0], 10, 10, CameraKind::Telephoto).is_err());
        assert!(CameraModel::centered(-1.0, 5.2, 10, 10, CameraKind::Telephoto).is_err());
        assert_relative_eq!(cam26().focal_px(), 5000.0, max_relative = 1e-12);
    }
}
