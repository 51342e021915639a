//! Image, depth and dataset loading, and seeded scenario assembly.
//!
//! Depth comes either as a 16-bit grayscale PNG with a `depth_scale` in
//! meters per unit, or as a BCDM raw file: the magic `BCDM`, then width,
//! height and a reserved word as little-endian `u32`, then `width * height`
//! little-endian `f32` depths in millimeters, row-major.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use image::{ImageBuffer, ImageReader, Luma, Rgb};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraKind, CameraModel};
use crate::raster::{DepthMap, RgbImage};
use crate::simulator::SimConfig;
use crate::trajectory::{Trajectory, TrajectoryLabel};

pub const BCDM_MAGIC: &[u8; 4] = b"BCDM";
const BCDM_HEADER_LEN: usize = 16;

/// Square side that inputs are cropped and resized to by default.
pub const STANDARD_SIZE: usize = 518;

pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    let img = ImageReader::open(path)?.with_guessed_format()?.decode()?;
    match img.color() {
        image::ColorType::Rgb8
        | image::ColorType::Rgba8
        | image::ColorType::L8
        | image::ColorType::La8 => {}
        other => {
            return Err(Error::format(
                path,
                format!("expected an 8-bit PNG, found {other:?}"),
            ))
        }
    }
    let rgb = img.to_rgb8();
    RgbImage::from_u8(rgb.width() as usize, rgb.height() as usize, rgb.as_raw())
}

pub fn save_rgb_png(img: &RgbImage, path: &Path) -> Result<()> {
    let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
        ImageBuffer::from_raw(img.width() as u32, img.height() as u32, img.to_u8())
            .ok_or_else(|| Error::Data("image buffer size mismatch".into()))?;
    buf.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

fn is_bcdm(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("bcdm"))
}

/// Load a depth raster as millimeters. `depth_scale` (meters per raw unit)
/// applies to PNG input only; BCDM values are already millimeters.
pub fn load_depth(path: &Path, depth_scale: f64) -> Result<DepthMap> {
    if is_bcdm(path) {
        let bytes = fs::read(path)?;
        return read_bcdm(&bytes[..]).map_err(|e| match e {
            Error::Data(m) | Error::Argument(m) => Error::format(path, m),
            other => other,
        });
    }
    if !(depth_scale.is_finite() && depth_scale > 0.0) {
        return Err(Error::Argument(format!(
            "depth_scale must be positive, got {depth_scale}"
        )));
    }
    let img = ImageReader::open(path)?.with_guessed_format()?.decode()?;
    if img.color() != image::ColorType::L16 {
        return Err(Error::format(
            path,
            format!("expected a 16-bit grayscale PNG, found {:?}", img.color()),
        ));
    }
    let g = img.to_luma16();
    let mm_per_unit = depth_scale * 1000.0;
    let data = g
        .as_raw()
        .iter()
        .map(|&v| (v as f64 * mm_per_unit) as f32)
        .collect();
    DepthMap::from_mm(g.width() as usize, g.height() as usize, data).map_err(|e| match e {
        Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Write depth as a 16-bit PNG with `depth_scale` meters per unit. Values
/// are rounded and clamped to the 16-bit range; invalid pixels become 0.
pub fn save_depth_png16(depth: &DepthMap, path: &Path, depth_scale: f64) -> Result<()> {
    if !(depth_scale.is_finite() && depth_scale > 0.0) {
        return Err(Error::Argument(format!(
            "depth_scale must be positive, got {depth_scale}"
        )));
    }
    let units: Vec<u16> = depth
        .raw_mm()
        .iter()
        .zip(depth.valid_mask())
        .map(|(&d, &ok)| {
            if ok {
                (d as f64 / 1000.0 / depth_scale)
                    .round()
                    .clamp(0.0, 65535.0) as u16
            } else {
                0
            }
        })
        .collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(depth.width() as u32, depth.height() as u32, units)
            .ok_or_else(|| Error::Data("depth buffer size mismatch".into()))?;
    buf.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

pub fn read_bcdm<R: Read>(mut reader: R) -> Result<DepthMap> {
    let mut header = [0u8; BCDM_HEADER_LEN];
    reader
        .read_exact(&mut header)
        .map_err(|_| Error::Data("truncated BCDM header".into()))?;
    if &header[..4] != BCDM_MAGIC {
        return Err(Error::Data("missing BCDM magic".into()));
    }
    let word =
        |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().expect("4 bytes")) as usize;
    let (w, h) = (word(4), word(8));
    let mut payload = Vec::new();
    reader.read_to_end(&mut payload)?;
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Data(format!("BCDM dimensions {w}x{h} overflow")))?;
    if payload.len() != expected {
        return Err(Error::Data(format!(
            "BCDM {w}x{h} needs {expected} payload bytes, found {}",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    DepthMap::from_mm(w, h, data)
}

pub fn write_bcdm<W: Write>(depth: &DepthMap, mut writer: W) -> Result<()> {
    let mut out = Vec::with_capacity(BCDM_HEADER_LEN + 4 * depth.raw_mm().len());
    out.extend_from_slice(BCDM_MAGIC);
    out.extend_from_slice(&(depth.width() as u32).to_le_bytes());
    out.extend_from_slice(&(depth.height() as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for v in depth.raw_mm() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    writer.write_all(&out)?;
    Ok(())
}

pub fn save_depth_bcdm(depth: &DepthMap, path: &Path) -> Result<()> {
    write_bcdm(depth, fs::File::create(path)?)
}

/// Width and height of an RGB PNG or a depth file without decoding pixels.
pub fn raster_dimensions(path: &Path) -> Result<(usize, usize)> {
    if is_bcdm(path) {
        let mut header = [0u8; BCDM_HEADER_LEN];
        fs::File::open(path)?
            .read_exact(&mut header)
            .map_err(|_| Error::format(path, "truncated BCDM header"))?;
        if &header[..4] != BCDM_MAGIC {
            return Err(Error::format(path, "missing BCDM magic"));
        }
        let word =
            |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().expect("4 bytes")) as usize;
        return Ok((word(4), word(8)));
    }
    let (w, h) = image::image_dimensions(path)?;
    Ok((w as usize, h as usize))
}

/// Centered square crop window `(x0, y0, side)`.
fn square_crop(width: usize, height: usize) -> (usize, usize, usize) {
    let side = width.min(height);
    ((width - side) / 2, (height - side) / 2, side)
}

/// Center crop to a square, then bilinear resize to `size × size`.
pub fn center_crop_resize_rgb(img: &RgbImage, size: usize) -> Result<RgbImage> {
    if size == 0 {
        return Err(Error::Argument("target size must be positive".into()));
    }
    let (x0, y0, side) = square_crop(img.width(), img.height());
    if side == size {
        return Ok(RgbImage::from_fn(size, size, |x, y| {
            img.pixel(x0 + x, y0 + y)
        }));
    }
    let k = side as f64 / size as f64;
    Ok(RgbImage::from_fn(size, size, |x, y| {
        let sx = x0 as f64 + ((x as f64 + 0.5) * k - 0.5).clamp(0.0, (side - 1) as f64);
        let sy = y0 as f64 + ((y as f64 + 0.5) * k - 0.5).clamp(0.0, (side - 1) as f64);
        img.sample_bilinear(sx, sy)
    }))
}

/// Center crop to a square, then nearest-neighbor resize to `size × size`.
pub fn center_crop_resize_depth(depth: &DepthMap, size: usize) -> Result<DepthMap> {
    if size == 0 {
        return Err(Error::Argument("target size must be positive".into()));
    }
    let (x0, y0, side) = square_crop(depth.width(), depth.height());
    let w = depth.width();
    let raw = depth.raw_mm();
    let pick = |v: usize| {
        ((((v as f64 + 0.5) * side as f64 / size as f64).floor()) as usize).min(side - 1)
    };
    DepthMap::from_fn(size, size, |x, y| raw[(y0 + pick(y)) * w + x0 + pick(x)])
}

/// Per-dataset `camera.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetCamera {
    pub focal_mm: f64,
    pub pixel_pitch_um: f64,
    pub kind: CameraKind,
    /// Meters per unit of 16-bit depth PNGs.
    #[serde(default = "default_depth_scale")]
    pub depth_scale: f64,
}

fn default_depth_scale() -> f64 {
    0.001
}

impl DatasetCamera {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cam: DatasetCamera =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        cam.camera(3, 3)
            .map_err(|e| Error::format(path, e.to_string()))?;
        Ok(cam)
    }

    pub fn camera(&self, width: usize, height: usize) -> Result<CameraModel> {
        CameraModel::centered(self.focal_mm, self.pixel_pitch_um, width, height, self.kind)
    }
}

/// One RGB-D pair of a dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetPair {
    pub name: String,
    pub rgb: PathBuf,
    pub depth: PathBuf,
}

/// `rgb/<name>.png` matched with `depth/<name>.png` or `depth/<name>.bcdm`,
/// sorted by name. RGB files without depth are skipped.
pub fn list_pairs(dataset_dir: &Path) -> Result<Vec<DatasetPair>> {
    let rgb_dir = dataset_dir.join("rgb");
    let depth_dir = dataset_dir.join("depth");
    if !rgb_dir.is_dir() || !depth_dir.is_dir() {
        return Err(Error::Data(format!(
            "{} must contain rgb/ and depth/ directories",
            dataset_dir.display()
        )));
    }
    let mut pairs = Vec::new();
    for entry in fs::read_dir(&rgb_dir)? {
        let path = entry?.path();
        if !path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("png"))
        {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        let depth = ["png", "bcdm"]
            .iter()
            .map(|ext| depth_dir.join(format!("{stem}.{ext}")))
            .find(|p| p.is_file());
        if let Some(depth) = depth {
            pairs.push(DatasetPair {
                name: stem.to_string(),
                rgb: path,
                depth,
            });
        }
    }
    pairs.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(pairs)
}

/// Load a pair, check that both rasters agree in size, and optionally bring
/// them to `size × size`.
pub fn load_pair(
    rgb: &Path,
    depth: &Path,
    depth_scale: f64,
    size: Option<usize>,
) -> Result<(RgbImage, DepthMap)> {
    let img = load_rgb(rgb)?;
    let d = load_depth(depth, depth_scale)?;
    if (img.width(), img.height()) != (d.width(), d.height()) {
        return Err(Error::format(
            depth,
            format!(
                "depth is {}x{} but the paired RGB is {}x{}",
                d.width(),
                d.height(),
                img.width(),
                img.height()
            ),
        ));
    }
    match size {
        Some(s) => Ok((
            center_crop_resize_rgb(&img, s)?,
            center_crop_resize_depth(&d, s)?,
        )),
        None => Ok((img, d)),
    }
}

/// Handheld gyro file: a dense ground-truth trajectory CSV.
pub fn load_gyro(path: &Path) -> Result<Trajectory> {
    Trajectory::load(path, TrajectoryLabel::DenseGroundTruth)
}

/// A fully specified simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub rgb: PathBuf,
    pub depth: PathBuf,
    pub depth_scale: f64,
    pub camera: CameraModel,
    /// Has `onset_ms` and `seed` set.
    pub sim: SimConfig,
    pub seed: u64,
    pub onset_ms: f64,
}

impl Scenario {
    /// RGB and depth at the camera resolution.
    pub fn load_inputs(&self) -> Result<(RgbImage, DepthMap)> {
        let (img, d) = load_pair(&self.rgb, &self.depth, self.depth_scale, None)?;
        if (img.width(), img.height()) == (self.camera.width, self.camera.height) {
            return Ok((img, d));
        }
        if self.camera.width != self.camera.height {
            return Err(Error::Data(format!(
                "scenario {} needs a {}x{} input",
                self.name, self.camera.width, self.camera.height
            )));
        }
        Ok((
            center_crop_resize_rgb(&img, self.camera.width)?,
            center_crop_resize_depth(&d, self.camera.width)?,
        ))
    }
}

/// Options for [`build_scenarios`] beyond the dataset and trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOptions {
    /// Timing template; its onset and seed are replaced per scenario.
    pub sim: SimConfig,
    /// Square output side, or `None` to keep each pair's own size.
    pub size: Option<usize>,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            size: Some(STANDARD_SIZE),
        }
    }
}

/// `n` scenarios over the dataset's pairs, each with a uniformly drawn pair
/// and exposure onset in `[start, end - capture_span]`.
pub fn build_scenarios(
    dataset_dir: &Path,
    traj_path: &Path,
    n: usize,
    seed: u64,
    opts: &ScenarioOptions,
) -> Result<Vec<Scenario>> {
    opts.sim.validate()?;
    let cam_file = DatasetCamera::load(&dataset_dir.join("camera.json"))?;
    let pairs = list_pairs(dataset_dir)?;
    if pairs.is_empty() {
        return Err(Error::Data(format!(
            "no RGB-D pairs under {}",
            dataset_dir.display()
        )));
    }
    let traj = load_gyro(traj_path)?;
    let mut cams = Vec::with_capacity(pairs.len());
    for p in &pairs {
        let rgb_dims = raster_dimensions(&p.rgb)?;
        let depth_dims = raster_dimensions(&p.depth)?;
        if rgb_dims != depth_dims {
            return Err(Error::format(
                &p.depth,
                format!(
                    "depth is {}x{} but the paired RGB is {}x{}",
                    depth_dims.0, depth_dims.1, rgb_dims.0, rgb_dims.1
                ),
            ));
        }
        let (w, h) = match opts.size {
            Some(s) => (s, s),
            None => rgb_dims,
        };
        cams.push(cam_file.camera(w, h)?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let i = rng.random_range(0..pairs.len());
        let camera = cams[i].clone();
        let span = opts.sim.capture_span_ms(camera.height);
        let latest = traj.end() - span;
        if latest < traj.start() {
            return Err(Error::Range {
                what: "required capture span (ms)",
                value: span,
                start: 0.0,
                end: traj.duration(),
            });
        }
        let onset = if latest == traj.start() {
            latest
        } else {
            rng.random_range(traj.start()..=latest)
        };
        let run_seed: u64 = rng.random();
        let sim = SimConfig {
            onset_ms: Some(onset),
            seed: run_seed,
            ..opts.sim.clone()
        };
        out.push(Scenario {
            name: format!("{:04}_{}", k, pairs[i].name),
            rgb: pairs[i].rgb.clone(),
            depth: pairs[i].depth.clone(),
            depth_scale: cam_file.depth_scale,
            camera,
            sim,
            seed: run_seed,
            onset_ms: onset,
        });
    }
    Ok(out)
}
