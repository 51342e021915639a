//! Query-point grids and per-frame displacement fields, either measured by
//! patch correlation against frame 1 or computed from the optical model.

use std::io::{Read, Write};

use ndarray::{Array2, Array3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{delta_field_with_on_axis, CameraModel, FieldPoint};
use crate::raster::{DepthMap, RgbImage};
use crate::simulator::VideoFrames;
use crate::trajectory::Trajectory;

pub const DELTA_CSV_HEADER: [&str; 5] = ["point_id", "frame", "px", "py", "confidence"];

/// `(2i+1)²` points on a square lattice centered on the principal point,
/// stored row-major (top row first, left to right).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryGrid {
    pub half_width: usize,
    pub spacing: usize,
    pub center: [f64; 2],
    /// Absolute pixel positions.
    pub points: Vec<[f64; 2]>,
    /// Lattice coordinates in `[-i, i]²`.
    pub lattice: Vec<[i32; 2]>,
}

impl QueryGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn side(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn center_index(&self) -> usize {
        self.len() / 2
    }

    /// Offsets from the principal point, pixels.
    pub fn offsets(&self) -> Vec<[f64; 2]> {
        self.points
            .iter()
            .map(|p| [p[0] - self.center[0], p[1] - self.center[1]])
            .collect()
    }
}

pub fn make_query_grid(
    cam: &CameraModel,
    half_width: usize,
    margin_px: usize,
) -> Result<QueryGrid> {
    if half_width == 0 {
        return Err(Error::Argument("grid half-width must be at least 1".into()));
    }
    let half_extent = cam.width.min(cam.height) as f64 / 2.0 - margin_px as f64;
    let spacing = (half_extent / half_width as f64).floor();
    if !(spacing >= 1.0) {
        return Err(Error::Argument(format!(
            "a half-width {half_width} grid with a {margin_px} px margin does not fit a {}x{} image",
            cam.width, cam.height
        )));
    }
    let spacing = spacing as usize;
    let [cx, cy] = cam.principal_point;
    let reach = (half_width * spacing) as f64;
    let lo = margin_px as f64;
    let fits = |c: f64, len: usize| c - reach >= lo && c + reach <= len as f64 - lo;
    if !fits(cx, cam.width) || !fits(cy, cam.height) {
        return Err(Error::Argument(format!(
            "grid of reach {reach} px around ({cx}, {cy}) leaves the {margin_px} px margin of a {}x{} image",
            cam.width, cam.height
        )));
    }
    let i = half_width as i32;
    let mut points = Vec::new();
    let mut lattice = Vec::new();
    for gy in -i..=i {
        for gx in -i..=i {
            points.push([
                cx + (gx * spacing as i32) as f64,
                cy + (gy * spacing as i32) as f64,
            ]);
            lattice.push([gx, gy]);
        }
    }
    Ok(QueryGrid {
        half_width,
        spacing,
        center: [cx, cy],
        points,
        lattice,
    })
}

/// Displacements of every query point in every frame relative to frame 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaField {
    /// Shape `(N, T, 2)`; `[n, t, 0]` is `p_x`, `[n, t, 1]` is `p_y`.
    pub deltas: Array3<f64>,
    /// Shape `(N, T)`, values in `[0, 1]`.
    pub confidences: Array2<f64>,
    /// Points whose frame-1 patch had no texture; their deltas are copied.
    pub flagged: Vec<bool>,
    /// Pose reference time of each frame, ms.
    pub frame_times: Vec<f64>,
}

impl DeltaField {
    pub fn zeros(n_points: usize, frame_times: Vec<f64>) -> Self {
        let t = frame_times.len();
        Self {
            deltas: Array3::zeros((n_points, t, 2)),
            confidences: Array2::ones((n_points, t)),
            flagged: vec![false; n_points],
            frame_times,
        }
    }

    pub fn n_points(&self) -> usize {
        self.deltas.shape()[0]
    }

    pub fn n_frames(&self) -> usize {
        self.deltas.shape()[1]
    }

    pub fn delta(&self, point: usize, frame: usize) -> [f64; 2] {
        [
            self.deltas[[point, frame, 0]],
            self.deltas[[point, frame, 1]],
        ]
    }

    pub fn frame_deltas(&self, frame: usize) -> Vec<[f64; 2]> {
        (0..self.n_points()).map(|n| self.delta(n, frame)).collect()
    }

    pub fn frame_confidences(&self, frame: usize) -> Vec<f64> {
        self.confidences.column(frame).to_vec()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, t) = (self.n_points(), self.n_frames());
        if self.confidences.dim() != (n, t)
            || self.flagged.len() != n
            || self.frame_times.len() != t
        {
            return Err(Error::Data(
                "delta field components have inconsistent shapes".into(),
            ));
        }
        if t == 0 || n == 0 {
            return Err(Error::Data("delta field is empty".into()));
        }
        if self.deltas.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("delta field contains non-finite values".into()));
        }
        if self.confidences.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::Data("confidence outside [0, 1]".into()));
        }
        for p in 0..n {
            if self.delta(p, 0) != [0.0, 0.0] {
                return Err(Error::Data(format!(
                    "point {p} has a non-zero frame-1 delta"
                )));
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(DELTA_CSV_HEADER)?;
        for p in 0..self.n_points() {
            for t in 0..self.n_frames() {
                let [dx, dy] = self.delta(p, t);
                w.write_record([
                    p.to_string(),
                    t.to_string(),
                    dx.to_string(),
                    dy.to_string(),
                    self.confidences[[p, t]].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Rows may come in any order; every `(point_id, frame)` pair must be
    /// present exactly once. Times and flags are not part of the CSV.
    pub fn read_csv<R: Read>(
        reader: R,
        frame_times: Vec<f64>,
        flagged: Option<Vec<bool>>,
    ) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().map(str::trim).ne(DELTA_CSV_HEADER) {
            return Err(Error::Data(format!(
                "expected delta header `{}`",
                DELTA_CSV_HEADER.join(",")
            )));
        }
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != 5 {
                return Err(Error::Data(format!("row {}: expected 5 fields", line + 1)));
            }
            let bad = |f: &str| Error::Data(format!("row {}: cannot parse `{f}`", line + 1));
            let p: usize = rec[0].trim().parse().map_err(|_| bad(&rec[0]))?;
            let t: usize = rec[1].trim().parse().map_err(|_| bad(&rec[1]))?;
            let mut v = [0.0; 3];
            for k in 0..3 {
                v[k] = rec[k + 2].trim().parse().map_err(|_| bad(&rec[k + 2]))?;
            }
            rows.push((p, t, v));
        }
        let t_count = frame_times.len();
        let n = rows.len() / t_count.max(1);
        if t_count == 0 || n * t_count != rows.len() {
            return Err(Error::Data(format!(
                "{} rows do not form a full grid over {t_count} frames",
                rows.len()
            )));
        }
        let mut field = DeltaField::zeros(n, frame_times);
        let mut seen = vec![false; n * t_count];
        for (p, t, [dx, dy, c]) in rows {
            if p >= n || t >= t_count || std::mem::replace(&mut seen[p * t_count + t], true) {
                return Err(Error::Data(format!(
                    "unexpected or repeated entry point {p}, frame {t}"
                )));
            }
            field.deltas[[p, t, 0]] = dx;
            field.deltas[[p, t, 1]] = dy;
            field.confidences[[p, t]] = c;
        }
        if let Some(flags) = flagged {
            if flags.len() != n {
                return Err(Error::Data(
                    "flag count does not match the point count".into(),
                ));
            }
            field.flagged = flags;
        }
        field.validate()?;
        Ok(field)
    }
}

/// Exact model displacements of the grid at `frame_times`, relative to the first.
pub fn oracle_deltas(
    traj: &Trajectory,
    depth: &DepthMap,
    cam: &CameraModel,
    grid: &QueryGrid,
    frame_times: &[f64],
) -> Result<DeltaField> {
    if frame_times.is_empty() {
        return Err(Error::Argument("no frame times given".into()));
    }
    let filled = if depth.is_fully_valid() {
        depth.clone()
    } else {
        depth.filled()
    };
    let l_on = cam.on_axis_depth(&filled)?;
    let points = grid
        .points
        .iter()
        .map(|p| FieldPoint::at_pixel(p[0], p[1], &filled, cam))
        .collect::<Result<Vec<_>>>()?;
    let origin = traj.sample_at(frame_times[0])?;
    let mut field = DeltaField::zeros(points.len(), frame_times.to_vec());
    for (t, &time) in frame_times.iter().enumerate().skip(1) {
        let rot = traj.sample_at(time)?.minus(&origin);
        let d = delta_field_with_on_axis(&rot, l_on, cam, &points).map_err(|e| e.in_frame(t))?;
        for (p, v) in d.iter().enumerate() {
            field.deltas[[p, t, 0]] = v[0];
            field.deltas[[p, t, 1]] = v[1];
        }
    }
    Ok(field)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackParams {
    /// Template side length (odd).
    pub patch_px: usize,
    /// Search radius around the previous frame's estimate.
    pub search_px: usize,
}

impl Default for TrackParams {
    fn default() -> Self {
        Self {
            patch_px: 21,
            search_px: 24,
        }
    }
}

/// Summed-area tables of a gray image and its square.
struct Integral {
    stride: usize,
    sum: Vec<f64>,
    sq: Vec<f64>,
}

impl Integral {
    fn new(gray: &[f32], w: usize, h: usize) -> Self {
        let stride = w + 1;
        let mut sum = vec![0.0; stride * (h + 1)];
        let mut sq = vec![0.0; stride * (h + 1)];
        for y in 0..h {
            let (mut rs, mut rq) = (0.0, 0.0);
            for x in 0..w {
                let v = gray[y * w + x] as f64;
                rs += v;
                rq += v * v;
                sum[(y + 1) * stride + x + 1] = sum[y * stride + x + 1] + rs;
                sq[(y + 1) * stride + x + 1] = sq[y * stride + x + 1] + rq;
            }
        }
        Self { stride, sum, sq }
    }

    /// Sums over the `side × side` box with top-left `(x0, y0)`.
    fn window(&self, x0: usize, y0: usize, side: usize) -> (f64, f64) {
        let s = self.stride;
        let (a, b, c, d) = (
            y0 * s + x0,
            y0 * s + x0 + side,
            (y0 + side) * s + x0,
            (y0 + side) * s + x0 + side,
        );
        (
            self.sum[d] - self.sum[b] - self.sum[c] + self.sum[a],
            self.sq[d] - self.sq[b] - self.sq[c] + self.sq[a],
        )
    }
}

struct Frame {
    gray: Vec<f32>,
    integral: Integral,
}

/// Vertex of a quadratic fitted to a 3×3 neighborhood (`f[j][i]`, offsets
/// `i - 1`, `j - 1`). Falls back to per-axis parabolas when the fitted
/// surface is not a maximum.
pub fn quadratic_peak(f: &[[f64; 3]; 3]) -> [f64; 2] {
    let (mut b, mut c, mut d, mut e, mut g) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (j, row) in f.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            let (x, y) = (i as f64 - 1.0, j as f64 - 1.0);
            b += x * v;
            c += y * v;
            d += (x * x - 2.0 / 3.0) * v;
            e += (y * y - 2.0 / 3.0) * v;
            g += x * y * v;
        }
    }
    let (b, c, d, e, g) = (b / 6.0, c / 6.0, d / 2.0, e / 2.0, g / 4.0);
    // maximize a + bx + cy + dx² + ey² + gxy
    let det = 4.0 * d * e - g * g;
    if d < 0.0 && det > 0.0 {
        let x = (-2.0 * e * b + g * c) / det;
        let y = (-2.0 * d * c + g * b) / det;
        if x.abs() <= 1.0 && y.abs() <= 1.0 {
            return [x, y];
        }
    }
    let parabola = |m: f64, z: f64, p: f64| {
        let den = m - 2.0 * z + p;
        if den < 0.0 {
            (0.5 * (m - p) / den).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    };
    [
        parabola(f[1][0], f[1][1], f[1][2]),
        parabola(f[0][1], f[1][1], f[2][1]),
    ]
}

/// Scores at or above this are treated as exact matches and not refined.
const EXACT_MATCH: f64 = 1.0 - 1e-9;

struct PointTrack {
    deltas: Vec<[f64; 2]>,
    confidences: Vec<f64>,
    flat: bool,
}

fn track_point(
    frames: &[Frame],
    w: usize,
    h: usize,
    anchor: [usize; 2],
    params: &TrackParams,
) -> PointTrack {
    let t_count = frames.len();
    let side = params.patch_px;
    let half = side / 2;
    let n = (side * side) as f64;
    let [ax, ay] = anchor;
    let first = &frames[0].gray;
    let mut template = Vec::with_capacity(side * side);
    for y in ay - half..=ay + half {
        template.extend(
            first[y * w + ax - half..=y * w + ax + half]
                .iter()
                .map(|&v| v as f64),
        );
    }
    let mean = template.iter().sum::<f64>() / n;
    template.iter_mut().for_each(|v| *v -= mean);
    let t_norm = template.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut out = PointTrack {
        deltas: vec![[0.0, 0.0]; t_count],
        confidences: vec![1.0; t_count],
        flat: t_norm < 1e-6 * n.sqrt(),
    };
    if out.flat {
        out.confidences.iter_mut().for_each(|c| *c = 0.0);
        return out;
    }
    let s = params.search_px as i64;
    let span = (2 * s + 1) as usize;
    let mut scores = vec![f64::NEG_INFINITY; span * span];
    let mut prev = [0i64, 0i64];
    for (t, frame) in frames.iter().enumerate().skip(1) {
        scores.iter_mut().for_each(|v| *v = f64::NEG_INFINITY);
        let (cx, cy) = (ax as i64 + prev[0], ay as i64 + prev[1]);
        let mut best = (f64::NEG_INFINITY, 0usize, 0usize);
        for j in 0..span {
            let y0 = cy + j as i64 - s - half as i64;
            if y0 < 0 || y0 + side as i64 > h as i64 {
                continue;
            }
            for i in 0..span {
                let x0 = cx + i as i64 - s - half as i64;
                if x0 < 0 || x0 + side as i64 > w as i64 {
                    continue;
                }
                let (x0, y0) = (x0 as usize, y0 as usize);
                let (sum, sq) = frame.integral.window(x0, y0, side);
                let var = sq - sum * sum / n;
                let score = if var <= 1e-12 * n {
                    0.0
                } else {
                    let mut dot = 0.0;
                    for (r, trow) in template.chunks_exact(side).enumerate() {
                        let irow = &frame.gray[(y0 + r) * w + x0..(y0 + r) * w + x0 + side];
                        dot += trow
                            .iter()
                            .zip(irow)
                            .map(|(a, &b)| a * b as f64)
                            .sum::<f64>();
                    }
                    dot / (t_norm * var.sqrt())
                };
                scores[j * span + i] = score;
                if score > best.0 {
                    best = (score, i, j);
                }
            }
        }
        let (peak, bi, bj) = best;
        if !peak.is_finite() {
            // no admissible window: keep the previous estimate
            out.deltas[t] = out.deltas[t - 1];
            out.confidences[t] = 0.0;
            continue;
        }
        let mut sub = [0.0, 0.0];
        if peak < EXACT_MATCH && bi > 0 && bj > 0 && bi + 1 < span && bj + 1 < span {
            let mut nb = [[0.0; 3]; 3];
            let mut ok = true;
            for (dj, row) in nb.iter_mut().enumerate() {
                for (di, v) in row.iter_mut().enumerate() {
                    *v = scores[(bj + dj - 1) * span + bi + di - 1];
                    ok &= v.is_finite();
                }
            }
            if ok {
                sub = quadratic_peak(&nb);
            }
        }
        let ix = prev[0] + bi as i64 - s;
        let iy = prev[1] + bj as i64 - s;
        out.deltas[t] = [ix as f64 + sub[0], iy as f64 + sub[1]];
        out.confidences[t] = peak.clamp(0.0, 1.0);
        prev = [ix + sub[0].round() as i64, iy + sub[1].round() as i64];
    }
    out
}

/// Track every grid point through the video with a frame-1 template and
/// zero-normalized cross-correlation.
pub fn track_ncc(
    video: &VideoFrames,
    grid: &QueryGrid,
    params: &TrackParams,
) -> Result<DeltaField> {
    track_frames(&video.frames, &video.reference_times, grid, params)
}

/// [`track_ncc`] over bare frames with explicit frame times.
pub fn track_frames(
    frames: &[RgbImage],
    frame_times: &[f64],
    grid: &QueryGrid,
    params: &TrackParams,
) -> Result<DeltaField> {
    if frames.len() < 2 {
        return Err(Error::Argument("tracking needs at least 2 frames".into()));
    }
    if frame_times.len() != frames.len() {
        return Err(Error::Argument(
            "one frame time per frame is required".into(),
        ));
    }
    if params.patch_px % 2 == 0 || params.patch_px < 3 {
        return Err(Error::Argument(format!(
            "patch size must be odd and at least 3, got {}",
            params.patch_px
        )));
    }
    let (w, h) = (frames[0].width(), frames[0].height());
    if frames.iter().any(|f| f.width() != w || f.height() != h) {
        return Err(Error::Argument("frames differ in size".into()));
    }
    let half = params.patch_px / 2;
    let anchors = grid
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (x, y) = (p[0].round(), p[1].round());
            if x < half as f64
                || y < half as f64
                || x + half as f64 > (w - 1) as f64
                || y + half as f64 > (h - 1) as f64
            {
                Err(Error::Argument(format!(
                    "patch around query point {i} leaves the frame"
                )))
            } else {
                Ok([x as usize, y as usize])
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let prepared: Vec<Frame> = frames
        .par_iter()
        .map(|f| {
            let gray = f.to_gray();
            let integral = Integral::new(&gray, w, h);
            Frame { gray, integral }
        })
        .collect();
    let tracks: Vec<PointTrack> = anchors
        .par_iter()
        .map(|&a| track_point(&prepared, w, h, a, params))
        .collect();

    let mut field = DeltaField::zeros(grid.len(), frame_times.to_vec());
    for (p, tr) in tracks.iter().enumerate() {
        field.flagged[p] = tr.flat;
        for t in 0..frames.len() {
            field.deltas[[p, t, 0]] = tr.deltas[t][0];
            field.deltas[[p, t, 1]] = tr.deltas[t][1];
            field.confidences[[p, t]] = tr.confidences[t];
        }
    }
    fill_flat_points(&mut field, grid);
    Ok(field)
}

/// Copy deltas into flagged points from the nearest unflagged point on the
/// lattice; confidence stays at 0.
fn fill_flat_points(field: &mut DeltaField, grid: &QueryGrid) {
    let donors: Vec<usize> = (0..grid.len()).filter(|&p| !field.flagged[p]).collect();
    if donors.is_empty() {
        return;
    }
    for p in 0..grid.len() {
        if !field.flagged[p] {
            continue;
        }
        let [gx, gy] = grid.lattice[p];
        let &src = donors
            .iter()
            .min_by_key(|&&q| {
                let [qx, qy] = grid.lattice[q];
                ((qx - gx).pow(2) + (qy - gy).pow(2), q)
            })
            .expect("non-empty donors");
        for t in 0..field.n_frames() {
            field.deltas[[p, t, 0]] = field.deltas[[src, t, 0]];
            field.deltas[[p, t, 1]] = field.deltas[[src, t, 1]];
        }
    }
}
