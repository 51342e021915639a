//! Rotation trajectories: uniform-time containers, interpolation, rebasing,
//! densification, alignment, and CSV I/O.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RotationSample;

/// Allowed deviation of a timestamp from the uniform grid, in ms.
pub const SPACING_TOLERANCE_MS: f64 = 1e-6;

pub const CSV_HEADER: [&str; 4] = ["t_ms", "alpha_rad", "beta_rad", "gamma_rad"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryLabel {
    DenseGroundTruth,
    SparsePerFrame,
    Densified,
}

/// Uniformly sampled sequence of rotations, at least two samples long.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<RotationSample>,
    sampling_interval: f64,
    label: TrajectoryLabel,
}

impl Trajectory {
    pub fn new(samples: Vec<RotationSample>, label: TrajectoryLabel) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Data(format!(
                "a trajectory needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        for s in &samples {
            s.validate()?;
        }
        let n = samples.len();
        let t0 = samples[0].t_ms;
        let dt = (samples[n - 1].t_ms - t0) / (n - 1) as f64;
        if !(dt > 0.0) {
            return Err(Error::Data(
                "trajectory timestamps must be strictly increasing".into(),
            ));
        }
        for (i, w) in samples.windows(2).enumerate() {
            if w[1].t_ms <= w[0].t_ms {
                return Err(Error::Data(format!(
                    "timestamps not strictly increasing at sample {}: {} then {}",
                    i + 1,
                    w[0].t_ms,
                    w[1].t_ms
                )));
            }
        }
        for (i, s) in samples.iter().enumerate() {
            let expected = t0 + i as f64 * dt;
            if (s.t_ms - expected).abs() > SPACING_TOLERANCE_MS {
                return Err(Error::Data(format!(
                    "non-uniform sampling at sample {i}: t = {} ms, expected {expected} ms",
                    s.t_ms
                )));
            }
        }
        Ok(Self {
            samples,
            sampling_interval: dt,
            label,
        })
    }

    /// Samples at `t0 + i * interval` from per-index angles.
    pub fn from_fn(
        t0: f64,
        interval: f64,
        count: usize,
        label: TrajectoryLabel,
        mut f: impl FnMut(f64) -> [f64; 3],
    ) -> Result<Self> {
        let samples = (0..count)
            .map(|i| {
                let t = t0 + i as f64 * interval;
                let [a, b, g] = f(t);
                RotationSample::angles(t, a, b, g)
            })
            .collect();
        Self::new(samples, label)
    }

    pub fn samples(&self) -> &[RotationSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sampling_interval(&self) -> f64 {
        self.sampling_interval
    }

    pub fn label(&self) -> TrajectoryLabel {
        self.label
    }

    pub fn with_label(mut self, label: TrajectoryLabel) -> Self {
        self.label = label;
        self
    }

    pub fn start(&self) -> f64 {
        self.samples[0].t_ms
    }

    pub fn end(&self) -> f64 {
        self.samples[self.samples.len() - 1].t_ms
    }

    pub fn duration(&self) -> f64 {
        self.end() - self.start()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t_ms).collect()
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start() - SPACING_TOLERANCE_MS && t <= self.end() + SPACING_TOLERANCE_MS
    }

    fn range_error(&self, what: &'static str, t: f64) -> Error {
        Error::Range {
            what,
            value: t,
            start: self.start(),
            end: self.end(),
        }
    }

    /// Linear interpolation per angle; exact at sample timestamps.
    pub fn sample_at(&self, t: f64) -> Result<RotationSample> {
        if !t.is_finite() || !self.contains(t) {
            return Err(self.range_error("time", t));
        }
        let n = self.samples.len();
        let pos = (t - self.start()) / self.sampling_interval;
        let mut i = (pos.floor().max(0.0) as usize).min(n - 2);
        while i > 0 && t < self.samples[i].t_ms {
            i -= 1;
        }
        while i + 2 < n && t > self.samples[i + 1].t_ms {
            i += 1;
        }
        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        if t == a.t_ms {
            return Ok(RotationSample { t_ms: t, ..*a });
        }
        if t == b.t_ms {
            return Ok(RotationSample { t_ms: t, ..*b });
        }
        let f = ((t - a.t_ms) / (b.t_ms - a.t_ms)).clamp(0.0, 1.0);
        Ok(RotationSample::lerp(a, b, f, t))
    }

    pub fn resample(&self, times: &[f64]) -> Result<Vec<RotationSample>> {
        times.iter().map(|&t| self.sample_at(t)).collect()
    }

    /// Angles relative to `sample_at(t0)`, timestamps shifted so `t0 ↦ 0`.
    pub fn rebase(&self, t0: f64) -> Result<Trajectory> {
        let origin = self.sample_at(t0)?;
        let samples = self
            .samples
            .iter()
            .map(|s| {
                let mut r = s.minus(&origin);
                r.t_ms = s.t_ms - t0;
                r
            })
            .collect();
        Ok(Trajectory {
            samples,
            sampling_interval: self.sampling_interval,
            label: self.label,
        })
    }

    /// Portion covering `[t0, t1]`, rebased at `t0` and resampled on a grid
    /// of the original interval starting at 0.
    pub fn segment(&self, t0: f64, t1: f64) -> Result<Trajectory> {
        if !(t1 > t0) {
            return Err(Error::Argument(format!("empty segment [{t0}, {t1}]")));
        }
        if !self.contains(t0) {
            return Err(self.range_error("segment start", t0));
        }
        if !self.contains(t1) {
            return Err(self.range_error("segment end", t1));
        }
        let origin = self.sample_at(t0)?;
        let dt = self.sampling_interval;
        let count = ((t1 - t0) / dt + 1e-9).floor() as usize + 1;
        let samples = (0..count.max(2))
            .map(|i| {
                let t = (t0 + i as f64 * dt).min(self.end());
                let mut s = self.sample_at(t)?.minus(&origin);
                s.t_ms = i as f64 * dt;
                Ok(s)
            })
            .collect::<Result<Vec<_>>>()?;
        Trajectory::new(samples, self.label)
    }

    pub fn read_csv<R: Read>(reader: R, label: TrajectoryLabel) -> Result<Trajectory> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().map(str::trim).ne(CSV_HEADER) {
            return Err(Error::Data(format!(
                "expected trajectory header `{}`, found `{}`",
                CSV_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut samples = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != 4 {
                return Err(Error::Data(format!("row {}: expected 4 fields", line + 1)));
            }
            let mut v = [0.0; 4];
            for (k, field) in rec.iter().enumerate() {
                v[k] = field.trim().parse::<f64>().map_err(|e| {
                    Error::Data(format!("row {}: cannot parse `{field}`: {e}", line + 1))
                })?;
            }
            samples.push(RotationSample::new(v[0], v[1], v[2], v[3])?);
        }
        Trajectory::new(samples, label)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_HEADER)?;
        for s in &self.samples {
            w.write_record([
                s.t_ms.to_string(),
                s.alpha.to_string(),
                s.beta.to_string(),
                s.gamma.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path, label: TrajectoryLabel) -> Result<Trajectory> {
        let file = std::fs::File::open(path)?;
        Trajectory::read_csv(std::io::BufReader::new(file), label).map_err(|e| match e {
            Error::Data(message) | Error::Argument(message) => Error::format(path, message),
            Error::Csv(err) => Error::format(path, err.to_string()),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Piecewise-linear upsampling: `samples_per_frame` uniformly spaced samples
/// per inter-frame interval, endpoints kept.
pub fn densify_linear(sparse: &Trajectory, samples_per_frame: usize) -> Result<Trajectory> {
    if samples_per_frame == 0 {
        return Err(Error::Argument(
            "samples_per_frame must be at least 1".into(),
        ));
    }
    let src = sparse.samples();
    let k = samples_per_frame;
    let step = sparse.sampling_interval() / k as f64;
    let t0 = sparse.start();
    let total = (src.len() - 1) * k + 1;
    let samples = (0..total)
        .map(|j| {
            let t = t0 + j as f64 * step;
            let (i, r) = (j / k, j % k);
            if r == 0 {
                RotationSample { t_ms: t, ..src[i] }
            } else {
                RotationSample::lerp(&src[i], &src[i + 1], r as f64 / k as f64, t)
            }
        })
        .collect();
    Trajectory::new(samples, TrajectoryLabel::Densified)
}

/// Resample `gt` on `pred`'s timestamps and rebase both to their first
/// sample (constant-offset alignment). Both results start at `t = 0`.
pub fn align(pred: &Trajectory, gt: &Trajectory) -> Result<(Trajectory, Trajectory)> {
    if pred.end() < gt.start() || pred.start() > gt.end() {
        return Err(Error::Range {
            what: "prediction time range start",
            value: pred.start(),
            start: gt.start(),
            end: gt.end(),
        });
    }
    let resampled = gt.resample(&pred.times())?;
    let gt_on_pred = Trajectory::new(resampled, gt.label())?;
    let t0 = pred.start();
    Ok((pred.rebase(t0)?, gt_on_pred.rebase(t0)?))
}
