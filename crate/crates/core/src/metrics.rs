//! Trajectory error metrics and evaluation reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{align, Trajectory};

pub const REPORT_SCHEMA: &str = "blurcam-eval-1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Accuracy thresholds `τ`, ascending.
    pub thresholds: Vec<f64>,
    /// Ground-truth magnitude (rad) below which the error is scaled by
    /// `epsilon` instead of `|gt|`.
    pub epsilon: f64,
    /// Upper bound on the per-axis term in that near-zero case.
    pub cap: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            thresholds: vec![0.10, 0.25],
            epsilon: 1e-6,
            cap: 10.0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.cap > 0.0) {
            return Err(Error::Argument("epsilon and cap must be positive".into()));
        }
        if self.thresholds.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::Argument(
                "accuracy thresholds must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Relative error of one angle.
    pub fn axis_term(&self, pred: f64, gt: f64) -> f64 {
        let err = (pred - gt).abs();
        if gt.abs() < self.epsilon {
            (err / self.epsilon).min(self.cap)
        } else {
            err / gt.abs()
        }
    }

    /// Mean of the three per-axis terms of a sample.
    pub fn sample_term(&self, pred: [f64; 3], gt: [f64; 3]) -> f64 {
        (0..3).map(|k| self.axis_term(pred[k], gt[k])).sum::<f64>() / 3.0
    }
}

fn check_paired(pred: &Trajectory, gt: &Trajectory) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::Argument(format!(
            "prediction has {} samples, ground truth {}",
            pred.len(),
            gt.len()
        )));
    }
    Ok(())
}

/// Per-sample axis-mean relative errors, in timestamp order.
pub fn per_sample_errors(pred: &Trajectory, gt: &Trajectory, cfg: &EvalConfig) -> Result<Vec<f64>> {
    check_paired(pred, gt)?;
    Ok(pred
        .samples()
        .iter()
        .zip(gt.samples())
        .map(|(p, g)| cfg.sample_term(p.as_array(), g.as_array()))
        .collect())
}

/// Mean relative error over samples and axes. Inputs must already be aligned.
pub fn abs_rel(pred: &Trajectory, gt: &Trajectory, cfg: &EvalConfig) -> Result<f64> {
    let e = per_sample_errors(pred, gt, cfg)?;
    Ok(e.iter().sum::<f64>() / e.len() as f64)
}

/// Fraction of samples whose axis-mean relative error is below `tau`.
pub fn accuracy(pred: &Trajectory, gt: &Trajectory, tau: f64, cfg: &EvalConfig) -> Result<f64> {
    let e = per_sample_errors(pred, gt, cfg)?;
    Ok(e.iter().filter(|&&v| v < tau).count() as f64 / e.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub tau: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: String,
    pub abs_rel: f64,
    pub e: Vec<Accuracy>,
    /// Mean absolute angle error (rad) over samples and axes.
    pub l1_mean: f64,
    /// Axis-mean relative error of every scored sample.
    pub per_frame: Vec<f64>,
    pub samples: usize,
    pub config: EvalConfig,
}

impl EvalReport {
    pub fn accuracy_at(&self, tau: f64) -> Option<f64> {
        self.e.iter().find(|a| a.tau == tau).map(|a| a.fraction)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: EvalReport = serde_json::from_str(text)?;
        if r.schema != REPORT_SCHEMA {
            return Err(Error::Data(format!(
                "unsupported report schema `{}`",
                r.schema
            )));
        }
        Ok(r)
    }

    /// One-line human summary.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "samples={} abs_rel={:.6} l1_mean={:.3e}",
            self.samples, self.abs_rel, self.l1_mean
        );
        for a in &self.e {
            s.push_str(&format!(" e({})={:.4}", a.tau, a.fraction));
        }
        s
    }
}

/// Resample `gt` on `pred`'s timestamps, align, and score every sample
/// after the first. The first aligned sample is zero on both sides by
/// construction and is left out.
pub fn evaluate(pred: &Trajectory, gt: &Trajectory, cfg: &EvalConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let (p, g) = align(pred, gt)?;
    if p.len() < 2 {
        return Err(Error::InsufficientData(
            "evaluation needs at least two prediction samples".into(),
        ));
    }
    let pairs: Vec<([f64; 3], [f64; 3])> = p
        .samples()
        .iter()
        .zip(g.samples())
        .skip(1)
        .map(|(a, b)| (a.as_array(), b.as_array()))
        .collect();
    let per_frame: Vec<f64> = pairs.iter().map(|(a, b)| cfg.sample_term(*a, *b)).collect();
    let n = per_frame.len();
    let abs_rel = per_frame.iter().sum::<f64>() / n as f64;
    let mut thresholds = cfg.thresholds.clone();
    thresholds.sort_by(f64::total_cmp);
    let e = thresholds
        .iter()
        .map(|&tau| Accuracy {
            tau,
            fraction: per_frame.iter().filter(|&&v| v < tau).count() as f64 / n as f64,
        })
        .collect();
    let l1_mean = pairs
        .iter()
        .map(|(a, b)| (0..3).map(|k| (a[k] - b[k]).abs()).sum::<f64>())
        .sum::<f64>()
        / (3 * n) as f64;
    Ok(EvalReport {
        schema: REPORT_SCHEMA.to_string(),
        abs_rel,
        e,
        l1_mean,
        per_frame,
        samples: n,
        config: cfg.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RotationSample;
    use crate::trajectory::TrajectoryLabel;
    use proptest::prelude::*;

    fn curve(scale: f64) -> Trajectory {
        Trajectory::from_fn(0.0, 2.0, 60, TrajectoryLabel::DenseGroundTruth, |t| {
            [
                scale * (1e-3 + 1e-5 * t),
                scale * (2e-3 - 1e-5 * t),
                scale * 1.5e-3,
            ]
        })
        .unwrap()
    }

    #[test]
    fn identical_trajectories_score_perfectly() {
        let g = curve(1.0);
        let cfg = EvalConfig::default();
        assert_eq!(abs_rel(&g, &g, &cfg).unwrap(), 0.0);
        assert_eq!(accuracy(&g, &g, 1e-9, &cfg).unwrap(), 1.0);
        let r = evaluate(&g, &g, &cfg).unwrap();
        // the reference sample is not scored
        assert_eq!(r.samples, g.len() - 1);
        assert_eq!(r.abs_rel, 0.0);
        assert_eq!(r.l1_mean, 0.0);
        assert!(r.e.iter().all(|a| a.fraction == 1.0));
    }

    #[test]
    fn proportional_error() {
        let cfg = EvalConfig::default();
        let v = abs_rel(&curve(1.1), &curve(1.0), &cfg).unwrap();
        assert!((v - 0.1).abs() < 1e-12);
    }

    #[test]
    fn half_exact_half_off() {
        let cfg = EvalConfig::default();
        let gt = curve(1.0);
        let pred = Trajectory::new(
            gt.samples()
                .iter()
                .enumerate()
                .map(|(i, s)| if i % 2 == 0 { *s } else { s.scaled(1.5) })
                .collect(),
            TrajectoryLabel::SparsePerFrame,
        )
        .unwrap();
        assert_eq!(accuracy(&pred, &gt, 0.25, &cfg).unwrap(), 0.5);
    }

    #[test]
    fn near_zero_ground_truth_is_floored_and_capped() {
        let cfg = EvalConfig::default();
        assert_eq!(cfg.axis_term(5e-7, 0.0), 0.5);
        assert_eq!(cfg.axis_term(1.0, 0.0), 10.0);
        assert_eq!(cfg.axis_term(2e-3, 1e-3), 1.0);
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let cfg = EvalConfig::default();
        let short = Trajectory::from_fn(0.0, 2.0, 5, TrajectoryLabel::SparsePerFrame, |_| [0.0; 3])
            .unwrap();
        assert!(matches!(
            abs_rel(&short, &curve(1.0), &cfg),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn report_json_round_trips() {
        let r = evaluate(&curve(1.05), &curve(1.0), &EvalConfig::default()).unwrap();
        let text = r.to_json().unwrap();
        assert!(text.starts_with("{\n  \"schema\": \"blurcam-eval-1\",\n  \"abs_rel\""));
        let back = EvalReport::from_json(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_json().unwrap(), text);
    }

    proptest! {
        #[test]
        fn accuracy_is_monotone_and_sign_flip_invariant(
            rows in prop::collection::vec(
                ((-2e-3f64..2e-3, -2e-3f64..2e-3, -2e-3f64..2e-3), (-2e-4f64..2e-4, -2e-4f64..2e-4)),
                2..40,
            ),
            t1 in 0.01f64..1.0,
            t2 in 0.01f64..1.0,
        ) {
            let cfg = EvalConfig::default();
            let build = |sign: f64, noisy: bool, label| {
                let samples = rows
                    .iter()
                    .enumerate()
                    .map(|(i, &((a, b, g), (na, nb)))| {
                        let (a, b) = if noisy { (a + na, b + nb) } else { (a, b) };
                        RotationSample::angles(i as f64, sign * a, b, sign * g)
                    })
                    .collect();
                Trajectory::new(samples, label).unwrap()
            };
            let gt = build(1.0, false, TrajectoryLabel::DenseGroundTruth);
            let pred = build(1.0, true, TrajectoryLabel::SparsePerFrame);
            let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            prop_assert!(accuracy(&pred, &gt, lo, &cfg).unwrap() <= accuracy(&pred, &gt, hi, &cfg).unwrap());
            let gt_f = build(-1.0, false, TrajectoryLabel::DenseGroundTruth);
            let pred_f = build(-1.0, true, TrajectoryLabel::SparsePerFrame);
            prop_assert_eq!(abs_rel(&pred, &gt, &cfg).unwrap(), abs_rel(&pred_f, &gt_f, &cfg).unwrap());
        }
    }
}
