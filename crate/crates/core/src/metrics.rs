//! Evaluation measures: joint-space jerkiness, end-effector displacement,
//! task time, regression errors and mean ± std aggregation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Vec3;

pub const SAMPLE_DT: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("need at least {need} samples, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("frames have differing joint counts")]
    Ragged,
    #[error("lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("dt must be positive")]
    BadDt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTrajectory {
    pub frames: Vec<Vec<f64>>,
    pub dt: f64,
}

impl JointTrajectory {
    pub fn new(frames: Vec<Vec<f64>>, dt: f64) -> Result<Self, MetricsError> {
        if !(dt > 0.0) {
            return Err(MetricsError::BadDt);
        }
        if let Some(first) = frames.first() {
            if frames.iter().any(|f| f.len() != first.len()) {
                return Err(MetricsError::Ragged);
            }
        }
        Ok(JointTrajectory { frames, dt })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Linear resampling onto a grid of step `dt` starting at the first frame.
    pub fn resampled(&self, dt: f64) -> JointTrajectory {
        if self.frames.len() < 2 || (self.dt - dt).abs() < 1e-12 {
            return JointTrajectory {
                frames: self.frames.clone(),
                dt,
            };
        }
        let duration = (self.frames.len() - 1) as f64 * self.dt;
        let n = (duration / dt + 1e-9).floor() as usize + 1;
        let frames = (0..n)
            .map(|k| {
                let s = (k as f64 * dt / self.dt).min((self.frames.len() - 1) as f64);
                let i = (s.floor() as usize).min(self.frames.len() - 2);
                let w = s - i as f64;
                self.frames[i]
                    .iter()
                    .zip(&self.frames[i + 1])
                    .map(|(a, b)| a + w * (b - a))
                    .collect()
            })
            .collect();
        JointTrajectory { frames, dt }
    }
}

/// Sum over samples and joints of absolute angle change, in degrees, after
/// resampling to 0.1 s.
pub fn jerkiness(traj: &JointTrajectory) -> Result<f64, MetricsError> {
    if traj.frames.len() < 2 {
        return Err(MetricsError::TooShort {
            need: 2,
            got: traj.frames.len(),
        });
    }
    let t = traj.resampled(SAMPLE_DT);
    Ok(t.frames
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (b - a).abs()).sum::<f64>())
        .sum::<f64>()
        .to_degrees())
}

/// Path length of the end-effector.
pub fn displacement(path: &[Vec3]) -> Result<f64, MetricsError> {
    if path.len() < 2 {
        return Err(MetricsError::TooShort {
            need: 2,
            got: path.len(),
        });
    }
    Ok(path.windows(2).map(|w| (w[1] - w[0]).norm()).sum())
}

pub fn task_time(traj: &JointTrajectory) -> Result<f64, MetricsError> {
    if traj.frames.is_empty() {
        return Err(MetricsError::TooShort { need: 1, got: 0 });
    }
    Ok((traj.frames.len() - 1) as f64 * traj.dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    /// Absent when the target has zero variance.
    pub r2: Option<f64>,
}

pub fn regression_metrics(pred: &[f64], target: &[f64]) -> Result<RegressionMetrics, MetricsError> {
    if pred.len() != target.len() {
        return Err(MetricsError::LengthMismatch(pred.len(), target.len()));
    }
    let n = target.len();
    if n < 2 {
        return Err(MetricsError::TooShort { need: 2, got: n });
    }
    let nf = n as f64;
    let ss_res: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    let mae = pred.iter().zip(target).map(|(p, t)| (p - t).abs()).sum::<f64>() / nf;
    let mean = target.iter().sum::<f64>() / nf;
    let ss_tot: f64 = target.iter().map(|t| (t - mean) * (t - mean)).sum();
    let mse = ss_res / nf;
    Ok(RegressionMetrics {
        mse,
        rmse: mse.sqrt(),
        mae,
        r2: if ss_tot > 0.0 { Some(1.0 - ss_res / ss_tot) } else { None },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample (n-1) standard deviation; absent for a single value.
    pub std: Option<f64>,
    pub n: usize,
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.std {
            Some(s) => write!(f, "{:.2} ± {:.2}", self.mean, s),
            None => write!(f, "{:.2}", self.mean),
        }
    }
}

pub fn aggregate(values: &[f64]) -> Result<Summary, MetricsError> {
    let n = values.len();
    if n == 0 {
        return Err(MetricsError::TooShort { need: 1, got: 0 });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = (n > 1).then(|| {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    });
    Ok(Summary { mean, std, n })
}

/// One row of the benchmark table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: String,
    pub avg_time_s: Summary,
    pub avg_jerkiness_deg: Summary,
    pub avg_displacement_m: Summary,
}
