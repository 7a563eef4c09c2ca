use serde::{Deserialize, Serialize};

use super::NnError;
use crate::io::HexVec;

/// Per-feature affine normalization `(x - mean) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: HexVec,
    pub scale: HexVec,
}

impl Standardizer {
    pub fn identity(n: usize) -> Self {
        Standardizer {
            mean: HexVec(vec![0.0; n]),
            scale: HexVec(vec![1.0; n]),
        }
    }

    /// Fits mean and standard deviation; features with (near) zero spread
    /// keep scale 1.
    pub fn fit<'a, I>(rows: I) -> Result<Self, NnError>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut n = 0usize;
        let mut sum: Vec<f64> = Vec::new();
        let mut sq: Vec<f64> = Vec::new();
        for r in rows {
            if n == 0 {
                sum = vec![0.0; r.len()];
                sq = vec![0.0; r.len()];
            } else if r.len() != sum.len() {
                return Err(NnError::Shape(vec![sum.len()], vec![r.len()]));
            }
            for (k, v) in r.iter().enumerate() {
                sum[k] += v;
                sq[k] += v * v;
            }
            n += 1;
        }
        if n == 0 {
            return Err(NnError::InsufficientData("no rows to fit a standardizer".into()));
        }
        let nf = n as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
        let scale = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let var = (q / nf - m * m).max(0.0);
                let sd = var.sqrt();
                if sd > 1e-9 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer {
            mean: HexVec(mean),
            scale: HexVec(scale),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.0.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean.0)
            .zip(&self.scale.0)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.mean.0)
            .zip(&self.scale.0)
            .map(|((v, m), s)| v * s + m)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_and_round_trip() {
        let rows = [vec![1.0, 5.0], vec![3.0, 5.0]];
        let s = Standardizer::fit(rows.iter().map(|r| r.as_slice())).unwrap();
        assert_eq!(s.mean.0, vec![2.0, 5.0]);
        assert_eq!(s.scale.0, vec![1.0, 1.0]);
        assert_eq!(s.apply(&[3.0, 5.0]), vec![1.0, 0.0]);
        assert_eq!(s.invert(&s.apply(&[7.5, -2.0])), vec![7.5, -2.0]);
        assert!(Standardizer::fit(std::iter::empty()).is_err());
    }
}
