use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::{logistic, sigmoid};

/// Logits beyond this are clamped so fused scores stay inside (0, 1).
const LOGIT_LIMIT: f64 = 35.0;
pub const DEFAULT_FUSION_L2: f64 = 1e-3;

/// Logistic regression over standardized detector scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionModel {
    detectors: Vec<String>,
    mean: Vec<f64>,
    scale: Vec<f64>,
    weights: Vec<f64>,
    intercept: f64,
}

impl FusionModel {
    pub fn detectors(&self) -> &[String] {
        &self.detectors
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `rows[i][j]` is detector `detectors[j]` on sample `i`.
    pub fn train(detectors: &[String], rows: &[Vec<f64>], is_machine: &[bool], l2: f64) -> Result<Self> {
        let d = detectors.len();
        if d < 2 {
            return Err(Error::Argument("fusion needs at least two detectors".into()));
        }
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Contract(format!("every score vector must have {d} entries")));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Argument("detector scores must be finite".into()));
        }
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let scale: Vec<f64> = (0..d)
            .map(|j| {
                let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let standardized: Vec<_> =
            rows.iter().map(|r| (0..d).map(|j| (j as u32, (r[j] - mean[j]) / scale[j])).collect()).collect();
        let fit = logistic(&standardized, d, is_machine, l2)?;
        Ok(Self { detectors: detectors.to_vec(), mean, scale, weights: fit.weights, intercept: fit.intercept })
    }

    /// Fused probability of machine authorship, strictly within (0, 1).
    /// `detectors` must name the same detectors in the same order as training.
    pub fn apply(&self, detectors: &[String], scores: &[f64]) -> Result<f64> {
        if detectors != self.detectors.as_slice() {
            return Err(Error::Contract(format!(
                "fusion was trained on detectors {:?} but received {:?}",
                self.detectors, detectors
            )));
        }
        if scores.len() != self.weights.len() {
            return Err(Error::Contract(format!("expected {} scores, got {}", self.weights.len(), scores.len())));
        }
        let z: f64 =
            scores.iter().enumerate().map(|(j, s)| self.weights[j] * (s - self.mean[j]) / self.scale[j]).sum::<f64>()
                + self.intercept;
        Ok(sigmoid(z.clamp(-LOGIT_LIMIT, LOGIT_LIMIT)))
    }
}
