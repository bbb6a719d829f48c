use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_pair(pred: &[f64], labels: &[f64]) -> Result<()> {
    if pred.len() != labels.len() {
        return Err(Error::Dimension {
            op: "metrics",
            lhs: vec![pred.len()],
            rhs: vec![labels.len()],
        });
    }
    if pred.is_empty() {
        return Err(Error::Contract(
            "metrics need at least one prediction".into(),
        ));
    }
    Ok(())
}

/// `√(mean (ŷ − y)²)`.
pub fn rmse(pred: &[f64], labels: &[f64]) -> Result<f64> {
    check_pair(pred, labels)?;
    let sse: f64 = pred
        .iter()
        .zip(labels)
        .map(|(p, y)| (p - y) * (p - y))
        .sum();
    Ok((sse / pred.len() as f64).sqrt())
}

/// Fraction of predictions inside `[y − w·rul_max, y + w·rul_max]`, per width `w`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CiCurve {
    pub widths: Vec<f64>,
    pub values: Vec<f64>,
}

impl CiCurve {
    /// Value at the width closest to `w`.
    pub fn at(&self, w: f64) -> Option<f64> {
        self.widths
            .iter()
            .position(|x| (x - w).abs() < 1e-9)
            .map(|i| self.values[i])
    }
}

/// The widths `0.00, 0.01, …, 0.30`.
pub fn default_ci_widths() -> Vec<f64> {
    (0..=30).map(|k| k as f64 / 100.0).collect()
}

/// Closed-interval CI scores over `widths` (fractions of `rul_max`).
pub fn ci_scoring(pred: &[f64], labels: &[f64], rul_max: f64, widths: &[f64]) -> Result<CiCurve> {
    check_pair(pred, labels)?;
    let errors: Vec<f64> = pred
        .iter()
        .zip(labels)
        .map(|(p, y)| (p - y).abs())
        .collect();
    let n = errors.len() as f64;
    let values = widths
        .iter()
        .map(|w| {
            let half = w * rul_max;
            errors.iter().filter(|&&e| e <= half).count() as f64 / n
        })
        .collect();
    Ok(CiCurve {
        widths: widths.to_vec(),
        values,
    })
}
