use super::STAT_ROWS;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A `T_w × d_k` slice of a scaled series with its label.
#[derive(Clone, Debug, PartialEq)]
pub struct RawWindow {
    pub start: usize,
    pub end: usize,
    pub rows: Tensor,
    pub label: f64,
}

/// Stride-1 windows over a scaled `L × d_k` series. The window ending at
/// interval `t` is labelled `min(failure_index − t, rul_max)`.
pub fn slide_windows(
    scaled: &Tensor,
    failure_index: usize,
    window: usize,
    rul_max: f64,
) -> Result<Vec<RawWindow>> {
    let (len, _) = scaled.expect_matrix("slide_windows")?;
    if window == 0 || len < window {
        return Err(Error::Contract(format!(
            "series of length {len} is shorter than the window {window}"
        )));
    }
    (0..=len - window)
        .map(|start| {
            let end = start + window - 1;
            Ok(RawWindow {
                start,
                end,
                rows: scaled.slice_rows(start, window)?,
                label: (failure_index.saturating_sub(end) as f64).min(rul_max),
            })
        })
        .collect()
}

/// Least-squares fit of `x[t+1] ≈ a·x[t] + b`.
///
/// When the regressors `x[0..n−1]` have zero spread the slope is 0 and the
/// intercept is the mean of the successors.
pub fn successor_regression(x: &[f64]) -> (f64, f64) {
    let n = x.len() - 1;
    let xs = &x[..n];
    let ys = &x[1..];
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (a, b) in xs.iter().zip(ys) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    let scale = xs.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if sxx <= nf * (64.0 * f64::EPSILON * scale).powi(2) {
        return (0.0, my);
    }
    let a = sxy / sxx;
    (a, my - a * mx)
}

/// Appends per-channel mean, successor slope and intercept rows to a window.
pub fn stat_features(window: &Tensor) -> Result<Tensor> {
    let (t, c) = window.expect_matrix("stat_features")?;
    if t < 2 {
        return Err(Error::Contract(format!(
            "statistical features need a window of at least 2 rows, got {t}"
        )));
    }
    let mut means = vec![0.0; c];
    let mut slopes = vec![0.0; c];
    let mut intercepts = vec![0.0; c];
    let mut column = vec![0.0; t];
    for j in 0..c {
        for (i, v) in column.iter_mut().enumerate() {
            *v = window.get(i, j);
        }
        means[j] = column.iter().sum::<f64>() / t as f64;
        let (a, b) = successor_regression(&column);
        slopes[j] = a;
        intercepts[j] = b;
    }
    let mut data = Vec::with_capacity((t + STAT_ROWS) * c);
    data.extend_from_slice(window.data());
    data.extend(means);
    data.extend(slopes);
    data.extend(intercepts);
    Tensor::matrix(t + STAT_ROWS, c, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(values: &[f64]) -> Tensor {
        Tensor::matrix(values.len(), 1, values.to_vec()).unwrap()
    }

    #[test]
    fn window_counts_and_labels() {
        let s = Tensor::zeros(vec![40, 2]);
        assert_eq!(slide_windows(&s, 39, 40, 125.0).unwrap().len(), 1);
        let s = Tensor::zeros(vec![45, 2]);
        let w = slide_windows(&s, 44, 40, 125.0).unwrap();
        assert_eq!(w.len(), 6);
        assert_eq!(w.last().unwrap().label, 0.0);
        assert!(slide_windows(&Tensor::zeros(vec![39, 2]), 38, 40, 125.0).is_err());
    }

    #[test]
    fn labels_cap_at_rul_max() {
        let s = Tensor::zeros(vec![300, 1]);
        let w = slide_windows(&s, 299, 40, 125.0).unwrap();
        let at = |end: usize| w.iter().find(|w| w.end == end).unwrap().label;
        assert_eq!(at(299 - 130), 125.0);
        assert_eq!(at(299 - 125), 125.0);
        assert_eq!(at(299 - 124), 124.0);
        assert_eq!(at(299), 0.0);
    }

    #[test]
    fn constant_sensor_features() {
        let f = stat_features(&column(&[3.5; 6])).unwrap();
        assert_eq!(f.shape(), &[9, 1]);
        assert_eq!(f.get(6, 0), 3.5);
        assert_eq!(f.get(7, 0), 0.0);
        assert_eq!(f.get(8, 0), 3.5);
    }

    #[test]
    fn arithmetic_progression_has_unit_slope_and_intercept() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        let (a, b) = successor_regression(&v);
        assert!((a - 1.0).abs() < 1e-12);
        assert!((b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn needs_two_rows() {
        assert!(stat_features(&column(&[1.0])).is_err());
    }
}
