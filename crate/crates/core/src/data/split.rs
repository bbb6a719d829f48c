use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::RunToFailureSeries;
use crate::error::{Error, Result};

/// Unit-level split: `floor(n · ratio)` units go to the test side.
///
/// With `truncate_window = Some(T_w)` each test series is cut to a length
/// drawn uniformly from `[T_w, L − 1]`, so that it no longer reaches failure
/// but still holds at least one full window. The failure index is kept, so
/// the final row's true RUL is `failure_index − (len − 1)`.
pub fn train_test_split(
    series: &[RunToFailureSeries],
    ratio: f64,
    seed: u64,
    truncate_window: Option<usize>,
) -> Result<(Vec<RunToFailureSeries>, Vec<RunToFailureSeries>)> {
    if series.len() < 2 {
        return Err(Error::Config(format!(
            "train/test split needs at least 2 units, got {}",
            series.len()
        )));
    }
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::Config(format!("split ratio {ratio} not in [0, 1)")));
    }
    let n_test = (series.len() as f64 * ratio).floor() as usize;
    if n_test == 0 {
        return Err(Error::Config(format!(
            "ratio {ratio} leaves no test unit among {}",
            series.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..series.len()).collect();
    order.shuffle(&mut rng);
    let mut test_idx = order[..n_test].to_vec();
    let mut train_idx = order[n_test..].to_vec();
    test_idx.sort_unstable();
    train_idx.sort_unstable();

    let train = train_idx.iter().map(|&i| series[i].clone()).collect();
    let mut test = Vec::with_capacity(n_test);
    for &i in &test_idx {
        let s = &series[i];
        match truncate_window {
            Some(w) if s.len() > w => {
                let len = rng.random_range(w..s.len());
                test.push(s.truncated(len));
            }
            Some(w) => {
                return Err(Error::Config(format!(
                    "unit {} of length {} cannot be truncated and keep a window of {w}",
                    s.unit_id,
                    s.len()
                )))
            }
            None => test.push(s.clone()),
        }
    }
    Ok((train, test))
}
