use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{
    Amplifier, AmplifierParams, AmplifierState, Component, DegradationGroup, DegradationMode,
    OperatingCell, OperatingGrid,
};
use crate::data::{fit_minmax, write_dataset_csv, write_json, RunToFailureSeries, ScalerParams};
use crate::error::{Error, Result};

pub const SPEC_FORMAT_VERSION: u32 = 1;

/// Sensor column order of generated datasets.
pub const SENSOR_NAMES: [&str; 13] = [
    "pump1_current_ma",
    "pump2_current_ma",
    "pump1_power_mw",
    "pump2_power_mw",
    "pd_in1_dbm",
    "pd_out1_dbm",
    "pd_in2_dbm",
    "pd_out2_dbm",
    "voa_voltage_v",
    "stage1_gain_db",
    "stage2_gain_db",
    "total_gain_db",
    "tilt_db",
];

/// Operating-condition column order.
pub const OP_CONDITION_NAMES: [&str; 2] = ["input_power_dbm", "target_gain_db"];

/// Safety cap on simulated intervals for a single unit.
const MAX_INTERVALS: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorParams {
    pub amplifier: AmplifierParams,
    /// Standard deviation of dB-domain measurement noise.
    pub noise_sigma: f64,
    /// Inclusive range of run-to-failure lengths (intervals).
    pub length_range: [usize; 2],
    /// Onset drawn as a uniform fraction of the unit's length.
    pub onset_fraction: [f64; 2],
    /// Failure threshold of every group (dB).
    pub threshold: f64,
    /// Scale of the exponential VOA drift law.
    pub voa_scale: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            amplifier: AmplifierParams::default(),
            noise_sigma: 0.05,
            length_range: [150, 350],
            onset_fraction: [0.0, 0.3],
            threshold: 1.0,
            voa_scale: 0.05,
        }
    }
}

impl GeneratorParams {
    fn validate(&self) -> Result<()> {
        let [lo, hi] = self.length_range;
        if lo < 2 || lo > hi {
            return Err(Error::Config(format!(
                "length_range [{lo}, {hi}] must satisfy 2 <= min <= max"
            )));
        }
        let [a, b] = self.onset_fraction;
        if !(0.0..1.0).contains(&a) || !(a..1.0).contains(&b) {
            return Err(Error::Config(format!(
                "onset_fraction [{a}, {b}] must lie in [0, 1) and be ordered"
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(
                "noise_sigma must be finite and non-negative".into(),
            ));
        }
        if !(self.threshold > 0.0 && self.voa_scale > 0.0) {
            return Err(Error::Config(
                "threshold and voa_scale must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetSpec {
    pub name: String,
    pub group: DegradationGroup,
    /// Total units (train + test).
    pub units: usize,
    /// Target total training rows; when set, train unit lengths are rescaled to meet it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_rows: Option<usize>,
}

/// Versioned generator specification (stored as TOML).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub format_version: u32,
    #[serde(default = "default_ratio")]
    pub split_ratio: f64,
    /// Test units are truncated to a length in `[truncate_window, L − 1]`.
    #[serde(default = "default_truncate")]
    pub truncate_window: usize,
    #[serde(default)]
    pub params: GeneratorParams,
    pub subsets: Vec<SubsetSpec>,
}

fn default_ratio() -> f64 {
    0.33
}

fn default_truncate() -> usize {
    40
}

const TABLE_TRAIN_ROWS: [(&str, DegradationGroup, usize); 4] = [
    ("FD1", DegradationGroup::Pump, 92_100),
    ("FD2", DegradationGroup::Pd, 184_100),
    ("FD3", DegradationGroup::Voa, 46_950),
    ("FD4", DegradationGroup::Passive, 184_100),
];

impl DatasetSpec {
    fn scaled(fraction: f64, params: GeneratorParams, truncate_window: usize) -> Self {
        let ratio = default_ratio();
        let mean_len = (params.length_range[0] + params.length_range[1]) as f64 / 2.0;
        let subsets = TABLE_TRAIN_ROWS
            .iter()
            .map(|&(name, group, rows)| {
                let train_rows = (rows as f64 * fraction).round() as usize;
                let train_units = (train_rows as f64 / mean_len).round().max(1.0);
                SubsetSpec {
                    name: name.into(),
                    group,
                    units: (train_units / (1.0 - ratio)).ceil() as usize,
                    train_rows: Some(train_rows),
                }
            })
            .collect();
        Self {
            format_version: SPEC_FORMAT_VERSION,
            split_ratio: ratio,
            truncate_window,
            params,
            subsets,
        }
    }

    /// Training-row budgets of the four published sub-datasets.
    pub fn full() -> Self {
        Self::scaled(1.0, GeneratorParams::default(), default_truncate())
    }

    /// About 1.5% of the published row budgets, with short units suited to a
    /// window of 8: the FD3 training side holds roughly 500 windows.
    pub fn mini() -> Self {
        let params = GeneratorParams {
            length_range: [20, 40],
            ..GeneratorParams::default()
        };
        Self::scaled(0.015, params, 8)
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "full" => Ok(Self::full()),
            "mini" => Ok(Self::mini()),
            other => Err(Error::Config(format!(
                "unknown preset {other:?} (expected \"full\" or \"mini\")"
            ))),
        }
    }

    /// Keeps only the named sub-datasets.
    pub fn only(mut self, names: &[&str]) -> Self {
        self.subsets.retain(|s| names.contains(&s.name.as_str()));
        self
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != SPEC_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "generator spec version {} is not supported (expected {SPEC_FORMAT_VERSION})",
                self.format_version
            )));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::Config(format!(
                "split_ratio {} not in (0, 1)",
                self.split_ratio
            )));
        }
        self.params.validate()?;
        if self.params.length_range[0] <= self.truncate_window {
            return Err(Error::Config(format!(
                "minimum length {} must exceed truncate_window {}",
                self.params.length_range[0], self.truncate_window
            )));
        }
        for s in &self.subsets {
            let test = (s.units as f64 * self.split_ratio).floor() as usize;
            if test == 0 || test == s.units {
                return Err(Error::Config(format!(
                    "subset {}: {} units cannot be split at ratio {}",
                    s.name, s.units, self.split_ratio
                )));
            }
        }
        Ok(())
    }
}

/// Generation record of one unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub unit_id: u32,
    pub test: bool,
    pub cell: OperatingCell,
    pub mode: DegradationMode,
    /// Length of the complete run to failure.
    pub full_length: usize,
    /// Rows present in the dataset (shorter than `full_length` for test units).
    pub length: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedSubset {
    pub name: String,
    pub train: Vec<RunToFailureSeries>,
    pub test: Vec<RunToFailureSeries>,
    pub units: Vec<UnitRecord>,
}

impl GeneratedSubset {
    pub fn train_rows(&self) -> usize {
        self.train.iter().map(RunToFailureSeries::len).sum()
    }

    pub fn test_rows(&self) -> usize {
        self.test.iter().map(RunToFailureSeries::len).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetSummary {
    pub name: String,
    pub train_units: usize,
    pub test_units: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub train_csv: PathBuf,
    pub test_csv: PathBuf,
    pub metadata: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub seed: u64,
    pub subsets: Vec<SubsetSummary>,
}

/// JSON sidecar written next to each sub-dataset's CSV files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetMetadata {
    pub format_version: u32,
    pub seed: u64,
    pub subset: SubsetSpec,
    pub split_ratio: f64,
    pub truncate_window: usize,
    pub params: GeneratorParams,
    pub sensor_names: Vec<String>,
    pub op_condition_names: Vec<String>,
    /// Min-max scaler fitted on the training units (sensors then op conditions).
    pub scaler: ScalerParams,
    pub units: Vec<UnitRecord>,
}

fn noisy_row(state: &AmplifierState, noise: &mut Option<(Normal<f64>, ChaCha8Rng)>) -> Vec<f64> {
    let mut n = || match noise {
        Some((dist, rng)) => dist.sample(rng),
        None => 0.0,
    };
    let mut lin = |x: f64| x * 10f64.powf(n() / 10.0);
    let linear = [
        state.pump_current[0],
        state.pump_current[1],
        state.pump_power[0],
        state.pump_power[1],
    ]
    .map(&mut lin);
    let voa = lin(state.voa_voltage);
    let mut row = linear.to_vec();
    row.extend(state.pd.map(|p| p + n()));
    row.push(voa);
    row.extend([state.g1, state.g2, state.gain, state.tilt].map(|x| x + n()));
    row
}

fn noise_source(sigma: f64, noise_seed: u64) -> Result<Option<(Normal<f64>, ChaCha8Rng)>> {
    if sigma == 0.0 {
        return Ok(None);
    }
    let dist = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
    Ok(Some((dist, ChaCha8Rng::seed_from_u64(noise_seed))))
}

/// Noisy sensor rows for intervals `0..len` without any failure semantics.
pub fn simulate_trajectory(
    amp: &Amplifier,
    cell: OperatingCell,
    mode: &DegradationMode,
    len: usize,
    noise_sigma: f64,
    noise_seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let mut noise = noise_source(noise_sigma, noise_seed)?;
    (0..len)
        .map(|t| {
            Ok(noisy_row(
                &amp.steady_state(cell, &mode.impairments(t))?,
                &mut noise,
            ))
        })
        .collect()
}

/// Steps the unit until the mode's failure predicate holds; the failing
/// interval is the series' last row.
pub fn generate_run_to_failure(
    unit_id: u32,
    mode: &DegradationMode,
    cell: OperatingCell,
    noise_seed: u64,
    params: &GeneratorParams,
) -> Result<RunToFailureSeries> {
    let amp = Amplifier::new(params.amplifier.clone());
    let mut noise = noise_source(params.noise_sigma, noise_seed)?;
    let mut sensors = Vec::new();
    for t in 0..MAX_INTERVALS {
        let state = amp.steady_state(cell, &mode.impairments(t))?;
        sensors.push(noisy_row(&state, &mut noise));
        if mode.has_failed(&state, t) {
            return Ok(RunToFailureSeries {
                unit_id,
                op_conditions: vec![cell.input_power, cell.target_gain],
                failure_index: t,
                sensors,
            });
        }
    }
    Err(Error::Contract(format!(
        "unit {unit_id}: {:?} did not fail within {MAX_INTERVALS} intervals",
        mode.component
    )))
}

fn name_stream(name: &str) -> u64 {
    // FNV-1a keeps streams stable under reordering of subsets.
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Rescales `lengths` so they sum to `budget`, each staying at least `floor`.
fn fit_budget(lengths: &mut [usize], budget: usize, floor: usize) {
    let total: usize = lengths.iter().sum();
    let factor = budget as f64 / total as f64;
    for l in lengths.iter_mut() {
        *l = ((*l as f64 * factor).round() as usize).max(floor);
    }
    let mut total: usize = lengths.iter().sum();
    let mut i = 0;
    let mut stalled = 0;
    while total != budget && stalled < lengths.len() {
        let l = &mut lengths[i % lengths.len()];
        if total < budget {
            *l += 1;
            total += 1;
            stalled = 0;
        } else if *l > floor {
            *l -= 1;
            total -= 1;
            stalled = 0;
        } else {
            stalled += 1;
        }
        i += 1;
    }
}

/// Generates one sub-dataset in memory. A pure function of `(spec, subset, seed)`.
pub fn generate_subset(
    spec: &DatasetSpec,
    subset: &SubsetSpec,
    seed: u64,
) -> Result<GeneratedSubset> {
    spec.validate()?;
    let params = &spec.params;
    let amp = Amplifier::new(params.amplifier.clone());
    let grid = OperatingGrid::default();
    let base_stream = name_stream(&subset.name) << 20;
    let mut rng = stream_rng(seed, base_stream);

    let n = subset.units;
    let mut cells: Vec<usize> = (0..grid.len()).collect();
    cells.shuffle(&mut rng);
    let [lo, hi] = params.length_range;
    let mut lengths: Vec<usize> = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_test = (n as f64 * spec.split_ratio).floor() as usize;
    let mut is_test = vec![false; n];
    for &i in &order[..n_test] {
        is_test[i] = true;
    }
    if let Some(budget) = subset.train_rows {
        let train_idx: Vec<usize> = (0..n).filter(|&i| !is_test[i]).collect();
        let mut train_lengths: Vec<usize> = train_idx.iter().map(|&i| lengths[i]).collect();
        fit_budget(&mut train_lengths, budget, spec.truncate_window + 1);
        for (&i, l) in train_idx.iter().zip(train_lengths) {
            lengths[i] = l;
        }
    }

    let components = subset.group.components();
    let mut out = GeneratedSubset {
        name: subset.name.clone(),
        train: Vec::new(),
        test: Vec::new(),
        units: Vec::with_capacity(n),
    };
    for i in 0..n {
        let unit_id = i as u32 + 1;
        let cell = grid.cell(cells[i % cells.len()]);
        let component: Component = components[i % components.len()];
        let len = lengths[i];
        let frac = rng.random_range(params.onset_fraction[0]..=params.onset_fraction[1]);
        let onset = ((frac * len as f64).floor() as usize).min(len - 2);
        let horizon = (len - 1 - onset) as f64 - 0.5;
        let law = DegradationMode::default_law(component, params.voa_scale);
        let mode = DegradationMode::calibrated(
            component,
            law,
            onset,
            params.threshold,
            horizon,
            &amp,
            cell,
        )?;
        let noise_seed = stream_rng(seed, base_stream + unit_id as u64).random::<u64>();
        let series = generate_run_to_failure(unit_id, &mode, cell, noise_seed, params)?;
        let full_length = series.len();
        let series = if is_test[i] {
            let keep =
                rng.random_range(spec.truncate_window..full_length.max(spec.truncate_window + 1));
            series.truncated(keep)
        } else {
            series
        };
        out.units.push(UnitRecord {
            unit_id,
            test: is_test[i],
            cell,
            mode,
            full_length,
            length: series.len(),
        });
        if is_test[i] {
            out.test.push(series);
        } else {
            out.train.push(series);
        }
    }
    Ok(out)
}

/// Writes `<name>_train.csv`, `<name>_test.csv` and `<name>_meta.json` per sub-dataset.
pub fn generate_dataset(
    spec: &DatasetSpec,
    seed: u64,
    out_dir: impl AsRef<Path>,
) -> Result<DatasetSummary> {
    spec.validate()?;
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut summary = DatasetSummary {
        seed,
        subsets: Vec::new(),
    };
    for subset in &spec.subsets {
        let g = generate_subset(spec, subset, seed)?;
        let train_csv = dir.join(format!("{}_train.csv", subset.name));
        let test_csv = dir.join(format!("{}_test.csv", subset.name));
        let metadata = dir.join(format!("{}_meta.json", subset.name));
        write_dataset_csv(&train_csv, &g.train)?;
        write_dataset_csv(&test_csv, &g.test)?;
        let meta = SubsetMetadata {
            format_version: SPEC_FORMAT_VERSION,
            seed,
            subset: subset.clone(),
            split_ratio: spec.split_ratio,
            truncate_window: spec.truncate_window,
            params: spec.params.clone(),
            sensor_names: SENSOR_NAMES.iter().map(|s| s.to_string()).collect(),
            op_condition_names: OP_CONDITION_NAMES.iter().map(|s| s.to_string()).collect(),
            scaler: fit_minmax(&g.train, true)?,
            units: g.units.clone(),
        };
        write_json(&metadata, &meta)?;
        summary.subsets.push(SubsetSummary {
            name: subset.name.clone(),
            train_units: g.train.len(),
            test_units: g.test.len(),
            train_rows: g.train_rows(),
            test_rows: g.test_rows(),
            train_csv,
            test_csv,
            metadata,
        });
    }
    Ok(summary)
}
