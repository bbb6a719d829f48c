//! Synthetic run-to-failure data for a two-stage gain-controlled EDFA.
//!
//! All constants are synthetic and configurable. The model is behavioral:
//! an affine pump law, dB-space loss accounting and closed-loop stage gain
//! control.

mod amplifier;
mod degradation;
mod generator;

pub use amplifier::{Amplifier, AmplifierParams, AmplifierState, Impairments};
pub use degradation::{
    degrade, degrade_passive, degrade_pd, degrade_pump, degrade_voa, Component, DegradationGroup,
    DegradationMode, DriftLaw,
};
pub use generator::{
    generate_dataset, generate_run_to_failure, generate_subset, simulate_trajectory, DatasetSpec,
    DatasetSummary, GeneratedSubset, GeneratorParams, SubsetMetadata, SubsetSpec, SubsetSummary,
    UnitRecord, OP_CONDITION_NAMES, SENSOR_NAMES, SPEC_FORMAT_VERSION,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One (input power, target gain) operating condition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingCell {
    /// Total input power (dBm).
    pub input_power: f64,
    /// Target total gain (dB).
    pub target_gain: f64,
}

/// Regular grid of operating conditions: 17 input powers × 9 target gains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingGrid {
    pub input_powers: Vec<f64>,
    pub target_gains: Vec<f64>,
}

impl Default for OperatingGrid {
    fn default() -> Self {
        Self {
            input_powers: (0..17).map(|i| -35.0 + 2.25 * i as f64).collect(),
            target_gains: (0..9).map(|i| 19.0 + 2.0 * i as f64).collect(),
        }
    }
}

impl OperatingGrid {
    pub fn len(&self) -> usize {
        self.input_powers.len() * self.target_gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell `i` in power-major order.
    pub fn cell(&self, i: usize) -> OperatingCell {
        let g = self.target_gains.len();
        OperatingCell {
            input_power: self.input_powers[i / g],
            target_gain: self.target_gains[i % g],
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = OperatingCell> + '_ {
        (0..self.len()).map(|i| self.cell(i))
    }

    pub fn contains(&self, cell: OperatingCell) -> bool {
        self.input_powers.contains(&cell.input_power)
            && self.target_gains.contains(&cell.target_gain)
    }
}

/// Gain-split lookup table: per target gain, the stage-1 and stage-2 setpoints.
/// `LOSS_INT` is defined as the remainder so the budget closes exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainLookup {
    /// `(G, G1, G2)` rows, strictly increasing in `G`.
    pub rows: Vec<(f64, f64, f64)>,
}

impl Default for GainLookup {
    fn default() -> Self {
        let rows = (0..9)
            .map(|i| {
                let g = 19.0 + 2.0 * i as f64;
                (g, 14.0 + 0.3 * (g - 19.0), 12.0 + 0.6 * (g - 19.0))
            })
            .collect();
        Self { rows }
    }
}

impl GainLookup {
    pub fn range(&self) -> (f64, f64) {
        (
            self.rows.first().map_or(f64::NAN, |r| r.0),
            self.rows.last().map_or(f64::NAN, |r| r.0),
        )
    }

    /// `(G1, G2, LOSS_INT)` for target gain `g`, linearly interpolated between rows.
    pub fn split(&self, g: f64) -> Result<(f64, f64, f64)> {
        let (lo, hi) = self.range();
        if !(lo..=hi).contains(&g) {
            return Err(Error::Config(format!(
                "target gain {g} dB outside the lookup range [{lo}, {hi}]"
            )));
        }
        let k = self.rows.windows(2).position(|w| g <= w[1].0).unwrap_or(0);
        let (g1, g2) = if self.rows.len() == 1 {
            (self.rows[0].1, self.rows[0].2)
        } else {
            let (a, b) = (self.rows[k], self.rows[k + 1]);
            let f = (g - a.0) / (b.0 - a.0);
            (a.1 + f * (b.1 - a.1), a.2 + f * (b.2 - a.2))
        };
        Ok((g1, g2, g - g1 - g2))
    }
}

/// `(G1, G2, LOSS_INT)` from the default lookup table.
pub fn gain_split(g: f64) -> Result<(f64, f64, f64)> {
    GainLookup::default().split(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_153_cells_on_the_stated_ranges() {
        let grid = OperatingGrid::default();
        assert_eq!(grid.len(), 153);
        assert_eq!(grid.input_powers.first(), Some(&-35.0));
        assert_eq!(grid.input_powers.last(), Some(&1.0));
        assert_eq!(grid.target_gains.first(), Some(&19.0));
        assert_eq!(grid.target_gains.last(), Some(&35.0));
        assert!(grid.cells().all(|c| grid.contains(c)));
    }

    #[test]
    fn split_closes_budget_and_is_monotone() {
        let mut prev = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for i in 0..=160 {
            let g = 19.0 + 0.1 * i as f64;
            let (g1, g2, loss) = gain_split(g).unwrap();
            assert!(loss <= 0.0);
            assert!((g1 + g2 + loss - g).abs() < 1e-12);
            assert!(g1 >= prev.0 && g2 >= prev.1);
            prev = (g1, g2);
        }
    }

    #[test]
    fn out_of_range_gain_is_config_error() {
        assert!(matches!(gain_split(18.9), Err(Error::Config(_))));
        assert!(matches!(gain_split(35.5), Err(Error::Config(_))));
    }

    #[test]
    fn budget_arithmetic() {
        let lut = GainLookup {
            rows: vec![(20.0, 15.0, 10.0), (30.0, 25.0, 10.0)],
        };
        let (g1, g2, loss) = lut.split(25.0).unwrap();
        assert_eq!((g1, g2, loss), (20.0, 10.0, -5.0));
        let lut = GainLookup {
            rows: vec![(20.0, 12.0, 8.0)],
        };
        assert_eq!(lut.split(20.0).unwrap(), (12.0, 8.0, 0.0));
    }
}
