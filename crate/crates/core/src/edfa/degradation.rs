use serde::{Deserialize, Serialize};

use super::{Amplifier, AmplifierState, Impairments, OperatingCell};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DegradationGroup {
    Pump,
    Pd,
    Voa,
    Passive,
}

impl DegradationGroup {
    /// The fault modes (degrading components) of the group.
    pub fn components(self) -> &'static [Component] {
        use Component::*;
        match self {
            Self::Pump => &[Pump1, Pump2],
            Self::Pd => &[PdIn1, PdOut1, PdIn2, PdOut2],
            Self::Voa => &[Voa],
            Self::Passive => &[InputCoupler, Isolator1, Gff, Isolator2],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Pump1,
    Pump2,
    PdIn1,
    PdOut1,
    PdIn2,
    PdOut2,
    Voa,
    InputCoupler,
    Isolator1,
    Gff,
    Isolator2,
}

impl Component {
    pub fn group(self) -> DegradationGroup {
        use Component::*;
        match self {
            Pump1 | Pump2 => DegradationGroup::Pump,
            PdIn1 | PdOut1 | PdIn2 | PdOut2 => DegradationGroup::Pd,
            Voa => DegradationGroup::Voa,
            InputCoupler | Isolator1 | Gff | Isolator2 => DegradationGroup::Passive,
        }
    }
}

/// Shape of the drift variable after onset, with `τ = t − onset`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum DriftLaw {
    /// `rate · τ`
    Linear,
    /// `scale · (exp(rate · τ) − 1)`
    Exponential { scale: f64 },
}

/// A single degrading component.
///
/// The drift variable is, per group: fractional pump slope-efficiency loss,
/// PD sensitivity loss (dB), fractional VOA attenuation loss, or excess
/// insertion loss (dB). The failure variable is, per group: total gain
/// deficit, PD bias, interstage-loss error, or excess loss, each compared
/// against `threshold` (dB).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradationMode {
    pub component: Component,
    #[serde(flatten)]
    pub law: DriftLaw,
    pub rate: f64,
    pub onset: usize,
    pub threshold: f64,
}

impl DegradationMode {
    pub fn group(&self) -> DegradationGroup {
        self.component.group()
    }

    /// The group's default drift law: exponential for the VOA, linear otherwise.
    pub fn default_law(component: Component, voa_scale: f64) -> DriftLaw {
        match component.group() {
            DegradationGroup::Voa => DriftLaw::Exponential { scale: voa_scale },
            _ => DriftLaw::Linear,
        }
    }

    /// Drift variable at interval `t`; zero up to and including the onset.
    pub fn drift(&self, t: usize) -> f64 {
        let tau = t.saturating_sub(self.onset) as f64;
        match self.law {
            DriftLaw::Linear => self.rate * tau,
            DriftLaw::Exponential { scale } => scale * (self.rate * tau).exp_m1(),
        }
    }

    pub fn impairments(&self, t: usize) -> Impairments {
        let d = self.drift(t);
        let mut imp = Impairments::default();
        use Component::*;
        match self.component {
            Pump1 => imp.pump_efficiency_loss[0] = d,
            Pump2 => imp.pump_efficiency_loss[1] = d,
            PdIn1 => imp.pd_sensitivity_loss[0] = d,
            PdOut1 => imp.pd_sensitivity_loss[1] = d,
            PdIn2 => imp.pd_sensitivity_loss[2] = d,
            PdOut2 => imp.pd_sensitivity_loss[3] = d,
            Voa => imp.voa_attenuation_loss = d,
            InputCoupler => imp.excess_loss[0] = d,
            Isolator1 => imp.excess_loss[1] = d,
            Gff => imp.excess_loss[2] = d,
            Isolator2 => imp.excess_loss[3] = d,
        }
        imp
    }

    /// The quantity compared against the threshold.
    pub fn failure_variable(&self, state: &AmplifierState, t: usize) -> f64 {
        match self.group() {
            DegradationGroup::Pump => state.gain_deficit(),
            DegradationGroup::Voa => state.loss_error(),
            DegradationGroup::Pd | DegradationGroup::Passive => self.drift(t),
        }
    }

    pub fn has_failed(&self, state: &AmplifierState, t: usize) -> bool {
        self.failure_variable(state, t) > self.threshold
    }

    /// Chooses `rate` so that the failure variable reaches the threshold at
    /// `τ = horizon` (fractional) after onset.
    pub fn calibrated(
        component: Component,
        law: DriftLaw,
        onset: usize,
        threshold: f64,
        horizon: f64,
        amp: &Amplifier,
        cell: OperatingCell,
    ) -> Result<Self> {
        if horizon <= 0.0 || !horizon.is_finite() {
            return Err(Error::Config(format!(
                "failure horizon {horizon} must be positive"
            )));
        }
        // Drift value at which the failure variable crosses the threshold.
        let critical = match component.group() {
            DegradationGroup::Pd | DegradationGroup::Passive => threshold,
            DegradationGroup::Voa => {
                let (_, _, loss_set) = amp.lookup.split(cell.target_gain)?;
                threshold / -loss_set
            }
            DegradationGroup::Pump => {
                let (g1, g2, loss) = amp.lookup.split(cell.target_gain)?;
                let (fiber_in, want) = if component == Component::Pump1 {
                    (cell.input_power, g1)
                } else {
                    (cell.input_power + g1 + loss, g2)
                };
                let p = &amp.params;
                let eta_fail = amp.required_pump_power(fiber_in, want - threshold)
                    / (p.pump_max_ma - p.pump_threshold_ma);
                1.0 - eta_fail / p.pump_efficiency
            }
        };
        if critical.is_nan() || critical <= 0.0 {
            return Err(Error::Config(format!(
                "{component:?} at {cell:?} has no reachable failure point"
            )));
        }
        let rate = match law {
            DriftLaw::Linear => critical / horizon,
            DriftLaw::Exponential { scale } => (critical / scale).ln_1p() / horizon,
        };
        Ok(Self {
            component,
            law,
            rate,
            onset,
            threshold,
        })
    }
}

fn check_group(mode: &DegradationMode, want: DegradationGroup) -> Result<()> {
    if mode.group() == want {
        Ok(())
    } else {
        Err(Error::Contract(format!(
            "{:?} is not a {want:?} mode",
            mode.component
        )))
    }
}

/// Steady state at interval `t` under any mode.
pub fn degrade(
    amp: &Amplifier,
    cell: OperatingCell,
    mode: &DegradationMode,
    t: usize,
) -> Result<AmplifierState> {
    amp.steady_state(cell, &mode.impairments(t))
}

pub fn degrade_pump(
    amp: &Amplifier,
    cell: OperatingCell,
    mode: &DegradationMode,
    t: usize,
) -> Result<AmplifierState> {
    check_group(mode, DegradationGroup::Pump)?;
    degrade(amp, cell, mode, t)
}

pub fn degrade_pd(
    amp: &Amplifier,
    cell: OperatingCell,
    mode: &DegradationMode,
    t: usize,
) -> Result<AmplifierState> {
    check_group(mode, DegradationGroup::Pd)?;
    degrade(amp, cell, mode, t)
}

pub fn degrade_voa(
    amp: &Amplifier,
    cell: OperatingCell,
    mode: &DegradationMode,
    t: usize,
) -> Result<AmplifierState> {
    check_group(mode, DegradationGroup::Voa)?;
    degrade(amp, cell, mode, t)
}

pub fn degrade_passive(
    amp: &Amplifier,
    cell: OperatingCell,
    mode: &DegradationMode,
    t: usize,
) -> Result<AmplifierState> {
    check_group(mode, DegradationGroup::Passive)?;
    degrade(amp, cell, mode, t)
}
