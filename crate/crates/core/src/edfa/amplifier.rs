//! Behavioral steady-state model of a two-stage gain-controlled EDFA.
//!
//! Signal path (powers in dBm):
//!
//! ```text
//! in ─▶ tap(PD in1) ─▶ coupler ─▶ fiber 1 ─▶ isolator 1 ─▶ tap(PD out1)
//!    ─▶ GFF ─▶ VOA ─▶ tap(PD in2) ─▶ fiber 2 ─▶ isolator 2 ─▶ tap(PD out2) ─▶ out
//! ```
//!
//! Each stage controller drives its pump so that the *measured* stage gain
//! (out PD minus in PD) equals the lookup-table setpoint. Realized stage
//! gains are measured tap-to-tap on the true powers, so
//! `G = G1 + G2 + LOSS_INT` holds for the realized values by construction.

use serde::{Deserialize, Serialize};

use super::{GainLookup, OperatingCell};
use crate::error::Result;

/// Fixed hardware constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AmplifierParams {
    /// Pump lasing threshold (mA).
    pub pump_threshold_ma: f64,
    /// Begin-of-life slope efficiency (mW/mA).
    pub pump_efficiency: f64,
    /// Driver current ceiling (mA).
    pub pump_max_ma: f64,
    /// Pump power needed at zero gain, and its growth with stage input power (mW, mW/dB).
    pub pump_base_mw: f64,
    pub pump_base_per_db_in: f64,
    /// Extra pump power per dB of fiber gain (mW/dB).
    pub pump_per_db_gain: f64,
    /// VOA attenuation per volt of drive (dB/V).
    pub voa_db_per_volt: f64,
    /// Tilt sensitivity to interstage-loss, stage-1 and stage-2 gain errors (dB/dB).
    pub tilt_loss: f64,
    pub tilt_g1: f64,
    pub tilt_g2: f64,
}

impl Default for AmplifierParams {
    fn default() -> Self {
        Self {
            pump_threshold_ma: 20.0,
            pump_efficiency: 0.5,
            pump_max_ma: 500.0,
            pump_base_mw: 20.0,
            pump_base_per_db_in: 2.0,
            pump_per_db_gain: 4.0,
            voa_db_per_volt: 2.0,
            tilt_loss: 0.5,
            tilt_g1: -0.3,
            tilt_g2: 0.2,
        }
    }
}

/// Component impairments active at one inspection interval.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Impairments {
    /// Fractional slope-efficiency loss of pump 1 / pump 2, in `[0, 1)`.
    pub pump_efficiency_loss: [f64; 2],
    /// Sensitivity loss (dB, ≥ 0) of PD in1, out1, in2, out2; readings are biased low by this much.
    pub pd_sensitivity_loss: [f64; 4],
    /// Fractional loss of VOA attenuation at the commanded voltage, in `[0, 1]`.
    pub voa_attenuation_loss: f64,
    /// Excess insertion loss (dB) of input coupler, isolator 1, GFF, isolator 2.
    pub excess_loss: [f64; 4],
}

/// Complete operating point of the amplifier at one interval (noise-free).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplifierState {
    pub input_power: f64,
    pub target_gain: f64,
    /// Lookup-table setpoints.
    pub g1_set: f64,
    pub g2_set: f64,
    pub loss_set: f64,
    /// Realized tap-to-tap values.
    pub g1: f64,
    pub g2: f64,
    pub loss_int: f64,
    pub gain: f64,
    pub pump_current: [f64; 2],
    pub pump_power: [f64; 2],
    /// PD readings in1, out1, in2, out2 (dBm).
    pub pd: [f64; 4],
    pub voa_voltage: f64,
    pub tilt: f64,
    /// Fiber gain shortfall per stage caused by the pump current ceiling (dB).
    pub pump_deficit: [f64; 2],
}

impl AmplifierState {
    /// `target − realized total gain`.
    pub fn gain_deficit(&self) -> f64 {
        self.target_gain - self.gain
    }

    /// `|LOSS_INT(realized) − LOSS_INT(set)|`.
    pub fn loss_error(&self) -> f64 {
        (self.loss_int - self.loss_set).abs()
    }
}

#[derive(Clone, Debug)]
pub struct Amplifier {
    pub params: AmplifierParams,
    pub lookup: GainLookup,
}

struct PumpOutcome {
    current: f64,
    power: f64,
    gain: f64,
    deficit: f64,
}

impl Amplifier {
    pub fn new(params: AmplifierParams) -> Self {
        Self {
            params,
            lookup: GainLookup::default(),
        }
    }

    /// Pump power required for `fiber_gain` dB at `fiber_input` dBm.
    pub fn required_pump_power(&self, fiber_input: f64, fiber_gain: f64) -> f64 {
        let p = &self.params;
        p.pump_base_mw
            + p.pump_base_per_db_in * (fiber_input + 35.0)
            + p.pump_per_db_gain * fiber_gain
    }

    fn drive_pump(&self, fiber_input: f64, wanted_gain: f64, efficiency_loss: f64) -> PumpOutcome {
        let p = &self.params;
        let eta = p.pump_efficiency * (1.0 - efficiency_loss.clamp(0.0, 0.999));
        let need = self.required_pump_power(fiber_input, wanted_gain);
        let current = p.pump_threshold_ma + need / eta;
        if current <= p.pump_max_ma {
            return PumpOutcome {
                current,
                power: need,
                gain: wanted_gain,
                deficit: 0.0,
            };
        }
        let power = eta * (p.pump_max_ma - p.pump_threshold_ma);
        let base = self.required_pump_power(fiber_input, 0.0);
        let gain = (power - base) / p.pump_per_db_gain;
        PumpOutcome {
            current: p.pump_max_ma,
            power,
            gain,
            deficit: wanted_gain - gain,
        }
    }

    /// Closed-loop steady state at `cell` under `imp`.
    pub fn steady_state(&self, cell: OperatingCell, imp: &Impairments) -> Result<AmplifierState> {
        let (g1_set, g2_set, loss_set) = self.lookup.split(cell.target_gain)?;
        let p = &self.params;
        // PD reading offsets: readings are low by the sensitivity loss.
        let r = imp.pd_sensitivity_loss.map(|l| -l.max(0.0));
        let [e_cpl, e_iso1, e_gff, e_iso2] = imp.excess_loss.map(|e| e.max(0.0));

        let p0 = cell.input_power;
        let p1 = p0 - e_cpl;
        // Stage 1 holds (P3 + r_out1) − (P0 + r_in1) = G1_set.
        let want1 = g1_set + r[0] - r[1] + e_cpl + e_iso1;
        let s1 = self.drive_pump(p1, want1, imp.pump_efficiency_loss[0]);
        let p3 = p1 + s1.gain - e_iso1;

        let attenuation_set = -loss_set;
        let voa_voltage = attenuation_set / p.voa_db_per_volt;
        let attenuation = attenuation_set * (1.0 - imp.voa_attenuation_loss.clamp(0.0, 1.0));
        let p4 = p3 - e_gff;
        let p5 = p4 - attenuation;

        // Stage 2 holds (P7 + r_out2) − (P5 + r_in2) = G2_set.
        let want2 = g2_set + r[2] - r[3] + e_iso2;
        let s2 = self.drive_pump(p5, want2, imp.pump_efficiency_loss[1]);
        let p7 = p5 + s2.gain - e_iso2;

        let g1 = p3 - p0;
        let g2 = p7 - p5;
        let loss_int = p5 - p3;
        let tilt = p.tilt_loss * (loss_int - loss_set)
            + p.tilt_g1 * (g1 - g1_set)
            + p.tilt_g2 * (g2 - g2_set);
        Ok(AmplifierState {
            input_power: p0,
            target_gain: cell.target_gain,
            g1_set,
            g2_set,
            loss_set,
            g1,
            g2,
            loss_int,
            gain: g1 + g2 + loss_int,
            pump_current: [s1.current, s2.current],
            pump_power: [s1.power, s2.power],
            pd: [p0 + r[0], p3 + r[1], p5 + r[2], p7 + r[3]],
            voa_voltage,
            tilt,
            pump_deficit: [s1.deficit, s2.deficit],
        })
    }
}

impl Default for Amplifier {
    fn default() -> Self {
        Self::new(AmplifierParams::default())
    }
}
