//! Compact model of a single FeFET.
//!
//! A device holds one of two polarization states. Its effective threshold is
//! drawn from a Gaussian around the state's mean every time it is written, and
//! the channel conductance is a logistic function of gate overdrive.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Process parameters shared by every device of a fabric.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct FeFetParams {
    /// Mean threshold of the low-V_TH (set) state, volts.
    pub vth_low: f64,
    /// Mean threshold of the high-V_TH (reset) state, volts.
    pub vth_high: f64,
    /// Fully-on channel conductance, siemens.
    pub g_on: f64,
    /// Off-state leakage conductance, siemens.
    pub g_leak: f64,
    /// Width of the logistic turn-on transition, volts.
    pub v_slope: f64,
    /// Threshold-voltage standard deviation, volts.
    pub sigma_vth: f64,
}

impl Default for FeFetParams {
    fn default() -> Self {
        Self { vth_low: -0.5, vth_high: 1.5, g_on: 1e-4, g_leak: 1e-10, v_slope: 0.05, sigma_vth: 0.0 }
    }
}

impl FeFetParams {
    pub fn with_sigma(self, sigma_vth: f64) -> Self {
        Self { sigma_vth, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.vth_low, self.vth_high, self.g_on, self.g_leak, self.v_slope, self.sigma_vth].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("device parameters must be finite"));
        }
        if self.vth_low >= self.vth_high {
            return Err(Error::InvalidParameter("vth_low must be below vth_high"));
        }
        if !(self.g_leak > 0.0 && self.g_on > self.g_leak) {
            return Err(Error::InvalidParameter("need g_on > g_leak > 0"));
        }
        if self.v_slope <= 0.0 {
            return Err(Error::InvalidParameter("v_slope must be positive"));
        }
        if self.sigma_vth < 0.0 {
            return Err(Error::InvalidParameter("sigma_vth must be non-negative"));
        }
        Ok(())
    }

    pub fn mean_vth(&self, state: VthState) -> f64 {
        match state {
            VthState::LowVth => self.vth_low,
            VthState::HighVth => self.vth_high,
        }
    }

    /// Logistic channel conductance for a device with threshold `vth` at gate
    /// overdrive `v_gate` (gate minus source).
    pub fn conductance_at(&self, vth: f64, v_gate: f64) -> f64 {
        let x = (v_gate - vth) / self.v_slope;
        self.g_leak + (self.g_on - self.g_leak) / (1.0 + libm::exp(-x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VthState {
    LowVth,
    HighVth,
}

/// Write pulse polarity: `Set` programs low-V_TH, `Reset` programs high-V_TH.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Set,
    Reset,
}

impl Polarity {
    pub fn target(self) -> VthState {
        match self {
            Polarity::Set => VthState::LowVth,
            Polarity::Reset => VthState::HighVth,
        }
    }
}

/// One programmed FeFET.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeFetDevice {
    state: VthState,
    vth_effective: f64,
}

impl FeFetDevice {
    /// A device programmed with `polarity`, threshold sampled from `rng`.
    pub fn programmed<R: Rng + ?Sized>(polarity: Polarity, params: &FeFetParams, rng: &mut R) -> Self {
        let mut d = Self { state: polarity.target(), vth_effective: params.mean_vth(polarity.target()) };
        d.write(polarity, params, rng);
        d
    }

    /// A device sitting exactly at the state mean, regardless of `sigma_vth`.
    pub fn nominal(state: VthState, params: &FeFetParams) -> Self {
        Self { state, vth_effective: params.mean_vth(state) }
    }

    pub fn state(&self) -> VthState {
        self.state
    }

    pub fn vth_effective(&self) -> f64 {
        self.vth_effective
    }

    /// Applies a full write pulse and resamples the threshold.
    ///
    /// Exactly one standard-normal draw is taken per write whatever
    /// `sigma_vth` is, so a fixed seed yields the same `z` scores across sigma
    /// sweeps.
    pub fn write<R: Rng + ?Sized>(&mut self, polarity: Polarity, params: &FeFetParams, rng: &mut R) {
        let z: f64 = rng.sample(StandardNormal);
        self.state = polarity.target();
        self.vth_effective = params.mean_vth(self.state) + params.sigma_vth * z;
    }

    pub fn conductance(&self, params: &FeFetParams, v_gate_overdrive: f64) -> f64 {
        params.conductance_at(self.vth_effective, v_gate_overdrive)
    }
}
