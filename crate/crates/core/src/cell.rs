//! Two-FeFET push-pull cell.
//!
//! The top device sits between the SL rail and the internal node, the bottom
//! device between the internal node and the SL-bar rail. Both gates share
//! `v_read`. Storing `1` writes the top device low-V_TH and the bottom device
//! high-V_TH; storing `0` is the mirror image. The internal node settles at the
//! conductance-weighted mean of the two rails:
//!
//! ```text
//! v_int = (g_top * v_sl + g_bottom * v_slbar) / (g_top + g_bottom)
//! ```
//!
//! With search drive (rails complementary) the node goes high on a mismatch,
//! which gives XOR. With AND drive (only SL carries the input) it goes high
//! only when stored and input are both `1`.

use rand::Rng;

use crate::device::{FeFetDevice, FeFetParams, Polarity};
use crate::{Error, Result};

/// How the cell's rails are driven.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellMode {
    /// Complementary search lines; output = stored XOR input.
    Xor,
    /// Input on SL only, SL-bar grounded; output = stored AND input.
    And,
}

/// Rail and gate voltages applied to one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellDrive {
    pub v_sl: f64,
    pub v_slbar: f64,
    pub v_read: f64,
}

/// Search drive: bit 0 puts VDD on SL, bit 1 puts VDD on SL-bar.
pub fn drive_for_search(bit: bool, vdd: f64, v_read: f64) -> CellDrive {
    if bit {
        CellDrive { v_sl: 0.0, v_slbar: vdd, v_read }
    } else {
        CellDrive { v_sl: vdd, v_slbar: 0.0, v_read }
    }
}

/// AND drive: SL carries the input bit, SL-bar stays at ground.
pub fn drive_for_and(bit: bool, vdd: f64, v_read: f64) -> CellDrive {
    CellDrive { v_sl: if bit { vdd } else { 0.0 }, v_slbar: 0.0, v_read }
}

pub fn drive(mode: CellMode, bit: bool, vdd: f64, v_read: f64) -> CellDrive {
    match mode {
        CellMode::Xor => drive_for_search(bit, vdd, v_read),
        CellMode::And => drive_for_and(bit, vdd, v_read),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Solver {
    /// Gate overdrive of each device is taken against its own rail. Closed form.
    #[default]
    RailReferenced,
    /// The internal node acts as the source of any device whose rail sits
    /// above it (source-follower degeneration). Solved iteratively.
    FixedPoint,
}

/// Stopping rule for [`Solver::FixedPoint`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointLimits {
    /// Stop once an update moves the node by less than this, volts.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FixedPointLimits {
    fn default() -> Self {
        Self { tolerance: 1e-3, max_iterations: 100 }
    }
}

/// Operating point used whenever cells are evaluated inside an array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadConditions {
    pub vdd: f64,
    pub v_read: f64,
    /// Access-transistor switching point, volts. Defaults to `vdd / 2`.
    pub v_threshold: f64,
    pub solver: Solver,
}

impl ReadConditions {
    pub fn new(vdd: f64, v_read: f64) -> Self {
        Self { vdd, v_read, v_threshold: access_threshold(vdd), solver: Solver::RailReferenced }
    }
}

impl Default for ReadConditions {
    fn default() -> Self {
        Self::new(0.9, 1.0)
    }
}

/// Two series FeFETs storing one bit as complementary threshold states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XorAndCell {
    top: FeFetDevice,
    bottom: FeFetDevice,
    stored_bit: bool,
}

impl XorAndCell {
    pub fn new<R: Rng + ?Sized>(bit: bool, params: &FeFetParams, rng: &mut R) -> Self {
        let (top, bottom) = Self::polarities(bit);
        Self { top: FeFetDevice::programmed(top, params, rng), bottom: FeFetDevice::programmed(bottom, params, rng), stored_bit: bit }
    }

    /// Builds a cell from explicit devices. Used to pin thresholds in studies.
    pub fn from_devices(top: FeFetDevice, bottom: FeFetDevice, stored_bit: bool) -> Self {
        Self { top, bottom, stored_bit }
    }

    fn polarities(bit: bool) -> (Polarity, Polarity) {
        if bit {
            (Polarity::Set, Polarity::Reset)
        } else {
            (Polarity::Reset, Polarity::Set)
        }
    }

    /// Writes `bit`; both devices are re-programmed (top first).
    pub fn store<R: Rng + ?Sized>(&mut self, bit: bool, params: &FeFetParams, rng: &mut R) {
        let (top, bottom) = Self::polarities(bit);
        self.top.write(top, params, rng);
        self.bottom.write(bottom, params, rng);
        self.stored_bit = bit;
    }

    pub fn stored_bit(&self) -> bool {
        self.stored_bit
    }

    pub fn top(&self) -> &FeFetDevice {
        &self.top
    }

    pub fn bottom(&self) -> &FeFetDevice {
        &self.bottom
    }

    pub fn resolve_vint(&self, params: &FeFetParams, drive: CellDrive, solver: Solver) -> Result<f64> {
        match solver {
            Solver::RailReferenced => Ok(self.vint_rail_referenced(params, drive)),
            Solver::FixedPoint => self.vint_fixed_point(params, drive, FixedPointLimits::default()),
        }
    }

    pub fn vint_rail_referenced(&self, params: &FeFetParams, drive: CellDrive) -> f64 {
        let g_top = self.top.conductance(params, drive.v_read - drive.v_sl);
        let g_bottom = self.bottom.conductance(params, drive.v_read - drive.v_slbar);
        divider_voltage(g_top, g_bottom, drive.v_sl, drive.v_slbar)
    }

    /// Iterates the internal node with each device's source taken as the lower
    /// of its rail and the node. The node map is non-increasing in the node
    /// voltage, so the root is unique; a shrinking bracket falls back to
    /// bisection whenever a plain update would leave it or stops contracting.
    pub fn vint_fixed_point(&self, params: &FeFetParams, drive: CellDrive, limits: FixedPointLimits) -> Result<f64> {
        let node_map = |v: f64| {
            let g_top = self.top.conductance(params, drive.v_read - drive.v_sl.min(v));
            let g_bottom = self.bottom.conductance(params, drive.v_read - drive.v_slbar.min(v));
            divider_voltage(g_top, g_bottom, drive.v_sl, drive.v_slbar)
        };
        let mut lo = drive.v_sl.min(drive.v_slbar);
        let mut hi = drive.v_sl.max(drive.v_slbar);
        let mut v = self.vint_rail_referenced(params, drive).clamp(lo, hi);
        let mut residual = f64::INFINITY;
        let mut last_step = f64::INFINITY;
        for _ in 0..limits.max_iterations {
            let f = node_map(v);
            if !f.is_finite() {
                break;
            }
            residual = (f - v).abs();
            if f > v {
                lo = v;
            } else {
                hi = v;
            }
            // Plain update only while it lands inside the bracket and contracts.
            let next = if f > lo && f < hi && residual <= 0.5 * last_step { f } else { 0.5 * (lo + hi) };
            let step = (next - v).abs();
            if step < limits.tolerance {
                return Ok(next);
            }
            last_step = step;
            v = next;
        }
        Err(Error::NotConverged { iterations: limits.max_iterations, residual })
    }

    /// Access-transistor decision for this cell under `mode` and `input`.
    pub fn evaluate(&self, params: &FeFetParams, cond: &ReadConditions, mode: CellMode, input: bool) -> Result<bool> {
        let d = drive(mode, input, cond.vdd, cond.v_read);
        let v = self.resolve_vint(params, d, cond.solver)?;
        Ok(logic_output(v, cond.v_threshold))
    }
}

/// Resistive divider expressed in conductances.
pub fn divider_voltage(g_top: f64, g_bottom: f64, v_sl: f64, v_slbar: f64) -> f64 {
    (g_top * v_sl + g_bottom * v_slbar) / (g_top + g_bottom)
}

pub fn access_threshold(vdd: f64) -> f64 {
    0.5 * vdd
}

/// Access transistor: conducts (activates the load) iff `v_int > v_threshold`.
pub fn logic_output(v_int: f64, v_threshold: f64) -> bool {
    v_int > v_threshold
}
