//! Rows x cols TD-CiM array.
//!
//! Every row is an inverter chain with one [`XorAndCell`] per stage. A MAC
//! drives the cells in AND mode so each row's activation count is the binary
//! dot product of its stored word with the input. A CAM search drives them in
//! XOR mode so the count is the Hamming distance to the query; the fastest
//! row is the nearest neighbour.

use alloc::vec::Vec;
use rand::Rng;

use crate::bits::BitVector;
use crate::cell::{CellMode, ReadConditions, Solver, XorAndCell};
use crate::chain::{self, ActivationVector, ChainConfig, DelayResult, Topology};
use crate::device::FeFetParams;
use crate::{Error, Result};

/// How much of the circuit an operation evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Fidelity {
    /// Boolean truth table for the activations, analytical delays.
    Logical,
    /// Divider voltage and access threshold per cell, analytical delays.
    #[default]
    Divider,
    /// Divider activations, delays from the RC transient engine.
    Transient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct EnergyParams {
    /// Energy of one stage per operation regardless of loading, joules.
    pub e_intrinsic_per_stage: f64,
    /// Energy to program one cell, joules.
    pub e_write_per_cell: f64,
    /// Fixed delay added to every operation for sensing, seconds.
    pub sense_overhead: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self { e_intrinsic_per_stage: 1e-15, e_write_per_cell: 1e-15, sense_overhead: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayConfig {
    pub rows: usize,
    /// Stages per chain.
    pub cols: usize,
    pub chain: ChainConfig,
    pub device: FeFetParams,
    /// Shared gate read voltage, volts.
    pub v_read: f64,
    pub solver: Solver,
    pub energy: EnergyParams,
}

impl ArrayConfig {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            chain: ChainConfig::default().with_stages(cols),
            device: FeFetParams::default(),
            v_read: 1.0,
            solver: Solver::RailReferenced,
            energy: EnergyParams::default(),
        }
    }

    pub fn with_device(self, device: FeFetParams) -> Self {
        Self { device, ..self }
    }

    pub fn with_chain(self, chain: ChainConfig) -> Self {
        Self { chain: chain.with_stages(self.cols), ..self }
    }

    pub fn read_conditions(&self) -> ReadConditions {
        ReadConditions { solver: self.solver, ..ReadConditions::new(self.chain.vdd, self.v_read) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidParameter("array needs at least one row and one column"));
        }
        if self.chain.n_stages != self.cols {
            return Err(Error::InvalidParameter("chain length must equal the column count"));
        }
        if self.chain.topology != Topology::Inverter {
            return Err(Error::InvalidParameter("array rows are inverter chains"));
        }
        self.chain.validate()?;
        self.device.validate()?;
        if !(self.v_read >= 0.0) {
            return Err(Error::InvalidParameter("v_read must be non-negative"));
        }
        let e = &self.energy;
        if !(e.e_intrinsic_per_stage >= 0.0 && e.e_write_per_cell >= 0.0 && e.sense_overhead >= 0.0) {
            return Err(Error::InvalidParameter("energy parameters must be non-negative"));
        }
        Ok(())
    }
}

/// Result of one MAC or CAM operation.
#[derive(Debug, Clone, PartialEq)]
pub struct OpReceipt {
    /// Sensed activation count per row.
    pub counts: Vec<u32>,
    pub delays: Vec<DelayResult>,
    pub energy: f64,
    pub latency: f64,
    /// Row with the smallest count (CAM only), lowest index on ties.
    pub best_match: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TdCimArray {
    config: ArrayConfig,
    cells: Vec<XorAndCell>,
}

impl TdCimArray {
    /// New array with every cell programmed to `0`.
    pub fn new<R: Rng + ?Sized>(config: ArrayConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let cells = (0..config.rows * config.cols).map(|_| XorAndCell::new(false, &config.device, rng)).collect();
        Ok(Self { config, cells })
    }

    pub fn config(&self) -> &ArrayConfig {
        &self.config
    }

    pub fn rows(&self) -> usize {
        self.config.rows
    }

    pub fn cols(&self) -> usize {
        self.config.cols
    }

    pub fn cell(&self, row: usize, col: usize) -> &XorAndCell {
        &self.cells[row * self.config.cols + col]
    }

    fn row_cells(&self, row: usize) -> &[XorAndCell] {
        let c = self.config.cols;
        &self.cells[row * c..(row + 1) * c]
    }

    pub fn stored_row(&self, row: usize) -> BitVector {
        let bits: Vec<bool> = self.row_cells(row).iter().map(|c| c.stored_bit()).collect();
        BitVector::from_bools(&bits)
    }

    /// Programs one row. Other rows are untouched. Returns the write energy.
    pub fn write_row<R: Rng + ?Sized>(&mut self, row: usize, word: &BitVector, rng: &mut R) -> Result<f64> {
        if row >= self.config.rows {
            return Err(Error::IndexOutOfRange { index: row, len: self.config.rows });
        }
        self.check_width(word)?;
        let cols = self.config.cols;
        let params = self.config.device;
        for (j, cell) in self.cells[row * cols..(row + 1) * cols].iter_mut().enumerate() {
            cell.store(word.get(j), &params, rng);
        }
        Ok(cols as f64 * self.config.energy.e_write_per_cell)
    }

    fn check_width(&self, v: &BitVector) -> Result<()> {
        if v.len() != self.config.cols {
            return Err(Error::LengthMismatch { expected: self.config.cols, found: v.len() });
        }
        Ok(())
    }

    pub fn mac(&self, input: &BitVector, fidelity: Fidelity) -> Result<OpReceipt> {
        self.run(CellMode::And, input, fidelity)
    }

    pub fn cam_search(&self, query: &BitVector, fidelity: Fidelity) -> Result<OpReceipt> {
        let mut receipt = self.run(CellMode::Xor, query, fidelity)?;
        receipt.best_match = argmin_first(&receipt.counts);
        Ok(receipt)
    }

    /// Load activations of every row for one operation.
    pub fn activations(&self, mode: CellMode, input: &BitVector, fidelity: Fidelity) -> Result<Vec<ActivationVector>> {
        self.check_width(input)?;
        let cond = self.config.read_conditions();
        (0..self.config.rows)
            .map(|r| {
                let mut act = BitVector::zeros(self.config.cols);
                for (j, cell) in self.row_cells(r).iter().enumerate() {
                    let x = input.get(j);
                    let on = match fidelity {
                        Fidelity::Logical => match mode {
                            CellMode::And => cell.stored_bit() & x,
                            CellMode::Xor => cell.stored_bit() ^ x,
                        },
                        Fidelity::Divider | Fidelity::Transient => cell.evaluate(&self.config.device, &cond, mode, x)?,
                    };
                    act.set(j, on);
                }
                Ok(ActivationVector::new(act))
            })
            .collect()
    }

    fn run(&self, mode: CellMode, input: &BitVector, fidelity: Fidelity) -> Result<OpReceipt> {
        let acts = self.activations(mode, input, fidelity)?;
        let cfg = &self.config.chain;
        let baseline = cfg.phase_baseline();
        let mut counts = Vec::with_capacity(acts.len());
        let mut delays = Vec::with_capacity(acts.len());
        for act in &acts {
            let d = match fidelity {
                Fidelity::Logical | Fidelity::Divider => chain::analytical_delay_inverter(cfg, act)?,
                Fidelity::Transient => chain::transient_delays(cfg, act, chain::safe_pulse_width(cfg), chain::max_time_step(cfg))?,
            };
            counts.push(chain::sense_count(d.t_rise, cfg, baseline) + chain::sense_count(d.t_fall, cfg, baseline));
            delays.push(d);
        }
        let energy = energy_of(&acts, cfg, self.config.energy.e_intrinsic_per_stage);
        let slowest = delays.iter().map(|d| d.t_total).fold(0.0, f64::max);
        Ok(OpReceipt { counts, delays, energy, latency: slowest + self.config.energy.sense_overhead, best_match: None })
    }
}

/// Operation energy: every stage pays its intrinsic cost, every activated
/// stage additionally charges its load capacitor once.
pub fn energy_of(activations: &[ActivationVector], chain: &ChainConfig, e_intrinsic_per_stage: f64) -> f64 {
    let active: u64 = activations.iter().map(|a| a.count() as u64).sum();
    let stages = (activations.len() * chain.n_stages) as f64;
    stages * e_intrinsic_per_stage + active as f64 * chain.c_load * chain.vdd * chain.vdd
}

/// Index of the smallest value, first one on ties.
pub fn argmin_first(values: &[u32]) -> Option<usize> {
    values.iter().enumerate().min_by_key(|&(i, &v)| (v, i)).map(|(i, _)| i)
}
