//! Large bit matrices spread over many array tiles.
//!
//! A [`TiledMatrix`] stores an R x C logical matrix on a grid of
//! `ceil(R / tile_rows) x ceil(C / tile_cols)` arrays, zero padded at the
//! edges. A row's MAC or CAM count is the sum of its partial counts across the
//! column tiles, as the digital periphery would add them. Every tile operation
//! is logged as an [`OpCost`] for application-level accounting.

use alloc::vec;
use alloc::vec::Vec;

use crate::array::{ArrayConfig, Fidelity, OpReceipt, TdCimArray};
use crate::bits::BitVector;
use crate::cell::CellMode;
use crate::rng::{self, SimRng};
use crate::{Error, Result};

/// Energy and latency of one tile operation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OpCost {
    pub energy: f64,
    pub latency: f64,
}

impl From<&OpReceipt> for OpCost {
    fn from(r: &OpReceipt) -> Self {
        Self { energy: r.energy, latency: r.latency }
    }
}

/// Everything a tile ever spent, split by duty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CostLog {
    pub mac: Vec<OpCost>,
    pub cam: Vec<OpCost>,
    pub write_energy: f64,
}

impl CostLog {
    pub fn clear(&mut self) {
        *self = Self::default();
    }
}

#[derive(Debug, Clone)]
pub struct TiledMatrix {
    rows: usize,
    cols: usize,
    tile_rows: usize,
    tile_cols: usize,
    /// Row-major grid of tiles.
    tiles: Vec<TdCimArray>,
}

impl TiledMatrix {
    pub fn new(tile: ArrayConfig, rows: usize, cols: usize, rng: &mut SimRng) -> Result<Self> {
        tile.validate()?;
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter("matrix must be non-empty"));
        }
        let n = rows.div_ceil(tile.rows) * cols.div_ceil(tile.cols);
        let tiles = (0..n).map(|_| TdCimArray::new(tile, rng)).collect::<Result<Vec<_>>>()?;
        Ok(Self { rows, cols, tile_rows: tile.rows, tile_cols: tile.cols, tiles })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn col_tiles(&self) -> usize {
        self.cols.div_ceil(self.tile_cols)
    }

    fn row_tiles(&self) -> usize {
        self.rows.div_ceil(self.tile_rows)
    }

    pub fn tile_count(&self) -> usize {
        self.tiles.len()
    }

    /// Writes one logical row; returns the write energy.
    pub fn write_row(&mut self, row: usize, word: &BitVector, rng: &mut SimRng) -> Result<f64> {
        if row >= self.rows {
            return Err(Error::IndexOutOfRange { index: row, len: self.rows });
        }
        if word.len() != self.cols {
            return Err(Error::LengthMismatch { expected: self.cols, found: word.len() });
        }
        let (tr, r) = (row / self.tile_rows, row % self.tile_rows);
        let ct = self.col_tiles();
        let mut energy = 0.0;
        for tc in 0..ct {
            let part = word.slice_padded(tc * self.tile_cols, self.tile_cols);
            energy += self.tiles[tr * ct + tc].write_row(r, &part, rng)?;
        }
        Ok(energy)
    }

    pub fn stored_row(&self, row: usize) -> BitVector {
        let (tr, r) = (row / self.tile_rows, row % self.tile_rows);
        let ct = self.col_tiles();
        let mut out = BitVector::zeros(self.cols);
        for tc in 0..ct {
            let part = self.tiles[tr * ct + tc].stored_row(r);
            for j in 0..self.tile_cols {
                let col = tc * self.tile_cols + j;
                if col < self.cols && part.get(j) {
                    out.set(col, true);
                }
            }
        }
        out
    }

    /// Per-row counts over the whole matrix, one tile operation per tile.
    pub fn run(&self, mode: CellMode, input: &BitVector, fidelity: Fidelity, log: &mut Vec<OpCost>) -> Result<Vec<u32>> {
        if input.len() != self.cols {
            return Err(Error::LengthMismatch { expected: self.cols, found: input.len() });
        }
        let ct = self.col_tiles();
        let parts: Vec<BitVector> = (0..ct).map(|tc| input.slice_padded(tc * self.tile_cols, self.tile_cols)).collect();
        let mut counts = vec![0u32; self.rows];
        for tr in 0..self.row_tiles() {
            for (tc, part) in parts.iter().enumerate() {
                let tile = &self.tiles[tr * ct + tc];
                let receipt = match mode {
                    CellMode::And => tile.mac(part, fidelity)?,
                    CellMode::Xor => tile.cam_search(part, fidelity)?,
                };
                log.push(OpCost::from(&receipt));
                for (r, c) in receipt.counts.iter().enumerate() {
                    let row = tr * self.tile_rows + r;
                    if row < self.rows {
                        counts[row] += c;
                    }
                }
            }
        }
        Ok(counts)
    }
}

/// Tile geometry and evaluation settings of a fabric backend.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FabricConfig {
    pub tile: ArrayConfig,
    pub fidelity: Fidelity,
    /// Seed of the device-variation stream used for writes.
    pub seed: u64,
}

impl Default for FabricConfig {
    fn default() -> Self {
        Self { tile: ArrayConfig::new(32, 32), fidelity: Fidelity::Divider, seed: 0 }
    }
}

/// Hardware backend for the HDC pipeline: one tiled matrix holds the encoder
/// base (MAC duty), another the class hypervectors (CAM duty).
#[derive(Debug, Clone)]
pub struct Fabric {
    config: FabricConfig,
    rng: SimRng,
    base: Option<(BaseKey, TiledMatrix)>,
    classes: Option<(Vec<BitVector>, TiledMatrix)>,
    pub log: CostLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct BaseKey {
    seed: u64,
    n: usize,
    d: usize,
}

impl Fabric {
    pub fn new(config: FabricConfig) -> Result<Self> {
        config.tile.validate()?;
        Ok(Self { config, rng: rng::seeded(config.seed), base: None, classes: None, log: CostLog::default() })
    }

    pub fn config(&self) -> &FabricConfig {
        &self.config
    }

    /// Loads a transposed base matrix: logical row `j` holds bit `j` of every
    /// base vector, so a MAC with a feature bit-plane yields one output
    /// dimension per row. Reloading the same base is a no-op.
    pub fn load_base(&mut self, seed: u64, base_rows: &[BitVector], d: usize) -> Result<()> {
        let key = BaseKey { seed, n: base_rows.len(), d };
        if matches!(&self.base, Some((k, _)) if *k == key) {
            return Ok(());
        }
        let n = base_rows.len();
        let mut m = TiledMatrix::new(self.config.tile, d, n, &mut self.rng)?;
        for j in 0..d {
            let mut col = BitVector::zeros(n);
            for (i, b) in base_rows.iter().enumerate() {
                col.set(i, b.get(j));
            }
            self.log.write_energy += m.write_row(j, &col, &mut self.rng)?;
        }
        self.base = Some((key, m));
        Ok(())
    }

    /// Binary MAC of the loaded base with one input bit-plane (length N).
    pub fn mac_plane(&mut self, plane: &BitVector) -> Result<Vec<u32>> {
        let (_, m) = self.base.as_ref().ok_or(Error::InvalidParameter("no base matrix loaded"))?;
        m.run(CellMode::And, plane, self.config.fidelity, &mut self.log.mac)
    }

    /// Stores class hypervectors one per row. Reloading identical content is a no-op.
    pub fn load_classes(&mut self, classes: &[BitVector]) -> Result<()> {
        if matches!(&self.classes, Some((c, _)) if c.as_slice() == classes) {
            return Ok(());
        }
        let d = classes.first().map(|c| c.len()).ok_or(Error::InvalidParameter("no classes"))?;
        let mut m = TiledMatrix::new(self.config.tile, classes.len(), d, &mut self.rng)?;
        for (r, c) in classes.iter().enumerate() {
            self.log.write_energy += m.write_row(r, c, &mut self.rng)?;
        }
        self.classes = Some((classes.to_vec(), m));
        Ok(())
    }

    /// Hamming distance of `query` to every loaded class.
    pub fn search(&mut self, query: &BitVector) -> Result<Vec<u32>> {
        let (_, m) = self.classes.as_ref().ok_or(Error::InvalidParameter("no classes loaded"))?;
        m.run(CellMode::Xor, query, self.config.fidelity, &mut self.log.cam)
    }
}
