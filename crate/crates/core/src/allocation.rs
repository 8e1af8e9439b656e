//! MAC/CAM duty allocation over a pool of identical tiles, and the
//! application-level energy/latency breakdown.

use alloc::vec;
use alloc::vec::Vec;

use crate::array::{energy_of, ArrayConfig};
use crate::bits::BitVector;
use crate::chain::{self, ActivationVector};
use crate::fabric::{CostLog, OpCost};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TileRole {
    Mac,
    Cam,
    Idle,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TilePool {
    pub tile_rows: usize,
    pub tile_cols: usize,
    assignment: Vec<TileRole>,
}

impl TilePool {
    pub fn new(n_tiles: usize, tile_rows: usize, tile_cols: usize) -> Self {
        Self { tile_rows, tile_cols, assignment: vec![TileRole::Idle; n_tiles] }
    }

    /// Pool with the first `mac` tiles on MAC duty and the next `cam` on CAM.
    pub fn with_split(&self, mac: usize, cam: usize) -> Self {
        let n = self.n_tiles();
        assert!(mac + cam <= n);
        let assignment = (0..n)
            .map(|i| {
                if i < mac {
                    TileRole::Mac
                } else if i < mac + cam {
                    TileRole::Cam
                } else {
                    TileRole::Idle
                }
            })
            .collect();
        Self { assignment, ..*self }
    }

    pub fn n_tiles(&self) -> usize {
        self.assignment.len()
    }

    pub fn assignment(&self) -> &[TileRole] {
        &self.assignment
    }

    pub fn count(&self, role: TileRole) -> usize {
        self.assignment.iter().filter(|&&r| r == role).count()
    }

    /// Tiles whose role differs between `self` and `next`.
    pub fn reassigned(&self, next: &TilePool) -> usize {
        self.assignment.iter().zip(&next.assignment).filter(|(a, b)| a != b).count() + self.n_tiles().abs_diff(next.n_tiles())
    }
}

/// Serial totals for one duty.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseCost {
    pub ops: u64,
    pub energy: f64,
    /// Sum of per-op latencies, i.e. the time on a single tile.
    pub latency: f64,
}

impl PhaseCost {
    pub fn from_ops(ops: u64, per_op: OpCost) -> Self {
        Self { ops, energy: ops as f64 * per_op.energy, latency: ops as f64 * per_op.latency }
    }

    /// Exact sum of recorded receipts, in order.
    pub fn from_receipts(receipts: &[OpCost]) -> Self {
        receipts.iter().fold(Self::default(), |acc, r| Self {
            ops: acc.ops + 1,
            energy: acc.energy + r.energy,
            latency: acc.latency + r.latency,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WorkloadProfile {
    pub mac: PhaseCost,
    pub cam: PhaseCost,
}

impl WorkloadProfile {
    pub fn from_log(log: &CostLog) -> Self {
        Self { mac: PhaseCost::from_receipts(&log.mac), cam: PhaseCost::from_receipts(&log.cam) }
    }
}

/// Dimensions of an HDC inference job.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskShape {
    pub n_features: usize,
    pub dim: usize,
    pub n_classes: usize,
    pub queries: usize,
    pub quant_bits: u32,
}

/// Tile operations needed by `task`: `(mac_ops, cam_ops)`.
///
/// Encoding keeps the base transposed (D rows of N bits) and issues one MAC
/// per tile per bit-plane. Search keeps one class per row over D columns.
pub fn tile_ops(task: &TaskShape, tile_rows: usize, tile_cols: usize) -> (u64, u64) {
    let q = task.queries as u64;
    let mac = q * task.quant_bits as u64 * task.dim.div_ceil(tile_rows) as u64 * task.n_features.div_ceil(tile_cols) as u64;
    let cam = q * task.n_classes.div_ceil(tile_rows) as u64 * task.dim.div_ceil(tile_cols) as u64;
    (mac, cam)
}

pub fn profile_task(task: &TaskShape, tile_rows: usize, tile_cols: usize, mac_cost: OpCost, cam_cost: OpCost) -> WorkloadProfile {
    let (mac, cam) = tile_ops(task, tile_rows, tile_cols);
    WorkloadProfile { mac: PhaseCost::from_ops(mac, mac_cost), cam: PhaseCost::from_ops(cam, cam_cost) }
}

/// Cost of one tile operation with a given fraction of cells activated,
/// spread evenly over both phases.
pub fn nominal_op_cost(tile: &ArrayConfig, active_fraction: f64) -> OpCost {
    let cols = tile.cols;
    let k = libm::round(active_fraction.clamp(0.0, 1.0) * cols as f64) as usize;
    let mut bits = BitVector::zeros(cols);
    (0..k).for_each(|i| bits.set(i, true));
    let act = ActivationVector::new(bits);
    let acts = vec![act.clone(); tile.rows];
    let energy = energy_of(&acts, &tile.chain, tile.energy.e_intrinsic_per_stage);
    let delay = chain::analytical_delay(&tile.chain, &act).map(|d| d.t_total).unwrap_or(0.0);
    OpCost { energy, latency: delay + tile.energy.sense_overhead }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Policy {
    /// Minimize the slower side's `serial latency / tiles`.
    #[default]
    ProportionalLatency,
}

/// Latency of one side when its serial work is spread over `tiles`.
pub fn side_latency(phase: &PhaseCost, tiles: usize) -> f64 {
    if phase.ops == 0 {
        0.0
    } else if tiles == 0 {
        f64::INFINITY
    } else {
        phase.latency / tiles as f64
    }
}

/// Makespan of a `(mac_tiles, cam_tiles)` split.
pub fn split_latency(profile: &WorkloadProfile, mac_tiles: usize, cam_tiles: usize) -> f64 {
    side_latency(&profile.mac, mac_tiles).max(side_latency(&profile.cam, cam_tiles))
}

/// Enumerates every split with at least one tile per side with demand and
/// keeps the one with the smallest makespan (fewest MAC tiles on ties).
pub fn allocate(pool: &TilePool, profile: &WorkloadProfile, policy: Policy) -> Result<TilePool> {
    let Policy::ProportionalLatency = policy;
    let n = pool.n_tiles();
    if n < 2 {
        return Err(Error::InvalidParameter("allocation needs at least two tiles"));
    }
    let (mac_demand, cam_demand) = (profile.mac.ops > 0, profile.cam.ops > 0);
    let split = match (mac_demand, cam_demand) {
        (false, false) => (0, 0),
        (true, false) => (n, 0),
        (false, true) => (0, n),
        (true, true) => {
            let mut best = (1, n - 1);
            let mut best_score = split_latency(profile, 1, n - 1);
            for m in 2..n {
                let score = split_latency(profile, m, n - m);
                if score < best_score {
                    best = (m, n - m);
                    best_score = score;
                }
            }
            best
        }
    };
    Ok(pool.with_split(split.0, split.1))
}

/// Write energy to reprogram every tile whose duty changes.
pub fn reallocation_energy(prev: &TilePool, next: &TilePool, e_write_per_cell: f64) -> f64 {
    (prev.reassigned(next) * next.tile_rows * next.tile_cols) as f64 * e_write_per_cell
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub mac: f64,
    pub cam: f64,
    pub write: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.mac + self.cam + self.write
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LatencyBreakdown {
    pub mac: f64,
    pub cam: f64,
}

impl LatencyBreakdown {
    pub fn sum(&self) -> f64 {
        self.mac + self.cam
    }

    /// The slower side bounds the pipelined run.
    pub fn makespan(&self) -> f64 {
        self.mac.max(self.cam)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Percentages {
    pub energy_mac: f64,
    pub energy_cam: f64,
    pub energy_write: f64,
    pub latency_mac: f64,
    pub latency_cam: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Report {
    pub tiles_mac: usize,
    pub tiles_cam: usize,
    pub energy: EnergyBreakdown,
    pub latency: LatencyBreakdown,
    pub percentages: Percentages,
}

fn percent(part: f64, total: f64) -> f64 {
    if total > 0.0 {
        100.0 * part / total
    } else {
        0.0
    }
}

pub fn account(pool: &TilePool, profile: &WorkloadProfile, write_energy: f64) -> Report {
    let tiles_mac = pool.count(TileRole::Mac);
    let tiles_cam = pool.count(TileRole::Cam);
    let energy = EnergyBreakdown { mac: profile.mac.energy, cam: profile.cam.energy, write: write_energy };
    let latency = LatencyBreakdown { mac: side_latency(&profile.mac, tiles_mac), cam: side_latency(&profile.cam, tiles_cam) };
    let e = energy.total();
    let t = latency.sum();
    Report {
        tiles_mac,
        tiles_cam,
        energy,
        latency,
        percentages: Percentages {
            energy_mac: percent(energy.mac, e),
            energy_cam: percent(energy.cam, e),
            energy_write: percent(energy.write, e),
            latency_mac: percent(latency.mac, t),
            latency_cam: percent(latency.cam, t),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(mac_lat: f64, cam_lat: f64) -> WorkloadProfile {
        let ops = |l: f64| if l > 0.0 { 1 } else { 0 };
        WorkloadProfile {
            mac: PhaseCost { ops: ops(mac_lat), energy: mac_lat, latency: mac_lat },
            cam: PhaseCost { ops: ops(cam_lat), energy: cam_lat, latency: cam_lat },
        }
    }

    fn split(p: &TilePool) -> (usize, usize) {
        (p.count(TileRole::Mac), p.count(TileRole::Cam))
    }

    #[test]
    fn reference_task_tiling() {
        let task = TaskShape { n_features: 16, dim: 512, n_classes: 2, queries: 100, quant_bits: 4 };
        assert_eq!(tile_ops(&task, 32, 32), (6400, 1600));
        let zero = TaskShape { queries: 0, ..task };
        assert_eq!(tile_ops(&zero, 32, 32), (0, 0));
        let wide = TaskShape { dim: 1024, ..task };
        assert_eq!(tile_ops(&wide, 32, 32), (12800, 3200));
    }

    #[test]
    fn allocation_examples() {
        let pool = TilePool::new(10, 32, 32);
        assert_eq!(split(&allocate(&pool, &profile(1.0, 1.0), Policy::ProportionalLatency).unwrap()), (5, 5));
        assert_eq!(split(&allocate(&pool, &profile(7.0, 3.0), Policy::ProportionalLatency).unwrap()), (7, 3));
        assert_eq!(split(&allocate(&pool, &profile(4.0, 0.0), Policy::ProportionalLatency).unwrap()), (10, 0));
        assert_eq!(split(&allocate(&pool, &profile(0.0, 4.0), Policy::ProportionalLatency).unwrap()), (0, 10));
        let idle = allocate(&pool, &profile(0.0, 0.0), Policy::ProportionalLatency).unwrap();
        assert_eq!(idle.count(TileRole::Idle), 10);
        assert!(allocate(&TilePool::new(1, 32, 32), &profile(1.0, 1.0), Policy::ProportionalLatency).is_err());
    }

    #[test]
    fn single_phase_is_all_of_it() {
        let pool = TilePool::new(4, 32, 32);
        let p = profile(2.0, 0.0);
        let r = account(&allocate(&pool, &p, Policy::ProportionalLatency).unwrap(), &p, 0.0);
        assert_eq!(r.percentages.energy_mac, 100.0);
        assert_eq!(r.percentages.latency_mac, 100.0);
        assert_eq!(r.percentages.latency_cam, 0.0);
    }

    #[test]
    fn percentages_scale_free() {
        let task = TaskShape { n_features: 16, dim: 512, n_classes: 2, queries: 100, quant_bits: 4 };
        let tile = ArrayConfig::new(32, 32);
        let (mc, cc) = (nominal_op_cost(&tile, 0.25), nominal_op_cost(&tile, 0.5));
        let pool = TilePool::new(8, 32, 32);
        let report = |q| {
            let p = profile_task(&TaskShape { queries: q, ..task }, 32, 32, mc, cc);
            account(&allocate(&pool, &p, Policy::ProportionalLatency).unwrap(), &p, 0.0)
        };
        let (a, b) = (report(100), report(700));
        assert!((a.percentages.energy_mac - b.percentages.energy_mac).abs() < 1e-9);
        assert!((a.percentages.latency_cam - b.percentages.latency_cam).abs() < 1e-9);
        let sum = a.percentages.energy_mac + a.percentages.energy_cam + a.percentages.energy_write;
        assert!((sum - 100.0).abs() < 0.01);
    }

    #[test]
    fn speech_is_mac_heavy_search_is_cam_heavy() {
        let tile = ArrayConfig::new(32, 32);
        let (mc, cc) = (nominal_op_cost(&tile, 0.5), nominal_op_cost(&tile, 0.5));
        let speech = TaskShape { n_features: 64, dim: 4096, n_classes: 2, queries: 100, quant_bits: 4 };
        let search = TaskShape { n_features: 16, dim: 1024, n_classes: 1000, queries: 100, quant_bits: 4 };
        let pool = TilePool::new(16, 32, 32);
        let r = |t: &TaskShape| {
            let p = profile_task(t, 32, 32, mc, cc);
            account(&allocate(&pool, &p, Policy::ProportionalLatency).unwrap(), &p, 0.0)
        };
        let (s, c) = (r(&speech), r(&search));
        assert!(s.percentages.energy_mac > s.percentages.energy_cam);
        assert!(c.percentages.energy_cam > c.percentages.energy_mac);
    }

    #[test]
    fn reallocation_charges_changed_tiles() {
        let pool = TilePool::new(4, 2, 3);
        let a = pool.with_split(2, 2);
        let b = pool.with_split(3, 1);
        assert_eq!(a.reassigned(&b), 1);
        assert_eq!(reallocation_energy(&a, &b, 1e-15), 6.0 * 1e-15);
    }

    proptest::proptest! {
        #[test]
        fn more_tiles_never_slower(n in 2usize..64, a in 1e-9f64..1e-3, b in 1e-9f64..1e-3) {
            let p = profile(a, b);
            let lat = |n| {
                let pool = allocate(&TilePool::new(n, 32, 32), &p, Policy::ProportionalLatency).unwrap();
                split_latency(&p, pool.count(TileRole::Mac), pool.count(TileRole::Cam))
            };
            proptest::prop_assert!(lat(n + 1) <= lat(n));
        }
    }
}
