//! Variation, design-space and efficiency studies.
//!
//! Monte Carlo trials are independent: trial `t` of a study keyed by `seed`
//! draws from [`rng::substream`], so tables are reproducible bit for bit and
//! trials could be evaluated in any order.

use alloc::vec::Vec;
use rand::seq::index;
use rand::Rng;

use crate::array::energy_of;
use crate::bits::BitVector;
use crate::cell::{drive_for_search, CellMode, ReadConditions, Solver, XorAndCell};
use crate::chain::{self, ActivationVector, ChainConfig, Topology};
use crate::device::FeFetParams;
use crate::rng::{self, SimRng};
use crate::{Error, Result};

/// Ordinary least-squares line through `(xs, ys)`; returns `(slope, intercept)`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (n - 1).
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self::default();
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        Self {
            mean,
            std: libm::sqrt(var),
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct MonteCarloSpec {
    pub n_trials: usize,
    pub sigma_vth: f64,
    pub v_read_sweep: Vec<f64>,
    pub chain_lengths: Vec<usize>,
    /// Minimum delay gap between adjacent counts, seconds.
    pub sense_margin: f64,
    pub seed: u64,
}

impl Default for MonteCarloSpec {
    fn default() -> Self {
        Self {
            n_trials: 60,
            sigma_vth: 0.12,
            v_read_sweep: (0..=30).map(|k| k as f64 * 0.1).collect(),
            chain_lengths: alloc::vec![32, 64, 128],
            sense_margin: 100e-12,
            seed: 1,
        }
    }
}

impl MonteCarloSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::InvalidParameter("n_trials must be at least 1"));
        }
        if !(self.sense_margin > 0.0) {
            return Err(Error::InvalidParameter("sense_margin must be positive"));
        }
        if !(self.sigma_vth >= 0.0) {
            return Err(Error::InvalidParameter("sigma_vth must be non-negative"));
        }
        if self.v_read_sweep.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter("read voltages must be finite and non-negative"));
        }
        if self.chain_lengths.iter().any(|&n| n == 0 || n % 2 != 0) {
            return Err(Error::InvalidParameter("chain lengths must be positive and even"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SearchCase {
    Match,
    Mismatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VintPoint {
    pub v_read: f64,
    pub case: SearchCase,
    /// One sample per trial, in trial order.
    pub samples: Vec<f64>,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VintTable {
    pub points: Vec<VintPoint>,
}

impl VintTable {
    pub fn point(&self, v_read: f64, case: SearchCase) -> Option<&VintPoint> {
        self.points.iter().find(|p| p.case == case && (p.v_read - v_read).abs() < 1e-12)
    }

    /// Match samples above `threshold` plus mismatch samples at or below it.
    pub fn decision_errors(&self, v_read: f64, threshold: f64) -> Option<usize> {
        let m = self.point(v_read, SearchCase::Match)?;
        let x = self.point(v_read, SearchCase::Mismatch)?;
        Some(m.samples.iter().filter(|&&v| v > threshold).count() + x.samples.iter().filter(|&&v| v <= threshold).count())
    }
}

/// Internal-node spread of a cell storing `0` across trials. Search `1` is the
/// mismatch case, search `0` the match case. Each trial re-programs both devices.
pub fn mc_cell_vint(spec: &MonteCarloSpec, device: &FeFetParams, vdd: f64, solver: Solver) -> Result<VintTable> {
    spec.validate()?;
    let params = device.with_sigma(spec.sigma_vth);
    params.validate()?;
    let cells: Vec<XorAndCell> =
        (0..spec.n_trials).map(|t| XorAndCell::new(false, &params, &mut rng::substream(spec.seed, t as u64))).collect();
    let mut points = Vec::with_capacity(2 * spec.v_read_sweep.len());
    for &v_read in &spec.v_read_sweep {
        for (case, search) in [(SearchCase::Match, false), (SearchCase::Mismatch, true)] {
            let drive = drive_for_search(search, vdd, v_read);
            let samples = cells.iter().map(|c| c.resolve_vint(&params, drive, solver)).collect::<Result<Vec<_>>>()?;
            let summary = Summary::of(&samples);
            points.push(VintPoint { v_read, case, samples, summary });
        }
    }
    Ok(VintTable { points })
}

/// How stored words and inputs are drawn for a target count `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PatternKind {
    /// Random stored word, query differs in exactly `k` random positions.
    #[default]
    CamFlips,
    /// Stored word with exactly `k` ones, input covers them plus random noise elsewhere.
    MacOverlap,
}

impl PatternKind {
    pub fn mode(self) -> CellMode {
        match self {
            PatternKind::CamFlips => CellMode::Xor,
            PatternKind::MacOverlap => CellMode::And,
        }
    }

    /// `(stored, input)` with an ideal count of exactly `k`.
    pub fn generate(self, rng: &mut SimRng, len: usize, k: usize) -> (BitVector, BitVector) {
        let chosen = index::sample(rng, len, k);
        match self {
            PatternKind::CamFlips => {
                let bits: Vec<bool> = (0..len).map(|_| rng.random()).collect();
                let stored = BitVector::from_bools(&bits);
                let mut query = stored.clone();
                chosen.iter().for_each(|i| query.flip(i));
                (stored, query)
            }
            PatternKind::MacOverlap => {
                let mut stored = BitVector::zeros(len);
                chosen.iter().for_each(|i| stored.set(i, true));
                let bits: Vec<bool> = (0..len).map(|i| stored.get(i) || rng.random()).collect();
                (stored, BitVector::from_bools(&bits))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelStats {
    /// Ideal activation count.
    pub count: usize,
    pub delays: Vec<f64>,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LengthResult {
    pub n_stages: usize,
    pub levels: Vec<LevelStats>,
    /// Adjacent pairs `(k, k + 1)` whose delay envelopes are at least
    /// `sense_margin` apart.
    pub separable_pairs: usize,
    pub pass_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainMcResult {
    pub lengths: Vec<LengthResult>,
}

/// Delay distributions per ideal count for every chain length, with cells
/// evaluated at the divider level under threshold variation.
pub fn mc_chain_delay(
    spec: &MonteCarloSpec,
    chain: &ChainConfig,
    device: &FeFetParams,
    cond: &ReadConditions,
    pattern: PatternKind,
) -> Result<ChainMcResult> {
    spec.validate()?;
    let params = device.with_sigma(spec.sigma_vth);
    params.validate()?;
    let mut lengths = Vec::with_capacity(spec.chain_lengths.len());
    for &n in &spec.chain_lengths {
        let cfg = chain.with_stages(n).with_topology(Topology::Inverter);
        cfg.validate()?;
        let mut levels = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let mut delays = Vec::with_capacity(spec.n_trials);
            for t in 0..spec.n_trials {
                let stream = ((n as u64) << 40) | ((k as u64) << 20) | t as u64;
                let mut rng = rng::substream(spec.seed, stream);
                let (stored, input) = pattern.generate(&mut rng, n, k);
                let mut act = BitVector::zeros(n);
                for j in 0..n {
                    let cell = XorAndCell::new(stored.get(j), &params, &mut rng);
                    act.set(j, cell.evaluate(&params, cond, pattern.mode(), input.get(j))?);
                }
                delays.push(chain::analytical_delay_inverter(&cfg, &ActivationVector::new(act))?.t_total);
            }
            let summary = Summary::of(&delays);
            levels.push(LevelStats { count: k, delays, summary });
        }
        let separable_pairs = levels.windows(2).filter(|w| w[1].summary.min - w[0].summary.max >= spec.sense_margin).count();
        lengths.push(LengthResult { n_stages: n, pass_rate: separable_pairs as f64 / n as f64, separable_pairs, levels });
    }
    Ok(ChainMcResult { lengths })
}

/// Alpha-power delay scaling with supply voltage.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct VddScaling {
    pub alpha: f64,
    /// Logic-transistor threshold, volts.
    pub vth_logic: f64,
}

impl Default for VddScaling {
    fn default() -> Self {
        Self { alpha: 1.3, vth_logic: 0.35 }
    }
}

impl VddScaling {
    /// `vdd / (vdd - vth)^alpha`, defined for `vdd > vth`.
    pub fn delay_factor(&self, vdd: f64) -> Result<f64> {
        if !(vdd > self.vth_logic) {
            return Err(Error::InvalidParameter("supply must exceed the logic threshold"));
        }
        Ok(vdd / libm::pow(vdd - self.vth_logic, self.alpha))
    }

    /// Delay multiplier at `vdd` relative to `vdd_ref`.
    pub fn relative(&self, vdd: f64, vdd_ref: f64) -> Result<f64> {
        Ok(self.delay_factor(vdd)? / self.delay_factor(vdd_ref)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DseSpec {
    pub c_load_values: Vec<f64>,
    pub stage_counts: Vec<usize>,
    pub vdd_values: Vec<f64>,
}

impl Default for DseSpec {
    fn default() -> Self {
        Self {
            c_load_values: (0..8).map(|k| 10e-15 * (1u32 << k) as f64).collect(),
            stage_counts: alloc::vec![1, 2, 4, 8, 16, 32, 64],
            vdd_values: alloc::vec![0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2],
        }
    }
}

impl DseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.c_load_values.is_empty() || self.stage_counts.is_empty() || self.vdd_values.is_empty() {
            return Err(Error::InvalidParameter("design-space lists must be non-empty"));
        }
        let positive = self.c_load_values.iter().chain(&self.vdd_values).all(|v| v.is_finite() && *v > 0.0);
        if !positive || self.stage_counts.contains(&0) {
            return Err(Error::InvalidParameter("design-space values must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DsePoint {
    pub c_load: f64,
    pub n_stages: usize,
    pub vdd: f64,
    /// Full-activation energy of one chain, joules.
    pub energy: f64,
    /// Load-capacitor share of `energy`.
    pub activation_energy: f64,
    /// Full-activation single-edge delay, seconds.
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DseGrid {
    pub points: Vec<DsePoint>,
    /// Largest relative spread of activation energy among points sharing
    /// `vdd` and `c_load * n_stages`. Zero when no diagonal has two points.
    pub diagonal_max_rel_dev: f64,
}

/// Energy and delay of one fully activated chain over the grid. Delays follow
/// the single-edge (buffer) model so odd stage counts are allowed; stage and
/// load delays scale with the alpha-power factor relative to `base.vdd`.
pub fn dse_energy_delay(spec: &DseSpec, base: &ChainConfig, e_intrinsic_per_stage: f64, scaling: &VddScaling) -> Result<DseGrid> {
    spec.validate()?;
    let mut points = Vec::new();
    for &c_load in &spec.c_load_values {
        for &n in &spec.stage_counts {
            for &vdd in &spec.vdd_values {
                let cfg = ChainConfig { n_stages: n, topology: Topology::Buffer, c_load, vdd, ..*base };
                let act = ActivationVector::new(BitVector::ones(n));
                let energy = energy_of(core::slice::from_ref(&act), &cfg, e_intrinsic_per_stage);
                let activation_energy = energy - n as f64 * e_intrinsic_per_stage;
                let nominal = chain::analytical_delay_buffer(&cfg, &act)?.t_total;
                let delay = nominal * scaling.relative(vdd, base.vdd)?;
                points.push(DsePoint { c_load, n_stages: n, vdd, energy, activation_energy, delay });
            }
        }
    }
    let diagonal_max_rel_dev = diagonal_deviation(&points);
    Ok(DseGrid { points, diagonal_max_rel_dev })
}

fn diagonal_deviation(points: &[DsePoint]) -> f64 {
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs());
    let mut worst: f64 = 0.0;
    for (i, p) in points.iter().enumerate() {
        let prod = p.c_load * p.n_stages as f64;
        for q in &points[i + 1..] {
            if same(p.vdd, q.vdd) && same(prod, q.c_load * q.n_stages as f64) {
                let dev = (p.activation_energy - q.activation_energy).abs() / p.activation_energy.max(q.activation_energy);
                worst = worst.max(dev);
            }
        }
    }
    worst
}

/// Tera-operations per second per watt. The cycle time cancels.
pub fn efficiency_tops_per_watt(ops_per_cycle: f64, cycle_time: f64, energy_per_cycle: f64) -> Result<f64> {
    if !(energy_per_cycle > 0.0) {
        return Err(Error::ZeroEnergy);
    }
    if !(ops_per_cycle > 0.0 && cycle_time > 0.0) {
        return Err(Error::InvalidParameter("ops and cycle time must be positive"));
    }
    let ops_per_second = ops_per_cycle / cycle_time;
    let watts = energy_per_cycle / cycle_time;
    Ok(ops_per_second / watts / 1e12)
}
