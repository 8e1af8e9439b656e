//! Delay chains with conditionally loaded stages.
//!
//! Analytical model: a chain of `n` stages where `k` stages have their load
//! capacitor switched in delays an edge by `n * t_intrinsic + k * t_c`.
//! Inverter chains run two phases on one pulse. The rising edge sees only the
//! even-stage loads (phase I) and the falling edge only the odd-stage loads
//! (phase II), and the two edge delays add up to the full result.
//!
//! Stage numbering is 1-based along the chain: bit `i` of an
//! [`ActivationVector`] belongs to stage `i + 1`, so "even stages" are the odd
//! bit indices.
//!
//! The transient engine integrates every stage as a first-order RC node driven
//! by an ideal threshold gate. Both engines share `t_c = ln2 * r_drive * c_load`.

use alloc::vec::Vec;
use core::f64::consts::LN_2;

use crate::bits::BitVector;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Topology {
    Buffer,
    #[default]
    Inverter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ChainConfig {
    pub n_stages: usize,
    pub topology: Topology,
    /// Unloaded per-stage delay, seconds.
    pub t_intrinsic: f64,
    /// Switchable load capacitor per stage, farads.
    pub c_load: f64,
    /// Fixed parasitic capacitance per stage, farads.
    pub c_intrinsic: f64,
    /// Stage output resistance, ohms.
    pub r_drive: f64,
    pub vdd: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        let t_intrinsic = 10e-12;
        let r_drive = 10e3;
        Self {
            n_stages: 32,
            topology: Topology::Inverter,
            t_intrinsic,
            c_load: 9e-15,
            c_intrinsic: t_intrinsic / (LN_2 * r_drive),
            r_drive,
            vdd: 0.9,
        }
    }
}

impl ChainConfig {
    pub fn with_stages(self, n_stages: usize) -> Self {
        Self { n_stages, ..self }
    }

    pub fn with_topology(self, topology: Topology) -> Self {
        Self { topology, ..self }
    }

    pub fn with_c_load(self, c_load: f64) -> Self {
        Self { c_load, ..self }
    }

    /// Sets `c_intrinsic` so that an unloaded RC stage reproduces `t_intrinsic`.
    pub fn calibrated(self) -> Self {
        Self { c_intrinsic: self.t_intrinsic / (LN_2 * self.r_drive), ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_stages == 0 {
            return Err(Error::InvalidParameter("n_stages must be at least 1"));
        }
        let positive = [self.t_intrinsic, self.c_load, self.c_intrinsic, self.r_drive, self.vdd].iter().all(|v| v.is_finite() && *v > 0.0);
        if !positive {
            return Err(Error::InvalidParameter("chain delays, capacitances, resistance and vdd must be positive"));
        }
        if self.topology == Topology::Inverter && !self.n_stages.is_multiple_of(2) {
            return Err(Error::InvalidParameter("inverter chains need an even number of stages"));
        }
        Ok(())
    }

    /// Extra delay contributed by one activated load, seconds.
    pub fn delay_per_load(&self) -> f64 {
        LN_2 * self.r_drive * self.c_load
    }

    /// Delay of one edge through the chain with nothing loaded.
    pub fn phase_baseline(&self) -> f64 {
        self.n_stages as f64 * self.t_intrinsic
    }
}

/// Per-stage load enables for one chain evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActivationVector(BitVector);

impl ActivationVector {
    pub fn new(bits: BitVector) -> Self {
        Self(bits)
    }

    pub fn zeros(n_stages: usize) -> Self {
        Self(BitVector::zeros(n_stages))
    }

    pub fn bits(&self) -> &BitVector {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_active(&self, index: usize) -> bool {
        self.0.get(index)
    }

    pub fn count(&self) -> u32 {
        self.0.count_ones()
    }

    /// Active stages with an even 1-based stage number.
    pub fn even_count(&self) -> u32 {
        self.0.iter().enumerate().filter(|&(i, b)| b && is_even_stage(i)).count() as u32
    }

    pub fn odd_count(&self) -> u32 {
        self.count() - self.even_count()
    }
}

impl From<BitVector> for ActivationVector {
    fn from(bits: BitVector) -> Self {
        Self(bits)
    }
}

#[inline]
fn is_even_stage(index: usize) -> bool {
    (index + 1).is_multiple_of(2)
}

/// Edge delays of one chain evaluation, seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayResult {
    pub t_rise: f64,
    pub t_fall: f64,
    pub t_total: f64,
}

fn check_len(config: &ChainConfig, act: &ActivationVector) -> Result<()> {
    if act.len() != config.n_stages {
        return Err(Error::LengthMismatch { expected: config.n_stages, found: act.len() });
    }
    Ok(())
}

pub fn analytical_delay_buffer(config: &ChainConfig, act: &ActivationVector) -> Result<DelayResult> {
    if config.topology != Topology::Buffer {
        return Err(Error::InvalidParameter("buffer delay requested for a non-buffer chain"));
    }
    check_len(config, act)?;
    let t = config.phase_baseline() + act.count() as f64 * config.delay_per_load();
    Ok(DelayResult { t_rise: t, t_fall: t, t_total: t })
}

pub fn analytical_delay_inverter(config: &ChainConfig, act: &ActivationVector) -> Result<DelayResult> {
    if config.topology != Topology::Inverter {
        return Err(Error::InvalidParameter("inverter delay requested for a non-inverter chain"));
    }
    if !config.n_stages.is_multiple_of(2) {
        return Err(Error::InvalidParameter("inverter chains need an even number of stages"));
    }
    check_len(config, act)?;
    let base = config.phase_baseline();
    let t_c = config.delay_per_load();
    let t_rise = base + act.even_count() as f64 * t_c;
    let t_fall = base + act.odd_count() as f64 * t_c;
    Ok(DelayResult { t_rise, t_fall, t_total: t_rise + t_fall })
}

pub fn analytical_delay(config: &ChainConfig, act: &ActivationVector) -> Result<DelayResult> {
    match config.topology {
        Topology::Buffer => analytical_delay_buffer(config, act),
        Topology::Inverter => analytical_delay_inverter(config, act),
    }
}

/// Converts a measured edge delay back into an activation count.
pub fn sense_count(measured: f64, config: &ChainConfig, phase_baseline: f64) -> u32 {
    let k = libm::round((measured - phase_baseline) / config.delay_per_load());
    k.clamp(0.0, config.n_stages as f64) as u32
}

/// Sampled node voltages of a transient run. Index 0 is the chain input,
/// index `i >= 1` is the output of stage `i`.
#[derive(Debug, Clone, Default)]
pub struct Waveform {
    pub times: Vec<f64>,
    nodes: usize,
    voltages: Vec<f64>,
}

impl Waveform {
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Node voltages at sample `k`.
    pub fn sample(&self, k: usize) -> &[f64] {
        &self.voltages[k * self.nodes..(k + 1) * self.nodes]
    }

    /// `(time, node_index, voltage)` triples in time-major order.
    pub fn points(&self) -> impl Iterator<Item = (f64, usize, f64)> + '_ {
        self.times.iter().enumerate().flat_map(move |(k, &t)| self.sample(k).iter().enumerate().map(move |(i, &v)| (t, i, v)))
    }

    fn push(&mut self, t: f64, input: f64, stages: &[f64]) {
        self.times.push(t);
        self.voltages.push(input);
        self.voltages.extend_from_slice(stages);
    }
}

#[derive(Debug, Clone)]
pub struct Transient {
    pub waveform: Waveform,
    pub delays: DelayResult,
}

pub fn transient_simulate(config: &ChainConfig, act: &ActivationVector, pulse_width: f64, dt: f64) -> Result<Transient> {
    let (delays, waveform) = run_transient(config, act, pulse_width, dt, true)?;
    Ok(Transient { waveform, delays })
}

/// Same as [`transient_simulate`] without keeping the waveform.
pub fn transient_delays(config: &ChainConfig, act: &ActivationVector, pulse_width: f64, dt: f64) -> Result<DelayResult> {
    run_transient(config, act, pulse_width, dt, false).map(|(d, _)| d)
}

/// A pulse comfortably longer than the worst-case phase I delay.
pub fn safe_pulse_width(config: &ChainConfig) -> f64 {
    let worst = config.phase_baseline() + config.n_stages as f64 * config.delay_per_load();
    1.25 * worst + 5.0 * config.r_drive * (config.c_intrinsic + config.c_load)
}

/// Largest time step the transient engine accepts.
pub fn max_time_step(config: &ChainConfig) -> f64 {
    config.t_intrinsic / 20.0
}

fn run_transient(config: &ChainConfig, act: &ActivationVector, pulse_width: f64, dt: f64, record: bool) -> Result<(DelayResult, Waveform)> {
    config.validate()?;
    check_len(config, act)?;
    if !(pulse_width > 0.0) {
        return Err(Error::InvalidParameter("pulse width must be positive"));
    }
    if !(dt > 0.0) || dt > max_time_step(config) {
        return Err(Error::InvalidParameter("time step must be positive and at most t_intrinsic / 20"));
    }
    let inverting = config.topology == Topology::Inverter;
    if inverting {
        let phase_one = analytical_delay_inverter(config, act)?.t_rise;
        if pulse_width <= phase_one {
            return Err(Error::PulseTooShort { pulse_width, phase_one_delay: phase_one });
        }
    }

    let n = config.n_stages;
    let vdd = config.vdd;
    let thr = 0.5 * vdd;
    // Loads switched in before / after the pulse's falling edge.
    let (mask_first, mask_second): (Vec<bool>, Vec<bool>) = (0..n)
        .map(|i| {
            let on = act.is_active(i);
            if inverting {
                (on && is_even_stage(i), on && !is_even_stage(i))
            } else {
                (on, on)
            }
        })
        .unzip();
    let tau = |loaded: bool| config.r_drive * (config.c_intrinsic + if loaded { config.c_load } else { 0.0 });

    // Settled state for a low input.
    let mut level: Vec<bool> = (0..n).map(|i| inverting && i % 2 == 0).collect();
    let mut volts: Vec<f64> = level.iter().map(|&h| if h { vdd } else { 0.0 }).collect();
    let mut input_high = false;

    let t_limit = pulse_width + 4.0 * safe_pulse_width(config);
    let settle = 5.0 * tau(true);
    let mut rise_at: Option<f64> = None;
    let mut fall_at: Option<f64> = None;
    let mut waveform = Waveform { nodes: n + 1, ..Waveform::default() };
    if record {
        waveform.push(0.0, 0.0, &volts);
    }

    let mut step = 0u64;
    loop {
        let t0 = step as f64 * dt;
        let t1 = t0 + dt;
        if t0 > t_limit {
            return Err(Error::EdgeNotObserved);
        }
        // External input: rises at t = 0, falls at `pulse_width`; the load set
        // swaps at the falling edge.
        let mut switch_in: Option<f64> = None;
        if step == 0 {
            input_high = true;
            switch_in = Some(0.0);
        } else if t0 <= pulse_width && pulse_width < t1 {
            input_high = false;
            switch_in = Some(pulse_width - t0);
        }
        let load_switch = if t0 <= pulse_width && pulse_width < t1 { Some(pulse_width - t0) } else { None };
        let second_phase_at_start = pulse_width < t0;

        let mut prev_high_after = input_high;
        for i in 0..n {
            let in_high_after = prev_high_after;
            let in_high_before = if switch_in.is_some() { !in_high_after } else { in_high_after };
            let target_of = |in_high: bool| if in_high != inverting { vdd } else { 0.0 };
            let loaded_at = |second: bool| if second { mask_second[i] } else { mask_first[i] };

            // Breakpoints inside [0, dt): input switch and load swap.
            let mut marks = [switch_in, load_switch];
            if let (Some(a), Some(b)) = (marks[0], marks[1]) {
                if a > b {
                    marks.swap(0, 1);
                }
            }
            let mut seg_start = 0.0;
            let mut in_high = in_high_before;
            let mut second = second_phase_at_start;
            let mut v = volts[i];
            let mut crossed: Option<f64> = None;
            let mut bounds = marks.iter().flatten().copied().collect::<Vec<_>>();
            bounds.push(dt);
            for &end in &bounds {
                if end > seg_start {
                    let target = target_of(in_high);
                    let tc = tau(loaded_at(second));
                    let heads_across = if level[i] { target < thr } else { target > thr };
                    if crossed.is_none() && heads_across {
                        let at = (seg_start + tc * libm::log((v - target) / (thr - target))).max(seg_start);
                        if at < end {
                            crossed = Some(at);
                            level[i] = !level[i];
                        }
                    }
                    v = target + (v - target) * libm::exp(-(end - seg_start) / tc);
                    seg_start = end;
                }
                if switch_in == Some(end) {
                    in_high = in_high_after;
                }
                if load_switch == Some(end) {
                    second = true;
                }
            }
            volts[i] = v;
            switch_in = crossed;
            prev_high_after = level[i];

            if i == n - 1 {
                if let Some(off) = crossed {
                    let t = t0 + off;
                    if level[i] && rise_at.is_none() {
                        rise_at = Some(t);
                    } else if !level[i] && rise_at.is_some() && fall_at.is_none() && t >= pulse_width {
                        fall_at = Some(t);
                    }
                }
            }
        }
        if record {
            waveform.push(t1, if input_high { vdd } else { 0.0 }, &volts);
        }
        step += 1;
        if let (Some(r), Some(f)) = (rise_at, fall_at) {
            if t1 >= f + settle {
                let t_rise = r;
                let t_fall = f - pulse_width;
                let delays = if inverting {
                    DelayResult { t_rise, t_fall, t_total: t_rise + t_fall }
                } else {
                    DelayResult { t_rise, t_fall, t_total: t_rise }
                };
                return Ok((delays, waveform));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::fit_line;

    fn act_from(bits: &str) -> ActivationVector {
        ActivationVector::new(BitVector::parse(bits).unwrap())
    }

    /// Activation with the first `even` even stages and first `odd` odd stages on.
    fn act_parity(n: usize, even: usize, odd: usize) -> ActivationVector {
        let mut b = BitVector::zeros(n);
        (0..n).filter(|&i| is_even_stage(i)).take(even).for_each(|i| b.set(i, true));
        (0..n).filter(|&i| !is_even_stage(i)).take(odd).for_each(|i| b.set(i, true));
        ActivationVector::new(b)
    }

    #[test]
    fn t_c_is_ln2_rc() {
        let cfg = ChainConfig::default();
        let t_c = cfg.delay_per_load();
        assert!((t_c - 62.383e-12).abs() < 0.01e-12, "{t_c}");
        let doubled = cfg.with_c_load(18e-15).delay_per_load();
        assert!((doubled - 2.0 * t_c).abs() < 1e-24);
        assert!(cfg.with_c_load(1e-30).delay_per_load() < 1e-26);
    }

    #[test]
    fn buffer_delays() {
        let cfg = ChainConfig::default().with_topology(Topology::Buffer);
        let zero = analytical_delay_buffer(&cfg, &ActivationVector::zeros(32)).unwrap();
        assert_eq!(zero.t_total, 32.0 * cfg.t_intrinsic);
        assert_eq!(zero.t_rise, zero.t_fall);
        let full = analytical_delay_buffer(&cfg, &ActivationVector::new(BitVector::ones(32))).unwrap();
        assert!((full.t_total - 32.0 * (cfg.t_intrinsic + cfg.delay_per_load())).abs() < 1e-22);

        let cfg16 = cfg.with_stages(16);
        let ds: Vec<f64> = (0..=16).map(|k| analytical_delay_buffer(&cfg16, &act_parity(16, k / 2, k - k / 2)).unwrap().t_total).collect();
        for w in ds.windows(2) {
            assert!(((w[1] - w[0]) - cfg.delay_per_load()).abs() < 1e-21);
        }
    }

    #[test]
    fn inverter_two_phase() {
        let cfg = ChainConfig::default();
        let t_int = cfg.t_intrinsic;
        let t_c = cfg.delay_per_load();
        let zero = analytical_delay_inverter(&cfg, &ActivationVector::zeros(32)).unwrap();
        assert_eq!(zero.t_total, 2.0 * 32.0 * t_int);
        let d = analytical_delay_inverter(&cfg, &act_parity(32, 5, 3)).unwrap();
        assert!((d.t_rise - (32.0 * t_int + 5.0 * t_c)).abs() < 1e-22);
        assert!((d.t_fall - (32.0 * t_int + 3.0 * t_c)).abs() < 1e-22);
        assert!((d.t_total - (64.0 * t_int + 8.0 * t_c)).abs() < 1e-22);
    }

    #[test]
    fn topology_and_length_errors() {
        let inv = ChainConfig::default();
        let buf = inv.with_topology(Topology::Buffer);
        assert!(analytical_delay_buffer(&inv, &ActivationVector::zeros(32)).is_err());
        assert!(analytical_delay_inverter(&buf, &ActivationVector::zeros(32)).is_err());
        assert!(matches!(analytical_delay(&inv, &ActivationVector::zeros(31)), Err(Error::LengthMismatch { expected: 32, found: 31 })));
        assert!(inv.with_stages(7).validate().is_err());
        assert!(buf.with_stages(7).validate().is_ok());
    }

    #[test]
    fn sense_rounding_and_clamping() {
        let cfg = ChainConfig::default();
        let b = cfg.phase_baseline();
        let t_c = cfg.delay_per_load();
        assert_eq!(sense_count(b, &cfg, b), 0);
        assert_eq!(sense_count(b + 7.4 * t_c, &cfg, b), 7);
        assert_eq!(sense_count(b + 7.6 * t_c, &cfg, b), 8);
        assert_eq!(sense_count(0.0, &cfg, b), 0);
        assert_eq!(sense_count(b + 100.0 * t_c, &cfg, b), 32);
    }

    #[test]
    fn sense_round_trips_exhaustively_on_eight_stages() {
        let cfg = ChainConfig::default().with_stages(8);
        for word in 0..256u64 {
            let act = ActivationVector::new(BitVector::from_u64(word, 8));
            let d = analytical_delay_inverter(&cfg, &act).unwrap();
            assert_eq!(sense_count(d.t_rise, &cfg, cfg.phase_baseline()), act.even_count());
            assert_eq!(sense_count(d.t_fall, &cfg, cfg.phase_baseline()), act.odd_count());
        }
    }

    #[test]
    fn single_buffer_stage_load_lag() {
        let cfg = ChainConfig::default().with_topology(Topology::Buffer).with_stages(1);
        let dt = max_time_step(&cfg);
        let pw = safe_pulse_width(&cfg);
        let off = transient_delays(&cfg, &act_from("0"), pw, dt).unwrap();
        let on = transient_delays(&cfg, &act_from("1"), pw, dt).unwrap();
        let lag = on.t_rise - off.t_rise;
        let t_c = cfg.delay_per_load();
        assert!(((lag - t_c) / t_c).abs() < 0.05, "lag {lag} vs {t_c}");
        assert!(((off.t_rise - cfg.t_intrinsic) / cfg.t_intrinsic).abs() < 0.05);
    }

    #[test]
    fn unloaded_inverter_chain_is_symmetric() {
        let cfg = ChainConfig::default();
        let d = transient_delays(&cfg, &ActivationVector::zeros(32), safe_pulse_width(&cfg), max_time_step(&cfg)).unwrap();
        assert!(((d.t_rise - d.t_fall) / d.t_rise).abs() < 0.01, "{d:?}");
        assert!(((d.t_rise - cfg.phase_baseline()) / cfg.phase_baseline()).abs() < 0.05);
    }

    #[test]
    fn transient_rise_delay_linear_in_even_loads() {
        let cfg = ChainConfig::default();
        let dt = max_time_step(&cfg);
        let pw = safe_pulse_width(&cfg);
        let (xs, ys): (Vec<f64>, Vec<f64>) = (0..=16)
            .map(|k| {
                let d = transient_delays(&cfg, &act_parity(32, k, 0), pw, dt).unwrap();
                (k as f64, d.t_rise)
            })
            .unzip();
        let (slope, _) = fit_line(&xs, &ys);
        let t_c = cfg.delay_per_load();
        assert!(((slope - t_c) / t_c).abs() < 0.05, "slope {slope} vs {t_c}");
    }

    #[test]
    fn transient_matches_analytical_per_phase() {
        let cfg = ChainConfig::default().with_stages(16);
        let act = act_from("1101001110000101");
        let a = analytical_delay(&cfg, &act).unwrap();
        let t = transient_simulate(&cfg, &act, safe_pulse_width(&cfg), max_time_step(&cfg)).unwrap();
        assert!(((t.delays.t_rise - a.t_rise) / a.t_rise).abs() < 0.05);
        assert!(((t.delays.t_fall - a.t_fall) / a.t_fall).abs() < 0.05);
        assert_eq!(t.waveform.nodes(), 17);
        assert_eq!(t.waveform.points().count(), t.waveform.len() * 17);
    }

    #[test]
    fn short_pulse_rejected_in_inverter_mode() {
        let cfg = ChainConfig::default();
        let act = act_parity(32, 16, 0);
        let phase_one = analytical_delay(&cfg, &act).unwrap().t_rise;
        let err = transient_simulate(&cfg, &act, 0.9 * phase_one, max_time_step(&cfg)).unwrap_err();
        assert!(matches!(err, Error::PulseTooShort { .. }));
        let err = transient_simulate(&cfg, &act, phase_one * 2.0, cfg.t_intrinsic).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    proptest::proptest! {
        #[test]
        fn phases_are_separable(word in 0u64..(1 << 16), flip in 0usize..16) {
            let cfg = ChainConfig::default().with_stages(16);
            let act = ActivationVector::new(BitVector::from_u64(word, 16));
            let mut other = act.bits().clone();
            other.flip(flip);
            let other = ActivationVector::new(other);
            let a = analytical_delay(&cfg, &act).unwrap();
            let b = analytical_delay(&cfg, &other).unwrap();
            if is_even_stage(flip) {
                proptest::prop_assert_eq!(a.t_fall, b.t_fall);
            } else {
                proptest::prop_assert_eq!(a.t_rise, b.t_rise);
            }
            proptest::prop_assert_eq!(a.t_total, a.t_rise + a.t_fall);
        }

        #[test]
        fn permutation_invariant(word in 0u64..(1 << 16), rot in 0usize..8) {
            // Rotating by an even amount keeps every bit on the same parity.
            let cfg = ChainConfig::default().with_stages(16);
            let bits = BitVector::from_u64(word, 16);
            let mut rotated = BitVector::zeros(16);
            for i in 0..16 {
                rotated.set((i + 2 * rot) % 16, bits.get(i));
            }
            let a = analytical_delay(&cfg, &ActivationVector::new(bits)).unwrap();
            let b = analytical_delay(&cfg, &ActivationVector::new(rotated)).unwrap();
            proptest::prop_assert_eq!(a, b);
        }
    }
}
