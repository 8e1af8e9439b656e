//! Acceptance criteria. Runs as a plain binary so every criterion reports one
//! line, then exits non-zero if any failed.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng;
use tdcim::commands::{self, ArrayOp, Run};
use tdcim::ExperimentConfig;
use tdcim_core::allocation::{self, PhaseCost, Policy, TilePool, TileRole, WorkloadProfile};
use tdcim_core::analysis::{self, DseSpec, MonteCarloSpec, PatternKind, SearchCase, VddScaling};
use tdcim_core::array::{ArrayConfig, Fidelity, TdCimArray};
use tdcim_core::bits::BitVector;
use tdcim_core::cell::{self, CellMode, ReadConditions, Solver, XorAndCell};
use tdcim_core::chain::{self, ActivationVector, ChainConfig, Topology};
use tdcim_core::device::FeFetParams;
use tdcim_core::fabric::{Fabric, FabricConfig};
use tdcim_core::hdc::{self, Backend, HdcModel};
use tdcim_core::rng;

use std::f64::consts::LN_2 as LN2;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed < limit, format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn bits(n: usize, value: u64) -> BitVector {
    BitVector::from_bools(&(0..n).map(|i| value >> i & 1 == 1).collect::<Vec<_>>())
}

fn solvers() -> [Solver; 2] {
    [Solver::RailReferenced, Solver::FixedPoint]
}

fn truth_tables() -> Outcome {
    let start = Instant::now();
    let params = FeFetParams::default();
    let mut rng = rng::seeded(1);
    let mut cases = 0;
    for solver in solvers() {
        let cond = ReadConditions { solver, ..ReadConditions::new(0.9, 1.0) };
        for (s, i) in [(false, false), (false, true), (true, false), (true, true)] {
            let c = XorAndCell::new(s, &params, &mut rng);
            let xor = c.evaluate(&params, &cond, CellMode::Xor, i).map_err(|e| e.to_string())?;
            let and = c.evaluate(&params, &cond, CellMode::And, i).map_err(|e| e.to_string())?;
            check(xor == (s != i), format!("{solver:?} xor stored={s} input={i} gave {xor}"))?;
            check(and == (s && i), format!("{solver:?} and stored={s} input={i} gave {and}"))?;
            cases += 2;
        }
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("{cases} cases correct in {:.1?}", start.elapsed()))
}

fn vint_peak() -> Outcome {
    let params = FeFetParams::default();
    let cell = XorAndCell::new(false, &params, &mut rng::seeded(1));
    let mut notes = Vec::new();
    for solver in solvers() {
        let sweep: Vec<f64> = (0..=300)
            .map(|k| {
                let drive = cell::drive_for_search(true, 0.9, k as f64 * 0.01);
                cell.resolve_vint(&params, drive, solver).map_err(|e| e.to_string())
            })
            .collect::<Result<_, _>>()?;
        let max = sweep.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let at: Vec<usize> = (0..sweep.len()).filter(|&k| sweep[k] == max).collect();
        check(at.len() == 1, format!("{solver:?}: maximum attained {} times", at.len()))?;
        let k = at[0];
        check(k > 0 && k < sweep.len() - 1, format!("{solver:?}: maximum at sweep edge"))?;
        check(sweep[0] < max && sweep[300] < max, format!("{solver:?}: edges not below peak"))?;
        notes.push(format!("{solver:?} peak {max:.3} V at {:.2} V", k as f64 * 0.01));
    }
    Ok(notes.join(", "))
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

fn delay_linearity() -> Outcome {
    let start = Instant::now();
    let base = ChainConfig::default();
    let t_c = LN2 * 10e3 * 9e-15;
    check((base.delay_per_load() - t_c).abs() <= 4.0 * f64::EPSILON * t_c, "t_c disagrees with ln2*R*C")?;
    let mut worst_transient: f64 = 0.0;
    for n in [16usize, 32] {
        for topology in [Topology::Buffer, Topology::Inverter] {
            let cfg = base.with_stages(n).with_topology(topology);
            let ks: Vec<f64> = (0..=n).map(|k| k as f64).collect();
            let acts: Vec<ActivationVector> = (0..=n).map(|k| ActivationVector::new(bits(n, (1u64 << k) - 1))).collect();
            let analytic: Vec<f64> = acts.iter().map(|a| chain::analytical_delay(&cfg, a).unwrap().t_total).collect();
            let s = slope(&ks, &analytic);
            check((s - t_c).abs() <= 1e-13 * t_c, format!("{n}-stage {topology:?} analytical slope {s:e}"))?;
            let pulse = chain::safe_pulse_width(&cfg);
            let dt = chain::max_time_step(&cfg);
            let sim: Vec<f64> = acts
                .iter()
                .map(|a| chain::transient_delays(&cfg, a, pulse, dt).map(|d| d.t_total).map_err(|e| e.to_string()))
                .collect::<Result<_, _>>()?;
            let rel = (slope(&ks, &sim) - t_c).abs() / t_c;
            check(rel <= 0.05, format!("{n}-stage {topology:?} transient slope off by {:.2}%", rel * 100.0))?;
            worst_transient = worst_transient.max(rel);
        }
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("analytical exact, transient worst {:.2e} relative, {:.1?}", worst_transient, start.elapsed()))
}

fn two_phase() -> Outcome {
    let cfg = ChainConfig::default().with_stages(8);
    let mut rise: BTreeMap<u32, f64> = BTreeMap::new();
    let mut fall: BTreeMap<u32, f64> = BTreeMap::new();
    let base = 8.0 * cfg.t_intrinsic;
    for v in 0..256u64 {
        // Stage numbers are 1-based; stage i+1 is even when bit i is odd.
        let even = (0..8).filter(|i| i % 2 == 1 && v >> i & 1 == 1).count() as u32;
        let odd = (0..8).filter(|i| i % 2 == 0 && v >> i & 1 == 1).count() as u32;
        let d = chain::analytical_delay_inverter(&cfg, &ActivationVector::new(bits(8, v))).map_err(|e| e.to_string())?;
        let r = *rise.entry(even).or_insert(d.t_rise);
        let f = *fall.entry(odd).or_insert(d.t_fall);
        check(r == d.t_rise, format!("t_rise varies within even count {even} ({v:08b})"))?;
        check(f == d.t_fall, format!("t_fall varies within odd count {odd} ({v:08b})"))?;
        check(d.t_total == d.t_rise + d.t_fall, format!("t_total is not the sum for {v:08b}"))?;
        check(chain::sense_count(d.t_rise, &cfg, base) == even, format!("rise count round-trip failed for {v:08b}"))?;
        check(chain::sense_count(d.t_fall, &cfg, base) == odd, format!("fall count round-trip failed for {v:08b}"))?;
    }
    check(rise.len() == 5 && fall.len() == 5, "expected five distinct levels per phase")?;
    Ok("256 vectors, 5 rise and 5 fall levels, counts round-trip".into())
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = rng::seeded(7);
    let words: Vec<u64> = (0..8).map(|_| rng.random::<u8>() as u64).collect();
    let mut array = TdCimArray::new(ArrayConfig::new(8, 8), &mut rng).map_err(|e| e.to_string())?;
    for (r, &w) in words.iter().enumerate() {
        array.write_row(r, &bits(8, w), &mut rng).map_err(|e| e.to_string())?;
    }
    for fidelity in [Fidelity::Logical, Fidelity::Divider, Fidelity::Transient] {
        for x in 0..256u64 {
            let input = bits(8, x);
            let dot: Vec<u32> = words.iter().map(|w| (0..8).filter(|i| w >> i & 1 == 1 && x >> i & 1 == 1).count() as u32).collect();
            let ham: Vec<u32> = words.iter().map(|w| (0..8).filter(|i| (w >> i & 1) != (x >> i & 1)).count() as u32).collect();
            let mac = array.mac(&input, fidelity).map_err(|e| e.to_string())?;
            let cam = array.cam_search(&input, fidelity).map_err(|e| e.to_string())?;
            check(mac.counts == dot, format!("{fidelity:?} MAC mismatch for input {x:08b}"))?;
            check(cam.counts == ham, format!("{fidelity:?} CAM mismatch for query {x:08b}"))?;
        }
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!("3 fidelities x 256 inputs x (MAC, CAM) exact in {:.1?}", start.elapsed()))
}

fn variation() -> Outcome {
    let start = Instant::now();
    let device = FeFetParams::default();
    let at_one = |sigma: f64, trials: usize| {
        let spec = MonteCarloSpec { n_trials: trials, sigma_vth: sigma, v_read_sweep: vec![1.0], seed: 11, ..Default::default() };
        analysis::mc_cell_vint(&spec, &device, 0.9, Solver::RailReferenced).map_err(|e| e.to_string())
    };
    let t = at_one(0.05, 10_000)?;
    let errors = t.decision_errors(1.0, cell::access_threshold(0.9)).unwrap();
    check(errors == 0, format!("{errors} decision errors at 50 mV"))?;

    let (narrow, wide) = (at_one(0.12, 10_000)?, at_one(0.2, 10_000)?);
    for case in [SearchCase::Match, SearchCase::Mismatch] {
        let (a, b) = (narrow.point(1.0, case).unwrap().summary.std, wide.point(1.0, case).unwrap().summary.std);
        check(b > a, format!("{case:?}: std {b:e} at 0.2 V not above {a:e} at 0.12 V"))?;
    }

    // t_c = 200 ps so adjacent levels clear a 100 ps margin absent variation.
    let chain = ChainConfig::default().with_c_load(200e-12 / (LN2 * 10e3));
    // 0.12 V is the nominal study; the wider sigmas make errors frequent
    // enough that the length trend is actually exercised.
    let mut rates = Vec::new();
    for sigma in [0.12, 0.2, 0.25] {
        let spec = MonteCarloSpec { sigma_vth: sigma, seed: 11, ..Default::default() };
        for pattern in [PatternKind::CamFlips, PatternKind::MacOverlap] {
            let r = analysis::mc_chain_delay(&spec, &chain, &device, &ReadConditions::default(), pattern).map_err(|e| e.to_string())?;
            let pr: Vec<f64> = r.lengths.iter().map(|l| l.pass_rate).collect();
            check(pr.windows(2).all(|w| w[1] <= w[0]), format!("sigma {sigma} {pattern:?}: pass rate increases with length: {pr:?}"))?;
            if sigma == 0.12 {
                check(pr[0] == 1.0, format!("{pattern:?} 32-stage pass rate {}", pr[0]))?;
            }
            if pattern == PatternKind::CamFlips {
                rates.push(format!("{sigma} V: {pr:?}"));
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(300))?;
    Ok(format!("0 errors at 50 mV, spread ordered, CAM pass rates {}, {:.1?}", rates.join("; "), start.elapsed()))
}

fn dse_invariants() -> Outcome {
    let spec = DseSpec::default();
    let grid = analysis::dse_energy_delay(&spec, &ChainConfig::default(), 1e-15, &VddScaling::default()).map_err(|e| e.to_string())?;
    check(grid.diagonal_max_rel_dev <= 0.01, format!("diagonal deviation {:e}", grid.diagonal_max_rel_dev))?;
    // Independent diagonal check: activation energy is N * C * VDD^2.
    for p in &grid.points {
        let expected = p.n_stages as f64 * p.c_load * p.vdd * p.vdd;
        check((p.activation_energy - expected).abs() <= 1e-9 * expected, "activation energy is not N*C*VDD^2")?;
    }
    for &c in &spec.c_load_values {
        for &n in &spec.stage_counts {
            let line: Vec<_> = spec
                .vdd_values
                .iter()
                .map(|&v| grid.points.iter().find(|p| p.c_load == c && p.n_stages == n && p.vdd == v).unwrap())
                .collect();
            for w in line.windows(2) {
                check(w[1].energy > w[0].energy, format!("energy not increasing at c={c:e}, n={n}"))?;
                check(w[1].delay < w[0].delay, format!("delay not decreasing at c={c:e}, n={n}"))?;
            }
        }
    }
    Ok(format!("{} grid points, diagonal deviation {:.1e}", grid.points.len(), grid.diagonal_max_rel_dev))
}

fn hdc_equivalence() -> Outcome {
    let start = Instant::now();
    let data = hdc::synthetic_blobs(16, 2, 100, 0.1, 3);
    let (train, test) = data.split_at(100);
    let labels: Vec<i64> = train.iter().map(|(_, l)| *l).collect();
    let mut model = HdcModel::new(16, 512, 4, 3, &labels).map_err(|e| e.to_string())?;
    model.train(train, &mut Backend::Software).map_err(|e| e.to_string())?;
    let mut fabric = Fabric::new(FabricConfig::default()).map_err(|e| e.to_string())?;
    for (f, _) in &data {
        let soft = model.encode(f, &mut Backend::Software).map_err(|e| e.to_string())?;
        let hard = model.encode(f, &mut Backend::Fabric(&mut fabric)).map_err(|e| e.to_string())?;
        check(soft == hard, "fabric encoding differs from software")?;
    }
    let mut correct = 0;
    for (f, l) in test {
        let soft = model.infer(f, &mut Backend::Software).map_err(|e| e.to_string())?;
        let hard = model.infer(f, &mut Backend::Fabric(&mut fabric)).map_err(|e| e.to_string())?;
        check(soft == hard, "fabric prediction differs from software")?;
        correct += usize::from(soft.label == *l);
    }
    let acc = correct as f64 / test.len() as f64;
    check(acc >= 0.9, format!("software accuracy {acc}"))?;
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!("200 encodings and 100 predictions identical, accuracy {:.0}%, {:.1?}", acc * 100.0, start.elapsed()))
}

fn allocation_optimality() -> Outcome {
    let mut rng = rng::seeded(5);
    for trial in 0..100 {
        let n = rng.random_range(2..=64usize);
        let phase = |rng: &mut rng::SimRng| {
            let ops = if rng.random_bool(0.1) { 0 } else { rng.random_range(1..10_000u64) };
            let per = rng.random_range(1e-12..1e-9);
            PhaseCost { ops, energy: ops as f64 * rng.random_range(1e-15..1e-12), latency: ops as f64 * per }
        };
        let profile = WorkloadProfile { mac: phase(&mut rng), cam: phase(&mut rng) };
        let side = |p: &PhaseCost, t: usize| match (p.ops, t) {
            (0, _) => 0.0,
            (_, 0) => f64::INFINITY,
            _ => p.latency / t as f64,
        };
        let best = (0..=n).map(|m| side(&profile.mac, m).max(side(&profile.cam, n - m))).fold(f64::INFINITY, f64::min);
        let pool = allocation::allocate(&TilePool::new(n, 32, 32), &profile, Policy::ProportionalLatency).map_err(|e| e.to_string())?;
        let (m, c) = (pool.count(TileRole::Mac), pool.count(TileRole::Cam));
        let got = side(&profile.mac, m).max(side(&profile.cam, c));
        check(m + c <= n, format!("trial {trial}: split {m}+{c} exceeds {n}"))?;
        check(got == best, format!("trial {trial}: makespan {got:e}, optimum {best:e}"))?;
        let r = allocation::account(&pool, &profile, rng.random_range(0.0..1e-12));
        let p = r.percentages;
        let e = p.energy_mac + p.energy_cam + p.energy_write;
        let l = p.latency_mac + p.latency_cam;
        check((e - 100.0).abs() <= 0.01, format!("trial {trial}: energy percentages sum to {e}"))?;
        check(
            profile.mac.ops + profile.cam.ops == 0 || (l - 100.0).abs() <= 0.01,
            format!("trial {trial}: latency percentages sum to {l}"),
        )?;
    }
    Ok("100 random profiles optimal, percentages conserved".into())
}

fn run_suite(dir: &Path) -> Result<(), String> {
    let cfg = ExperimentConfig::default().resolve(Some(42), None);
    let go = |f: &dyn Fn(&mut Run) -> anyhow::Result<()>, sub: &str| -> Result<(), String> {
        let mut r = Run::new(cfg.clone(), dir.join(sub)).map_err(|e| e.to_string())?;
        f(&mut r).map_err(|e| format!("{sub}: {e:#}"))?;
        check(r.finish().passed(), format!("{sub}: self-check failed"))
    };
    go(&commands::cell_table, "cell")?;
    go(&commands::chain_sweep, "chain")?;
    go(&commands::montecarlo, "mc")?;
    go(&commands::dse, "dse")?;
    go(&|r| commands::hdc_train(r, None), "hdc")?;
    let model = dir.join("hdc/model.json");
    go(&|r| commands::hdc_infer(r, &model, None, true), "infer")?;
    go(&|r| commands::hdc_benchmark(r, None), "bench")?;
    let image = dir.join("image.txt");
    fs::write(&image, "4 6\n101100\n010011\n111111\n000000\n").map_err(|e| e.to_string())?;
    go(&|r| commands::array_op(r, ArrayOp::Mac, &image, "110110"), "mac")?;
    go(&|r| commands::array_op(r, ArrayOp::Cam, &image, "101101"), "cam")?;
    Ok(())
}

fn collect(dir: &Path, out: &mut BTreeMap<String, Vec<u8>>, root: &Path) {
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            collect(&p, out, root);
        } else {
            out.insert(p.strip_prefix(root).unwrap().display().to_string(), fs::read(&p).unwrap());
        }
    }
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
    run_suite(a.path())?;
    run_suite(b.path())?;
    let (mut fa, mut fb) = (BTreeMap::new(), BTreeMap::new());
    collect(a.path(), &mut fa, a.path());
    collect(b.path(), &mut fb, b.path());
    check(fa.keys().eq(fb.keys()), "runs wrote different file sets")?;
    let artifacts: Vec<&String> = fa.keys().filter(|k| k.ends_with(".csv") || k.ends_with(".json")).collect();
    for k in &artifacts {
        check(fa[*k] == fb[*k], format!("{k} differs between runs"))?;
    }
    Ok(format!("{} CSV/JSON artifacts byte-identical", artifacts.len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("cell truth tables", truth_tables),
        ("non-monotonic V_int", vint_peak),
        ("delay linearity", delay_linearity),
        ("two-phase correctness", two_phase),
        ("oracle equivalence", oracle_equivalence),
        ("variation robustness", variation),
        ("DSE invariants", dse_invariants),
        ("HDC backend equivalence", hdc_equivalence),
        ("allocation optimality", allocation_optimality),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(msg) => println!("criterion {:>2} {name}: PASS ({msg})", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({msg})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
