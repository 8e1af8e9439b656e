//! One function per subcommand. Each writes its artifacts into the output
//! directory and returns the self-checks it ran.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use tdcim_core::allocation::{self, Policy, TaskShape, TilePool, WorkloadProfile};
use tdcim_core::analysis::{self, fit_line, SearchCase};
use tdcim_core::array::{Fidelity, TdCimArray};
use tdcim_core::bits::BitVector;
use tdcim_core::cell::{self, CellMode, ReadConditions, XorAndCell};
use tdcim_core::chain::{self, ActivationVector, Topology};
use tdcim_core::fabric::Fabric;
use tdcim_core::hdc::{self, Backend, FeatureVector, HdcModel, Label};
use tdcim_core::rng;

use crate::config::ExperimentConfig;
use crate::formats::{self, sci, ModelJson, ReceiptJson, ReportJson, Table};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Resolved config plus the directory artifacts go to.
pub struct Run {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
    outcome: Outcome,
}

impl Run {
    pub fn new(cfg: ExperimentConfig, out: PathBuf) -> anyhow::Result<Self> {
        fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        Ok(Self { cfg, out, outcome: Outcome::default() })
    }

    fn meta(&self, command: &str, extra: &[(&str, String)]) -> String {
        let mut line = format!("# command={command}");
        for (k, v) in extra {
            line.push_str(&format!(" {k}={v}"));
        }
        line + &formats::metadata_line(&self.cfg, &[])[1..]
    }

    fn write(&mut self, name: &str, contents: &str) -> anyhow::Result<()> {
        let path = self.out.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.outcome.files.push(path);
        Ok(())
    }

    fn check(&mut self, c: Check) {
        self.outcome.checks.push(c);
    }

    fn write_config(&mut self) -> anyhow::Result<()> {
        let text = formats::to_json(&self.cfg);
        self.write("config.resolved.json", &text)
    }

    pub fn finish(self) -> Outcome {
        self.outcome
    }
}

fn mode_name(mode: CellMode) -> &'static str {
    match mode {
        CellMode::Xor => "xor",
        CellMode::And => "and",
    }
}

fn bit(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn read_conditions(cfg: &ExperimentConfig, v_read: f64) -> ReadConditions {
    ReadConditions { solver: cfg.array.solver, ..ReadConditions::new(cfg.chain.vdd, v_read) }
}

/// Truth table at the configured read voltage plus a read-voltage sweep.
pub fn cell_table(run: &mut Run) -> anyhow::Result<()> {
    run.write_config()?;
    let cfg = run.cfg.clone();
    let params = cfg.device;
    let header = ["mode", "stored", "input", "v_read", "v_int", "logic_out"];
    let mut rng = rng::seeded(cfg.array.seed);
    let combos: Vec<(CellMode, bool, bool)> = [CellMode::Xor, CellMode::And]
        .into_iter()
        .flat_map(|m| [(false, false), (false, true), (true, false), (true, true)].map(|(s, i)| (m, s, i)))
        .collect();
    let cells: Vec<XorAndCell> = combos.iter().map(|&(_, s, _)| XorAndCell::new(s, &params, &mut rng)).collect();

    let eval = |c: &XorAndCell, mode, input, v_read| -> anyhow::Result<(f64, bool)> {
        let cond = read_conditions(&cfg, v_read);
        let v = c.resolve_vint(&params, cell::drive(mode, input, cond.vdd, v_read), cond.solver)?;
        Ok((v, cell::logic_output(v, cond.v_threshold)))
    };

    let mut truth = Table::new(run.meta("cell-table", &[]), &header);
    let mut wrong = 0;
    for (c, &(mode, s, i)) in cells.iter().zip(&combos) {
        let (v, out) = eval(c, mode, i, cfg.array.v_read)?;
        let expected = match mode {
            CellMode::Xor => s ^ i,
            CellMode::And => s & i,
        };
        wrong += usize::from(out != expected);
        truth.row([mode_name(mode), bit(s), bit(i), &sci(cfg.array.v_read), &sci(v), bit(out)]);
    }
    run.write("cell_truth.csv", &truth.finish())?;

    let mut sweep = Table::new(run.meta("cell-table", &[]), &header);
    for (c, &(mode, s, i)) in cells.iter().zip(&combos) {
        for &v_read in &cfg.mc.v_read_sweep {
            let (v, out) = eval(c, mode, i, v_read)?;
            sweep.row([mode_name(mode), bit(s), bit(i), &sci(v_read), &sci(v), bit(out)]);
        }
    }
    run.write("cell_sweep.csv", &sweep.finish())?;
    run.check(Check::new("truth_table", wrong == 0, format!("{} of 8 rows wrong", wrong)));
    Ok(())
}

fn first_k(n: usize, k: usize) -> ActivationVector {
    let mut b = BitVector::zeros(n);
    (0..k).for_each(|i| b.set(i, true));
    ActivationVector::new(b)
}

/// Delay versus activation count for 16- and 32-stage chains.
pub fn chain_sweep(run: &mut Run) -> anyhow::Result<()> {
    run.write_config()?;
    let base = run.cfg.chain;
    let t_c = base.delay_per_load();
    let mut sweep =
        Table::new(run.meta("chain-sweep", &[]), &["n_stages", "topology", "method", "n_active", "t_rise_s", "t_fall_s", "t_total_s"]);
    let mut slopes = Table::new(run.meta("chain-sweep", &[]), &["n_stages", "topology", "method", "slope_s", "t_c_s", "rel_error"]);
    let mut worst = [0.0f64; 2];
    for n in [16usize, 32] {
        for topology in [Topology::Buffer, Topology::Inverter] {
            let cfg = base.with_stages(n).with_topology(topology);
            let topo = match topology {
                Topology::Buffer => "buffer",
                Topology::Inverter => "inverter",
            };
            for (m, method) in ["analytical", "transient"].into_iter().enumerate() {
                let (mut xs, mut ys) = (Vec::new(), Vec::new());
                for k in 0..=n {
                    let act = first_k(n, k);
                    let d = if m == 0 {
                        chain::analytical_delay(&cfg, &act)?
                    } else {
                        chain::transient_delays(&cfg, &act, chain::safe_pulse_width(&cfg), chain::max_time_step(&cfg))?
                    };
                    xs.push(k as f64);
                    ys.push(d.t_total);
                    sweep.row([n.to_string(), topo.into(), method.into(), k.to_string(), sci(d.t_rise), sci(d.t_fall), sci(d.t_total)]);
                }
                let (slope, _) = fit_line(&xs, &ys);
                let rel = (slope - t_c).abs() / t_c;
                worst[m] = worst[m].max(rel);
                slopes.row([n.to_string(), topo.into(), method.into(), sci(slope), sci(t_c), sci(rel)]);
            }
        }
    }
    run.write("chain_sweep.csv", &sweep.finish())?;
    run.write("chain_slopes.csv", &slopes.finish())?;

    // One inverter run with every other stage loaded, decimated to keep the file small.
    let cfg = base.with_stages(16).with_topology(Topology::Inverter);
    let mut act = BitVector::zeros(16);
    (0..16).step_by(3).for_each(|i| act.set(i, true));
    let tr = chain::transient_simulate(&cfg, &ActivationVector::new(act), chain::safe_pulse_width(&cfg), chain::max_time_step(&cfg))?;
    let stride = tr.waveform.len().div_ceil(2000).max(1);
    let mut wave = Table::new(run.meta("chain-sweep", &[("waveform.stride", stride.to_string())]), &["time_s", "stage_index", "voltage_v"]);
    for k in (0..tr.waveform.len()).step_by(stride) {
        let t = tr.waveform.times[k];
        for (i, v) in tr.waveform.sample(k).iter().enumerate() {
            wave.row([sci(t), i.to_string(), sci(*v)]);
        }
    }
    run.write("waveform.csv", &wave.finish())?;

    run.check(Check::new("analytical_slope", worst[0] < 1e-9, format!("max relative slope error {:e}", worst[0])));
    run.check(Check::new("transient_slope", worst[1] < 0.05, format!("max relative slope error {:e}", worst[1])));
    Ok(())
}

/// Internal-node and chain-delay variation studies.
pub fn montecarlo(run: &mut Run) -> anyhow::Result<()> {
    run.write_config()?;
    let cfg = run.cfg.clone();
    let spec = cfg.mc.spec();
    let table = analysis::mc_cell_vint(&spec, &cfg.device, cfg.chain.vdd, cfg.array.solver)?;
    let threshold = cell::access_threshold(cfg.chain.vdd);
    let case_name = |c: SearchCase| match c {
        SearchCase::Match => "match",
        SearchCase::Mismatch => "mismatch",
    };

    let mut samples = Table::new(run.meta("montecarlo", &[]), &["v_read", "case", "trial", "v_int"]);
    let mut summary = Table::new(run.meta("montecarlo", &[]), &["v_read", "case", "mean", "std", "min", "max", "decision_errors"]);
    for p in &table.points {
        for (t, v) in p.samples.iter().enumerate() {
            samples.row([sci(p.v_read), case_name(p.case).into(), t.to_string(), sci(*v)]);
        }
        let errors = table.decision_errors(p.v_read, threshold).unwrap_or(0);
        let s = p.summary;
        summary.row([sci(p.v_read), case_name(p.case).into(), sci(s.mean), sci(s.std), sci(s.min), sci(s.max), errors.to_string()]);
    }
    run.write("mc_vint.csv", &samples.finish())?;
    run.write("mc_vint_summary.csv", &summary.finish())?;

    let cond = read_conditions(&cfg, cfg.array.v_read);
    let result = analysis::mc_chain_delay(&spec, &cfg.chain, &cfg.device, &cond, cfg.mc.pattern)?;
    let mut delays = Table::new(run.meta("montecarlo", &[]), &["n_stages", "count", "trial", "t_total_s"]);
    let mut levels = Table::new(run.meta("montecarlo", &[]), &["n_stages", "count", "mean", "std", "min", "max"]);
    let mut rates = Table::new(run.meta("montecarlo", &[]), &["n_stages", "separable_pairs", "pass_rate"]);
    for len in &result.lengths {
        for l in &len.levels {
            for (t, d) in l.delays.iter().enumerate() {
                delays.row([len.n_stages.to_string(), l.count.to_string(), t.to_string(), sci(*d)]);
            }
            let s = l.summary;
            levels.row([len.n_stages.to_string(), l.count.to_string(), sci(s.mean), sci(s.std), sci(s.min), sci(s.max)]);
        }
        rates.row([len.n_stages.to_string(), len.separable_pairs.to_string(), sci(len.pass_rate)]);
    }
    run.write("mc_chain.csv", &delays.finish())?;
    run.write("mc_chain_summary.csv", &levels.finish())?;
    run.write("mc_pass_rate.csv", &rates.finish())?;
    Ok(())
}

/// Energy and delay over load capacitance, stage count and supply.
pub fn dse(run: &mut Run) -> anyhow::Result<()> {
    run.write_config()?;
    let cfg = run.cfg.clone();
    let grid = analysis::dse_energy_delay(&cfg.dse, &cfg.chain, cfg.array.energy.e_intrinsic_per_stage, &cfg.vdd_scaling)?;
    let meta = run.meta("dse", &[("diagonal_max_rel_dev", sci(grid.diagonal_max_rel_dev))]);
    let mut t = Table::new(meta, &["c_load_f", "n_stages", "vdd_v", "energy_j", "activation_energy_j", "delay_s"]);
    for p in &grid.points {
        t.row([sci(p.c_load), p.n_stages.to_string(), sci(p.vdd), sci(p.energy), sci(p.activation_energy), sci(p.delay)]);
    }
    run.write("dse.csv", &t.finish())?;

    let mut monotone = true;
    for &c in &cfg.dse.c_load_values {
        for &n in &cfg.dse.stage_counts {
            let mut line: Vec<_> = grid.points.iter().filter(|p| p.c_load == c && p.n_stages == n).collect();
            line.sort_by(|a, b| a.vdd.total_cmp(&b.vdd));
            monotone &= line.windows(2).all(|w| w[0].vdd == w[1].vdd || (w[1].energy > w[0].energy && w[1].delay < w[0].delay));
        }
    }
    run.check(Check::new(
        "diagonal_energy",
        grid.diagonal_max_rel_dev <= 0.01,
        format!("max relative deviation {:e}", grid.diagonal_max_rel_dev),
    ));
    run.check(Check::new("vdd_trends", monotone, "energy rises and delay falls with vdd"));
    Ok(())
}

pub type Dataset = Vec<(FeatureVector, Label)>;

/// Configured dataset, or the seeded synthetic one, split into train and test.
pub fn load_dataset(cfg: &ExperimentConfig, path: Option<&Path>) -> anyhow::Result<(Dataset, Dataset)> {
    let h = &cfg.hdc;
    let data = match path.or(h.dataset.as_deref()) {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading dataset {}", p.display()))?;
            formats::parse_dataset(&text).with_context(|| format!("in {}", p.display()))?
        }
        None => hdc::synthetic_blobs(h.n_features, h.n_classes, h.per_class, h.spread, h.seed),
    };
    ensure!(data.len() >= 2, "dataset needs at least two examples");
    let n = data[0].0.len();
    ensure!(data.iter().all(|(f, _)| f.len() == n), "all examples need the same feature count");
    let cut = ((data.len() as f64 * h.train_fraction) as usize).clamp(1, data.len() - 1);
    let test = data[cut..].to_vec();
    let mut train = data;
    train.truncate(cut);
    Ok((train, test))
}

pub fn train_model(cfg: &ExperimentConfig, train: &Dataset) -> anyhow::Result<HdcModel> {
    let h = &cfg.hdc;
    let labels: Vec<Label> = train.iter().map(|(_, l)| *l).collect();
    let mut model = HdcModel::new(train[0].0.len(), h.dim, h.quant_bits, h.seed, &labels)?;
    model.train(train, &mut Backend::Software)?;
    Ok(model)
}

pub fn hdc_train(run: &mut Run, dataset: Option<&Path>) -> anyhow::Result<()> {
    run.write_config()?;
    let (train, test) = load_dataset(&run.cfg, dataset)?;
    let model = train_model(&run.cfg, &train)?;
    run.write("model.json", &formats::to_json(&ModelJson::from_model(&model)?))?;
    if dataset.is_none() && run.cfg.hdc.dataset.is_none() {
        let all: Dataset = train.iter().chain(&test).cloned().collect();
        run.write("dataset.csv", &formats::format_dataset(&all))?;
    }
    let acc = hdc::accuracy(&model, &train, &mut Backend::Software)?;
    run.write("train_summary.json", &formats::to_json(&serde_json::json!({"examples": train.len(), "train_accuracy": acc})))?;
    Ok(())
}

fn predictions_table(run: &Run, model: &HdcModel, data: &Dataset, backend: &mut Backend<'_>) -> anyhow::Result<(String, Vec<Label>, f64)> {
    let mut header = vec!["index".to_string(), "label".into(), "predicted".into()];
    header.extend(model.classes().iter().map(|c| format!("distance_{}", c.label)));
    let mut t = Table::new(run.meta("hdc", &[]), &header.iter().map(String::as_str).collect::<Vec<_>>());
    let mut predicted = Vec::with_capacity(data.len());
    let mut correct = 0usize;
    for (i, (f, l)) in data.iter().enumerate() {
        let p = model.infer(f, backend)?;
        correct += usize::from(p.label == *l);
        predicted.push(p.label);
        t.row([i.to_string(), l.to_string(), p.label.to_string()].into_iter().chain(p.distances.iter().map(u32::to_string)));
    }
    Ok((t.finish(), predicted, correct as f64 / data.len().max(1) as f64))
}

pub fn hdc_infer(run: &mut Run, model_path: &Path, dataset: Option<&Path>, fabric: bool) -> anyhow::Result<()> {
    run.write_config()?;
    let text = fs::read_to_string(model_path).with_context(|| format!("reading model {}", model_path.display()))?;
    let model = serde_json::from_str::<ModelJson>(&text)
        .map_err(formats::FormatError::from)
        .and_then(ModelJson::into_model)
        .with_context(|| format!("in {}", model_path.display()))?;
    let (_, test) = load_dataset(&run.cfg, dataset)?;
    ensure!(test[0].0.len() == model.n_features(), "dataset has {} features, model expects {}", test[0].0.len(), model.n_features());
    let mut fab = if fabric { Some(Fabric::new(run.cfg.fabric_config())?) } else { None };
    let mut backend = match fab.as_mut() {
        Some(f) => Backend::Fabric(f),
        None => Backend::Software,
    };
    let (csv, _, acc) = predictions_table(run, &model, &test, &mut backend)?;
    run.write("predictions.csv", &csv)?;
    let name = if fabric { "fabric" } else { "software" };
    run.write("infer_summary.json", &formats::to_json(&serde_json::json!({"backend": name, "examples": test.len(), "accuracy": acc})))?;
    Ok(())
}

/// Trains in software, runs the test split on both backends and reports the
/// fabric's MAC/CAM breakdown after allocating the tile pool.
pub fn hdc_benchmark(run: &mut Run, dataset: Option<&Path>) -> anyhow::Result<()> {
    run.write_config()?;
    let cfg = run.cfg.clone();
    let (train, test) = load_dataset(&cfg, dataset)?;
    let model = train_model(&cfg, &train)?;
    let (_, soft, soft_acc) = predictions_table(run, &model, &test, &mut Backend::Software)?;
    let mut fabric = Fabric::new(cfg.fabric_config())?;
    let (csv, hard, hard_acc) = predictions_table(run, &model, &test, &mut Backend::Fabric(&mut fabric))?;
    run.write("predictions.csv", &csv)?;

    let profile = WorkloadProfile::from_log(&fabric.log);
    let tile = cfg.array_config();
    let shape = TaskShape {
        n_features: model.n_features(),
        dim: model.dim(),
        n_classes: model.classes().len(),
        queries: test.len(),
        quant_bits: model.quant_bits(),
    };
    let expected_ops = allocation::tile_ops(&shape, tile.rows, tile.cols);
    let pool = allocation::allocate(&TilePool::new(cfg.hdc.tiles, tile.rows, tile.cols), &profile, Policy::ProportionalLatency)?;
    let report = allocation::account(&pool, &profile, fabric.log.write_energy);
    let json = ReportJson::new(&cfg.hdc.task, &profile, &report);
    run.write("report.json", &formats::to_json(&json))?;
    let meta = run.meta("hdc-benchmark", &[]);
    run.write("breakdown.csv", &json.breakdown_csv(meta))?;
    let agree = soft == hard;
    run.write(
        "benchmark_summary.json",
        &formats::to_json(&serde_json::json!({
            "examples": test.len(),
            "software_accuracy": soft_acc,
            "fabric_accuracy": hard_acc,
            "backends_agree": agree,
        })),
    )?;

    let p = &report.percentages;
    let e_sum = p.energy_mac + p.energy_cam + p.energy_write;
    let l_sum = p.latency_mac + p.latency_cam;
    let sums_ok = |s: f64| s == 0.0 || (s - 100.0).abs() <= 0.01;
    run.check(Check::new("percentages", sums_ok(e_sum) && sums_ok(l_sum), format!("energy {e_sum:.6}%, latency {l_sum:.6}%")));
    run.check(Check::new(
        "tile_ops",
        (profile.mac.ops, profile.cam.ops) == expected_ops,
        format!("measured {:?}, expected {:?}", (profile.mac.ops, profile.cam.ops), expected_ops),
    ));
    if cfg.device.sigma_vth == 0.0 {
        run.check(Check::new("backend_agreement", agree, "fabric predictions match software"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrayOp {
    Mac,
    Cam,
}

/// Programs an array from an image file and runs one operation on it.
pub fn array_op(run: &mut Run, op: ArrayOp, image: &Path, input: &str) -> anyhow::Result<()> {
    run.write_config()?;
    let text = fs::read_to_string(image).with_context(|| format!("reading {}", image.display()))?;
    let rows = formats::parse_array_image(&text).with_context(|| format!("in {}", image.display()))?;
    let Some(first) = rows.first() else { bail!("array image has no rows") };
    let input = BitVector::parse(input.trim()).map_err(|_| anyhow::anyhow!("input must contain only 0 and 1"))?;
    ensure!(input.len() == first.len(), "input has {} bits, array has {} columns", input.len(), first.len());
    let mut cfg = run.cfg.clone();
    cfg.array.rows = rows.len();
    cfg.array.cols = first.len();
    let mut rng = rng::seeded(cfg.array.seed);
    let mut array = TdCimArray::new(cfg.array_config(), &mut rng)?;
    for (i, r) in rows.iter().enumerate() {
        array.write_row(i, r, &mut rng)?;
    }
    let fidelity: Fidelity = cfg.array.fidelity;
    let (name, receipt) = match op {
        ArrayOp::Mac => ("mac", array.mac(&input, fidelity)?),
        ArrayOp::Cam => ("cam", array.cam_search(&input, fidelity)?),
    };
    run.write(&format!("{name}_receipt.json"), &formats::to_json(&ReceiptJson::new(name, &receipt)))?;
    Ok(())
}
