use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tdcim::commands::{self, ArrayOp, Run};
use tdcim::ExperimentConfig;
use tdcim_core::array::Fidelity;

#[derive(Parser, Debug)]
#[command(name = "tdcim", version, about = "FeFET time-domain compute-in-memory simulator")]
struct Cli {
    /// JSON config; omitted sections use defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: config `output_dir`, else `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every random stream; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    fidelity: Option<FidelityArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FidelityArg {
    Logical,
    Divider,
    Transient,
}

impl From<FidelityArg> for Fidelity {
    fn from(f: FidelityArg) -> Self {
        match f {
            FidelityArg::Logical => Fidelity::Logical,
            FidelityArg::Divider => Fidelity::Divider,
            FidelityArg::Transient => Fidelity::Transient,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// XOR/AND truth table and read-voltage sweep of one cell.
    CellTable,
    /// Delay versus activation count, analytical and transient.
    ChainSweep,
    /// Device-variation studies of the cell and the chains.
    Montecarlo,
    /// Energy/delay grid over load, stage count and supply.
    Dse,
    /// Hyperdimensional classification.
    Hdc {
        #[command(subcommand)]
        action: HdcAction,
    },
    /// Binary MAC on an array image.
    Mac {
        #[arg(long)]
        image: PathBuf,
        /// Input bits, one per column.
        #[arg(long)]
        input: String,
    },
    /// Hamming-distance search on an array image.
    Cam {
        #[arg(long)]
        image: PathBuf,
        /// Query bits, one per column.
        #[arg(long)]
        query: String,
    },
}

#[derive(Subcommand, Debug)]
enum HdcAction {
    Train {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    Infer {
        /// Model file written by `hdc train`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Run on the simulated fabric instead of the software reference.
        #[arg(long)]
        fabric: bool,
    },
    Benchmark {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<commands::Outcome> {
    let cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let cfg = cfg.resolve(cli.seed, cli.fidelity.map(Into::into));
    cfg.validate()?;
    let out = cfg.output_dir(cli.out.as_deref());
    let mut r = Run::new(cfg, out)?;
    match &cli.command {
        Command::CellTable => commands::cell_table(&mut r)?,
        Command::ChainSweep => commands::chain_sweep(&mut r)?,
        Command::Montecarlo => commands::montecarlo(&mut r)?,
        Command::Dse => commands::dse(&mut r)?,
        Command::Hdc { action } => match action {
            HdcAction::Train { dataset } => commands::hdc_train(&mut r, dataset.as_deref())?,
            HdcAction::Infer { model, dataset, fabric } => commands::hdc_infer(&mut r, model, dataset.as_deref(), *fabric)?,
            HdcAction::Benchmark { dataset } => commands::hdc_benchmark(&mut r, dataset.as_deref())?,
        },
        Command::Mac { image, input } => commands::array_op(&mut r, ArrayOp::Mac, image, input)?,
        Command::Cam { image, query } => commands::array_op(&mut r, ArrayOp::Cam, image, query)?,
    }
    Ok(r.finish())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            for c in &outcome.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
