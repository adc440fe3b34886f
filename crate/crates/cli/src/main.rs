use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vmin_core::baselines::BaselineKind;
use vmin_core::dataset::NormScope;
use vmin_core::experiment::{
    cmd_ablate, cmd_baseline, cmd_evaluate, cmd_pretrain, cmd_synth, cmd_transfer, format_table, write_result,
    CommandReport, ExperimentResult, FeatureSet, RunConfig,
};
use vmin_core::model::Block;
use vmin_core::synth::{describe, gen_pair, SyntheticSpec};
use vmin_core::transfer::{TargetMode, TrainConfig, PAPER_EPOCHS};

/// Grouped-feature V_min regression with base-to-target transfer.
#[derive(Parser)]
#[command(name = "vmin", version)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the paired synthetic base/target datasets.
    Synth {
        /// JSON generator spec; the built-in default when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a network on a base-node dataset.
    Pretrain {
        #[arg(long)]
        manifest: PathBuf,
        /// Checkpoint to write.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Transplant a base checkpoint's hidden block and fine-tune on a target dataset.
    Transfer {
        /// Base checkpoint.
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Fit per-pattern CFS + linear or boosted-tree baselines.
    Baseline {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value_t = ModelArg::Linear)]
        model: ModelArg,
        /// Features kept per pattern by correlation selection.
        #[arg(long, default_value_t = vmin_core::baselines::DEFAULT_CFS_K)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Held-out RMSE of a checkpoint or baseline model.
    Evaluate {
        /// Network checkpoint or baseline model file.
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.25)]
        train_fraction: f64,
        /// Optional JSON result file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seed-averaged comparison of every arm on a target dataset.
    Ablate {
        /// Base checkpoint.
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seeds: Vec<u64>,
        /// JSON report; the table goes next to it with a `.txt` extension.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Linear,
    Gbt,
}

#[derive(Clone, Copy, ValueEnum)]
enum FreezeArg {
    Hidden,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetModeArg {
    Multi,
    Average,
}

#[derive(Clone, Copy, ValueEnum)]
enum FeaturesArg {
    Post,
    #[value(name = "post+odo")]
    PostOdo,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormScopeArg {
    Train,
    All,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Share of rows used for training [default: 0.75 for pretrain, 0.25 otherwise].
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    epochs: usize,
    /// Use the long 100k-epoch budget.
    #[arg(long, conflicts_with = "epochs")]
    paper_epochs: bool,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    /// Weight of the L2 pull of hidden parameters toward the base values.
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, value_enum, default_value_t = FreezeArg::Hidden)]
    freeze: FreezeArg,
    /// Stop after this many epochs without a better training loss.
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long, value_enum, default_value_t = TargetModeArg::Multi)]
    target_mode: TargetModeArg,
    #[arg(long, value_enum, default_value_t = FeaturesArg::PostOdo)]
    features: FeaturesArg,
    #[arg(long, value_enum, default_value_t = NormScopeArg::Train)]
    norm_scope: NormScopeArg,
}

impl RunArgs {
    fn config(&self, default_fraction: f64) -> RunConfig {
        let freeze = match self.freeze {
            FreezeArg::Hidden => [Block::Hidden].into(),
            FreezeArg::None => Default::default(),
        };
        RunConfig {
            train: TrainConfig {
                lr: self.lr,
                batch_size: self.batch_size,
                epochs: if self.paper_epochs { PAPER_EPOCHS } else { self.epochs },
                seed: self.seed,
                lambda: self.lambda,
                freeze,
                patience: self.patience,
            },
            train_fraction: self.train_fraction.unwrap_or(default_fraction),
            target_mode: match self.target_mode {
                TargetModeArg::Multi => TargetMode::Multi,
                TargetModeArg::Average => TargetMode::Average,
            },
            features: match self.features {
                FeaturesArg::Post => FeatureSet::Post,
                FeaturesArg::PostOdo => FeatureSet::PostOdo,
            },
            norm_scope: match self.norm_scope {
                NormScopeArg::Train => NormScope::Train,
                NormScopeArg::All => NormScope::All,
            },
            ..RunConfig::default()
        }
    }
}

fn print_result(r: &ExperimentResult) {
    println!(
        "{} seed={} train_fraction={} test RMSE {:.4} mV ({:.1}s)",
        r.arm, r.seed, r.train_fraction, r.rmse_mv, r.runtime_secs
    );
}

fn print_report(report: &CommandReport) {
    if let Some(t) = &report.training {
        println!(
            "{}: {} epochs, train loss {:.6} -> {:.6}",
            report.command,
            t.epochs.len(),
            t.initial_train_loss,
            t.final_train_loss()
        );
    }
    if !report.frozen.is_empty() {
        let names: Vec<&str> = report.frozen.iter().map(|b| b.name()).collect();
        println!("frozen: {}", names.join(", "));
    }
    if let Some(r) = &report.result {
        print_result(r);
    }
}

fn run(cli: Cli) -> vmin_core::Result<()> {
    match cli.command {
        Command::Synth { spec, out } => {
            let (base, target, summary) = match spec {
                Some(path) => cmd_synth(&path, &out)?,
                None => {
                    let spec = SyntheticSpec::default();
                    let (b, t) = gen_pair(&spec, &out)?;
                    (b, t, describe(&spec))
                }
            };
            print!("{summary}");
            println!("base manifest: {}", base.display());
            println!("target manifest: {}", target.display());
        }
        Command::Pretrain { manifest, out, run } => {
            print_report(&cmd_pretrain(&manifest, &run.config(0.75), &out)?);
        }
        Command::Transfer {
            ckpt,
            manifest,
            out,
            run,
        } => {
            print_report(&cmd_transfer(&ckpt, &manifest, &run.config(0.25), &out)?);
        }
        Command::Baseline {
            manifest,
            model,
            k,
            out,
            run,
        } => {
            let kind = match model {
                ModelArg::Linear => BaselineKind::Linear,
                ModelArg::Gbt => BaselineKind::Gbt,
            };
            let mut cfg = run.config(0.25);
            cfg.cfs_k = k;
            print_report(&cmd_baseline(&manifest, kind, &cfg, &out)?);
        }
        Command::Evaluate {
            ckpt,
            manifest,
            seed,
            train_fraction,
            out,
        } => {
            let r = cmd_evaluate(&ckpt, &manifest, seed, train_fraction)?;
            if let Some(out) = out {
                write_result(&out, &r)?;
            }
            print_result(&r);
        }
        Command::Ablate {
            ckpt,
            manifest,
            seeds,
            out,
            run,
        } => {
            let report = cmd_ablate(&ckpt, &manifest, &seeds, &run.config(0.25), &out)?;
            print!("{}", format_table(&report.summary));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
