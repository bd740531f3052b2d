use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use infogain::experiment::{self, selftest, ExperimentConfig, RunOptions};
use infogain::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "infogain",
    version,
    about = "Active landmark localization with learned and planned controllers"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Experiment TOML file.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set train.total_steps=50000`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    #[arg(long, global = true)]
    scenario: Option<String>,
    #[arg(long, global = true)]
    method: Option<String>,
    /// Run a single seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Upper bound on worker threads; 1 gives bit-reproducible output.
    #[arg(long, global = true, env = "INFOGAIN_WORKERS", default_value_t = 1)]
    workers: usize,
    #[arg(long, global = true, env = "INFOGAIN_OUT_DIR")]
    out_dir: Option<PathBuf>,
    /// Train for 1M environment steps.
    #[arg(long, global = true)]
    paper_scale: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one policy per seed.
    Train,
    /// Evaluate trained policies (or the random/iCR baselines) on the evaluation maps.
    Eval,
    /// Plan and evaluate the open-loop iCR baseline.
    Icr,
    /// Dump one episode for plotting.
    Trajectory {
        /// Episode seed; defaults to the first evaluation map.
        #[arg(long)]
        episode_seed: Option<u64>,
        /// Checkpoint to load instead of `<out-dir>/<scenario>_<method>_<seed>.ckpt`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Quick numerical self-checks.
    Selftest,
    /// Print the resolved configuration.
    ShowConfig,
}

impl Global {
    fn experiment(&self) -> Result<ExperimentConfig> {
        let mut base = toml::Table::new();
        if let Some(s) = &self.scenario {
            base.insert("scenario".into(), s.clone().into());
        }
        if let Some(m) = &self.method {
            base.insert("method".into(), m.clone().into());
        }
        if let Some(seed) = self.seed {
            let seed = i64::try_from(seed).map_err(|_| Error::Config(format!("seed {seed} is too large")))?;
            base.insert("seeds".into(), toml::Value::Array(vec![seed.into()]));
        }
        if let Some(dir) = &self.out_dir {
            base.insert("output_dir".into(), dir.display().to_string().into());
        }
        ExperimentConfig::load_with_overrides(self.config.as_deref(), base, &self.sets)
    }

    fn options(&self) -> Result<RunOptions> {
        if self.workers == 0 {
            return Err(Error::Config("--workers must be >= 1".into()));
        }
        Ok(RunOptions {
            workers: self.workers,
            paper_scale: self.paper_scale,
        })
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Command::Selftest = cli.command {
        let mut failed = 0;
        for c in selftest::run()? {
            println!("{} {} ({})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            failed += usize::from(!c.pass);
        }
        if failed > 0 {
            return Err(Error::Contract(format!("{failed} self-check(s) failed")));
        }
        return Ok(());
    }
    let cfg = cli.global.experiment()?;
    let opts = cli.global.options()?;
    match cli.command {
        Command::Train => {
            for r in experiment::cmd_train(&cfg, &opts)? {
                let last = r.curve.last();
                println!(
                    "seed {}: {} ({} eval points, final reward {})",
                    r.seed,
                    r.checkpoint.display(),
                    r.curve.len(),
                    last.map_or("n/a".to_string(), |c| format!("{:.3}", c.mean_eval_reward))
                );
            }
        }
        Command::Eval => println!("{}", experiment::cmd_eval(&cfg, &opts)?.row.to_text()),
        Command::Icr => println!("{}", experiment::cmd_baseline_icr(&cfg, &opts)?.row.to_text()),
        Command::Trajectory {
            episode_seed,
            checkpoint,
        } => {
            let seed = cfg.seeds[0];
            let ep = episode_seed.unwrap_or(cfg.eval_seed_base);
            let (path, _) = experiment::cmd_export_trajectory(&cfg, &opts, seed, ep, checkpoint.as_deref())?;
            println!("{}", path.display());
        }
        Command::ShowConfig => print!("{}", cfg.to_toml_string()?),
        Command::Selftest => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::from(2)
        }
    }
}
