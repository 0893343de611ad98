//! `dasis`: run surface-equalizer experiments from a TOML config.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dasis_core::experiment::{validate_config, Artifacts, Experiment, ExperimentConfig, RunMode};
use dasis_core::persist::load_surface;
use dasis_core::SnrDefinition;

#[derive(Parser, Debug)]
#[command(name = "dasis", version, about = "Delay-augmented stacked surface equalizer simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimize every surface, sweep every pipeline, write CSVs, surfaces and a plot script
    Run(Common),
    /// Check the config without running anything
    Validate(Common),
    /// Optimize the surface pipelines only and write their configurations
    Optimize(Common),
    /// Sweep an existing surface configuration
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Surface document written by `optimize` or `run`
        #[arg(long)]
        surface: PathBuf,
    },
    /// Sweep the digital pipelines only
    Baseline(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment config (TOML)
    #[arg(long)]
    config: PathBuf,

    /// Root seed, overriding the config
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory, overriding the config
    #[arg(long)]
    out_dir: Option<PathBuf>,

    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,

    /// SNR axis convention, overriding the config
    #[arg(long, value_name = "received|transmit")]
    snr_def: Option<SnrDefinition>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(dir) = &self.out_dir {
            cfg.output.dir = dir.clone();
        }
        if let Some(def) = self.snr_def {
            cfg.sweep.snr_definition = def;
        }
        Ok(cfg)
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.threads {
            if n == 0 {
                bail!("--threads must be at least 1");
            }
            builder = builder.num_threads(n);
        }
        builder.build().context("building worker pool")
    }
}

fn report(artifacts: &Artifacts, written: &[PathBuf], target_ber: f64) {
    for s in &artifacts.surfaces {
        let m = &s.metadata;
        let design = m.design_snr_db.map_or(String::new(), |d| format!(" design_snr_db={d}"));
        println!("surface {} loss={:.6}{design}", s.spec, m.loss);
    }
    for c in &artifacts.curves {
        match c.snr_at_ber(target_ber) {
            Some(snr) => println!("curve {} reaches BER {target_ber:e} at {snr:.2} dB", c.label),
            None => println!("curve {} does not reach BER {target_ber:e} on the grid", c.label),
        }
    }
    for p in written {
        println!("wrote {}", p.display());
    }
}

fn execute(common: &Common, mode: RunMode) -> Result<()> {
    let cfg = common.load()?;
    let exp = Experiment::new(cfg)?;
    let artifacts = common.pool()?.install(|| exp.run(mode))?;
    let out = &exp.config().output;
    let written = artifacts.write(&out.dir, out.plot_script)?;
    report(&artifacts, &written, exp.config().optimizer.target_ber);
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(c) => execute(&c, RunMode::All)?,
        Command::Optimize(c) => execute(&c, RunMode::Surfaces)?,
        Command::Baseline(c) => execute(&c, RunMode::Baselines)?,
        Command::Validate(c) => {
            let report = validate_config(&c.load()?);
            print!("{}", report.to_text());
            return Ok(report.passed());
        }
        Command::Sweep { common, surface } => {
            let exp = Experiment::new(common.load()?)?;
            let (config, _) = load_surface(&surface)?;
            let curve = common.pool()?.install(|| exp.sweep_surface(&config))?;
            let out = &exp.config().output;
            let artifacts = Artifacts {
                curves: vec![curve],
                surfaces: Vec::new(),
            };
            let written = artifacts.write(&out.dir, out.plot_script)?;
            report(&artifacts, &written, exp.config().optimizer.target_ber);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
