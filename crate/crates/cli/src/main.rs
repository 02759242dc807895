use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use fedaia::experiments::props::{self, Suite};
use fedaia::experiments::reproduce::{self, Fig2Config};
use fedaia::experiments::{
    attack_from_logs, format_table, run_experiment, train_only, write_artifacts, ExperimentConfig, ExperimentOutput,
    Method, ModelSpec,
};
use fedaia::federated::DefenseConfig;

#[derive(Parser)]
#[command(name = "fedaia", version, about = "Federated regression attack workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run federated training and write the message logs of the attacked clients.
    Train(RunArgs),
    /// Run the attacks. With --logs, passive attacks are replayed from
    /// saved logs; otherwise training runs in memory and active attacks
    /// are included.
    Attack {
        #[command(flatten)]
        run: RunArgs,
        /// Directory written by `train`.
        #[arg(long)]
        logs: Option<PathBuf>,
    },
    #[command(subcommand)]
    Reproduce(Reproduce),
    #[command(subcommand)]
    Verify(Verify),
}

#[derive(Subcommand)]
enum Reproduce {
    /// Every attack on the two-client toy task.
    ToyLinear(RunArgs),
    /// Reconstruction error and attack accuracy against batch size.
    Fig2 {
        #[arg(long, value_delimiter = ',')]
        batch_sizes: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Attack accuracy across heterogeneity levels of a CSV split. Without
    /// --config a synthetic census-like table is generated.
    HeteroSweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
        /// Rows of the synthetic table.
        #[arg(long, default_value_t = 4000)]
        rows: usize,
    },
}

#[derive(Subcommand)]
enum Verify {
    /// Property suites; the exit code is 0 only if every check passes.
    Props {
        #[arg(long = "suite", value_enum)]
        suites: Vec<SuiteArg>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the reports as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    AccuracyBound,
    Exactness,
    HardInstance,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::AccuracyBound => Suite::AccuracyBound,
            SuiteArg::Exactness => Suite::Exactness,
            SuiteArg::HardInstance => Suite::HardInstance,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Linear,
    Mlp,
}

/// Flags mirror configuration fields and override the file.
#[derive(Args, Clone, Default)]
struct RunArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    local_epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    #[arg(long)]
    hidden: Option<usize>,
    /// Per-sample clipping norm; enables DP-SGD.
    #[arg(long)]
    clip_norm: Option<f64>,
    /// Noise multiplier for DP-SGD.
    #[arg(long)]
    dp_noise: Option<f64>,
    #[arg(long)]
    target: Option<usize>,
    /// Comma-separated: Grad, Grad-w-O, Ours-passive, Ours-active, Model-w-O.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    active_rounds: Option<Vec<usize>>,
    #[arg(long)]
    active_start: Option<usize>,
    /// Write zero wall-clock times so reports are byte-stable.
    #[arg(long)]
    no_timing: bool,
}

fn parse_method(s: &str) -> Result<Method> {
    Method::ALL
        .into_iter()
        .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
        .with_context(|| format!("unknown method `{s}`"))
}

impl RunArgs {
    fn resolve(&self, default: impl FnOnce() -> ExperimentConfig) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => default(),
        };
        if let Some(v) = &self.name {
            cfg.name = v.clone();
        }
        if let Some(v) = &self.seeds {
            cfg.seeds = v.clone();
        }
        if let Some(v) = &self.out {
            cfg.output_dir = Some(v.clone());
        }
        if let Some(v) = self.rounds {
            cfg.fl.rounds = v;
        }
        if let Some(v) = self.local_epochs {
            cfg.fl.local_epochs = v;
        }
        if let Some(v) = self.batch_size {
            cfg.fl.batch_size = v;
        }
        if let Some(v) = self.lr {
            cfg.fl.learning_rate = v;
        }
        match (self.model, self.hidden) {
            (Some(ModelArg::Linear), _) => cfg.model = ModelSpec::Linear,
            (Some(ModelArg::Mlp), h) => cfg.model = ModelSpec::Mlp { hidden: h.unwrap_or(128) },
            (None, Some(h)) => match &mut cfg.model {
                ModelSpec::Mlp { hidden } => *hidden = h,
                ModelSpec::Linear => bail!("--hidden only applies to --model mlp"),
            },
            (None, None) => {}
        }
        if self.clip_norm.is_some() || self.dp_noise.is_some() {
            let (clip, noise) = match cfg.defense {
                DefenseConfig::DpSgd { clip_norm, noise_std } => (clip_norm, noise_std),
                DefenseConfig::None => (f64::INFINITY, 0.0),
            };
            cfg.defense = DefenseConfig::DpSgd {
                clip_norm: self.clip_norm.unwrap_or(clip),
                noise_std: self.dp_noise.unwrap_or(noise),
            };
        }
        if let Some(v) = self.target {
            cfg.attack.target = Some(v);
        }
        if let Some(v) = &self.methods {
            cfg.attack.methods = v.iter().map(|s| parse_method(s)).collect::<Result<_>>()?;
        }
        if let Some(v) = &self.active_rounds {
            cfg.attack.active_rounds = v.clone();
        }
        if let Some(v) = self.active_start {
            cfg.attack.active_start = Some(v);
        }
        if self.no_timing {
            cfg.record_timing = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("runs").join(&cfg.name))
}

fn finish(cfg: &ExperimentConfig, out: &ExperimentOutput) -> Result<()> {
    let dir = output_dir(cfg);
    write_artifacts(cfg, out, &dir)?;
    print!("{}", format_table(&out.rows));
    println!("results written to {}", dir.display());
    Ok(())
}

fn default_config() -> ExperimentConfig {
    reproduce::toy_linear_config()
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Train(args) => {
            let cfg = args.resolve(default_config)?;
            let dir = output_dir(&cfg);
            let written = train_only(&cfg, &dir)?;
            println!("wrote {} message logs under {}", written.len(), dir.display());
        }
        Command::Attack { run, logs } => {
            let cfg = run.resolve(default_config)?;
            let out = match &logs {
                Some(dir) => attack_from_logs(&cfg, dir)?,
                None => run_experiment(&cfg)?,
            };
            finish(&cfg, &out)?;
        }
        Command::Reproduce(Reproduce::ToyLinear(args)) => {
            let cfg = args.resolve(reproduce::toy_linear_config)?;
            let out = reproduce::toy_linear(&cfg)?;
            finish(&cfg, &out)?;
        }
        Command::Reproduce(Reproduce::Fig2 { batch_sizes, seeds, rounds, lr, out }) => {
            let mut cfg = Fig2Config::default();
            if let Some(v) = batch_sizes {
                cfg.batch_sizes = v;
            }
            if let Some(v) = seeds {
                cfg.seeds = v;
            }
            if let Some(v) = rounds {
                cfg.rounds = v;
            }
            if let Some(v) = lr {
                cfg.learning_rate = v;
            }
            let points = reproduce::fig2(&cfg)?;
            let dir = out.unwrap_or_else(|| PathBuf::from("runs/fig2"));
            reproduce::write_fig2(&points, &dir)?;
            print!("{}", reproduce::fig2_summary_csv(&reproduce::fig2_summary(&points)));
            println!("series written to {}", dir.display());
        }
        Command::Reproduce(Reproduce::HeteroSweep { run, levels, rows }) => {
            let levels = levels.unwrap_or_else(|| reproduce::HETEROGENEITY_LEVELS.to_vec());
            let base = if run.config.is_some() {
                run.resolve(|| unreachable!("a config file was given"))?
            } else {
                let dir = run.out.clone().unwrap_or_else(|| PathBuf::from("runs/hetero"));
                let synthetic = reproduce::synthetic_hetero_config(&dir, rows)?;
                RunArgs { config: None, ..run }.resolve(|| synthetic)?
            };
            for out in reproduce::hetero_sweep(&base, &levels)? {
                let mut cfg = base.clone();
                cfg.name = out.rows.first().map_or_else(|| base.name.clone(), |r| r.scenario.clone());
                cfg.output_dir = Some(output_dir(&base).join(&cfg.name));
                finish(&cfg, &out)?;
            }
        }
        Command::Verify(Verify::Props { suites, seed, json }) => {
            let suites: Vec<Suite> = if suites.is_empty() {
                Suite::ALL.to_vec()
            } else {
                suites.into_iter().map(Suite::from).collect()
            };
            let reports = props::run_suites(&suites, seed)?;
            print!("{}", props::format_reports(&reports));
            if let Some(path) = json {
                write_json(&path, &reports)?;
            }
            if !reports.iter().all(|r| r.passed()) {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn write_json(path: &Path, reports: &[props::SuiteReport]) -> Result<()> {
    let text = serde_json::to_string_pretty(reports)?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
