use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use dgan_cli::commands::{self, CliError, ProbeArgs, ProbeKind, TrainArgs};
use dgan_cli::config::{resolve, ConfigFile};
use dgan_core::datagen::RingSpec;
use dgan_core::dgan::DganConfig;

#[derive(Parser)]
#[command(
    name = "dgan",
    about = "Discrepancy divergence tools: compute it, train against it, mix generators with it",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProbeKindArg {
    Decay,
    Continuity,
    Theorem1,
    Theorem4,
}

impl From<ProbeKindArg> for ProbeKind {
    fn from(k: ProbeKindArg) -> Self {
        match k {
            ProbeKindArg::Decay => ProbeKind::Decay,
            ProbeKindArg::Continuity => ProbeKind::Continuity,
            ProbeKindArg::Theorem1 => ProbeKind::Theorem1,
            ProbeKindArg::Theorem4 => ProbeKind::Theorem4,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Discrepancy between two CSV sample files (real, generated)
    Disc {
        real: PathBuf,
        generated: PathBuf,
        /// Enforce the unit-ball convention on every input row
        #[arg(long)]
        bounded: bool,
    },
    /// Train the toy generator/embedding pair against the ring mixture
    TrainDgan {
        /// Existing directory for checkpoints, trace, and samples
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        clip: Option<f64>,
        #[arg(long)]
        batch_real: Option<usize>,
        #[arg(long)]
        batch_gen: Option<usize>,
        #[arg(long)]
        critic_steps: Option<usize>,
        #[arg(long)]
        embed_dim: Option<usize>,
        #[arg(long)]
        ring_p: Option<usize>,
        #[arg(long)]
        ring_r: Option<f64>,
        #[arg(long)]
        ring_sigma: Option<f64>,
        /// Number of generated samples dumped after training
        #[arg(long)]
        sample_dump: Option<usize>,
        /// key=value file; explicit flags take precedence
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Learn ensemble mixture weights over generator sample files
    MixEdgan {
        real: PathBuf,
        #[arg(required = true)]
        generators: Vec<PathBuf>,
        #[arg(long)]
        iters: Option<usize>,
        /// Initial step size; defaults to 0.5 over the largest generator
        /// covariance norm
        #[arg(long)]
        eta0: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also report each single generator and the uniform average
        #[arg(long)]
        compare: bool,
        /// Existing directory to write weights.json into
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run a theorem probe and emit verdict plus plot data
    Probe {
        kind: ProbeKindArg,
        #[arg(long)]
        seed: Option<u64>,
        /// Existing directory for the plot-data CSV
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Comma-separated sample sizes (decay, theorem4)
        #[arg(long)]
        n_values: Option<String>,
        #[arg(long)]
        repeats: Option<usize>,
        /// Sample dimension (decay)
        #[arg(long)]
        dim: Option<usize>,
        /// Comma-separated perturbation sizes (continuity)
        #[arg(long)]
        epsilons: Option<String>,
        /// Hypothesis pairs per instance (theorem1)
        #[arg(long)]
        trials: Option<usize>,
        /// Random instances (theorem1)
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long)]
        grid_res: Option<f64>,
        /// Seeds to median over (theorem4)
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        ring_p: Option<usize>,
        #[arg(long)]
        ring_r: Option<f64>,
        #[arg(long)]
        ring_sigma: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Likelihood report between real and generated sample files
    Eval {
        real: PathBuf,
        generated: PathBuf,
        /// Any ring flag switches the truth density to the analytic mixture
        #[arg(long)]
        ring_p: Option<usize>,
        #[arg(long)]
        ring_r: Option<f64>,
        #[arg(long)]
        ring_sigma: Option<f64>,
    },
}

fn parse_list<T: std::str::FromStr>(raw: &str, what: &str) -> Result<Vec<T>, CliError> {
    raw.split(',')
        .map(|tok| tok.trim().parse::<T>())
        .collect::<Result<Vec<T>, _>>()
        .map_err(|_| CliError::Input(format!("cannot parse {what} list '{raw}'")))
}

fn load_config(path: &Option<PathBuf>) -> Result<ConfigFile, CliError> {
    match path {
        Some(p) => ConfigFile::load(p).map_err(CliError::Input),
        None => Ok(ConfigFile::empty()),
    }
}

fn ring_from(
    cfg: &ConfigFile,
    p: Option<usize>,
    r: Option<f64>,
    sigma: Option<f64>,
) -> Result<RingSpec, CliError> {
    let defaults = RingSpec::default();
    Ok(RingSpec::new(
        resolve(p, cfg, "ring-p", defaults.components)?,
        resolve(r, cfg, "ring-r", defaults.radius)?,
        resolve(sigma, cfg, "ring-sigma", defaults.sigma)?,
    )?)
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.cmd {
        Cmd::Disc {
            real,
            generated,
            bounded,
        } => {
            let doc = commands::cmd_disc(&real, &generated, bounded)?;
            Ok(serde_json::to_string(&doc).expect("doc serializes"))
        }
        Cmd::TrainDgan {
            out_dir,
            seed,
            eta,
            steps,
            clip,
            batch_real,
            batch_gen,
            critic_steps,
            embed_dim,
            ring_p,
            ring_r,
            ring_sigma,
            sample_dump,
            config,
        } => {
            let cfg = load_config(&config)?;
            let defaults = DganConfig::default();
            let args = TrainArgs {
                cfg: DganConfig {
                    batch_real: resolve(batch_real, &cfg, "batch-real", defaults.batch_real)?,
                    batch_gen: resolve(batch_gen, &cfg, "batch-gen", defaults.batch_gen)?,
                    eta: resolve(eta, &cfg, "eta", defaults.eta)?,
                    critic_steps: resolve(
                        critic_steps,
                        &cfg,
                        "critic-steps",
                        defaults.critic_steps,
                    )?,
                    clip: resolve(clip, &cfg, "clip", defaults.clip)?,
                    steps: resolve(steps, &cfg, "steps", defaults.steps)?,
                    embed_dim: resolve(embed_dim, &cfg, "embed-dim", defaults.embed_dim)?,
                    seed: resolve(seed, &cfg, "seed", defaults.seed)?,
                },
                ring: ring_from(&cfg, ring_p, ring_r, ring_sigma)?,
                out_dir,
                sample_dump: resolve(sample_dump, &cfg, "sample-dump", 1000)?,
            };
            let doc = commands::cmd_train_dgan(&args)?;
            Ok(serde_json::to_string(&doc).expect("doc serializes"))
        }
        Cmd::MixEdgan {
            real,
            generators,
            iters,
            eta0,
            seed,
            compare,
            out_dir,
            config,
        } => {
            let cfg = load_config(&config)?;
            let doc = commands::cmd_mix_edgan(
                &real,
                &generators,
                resolve(iters, &cfg, "iters", 3000)?,
                eta0.or(cfg.get::<f64>("eta0").map_err(CliError::Input)?),
                resolve(seed, &cfg, "seed", 1)?,
                compare,
                out_dir.as_deref(),
            )?;
            Ok(serde_json::to_string(&doc).expect("doc serializes"))
        }
        Cmd::Probe {
            kind,
            seed,
            out_dir,
            n_values,
            repeats,
            dim,
            epsilons,
            trials,
            instances,
            grid_res,
            seeds,
            ring_p,
            ring_r,
            ring_sigma,
            config,
        } => {
            let cfg = load_config(&config)?;
            let kind: ProbeKind = kind.into();
            let default_n = match kind {
                ProbeKind::Decay => "64,128,256,512,1024,2048,4096,8192",
                _ => "64,128,256,512,1024",
            };
            let n_raw = n_values
                .or(cfg.get::<String>("n-values").map_err(CliError::Input)?)
                .unwrap_or_else(|| default_n.to_string());
            let eps_raw = epsilons
                .or(cfg.get::<String>("epsilons").map_err(CliError::Input)?)
                .unwrap_or_else(|| "0.1,0.01,0.001,0.0001".to_string());
            let args = ProbeArgs {
                kind,
                seed: resolve(seed, &cfg, "seed", 1)?,
                out_dir,
                ring: ring_from(&cfg, ring_p, ring_r, ring_sigma)?,
                n_values: parse_list(&n_raw, "n-values")?,
                repeats: resolve(repeats, &cfg, "repeats", 10)?,
                dim: resolve(dim, &cfg, "dim", 1)?,
                epsilons: parse_list(&eps_raw, "epsilons")?,
                trials: resolve(trials, &cfg, "trials", 100)?,
                instances: resolve(instances, &cfg, "instances", 20)?,
                grid_res: resolve(grid_res, &cfg, "grid-res", 0.01)?,
                seeds: resolve(seeds, &cfg, "seeds", 10)?,
            };
            let doc = commands::cmd_probe(&args)?;
            Ok(serde_json::to_string(&doc).expect("doc serializes"))
        }
        Cmd::Eval {
            real,
            generated,
            ring_p,
            ring_r,
            ring_sigma,
        } => {
            let ring = if ring_p.is_some() || ring_r.is_some() || ring_sigma.is_some() {
                Some(ring_from(&ConfigFile::empty(), ring_p, ring_r, ring_sigma)?)
            } else {
                None
            };
            let doc = commands::cmd_eval(&real, &generated, ring.as_ref())?;
            Ok(serde_json::to_string(&doc).expect("doc serializes"))
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(json) => println!("{json}"),
        Err(e) => {
            eprintln!("error: {}", e.message());
            std::process::exit(e.exit_code());
        }
    }
}
