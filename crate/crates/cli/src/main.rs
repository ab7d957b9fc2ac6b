use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use uavwet::config::Variant;
use uavwet::harness::{parse_seeds, run_ablation, run_eval, run_train};
use uavwet::magrl::checkpoint;
use uavwet::{load_config, Error, Scenario, WorldConfig};

#[derive(Parser)]
#[command(name = "uavwet", version, about = "Train and evaluate multi-UAV wireless charging policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; omitted keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in scenario (train4x6, test2x3). Overrides a `[scenario]` section.
    #[arg(long)]
    scenario: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "runs/latest")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Train one variant and write metrics plus a checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Roll out a checkpoint deterministically and report per-seed outcomes.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Seed list: `7`, `1..10` or `1,3,5`.
        #[arg(long, default_value = "1..10")]
        seeds: String,
    },
    /// Train all four variants over a seed list and tabulate medians.
    Ablation {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "1..5")]
        seeds: String,
        #[arg(long)]
        episodes: Option<usize>,
    },
}

fn setup(common: &Common) -> Result<(WorldConfig, Scenario), Error> {
    let (cfg, from_file) = match &common.config {
        Some(p) => load_config(p)?,
        None => (WorldConfig::default(), None),
    };
    let scenario = match (&common.scenario, from_file) {
        (Some(name), _) => Scenario::builtin(name)?,
        (None, Some(s)) => s,
        (None, None) => Scenario::test2x3(),
    };
    Ok((cfg, scenario))
}

fn announce(out: &Path, what: &str) {
    eprintln!("{what} written to {}", out.display());
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train { common, variant, seed, episodes } => {
            let (mut cfg, scenario) = setup(&common)?;
            if let Some(v) = variant {
                cfg.train.variant = v;
            }
            let episodes = episodes.unwrap_or(cfg.train.episodes);
            eprintln!("training {} on {} for {episodes} episodes, seed {seed}", cfg.train.variant.name(), scenario.name);
            run_train(&cfg, &scenario, seed, episodes, &common.out, |m| {
                eprintln!(
                    "episode {:4}  r_ac {:10.4}  H_total {:6}  pen {}/{}  {:.1}s",
                    m.episode, m.r_ac, m.h_total, m.pen0, m.pen1, m.wall_time
                );
            })?;
            announce(&common.out, "metrics and checkpoint");
        }
        Command::Eval { common, checkpoint: path, seeds } => {
            let (cfg, scenario) = setup(&common)?;
            let seeds = parse_seeds(&seeds)?;
            let model = checkpoint::load(&path)?;
            let reports = run_eval(&model, &cfg, &scenario, &seeds, &common.out)?;
            for r in &reports {
                println!(
                    "seed {:3}  success {:5}  H_total {:6}  devices {:?}  UAV residual {:?}",
                    r.seed,
                    r.success(),
                    r.h_total,
                    r.device_final.iter().map(|b| format!("{:.2} mW·s", b * 1e3)).collect::<Vec<_>>(),
                    r.uav_residual.iter().map(|b| format!("{b:.1} W·s")).collect::<Vec<_>>(),
                );
            }
            let ok = reports.iter().filter(|r| r.success()).count();
            println!("{ok}/{} seeds succeeded", reports.len());
            announce(&common.out, "evaluation report and trajectories");
        }
        Command::Ablation { common, seeds, episodes } => {
            let (cfg, scenario) = setup(&common)?;
            let seeds = parse_seeds(&seeds)?;
            let episodes = episodes.unwrap_or(cfg.train.episodes);
            let (_, summary) = run_ablation(&cfg, &scenario, &seeds, episodes, &common.out, |v, s, m| {
                if (m.episode + 1) % 10 == 0 {
                    eprintln!("{} seed {s} episode {}  r_ac {:.4}  H_total {}", v.name(), m.episode, m.r_ac, m.h_total);
                }
            })?;
            println!("{:<12} {:>12} {:>14}", "variant", "median r_ac", "median H_total");
            for s in &summary {
                println!("{:<12} {:>12.4} {:>14}", s.variant, s.median_r_ac, s.median_h_total);
            }
            announce(&common.out, "ablation tables");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Diverged(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
