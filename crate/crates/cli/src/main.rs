use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use linkrl::config::{ExperimentConfig, Mode};
use linkrl::harness;

/// 802.11ac link simulator with a SARSA rate/power controller.
#[derive(Parser)]
#[command(name = "linkrl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a SARSA agent and write its Q-table and per-episode CSV.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_qtable: Option<PathBuf>,
        #[arg(long)]
        out_csv: Option<PathBuf>,
    },
    /// Evaluate a controller over the config's sweep grid.
    Test {
        #[arg(long)]
        config: PathBuf,
        /// Required for SARSA agents; never modified.
        #[arg(long)]
        qtable: Option<PathBuf>,
        #[arg(long)]
        out_csv: PathBuf,
    },
    /// Reshape result CSVs into x/y series for one figure.
    Plot {
        /// One or more training or test CSVs.
        #[arg(long, required = true, num_args = 1..)]
        csv: Vec<PathBuf>,
        /// reward-vs-episode, throughput-vs-episode, throughput-vs-rate or energy-vs-rate.
        #[arg(long)]
        figure: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("config {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, seed, out_qtable, out_csv } => {
            let mut cfg = load(&config)?;
            if cfg.mode != Mode::Train {
                bail!("config {} is not a training config (mode = test)", config.display());
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let files = harness::run_train(&cfg, out_qtable.as_deref(), out_csv.as_deref())?;
            info!(
                "trained {} episodes; q-table {}, csv {}",
                files.episodes,
                files.qtable.display(),
                files.csv.display()
            );
        }
        Command::Test { config, qtable, out_csv } => {
            let mut cfg = load(&config)?;
            cfg.mode = Mode::Test;
            let rows = harness::run_test(&cfg, qtable.as_deref(), Some(&out_csv))?;
            info!("wrote {rows} rows to {}", out_csv.display());
        }
        Command::Plot { csv, figure, out } => {
            let series = harness::emit_plotdata(&csv, &figure, &out)?;
            info!("wrote {} series to {}", series.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use std::fs;
    use std::path::Path;

    use super::*;

    fn cli(args: &[&str]) -> Result<()> {
        run(Cli::try_parse_from(std::iter::once("linkrl").chain(args.iter().copied()))?)
    }

    fn write(dir: &Path, name: &str, text: &str) -> String {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p.to_str().unwrap().to_owned()
    }

    fn s(p: &Path) -> String {
        p.to_str().unwrap().to_owned()
    }

    #[test]
    fn train_test_plot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let train = write(d, "train.toml", "scale = \"desk\"\nepisodes = 4\n");
        let test = write(
            d,
            "test.toml",
            "mode = \"test\"\nscale = \"desk\"\ntest_episodes = 2\ntraffic.arrival_rate = [2000, 4000]\n\
             topology.distance = 10\ntopology.jammers = 1\n",
        );
        let (q, tcsv, ecsv, pcsv) = (d.join("q.bin"), d.join("train.csv"), d.join("test.csv"), d.join("plot.csv"));

        cli(&["train", "--config", &train, "--seed", "3", "--out-qtable", &s(&q), "--out-csv", &s(&tcsv)]).unwrap();
        assert_eq!(fs::read_to_string(&tcsv).unwrap().lines().count(), 5);

        cli(&["test", "--config", &test, "--qtable", &s(&q), "--out-csv", &s(&ecsv)]).unwrap();
        assert_eq!(fs::read_to_string(&ecsv).unwrap().lines().count(), 3);

        cli(&["plot", "--csv", &s(&ecsv), "--figure", "throughput-vs-rate", "--out", &s(&pcsv)]).unwrap();
        assert!(fs::read_to_string(&pcsv).unwrap().starts_with("series,x,y"));
    }

    #[test]
    fn bad_inputs_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let bad = write(d, "bad.toml", "scale = \"desk\"\nno_such_key = 1\n");
        assert!(cli(&["train", "--config", &bad]).is_err());

        let test = write(d, "test.toml", "mode = \"test\"\nscale = \"desk\"\n");
        assert!(cli(&["train", "--config", &test]).is_err());
        let missing = s(&d.join("missing.bin"));
        assert!(cli(&["test", "--config", &test, "--qtable", &missing, "--out-csv", &s(&d.join("o.csv"))]).is_err());
        assert!(cli(&["plot", "--csv", &missing, "--figure", "nope", "--out", &s(&d.join("p.csv"))]).is_err());
        assert!(cli(&["plot", "--figure", "reward-vs-episode", "--out", "x"]).is_err());
    }
}
