//! Training and test drivers plus their CSV outputs.
//!
//! Training CSV columns: `controller,episode,total_reward,throughput_mbps,energy_j,loss_pct,epsilon,terminal,steps`.
//!
//! Test CSV columns: `controller,arrival_rate,distance,jammers,episodes,throughput_mbps,energy_j,loss_pct`,
//! one row per sweep point, each value the mean over the point's episodes.
//!
//! Plot files are long-format CSV: `series,x,y`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{debug, info};
use rayon::prelude::*;
use serde::Serialize;

use crate::agents::{MinstrelState, QTable, SarsaAgent};
use crate::config::{AgentKind, ExperimentConfig};
use crate::env::{
    throughput_mbps, ControlAction, EpisodeMode, EpisodeTotals, LinkEnv, StateObservation, Terminal, ACTION_COUNT,
};
use crate::error::HarnessError;
use crate::link::{FixedController, RateController};

pub const TRAIN_HEADER: [&str; 9] =
    ["controller", "episode", "total_reward", "throughput_mbps", "energy_j", "loss_pct", "epsilon", "terminal", "steps"];
pub const TEST_HEADER: [&str; 8] =
    ["controller", "arrival_rate", "distance", "jammers", "episodes", "throughput_mbps", "energy_j", "loss_pct"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub total_reward: f64,
    pub throughput_mbps: f64,
    pub energy_j: f64,
    pub loss_pct: f64,
    /// Exploration probability at the end of the episode.
    pub epsilon: f64,
    pub terminal: Terminal,
    /// Ended by the time limit rather than a terminal state.
    pub truncated: bool,
    pub steps: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub records: Vec<EpisodeRecord>,
    pub table: QTable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestRow {
    pub controller: String,
    pub arrival_rate: f64,
    pub distance: f64,
    pub jammers: usize,
    pub episodes: usize,
    pub throughput_mbps: f64,
    pub energy_j: f64,
    pub loss_pct: f64,
}

/// Seed of the simulator for training episode `episode`.
pub fn train_episode_seed(seed: u64, episode: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(episode as u64)
}

fn cycle<T: Copy>(list: &[T], i: usize) -> T {
    list[i % list.len()]
}

fn episode_throughput(t: &EpisodeTotals, payload: u32) -> f64 {
    let secs = t.elapsed_s();
    if secs > 0.0 {
        throughput_mbps(t.delivered, payload, secs)
    } else {
        0.0
    }
}

/// Runs the SARSA training loop: per episode, reset the link, pick `a` from
/// `s`, then step, choose `a'`, back up `Q(s, a)` and decay ε each step
/// until a terminal state or the time limit. Distances, rates and jammer
/// counts listed in the config are cycled one per episode.
pub fn train(cfg: &ExperimentConfig) -> Result<TrainOutcome, HarnessError> {
    if cfg.agent != AgentKind::Sarsa {
        return Err(HarnessError::Invalid("training requires agent.kind = \"sarsa\"".into()));
    }
    let mut agent = SarsaAgent::new(cfg.sarsa, cfg.seed);
    let mut records = Vec::with_capacity(cfg.episodes);
    for episode in 0..cfg.episodes {
        let link = cfg.link_for(
            cycle(&cfg.arrival_rates, episode),
            cycle(&cfg.distances, episode),
            cycle(&cfg.jammer_counts, episode),
        );
        let payload = link.payload_bytes;
        let seed = train_episode_seed(cfg.seed, episode);
        let mut env = LinkEnv::new(link, cfg.env_params(EpisodeMode::Training), seed);
        let mut s = env.reset(seed);
        let mut a = agent.act(&s);
        let last = loop {
            let step = env.step(a)?;
            if step.terminal != Terminal::None {
                agent.learn(&s, a, step.reward, None);
                agent.decay();
                break step;
            }
            let next_a = agent.act(&step.next_state);
            agent.learn(&s, a, step.reward, Some((&step.next_state, next_a)));
            agent.decay();
            if step.truncated {
                break step;
            }
            s = step.next_state;
            a = next_a;
        };
        let t = env.totals();
        let rec = EpisodeRecord {
            episode,
            total_reward: t.reward,
            throughput_mbps: episode_throughput(t, payload),
            energy_j: t.energy_j,
            loss_pct: 100.0 * t.loss_fraction(),
            epsilon: agent.epsilon(),
            terminal: last.terminal,
            truncated: last.truncated,
            steps: t.steps,
        };
        debug!(
            "episode {episode}: reward {:.3} thr {:.1} Mbps terminal {}",
            rec.total_reward,
            rec.throughput_mbps,
            rec.terminal.label()
        );
        if (episode + 1) % 100 == 0 {
            info!("trained {} / {} episodes, epsilon {:.4}", episode + 1, cfg.episodes, agent.epsilon());
        }
        records.push(rec);
    }
    Ok(TrainOutcome { records, table: agent.into_table() })
}

/// One evaluation episode without terminal states: runs to the time limit
/// or until the battery is fully drained.
pub fn evaluate_episode(
    cfg: &ExperimentConfig,
    table: Option<&QTable>,
    arrival_rate: f64,
    distance: f64,
    jammers: usize,
    seed: u64,
) -> Result<EpisodeTotals, HarnessError> {
    let link = cfg.link_for(arrival_rate, distance, jammers);
    let mut env = LinkEnv::new(link, cfg.env_params(EpisodeMode::Evaluation), seed);
    let mut s = env.reset(seed);
    match cfg.agent {
        AgentKind::Sarsa => {
            let table = table.ok_or_else(|| HarnessError::Invalid("sarsa evaluation needs a q-table".into()))?;
            loop {
                let a = greedy_action(table, &s);
                let step = env.step(a)?;
                s = step.next_state;
                if step.done() {
                    break;
                }
            }
        }
        AgentKind::Minstrel => {
            let mut m = MinstrelState::new(cfg.minstrel, env.sim().mcs_table(), seed);
            run_controller(&mut env, &mut m)?;
        }
        AgentKind::Fixed => run_controller(&mut env, &mut FixedController(cfg.fixed))?,
    }
    Ok(*env.totals())
}

fn greedy_action(table: &QTable, s: &StateObservation) -> ControlAction {
    let a = table.best_action(s.index(), ACTION_COUNT);
    ControlAction::from_index(a as usize).expect("action in range")
}

fn run_controller(env: &mut LinkEnv, ctrl: &mut dyn RateController) -> Result<(), HarnessError> {
    loop {
        if env.step_with(ctrl)?.done() {
            return Ok(());
        }
    }
}

/// Sweep points in row order: arrival rate, then distance, then jammer count.
pub fn sweep_points(cfg: &ExperimentConfig) -> Vec<(f64, f64, usize)> {
    let mut pts = Vec::new();
    for &r in &cfg.arrival_rates {
        for &d in &cfg.distances {
            for &j in &cfg.jammer_counts {
                pts.push((r, d, j));
            }
        }
    }
    pts
}

/// Runs every sweep point for `cfg.test_episodes` episodes with ε = 0 and no
/// learning, in parallel, and averages throughput, energy and loss.
pub fn test(cfg: &ExperimentConfig, table: Option<&QTable>) -> Result<Vec<TestRow>, HarnessError> {
    let points = sweep_points(cfg);
    let n = cfg.test_episodes;
    let jobs: Vec<(usize, usize)> = (0..points.len()).flat_map(|p| (0..n).map(move |k| (p, k))).collect();
    let results: Vec<EpisodeTotals> = jobs
        .par_iter()
        .map(|&(p, k)| {
            let (r, d, j) = points[p];
            let seed = cfg.seed.wrapping_add((p * n + k) as u64);
            evaluate_episode(cfg, table, r, d, j, seed)
        })
        .collect::<Result<_, _>>()?;

    let label = cfg.controller_label();
    let rows = points
        .iter()
        .enumerate()
        .map(|(p, &(r, d, j))| {
            let eps = &results[p * n..(p + 1) * n];
            let mean = |f: &dyn Fn(&EpisodeTotals) -> f64| eps.iter().map(f).sum::<f64>() / n as f64;
            TestRow {
                controller: label.clone(),
                arrival_rate: r,
                distance: d,
                jammers: j,
                episodes: n,
                throughput_mbps: mean(&|t| episode_throughput(t, cfg.link.payload_bytes)),
                energy_j: mean(&|t| t.energy_j),
                loss_pct: mean(&|t| 100.0 * t.loss_fraction()),
            }
        })
        .collect();
    Ok(rows)
}

/// Formats with six significant digits, no exponent, trailing zeros trimmed.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x.is_infinite() { format!("{x}") } else { "0".into() };
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (5 - mag).max(0) as usize;
    let rounded = if mag > 5 {
        let unit = 10f64.powi(mag - 5);
        (x / unit).round() * unit
    } else {
        x
    };
    let s = format!("{rounded:.decimals$}");
    let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn out_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Output { path: path.to_path_buf(), msg: e.to_string() }
}

fn in_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Input { path: path.to_path_buf(), msg: e.to_string() }
}

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| out_err(path, e))?;
    w.write_record(header).map_err(|e| out_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| out_err(path, e))?;
    }
    w.flush().map_err(|e| out_err(path, e))
}

pub fn write_training_csv(path: &Path, controller: &str, records: &[EpisodeRecord]) -> Result<(), HarnessError> {
    write_rows(
        path,
        &TRAIN_HEADER,
        records.iter().map(|r| {
            vec![
                controller.to_string(),
                r.episode.to_string(),
                fmt_num(r.total_reward),
                fmt_num(r.throughput_mbps),
                fmt_num(r.energy_j),
                fmt_num(r.loss_pct),
                fmt_num(r.epsilon),
                if r.truncated { "time".to_string() } else { r.terminal.label().to_string() },
                r.steps.to_string(),
            ]
        }),
    )
}

pub fn write_test_csv(path: &Path, rows: &[TestRow]) -> Result<(), HarnessError> {
    write_rows(
        path,
        &TEST_HEADER,
        rows.iter().map(|r| {
            vec![
                r.controller.clone(),
                fmt_num(r.arrival_rate),
                fmt_num(r.distance),
                r.jammers.to_string(),
                r.episodes.to_string(),
                fmt_num(r.throughput_mbps),
                fmt_num(r.energy_j),
                fmt_num(r.loss_pct),
            ]
        }),
    )
}

/// Where a training run wrote its files.
#[derive(Debug, Clone)]
pub struct TrainFiles {
    pub qtable: PathBuf,
    pub csv: PathBuf,
    pub episodes: usize,
}

/// Trains and writes the Q-table and per-episode CSV. Explicit paths win
/// over the config's `output.*` keys.
pub fn run_train(
    cfg: &ExperimentConfig,
    qtable: Option<&Path>,
    csv_path: Option<&Path>,
) -> Result<TrainFiles, HarnessError> {
    let qtable = resolve(qtable, cfg.qtable_path.as_deref(), "qtable")?;
    let csv_path = resolve(csv_path, cfg.csv_path.as_deref(), "csv")?;
    check_parent(&qtable)?;
    check_parent(&csv_path)?;
    let out = train(cfg)?;
    out.table.save(&qtable)?;
    write_training_csv(&csv_path, &cfg.controller_label(), &out.records)?;
    Ok(TrainFiles { qtable, csv: csv_path, episodes: out.records.len() })
}

/// Runs the test sweep and writes the results CSV. The Q-table is only read.
pub fn run_test(cfg: &ExperimentConfig, qtable: Option<&Path>, csv_path: Option<&Path>) -> Result<usize, HarnessError> {
    let csv_path = resolve(csv_path, cfg.csv_path.as_deref(), "csv")?;
    check_parent(&csv_path)?;
    let table = match cfg.agent {
        AgentKind::Sarsa => {
            let path = qtable
                .or(cfg.qtable_path.as_deref())
                .ok_or_else(|| HarnessError::Invalid("sarsa test needs a q-table path".into()))?;
            Some(QTable::load(path)?)
        }
        _ => None,
    };
    let rows = test(cfg, table.as_ref())?;
    write_test_csv(&csv_path, &rows)?;
    Ok(rows.len())
}

fn resolve(explicit: Option<&Path>, from_cfg: Option<&Path>, what: &str) -> Result<PathBuf, HarnessError> {
    explicit
        .or(from_cfg)
        .map(Path::to_path_buf)
        .ok_or_else(|| HarnessError::Invalid(format!("no {what} output path given")))
}

fn check_parent(path: &Path) -> Result<(), HarnessError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            Err(out_err(path, format!("directory {} does not exist", dir.display())))
        }
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    RewardVsEpisode,
    ThroughputVsEpisode,
    ThroughputVsRate,
    EnergyVsRate,
}

impl Figure {
    pub fn parse(id: &str) -> Result<Self, HarnessError> {
        Ok(match id {
            "reward-vs-episode" => Figure::RewardVsEpisode,
            "throughput-vs-episode" => Figure::ThroughputVsEpisode,
            "throughput-vs-rate" | "throughput-vs-arrival-rate" => Figure::ThroughputVsRate,
            "energy-vs-rate" | "energy-vs-arrival-rate" => Figure::EnergyVsRate,
            other => return Err(HarnessError::UnknownFigure(other.to_string())),
        })
    }

    fn columns(self) -> (&'static str, &'static str) {
        match self {
            Figure::RewardVsEpisode => ("episode", "total_reward"),
            Figure::ThroughputVsEpisode => ("episode", "throughput_mbps"),
            Figure::ThroughputVsRate => ("arrival_rate", "throughput_mbps"),
            Figure::EnergyVsRate => ("arrival_rate", "energy_j"),
        }
    }
}

/// One plotted line.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Reshapes result CSVs into one x/y series per controller (and, for test
/// results, per distance and jammer count), ordered by first appearance.
pub fn plot_series(csvs: &[PathBuf], figure: Figure) -> Result<Vec<Series>, HarnessError> {
    let (x_col, y_col) = figure.columns();
    let mut order: Vec<String> = Vec::new();
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for path in csvs {
        let mut r = csv::Reader::from_path(path).map_err(|e| in_err(path, e))?;
        let headers = r.headers().map_err(|e| in_err(path, e))?.clone();
        let col = |name: &str| {
            headers.iter().position(|h| h == name).ok_or_else(|| in_err(path, format!("missing column `{name}`")))
        };
        let (xi, yi, ci) = (col(x_col)?, col(y_col)?, col("controller")?);
        let key_cols = match figure {
            Figure::ThroughputVsRate | Figure::EnergyVsRate => Some((col("distance")?, col("jammers")?)),
            _ => None,
        };
        for rec in r.records() {
            let rec = rec.map_err(|e| in_err(path, e))?;
            let num = |i: usize| {
                rec[i].parse::<f64>().map_err(|_| in_err(path, format!("non-numeric value `{}`", &rec[i])))
            };
            let name = match key_cols {
                Some((d, j)) => format!("{} d={}m j={}", &rec[ci], &rec[d], &rec[j]),
                None => rec[ci].to_string(),
            };
            let point = (num(xi)?, num(yi)?);
            if !series.contains_key(&name) {
                order.push(name.clone());
            }
            series.entry(name).or_default().push(point);
        }
    }
    if order.is_empty() {
        return Err(HarnessError::NoData);
    }
    Ok(order
        .into_iter()
        .map(|name| {
            let mut points = series.remove(&name).unwrap_or_default();
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series { name, points }
        })
        .collect())
}

pub fn emit_plotdata(csvs: &[PathBuf], figure_id: &str, out: &Path) -> Result<Vec<Series>, HarnessError> {
    let figure = Figure::parse(figure_id)?;
    let series = plot_series(csvs, figure)?;
    let file = std::fs::File::create(out).map_err(|e| out_err(out, e))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "series,x,y").map_err(|e| out_err(out, e))?;
    for s in &series {
        for &(x, y) in &s.points {
            writeln!(w, "\"{}\",{},{}", s.name.replace('"', "\"\""), fmt_num(x), fmt_num(y)).map_err(|e| out_err(out, e))?;
        }
    }
    w.flush().map_err(|e| out_err(out, e))?;
    Ok(series)
}
