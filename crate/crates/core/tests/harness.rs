use std::fs;
use std::path::PathBuf;

use linkrl::agents::QTable;
use linkrl::config::ExperimentConfig;
use linkrl::harness::{self, TEST_HEADER, TRAIN_HEADER};
use linkrl::HarnessError;

fn cfg(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text).unwrap()
}

#[test]
fn zero_episodes_writes_header_and_empty_table() {
    let dir = tempfile::tempdir().unwrap();
    let (q, c) = (dir.path().join("q.bin"), dir.path().join("train.csv"));
    let files = harness::run_train(&cfg("scale = \"desk\"\nepisodes = 0"), Some(&q), Some(&c)).unwrap();
    assert_eq!(files.episodes, 0);
    assert_eq!(fs::read_to_string(&c).unwrap(), format!("{}\n", TRAIN_HEADER.join(",")));
    assert!(QTable::load(&q).unwrap().is_empty());
}

#[test]
fn training_is_deterministic_and_one_row_per_episode() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg("scale = \"desk\"\nepisodes = 12\nseed = 5");
    let run = |tag: &str| {
        let (q, csv) = (dir.path().join(format!("{tag}.bin")), dir.path().join(format!("{tag}.csv")));
        harness::run_train(&c, Some(&q), Some(&csv)).unwrap();
        (fs::read(q).unwrap(), fs::read_to_string(csv).unwrap())
    };
    let (qa, ca) = run("a");
    let (qb, cb) = run("b");
    assert_eq!(qa, qb);
    assert_eq!(ca, cb);
    assert_eq!(ca.lines().count(), 13);
}

#[test]
fn desk_training_improves_reward() {
    let c = cfg("scale = \"desk\"\nepisodes = 200\ntopology.distance = 10\nagent.epsilon_decay = 0.9998");
    let out = harness::train(&c).unwrap();
    let mean = |r: &[harness::EpisodeRecord]| r.iter().map(|e| e.total_reward).sum::<f64>() / r.len() as f64;
    let first = mean(&out.records[..20]);
    let last = mean(&out.records[180..]);
    assert!(last > first, "first {first} last {last}");
}

#[test]
fn training_rejects_non_sarsa_agents() {
    assert!(matches!(harness::train(&cfg("agent.kind = \"minstrel\"")), Err(HarnessError::Invalid(_))));
}

#[test]
fn test_sweep_rows_and_mcs0_bound() {
    let c = cfg(
        "mode = \"test\"\nscale = \"desk\"\nagent.kind = \"fixed\"\nagent.power_dbm = 10\nagent.mcs = 0\n\
         traffic.arrival_rate = [5000, 10000, 15000, 20000, 25000, 30000, 35000, 40000, 45000, 50000, 55000, 60000]\n\
         topology.distance = 10\ntopology.jammers = 0\ntest_episodes = 2\nchannel.fading = false",
    );
    let rows = harness::test(&c, None).unwrap();
    assert_eq!(rows.len(), 12);
    for r in &rows {
        assert!(r.throughput_mbps <= 58.5, "{r:?}");
        assert_eq!(r.controller, "fixed-10dBm-mcs0");
    }
    let last = rows.last().unwrap();
    assert!(last.throughput_mbps > 40.0);
}

#[test]
fn test_mode_reads_but_never_writes_qtable() {
    let dir = tempfile::tempdir().unwrap();
    let (q, c) = (dir.path().join("q.bin"), dir.path().join("train.csv"));
    harness::run_train(&cfg("scale = \"desk\"\nepisodes = 5"), Some(&q), Some(&c)).unwrap();
    let before = fs::read(&q).unwrap();
    let modified = fs::metadata(&q).unwrap().modified().unwrap();

    let t = cfg("mode = \"test\"\nscale = \"desk\"\ntraffic.arrival_rate = 3000\ntopology.distance = 10\ntopology.jammers = 1\ntest_episodes = 3");
    let out = dir.path().join("test.csv");
    let rows = harness::run_test(&t, Some(&q), Some(&out)).unwrap();
    assert_eq!(rows, 1);
    assert_eq!(fs::read(&q).unwrap(), before);
    assert_eq!(fs::metadata(&q).unwrap().modified().unwrap(), modified);

    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with(&TEST_HEADER.join(",")));
    let again = dir.path().join("again.csv");
    harness::run_test(&t, Some(&q), Some(&again)).unwrap();
    assert_eq!(text, fs::read_to_string(&again).unwrap());
}

#[test]
fn test_needs_an_existing_qtable() {
    let dir = tempfile::tempdir().unwrap();
    let t = cfg("mode = \"test\"\nscale = \"desk\"");
    let err = harness::run_test(&t, Some(&dir.path().join("missing.bin")), Some(&dir.path().join("o.csv")));
    assert!(matches!(err, Err(HarnessError::QTable(_))));
}

#[test]
fn unwritable_output_is_an_error() {
    let c = cfg("scale = \"desk\"\nepisodes = 1");
    let bad = PathBuf::from("/nonexistent-dir/x/q.bin");
    assert!(matches!(harness::run_train(&c, Some(&bad), Some(&bad)), Err(HarnessError::Output { .. })));
}

#[test]
fn plot_series_per_controller() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for (i, ctrl) in ["agent.kind = \"minstrel\"", "agent.kind = \"fixed\"\nagent.mcs = 3", "agent.kind = \"fixed\"\nagent.mcs = 5", "agent.kind = \"fixed\"\nagent.mcs = 1"]
        .iter()
        .enumerate()
    {
        let c = cfg(&format!(
            "mode = \"test\"\nscale = \"desk\"\n{ctrl}\ntraffic.arrival_rate = [1000, 2000]\ntopology.distance = 10\ntopology.jammers = 1\ntest_episodes = 1"
        ));
        let p = dir.path().join(format!("t{i}.csv"));
        harness::run_test(&c, None, Some(&p)).unwrap();
        csvs.push(p);
    }
    let out = dir.path().join("plot.csv");
    let series = harness::emit_plotdata(&csvs, "throughput-vs-rate", &out).unwrap();
    assert_eq!(series.len(), 4);
    assert!(series.iter().all(|s| s.points.len() == 2));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1 + 8);
    assert!(harness::emit_plotdata(&csvs, "energy-vs-rate", &out).is_ok());
}

#[test]
fn plot_training_series_matches_episode_count() {
    let dir = tempfile::tempdir().unwrap();
    let (q, c) = (dir.path().join("q.bin"), dir.path().join("train.csv"));
    harness::run_train(&cfg("scale = \"desk\"\nepisodes = 7"), Some(&q), Some(&c)).unwrap();
    let series = harness::emit_plotdata(&[c], "reward-vs-episode", &dir.path().join("p.csv")).unwrap();
    assert_eq!(series.len(), 1);
    assert_eq!(series[0].points.len(), 7);
}

#[test]
fn plot_errors() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, format!("{}\n", TEST_HEADER.join(","))).unwrap();
    let out = dir.path().join("p.csv");
    let err = harness::emit_plotdata(std::slice::from_ref(&empty), "throughput-vs-rate", &out).unwrap_err();
    assert!(matches!(err, HarnessError::NoData));
    assert_eq!(err.to_string(), "no data");
    assert!(matches!(harness::emit_plotdata(&[empty], "fig-7", &out), Err(HarnessError::UnknownFigure(_))));
}

#[test]
fn shipped_configs_parse() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 4);
}
