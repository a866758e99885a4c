//! End-to-end runs of the subcommands on the bundled fixtures.

use std::path::{Path, PathBuf};
use std::process::Command;

use realnav::cli::{
    cmd_align, cmd_eval, cmd_fixtures, cmd_gen_episodes, cmd_run, AlignArgs, EvalArgs, FixturesArgs,
    GenEpisodesArgs, RunArgs,
};
use realnav::geometry::wrap_angle;
use realnav::metrics::DEFAULT_BIN_EDGES;
use realnav::noise::NoiseLevel;
use realnav::retrieval::load_database;

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        cmd_fixtures(&FixturesArgs {
            out_dir: dir.path().to_path_buf(),
        })
        .unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn episodes(&self, n: usize, seed: u64) -> PathBuf {
        let out = self.path(&format!("episodes_{n}_{seed}.jsonl"));
        cmd_gen_episodes(&GenEpisodesArgs {
            map: self.path("demo.txt"),
            n,
            min_ratio: 1.1,
            seed,
            out: out.clone(),
        })
        .unwrap();
        out
    }

    fn run_args(&self, episodes: &Path, out: &str) -> RunArgs {
        RunArgs {
            map: Some(self.path("demo.txt")),
            db: Some(self.path("demo_db.jsonl")),
            episodes: Some(episodes.to_path_buf()),
            seed: Some(1),
            out: Some(self.path(out)),
            ..RunArgs::default()
        }
    }

    fn eval(&self, log: &str) -> realnav::metrics::MetricsReport {
        cmd_eval(&EvalArgs {
            log: self.path(log),
            out: None,
            json: Some(self.path(&format!("{log}.json"))),
            edges: DEFAULT_BIN_EDGES.to_vec(),
        })
        .unwrap()
    }
}

#[test]
fn demo_pipeline_with_oracle() {
    let ws = Workspace::new();
    let episodes = ws.episodes(100, 0);
    let summary = cmd_run(&ws.run_args(&episodes, "oracle.jsonl")).unwrap();
    assert!(summary.aborted.is_empty());
    let report = ws.eval("oracle.jsonl");
    assert_eq!(report.n, 100);
    assert!(report.success_rate >= 0.99, "success rate {}", report.success_rate);
    assert!(report.spl <= report.success_rate);
    let csv = std::fs::read_to_string(ws.path("oracle.jsonl.hist.csv")).unwrap();
    assert!(csv.lines().last().unwrap().contains("inf"));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(ws.path("oracle.jsonl.json")).unwrap()).unwrap();
    assert_eq!(json["n"], 100);
}

#[test]
fn large_noise_lowers_spl() {
    let ws = Workspace::new();
    let episodes = ws.episodes(60, 4);
    cmd_run(&ws.run_args(&episodes, "none.jsonl")).unwrap();
    let noisy = RunArgs {
        noise_sensor: Some(NoiseLevel::Large),
        noise_actuator: Some(NoiseLevel::Large),
        ..ws.run_args(&episodes, "large.jsonl")
    };
    cmd_run(&noisy).unwrap();
    let (none, large) = (ws.eval("none.jsonl"), ws.eval("large.jsonl"));
    assert!(large.spl < none.spl, "large {} vs none {}", large.spl, none.spl);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let ws = Workspace::new();
    let episodes = ws.episodes(10, 2);
    let cfg = ws.path("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "map = {:?}\nepisodes = {:?}\npolicy = \"random\"\nmax_steps = 7\nout = {:?}\n",
            ws.path("demo.txt"),
            episodes,
            ws.path("from_file.jsonl")
        ),
    )
    .unwrap();
    let from_file = cmd_run(&RunArgs {
        config: Some(cfg.clone()),
        ..RunArgs::default()
    })
    .unwrap();
    assert!(from_file.trajectories.iter().all(|t| t.steps.len() <= 7));
    let overridden = cmd_run(&RunArgs {
        config: Some(cfg.clone()),
        max_steps: Some(3),
        ..RunArgs::default()
    })
    .unwrap();
    assert!(overridden.trajectories.iter().all(|t| t.steps.len() <= 3));

    std::fs::write(&cfg, "map = \"x\"\nbogus = 1\n").unwrap();
    assert!(cmd_run(&RunArgs {
        config: Some(cfg),
        ..RunArgs::default()
    })
    .is_err());
}

#[test]
fn eval_rejects_an_empty_log() {
    let ws = Workspace::new();
    std::fs::write(ws.path("empty.jsonl"), "").unwrap();
    let err = cmd_eval(&EvalArgs {
        log: ws.path("empty.jsonl"),
        out: None,
        json: None,
        edges: DEFAULT_BIN_EDGES.to_vec(),
    })
    .unwrap_err();
    assert!(format!("{err:#}").contains("no episode"));
}

#[test]
fn gen_episodes_is_reproducible() {
    let ws = Workspace::new();
    let a = std::fs::read(ws.episodes(50, 9)).unwrap();
    let again = ws.path("again.jsonl");
    cmd_gen_episodes(&GenEpisodesArgs {
        map: ws.path("demo.txt"),
        n: 50,
        min_ratio: 1.1,
        seed: 9,
        out: again.clone(),
    })
    .unwrap();
    assert_eq!(a, std::fs::read(again).unwrap());
}

#[test]
fn align_recovers_the_demo_database() {
    let ws = Workspace::new();
    let out = ws.path("aligned.jsonl");
    let report = cmd_align(&AlignArgs {
        correspondences: ws.path("demo_correspondences.txt"),
        images: ws.path("demo_images.txt"),
        out: out.clone(),
    })
    .unwrap();
    assert!(report.rmse < 1e-9);
    let want = load_database(&ws.path("demo_db.jsonl")).unwrap();
    let got = load_database(&out).unwrap();
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(&want) {
        assert_eq!((g.id, &g.image_ref), (w.id, &w.image_ref));
        assert!((g.pose.x - w.pose.x).abs() < 1e-6 && (g.pose.z - w.pose.z).abs() < 1e-6);
        assert!(wrap_angle(g.pose.heading.angle() - w.pose.heading.angle()).abs() < 1e-6);
    }
}

#[test]
fn bundled_fixtures_match_generators() {
    let ws = Workspace::new();
    let bundled = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    for name in ["office.txt", "demo.txt", "demo_db.jsonl", "demo_correspondences.txt", "demo_images.txt"] {
        let fresh = std::fs::read(ws.path(name)).unwrap();
        let stored = std::fs::read(bundled.join(name)).unwrap();
        assert!(fresh == stored, "{name} is out of date; regenerate with `realnav fixtures`");
    }
}

fn realnav() -> Command {
    Command::new(env!("CARGO_BIN_EXE_realnav"))
}

#[test]
fn binary_exit_codes() {
    let ws = Workspace::new();
    let episodes = ws.episodes(3, 1);
    let base = |out: &str| {
        let mut c = realnav();
        c.arg("run")
            .arg("--map")
            .arg(ws.path("demo.txt"))
            .arg("--episodes")
            .arg(&episodes)
            .arg("--out")
            .arg(ws.path(out));
        c
    };
    let ok = base("ok.jsonl").args(["--policy", "greedy"]).output().unwrap();
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));

    // A policy process that exits at once aborts every episode.
    let aborted = base("aborted.jsonl").args(["--policy", "cmd:true", "--timeout", "2"]).output().unwrap();
    assert_eq!(aborted.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&aborted.stderr).contains("aborted episodes: 0,1,2"));
    let log = std::fs::read_to_string(ws.path("aborted.jsonl")).unwrap();
    assert_eq!(log.matches("\"outcome\":\"aborted\"").count(), 3);

    let bad = realnav().args(["run", "--map", "/nonexistent"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    let bad = realnav().args(["gen-episodes", "--map", "/nonexistent", "--out", "x"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}
