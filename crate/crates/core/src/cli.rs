//! The `realnav` command line: argument types and one function per
//! subcommand, so tests can drive the same code paths as the binary.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::alignment::{estimate_similarity, load_correspondences, AlignmentReport};
use crate::fixture;
use crate::metrics::{EpisodeResult, MetricsError, MetricsReport, DEFAULT_BIN_EDGES};
use crate::noise::{NoiseConfig, NoiseLevel};
use crate::protocol::{serve_policy_session, ImageMode, PolicyClient, SessionOptions, Transport, DEFAULT_TIMEOUT};
use crate::retrieval::{load_database, load_sfm_images, write_database, ObservationRecord, RetrievalConfig, RetrievalIndex};
use crate::rng::seeded;
use crate::sim::log::{load_log, summaries, write_log};
use crate::sim::{
    generate_episodes, load_episodes, write_episodes, EpisodeSpec, GreedyPolicy, ObservationMode, OraclePolicy,
    Outcome, Policy, RandomPolicy, SimConfig, Simulator, Trajectory,
};
use crate::world::{load_grid, write_grid_text};

#[derive(Debug, Parser)]
#[command(name = "realnav", version, about = "PointGoal navigation with pose-retrieved real images")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Register an SfM image set into the map frame and write the database.
    Align(AlignArgs),
    /// Sample an episode set.
    GenEpisodes(GenEpisodesArgs),
    /// Run a policy over an episode set and write the trajectory log.
    Run(RunArgs),
    /// Score a trajectory log.
    Eval(EvalArgs),
    /// Write the bundled synthetic maps and databases.
    Fixtures(FixturesArgs),
    /// Reference greedy policy speaking the wire protocol on stdio or TCP.
    GreedyClient(GreedyClientArgs),
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    /// `sx sy sz tx ty tz` control points, reconstruction → map.
    #[arg(long)]
    pub correspondences: PathBuf,
    /// COLMAP `images.txt`.
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenEpisodesArgs {
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 1.1)]
    pub min_ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Every flag is optional so that a `--config` file can supply it; flags win.
#[derive(Debug, Args, Default, Clone)]
pub struct RunArgs {
    /// TOML or JSON file with any of the fields below (snake_case).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub map: Option<PathBuf>,
    #[arg(long)]
    pub db: Option<PathBuf>,
    #[arg(long)]
    pub episodes: Option<PathBuf>,
    /// `oracle`, `random`, `greedy`, `cmd:<program> [args...]` or `tcp:<listen addr>`.
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long)]
    pub noise_sensor: Option<NoiseLevel>,
    #[arg(long)]
    pub noise_actuator: Option<NoiseLevel>,
    /// [default: 0.96]
    #[arg(long)]
    pub cos_threshold: Option<f64>,
    /// [default: 200]
    #[arg(long)]
    pub max_steps: Option<u32>,
    /// [default: 0.20]
    #[arg(long)]
    pub success_radius: Option<f64>,
    /// `virtual`, `real` or `hybrid` [default: real, or virtual without --db].
    #[arg(long)]
    pub mode: Option<ObservationMode>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for in-process policies [default: all cores].
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Per-message timeout for external policies, seconds [default: 30].
    #[arg(long)]
    pub timeout: Option<f64>,
    /// Send images inline (base64), read relative to this directory.
    #[arg(long)]
    pub inline_images: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Trajectory log from `run`.
    pub log: PathBuf,
    /// Histogram CSV [default: <log>.hist.csv].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Histogram bin edges, meters, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_BIN_EDGES.to_vec())]
    pub edges: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct FixturesArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct GreedyClientArgs {
    /// Connect to a simulator listening here instead of using stdio.
    #[arg(long)]
    pub connect: Option<String>,
}

/// Writes through a temp file in the target directory, then renames.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut builder = tempfile::Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(std::fs::Permissions::from_mode(0o644));
    }
    let mut tmp = builder
        .tempfile_in(dir)
        .with_context(|| format!("creating temp file in {}", dir.display()))?;
    {
        let mut w = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn cmd_align(args: &AlignArgs) -> Result<AlignmentReport> {
    let corr = load_correspondences(&args.correspondences)
        .with_context(|| format!("reading {}", args.correspondences.display()))?;
    let report = estimate_similarity(&corr)?;
    let images = load_sfm_images(&args.images).with_context(|| format!("reading {}", args.images.display()))?;
    let records = images
        .into_iter()
        .map(|img| {
            let pose = img
                .pose
                .transformed(&report.transform)
                .to_pose3()
                .with_context(|| format!("image {} ({})", img.id, img.name))?;
            Ok(ObservationRecord {
                id: img.id,
                image_ref: img.name,
                pose,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_atomic(&args.out, |w| write_database(w, &records))?;
    Ok(report)
}

pub fn cmd_gen_episodes(args: &GenEpisodesArgs) -> Result<Vec<EpisodeSpec>> {
    let grid = load_grid(&args.map).with_context(|| format!("loading map {}", args.map.display()))?;
    let specs = generate_episodes(&grid, args.n, args.min_ratio, &mut seeded(args.seed))?;
    write_atomic(&args.out, |w| write_episodes(w, &specs))?;
    Ok(specs)
}

/// Fields accepted in a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfigFile {
    pub map: Option<PathBuf>,
    pub db: Option<PathBuf>,
    pub episodes: Option<PathBuf>,
    pub policy: Option<String>,
    pub noise_sensor: Option<NoiseLevel>,
    pub noise_actuator: Option<NoiseLevel>,
    /// Explicit sigmas; replaces the presets when present.
    pub noise: Option<NoiseConfig>,
    pub cos_threshold: Option<f64>,
    pub max_steps: Option<u32>,
    pub success_radius: Option<f64>,
    pub mode: Option<ObservationMode>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub timeout: Option<f64>,
    pub out: Option<PathBuf>,
}

impl RunConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let parsed = if is_json {
            serde_json::from_str(&text).map_err(anyhow::Error::from)
        } else {
            toml::from_str(&text).map_err(anyhow::Error::from)
        };
        parsed.with_context(|| format!("parsing config {}", path.display()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    Oracle,
    Random,
    Greedy,
    Command(Vec<String>),
    Tcp(String),
}

impl std::str::FromStr for PolicySpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(cmd) = s.strip_prefix("cmd:") {
            let argv: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
            if argv.is_empty() {
                bail!("empty policy command");
            }
            return Ok(PolicySpec::Command(argv));
        }
        if let Some(addr) = s.strip_prefix("tcp:") {
            return Ok(PolicySpec::Tcp(addr.to_string()));
        }
        match s {
            "oracle" => Ok(PolicySpec::Oracle),
            "random" => Ok(PolicySpec::Random),
            "greedy" => Ok(PolicySpec::Greedy),
            _ => bail!("unknown policy {s:?} (expected oracle|random|greedy|cmd:<argv>|tcp:<addr>)"),
        }
    }
}

/// `run` arguments after merging the config file under the flags.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub map: PathBuf,
    pub db: Option<PathBuf>,
    pub episodes: PathBuf,
    pub policy: PolicySpec,
    pub sim: SimConfig,
    pub cos_threshold: f64,
    pub jobs: Option<usize>,
    pub timeout: Duration,
    pub inline_images: Option<PathBuf>,
    pub out: PathBuf,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunPlan> {
        let file = match &self.config {
            Some(p) => RunConfigFile::load(p)?,
            None => RunConfigFile::default(),
        };
        let need = |flag: &Option<PathBuf>, cfg: Option<PathBuf>, name: &str| {
            flag.clone().or(cfg).ok_or_else(|| anyhow!("missing --{name}"))
        };
        let map = need(&self.map, file.map, "map")?;
        let episodes = need(&self.episodes, file.episodes, "episodes")?;
        let out = need(&self.out, file.out, "out")?;
        let db = self.db.clone().or(file.db);
        let policy: PolicySpec = self.policy.clone().or(file.policy).unwrap_or_else(|| "oracle".into()).parse()?;

        let sensor = self.noise_sensor.or(file.noise_sensor);
        let actuator = self.noise_actuator.or(file.noise_actuator);
        let noise = match (sensor, actuator, file.noise) {
            (None, None, Some(explicit)) => explicit,
            (s, a, _) => NoiseConfig::from_presets(s.unwrap_or_default(), a.unwrap_or_default()),
        };
        let default_mode = if db.is_some() { ObservationMode::Real } else { ObservationMode::Virtual };
        let sim = SimConfig {
            max_steps: self.max_steps.or(file.max_steps).unwrap_or(200),
            success_radius: self.success_radius.or(file.success_radius).unwrap_or(0.20),
            mode: self.mode.or(file.mode).unwrap_or(default_mode),
            noise,
            seed: self.seed.or(file.seed).unwrap_or(0),
        };
        sim.validate()?;
        let timeout_s = self.timeout.or(file.timeout).unwrap_or(DEFAULT_TIMEOUT.as_secs_f64());
        if !(timeout_s > 0.0 && timeout_s.is_finite()) {
            bail!("--timeout must be positive");
        }
        let jobs = self.jobs.or(file.jobs);
        if jobs == Some(0) {
            bail!("--jobs must be >= 1");
        }
        Ok(RunPlan {
            map,
            db,
            episodes,
            policy,
            sim,
            cos_threshold: self.cos_threshold.or(file.cos_threshold).unwrap_or(0.96),
            jobs,
            timeout: Duration::from_secs_f64(timeout_s),
            inline_images: self.inline_images.clone(),
            out,
        })
    }
}

#[derive(Debug)]
pub struct RunSummary {
    pub trajectories: Vec<Trajectory>,
    /// Episodes whose policy failed, in spec order.
    pub aborted: Vec<u64>,
}

fn run_in_process(sim: &Simulator<'_>, plan: &RunPlan, specs: &[EpisodeSpec], grid: Arc<crate::world::OccupancyGrid>) -> Result<Vec<Trajectory>> {
    let radius = plan.sim.success_radius;
    let seed = plan.sim.seed;
    let noise = plan.sim.noise;
    let policy = plan.policy.clone();
    let make = move |_: &EpisodeSpec| -> Box<dyn Policy> {
        match policy {
            PolicySpec::Oracle => Box::new(OraclePolicy::with_noise(grid.clone(), radius, noise)),
            PolicySpec::Random => Box::new(RandomPolicy::new(seed, radius)),
            _ => Box::new(GreedyPolicy),
        }
    };
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = plan.jobs {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
            return Ok(pool.install(|| sim.run_suite(&make, specs))?);
        }
        Ok(sim.run_suite(&make, specs)?)
    }
    #[cfg(not(feature = "parallel"))]
    {
        Ok(sim.run_suite_sequential(&make, specs)?)
    }
}

pub fn cmd_run(args: &RunArgs) -> Result<RunSummary> {
    let plan = args.resolve()?;
    let grid = Arc::new(load_grid(&plan.map).with_context(|| format!("loading map {}", plan.map.display()))?);
    let index = match &plan.db {
        Some(p) => {
            let records = load_database(p).with_context(|| format!("loading database {}", p.display()))?;
            Some(RetrievalIndex::build(records, RetrievalConfig::new(plan.cos_threshold)?)?)
        }
        None => None,
    };
    let specs = load_episodes(&plan.episodes).with_context(|| format!("loading episodes {}", plan.episodes.display()))?;
    let sim = Simulator::new(&grid, index.as_ref(), plan.sim)?;

    let trajectories = match &plan.policy {
        PolicySpec::Oracle | PolicySpec::Random | PolicySpec::Greedy => run_in_process(&sim, &plan, &specs, grid.clone())?,
        external => {
            let transport = match external {
                PolicySpec::Command(argv) => Transport::spawn(argv)?,
                PolicySpec::Tcp(addr) => {
                    let listener = std::net::TcpListener::bind(addr.as_str()).with_context(|| format!("binding {addr}"))?;
                    log::info!("waiting for a policy client on {}", listener.local_addr()?);
                    Transport::accept(&listener, plan.timeout)?
                }
                _ => unreachable!(),
            };
            let opts = SessionOptions {
                timeout: plan.timeout,
                image_mode: match &plan.inline_images {
                    Some(root) => ImageMode::Inline { root: root.clone() },
                    None => ImageMode::Path,
                },
                image_size: None,
            };
            let session = serve_policy_session(transport, &sim, &specs, opts)?;
            if let Some(e) = &session.error {
                log::error!("policy session ended early: {e}");
            }
            session.trajectories
        }
    };
    write_atomic(&plan.out, |w| write_log(w, &trajectories))?;
    let aborted = trajectories
        .iter()
        .filter(|t| matches!(t.outcome, Outcome::Aborted(_)))
        .map(|t| t.spec.id)
        .collect();
    Ok(RunSummary { trajectories, aborted })
}

pub fn default_hist_path(log: &Path) -> PathBuf {
    let mut p = log.as_os_str().to_owned();
    p.push(".hist.csv");
    PathBuf::from(p)
}

pub fn cmd_eval(args: &EvalArgs) -> Result<MetricsReport> {
    let records = load_log(&args.log).with_context(|| format!("reading {}", args.log.display()))?;
    let results: Vec<EpisodeResult> = summaries(&records)
        .into_iter()
        .map(|s| EpisodeResult {
            success: s.is_success(),
            shortest_geodesic: s.geodesic,
            path_length: s.path_length,
            final_distance: s.final_distance,
        })
        .collect();
    if results.is_empty() {
        return Err(MetricsError::NoEpisodes).with_context(|| format!("{} holds no episode summaries", args.log.display()));
    }
    let report = MetricsReport::compute(&results, &args.edges)?;
    let csv_path = args.out.clone().unwrap_or_else(|| default_hist_path(&args.log));
    write_atomic(&csv_path, |w| w.write_all(report.histogram_csv().as_bytes()))?;
    if let Some(json) = &args.json {
        write_atomic(json, |w| {
            serde_json::to_writer_pretty(&mut *w, &report)?;
            w.write_all(b"\n")
        })?;
    }
    Ok(report)
}

/// Database size and seed used for the bundled demo database.
pub const DEMO_DB_SIZE: usize = 500;
pub const DEMO_DB_SEED: u64 = 7;

pub fn cmd_fixtures(args: &FixturesArgs) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(&args.out_dir)?;
    let demo = fixture::demo_grid();
    let db = fixture::synthetic_database(&demo, DEMO_DB_SIZE, DEMO_DB_SEED);
    let t = fixture::demo_sfm_to_map();
    let files: Vec<(&str, String)> = vec![
        ("office.txt", write_grid_text(&fixture::office_grid())),
        ("demo.txt", write_grid_text(&demo)),
        ("demo_db.jsonl", {
            let mut buf = Vec::new();
            write_database(&mut buf, &db)?;
            String::from_utf8(buf)?
        }),
        ("demo_correspondences.txt", fixture::correspondences_text(&t)),
        ("demo_images.txt", fixture::sfm_images_text(&db, &t)),
    ];
    let mut written = Vec::new();
    for (name, content) in files {
        let path = args.out_dir.join(name);
        write_atomic(&path, |w| w.write_all(content.as_bytes()))?;
        written.push(path);
    }
    Ok(written)
}

pub fn cmd_greedy_client(args: &GreedyClientArgs) -> Result<usize> {
    let transport = match &args.connect {
        Some(addr) => Transport::connect(addr.as_str())?,
        None => Transport::from_streams(std::io::stdin(), std::io::stdout()),
    };
    let client = PolicyClient::connect(transport, DEFAULT_TIMEOUT)?;
    Ok(client.run(|obs| GreedyPolicy::decide(obs.goal_distance, obs.goal_bearing))?)
}

/// Dispatches a parsed command line. `Ok(false)` means some episodes were
/// aborted and the process should exit nonzero.
pub fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Align(a) => {
            let r = cmd_align(&a)?;
            println!(
                "aligned {} control points: scale {:.6}, yaw {:.4} rad, rmse {:.6e} m",
                r.n_points,
                r.transform.scale(),
                r.transform.yaw(),
                r.rmse
            );
            println!("wrote {}", a.out.display());
        }
        Command::GenEpisodes(a) => {
            let specs = cmd_gen_episodes(&a)?;
            println!("wrote {} episodes to {}", specs.len(), a.out.display());
        }
        Command::Run(a) => {
            let s = cmd_run(&a)?;
            let ok = s.trajectories.iter().filter(|t| t.outcome.is_success()).count();
            println!("{} episodes, {} successful", s.trajectories.len(), ok);
            if !s.aborted.is_empty() {
                let ids: Vec<String> = s.aborted.iter().map(u64::to_string).collect();
                eprintln!("aborted episodes: {}", ids.join(","));
                return Ok(false);
            }
        }
        Command::Eval(a) => {
            let r = cmd_eval(&a)?;
            print!("{}", r.table());
            println!("histogram: {}", a.out.clone().unwrap_or_else(|| default_hist_path(&a.log)).display());
        }
        Command::Fixtures(a) => {
            for p in cmd_fixtures(&a)? {
                println!("wrote {}", p.display());
            }
        }
        Command::GreedyClient(a) => {
            let n = cmd_greedy_client(&a)?;
            log::info!("greedy client finished {n} episodes");
        }
    }
    Ok(true)
}
