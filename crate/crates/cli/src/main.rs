use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use conscient_core::config::{parse_config, RunConfig};
use conscient_core::dream::{self, DreamConfig};
use conscient_core::optimizer::{default_bounds, evolve, Evaluator, Parallelism};
use conscient_core::percept_log::{read_percept_log, write_percept_log};
use conscient_core::semantic::{BUILTIN_CONTENT_GRAPH, BUILTIN_STYLE_GRAPH};
use conscient_core::seed;
use conscient_core::trace::{metrics, SimulationTrace};
use conscient_core::world::{GraphSource, World};
use conscient_core::SemanticGraph;

const THREADS_VAR: &str = "CONSCIENT_SIM_THREADS";

#[derive(Parser)]
#[command(name = "conscient-sim", version, about = "Seeded multi-agent simulator with dreams, emotions and a GA tuner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write trace.csv, metrics.csv, percepts.csv and manifest.conf.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides world.master_seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dream offline from a percept log and write dream.csv.
    Dream {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        percept_log: PathBuf,
        /// Only use percepts of this agent.
        #[arg(long)]
        agent: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the genetic optimiser and write ga_history.csv, best.conf and manifest.conf.
    Optimize {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides ga.seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the metrics of a trace file.
    Metrics {
        #[arg(long)]
        trace: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate { config, seed, out } => simulate(config.as_deref(), seed, &out),
        Command::Dream {
            config,
            percept_log,
            agent,
            seed,
            out,
        } => offline_dream(config.as_deref(), &percept_log, agent, seed, &out),
        Command::Optimize { config, seed, out } => optimize(config.as_deref(), seed, &out),
        Command::Metrics { trace } => {
            let text = fs::read_to_string(&trace).with_context(|| format!("reading {}", trace.display()))?;
            let trace = SimulationTrace::read_from(&text)?;
            print!("{}", metrics(&trace).to_csv_string());
            Ok(())
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse_config(&text).with_context(|| format!("config {}", path.display()))
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

struct Manifest<'a> {
    command: &'a str,
    config_path: Option<&'a Path>,
    seed: Option<u64>,
    out: &'a Path,
    started: u64,
}

impl Manifest<'_> {
    /// Metadata as comments followed by the effective config, so the file
    /// can be fed back through `--config`.
    fn write(&self, config: &RunConfig) -> Result<()> {
        let mut text = String::new();
        text.push_str(&format!("# command = {}\n", self.command));
        text.push_str(&format!(
            "# config = {}\n",
            self.config_path.map_or("<defaults>".to_owned(), |p| p.display().to_string())
        ));
        text.push_str(&format!(
            "# seed = {}\n",
            self.seed.map_or("<from config>".to_owned(), |s| s.to_string())
        ));
        text.push_str(&format!("# out = {}\n", self.out.display()));
        text.push_str(&format!("# version = {}\n", env!("CARGO_PKG_VERSION")));
        text.push_str(&format!("# started_unix = {}\n", self.started));
        text.push_str(&format!("# finished_unix = {}\n", unix_now()));
        text.push_str(&config.to_text());
        write_atomic(&self.out.join("manifest.conf"), text.as_bytes())
    }
}

fn simulate(config_path: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let started = unix_now();
    let mut config = load_config(config_path)?;
    if let Some(s) = seed {
        config.world.master_seed = s;
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let mut world = World::build(&config.world)?;
    while !world.is_finished() {
        world.step();
    }

    let mut percepts = Vec::new();
    write_percept_log(
        &mut percepts,
        world.agents().iter().flat_map(|a| {
            a.percepts()
                .iter()
                .chain(a.styles().iter())
                .chain(a.dreamed().iter())
                .map(move |p| (a.id(), p))
        }),
    )?;
    let trace = world.into_trace();
    write_atomic(&out.join("trace.csv"), trace.to_csv_string().as_bytes())?;
    let m = metrics(&trace);
    write_atomic(&out.join("metrics.csv"), m.to_csv_string().as_bytes())?;
    write_atomic(&out.join("percepts.csv"), &percepts)?;
    Manifest {
        command: "simulate",
        config_path,
        seed,
        out,
        started,
    }
    .write(&config)?;
    println!(
        "{} ticks, {} agents, {} interactions -> {}",
        m.ticks,
        m.agents,
        m.interactions,
        out.display()
    );
    Ok(())
}

fn load_graph(source: &GraphSource, builtin: &str, config: &RunConfig) -> Result<SemanticGraph> {
    let text = match source {
        GraphSource::Builtin => builtin.to_owned(),
        GraphSource::File(p) => fs::read_to_string(p).with_context(|| format!("reading graph {}", p.display()))?,
    };
    Ok(SemanticGraph::load(&text, config.world.graph_seed, config.world.feature_dim)?)
}

fn offline_dream(config_path: Option<&Path>, log_path: &Path, agent: Option<usize>, seed: u64, out: &Path) -> Result<()> {
    let started = unix_now();
    let config = load_config(config_path)?;
    let content = load_graph(&config.world.content_graph, BUILTIN_CONTENT_GRAPH, &config)?;
    let style = load_graph(&config.world.style_graph, BUILTIN_STYLE_GRAPH, &config)?;
    let text = fs::read_to_string(log_path).with_context(|| format!("reading {}", log_path.display()))?;
    let log = read_percept_log(&text, agent, &content, &style).with_context(|| format!("percept log {}", log_path.display()))?;

    let dcfg: DreamConfig = config.world.agent.dream;
    let mut rng = seed::stream(seed, "offline-dream", &[]);
    let d = dream::dream(&log.content, &content, &log.style, &style, &dcfg, 0, &mut rng)?;

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut csv = String::from(
        "frame,content_category,style_category,content_step,style_step,pair_distance,content_source,style_source,i,j,features\n",
    );
    for (k, f) in d.frames.iter().enumerate() {
        let features = f.features.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
        csv.push_str(&format!(
            "{k},{},{},{},{},{},{},{},{},{},{features}\n",
            f.content_category,
            f.style_category,
            f.content_step,
            f.style_step,
            f.pair_distance,
            f.content_source,
            f.style_source,
            f.content_origin.i,
            f.content_origin.j,
        ));
    }
    write_atomic(&out.join("dream.csv"), csv.as_bytes())?;
    Manifest {
        command: "dream",
        config_path,
        seed: Some(seed),
        out,
        started,
    }
    .write(&config)?;
    println!(
        "{} frames from {} -> {}",
        d.frames.len(),
        d.initial_content,
        out.join("dream.csv").display()
    );
    Ok(())
}

fn parallelism() -> Result<Parallelism> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(Parallelism::Threads(0)),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(1) => Ok(Parallelism::Sequential),
            Ok(n) => Ok(Parallelism::Threads(n)),
            Err(_) => anyhow::bail!("{THREADS_VAR} must be a non-negative integer, got `{v}`"),
        },
    }
}

fn optimize(config_path: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let started = unix_now();
    let mut config = load_config(config_path)?;
    if let Some(s) = seed {
        config.ga.seed = s;
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let bounds = default_bounds();
    let evaluator = Evaluator {
        parallelism: parallelism()?,
        hook: None,
    };
    let result = evolve(&config, &bounds, &evaluator)?;
    write_atomic(&out.join("ga_history.csv"), result.history_csv(&bounds).as_bytes())?;
    write_atomic(&out.join("best.conf"), result.best_config.to_text().as_bytes())?;
    Manifest {
        command: "optimize",
        config_path,
        seed,
        out,
        started,
    }
    .write(&config)?;
    println!(
        "best fitness {} after {} generations ({} evaluations) -> {}",
        result.best.report.fitness,
        config.ga.generations,
        result.evaluations,
        out.display()
    );
    Ok(())
}
