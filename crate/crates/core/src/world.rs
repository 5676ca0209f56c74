//! The shared environment: per-agent fields over one grid, random rewards,
//! content stimuli, the tick scheduler and the co-location exchange protocol.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use thiserror::Error;

use crate::agent::{Agent, AgentConfig, Surroundings};
use crate::config::ConfigError;
use crate::emotion::Mode;
use crate::field::{FieldError, FieldSampler, GridCell};
use crate::seed;
use crate::semantic::{GraphError, SemanticGraph, BUILTIN_CONTENT_GRAPH, BUILTIN_STYLE_GRAPH, DEFAULT_FEATURE_DIM};
use crate::trace::{InteractionRecord, SimulationTrace, TraceEvent, TraceRow};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("graph {which}: {source}")]
    Graph {
        which: &'static str,
        #[source]
        source: GraphError,
    },
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modality {
    Recipe,
    Music,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Recipe => "recipe",
            Modality::Music => "music",
        }
    }
}

impl FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "recipe" => Ok(Modality::Recipe),
            "music" => Ok(Modality::Music),
            other => Err(format!("unknown modality `{other}` (expected recipe or music)")),
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphSource {
    Builtin,
    File(PathBuf),
}

impl GraphSource {
    fn load(&self, builtin: &str, seed: u64, dim: usize, which: &'static str) -> Result<SemanticGraph, SimError> {
        let text = match self {
            GraphSource::Builtin => builtin.to_owned(),
            GraphSource::File(path) => std::fs::read_to_string(path).map_err(|source| SimError::Io {
                path: path.clone(),
                source,
            })?,
        };
        SemanticGraph::load(&text, seed, dim).map_err(|source| SimError::Graph { which, source })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub resolution: usize,
    pub n_agents: usize,
    pub total_ticks: u64,
    pub reward_count: usize,
    pub reward_peak: f64,
    pub reward_width: f64,
    /// Probability that a cell holds a content stimulus.
    pub stimulus_probability: f64,
    pub modalities: Vec<Modality>,
    pub feature_dim: usize,
    /// Seed for category prototypes; kept apart from `master_seed` so that
    /// classification is the same across runs.
    pub graph_seed: u64,
    pub content_graph: GraphSource,
    pub style_graph: GraphSource,
    pub agent: AgentConfig,
    pub master_seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            resolution: 16,
            n_agents: 3,
            total_ticks: 2000,
            reward_count: 4,
            reward_peak: 1.0,
            reward_width: 1.5,
            stimulus_probability: 0.1,
            modalities: vec![Modality::Recipe, Modality::Music],
            feature_dim: DEFAULT_FEATURE_DIM,
            graph_seed: 0,
            content_graph: GraphSource::Builtin,
            style_graph: GraphSource::Builtin,
            agent: AgentConfig::default(),
            master_seed: 0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |ok: bool, key: &str, msg: String| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::invalid(key, msg))
            }
        };
        let cells = self.resolution * self.resolution;
        check(
            (2..=crate::field::MAX_RESOLUTION).contains(&self.resolution),
            "world.resolution",
            format!("must be in [2, {}]", crate::field::MAX_RESOLUTION),
        )?;
        check(self.n_agents >= 1, "world.n_agents", "must be >= 1".into())?;
        check(
            self.n_agents <= cells,
            "world.n_agents",
            format!("{} agents do not fit on {cells} distinct cells", self.n_agents),
        )?;
        check(
            self.reward_count <= cells,
            "world.reward_count",
            format!("exceeds the {cells} grid cells"),
        )?;
        check(self.reward_width > 0.0, "world.reward_width", "must be > 0".into())?;
        check(
            (0.0..=1.0).contains(&self.stimulus_probability),
            "world.stimulus_probability",
            "must be in [0, 1]".into(),
        )?;
        check(
            self.stimulus_probability == 0.0 || !self.modalities.is_empty(),
            "world.modalities",
            "needs at least one modality when stimuli are enabled".into(),
        )?;
        check(self.feature_dim >= 1, "world.feature_dim", "must be >= 1".into())?;
        self.agent.validate()
    }
}

/// Deterministic feature vector of what a camera sees at each cell.
#[derive(Debug, Clone)]
pub struct CellFeatures {
    seed: u64,
    dim: usize,
}

impl CellFeatures {
    pub fn new(seed: u64, dim: usize) -> Self {
        Self { seed, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, cell: GridCell) -> Vec<f64> {
        let mut rng = seed::stream(self.seed, "cell", &[cell.i as u64, cell.j as u64]);
        (0..self.dim).map(|_| rng.random::<f64>()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContentStimulus {
    pub cell: GridCell,
    pub modality: Modality,
    pub features: Vec<f64>,
    /// `2·mean(features) − 1`, in `[−1, 1]`.
    pub score: f64,
}

pub struct World {
    config: WorldConfig,
    tick: u64,
    agents: Vec<Agent>,
    content_graph: SemanticGraph,
    style_graph: SemanticGraph,
    cell_features: CellFeatures,
    stimuli: BTreeMap<GridCell, ContentStimulus>,
    rewards: Vec<GridCell>,
    trace: SimulationTrace,
}

impl World {
    /// Samples every agent's field, places rewards, stimuli and agents.
    pub fn build(config: &WorldConfig) -> Result<Self, SimError> {
        config.validate()?;
        let master = config.master_seed;
        let r = config.resolution;
        let content_graph =
            config
                .content_graph
                .load(BUILTIN_CONTENT_GRAPH, config.graph_seed, config.feature_dim, "content")?;
        let style_graph = config
            .style_graph
            .load(BUILTIN_STYLE_GRAPH, config.graph_seed, config.feature_dim, "style")?;

        let sampler = FieldSampler::new(config.agent.kernel, r)?;
        let mut fields: Vec<_> = (0..config.n_agents)
            .map(|id| sampler.sample(&mut seed::stream(master, "field", &[id as u64])))
            .collect();

        let mut world_rng = seed::stream(master, "world", &[]);
        let cell_at = |k: usize| GridCell::new(k / r, k % r);
        let rewards: Vec<GridCell> = index::sample(&mut world_rng, r * r, config.reward_count)
            .into_iter()
            .map(cell_at)
            .collect();
        for field in &mut fields {
            for &cell in &rewards {
                field.local_bump(cell, config.reward_peak, config.reward_width)?;
            }
        }

        let mut stimuli = BTreeMap::new();
        for k in 0..r * r {
            if world_rng.random::<f64>() < config.stimulus_probability {
                let cell = cell_at(k);
                let modality = config.modalities[world_rng.random_range(0..config.modalities.len())];
                let mut rng = seed::stream(master, "stimulus", &[cell.i as u64, cell.j as u64]);
                let features: Vec<f64> = (0..config.feature_dim).map(|_| rng.random::<f64>()).collect();
                let score = 2.0 * features.iter().sum::<f64>() / features.len() as f64 - 1.0;
                stimuli.insert(
                    cell,
                    ContentStimulus {
                        cell,
                        modality,
                        features,
                        score,
                    },
                );
            }
        }

        let starts = index::sample(&mut world_rng, r * r, config.n_agents);
        let agents = fields
            .into_iter()
            .zip(starts.iter())
            .enumerate()
            .map(|(id, (field, k))| {
                Agent::new(
                    id,
                    config.agent.clone(),
                    field,
                    cell_at(k),
                    seed::stream(master, "agent", &[id as u64]),
                )
            })
            .collect();

        let echo = crate::config::RunConfig {
            world: config.clone(),
            ..Default::default()
        }
        .echo()
        .into_iter()
        .filter(|(k, _)| !k.starts_with("ga."))
        .collect();

        let mut world = World {
            config: config.clone(),
            tick: 0,
            agents,
            content_graph,
            style_graph,
            cell_features: CellFeatures::new(master, config.feature_dim),
            stimuli,
            rewards,
            trace: SimulationTrace {
                config: echo,
                rows: Vec::new(),
            },
        };
        let initial: Vec<TraceRow> = (0..world.agents.len())
            .map(|k| world.row(k, vec![TraceEvent::Init]))
            .collect();
        world.trace.rows.extend(initial);
        Ok(world)
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn agents_mut(&mut self) -> &mut [Agent] {
        &mut self.agents
    }

    pub fn stimuli(&self) -> &BTreeMap<GridCell, ContentStimulus> {
        &self.stimuli
    }

    pub fn rewards(&self) -> &[GridCell] {
        &self.rewards
    }

    pub fn content_graph(&self) -> &SemanticGraph {
        &self.content_graph
    }

    pub fn style_graph(&self) -> &SemanticGraph {
        &self.style_graph
    }

    pub fn cell_features(&self) -> &CellFeatures {
        &self.cell_features
    }

    pub fn trace(&self) -> &SimulationTrace {
        &self.trace
    }

    pub fn into_trace(self) -> SimulationTrace {
        self.trace
    }

    pub fn is_finished(&self) -> bool {
        self.tick >= self.config.total_ticks
    }

    fn row(&self, k: usize, events: Vec<TraceEvent>) -> TraceRow {
        let agent = &self.agents[k];
        TraceRow {
            tick: self.tick,
            agent_id: agent.id(),
            cell: agent.position(),
            mode: agent.mode(),
            emotions: *agent.emotions(),
            field_value: agent.field().get(agent.position()),
            events,
        }
    }

    /// Advances one tick: agents in id order, then every awake co-located
    /// pair exchanges its latest own percept. Returns this tick's interactions.
    pub fn step(&mut self) -> Vec<InteractionRecord> {
        self.tick += 1;
        let tick = self.tick;
        let env = Surroundings {
            content_graph: &self.content_graph,
            style_graph: &self.style_graph,
            cell_features: &self.cell_features,
            stimuli: &self.stimuli,
        };
        let mut events: Vec<Vec<TraceEvent>> = self.agents.iter_mut().map(|a| a.tick(env, tick)).collect();

        let mut records = Vec::new();
        let n = self.agents.len();
        for a in 0..n {
            for b in a + 1..n {
                let (left, right) = self.agents.split_at_mut(b);
                if let Some(record) = interact(&mut left[a], &mut right[0], tick) {
                    events[a].push(TraceEvent::Swap {
                        partner: b,
                        sent: record.sent_by_a,
                        received: record.sent_by_b,
                        evaluation: record.evaluation_by_a,
                    });
                    events[b].push(TraceEvent::Swap {
                        partner: a,
                        sent: record.sent_by_b,
                        received: record.sent_by_a,
                        evaluation: record.evaluation_by_b,
                    });
                    records.push(record);
                }
            }
        }

        let rows: Vec<TraceRow> = events.into_iter().enumerate().map(|(k, e)| self.row(k, e)).collect();
        self.trace.rows.extend(rows);
        records
    }
}

/// Exchange between two agents: each sends its most recent own percept and
/// receives the other's. No record unless both are awake on the same cell
/// and both have something to send.
pub fn interact(a: &mut Agent, b: &mut Agent, tick: u64) -> Option<InteractionRecord> {
    if a.mode() != Mode::Awake || b.mode() != Mode::Awake || a.position() != b.position() {
        return None;
    }
    let from_a = a.latest_own()?.clone();
    let from_b = b.latest_own()?.clone();
    let (sent_by_a, sent_by_b) = (from_a.id, from_b.id);
    let evaluation_by_a = a.receive_percept(from_b);
    let evaluation_by_b = b.receive_percept(from_a);
    Some(InteractionRecord {
        tick,
        agent_a: a.id(),
        agent_b: b.id(),
        cell: a.position(),
        sent_by_a,
        sent_by_b,
        evaluation_by_a,
        evaluation_by_b,
    })
}

/// Builds the world and runs it for `total_ticks`.
pub fn run(config: &WorldConfig) -> Result<SimulationTrace, SimError> {
    let mut world = World::build(config)?;
    while !world.is_finished() {
        world.step();
    }
    Ok(world.into_trace())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::metrics;

    fn small(n_agents: usize) -> WorldConfig {
        WorldConfig {
            resolution: 8,
            n_agents,
            total_ticks: 0,
            ..WorldConfig::default()
        }
    }

    #[test]
    fn agents_get_distinct_fields() {
        let world = World::build(&small(2)).unwrap();
        assert_ne!(world.agents()[0].field(), world.agents()[1].field());
        assert_ne!(world.agents()[0].position(), world.agents()[1].position());
    }

    #[test]
    fn stimulus_probability_extremes() {
        let none = World::build(&WorldConfig {
            stimulus_probability: 0.0,
            ..small(1)
        })
        .unwrap();
        assert!(none.stimuli().is_empty());
        let all = World::build(&WorldConfig {
            stimulus_probability: 1.0,
            ..small(1)
        })
        .unwrap();
        assert_eq!(all.stimuli().len(), 64);
        for s in all.stimuli().values() {
            assert!((-1.0..=1.0).contains(&s.score));
            let mean = s.features.iter().sum::<f64>() / s.features.len() as f64;
            assert!((s.score - (2.0 * mean - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn too_many_rewards_is_a_config_error() {
        let err = World::build(&WorldConfig {
            reward_count: 65,
            ..small(1)
        })
        .err()
        .unwrap();
        assert!(matches!(err, SimError::Config(ref e) if e.key == "world.reward_count"));
    }

    #[test]
    fn rewards_raise_every_field() {
        let base = World::build(&WorldConfig {
            reward_count: 0,
            ..small(2)
        })
        .unwrap();
        let rewarded = World::build(&WorldConfig {
            reward_count: 3,
            ..small(2)
        })
        .unwrap();
        assert_eq!(rewarded.rewards().len(), 3);
        for (a, b) in base.agents().iter().zip(rewarded.agents()) {
            for &cell in rewarded.rewards() {
                assert!(b.field().get(cell) - a.field().get(cell) >= 1.0 - 1e-12);
            }
        }
    }

    #[test]
    fn zero_ticks_gives_initial_rows_only() {
        let trace = run(&small(3)).unwrap();
        assert_eq!(trace.rows.len(), 3);
        assert!(trace.rows.iter().all(|r| r.tick == 0 && r.events == vec![TraceEvent::Init]));
        assert_eq!(trace.config_value("world.n_agents"), Some("3"));
        assert_eq!(metrics(&trace).interactions, 0);
    }

    fn seeded_world(n: usize) -> World {
        let mut world = World::build(&small(n)).unwrap();
        // Give everyone something to share.
        for k in 0..n {
            world.agents[k].field_mut().local_bump(GridCell::new(0, 0), 50.0, 100.0).unwrap();
        }
        let env_tick = 1;
        let content = world.content_graph.clone();
        let style = world.style_graph.clone();
        let features = world.cell_features.clone();
        let stimuli = BTreeMap::new();
        let env = Surroundings {
            content_graph: &content,
            style_graph: &style,
            cell_features: &features,
            stimuli: &stimuli,
        };
        for agent in &mut world.agents {
            let mut ev = Vec::new();
            while agent.maybe_take_photo(env, env_tick, &mut ev).is_none() {}
        }
        world
    }

    #[test]
    fn interaction_needs_awake_co_location() {
        let mut world = seeded_world(2);
        let (left, right) = world.agents.split_at_mut(1);
        let (a, b) = (&mut left[0], &mut right[0]);
        assert!(interact(a, b, 1).is_none(), "distinct cells");

        let mut world = seeded_world(2);
        let target = world.agents[0].position();
        force_position(&mut world.agents[1], target);
        let pa = world.agents[0].latest_own().unwrap().id;
        let pb = world.agents[1].latest_own().unwrap().id;
        let (left, right) = world.agents.split_at_mut(1);
        let record = interact(&mut left[0], &mut right[0], 1).unwrap();
        assert_eq!((record.sent_by_a, record.sent_by_b), (pa, pb));
        assert!(world.agents[0].percepts().contains(pb));
        assert!(world.agents[1].percepts().contains(pa));

        // Next tick: same percepts resent, ignored by id, still recorded.
        let (left, right) = world.agents.split_at_mut(1);
        let again = interact(&mut left[0], &mut right[0], 2).unwrap();
        assert_eq!((again.evaluation_by_a, again.evaluation_by_b), (None, None));
    }

    #[test]
    fn empty_stores_produce_no_record() {
        let mut world = World::build(&small(2)).unwrap();
        let target = world.agents[0].position();
        force_position(&mut world.agents[1], target);
        let (left, right) = world.agents.split_at_mut(1);
        assert!(interact(&mut left[0], &mut right[0], 1).is_none());
    }

    fn force_position(agent: &mut Agent, cell: GridCell) {
        // Walk with unlimited greedy moves towards a huge bump at `cell`.
        agent.field_mut().local_bump(cell, 1e6, 1e3).unwrap();
        let cfg_explore = agent.config().explore_rate;
        assert!(cfg_explore < 1.0);
        for _ in 0..10_000 {
            if agent.position() == cell {
                break;
            }
            agent.navigate_step();
        }
        assert_eq!(agent.position(), cell);
    }
}
