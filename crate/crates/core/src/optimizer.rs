//! Genetic outer loop over the simulation parameters.
//!
//! A genome is a point in `[0, 1]^d`; each gene maps linearly onto one config
//! key. Fitness is the mean interaction count over a fixed list of world
//! seeds, so it is a pure function of the genome and evaluations can run in
//! any order or in parallel without changing the result.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::seed::{self, SimRng};
use crate::trace::{metrics, SimulationTrace};
use crate::world;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    /// Standard deviation of a gene mutation, in normalised `[0, 1]` units.
    pub mutation_sigma: f64,
    pub elite_count: usize,
    pub eval_seeds: Vec<u64>,
    /// Per-agent move cap imposed on every evaluated run.
    pub movement_budget: u64,
    /// Divide interactions by `total_ticks · C(n_agents, 2)`.
    pub normalize_fitness: bool,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 16,
            generations: 20,
            tournament_size: 3,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            mutation_sigma: 0.1,
            elite_count: 1,
            eval_seeds: vec![1, 2, 3],
            movement_budget: 200,
            normalize_fitness: false,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let rate = |v: f64, key: &str| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(ConfigError::invalid(key, "must be in [0, 1]"))
            }
        };
        if self.population_size == 0 {
            return Err(ConfigError::invalid("ga.population_size", "must be >= 1"));
        }
        if self.tournament_size == 0 || self.tournament_size > self.population_size {
            return Err(ConfigError::invalid(
                "ga.tournament_size",
                format!("must be in [1, population_size = {}]", self.population_size),
            ));
        }
        if self.elite_count > self.population_size {
            return Err(ConfigError::invalid("ga.elite_count", "exceeds population_size"));
        }
        rate(self.crossover_rate, "ga.crossover_rate")?;
        rate(self.mutation_rate, "ga.mutation_rate")?;
        if self.mutation_sigma < 0.0 {
            return Err(ConfigError::invalid("ga.mutation_sigma", "must be >= 0"));
        }
        if self.eval_seeds.is_empty() {
            return Err(ConfigError::invalid("ga.eval_seeds", "needs at least one seed"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneSpec {
    pub key: &'static str,
    pub min: f64,
    pub max: f64,
    pub integer: bool,
}

impl GeneSpec {
    const fn real(key: &'static str, min: f64, max: f64) -> Self {
        Self { key, min, max, integer: false }
    }

    const fn int(key: &'static str, min: f64, max: f64) -> Self {
        Self { key, min, max, integer: true }
    }

    fn decode(&self, g: f64) -> f64 {
        let g = g.clamp(0.0, 1.0);
        let v = self.min * (1.0 - g) + self.max * g;
        if self.integer {
            v.round()
        } else {
            v
        }
    }

    fn encode(&self, v: f64) -> f64 {
        if self.max == self.min {
            0.0
        } else {
            ((v - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
        }
    }
}

pub fn default_bounds() -> Vec<GeneSpec> {
    vec![
        GeneSpec::int("agent.awake_ticks", 20.0, 400.0),
        GeneSpec::int("agent.asleep_ticks", 5.0, 100.0),
        GeneSpec::int("dream.step_lower", 0.0, 3.0),
        GeneSpec::int("dream.step_upper", 1.0, 6.0),
        GeneSpec::real("emotion.threshold", 0.2, 1.0),
        GeneSpec::real("agent.explore_rate", 0.0, 1.0),
        GeneSpec::real("agent.noise_sigma", 0.0, 0.5),
        GeneSpec::real("emotion.delta_lower", 0.005, 0.1),
        GeneSpec::real("emotion.delta_upper", 0.01, 0.2),
        GeneSpec::real("dream.style_weight", 0.0, 1.0),
        GeneSpec::real("agent.visit_peak", -2.0, -0.1),
        GeneSpec::real("emotion.courage_gain", 0.0, 1.0),
        GeneSpec::real("emotion.high_value_cutoff", -1.0, 1.0),
    ]
}

/// Keys whose decoded value must not fall below their partner's.
const ORDERED_PAIRS: &[(&str, &str)] = &[
    ("dream.step_lower", "dream.step_upper"),
    ("emotion.delta_lower", "emotion.delta_upper"),
];

/// Maps a genome onto `(key, value)` overrides. Upper members of ordered
/// pairs are raised to their lower partner when needed.
pub fn decode_genome(genome: &[f64], bounds: &[GeneSpec]) -> Vec<(String, f64)> {
    assert_eq!(genome.len(), bounds.len(), "genome length does not match the gene bounds");
    let mut values: Vec<(String, f64)> = bounds
        .iter()
        .zip(genome)
        .map(|(spec, &g)| (spec.key.to_owned(), spec.decode(g)))
        .collect();
    for (lo, hi) in ORDERED_PAIRS {
        let find = |k: &str| values.iter().position(|(key, _)| key == k);
        if let (Some(a), Some(b)) = (find(lo), find(hi)) {
            if values[b].1 < values[a].1 {
                values[b].1 = values[a].1;
            }
        }
    }
    values
}

/// Reads the genome that decodes to `config`'s current values.
pub fn encode_genome(config: &RunConfig, bounds: &[GeneSpec]) -> Vec<f64> {
    let echo = config.echo();
    bounds
        .iter()
        .map(|spec| {
            let v = echo
                .iter()
                .find(|(k, _)| k == spec.key)
                .and_then(|(_, v)| v.parse::<f64>().ok())
                .unwrap_or(spec.min);
            spec.encode(v)
        })
        .collect()
}

pub fn apply_overrides(base: &RunConfig, overrides: &[(String, f64)]) -> Result<RunConfig, ConfigError> {
    let mut cfg = base.clone();
    for (key, value) in overrides {
        let text = if value.fract() == 0.0 && value.abs() < 1e15 {
            format!("{}", *value as i64)
        } else {
            value.to_string()
        };
        // Integer keys reject "1.5"; real keys accept "2".
        cfg.set(key, &text)?;
    }
    Ok(cfg)
}

/// The configuration a genome is evaluated under: decoded genes plus the
/// GA's movement budget.
pub fn genome_config(base: &RunConfig, genome: &[f64], bounds: &[GeneSpec]) -> Result<RunConfig, ConfigError> {
    let mut cfg = apply_overrides(base, &decode_genome(genome, bounds))?;
    cfg.world.agent.movement_budget = base.ga.movement_budget;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitnessReport {
    pub fitness: f64,
    /// Interaction count per evaluation seed.
    pub interactions: Vec<u64>,
    /// Largest per-agent move count per evaluation seed.
    pub max_moves: Vec<u64>,
}

impl FitnessReport {
    fn failed() -> Self {
        Self {
            fitness: f64::NEG_INFINITY,
            interactions: Vec::new(),
            max_moves: Vec::new(),
        }
    }
}

/// Called once per evaluated trace with the genome and seed that produced it.
pub type TraceHook<'h> = &'h (dyn Fn(&[f64], u64, &SimulationTrace) + Sync);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    /// Worker count; 0 lets rayon choose.
    Threads(usize),
}

#[derive(Clone, Copy)]
pub struct Evaluator<'h> {
    pub parallelism: Parallelism,
    pub hook: Option<TraceHook<'h>>,
}

impl Default for Evaluator<'_> {
    fn default() -> Self {
        Self {
            parallelism: Parallelism::Sequential,
            hook: None,
        }
    }
}

/// Runs the genome once per evaluation seed. Configurations the simulator
/// rejects score `−∞`.
pub fn fitness(base: &RunConfig, bounds: &[GeneSpec], genome: &[f64], hook: Option<TraceHook<'_>>) -> FitnessReport {
    let Ok(cfg) = genome_config(base, genome, bounds) else {
        return FitnessReport::failed();
    };
    let mut interactions = Vec::with_capacity(base.ga.eval_seeds.len());
    let mut max_moves = Vec::with_capacity(base.ga.eval_seeds.len());
    for &s in &base.ga.eval_seeds {
        let mut world_cfg = cfg.world.clone();
        world_cfg.master_seed = s;
        let Ok(trace) = world::run(&world_cfg) else {
            return FitnessReport::failed();
        };
        if let Some(hook) = hook {
            hook(genome, s, &trace);
        }
        let m = metrics(&trace);
        interactions.push(m.interactions);
        max_moves.push(m.max_moves());
    }
    let mut f = interactions.iter().sum::<u64>() as f64 / interactions.len() as f64;
    if base.ga.normalize_fitness {
        let n = cfg.world.n_agents as f64;
        let denom = cfg.world.total_ticks as f64 * n * (n - 1.0) / 2.0;
        f = if denom > 0.0 { f / denom } else { 0.0 };
    }
    FitnessReport {
        fitness: f,
        interactions,
        max_moves,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genome: Vec<f64>,
    pub report: FitnessReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    pub best_genome: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaResult {
    /// One entry per generation, starting with the initial population.
    pub history: Vec<GenerationStats>,
    pub best: Individual,
    pub best_config: RunConfig,
    pub final_population: Vec<Individual>,
    pub evaluations: usize,
}

impl GaResult {
    pub fn history_csv(&self, bounds: &[GeneSpec]) -> String {
        let mut out = String::from("generation,best_fitness,mean_fitness");
        for spec in bounds {
            let _ = write!(out, ",{}", spec.key);
        }
        out.push('\n');
        for g in &self.history {
            let _ = write!(out, "{},{},{}", g.generation, g.best, g.mean);
            for (_, v) in decode_genome(&g.best_genome, bounds) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

fn evaluate_all(
    base: &RunConfig,
    bounds: &[GeneSpec],
    genomes: Vec<Vec<f64>>,
    evaluator: &Evaluator<'_>,
    pool: Option<&rayon::ThreadPool>,
) -> Vec<Individual> {
    let eval = |genome: Vec<f64>| {
        let report = fitness(base, bounds, &genome, evaluator.hook);
        Individual { genome, report }
    };
    match pool {
        Some(pool) => pool.install(|| genomes.into_par_iter().map(eval).collect()),
        None => genomes.into_iter().map(eval).collect(),
    }
}

fn ranked(pop: &[Individual]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pop.len()).collect();
    order.sort_by(|&a, &b| pop[b].report.fitness.total_cmp(&pop[a].report.fitness).then(a.cmp(&b)));
    order
}

fn stats(generation: usize, pop: &[Individual]) -> GenerationStats {
    let best = &pop[ranked(pop)[0]];
    let finite: Vec<f64> = pop.iter().map(|i| i.report.fitness).filter(|f| f.is_finite()).collect();
    let mean = if finite.len() == pop.len() {
        finite.iter().sum::<f64>() / finite.len() as f64
    } else {
        f64::NEG_INFINITY
    };
    GenerationStats {
        generation,
        best: best.report.fitness,
        mean,
        best_genome: best.genome.clone(),
    }
}

fn tournament<'p>(pop: &'p [Individual], size: usize, rng: &mut SimRng) -> &'p Individual {
    let mut winner = rng.random_range(0..pop.len());
    for _ in 1..size {
        let c = rng.random_range(0..pop.len());
        if pop[c].report.fitness > pop[winner].report.fitness {
            winner = c;
        }
    }
    &pop[winner]
}

/// Evolves `base`'s parameters for `base.ga.generations` generations.
///
/// All random draws happen on one stream between evaluation batches, so the
/// outcome does not depend on [`Parallelism`]. Elites keep their cached
/// fitness, which makes the best fitness non-decreasing.
pub fn evolve(base: &RunConfig, bounds: &[GeneSpec], evaluator: &Evaluator<'_>) -> Result<GaResult, OptimizerError> {
    let ga = &base.ga;
    base.validate()?;
    let pool = match evaluator.parallelism {
        Parallelism::Sequential => None,
        Parallelism::Threads(n) => Some(rayon::ThreadPoolBuilder::new().num_threads(n).build()?),
    };
    let mut rng = seed::stream(ga.seed, "ga", &[]);
    let mutation = Normal::new(0.0, ga.mutation_sigma).map_err(|e| ConfigError::invalid("ga.mutation_sigma", e.to_string()))?;

    let initial: Vec<Vec<f64>> = (0..ga.population_size)
        .map(|_| (0..bounds.len()).map(|_| rng.random::<f64>()).collect())
        .collect();
    let mut evaluations = initial.len();
    let mut pop = evaluate_all(base, bounds, initial, evaluator, pool.as_ref());
    let mut history = vec![stats(0, &pop)];

    for generation in 1..=ga.generations {
        let order = ranked(&pop);
        let mut next: Vec<Individual> = order[..ga.elite_count].iter().map(|&k| pop[k].clone()).collect();
        let mut children = Vec::with_capacity(ga.population_size - ga.elite_count);
        for _ in ga.elite_count..ga.population_size {
            let a = tournament(&pop, ga.tournament_size, &mut rng);
            let b = tournament(&pop, ga.tournament_size, &mut rng);
            let mut child = if rng.random::<f64>() < ga.crossover_rate {
                a.genome
                    .iter()
                    .zip(&b.genome)
                    .map(|(&x, &y)| if rng.random::<bool>() { x } else { y })
                    .collect()
            } else {
                a.genome.clone()
            };
            for g in &mut child {
                if rng.random::<f64>() < ga.mutation_rate {
                    *g = (*g + mutation.sample(&mut rng)).clamp(0.0, 1.0);
                }
            }
            children.push(child);
        }
        evaluations += children.len();
        next.extend(evaluate_all(base, bounds, children, evaluator, pool.as_ref()));
        pop = next;
        history.push(stats(generation, &pop));
    }

    let best = pop[ranked(&pop)[0]].clone();
    let best_config = genome_config(base, &best.genome, bounds).unwrap_or_else(|_| base.clone());
    Ok(GaResult {
        history,
        best,
        best_config,
        final_population: pop,
        evaluations,
    })
}
