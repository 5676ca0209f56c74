//! Deterministic multi-agent simulator.
//!
//! Agents roam a grid guided by private importance fields sampled from a
//! Gaussian process, take photos that get classified on a semantic graph,
//! dream by random-walking that graph while asleep, carry a small vector of
//! emotions, and swap percepts when two of them meet. A genetic algorithm
//! tunes the run parameters to maximise the number of such meetings.
//!
//! Everything is seeded: the same configuration always yields the same
//! trace, byte for byte.

pub mod agent;
pub mod config;
pub mod dream;
pub mod emotion;
pub mod field;
pub mod optimizer;
pub mod percept_log;
pub mod seed;
pub mod semantic;
pub mod trace;
pub mod world;

pub use agent::{Agent, AgentConfig};
pub use config::{parse_config, ConfigError, RunConfig};
pub use emotion::{EmotionParams, EmotionState, Mode};
pub use field::{FieldSampler, GridCell, KernelConfig, ValueField};
pub use optimizer::{default_bounds, evolve, Evaluator, GaConfig, GaResult, Parallelism};
pub use semantic::{PerceptId, SemanticGraph};
pub use trace::{metrics, Metrics, SimulationTrace};
pub use world::{run, SimError, World, WorldConfig};
