//! Flat `section.key = value` configuration.
//!
//! Every tunable of a run lives under one dotted key. Blank lines and lines
//! starting with `#` are ignored, unknown keys are rejected and missing keys
//! keep their defaults. [`RunConfig::echo`] lists every effective key in
//! declaration order; feeding the echo back through [`parse_config`]
//! reproduces the same configuration.

use std::fmt::Write as _;
use std::path::PathBuf;

use thiserror::Error;

use crate::optimizer::GaConfig;
use crate::world::{GraphSource, Modality, WorldConfig};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{key}{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
pub struct ConfigError {
    pub key: String,
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn invalid(key: &str, message: impl Into<String>) -> Self {
        Self {
            key: key.to_owned(),
            line: None,
            message: message.into(),
        }
    }

    fn at(mut self, line: usize) -> Self {
        self.line = Some(line);
        self
    }
}

/// Everything a `simulate` or `optimize` run needs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub world: WorldConfig,
    pub ga: GaConfig,
}

trait ConfigValue: Sized {
    fn parse_value(text: &str) -> Result<Self, String>;
    fn render(&self) -> String;
}

macro_rules! numeric_value {
    ($($ty:ty => $what:literal),*) => {$(
        impl ConfigValue for $ty {
            fn parse_value(text: &str) -> Result<Self, String> {
                text.parse::<$ty>().map_err(|_| format!("expected {}, got `{text}`", $what))
            }
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

numeric_value!(usize => "a non-negative integer", u64 => "a non-negative integer", u32 => "a non-negative integer", bool => "`true` or `false`");

impl ConfigValue for f64 {
    fn parse_value(text: &str) -> Result<Self, String> {
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(format!("expected a finite number, got `{text}`")),
        }
    }

    fn render(&self) -> String {
        self.to_string()
    }
}

impl ConfigValue for Vec<u64> {
    fn parse_value(text: &str) -> Result<Self, String> {
        if text.is_empty() {
            return Ok(Vec::new());
        }
        text.split(';').map(|s| u64::parse_value(s.trim())).collect()
    }

    fn render(&self) -> String {
        self.iter().map(u64::to_string).collect::<Vec<_>>().join(";")
    }
}

impl ConfigValue for Vec<Modality> {
    fn parse_value(text: &str) -> Result<Self, String> {
        if text.is_empty() {
            return Ok(Vec::new());
        }
        let mut out: Vec<Modality> = Vec::new();
        for part in text.split(';') {
            let m = part.trim().parse::<Modality>()?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        Ok(out)
    }

    fn render(&self) -> String {
        self.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(";")
    }
}

impl ConfigValue for GraphSource {
    fn parse_value(text: &str) -> Result<Self, String> {
        match text {
            "" => Err("expected `builtin` or a file path".into()),
            "builtin" => Ok(GraphSource::Builtin),
            path => Ok(GraphSource::File(PathBuf::from(path))),
        }
    }

    fn render(&self) -> String {
        match self {
            GraphSource::Builtin => "builtin".into(),
            GraphSource::File(path) => path.display().to_string(),
        }
    }
}

macro_rules! config_keys {
    ($($key:literal => $($field:ident).+;)*) => {
        /// All recognised keys, in echo order.
        pub const KEYS: &[&str] = &[$($key),*];

        fn assign(cfg: &mut RunConfig, key: &str, value: &str) -> Option<Result<(), String>> {
            match key {
                $($key => Some(ConfigValue::parse_value(value).map(|v| cfg.$($field).+ = v)),)*
                _ => None,
            }
        }

        fn render_all(cfg: &RunConfig) -> Vec<(String, String)> {
            vec![$(($key.to_owned(), cfg.$($field).+.render())),*]
        }
    };
}

config_keys! {
    "world.resolution" => world.resolution;
    "world.n_agents" => world.n_agents;
    "world.total_ticks" => world.total_ticks;
    "world.reward_count" => world.reward_count;
    "world.reward_peak" => world.reward_peak;
    "world.reward_width" => world.reward_width;
    "world.stimulus_probability" => world.stimulus_probability;
    "world.modalities" => world.modalities;
    "world.feature_dim" => world.feature_dim;
    "world.graph_seed" => world.graph_seed;
    "world.content_graph" => world.content_graph;
    "world.style_graph" => world.style_graph;
    "world.master_seed" => world.master_seed;
    "kernel.amplitude" => world.agent.kernel.amplitude;
    "kernel.lengthscale" => world.agent.kernel.lengthscale;
    "kernel.jitter" => world.agent.kernel.jitter;
    "agent.awake_ticks" => world.agent.awake_ticks;
    "agent.asleep_ticks" => world.agent.asleep_ticks;
    "agent.photo_period" => world.agent.photo_period;
    "agent.explore_rate" => world.agent.explore_rate;
    "agent.movement_budget" => world.agent.movement_budget;
    "agent.visit_peak" => world.agent.visit_peak;
    "agent.visit_width" => world.agent.visit_width;
    "agent.visit_reward" => world.agent.visit_reward;
    "agent.curiosity_peak" => world.agent.curiosity_peak;
    "agent.style_every" => world.agent.style_every;
    "agent.noise_sigma" => world.agent.noise_sigma;
    "agent.low_happiness" => world.agent.low_happiness;
    "dream.step_lower" => world.agent.dream.step_lower;
    "dream.step_upper" => world.agent.dream.step_upper;
    "dream.length" => world.agent.dream.length;
    "dream.style_weight" => world.agent.dream.style_weight;
    "emotion.delta_lower" => world.agent.emotion.delta_lower;
    "emotion.delta_upper" => world.agent.emotion.delta_upper;
    "emotion.fatigue_tick" => world.agent.emotion.fatigue_tick;
    "emotion.photo_fatigue_delta" => world.agent.emotion.photo_fatigue_delta;
    "emotion.sleep_decay" => world.agent.emotion.sleep_decay;
    "emotion.threshold" => world.agent.emotion.threshold;
    "emotion.courage_gain" => world.agent.emotion.courage_gain;
    "emotion.valence_high" => world.agent.emotion.valence_high;
    "emotion.valence_low" => world.agent.emotion.valence_low;
    "emotion.high_value_cutoff" => world.agent.emotion.high_value_cutoff;
    "emotion.curiosity_growth" => world.agent.emotion.curiosity_growth;
    "ga.population_size" => ga.population_size;
    "ga.generations" => ga.generations;
    "ga.tournament_size" => ga.tournament_size;
    "ga.crossover_rate" => ga.crossover_rate;
    "ga.mutation_rate" => ga.mutation_rate;
    "ga.mutation_sigma" => ga.mutation_sigma;
    "ga.elite_count" => ga.elite_count;
    "ga.eval_seeds" => ga.eval_seeds;
    "ga.movement_budget" => ga.movement_budget;
    "ga.normalize_fitness" => ga.normalize_fitness;
    "ga.seed" => ga.seed;
}

impl RunConfig {
    /// Sets one key from its textual value without validating cross-key invariants.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match assign(self, key, value) {
            Some(Ok(())) => Ok(()),
            Some(Err(message)) => Err(ConfigError::invalid(key, message)),
            None => Err(ConfigError::invalid(key, "unknown key")),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.world.validate()?;
        self.ga.validate()
    }

    /// Every effective key and its value, in declaration order.
    pub fn echo(&self) -> Vec<(String, String)> {
        render_all(self)
    }

    /// The echo rendered in the config file format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.echo() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

/// Parses a config file, validating every key and the resulting configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut seen_at = std::collections::HashMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(ConfigError::invalid(trimmed, "expected `section.key = value`").at(line));
        };
        let (key, value) = (key.trim(), value.trim());
        cfg.set(key, value).map_err(|e| e.at(line))?;
        seen_at.insert(key.to_owned(), line);
    }
    cfg.validate().map_err(|e| match seen_at.get(&e.key) {
        Some(&line) => e.at(line),
        None => e,
    })?;
    Ok(cfg)
}
