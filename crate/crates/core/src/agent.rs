//! The robot lifecycle: awake navigation and photography, sleep with dreams,
//! and reception of percepts shared by other agents.

use std::collections::{BTreeMap, HashSet};

use rand::Rng;

use crate::config::ConfigError;
use crate::dream::{self, Dream, DreamConfig};
use crate::emotion::{self, EmotionEvent, EmotionParams, EmotionState, Mode};
use crate::field::{GridCell, KernelConfig, ValueField};
use crate::seed::SimRng;
use crate::semantic::{Percept, PerceptId, PerceptKind, PerceptStore, SemanticGraph};
use crate::trace::TraceEvent;
use crate::world::{CellFeatures, ContentStimulus};

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    /// Maximum consecutive awake ticks.
    pub awake_ticks: u64,
    /// Ticks per sleep, one dream frame each.
    pub asleep_ticks: u64,
    /// Awake ticks between photo decisions.
    pub photo_period: u64,
    /// Probability of a random Moore step instead of steepest ascent.
    pub explore_rate: f64,
    /// Lifetime move budget.
    pub movement_budget: u64,
    /// Penalization bump applied where a photo is taken; must be negative.
    pub visit_peak: f64,
    pub visit_width: f64,
    /// Magnitude of the bump a received percept leaves at its origin.
    pub visit_reward: f64,
    /// Extra penalization per unit of curiosity where a photo is taken.
    pub curiosity_peak: f64,
    /// Every n-th photo is also kept as a style percept (0 disables).
    pub style_every: u64,
    /// Field noise added on waking.
    pub noise_sigma: f64,
    /// Below this happiness every move costs an extra `fatigue_tick`.
    pub low_happiness: f64,
    pub dream: DreamConfig,
    pub emotion: EmotionParams,
    pub kernel: KernelConfig,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            awake_ticks: 120,
            asleep_ticks: 20,
            photo_period: 4,
            explore_rate: 0.3,
            movement_budget: 100_000,
            visit_peak: -0.5,
            visit_width: 1.0,
            visit_reward: 0.3,
            curiosity_peak: 0.2,
            style_every: 5,
            noise_sigma: 0.05,
            low_happiness: 0.2,
            dream: DreamConfig::default(),
            emotion: EmotionParams::default(),
            kernel: KernelConfig::default(),
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |ok: bool, key: &str, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::invalid(key, msg))
            }
        };
        check(self.awake_ticks >= 1, "agent.awake_ticks", "must be >= 1")?;
        check(self.asleep_ticks >= 1, "agent.asleep_ticks", "must be >= 1")?;
        check(self.photo_period >= 1, "agent.photo_period", "must be >= 1")?;
        check(
            (0.0..=1.0).contains(&self.explore_rate),
            "agent.explore_rate",
            "must be in [0, 1]",
        )?;
        check(
            self.visit_peak < 0.0 && self.visit_peak.is_finite(),
            "agent.visit_peak",
            "must be negative",
        )?;
        check(self.visit_width > 0.0, "agent.visit_width", "must be > 0")?;
        check(self.visit_reward >= 0.0, "agent.visit_reward", "must be >= 0")?;
        check(self.curiosity_peak >= 0.0, "agent.curiosity_peak", "must be >= 0")?;
        check(self.noise_sigma >= 0.0, "agent.noise_sigma", "must be >= 0")?;
        check(
            (0.0..=1.0).contains(&self.low_happiness),
            "agent.low_happiness",
            "must be in [0, 1]",
        )?;
        check(
            self.dream.step_lower <= self.dream.step_upper,
            "dream.step_lower",
            "must not exceed dream.step_upper",
        )?;
        check(
            (0.0..=1.0).contains(&self.dream.style_weight),
            "dream.style_weight",
            "must be in [0, 1]",
        )?;
        self.emotion.validate()?;
        self.kernel.validate().map_err(|e| {
            let key = if self.kernel.amplitude <= 0.0 {
                "kernel.amplitude"
            } else if self.kernel.lengthscale <= 0.0 {
                "kernel.lengthscale"
            } else {
                "kernel.jitter"
            };
            ConfigError::invalid(key, e.to_string())
        })
    }
}

/// Read-only view of the shared environment during an agent's tick.
#[derive(Clone, Copy)]
pub struct Surroundings<'w> {
    pub content_graph: &'w SemanticGraph,
    pub style_graph: &'w SemanticGraph,
    pub cell_features: &'w CellFeatures,
    pub stimuli: &'w BTreeMap<GridCell, ContentStimulus>,
}

#[derive(Debug, Clone)]
pub struct Agent {
    id: usize,
    config: AgentConfig,
    position: GridCell,
    mode: Mode,
    ticks_in_mode: u64,
    field: ValueField,
    emotions: EmotionState,
    percepts: PerceptStore,
    styles: PerceptStore,
    dreamed: PerceptStore,
    dreams: Vec<Dream>,
    moves_used: u64,
    photos_taken: u64,
    next_sequence: u64,
    latest_own: Option<Percept>,
    consumed_stimuli: HashSet<GridCell>,
    rng: SimRng,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Agent {
    pub fn new(id: usize, config: AgentConfig, field: ValueField, position: GridCell, rng: SimRng) -> Self {
        assert!(field.contains(position), "start {position} outside field");
        Self {
            id,
            config,
            position,
            mode: Mode::Awake,
            ticks_in_mode: 0,
            field,
            emotions: EmotionState::default(),
            percepts: PerceptStore::new(),
            styles: PerceptStore::new(),
            dreamed: PerceptStore::new(),
            dreams: Vec::new(),
            moves_used: 0,
            photos_taken: 0,
            next_sequence: 0,
            latest_own: None,
            consumed_stimuli: HashSet::new(),
            rng,
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn position(&self) -> GridCell {
        self.position
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn ticks_in_mode(&self) -> u64 {
        self.ticks_in_mode
    }

    pub fn field(&self) -> &ValueField {
        &self.field
    }

    pub fn field_mut(&mut self) -> &mut ValueField {
        &mut self.field
    }

    pub fn emotions(&self) -> &EmotionState {
        &self.emotions
    }

    pub fn set_emotions(&mut self, emotions: EmotionState) {
        self.emotions = emotions;
    }

    /// Observed and received percepts; the content store for dreaming.
    pub fn percepts(&self) -> &PerceptStore {
        &self.percepts
    }

    pub fn styles(&self) -> &PerceptStore {
        &self.styles
    }

    pub fn dreamed(&self) -> &PerceptStore {
        &self.dreamed
    }

    pub fn dreams(&self) -> &[Dream] {
        &self.dreams
    }

    pub fn moves_used(&self) -> u64 {
        self.moves_used
    }

    /// Most recent percept this agent produced itself (photo or dream frame).
    pub fn latest_own(&self) -> Option<&Percept> {
        self.latest_own.as_ref()
    }

    pub fn knows(&self, id: PerceptId) -> bool {
        self.percepts.contains(id) || self.styles.contains(id) || self.dreamed.contains(id)
    }

    fn next_id(&mut self) -> PerceptId {
        let id = PerceptId::compose(self.id, self.next_sequence);
        self.next_sequence += 1;
        id
    }

    /// One move: a uniform random Moore step with probability `explore_rate`,
    /// otherwise steepest ascent on the agent's own field. Returns the
    /// previous position if the agent moved.
    pub fn navigate_step(&mut self) -> Option<GridCell> {
        if self.moves_used >= self.config.movement_budget {
            return None;
        }
        let explore = self.rng.random::<f64>() < self.config.explore_rate;
        let target = if explore {
            let options: Vec<GridCell> = self.position.neighbors(self.field.resolution()).collect();
            options[self.rng.random_range(0..options.len())]
        } else {
            self.field.steepest_neighbor(self.position)
        };
        if target == self.position {
            return None;
        }
        let from = self.position;
        self.position = target;
        self.moves_used += 1;
        if self.emotions.happiness < self.config.low_happiness {
            self.emotions.fatigue = (self.emotions.fatigue + self.config.emotion.fatigue_tick).min(1.0);
        }
        Some(from)
    }

    /// Photo decision, taken only when the awake counter is a multiple of
    /// `photo_period`, with probability `logistic(field value)`.
    pub fn maybe_take_photo(&mut self, env: Surroundings<'_>, tick: u64, events: &mut Vec<TraceEvent>) -> Option<Percept> {
        if self.mode != Mode::Awake || !self.ticks_in_mode.is_multiple_of(self.config.photo_period) {
            return None;
        }
        let value = self.field.get(self.position);
        if self.rng.random::<f64>() >= logistic(value) {
            return None;
        }
        let features = env.cell_features.at(self.position);
        let category = env
            .content_graph
            .classify(&features)
            .expect("feature dimension fixed at world build")
            .to_owned();
        let id = self.next_id();
        let percept = Percept {
            id,
            features,
            category: category.clone(),
            origin: self.position,
            tick,
            kind: PerceptKind::Observed,
        };
        self.percepts.attach(percept.clone());
        self.latest_own = Some(percept.clone());
        self.photos_taken += 1;
        events.push(TraceEvent::Photo { id, category });

        if self.config.style_every > 0 && self.photos_taken.is_multiple_of(self.config.style_every) {
            let style_category = env
                .style_graph
                .classify(&percept.features)
                .expect("feature dimension fixed at world build")
                .to_owned();
            let style_id = self.next_id();
            self.styles.attach(Percept {
                id: style_id,
                category: style_category.clone(),
                kind: PerceptKind::Style,
                ..percept.clone()
            });
            events.push(TraceEvent::Style {
                id: style_id,
                category: style_category,
            });
        }

        let width = self.config.visit_width;
        self.field
            .local_bump(self.position, self.config.visit_peak, width)
            .expect("validated bump parameters");
        self.emotions = emotion::apply_event(
            self.emotions,
            EmotionEvent::PhotoTaken { field_value: value },
            &self.config.emotion,
            &mut self.rng,
        );
        let curiosity_penalty = -self.config.curiosity_peak * self.emotions.curiosity;
        if curiosity_penalty != 0.0 {
            self.field
                .local_bump(self.position, curiosity_penalty, width)
                .expect("validated bump parameters");
        }
        Some(percept)
    }

    /// Takes in a percept shared by another agent. Returns the agent's own
    /// field evaluation at the percept's origin, or `None` for a known id.
    pub fn receive_percept(&mut self, mut percept: Percept) -> Option<f64> {
        if self.knows(percept.id) {
            return None;
        }
        let evaluation = self.field.get(percept.origin);
        self.emotions = emotion::apply_event(
            self.emotions,
            EmotionEvent::Interaction { evaluation },
            &self.config.emotion,
            &mut self.rng,
        );
        let peak = if evaluation > self.config.emotion.high_value_cutoff {
            self.config.visit_reward
        } else {
            -self.config.visit_reward
        };
        self.field
            .local_bump(percept.origin, peak, self.config.visit_width)
            .expect("validated bump parameters");
        percept.kind = PerceptKind::Received;
        self.percepts.attach(percept);
        Some(evaluation)
    }

    /// Advances the agent by one tick and returns what happened.
    pub fn tick(&mut self, env: Surroundings<'_>, tick: u64) -> Vec<TraceEvent> {
        let mut events = Vec::new();
        self.ticks_in_mode += 1;
        match self.mode {
            Mode::Awake => self.awake_tick(env, tick, &mut events),
            Mode::Asleep => self.asleep_tick(tick, &mut events),
        }
        events
    }

    fn awake_tick(&mut self, env: Surroundings<'_>, tick: u64, events: &mut Vec<TraceEvent>) {
        if self.navigate_step().is_some() {
            events.push(TraceEvent::Move);
        }
        self.maybe_take_photo(env, tick, events);

        if let Some(stimulus) = env.stimuli.get(&self.position) {
            if self.consumed_stimuli.insert(self.position) {
                self.emotions = emotion::apply_event(
                    self.emotions,
                    EmotionEvent::ContentStimulus { score: stimulus.score },
                    &self.config.emotion,
                    &mut self.rng,
                );
                events.push(TraceEvent::Stimulus {
                    modality: stimulus.modality,
                    score: stimulus.score,
                });
            }
        }

        self.emotions = emotion::tick_emotions(self.emotions, &self.config.emotion, Mode::Awake);
        if emotion::should_sleep(
            &self.emotions,
            self.ticks_in_mode,
            self.config.awake_ticks,
            &self.config.emotion,
            &mut self.rng,
        ) {
            self.fall_asleep(env, tick, events);
        }
    }

    fn fall_asleep(&mut self, env: Surroundings<'_>, tick: u64, events: &mut Vec<TraceEvent>) {
        self.mode = Mode::Asleep;
        self.ticks_in_mode = 0;
        events.push(TraceEvent::Sleep);

        let (step_lower, step_upper) = emotion::effective_step_bounds(
            &self.emotions,
            (self.config.dream.step_lower, self.config.dream.step_upper),
            self.config.emotion.courage_gain,
        );
        let config = DreamConfig {
            step_lower,
            step_upper,
            length: self.config.asleep_ticks as usize,
            style_weight: self.config.dream.style_weight,
        };
        match dream::dream(
            &self.percepts,
            env.content_graph,
            &self.styles,
            env.style_graph,
            &config,
            tick + 1,
            &mut self.rng,
        ) {
            Ok(d) => self.dreams.push(d),
            Err(_) => events.push(TraceEvent::Dreamless),
        }
    }

    fn asleep_tick(&mut self, tick: u64, events: &mut Vec<TraceEvent>) {
        let frame_index = (self.ticks_in_mode - 1) as usize;
        let frame = self
            .dreams
            .last()
            .filter(|d| d.start_tick + frame_index as u64 == tick)
            .and_then(|d| d.frames.get(frame_index))
            .cloned();
        if let Some(frame) = frame {
            let params = &self.config.emotion;
            let valence = dream::dream_valence(&frame, &self.field, params.valence_high, params.valence_low)
                .expect("validated valence thresholds");
            self.emotions = emotion::apply_event(
                self.emotions,
                EmotionEvent::DreamFrame { valence },
                params,
                &mut self.rng,
            );
            let id = self.next_id();
            let percept = Percept {
                id,
                features: frame.features.clone(),
                category: frame.content_category.clone(),
                origin: frame.content_origin,
                tick,
                kind: PerceptKind::Dreamed,
            };
            self.dreamed.attach(percept.clone());
            self.latest_own = Some(percept);
            events.push(TraceEvent::Dream {
                id,
                content_category: frame.content_category,
                style_category: frame.style_category,
                origin: frame.content_origin,
                valence,
                pair_distance: frame.pair_distance,
                content_step: frame.content_step,
                style_step: frame.style_step,
            });
        }

        self.emotions = emotion::tick_emotions(self.emotions, &self.config.emotion, Mode::Asleep);
        if self.ticks_in_mode >= self.config.asleep_ticks {
            self.wake();
            events.push(TraceEvent::Wake);
        }
    }

    fn wake(&mut self) {
        self.mode = Mode::Awake;
        self.ticks_in_mode = 0;
        self.field
            .contaminate(self.config.noise_sigma, &mut self.rng)
            .expect("validated noise sigma");
    }
}
