//! Emotion state and its update rules.
//!
//! Five components live in `[0, 1]`: happiness, curiosity, friendship,
//! courage and fatigue. Sadness, boredom, solitude and fear are their
//! complements and are not stored. Every update clamps.

use rand::Rng;

use crate::config::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmotionState {
    pub happiness: f64,
    pub curiosity: f64,
    pub friendship: f64,
    pub courage: f64,
    pub fatigue: f64,
}

impl Default for EmotionState {
    fn default() -> Self {
        Self {
            happiness: 0.5,
            curiosity: 0.5,
            friendship: 0.5,
            courage: 0.5,
            fatigue: 0.0,
        }
    }
}

impl EmotionState {
    pub fn components(&self) -> [f64; 5] {
        [self.happiness, self.curiosity, self.friendship, self.courage, self.fatigue]
    }

    fn clamp(mut self) -> Self {
        for v in [
            &mut self.happiness,
            &mut self.curiosity,
            &mut self.friendship,
            &mut self.courage,
            &mut self.fatigue,
        ] {
            *v = v.clamp(0.0, 1.0);
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmotionParams {
    pub delta_lower: f64,
    pub delta_upper: f64,
    /// Fatigue added per awake tick at full happiness.
    pub fatigue_tick: f64,
    /// Signed fatigue effect of a photo: its negative part applies to
    /// rewarding photos, its positive part to unrewarding ones.
    pub photo_fatigue_delta: f64,
    pub sleep_decay: f64,
    /// Sleep threshold φ for the stochastic fatigue draw.
    pub threshold: f64,
    pub courage_gain: f64,
    pub valence_high: f64,
    pub valence_low: f64,
    /// Field value above which a photo or a received percept counts as rewarding.
    pub high_value_cutoff: f64,
    /// Curiosity growth per awake tick.
    pub curiosity_growth: f64,
}

impl Default for EmotionParams {
    fn default() -> Self {
        Self {
            delta_lower: 0.01,
            delta_upper: 0.05,
            fatigue_tick: 0.005,
            photo_fatigue_delta: -0.02,
            sleep_decay: 0.05,
            threshold: 0.8,
            courage_gain: 0.5,
            valence_high: 0.5,
            valence_low: -0.5,
            high_value_cutoff: 0.0,
            curiosity_growth: 0.001,
        }
    }
}

impl EmotionParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |ok: bool, key: &str, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::invalid(key, msg))
            }
        };
        check(
            0.0 <= self.delta_lower && self.delta_lower <= self.delta_upper && self.delta_upper <= 1.0,
            "emotion.delta_lower",
            "need 0 <= delta_lower <= delta_upper <= 1",
        )?;
        check((0.0..=1.0).contains(&self.threshold), "emotion.threshold", "must be in [0, 1]")?;
        check(self.fatigue_tick >= 0.0, "emotion.fatigue_tick", "must be >= 0")?;
        check(self.sleep_decay >= 0.0, "emotion.sleep_decay", "must be >= 0")?;
        check(self.courage_gain >= 0.0, "emotion.courage_gain", "must be >= 0")?;
        check(self.curiosity_growth >= 0.0, "emotion.curiosity_growth", "must be >= 0")?;
        check(self.photo_fatigue_delta.is_finite(), "emotion.photo_fatigue_delta", "must be finite")?;
        check(self.high_value_cutoff.is_finite(), "emotion.high_value_cutoff", "must be finite")?;
        check(
            self.valence_low <= self.valence_high,
            "emotion.valence_low",
            "must not exceed emotion.valence_high",
        )
    }

    fn draw_delta<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rng.random_range(self.delta_lower..=self.delta_upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EmotionEvent {
    /// Field value at the photographed cell, before penalization.
    PhotoTaken { field_value: f64 },
    DreamFrame { valence: i8 },
    /// Receiver's own field value at the exchanged percept's origin.
    Interaction { evaluation: f64 },
    ContentStimulus { score: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Awake,
    Asleep,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Awake => "awake",
            Mode::Asleep => "asleep",
        }
    }
}

fn signum(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Applies one event. Each increment δ is an independent draw from
/// `U[delta_lower, delta_upper]`.
pub fn apply_event<R: Rng + ?Sized>(
    state: EmotionState,
    event: EmotionEvent,
    params: &EmotionParams,
    rng: &mut R,
) -> EmotionState {
    let mut next = state;
    match event {
        EmotionEvent::PhotoTaken { field_value } => {
            let delta = params.draw_delta(rng);
            if field_value > params.high_value_cutoff {
                next.happiness += delta;
                next.fatigue += params.photo_fatigue_delta.min(0.0);
            } else {
                next.happiness -= delta;
                next.fatigue += params.photo_fatigue_delta.max(0.0);
            }
        }
        EmotionEvent::DreamFrame { valence } => {
            let v = f64::from(valence.signum());
            next.happiness += v * params.draw_delta(rng);
            next.courage += v * params.draw_delta(rng);
        }
        EmotionEvent::Interaction { evaluation } => {
            let sign = if evaluation > params.high_value_cutoff { 1.0 } else { -1.0 };
            next.friendship += sign * params.draw_delta(rng);
            next.happiness += sign * params.draw_delta(rng);
        }
        EmotionEvent::ContentStimulus { score } => {
            next.curiosity -= params.draw_delta(rng);
            next.happiness += signum(score) * params.draw_delta(rng);
        }
    }
    next.clamp()
}

/// Time passing. Awake fatigue grows faster when sad: `fatigue_tick·(2 − e_h)`.
pub fn tick_emotions(state: EmotionState, params: &EmotionParams, mode: Mode) -> EmotionState {
    let mut next = state;
    match mode {
        Mode::Awake => {
            next.fatigue += params.fatigue_tick * (1.0 + (1.0 - state.happiness));
            next.curiosity += params.curiosity_growth;
        }
        Mode::Asleep => next.fatigue -= params.sleep_decay,
    }
    next.clamp()
}

/// Dream step bounds scaled by courage, `1 + κ·(2·e_k − 1)`.
///
/// Both bounds are rounded and kept non-negative with `lower <= upper`. A base
/// upper bound of at least one never scales below one, so a fearful agent
/// still dreams.
pub fn effective_step_bounds(state: &EmotionState, base: (u32, u32), courage_gain: f64) -> (u32, u32) {
    let scale = 1.0 + courage_gain * (2.0 * state.courage - 1.0);
    let scaled = |b: u32| (f64::from(b) * scale).round().max(0.0) as u32;
    let lower = scaled(base.0);
    let upper = scaled(base.1).max(base.1.min(1)).max(lower);
    (lower, upper)
}

/// Hard cap at `awake_limit` ticks; below it, sleep when `U[0, fatigue] > φ`.
pub fn should_sleep<R: Rng + ?Sized>(
    state: &EmotionState,
    ticks_awake: u64,
    awake_limit: u64,
    params: &EmotionParams,
    rng: &mut R,
) -> bool {
    if ticks_awake >= awake_limit {
        return true;
    }
    let draw = state.fatigue * rng.random::<f64>();
    draw > params.threshold
}
