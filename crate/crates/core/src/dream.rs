//! Dream generation by parallel random walks over the content and style graphs.
//!
//! Each frame advances an independent walk on both graphs by a uniformly drawn
//! number of hops, picks a stored percept at (or nearest to) each walked-to
//! category and blends the two feature vectors convexly.

use rand::Rng;
use thiserror::Error;

use crate::field::{GridCell, ValueField};
use crate::semantic::{GraphError, Percept, PerceptId, PerceptStore, SemanticDistance, SemanticGraph};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DreamError {
    #[error("invalid dream config: {0}")]
    Config(String),
    #[error("no {0} percepts to dream from")]
    NoPercepts(&'static str),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DreamConfig {
    pub step_lower: u32,
    pub step_upper: u32,
    /// Frames per dream.
    pub length: usize,
    /// Weight of the style percept in the blend, in `[0, 1]`.
    pub style_weight: f64,
}

impl Default for DreamConfig {
    fn default() -> Self {
        Self {
            step_lower: 1,
            step_upper: 3,
            length: 10,
            style_weight: 0.3,
        }
    }
}

impl DreamConfig {
    pub fn validate(&self) -> Result<(), DreamError> {
        if self.step_lower > self.step_upper {
            return Err(DreamError::Config(format!(
                "step_lower {} exceeds step_upper {}",
                self.step_lower, self.step_upper
            )));
        }
        check_weight(self.style_weight)
    }
}

fn check_weight(weight: f64) -> Result<(), DreamError> {
    if (0.0..=1.0).contains(&weight) {
        Ok(())
    } else {
        Err(DreamError::Config(format!("style_weight must be in [0, 1], got {weight}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DreamFrame {
    pub features: Vec<f64>,
    /// Category reached by the content walk.
    pub content_category: String,
    /// Category reached by the style walk.
    pub style_category: String,
    pub content_origin: GridCell,
    pub content_source: PerceptId,
    pub style_source: PerceptId,
    pub content_step: u32,
    pub style_step: u32,
    /// Content-graph distance from the previous content category.
    pub pair_distance: SemanticDistance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dream {
    pub start_tick: u64,
    pub initial_content: String,
    pub initial_style: String,
    pub frames: Vec<DreamFrame>,
}

/// Step size ω drawn uniformly from the integers `[step_lower, step_upper]`.
pub fn sample_step_size<R: Rng + ?Sized>(config: &DreamConfig, rng: &mut R) -> Result<u32, DreamError> {
    config.validate()?;
    Ok(rng.random_range(config.step_lower..=config.step_upper))
}

/// Performs `steps` uniform neighbour hops. Isolated nodes stay put.
pub fn walk_step<'g, R: Rng + ?Sized>(
    graph: &'g SemanticGraph,
    current: &str,
    steps: u32,
    rng: &mut R,
) -> Result<&'g str, GraphError> {
    let mut node = graph.node(current)?;
    for _ in 0..steps {
        let neighbors = graph.neighbors(node)?;
        if neighbors.is_empty() {
            break;
        }
        node = neighbors[rng.random_range(0..neighbors.len())];
    }
    Ok(node)
}

/// Convex combination `(1 − λ)·content + λ·style`.
pub fn blend(content: &Percept, style: &Percept, style_weight: f64) -> Result<DreamFrame, DreamError> {
    check_weight(style_weight)?;
    if content.features.len() != style.features.len() {
        return Err(GraphError::Dimension {
            expected: content.features.len(),
            got: style.features.len(),
        }
        .into());
    }
    let features = content
        .features
        .iter()
        .zip(&style.features)
        .map(|(c, s)| (1.0 - style_weight) * c + style_weight * s)
        .collect();
    Ok(DreamFrame {
        features,
        content_category: content.category.clone(),
        style_category: style.category.clone(),
        content_origin: content.origin,
        content_source: content.id,
        style_source: style.id,
        content_step: 0,
        style_step: 0,
        pair_distance: SemanticDistance::Hops(0),
    })
}

/// Uniform pick among percepts stored under `category`, falling back to the
/// nearest populated category (ties by name).
fn pick_percept<'s, R: Rng + ?Sized>(
    store: &'s PerceptStore,
    graph: &SemanticGraph,
    category: &str,
    rng: &mut R,
) -> Result<&'s Percept, DreamError> {
    let target = if store.count_in(category) > 0 {
        category.to_owned()
    } else {
        let dist = graph.distances_from(category)?;
        let distance_to = |name: &str| {
            graph
                .index_of(name)
                .map_or(SemanticDistance::Unreachable, |k| dist[k])
        };
        store
            .categories()
            .map(|c| (distance_to(c), c))
            .min()
            .map(|(_, c)| c.to_owned())
            .ok_or(DreamError::NoPercepts("stored"))?
    };
    let count = store.count_in(&target);
    let k = rng.random_range(0..count);
    Ok(store.in_category(&target).nth(k).expect("index within category"))
}

fn initial_category<'s, R: Rng + ?Sized>(
    store: &'s PerceptStore,
    graph: &SemanticGraph,
    what: &'static str,
    rng: &mut R,
) -> Result<&'s str, DreamError> {
    let populated: Vec<&str> = store.categories().filter(|c| graph.contains(c)).collect();
    if populated.is_empty() {
        return Err(DreamError::NoPercepts(what));
    }
    Ok(populated[rng.random_range(0..populated.len())])
}

/// Generates `config.length` frames starting from uniformly chosen populated
/// categories of each store.
pub fn dream<R: Rng + ?Sized>(
    content_store: &PerceptStore,
    content_graph: &SemanticGraph,
    style_store: &PerceptStore,
    style_graph: &SemanticGraph,
    config: &DreamConfig,
    start_tick: u64,
    rng: &mut R,
) -> Result<Dream, DreamError> {
    config.validate()?;
    let initial_content = initial_category(content_store, content_graph, "content", rng)?.to_owned();
    let initial_style = initial_category(style_store, style_graph, "style", rng)?.to_owned();

    let mut content_at = initial_content.clone();
    let mut style_at = initial_style.clone();
    let mut frames = Vec::with_capacity(config.length);
    for _ in 0..config.length {
        let content_step = sample_step_size(config, rng)?;
        let style_step = sample_step_size(config, rng)?;
        let next_content = walk_step(content_graph, &content_at, content_step, rng)?;
        let next_style = walk_step(style_graph, &style_at, style_step, rng)?;
        let pair_distance = content_graph.semantic_distance(&content_at, next_content)?;

        let content = pick_percept(content_store, content_graph, next_content, rng)?;
        let style = pick_percept(style_store, style_graph, next_style, rng)?;
        let mut frame = blend(content, style, config.style_weight)?;
        frame.content_category = next_content.to_owned();
        frame.style_category = next_style.to_owned();
        frame.content_step = content_step;
        frame.style_step = style_step;
        frame.pair_distance = pair_distance;
        frames.push(frame);

        content_at = next_content.to_owned();
        style_at = next_style.to_owned();
    }
    Ok(Dream {
        start_tick,
        initial_content,
        initial_style,
        frames,
    })
}

/// `+1` above `high`, `−1` below `low`, `0` in between, judged at the
/// content percept's origin.
pub fn dream_valence(frame: &DreamFrame, field: &ValueField, high: f64, low: f64) -> Result<i8, DreamError> {
    if low > high {
        return Err(DreamError::Config(format!("valence low {low} exceeds high {high}")));
    }
    field
        .check(frame.content_origin)
        .map_err(|e| DreamError::Config(e.to_string()))?;
    let value = field.get(frame.content_origin);
    Ok(if value > high {
        1
    } else if value < low {
        -1
    } else {
        0
    })
}
