//! Category graphs, percepts and the nearest-prototype classifier.
//!
//! A [`SemanticGraph`] is an undirected category graph loaded from an edge
//! list. Each category carries a fixed prototype feature vector derived from
//! `(seed, category name)`, so every agent classifies identically and
//! reloading the same list with the same seed reproduces the prototypes.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::field::GridCell;
use crate::seed;

pub const DEFAULT_FEATURE_DIM: usize = 16;

/// Content taxonomy shipped with the crate (30 nodes, two levels).
pub const BUILTIN_CONTENT_GRAPH: &str = include_str!("../fixtures/taxonomy.txt");
/// Style network shipped with the crate.
pub const BUILTIN_STYLE_GRAPH: &str = include_str!("../fixtures/styles.txt");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("graph has no nodes")]
    Empty,
}

/// Shortest-path length in edges, or an explicit marker for disconnected pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SemanticDistance {
    Hops(usize),
    Unreachable,
}

impl SemanticDistance {
    pub fn hops(self) -> Option<usize> {
        match self {
            SemanticDistance::Hops(h) => Some(h),
            SemanticDistance::Unreachable => None,
        }
    }
}

impl fmt::Display for SemanticDistance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemanticDistance::Hops(h) => write!(f, "{h}"),
            SemanticDistance::Unreachable => f.write_str("unreachable"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticGraph {
    names: Vec<String>,
    index: HashMap<String, usize>,
    adjacency: Vec<Vec<usize>>,
    edge_count: usize,
    prototypes: Vec<Vec<f64>>,
    dim: usize,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && !name.contains([',', ';', ':', '#'])
}

impl SemanticGraph {
    /// Parses newline-delimited `nodeA nodeB` pairs. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn load(source: &str, seed: u64, dim: usize) -> Result<Self, GraphError> {
        let mut edges = Vec::new();
        for (n, raw) in source.lines().enumerate() {
            let line = n + 1;
            let text = raw.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = text.split_whitespace().collect();
            let [a, b] = parts[..] else {
                return Err(GraphError::Parse {
                    line,
                    message: format!("expected `nodeA nodeB`, got `{text}`"),
                });
            };
            if !valid_name(a) || !valid_name(b) {
                return Err(GraphError::Parse {
                    line,
                    message: "node names may not contain `,;:#`".into(),
                });
            }
            if a == b {
                return Err(GraphError::Parse {
                    line,
                    message: format!("self-loop on `{a}`"),
                });
            }
            edges.push((a, b));
        }
        Self::from_edges(&edges, seed, dim)
    }

    pub fn from_edges(edges: &[(&str, &str)], seed: u64, dim: usize) -> Result<Self, GraphError> {
        let mut graph = SemanticGraph {
            names: Vec::new(),
            index: HashMap::new(),
            adjacency: Vec::new(),
            edge_count: 0,
            prototypes: Vec::new(),
            dim,
        };
        for &(a, b) in edges {
            let ia = graph.intern(a);
            let ib = graph.intern(b);
            if ia != ib && !graph.adjacency[ia].contains(&ib) {
                graph.adjacency[ia].push(ib);
                graph.adjacency[ib].push(ia);
                graph.edge_count += 1;
            }
        }
        if graph.names.is_empty() {
            return Err(GraphError::Empty);
        }
        for adj in &mut graph.adjacency {
            adj.sort_unstable();
        }
        graph.prototypes = graph
            .names
            .iter()
            .map(|name| prototype_for(seed, name, dim))
            .collect();
        Ok(graph)
    }

    fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), i);
        self.adjacency.push(Vec::new());
        i
    }

    /// Replaces the generated prototype of `category`.
    pub fn with_prototype(mut self, category: &str, prototype: Vec<f64>) -> Result<Self, GraphError> {
        let i = self.lookup(category)?;
        if prototype.len() != self.dim {
            return Err(GraphError::Dimension {
                expected: self.dim,
                got: prototype.len(),
            });
        }
        self.prototypes[i] = prototype;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Category names in first-appearance order.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn contains(&self, category: &str) -> bool {
        self.index.contains_key(category)
    }

    /// Position of `category` in [`Self::names`].
    pub fn index_of(&self, category: &str) -> Option<usize> {
        self.index.get(category).copied()
    }

    /// The graph's own copy of a category name.
    pub fn node(&self, category: &str) -> Result<&str, GraphError> {
        Ok(&self.names[self.lookup(category)?])
    }

    fn lookup(&self, category: &str) -> Result<usize, GraphError> {
        self.index
            .get(category)
            .copied()
            .ok_or_else(|| GraphError::UnknownCategory(category.to_owned()))
    }

    pub fn neighbors(&self, category: &str) -> Result<Vec<&str>, GraphError> {
        let i = self.lookup(category)?;
        Ok(self.adjacency[i].iter().map(|&n| self.names[n].as_str()).collect())
    }

    pub fn prototype(&self, category: &str) -> Result<&[f64], GraphError> {
        Ok(&self.prototypes[self.lookup(category)?])
    }

    /// Breadth-first distances from `category` to every node, indexed like [`Self::names`].
    pub fn distances_from(&self, category: &str) -> Result<Vec<SemanticDistance>, GraphError> {
        let start = self.lookup(category)?;
        let mut dist = vec![SemanticDistance::Unreachable; self.names.len()];
        dist[start] = SemanticDistance::Hops(0);
        let mut queue = VecDeque::from([(start, 0usize)]);
        while let Some((node, d)) = queue.pop_front() {
            for &next in &self.adjacency[node] {
                if dist[next] == SemanticDistance::Unreachable {
                    dist[next] = SemanticDistance::Hops(d + 1);
                    queue.push_back((next, d + 1));
                }
            }
        }
        Ok(dist)
    }

    pub fn semantic_distance(&self, a: &str, b: &str) -> Result<SemanticDistance, GraphError> {
        let target = self.lookup(b)?;
        Ok(self.distances_from(a)?[target])
    }

    /// Nearest prototype by Euclidean distance; ties go to the
    /// lexicographically smallest category name.
    pub fn classify(&self, features: &[f64]) -> Result<&str, GraphError> {
        if features.len() != self.dim {
            return Err(GraphError::Dimension {
                expected: self.dim,
                got: features.len(),
            });
        }
        let mut best: Option<(f64, &str)> = None;
        for (name, proto) in self.names.iter().zip(&self.prototypes) {
            let d2: f64 = proto.iter().zip(features).map(|(p, x)| (p - x) * (p - x)).sum();
            best = match best {
                Some((bd, bn)) if bd < d2 || (bd == d2 && bn <= name.as_str()) => Some((bd, bn)),
                _ => Some((d2, name.as_str())),
            };
        }
        best.map(|(_, n)| n).ok_or(GraphError::Empty)
    }
}

fn prototype_for(seed: u64, name: &str, dim: usize) -> Vec<f64> {
    let mut rng = seed::rng(seed::derive(seed, &[seed::fnv1a("prototype"), seed::fnv1a(name)]));
    (0..dim).map(|_| rng.random::<f64>()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PerceptId(pub u64);

impl PerceptId {
    /// Ids are unique across agents: the owner id sits in the upper 24 bits.
    pub fn compose(agent: usize, sequence: u64) -> Self {
        PerceptId(((agent as u64) << 40) | (sequence & ((1 << 40) - 1)))
    }

    pub fn owner(self) -> usize {
        (self.0 >> 40) as usize
    }
}

impl fmt::Display for PerceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PerceptKind {
    Observed,
    Style,
    Dreamed,
    Received,
}

impl PerceptKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PerceptKind::Observed => "observed",
            PerceptKind::Style => "style",
            PerceptKind::Dreamed => "dreamed",
            PerceptKind::Received => "received",
        }
    }
}

impl std::str::FromStr for PerceptKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "observed" => Ok(PerceptKind::Observed),
            "style" => Ok(PerceptKind::Style),
            "dreamed" => Ok(PerceptKind::Dreamed),
            "received" => Ok(PerceptKind::Received),
            other => Err(format!("unknown percept kind `{other}`")),
        }
    }
}

/// Abstract photo: a feature vector tagged with category, origin and time.
#[derive(Debug, Clone, PartialEq)]
pub struct Percept {
    pub id: PerceptId,
    pub features: Vec<f64>,
    pub category: String,
    pub origin: GridCell,
    pub tick: u64,
    pub kind: PerceptKind,
}

/// Insertion-ordered percept memory indexed by category.
#[derive(Debug, Clone, Default)]
pub struct PerceptStore {
    items: Vec<Percept>,
    by_category: BTreeMap<String, Vec<usize>>,
    ids: HashSet<PerceptId>,
}

impl PerceptStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `percept`; returns `false` (and changes nothing) on a duplicate id.
    pub fn attach(&mut self, percept: Percept) -> bool {
        if !self.ids.insert(percept.id) {
            return false;
        }
        self.by_category
            .entry(percept.category.clone())
            .or_default()
            .push(self.items.len());
        self.items.push(percept);
        true
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, id: PerceptId) -> bool {
        self.ids.contains(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Percept> {
        self.items.iter()
    }

    pub fn latest(&self) -> Option<&Percept> {
        self.items.last()
    }

    pub fn in_category<'a>(&'a self, category: &str) -> impl Iterator<Item = &'a Percept> + 'a {
        self.by_category
            .get(category)
            .into_iter()
            .flatten()
            .map(move |&k| &self.items[k])
    }

    pub fn count_in(&self, category: &str) -> usize {
        self.by_category.get(category).map_or(0, Vec::len)
    }

    /// Categories holding at least one percept, sorted by name.
    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.by_category.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn percept(id: u64, category: &str) -> Percept {
        Percept {
            id: PerceptId(id),
            features: vec![0.5; 4],
            category: category.into(),
            origin: GridCell::new(0, 0),
            tick: id,
            kind: PerceptKind::Observed,
        }
    }

    #[test]
    fn load_counts_and_dedup() {
        let g = SemanticGraph::load("a b\nb c\n", 1, 4).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (3, 2));
        let g = SemanticGraph::load("a b\na b\nb a\n", 1, 4).unwrap();
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn load_skips_comments_and_reports_line() {
        let g = SemanticGraph::load("# header\n\na b\n", 1, 4).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(
            SemanticGraph::load("a b\nc c\n", 1, 4),
            Err(GraphError::Parse {
                line: 2,
                message: "self-loop on `c`".into()
            })
        );
        assert!(matches!(
            SemanticGraph::load("a b\nlonely\n", 1, 4),
            Err(GraphError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            SemanticGraph::load("a b c\n", 1, 4),
            Err(GraphError::Parse { line: 1, .. })
        ));
        assert_eq!(SemanticGraph::load("# nothing\n", 1, 4), Err(GraphError::Empty));
    }

    #[test]
    fn builtin_fixtures_load() {
        let content = SemanticGraph::load(BUILTIN_CONTENT_GRAPH, 0, DEFAULT_FEATURE_DIM).unwrap();
        assert_eq!(content.node_count(), 30);
        assert_eq!(content.edge_count(), 29);
        let style = SemanticGraph::load(BUILTIN_STYLE_GRAPH, 0, DEFAULT_FEATURE_DIM).unwrap();
        assert_eq!(style.node_count(), 13);
    }

    #[test]
    fn prototypes_are_seeded_and_bounded() {
        let a = SemanticGraph::load("x y\ny z\n", 5, 8).unwrap();
        let b = SemanticGraph::load("y z\nx y\n", 5, 8).unwrap();
        let c = SemanticGraph::load("x y\ny z\n", 6, 8).unwrap();
        for name in ["x", "y", "z"] {
            assert_eq!(a.prototype(name).unwrap(), b.prototype(name).unwrap());
            assert_ne!(a.prototype(name).unwrap(), c.prototype(name).unwrap());
            assert!(a.prototype(name).unwrap().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn distances() {
        let g = SemanticGraph::load("a b\nb c\nd e\n", 1, 2).unwrap();
        assert_eq!(g.semantic_distance("a", "a").unwrap(), SemanticDistance::Hops(0));
        assert_eq!(g.semantic_distance("a", "c").unwrap(), SemanticDistance::Hops(2));
        assert_eq!(g.semantic_distance("a", "e").unwrap(), SemanticDistance::Unreachable);
        assert_eq!(
            g.semantic_distance("a", "zz"),
            Err(GraphError::UnknownCategory("zz".into()))
        );
    }

    #[test]
    fn classify_exact_and_ties() {
        let g = SemanticGraph::load("dog cat\ncat ant\nant bee\n", 3, 4).unwrap();
        let dog = g.prototype("dog").unwrap().to_vec();
        assert_eq!(g.classify(&dog).unwrap(), "dog");
        assert!(matches!(g.classify(&[0.0; 3]), Err(GraphError::Dimension { .. })));

        let pair = SemanticGraph::load("bee ant\n", 3, 2)
            .unwrap()
            .with_prototype("ant", vec![0.0, 0.0])
            .unwrap()
            .with_prototype("bee", vec![2.0, 0.0])
            .unwrap();
        assert_eq!(pair.classify(&[1.0, 0.0]).unwrap(), "ant");
        assert_eq!(pair.classify(&[1.5, 0.0]).unwrap(), "bee");
    }

    #[test]
    fn store_attach_semantics() {
        let mut store = PerceptStore::new();
        assert!(store.attach(percept(1, "dog")));
        assert_eq!(store.len(), 1);
        assert!(!store.attach(percept(1, "dog")));
        assert_eq!(store.len(), 1);
        store.attach(percept(2, "dog"));
        store.attach(percept(3, "cat"));
        let ids: Vec<u64> = store.in_category("dog").map(|p| p.id.0).collect();
        assert_eq!(ids, vec![1, 2]);
        assert_eq!(store.categories().collect::<Vec<_>>(), vec!["cat", "dog"]);
        assert_eq!(store.latest().unwrap().id, PerceptId(3));
    }

    #[test]
    fn percept_id_owner() {
        let id = PerceptId::compose(7, 12345);
        assert_eq!(id.owner(), 7);
        assert_ne!(PerceptId::compose(1, 5), PerceptId::compose(2, 5));
    }
}
