//! Simulation traces and the metrics derived from them.
//!
//! A trace is one CSV row per `(tick, agent)` holding the agent's state at
//! the end of that tick plus everything that happened to it, encoded in the
//! `event` column. Tick 0 rows record initial placement. The effective
//! configuration is echoed above the header as `# key = value` comment lines,
//! so a trace file is self-describing:
//!
//! ```text
//! # world.master_seed = 7
//! ...
//! tick,agent_id,i,j,mode,e_h,e_c,e_f,e_k,fatigue,field_value,event
//! 0,0,3,9,awake,0.5,0.5,0.5,0.5,0,-0.41,init
//! 1,0,4,9,awake,...,move;photo:12:dog
//! ```
//!
//! Events are `;`-separated and their fields `:`-separated:
//!
//! | event | fields |
//! |-------|--------|
//! | `init`, `move`, `sleep`, `wake`, `dreamless` | none |
//! | `photo`, `style` | percept id, category |
//! | `stimulus` | modality, score |
//! | `dream` | percept id, content category, style category, origin i, origin j, valence, pair distance, content step, style step |
//! | `swap` | partner id, sent id, received id, evaluation (`-` when the percept was already known) |
//!
//! Floats are written in Rust's shortest round-trip form, so reading a trace
//! back yields bit-identical values and therefore identical metrics.

use std::fmt::{self, Write as _};
use std::io::{self, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::emotion::{EmotionState, Mode};
use crate::field::GridCell;
use crate::semantic::{PerceptId, SemanticDistance};
use crate::world::Modality;

pub const TRACE_HEADER: [&str; 12] = [
    "tick", "agent_id", "i", "j", "mode", "e_h", "e_c", "e_f", "e_k", "fatigue", "field_value", "event",
];

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn parse_err(line: u64, message: impl Into<String>) -> TraceError {
    TraceError::Parse {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    Init,
    Move,
    Photo {
        id: PerceptId,
        category: String,
    },
    Style {
        id: PerceptId,
        category: String,
    },
    Stimulus {
        modality: Modality,
        score: f64,
    },
    Sleep,
    Dreamless,
    Dream {
        id: PerceptId,
        content_category: String,
        style_category: String,
        origin: GridCell,
        valence: i8,
        pair_distance: SemanticDistance,
        content_step: u32,
        style_step: u32,
    },
    Wake,
    Swap {
        partner: usize,
        sent: PerceptId,
        received: PerceptId,
        evaluation: Option<f64>,
    },
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceEvent::Init => f.write_str("init"),
            TraceEvent::Move => f.write_str("move"),
            TraceEvent::Sleep => f.write_str("sleep"),
            TraceEvent::Dreamless => f.write_str("dreamless"),
            TraceEvent::Wake => f.write_str("wake"),
            TraceEvent::Photo { id, category } => write!(f, "photo:{id}:{category}"),
            TraceEvent::Style { id, category } => write!(f, "style:{id}:{category}"),
            TraceEvent::Stimulus { modality, score } => write!(f, "stimulus:{}:{score}", modality.as_str()),
            TraceEvent::Dream {
                id,
                content_category,
                style_category,
                origin,
                valence,
                pair_distance,
                content_step,
                style_step,
            } => write!(
                f,
                "dream:{id}:{content_category}:{style_category}:{}:{}:{valence}:{pair_distance}:{content_step}:{style_step}",
                origin.i, origin.j
            ),
            TraceEvent::Swap {
                partner,
                sent,
                received,
                evaluation,
            } => {
                write!(f, "swap:{partner}:{sent}:{received}:")?;
                match evaluation {
                    Some(v) => write!(f, "{v}"),
                    None => f.write_str("-"),
                }
            }
        }
    }
}

fn field<T: FromStr>(parts: &[&str], k: usize, what: &str) -> Result<T, String> {
    parts
        .get(k)
        .ok_or_else(|| format!("missing {what}"))?
        .parse()
        .map_err(|_| format!("bad {what} `{}`", parts[k]))
}

impl FromStr for TraceEvent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let arity = |n: usize| {
            if parts.len() == n {
                Ok(())
            } else {
                Err(format!("event `{s}` expects {} fields", n - 1))
            }
        };
        let id = |k: usize| field::<u64>(&parts, k, "percept id").map(PerceptId);
        let event = match parts[0] {
            "init" => TraceEvent::Init,
            "move" => TraceEvent::Move,
            "sleep" => TraceEvent::Sleep,
            "dreamless" => TraceEvent::Dreamless,
            "wake" => TraceEvent::Wake,
            "photo" | "style" => {
                arity(3)?;
                let (id, category) = (id(1)?, parts[2].to_owned());
                if parts[0] == "photo" {
                    TraceEvent::Photo { id, category }
                } else {
                    TraceEvent::Style { id, category }
                }
            }
            "stimulus" => {
                arity(3)?;
                TraceEvent::Stimulus {
                    modality: parts[1].parse()?,
                    score: field(&parts, 2, "score")?,
                }
            }
            "dream" => {
                arity(10)?;
                let pair_distance = match parts[7] {
                    "unreachable" => SemanticDistance::Unreachable,
                    _ => SemanticDistance::Hops(field(&parts, 7, "pair distance")?),
                };
                TraceEvent::Dream {
                    id: id(1)?,
                    content_category: parts[2].to_owned(),
                    style_category: parts[3].to_owned(),
                    origin: GridCell::new(field(&parts, 4, "origin i")?, field(&parts, 5, "origin j")?),
                    valence: field(&parts, 6, "valence")?,
                    pair_distance,
                    content_step: field(&parts, 8, "content step")?,
                    style_step: field(&parts, 9, "style step")?,
                }
            }
            "swap" => {
                arity(5)?;
                TraceEvent::Swap {
                    partner: field(&parts, 1, "partner")?,
                    sent: id(2)?,
                    received: id(3)?,
                    evaluation: match parts[4] {
                        "-" => None,
                        _ => Some(field(&parts, 4, "evaluation")?),
                    },
                }
            }
            other => return Err(format!("unknown event `{other}`")),
        };
        if matches!(parts[0], "init" | "move" | "sleep" | "dreamless" | "wake") {
            arity(1)?;
        }
        Ok(event)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub tick: u64,
    pub agent_id: usize,
    pub cell: GridCell,
    pub mode: Mode,
    pub emotions: EmotionState,
    pub field_value: f64,
    pub events: Vec<TraceEvent>,
}

/// One exchange between two co-located awake agents; `agent_a < agent_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionRecord {
    pub tick: u64,
    pub agent_a: usize,
    pub agent_b: usize,
    pub cell: GridCell,
    pub sent_by_a: PerceptId,
    pub sent_by_b: PerceptId,
    /// `a`'s own-field evaluation of `b`'s percept, `None` if already known.
    pub evaluation_by_a: Option<f64>,
    pub evaluation_by_b: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimulationTrace {
    pub config: Vec<(String, String)>,
    pub rows: Vec<TraceRow>,
}

impl SimulationTrace {
    pub fn config_value(&self, key: &str) -> Option<&str> {
        self.config.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Interaction records rebuilt from paired `swap` events, in row order.
    pub fn interactions(&self) -> Vec<InteractionRecord> {
        let by_key: std::collections::HashMap<(u64, usize), &TraceRow> =
            self.rows.iter().map(|r| ((r.tick, r.agent_id), r)).collect();
        let mut out = Vec::new();
        for row in &self.rows {
            for event in &row.events {
                let TraceEvent::Swap {
                    partner,
                    sent,
                    received,
                    evaluation,
                } = event
                else {
                    continue;
                };
                if *partner <= row.agent_id {
                    continue;
                }
                let evaluation_by_b = by_key
                    .get(&(row.tick, *partner))
                    .into_iter()
                    .flat_map(|r| &r.events)
                    .find_map(|e| match e {
                        TraceEvent::Swap {
                            partner: p,
                            sent: s,
                            evaluation,
                            ..
                        } if *p == row.agent_id && s == received => Some(*evaluation),
                        _ => None,
                    })
                    .flatten();
                out.push(InteractionRecord {
                    tick: row.tick,
                    agent_a: row.agent_id,
                    agent_b: *partner,
                    cell: row.cell,
                    sent_by_a: *sent,
                    sent_by_b: *received,
                    evaluation_by_a: *evaluation,
                    evaluation_by_b,
                });
            }
        }
        out
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), TraceError> {
        let mut head = String::new();
        for (k, v) in &self.config {
            let _ = writeln!(head, "# {k} = {v}");
        }
        out.write_all(head.as_bytes())?;
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(TRACE_HEADER)?;
        for row in &self.rows {
            let e = &row.emotions;
            let events = row
                .events
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(";");
            writer.write_record([
                row.tick.to_string(),
                row.agent_id.to_string(),
                row.cell.i.to_string(),
                row.cell.j.to_string(),
                row.mode.as_str().to_owned(),
                e.happiness.to_string(),
                e.curiosity.to_string(),
                e.friendship.to_string(),
                e.courage.to_string(),
                e.fatigue.to_string(),
                row.field_value.to_string(),
                events,
            ])?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("trace is UTF-8")
    }

    pub fn read_from(text: &str) -> Result<Self, TraceError> {
        let mut config = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let Some(rest) = line.strip_prefix('#') else {
                break;
            };
            let (k, v) = rest
                .split_once('=')
                .ok_or_else(|| parse_err(n as u64 + 1, "config echo line without `=`"))?;
            config.push((k.trim().to_owned(), v.trim().to_owned()));
        }

        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header = reader.headers()?.clone();
        if header.iter().ne(TRACE_HEADER) {
            return Err(parse_err(config.len() as u64 + 1, "unexpected trace header"));
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let get = |k: usize| record.get(k).unwrap_or("");
            let num = |k: usize| -> Result<f64, TraceError> {
                get(k)
                    .parse()
                    .map_err(|_| parse_err(line, format!("bad {} `{}`", TRACE_HEADER[k], get(k))))
            };
            let int = |k: usize| -> Result<u64, TraceError> {
                get(k)
                    .parse()
                    .map_err(|_| parse_err(line, format!("bad {} `{}`", TRACE_HEADER[k], get(k))))
            };
            let mode = match get(4) {
                "awake" => Mode::Awake,
                "asleep" => Mode::Asleep,
                other => return Err(parse_err(line, format!("bad mode `{other}`"))),
            };
            let events = if get(11).is_empty() {
                Vec::new()
            } else {
                get(11)
                    .split(';')
                    .map(|e| e.parse().map_err(|m: String| parse_err(line, m)))
                    .collect::<Result<_, _>>()?
            };
            rows.push(TraceRow {
                tick: int(0)?,
                agent_id: int(1)? as usize,
                cell: GridCell::new(int(2)? as usize, int(3)? as usize),
                mode,
                emotions: EmotionState {
                    happiness: num(5)?,
                    curiosity: num(6)?,
                    friendship: num(7)?,
                    courage: num(8)?,
                    fatigue: num(9)?,
                },
                field_value: num(10)?,
                events,
            });
        }
        Ok(SimulationTrace { config, rows })
    }
}

/// Result of replaying every `swap` event of a trace.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InteractionAudit {
    pub interactions: u64,
    pub violations: Vec<String>,
}

impl InteractionAudit {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Replays the trace and checks every exchange: both partners awake on the
/// same cell, mirrored `swap` events, each sent percept being the sender's
/// most recent own photo or dream, and an evaluation exactly on first receipt.
pub fn audit_interactions(trace: &SimulationTrace) -> InteractionAudit {
    use std::collections::{HashMap, HashSet};
    let by_key: HashMap<(u64, usize), &TraceRow> = trace.rows.iter().map(|r| ((r.tick, r.agent_id), r)).collect();
    let mut latest: HashMap<usize, PerceptId> = HashMap::new();
    let mut received: HashSet<(usize, PerceptId)> = HashSet::new();
    let mut audit = InteractionAudit::default();
    let fail = |audit: &mut InteractionAudit, row: &TraceRow, msg: String| {
        audit
            .violations
            .push(format!("tick {} agent {}: {msg}", row.tick, row.agent_id));
    };
    for row in &trace.rows {
        for event in &row.events {
            match event {
                TraceEvent::Photo { id, .. } | TraceEvent::Dream { id, .. } => {
                    latest.insert(row.agent_id, *id);
                }
                TraceEvent::Swap {
                    partner,
                    sent,
                    received: got,
                    evaluation,
                } => {
                    if *partner > row.agent_id {
                        audit.interactions += 1;
                    }
                    let Some(other) = by_key.get(&(row.tick, *partner)) else {
                        fail(&mut audit, row, format!("partner {partner} has no row"));
                        continue;
                    };
                    if row.mode != Mode::Awake || other.mode != Mode::Awake {
                        fail(&mut audit, row, format!("swap with {partner} while not both awake"));
                    }
                    if row.cell != other.cell {
                        fail(&mut audit, row, format!("swap with {partner} across {} and {}", row.cell, other.cell));
                    }
                    let mirrored = other.events.iter().any(|e| {
                        matches!(e, TraceEvent::Swap { partner: p, sent: s, received: r, .. }
                            if *p == row.agent_id && s == got && r == sent)
                    });
                    if !mirrored {
                        fail(&mut audit, row, format!("swap with {partner} not mirrored"));
                    }
                    if sent.owner() != row.agent_id || latest.get(&row.agent_id) != Some(sent) {
                        fail(&mut audit, row, format!("sent {sent} is not its latest own percept"));
                    }
                    let first = received.insert((row.agent_id, *got));
                    if first != evaluation.is_some() {
                        fail(&mut audit, row, format!("evaluation of {got} inconsistent with first receipt"));
                    }
                }
                _ => {}
            }
        }
    }
    audit
}

/// Summary of one trace.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metrics {
    pub ticks: u64,
    pub agents: usize,
    pub interactions: u64,
    pub photos: u64,
    pub dream_frames: u64,
    pub total_moves: u64,
    /// Means over all rows after tick 0: happiness, curiosity, friendship, courage, fatigue.
    pub mean_emotions: [f64; 5],
    pub moves_per_agent: Vec<u64>,
}

pub const EMOTION_NAMES: [&str; 5] = ["happiness", "curiosity", "friendship", "courage", "fatigue"];

impl Metrics {
    pub fn max_moves(&self) -> u64 {
        self.moves_per_agent.iter().copied().max().unwrap_or(0)
    }

    pub fn entries(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("ticks".to_owned(), self.ticks.to_string()),
            ("agents".to_owned(), self.agents.to_string()),
            ("interactions".to_owned(), self.interactions.to_string()),
            ("photos".to_owned(), self.photos.to_string()),
            ("dream_frames".to_owned(), self.dream_frames.to_string()),
            ("total_moves".to_owned(), self.total_moves.to_string()),
        ];
        for (name, v) in EMOTION_NAMES.iter().zip(self.mean_emotions) {
            out.push((format!("mean_{name}"), v.to_string()));
        }
        for (k, m) in self.moves_per_agent.iter().enumerate() {
            out.push((format!("moves_agent_{k}"), m.to_string()));
        }
        out
    }

    /// `metric,value` CSV.
    pub fn to_csv_string(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(["metric", "value"]).expect("in-memory write");
        for (k, v) in self.entries() {
            writer.write_record([k, v]).expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("UTF-8")
    }
}

pub fn metrics(trace: &SimulationTrace) -> Metrics {
    let agents = trace.rows.iter().map(|r| r.agent_id + 1).max().unwrap_or(0);
    let mut m = Metrics {
        ticks: trace.rows.iter().map(|r| r.tick).max().unwrap_or(0),
        agents,
        moves_per_agent: vec![0; agents],
        ..Metrics::default()
    };
    let mut sums = [0.0; 5];
    let mut counted = 0usize;
    for row in &trace.rows {
        if row.tick > 0 {
            for (s, v) in sums.iter_mut().zip(row.emotions.components()) {
                *s += v;
            }
            counted += 1;
        }
        for event in &row.events {
            match event {
                TraceEvent::Move => m.moves_per_agent[row.agent_id] += 1,
                TraceEvent::Photo { .. } => m.photos += 1,
                TraceEvent::Dream { .. } => m.dream_frames += 1,
                TraceEvent::Swap { partner, .. } if *partner > row.agent_id => m.interactions += 1,
                _ => {}
            }
        }
    }
    m.total_moves = m.moves_per_agent.iter().sum();
    if counted > 0 {
        for (mean, s) in m.mean_emotions.iter_mut().zip(sums) {
            *mean = s / counted as f64;
        }
    }
    m
}
