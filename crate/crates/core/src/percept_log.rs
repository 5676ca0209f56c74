//! CSV log of stored percepts, used to dream offline from a finished run.
//!
//! Columns: `agent_id,id,kind,category,i,j,tick,features`, features joined
//! with `;`. Categories are recomputed on load so a log can be replayed
//! against a different graph.

use std::io::Write;

use crate::field::GridCell;
use crate::semantic::{Percept, PerceptId, PerceptKind, PerceptStore, SemanticGraph};
use crate::trace::TraceError;

pub const PERCEPT_LOG_HEADER: [&str; 8] = ["agent_id", "id", "kind", "category", "i", "j", "tick", "features"];

pub fn write_percept_log<'p, W: Write>(
    out: W,
    percepts: impl IntoIterator<Item = (usize, &'p Percept)>,
) -> Result<(), TraceError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PERCEPT_LOG_HEADER)?;
    for (agent, p) in percepts {
        let features = p.features.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
        w.write_record([
            agent.to_string(),
            p.id.to_string(),
            p.kind.as_str().to_owned(),
            p.category.clone(),
            p.origin.i.to_string(),
            p.origin.j.to_string(),
            p.tick.to_string(),
            features,
        ])?;
    }
    w.flush().map_err(TraceError::Io)?;
    Ok(())
}

/// Content-side and style-side stores rebuilt from a log.
#[derive(Debug, Clone, Default)]
pub struct PerceptLog {
    pub content: PerceptStore,
    pub style: PerceptStore,
}

/// Reads a log, keeping rows of `agent` (all rows when `None`). Style rows
/// are classified on `style_graph`, every other kind on `content_graph`.
pub fn read_percept_log(
    text: &str,
    agent: Option<usize>,
    content_graph: &SemanticGraph,
    style_graph: &SemanticGraph,
) -> Result<PerceptLog, TraceError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| TraceError::Parse {
            line: 1,
            message: format!("missing column `{name}`"),
        })
    };
    let (c_agent, c_id, c_kind, c_i, c_j, c_tick, c_features) =
        (col("agent_id")?, col("id")?, col("kind")?, col("i")?, col("j")?, col("tick")?, col("features")?);

    let mut log = PerceptLog::default();
    for (n, record) in reader.records().enumerate() {
        let record = record?;
        let line = n as u64 + 2;
        let field = |k: usize| record.get(k).unwrap_or("");
        let bad = |what: &str| TraceError::Parse {
            line,
            message: format!("invalid {what}"),
        };
        let owner: usize = field(c_agent).parse().map_err(|_| bad("agent_id"))?;
        if agent.is_some_and(|a| a != owner) {
            continue;
        }
        let kind: PerceptKind = field(c_kind).parse().map_err(|_| bad("kind"))?;
        let features = field(c_features)
            .split(';')
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| bad("features"))?;
        let graph = if kind == PerceptKind::Style { style_graph } else { content_graph };
        let category = graph
            .classify(&features)
            .map_err(|e| TraceError::Parse {
                line,
                message: e.to_string(),
            })?
            .to_owned();
        let percept = Percept {
            id: PerceptId(field(c_id).parse().map_err(|_| bad("id"))?),
            features,
            category,
            origin: GridCell::new(
                field(c_i).parse().map_err(|_| bad("i"))?,
                field(c_j).parse().map_err(|_| bad("j"))?,
            ),
            tick: field(c_tick).parse().map_err(|_| bad("tick"))?,
            kind,
        };
        if kind == PerceptKind::Style {
            log.style.attach(percept);
        } else {
            log.content.attach(percept);
        }
    }
    Ok(log)
}
