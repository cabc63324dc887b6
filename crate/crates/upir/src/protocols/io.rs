//! On-disk formats: NDJSON traces and JSON workload files.
//!
//! A trace file is newline-delimited JSON. The first line is a header
//! carrying the design name, its point names, the protocol, seed, and the
//! config fingerprint; each further line is one record. Points are written
//! by name so files stay meaningful without the design file at hand. The
//! redacted variant replaces the ground-truth records with database-view
//! lines (query id, link group, final proxy) — nothing else.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

use crate::designs::{BlockId, PointId, SetSystem};
use crate::protocols::{
    DbViewRecord, HopPost, ProtocolError, ProtocolSpec, QueryRecord, SourcePolicy, SubmissionMode,
    SubmissionPlan, Trace, Workload, LinkGroupPlan, MachineCounters,
};

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum TraceLine {
    Header {
        design: String,
        points: Vec<String>,
        protocol: ProtocolSpec,
        seed: u64,
        config_hash: String,
    },
    Record {
        query_id: u64,
        link_group: u64,
        source: String,
        plan: PlanLine,
        hop_path: Vec<(Option<u32>, String)>,
    },
    MachineStats {
        rounds: u64,
        exhausted_rounds: u64,
    },
    DbView {
        query_id: u64,
        link_group: u64,
        proxy: String,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct PlanLine {
    source: String,
    proxy: String,
    memory_space: Option<u32>,
    mode: SubmissionMode,
}

/// The identifying first line of a trace file, readable from both full and
/// redacted exports.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceHeader {
    pub design: String,
    pub points: Vec<String>,
    pub protocol: ProtocolSpec,
    pub seed: u64,
    pub config_hash: String,
}

/// Reads just the header of a trace file (full or redacted).
pub fn trace_header_from_ndjson(text: &str) -> Result<TraceHeader, ProtocolError> {
    let mut lines = ndjson_lines(text);
    let (first_no, first) = lines.next().ok_or(ProtocolError::MissingHeader)??;
    if let TraceLine::Header {
        design,
        points,
        protocol,
        seed,
        config_hash,
    } = first
    {
        Ok(TraceHeader {
            design,
            points,
            protocol,
            seed,
            config_hash,
        })
    } else {
        Err(ProtocolError::TraceParse {
            line: first_no,
            message: "first line must be the header".into(),
        })
    }
}

impl Trace {
    fn header_line(&self) -> TraceLine {
        TraceLine::Header {
            design: self.design.clone(),
            points: self.point_names.clone(),
            protocol: self.protocol,
            seed: self.seed,
            config_hash: self.config_hash.clone(),
        }
    }

    fn name(&self, p: PointId) -> String {
        self.point_names[p.0 as usize].clone()
    }

    /// Full NDJSON export: header, one record line per query, machine
    /// counters if present.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        let mut push = |line: &TraceLine| {
            out.push_str(&serde_json::to_string(line).expect("trace lines serialize"));
            out.push('\n');
        };
        push(&self.header_line());
        for r in &self.records {
            push(&TraceLine::Record {
                query_id: r.query_id,
                link_group: r.link_group,
                source: self.name(r.source),
                plan: PlanLine {
                    source: self.name(r.plan.source),
                    proxy: self.name(r.plan.proxy),
                    memory_space: r.plan.memory_space.map(|b| b.0),
                    mode: r.plan.mode,
                },
                hop_path: r
                    .hop_path
                    .iter()
                    .map(|h| (h.memory_space.map(|b| b.0), self.name(h.proxy)))
                    .collect(),
            });
        }
        if let Some(m) = self.machine {
            push(&TraceLine::MachineStats {
                rounds: m.rounds,
                exhausted_rounds: m.exhausted_rounds,
            });
        }
        out
    }

    /// Redacted NDJSON export: header plus database-view lines only. The
    /// hidden source, plan, and hop route never appear.
    pub fn to_ndjson_redacted(&self) -> String {
        let mut out = String::new();
        let mut push = |line: &TraceLine| {
            out.push_str(&serde_json::to_string(line).expect("trace lines serialize"));
            out.push('\n');
        };
        push(&self.header_line());
        for r in &self.records {
            push(&TraceLine::DbView {
                query_id: r.query_id,
                link_group: r.link_group,
                proxy: self.name(r.final_proxy()),
            });
        }
        out
    }

    /// Parses a full trace back from NDJSON. Redacted files are refused
    /// (their ground truth is gone); read those with
    /// [`db_view_from_ndjson`].
    pub fn from_ndjson(text: &str) -> Result<Trace, ProtocolError> {
        let mut lines = ndjson_lines(text);
        let (first_no, first) = lines.next().ok_or(ProtocolError::MissingHeader)??;
        let TraceLine::Header {
            design,
            points,
            protocol,
            seed,
            config_hash,
        } = first
        else {
            return Err(ProtocolError::TraceParse {
                line: first_no,
                message: "first line must be the header".into(),
            });
        };
        let ids: HashMap<&str, PointId> = points
            .iter()
            .enumerate()
            .map(|(i, name)| (name.as_str(), PointId(i as u32)))
            .collect();
        let resolve = |line: usize, name: &str| {
            ids.get(name).copied().ok_or(ProtocolError::TraceParse {
                line,
                message: format!("point {name:?} is not in the header point list"),
            })
        };
        let mut records = Vec::new();
        let mut machine = None;
        let mut saw_db_view = false;
        for item in lines {
            let (line_no, line) = item?;
            match line {
                TraceLine::Header { .. } => {
                    return Err(ProtocolError::TraceParse {
                        line: line_no,
                        message: "duplicate header".into(),
                    })
                }
                TraceLine::Record {
                    query_id,
                    link_group,
                    source,
                    plan,
                    hop_path,
                } => {
                    if hop_path.is_empty() {
                        return Err(ProtocolError::TraceParse {
                            line: line_no,
                            message: "empty hop path".into(),
                        });
                    }
                    records.push(QueryRecord {
                        query_id,
                        link_group,
                        source: resolve(line_no, &source)?,
                        plan: SubmissionPlan {
                            source: resolve(line_no, &plan.source)?,
                            proxy: resolve(line_no, &plan.proxy)?,
                            memory_space: plan.memory_space.map(BlockId),
                            mode: plan.mode,
                        },
                        hop_path: hop_path
                            .iter()
                            .map(|(space, proxy)| {
                                Ok(HopPost {
                                    memory_space: space.map(BlockId),
                                    proxy: resolve(line_no, proxy)?,
                                })
                            })
                            .collect::<Result<_, ProtocolError>>()?,
                    });
                }
                TraceLine::MachineStats {
                    rounds,
                    exhausted_rounds,
                } => {
                    machine = Some(MachineCounters {
                        rounds,
                        exhausted_rounds,
                    });
                }
                TraceLine::DbView { .. } => saw_db_view = true,
            }
        }
        if records.is_empty() && saw_db_view {
            return Err(ProtocolError::RedactedTrace);
        }
        Ok(Trace {
            design,
            point_names: points,
            protocol,
            seed,
            config_hash,
            records,
            machine,
        })
    }

    pub fn save_ndjson(&self, path: &Path, redact: bool) -> Result<(), ProtocolError> {
        let text = if redact {
            self.to_ndjson_redacted()
        } else {
            self.to_ndjson()
        };
        crate::util::write_atomic(path, text.as_bytes())?;
        Ok(())
    }

    pub fn load_ndjson(path: &Path) -> Result<Trace, ProtocolError> {
        Trace::from_ndjson(&std::fs::read_to_string(path)?)
    }
}

/// Database-view lines of an NDJSON trace — works on both full traces
/// (computing the view from the records) and redacted ones.
pub fn db_view_from_ndjson(text: &str) -> Result<Vec<DbViewRecord>, ProtocolError> {
    let mut lines = ndjson_lines(text);
    let (_, first) = lines.next().ok_or(ProtocolError::MissingHeader)??;
    let TraceLine::Header { points, .. } = first else {
        return Err(ProtocolError::TraceParse {
            line: 1,
            message: "first line must be the header".into(),
        });
    };
    let ids: HashMap<&str, PointId> = points
        .iter()
        .enumerate()
        .map(|(i, name)| (name.as_str(), PointId(i as u32)))
        .collect();
    let resolve = |line: usize, name: &str| {
        ids.get(name).copied().ok_or(ProtocolError::TraceParse {
            line,
            message: format!("point {name:?} is not in the header point list"),
        })
    };
    let mut out = Vec::new();
    for item in lines {
        let (line_no, line) = item?;
        match line {
            TraceLine::DbView {
                query_id,
                link_group,
                proxy,
            } => out.push(DbViewRecord {
                query_id,
                link_group,
                proxy: resolve(line_no, &proxy)?,
            }),
            TraceLine::Record {
                query_id,
                link_group,
                hop_path,
                ..
            } => {
                let (_, proxy) = hop_path.last().ok_or(ProtocolError::TraceParse {
                    line: line_no,
                    message: "empty hop path".into(),
                })?;
                out.push(DbViewRecord {
                    query_id,
                    link_group,
                    proxy: resolve(line_no, proxy)?,
                });
            }
            _ => {}
        }
    }
    Ok(out)
}

/// Numbered, parsed, non-empty lines of an NDJSON document.
fn ndjson_lines(
    text: &str,
) -> impl Iterator<Item = Result<(usize, TraceLine), ProtocolError>> + '_ {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let line = i + 1;
            serde_json::from_str::<TraceLine>(l)
                .map(|parsed| (line, parsed))
                .map_err(|e| ProtocolError::TraceParse {
                    line,
                    message: e.to_string(),
                })
        })
}

/// JSON workload description, as read from disk.
///
/// Two shapes: `{"n_queries": 100}` for independent uniform-source queries,
/// or groups plus an ordering:
///
/// ```json
/// {
///   "n_queries": 4,
///   "groups": [{"link_group": 7, "source": "U3"}, {}],
///   "ordering": [0, 1, 0, 0],
///   "seed": 99
/// }
/// ```
///
/// A group without `"source"` draws one uniformly. The optional `seed` is a
/// default; an explicitly supplied seed wins.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadFile {
    pub n_queries: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<GroupEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordering: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupEntry {
    /// Label for the group; defaults to its index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_group: Option<u64>,
    /// Fixed source point name; absent means one uniform draw.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl WorkloadFile {
    pub fn load(path: &Path) -> Result<WorkloadFile, ProtocolError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| ProtocolError::TraceParse {
            line: e.line(),
            message: format!("workload file: {e}"),
        })
    }

    /// Resolves the file into a [`Workload`] against a design.
    pub fn into_workload(self, design: &SetSystem) -> Result<Workload, ProtocolError> {
        match (self.groups, self.ordering) {
            (None, None) => Ok(Workload::independent(self.n_queries)),
            (None, Some(_)) => Err(ProtocolError::OrderingWithoutGroups),
            (Some(_), None) => Err(ProtocolError::GroupsNeedOrdering),
            (Some(groups), Some(ordering)) => {
                if ordering.len() as u64 != self.n_queries {
                    return Err(ProtocolError::OrderingLengthMismatch {
                        len: ordering.len(),
                        n: self.n_queries,
                    });
                }
                let link_plan = groups
                    .into_iter()
                    .enumerate()
                    .map(|(i, g)| {
                        let policy = match g.source {
                            None => SourcePolicy::Uniform,
                            Some(name) => SourcePolicy::Fixed(design.point_id(&name)?),
                        };
                        Ok(LinkGroupPlan {
                            id: g.link_group.unwrap_or(i as u64),
                            policy,
                        })
                    })
                    .collect::<Result<Vec<_>, ProtocolError>>()?;
                Ok(Workload::grouped(link_plan, ordering))
            }
        }
    }
}
