//! Observer views: what the database, a single user, or a coalition can
//! actually see of a trace. Adversary code consumes these views, never the
//! ground-truth records.

use std::collections::BTreeSet;

use crate::designs::{BlockId, PointId, SetSystem};
use crate::protocols::{ProtocolError, Trace};

/// One database-side observation: who handed in the query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DbViewRecord {
    pub query_id: u64,
    pub link_group: u64,
    /// The user who contacted the database (after any hops).
    pub proxy: PointId,
}

/// The database's view of a whole trace.
pub fn db_view(trace: &Trace) -> Vec<DbViewRecord> {
    trace
        .records
        .iter()
        .map(|r| DbViewRecord {
            query_id: r.query_id,
            link_group: r.link_group,
            proxy: r.final_proxy(),
        })
        .collect()
}

/// One post visible to a particular observer: a query appeared in a memory
/// space the observer belongs to, addressed to `proxy`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UserViewRecord {
    pub query_id: u64,
    pub link_group: u64,
    pub memory_space: BlockId,
    pub proxy: PointId,
}

fn check_trace_design(trace: &Trace, design: &SetSystem) -> Result<(), ProtocolError> {
    if trace.design != design.name() || trace.point_names != design.points() {
        return Err(ProtocolError::DesignMismatch {
            trace: trace.design.clone(),
            design: design.name().to_string(),
        });
    }
    Ok(())
}

/// Everything `observer` sees in its memory spaces, excluding its own
/// queries. Direct submissions never appear (they touch no space).
pub fn user_view(
    trace: &Trace,
    design: &SetSystem,
    observer: PointId,
) -> Result<Vec<UserViewRecord>, ProtocolError> {
    check_trace_design(trace, design)?;
    design.check_point(observer)?;
    let mut out = Vec::new();
    for r in &trace.records {
        if r.source == observer {
            continue;
        }
        for hop in &r.hop_path {
            let Some(space) = hop.memory_space else {
                continue;
            };
            if design.block_contains(space, observer) {
                out.push(UserViewRecord {
                    query_id: r.query_id,
                    link_group: r.link_group,
                    memory_space: space,
                    proxy: hop.proxy,
                });
            }
        }
    }
    Ok(out)
}

/// One post visible to at least one coalition member, with provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoalitionViewRecord {
    pub query_id: u64,
    pub link_group: u64,
    pub memory_space: BlockId,
    pub proxy: PointId,
    /// Coalition members that see this post (sorted). A member never
    /// "sees" its own queries, mirroring [`user_view`].
    pub seen_by: Vec<PointId>,
}

/// Union of the members' user views, deduplicated per post.
pub fn coalition_view(
    trace: &Trace,
    design: &SetSystem,
    coalition: &[PointId],
) -> Result<Vec<CoalitionViewRecord>, ProtocolError> {
    check_trace_design(trace, design)?;
    let members: BTreeSet<PointId> = coalition.iter().copied().collect();
    for &m in &members {
        design.check_point(m)?;
    }
    let mut out = Vec::new();
    for r in &trace.records {
        for hop in &r.hop_path {
            let Some(space) = hop.memory_space else {
                continue;
            };
            let seen_by: Vec<PointId> = members
                .iter()
                .copied()
                .filter(|m| *m != r.source && design.block_contains(space, *m))
                .collect();
            if !seen_by.is_empty() {
                out.push(CoalitionViewRecord {
                    query_id: r.query_id,
                    link_group: r.link_group,
                    memory_space: space,
                    proxy: hop.proxy,
                    seen_by,
                });
            }
        }
    }
    Ok(out)
}
