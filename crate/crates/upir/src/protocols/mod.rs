//! The proxy-selection protocols as seeded stochastic simulations.
//!
//! Two families:
//!
//! - Write-to-memory (`Dbwm`, `Dbwms`): users post queries into single-slot
//!   memory spaces and whoever finds a query forwards it. Stateful; runs on
//!   configurations. See [`DbwmState`].
//! - Proxy-draw (`PdBibdV1/V2` on BIBDs, `PdCoverV1/V2` on covering
//!   designs): each query independently draws a memory space and designated
//!   proxy; the V1 variants occasionally submit directly to the database,
//!   the V2 variants route self-submissions through a memory space.
//!
//! The optional query-hop extension re-posts a query through further spaces
//! a geometric number of times before it reaches the database.

mod dbwm;
mod dist;
mod io;
mod views;

pub use dbwm::{DbwmState, DbwmStats, RoundOutcome};
pub use dist::{plan_distribution, proxy_marginals};
pub use io::{db_view_from_ndjson, trace_header_from_ndjson, GroupEntry, TraceHeader, WorkloadFile};
pub use views::{
    coalition_view, db_view, user_view, CoalitionViewRecord, DbViewRecord, UserViewRecord,
};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::designs::{BlockId, DesignError, DesignProfile, PointId, SetSystem};
use crate::rng::{query_rng, workload_rng};
use crate::util::config_hash;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    /// Database write to memory: single-slot spaces, forwarding by whoever
    /// finds the query there.
    Dbwm,
    /// As `Dbwm`, plus the owner self-forwards with probability `p` on
    /// finding their own query.
    Dbwms,
    /// Proxy draw on a BIBD; direct database submission with prob 1/v.
    PdBibdV1,
    /// Proxy draw on a BIBD; self-submissions go through a memory space.
    PdBibdV2,
    /// Proxy draw on a covering design; direct submission when the drawn
    /// proxy is the source itself.
    PdCoverV1,
    /// Proxy draw on a covering design; the source may draw itself as proxy
    /// and then posts in one of its own spaces.
    PdCoverV2,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 6] = [
        ProtocolKind::Dbwm,
        ProtocolKind::Dbwms,
        ProtocolKind::PdBibdV1,
        ProtocolKind::PdBibdV2,
        ProtocolKind::PdCoverV1,
        ProtocolKind::PdCoverV2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolKind::Dbwm => "dbwm",
            ProtocolKind::Dbwms => "dbwms",
            ProtocolKind::PdBibdV1 => "pd-bibd-v1",
            ProtocolKind::PdBibdV2 => "pd-bibd-v2",
            ProtocolKind::PdCoverV1 => "pd-cover-v1",
            ProtocolKind::PdCoverV2 => "pd-cover-v2",
        }
    }

    /// The stateful write-to-memory family.
    pub fn is_write_to_memory(self) -> bool {
        matches!(self, ProtocolKind::Dbwm | ProtocolKind::Dbwms)
    }

    /// The per-query proxy-draw family.
    pub fn is_proxy_draw(self) -> bool {
        !self.is_write_to_memory()
    }

    /// V1-style kinds submit directly to the database when source = proxy.
    pub fn is_v1_style(self) -> bool {
        matches!(self, ProtocolKind::PdBibdV1 | ProtocolKind::PdCoverV1)
    }
}

impl std::fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ProtocolKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProtocolKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                format!(
                    "unknown protocol {s:?}; expected one of: {}",
                    ProtocolKind::ALL.map(|k| k.as_str()).join(", ")
                )
            })
    }
}

/// Which protocol to run and its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub kind: ProtocolKind,
    /// Self-forward probability in (0,1]; present iff kind is `Dbwms`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Hop-extension forward probability in (0,1]; proxy-draw kinds only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_hop: Option<f64>,
}

impl ProtocolSpec {
    pub fn new(kind: ProtocolKind) -> Self {
        ProtocolSpec {
            kind,
            p: None,
            p_hop: None,
        }
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = Some(p);
        self
    }

    pub fn with_hop(mut self, p_hop: f64) -> Self {
        self.p_hop = Some(p_hop);
        self
    }

    /// Checks parameter ranges and the design-class requirements: BIBD
    /// kinds need the bibd flag, covering kinds the covering flag, and the
    /// write-to-memory kinds a configuration of rank ≥ 2.
    pub fn validate(&self, profile: &DesignProfile) -> Result<(), ProtocolError> {
        let flag_violation = |flag: &'static str| {
            Err(ProtocolError::FlagViolation {
                kind: self.kind,
                flag,
                design: profile.name.clone(),
            })
        };
        match self.kind {
            ProtocolKind::Dbwm | ProtocolKind::Dbwms => {
                if !profile.flags.configuration {
                    return flag_violation("configuration");
                }
                if profile.k.is_some_and(|k| k < 2) {
                    return Err(ProtocolError::RankTooSmall);
                }
            }
            ProtocolKind::PdBibdV1 | ProtocolKind::PdBibdV2 => {
                if !profile.flags.bibd {
                    return flag_violation("bibd");
                }
            }
            ProtocolKind::PdCoverV1 | ProtocolKind::PdCoverV2 => {
                if !profile.flags.covering {
                    return flag_violation("covering");
                }
            }
        }
        match (self.kind, self.p) {
            (ProtocolKind::Dbwms, None) => return Err(ProtocolError::MissingP),
            (ProtocolKind::Dbwms, Some(p)) if !(p > 0.0 && p <= 1.0) => {
                return Err(ProtocolError::BadProbability { field: "p", p })
            }
            (ProtocolKind::Dbwms, Some(_)) => {}
            (_, Some(_)) => return Err(ProtocolError::UnexpectedP),
            (_, None) => {}
        }
        if let Some(p_hop) = self.p_hop {
            if !self.kind.is_proxy_draw() {
                return Err(ProtocolError::HopNotSupported { kind: self.kind });
            }
            if !(p_hop > 0.0 && p_hop <= 1.0) {
                return Err(ProtocolError::BadProbability {
                    field: "p_hop",
                    p: p_hop,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("protocol {kind} requires a design with the {flag} flag, but {design:?} lacks it")]
    FlagViolation {
        kind: ProtocolKind,
        flag: &'static str,
        design: String,
    },
    #[error("write-to-memory protocols need a configuration of rank at least 2")]
    RankTooSmall,
    #[error("{field} must lie in (0, 1], got {p}")]
    BadProbability { field: &'static str, p: f64 },
    #[error("the dbwms kind needs a self-forward probability p")]
    MissingP,
    #[error("p applies to the dbwms kind only")]
    UnexpectedP,
    #[error("query hops apply to the proxy-draw protocols only, not {kind}")]
    HopNotSupported { kind: ProtocolKind },
    #[error("{kind} submissions come from the memory-space machine, not per-query draws")]
    KindIsStateful { kind: ProtocolKind },
    #[error("workload must contain at least one query")]
    EmptyWorkload,
    #[error("workload ordering refers to group {index} but only {groups} groups exist")]
    BadOrdering { index: usize, groups: usize },
    #[error("workload ordering length {len} does not match n_queries {n}")]
    OrderingLengthMismatch { len: usize, n: u64 },
    #[error("grouped workloads need an explicit ordering")]
    GroupsNeedOrdering,
    #[error("workload ordering given without groups")]
    OrderingWithoutGroups,
    #[error("the write-to-memory machine stalled after {rounds} rounds")]
    MachineStalled { rounds: u64 },
    #[error("trace parse error on line {line}: {message}")]
    TraceParse { line: usize, message: String },
    #[error("trace has no header line")]
    MissingHeader,
    #[error("trace is redacted to the database view; ground-truth records are absent")]
    RedactedTrace,
    #[error("trace was produced on design {trace:?}, which does not match {design:?}")]
    DesignMismatch { trace: String, design: String },
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How one query reaches the database.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubmissionMode {
    /// The source submits directly; no memory space is touched.
    SelfDirect,
    /// The source acts as its own proxy but still posts into a space.
    SelfViaSpace,
    /// Another user forwards the query.
    Delegated,
}

/// The source's (hidden) submission decision for one query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubmissionPlan {
    pub source: PointId,
    pub proxy: PointId,
    /// `None` exactly for `SelfDirect`.
    pub memory_space: Option<BlockId>,
    pub mode: SubmissionMode,
}

/// One post along a query's route: the space written to and the user asked
/// to forward. `memory_space` is `None` only for a direct submission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HopPost {
    pub memory_space: Option<BlockId>,
    pub proxy: PointId,
}

/// Ground truth plus observables for one simulated query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryRecord {
    pub query_id: u64,
    /// Queries sharing this label are linkable by subject matter.
    pub link_group: u64,
    /// Hidden ground truth.
    pub source: PointId,
    pub plan: SubmissionPlan,
    /// Every post made for this query; the last entry's proxy contacted the
    /// database. Length 1 unless the hop extension is active.
    pub hop_path: Vec<HopPost>,
}

impl QueryRecord {
    /// The user who actually contacted the database.
    pub fn final_proxy(&self) -> PointId {
        self.hop_path.last().expect("hop path never empty").proxy
    }
}

/// Counters from a write-to-memory run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineCounters {
    pub rounds: u64,
    /// Rounds that burned their whole retry budget without a terminal case.
    pub exhausted_rounds: u64,
}

/// A reproducible simulation output.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub design: String,
    /// Point names of the design the trace was produced on, in id order.
    pub point_names: Vec<String>,
    pub protocol: ProtocolSpec,
    pub seed: u64,
    /// Fingerprint of (design, protocol, workload, seed).
    pub config_hash: String,
    pub records: Vec<QueryRecord>,
    /// Present for write-to-memory runs.
    pub machine: Option<MachineCounters>,
}

/// Per-group source policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SourcePolicy {
    /// Draw one uniform source for the whole group.
    Uniform,
    /// All queries of the group come from this point.
    Fixed(PointId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LinkGroupPlan {
    pub id: u64,
    pub policy: SourcePolicy,
}

/// What to simulate: how many queries, how they are linked, and who asks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Workload {
    n_queries: u64,
    link_plan: Vec<LinkGroupPlan>,
    /// Group index (into `link_plan`) per query; `None` means every query is
    /// its own fresh uniform-source group.
    ordering: Option<Vec<u32>>,
}

/// Resolved ground truth for one query before simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryAssignment {
    pub query_id: u64,
    pub link_group: u64,
    pub source: PointId,
}

impl Workload {
    /// `n` queries, each its own link group with a fresh uniform source.
    pub fn independent(n: u64) -> Self {
        Workload {
            n_queries: n,
            link_plan: Vec::new(),
            ordering: None,
        }
    }

    /// Explicitly grouped queries; `ordering[i]` names the group (index into
    /// `link_plan`) of query i.
    pub fn grouped(link_plan: Vec<LinkGroupPlan>, ordering: Vec<u32>) -> Self {
        Workload {
            n_queries: ordering.len() as u64,
            link_plan,
            ordering: Some(ordering),
        }
    }

    pub fn n_queries(&self) -> u64 {
        self.n_queries
    }

    /// Draws group sources (workload stream) and expands the ordering into
    /// one assignment per query.
    pub fn resolve(&self, design: &SetSystem, seed: u64) -> Result<Vec<QueryAssignment>, ProtocolError> {
        if self.n_queries == 0 {
            return Err(ProtocolError::EmptyWorkload);
        }
        let v = design.v() as u32;
        let mut rng = workload_rng(seed);
        match &self.ordering {
            None => Ok((0..self.n_queries)
                .map(|query_id| QueryAssignment {
                    query_id,
                    link_group: query_id,
                    source: PointId(rng.random_range(0..v)),
                })
                .collect()),
            Some(ordering) => {
                if ordering.len() as u64 != self.n_queries {
                    return Err(ProtocolError::OrderingLengthMismatch {
                        len: ordering.len(),
                        n: self.n_queries,
                    });
                }
                let sources: Vec<PointId> = self
                    .link_plan
                    .iter()
                    .map(|g| match g.policy {
                        SourcePolicy::Uniform => Ok(PointId(rng.random_range(0..v))),
                        SourcePolicy::Fixed(p) => design.check_point(p).map(|()| p),
                    })
                    .collect::<Result<_, DesignError>>()?;
                ordering
                    .iter()
                    .enumerate()
                    .map(|(qid, gi)| {
                        let gi = *gi as usize;
                        let group = self.link_plan.get(gi).ok_or(ProtocolError::BadOrdering {
                            index: gi,
                            groups: self.link_plan.len(),
                        })?;
                        Ok(QueryAssignment {
                            query_id: qid as u64,
                            link_group: group.id,
                            source: sources[gi],
                        })
                    })
                    .collect()
            }
        }
    }
}

/// Draws the submission plan for one query of a proxy-draw protocol.
///
/// The write-to-memory kinds are stateful and rejected here; drive them
/// through [`DbwmState`] instead.
pub fn choose_submission(
    spec: &ProtocolSpec,
    design: &SetSystem,
    profile: &DesignProfile,
    source: PointId,
    rng: &mut impl Rng,
) -> Result<SubmissionPlan, ProtocolError> {
    spec.validate(profile)?;
    design.check_point(source)?;
    if spec.kind.is_write_to_memory() {
        return Err(ProtocolError::KindIsStateful { kind: spec.kind });
    }
    let v = design.v() as u32;
    let plan = match spec.kind {
        ProtocolKind::PdBibdV1 => {
            if rng.random_range(0..v) == 0 {
                self_direct(source)
            } else {
                delegate_in_own_space(design, source, rng)
            }
        }
        ProtocolKind::PdBibdV2 => {
            if rng.random_range(0..v) == 0 {
                self_via_own_space(design, source, rng)
            } else {
                delegate_in_own_space(design, source, rng)
            }
        }
        ProtocolKind::PdCoverV1 => {
            let proxy = PointId(rng.random_range(0..v));
            if proxy == source {
                self_direct(source)
            } else {
                delegate_in_shared_space(design, source, proxy, rng)
            }
        }
        ProtocolKind::PdCoverV2 => {
            let proxy = PointId(rng.random_range(0..v));
            if proxy == source {
                self_via_own_space(design, source, rng)
            } else {
                delegate_in_shared_space(design, source, proxy, rng)
            }
        }
        ProtocolKind::Dbwm | ProtocolKind::Dbwms => unreachable!(),
    };
    Ok(plan)
}

fn self_direct(source: PointId) -> SubmissionPlan {
    SubmissionPlan {
        source,
        proxy: source,
        memory_space: None,
        mode: SubmissionMode::SelfDirect,
    }
}

/// Uniform own space; the source is its own proxy inside it.
fn self_via_own_space(design: &SetSystem, source: PointId, rng: &mut impl Rng) -> SubmissionPlan {
    let spaces = design.blocks_through(source);
    let space = spaces[rng.random_range(0..spaces.len())];
    SubmissionPlan {
        source,
        proxy: source,
        memory_space: Some(space),
        mode: SubmissionMode::SelfViaSpace,
    }
}

/// Uniform own space, then uniform proxy among its other members.
fn delegate_in_own_space(design: &SetSystem, source: PointId, rng: &mut impl Rng) -> SubmissionPlan {
    let spaces = design.blocks_through(source);
    let space = spaces[rng.random_range(0..spaces.len())];
    let proxy = uniform_other_member(design, space, source, rng);
    SubmissionPlan {
        source,
        proxy,
        memory_space: Some(space),
        mode: SubmissionMode::Delegated,
    }
}

/// Uniform space among those containing both source and the drawn proxy.
fn delegate_in_shared_space(
    design: &SetSystem,
    source: PointId,
    proxy: PointId,
    rng: &mut impl Rng,
) -> SubmissionPlan {
    let candidates = design.blocks_with_pair(source, proxy);
    let space = candidates[rng.random_range(0..candidates.len())];
    SubmissionPlan {
        source,
        proxy,
        memory_space: Some(space),
        mode: SubmissionMode::Delegated,
    }
}

/// Uniform member of `space` other than `skip` (which must be a member).
fn uniform_other_member(
    design: &SetSystem,
    space: BlockId,
    skip: PointId,
    rng: &mut impl Rng,
) -> PointId {
    let members = design.block(space);
    let pos = members.binary_search(&skip).expect("skip is a member");
    let mut idx = rng.random_range(0..members.len() - 1);
    if idx >= pos {
        idx += 1;
    }
    members[idx]
}

/// Extends a plan's initial post with the hop rewrites: with probability
/// `p_hop` the current proxy forwards to the database; otherwise it re-posts
/// into one of its own spaces (uniform among those with ≥ 2 members, since a
/// rewrite needs a fresh proxy) and draws a new proxy there.
pub fn apply_hops(
    design: &SetSystem,
    plan: &SubmissionPlan,
    p_hop: f64,
    rng: &mut impl Rng,
) -> Vec<HopPost> {
    debug_assert!(plan.mode != SubmissionMode::SelfDirect);
    let mut path = vec![HopPost {
        memory_space: plan.memory_space,
        proxy: plan.proxy,
    }];
    loop {
        if rng.random::<f64>() < p_hop {
            return path;
        }
        let writer = path.last().unwrap().proxy;
        let usable: Vec<BlockId> = design
            .blocks_through(writer)
            .iter()
            .copied()
            .filter(|b| design.block(*b).len() >= 2)
            .collect();
        let Some(&space) = usable
            .get(rng.random_range(0..usable.len().max(1)))
            .filter(|_| !usable.is_empty())
        else {
            return path; // no space can host a fresh proxy: forward instead
        };
        let proxy = uniform_other_member(design, space, writer, rng);
        path.push(HopPost {
            memory_space: Some(space),
            proxy,
        });
    }
}

/// Runs a full workload under one protocol and seed.
pub fn run_workload(
    design: &SetSystem,
    spec: &ProtocolSpec,
    workload: &Workload,
    seed: u64,
) -> Result<Trace, ProtocolError> {
    let profile = design.profile();
    spec.validate(&profile)?;
    let assignments = workload.resolve(design, seed)?;
    let hash = config_hash(&serde_json::json!({
        "design": serde_json::to_value(design.to_design_file()).expect("design serializes"),
        "protocol": serde_json::to_value(spec).expect("spec serializes"),
        "workload": serde_json::to_value(workload).expect("workload serializes"),
        "seed": seed,
    }));
    let (records, machine) = if spec.kind.is_write_to_memory() {
        let (records, counters) = dbwm::run_machine(design, spec, &assignments, seed)?;
        (records, Some(counters))
    } else {
        let mut records = Vec::with_capacity(assignments.len());
        for a in &assignments {
            let mut rng = query_rng(seed, a.query_id);
            let plan = choose_submission(spec, design, &profile, a.source, &mut rng)?;
            let hop_path = match spec.p_hop {
                Some(p_hop) if plan.mode != SubmissionMode::SelfDirect => {
                    apply_hops(design, &plan, p_hop, &mut rng)
                }
                _ => vec![HopPost {
                    memory_space: plan.memory_space,
                    proxy: plan.proxy,
                }],
            };
            records.push(QueryRecord {
                query_id: a.query_id,
                link_group: a.link_group,
                source: a.source,
                plan,
                hop_path,
            });
        }
        (records, None)
    };
    Ok(Trace {
        design: design.name().to_string(),
        point_names: design.points().to_vec(),
        protocol: *spec,
        seed,
        config_hash: hash,
        records,
        machine,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::fixture;

    fn spec(kind: ProtocolKind) -> ProtocolSpec {
        ProtocolSpec::new(kind)
    }

    #[test]
    fn validate_enforces_design_flags() {
        let fano = fixture("fano").unwrap().profile();
        let config = fixture("config-12-8-2-3").unwrap().profile();
        let covering = fixture("covering-7-8").unwrap().profile();

        assert!(spec(ProtocolKind::PdBibdV1).validate(&fano).is_ok());
        assert!(matches!(
            spec(ProtocolKind::PdBibdV1).validate(&covering),
            Err(ProtocolError::FlagViolation { flag: "bibd", .. })
        ));
        assert!(spec(ProtocolKind::PdCoverV1).validate(&covering).is_ok());
        assert!(matches!(
            spec(ProtocolKind::PdCoverV2).validate(&config),
            Err(ProtocolError::FlagViolation { flag: "covering", .. })
        ));
        assert!(spec(ProtocolKind::Dbwm).validate(&config).is_ok());
        assert!(matches!(
            spec(ProtocolKind::Dbwm).validate(&covering),
            Err(ProtocolError::FlagViolation { flag: "configuration", .. })
        ));
        // Fano is a configuration too (λ = 1), so the machine runs there.
        assert!(spec(ProtocolKind::Dbwm).validate(&fano).is_ok());
    }

    #[test]
    fn validate_enforces_parameters() {
        let config = fixture("config-12-8-2-3").unwrap().profile();
        let fano = fixture("fano").unwrap().profile();
        assert!(matches!(
            spec(ProtocolKind::Dbwms).validate(&config),
            Err(ProtocolError::MissingP)
        ));
        assert!(matches!(
            spec(ProtocolKind::Dbwms).with_p(0.0).validate(&config),
            Err(ProtocolError::BadProbability { field: "p", .. })
        ));
        assert!(spec(ProtocolKind::Dbwms).with_p(1.0).validate(&config).is_ok());
        assert!(matches!(
            spec(ProtocolKind::Dbwm).with_p(0.5).validate(&config),
            Err(ProtocolError::UnexpectedP)
        ));
        assert!(matches!(
            spec(ProtocolKind::Dbwm).with_hop(0.5).validate(&config),
            Err(ProtocolError::HopNotSupported { .. })
        ));
        assert!(matches!(
            spec(ProtocolKind::PdBibdV2).with_hop(1.5).validate(&fano),
            Err(ProtocolError::BadProbability { field: "p_hop", .. })
        ));
        assert!(spec(ProtocolKind::PdBibdV2).with_hop(1.0).validate(&fano).is_ok());
    }

    #[test]
    fn kind_strings_round_trip() {
        for kind in ProtocolKind::ALL {
            let parsed: ProtocolKind = kind.as_str().parse().unwrap();
            assert_eq!(parsed, kind);
            let json = serde_json::to_string(&kind).unwrap();
            assert_eq!(json, format!("\"{}\"", kind.as_str()));
        }
        assert!("pd-bibd-v3".parse::<ProtocolKind>().is_err());
    }

    #[test]
    fn plans_satisfy_structural_invariants() {
        // mode=SELF_DIRECT ⟺ no space ⟺ V1 kind with proxy=source;
        // otherwise source and proxy sit in the space; DELEGATED ⟹ distinct.
        for (fixture_name, kinds) in [
            ("fano", &ProtocolKind::ALL[2..6]),
            ("covering-7-8", &ProtocolKind::ALL[4..6]),
        ] {
            let design = fixture(fixture_name).unwrap();
            let profile = design.profile();
            for kind in kinds {
                let spec = spec(*kind);
                let mut rng = crate::rng::query_rng(11, 0);
                for i in 0..2000 {
                    let source = PointId(i % design.v() as u32);
                    let plan =
                        choose_submission(&spec, &design, &profile, source, &mut rng).unwrap();
                    assert_eq!(plan.source, source);
                    match plan.mode {
                        SubmissionMode::SelfDirect => {
                            assert!(kind.is_v1_style());
                            assert_eq!(plan.proxy, source);
                            assert_eq!(plan.memory_space, None);
                        }
                        SubmissionMode::SelfViaSpace => {
                            assert!(!kind.is_v1_style());
                            assert_eq!(plan.proxy, source);
                            let space = plan.memory_space.unwrap();
                            assert!(design.block_contains(space, source));
                        }
                        SubmissionMode::Delegated => {
                            assert_ne!(plan.proxy, source);
                            let space = plan.memory_space.unwrap();
                            assert!(design.block_contains(space, source));
                            assert!(design.block_contains(space, plan.proxy));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn choose_submission_rejects_stateful_kinds() {
        let design = fixture("config-12-8-2-3").unwrap();
        let profile = design.profile();
        let mut rng = crate::rng::query_rng(0, 0);
        let err = choose_submission(
            &spec(ProtocolKind::Dbwm),
            &design,
            &profile,
            PointId(0),
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, ProtocolError::KindIsStateful { .. }));
    }

    #[test]
    fn forced_space_when_only_one_candidate() {
        // In a triangle design each unordered pair lies in exactly one
        // block, so a delegated draw has no freedom in the space choice.
        let design = crate::designs::develop_difference_set(&[0, 1], 3).unwrap();
        let profile = design.profile();
        let mut rng = crate::rng::query_rng(5, 9);
        for _ in 0..200 {
            let plan = choose_submission(
                &spec(ProtocolKind::PdCoverV2),
                &design,
                &profile,
                PointId(0),
                &mut rng,
            )
            .unwrap();
            if plan.mode == SubmissionMode::Delegated {
                let expected = design.blocks_with_pair(plan.source, plan.proxy);
                assert_eq!(expected.len(), 1);
                assert_eq!(plan.memory_space, Some(expected[0]));
            }
        }
    }

    #[test]
    fn workload_resolution_validates() {
        let design = fixture("fano").unwrap();
        assert!(matches!(
            Workload::independent(0).resolve(&design, 1),
            Err(ProtocolError::EmptyWorkload)
        ));
        let w = Workload::grouped(
            vec![LinkGroupPlan {
                id: 0,
                policy: SourcePolicy::Uniform,
            }],
            vec![0, 1, 0],
        );
        assert!(matches!(
            w.resolve(&design, 1),
            Err(ProtocolError::BadOrdering { index: 1, groups: 1 })
        ));
        let w = Workload::grouped(
            vec![LinkGroupPlan {
                id: 7,
                policy: SourcePolicy::Fixed(PointId(99)),
            }],
            vec![0],
        );
        assert!(w.resolve(&design, 1).is_err());
    }

    #[test]
    fn fixed_group_sources_propagate() {
        let design = fixture("fano").unwrap();
        let u3 = design.point_id("U3").unwrap();
        let w = Workload::grouped(
            vec![LinkGroupPlan {
                id: 42,
                policy: SourcePolicy::Fixed(u3),
            }],
            vec![0, 0, 0],
        );
        let trace = run_workload(
            &design,
            &spec(ProtocolKind::PdBibdV2),
            &w,
            9,
        )
        .unwrap();
        assert_eq!(trace.records.len(), 3);
        for r in &trace.records {
            assert_eq!(r.source, u3);
            assert_eq!(r.link_group, 42);
        }
    }

    #[test]
    fn traces_are_deterministic() {
        let design = fixture("bibd-10-15-6-4-2").unwrap();
        let s = spec(ProtocolKind::PdCoverV2).with_hop(0.5);
        let w = Workload::independent(500);
        let a = run_workload(&design, &s, &w, 1234).unwrap();
        let b = run_workload(&design, &s, &w, 1234).unwrap();
        assert_eq!(a, b);
        let c = run_workload(&design, &s, &w, 1235).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn hop_paths_chain_through_the_rewriting_user() {
        let design = fixture("fano").unwrap();
        let s = spec(ProtocolKind::PdBibdV2).with_hop(0.4);
        let trace = run_workload(&design, &s, &Workload::independent(2000), 7).unwrap();
        let mut saw_multi = false;
        for r in &trace.records {
            if r.plan.mode == SubmissionMode::SelfDirect {
                assert_eq!(r.hop_path.len(), 1);
                continue;
            }
            assert_eq!(r.hop_path[0].memory_space, r.plan.memory_space);
            assert_eq!(r.hop_path[0].proxy, r.plan.proxy);
            for pair in r.hop_path.windows(2) {
                let writer = pair[0].proxy;
                let space = pair[1].memory_space.unwrap();
                // The rewriting user posts into one of its own spaces and
                // never names itself as the fresh proxy.
                assert!(design.block_contains(space, writer));
                assert!(design.block_contains(space, pair[1].proxy));
                assert_ne!(pair[1].proxy, writer);
            }
            saw_multi |= r.hop_path.len() > 1;
        }
        assert!(saw_multi, "p_hop = 0.4 should produce rewrites");
    }

    #[test]
    fn hop_probability_one_means_single_post() {
        let design = fixture("fano").unwrap();
        let s = spec(ProtocolKind::PdBibdV2).with_hop(1.0);
        let trace = run_workload(&design, &s, &Workload::independent(500), 3).unwrap();
        assert!(trace.records.iter().all(|r| r.hop_path.len() == 1));
    }

    #[test]
    fn every_record_keeps_source_and_proxy_in_space() {
        for (name, kind) in [
            ("fano", ProtocolKind::PdBibdV1),
            ("fano", ProtocolKind::PdBibdV2),
            ("covering-7-8", ProtocolKind::PdCoverV1),
            ("covering-7-8", ProtocolKind::PdCoverV2),
        ] {
            let design = fixture(name).unwrap();
            let trace =
                run_workload(&design, &spec(kind), &Workload::independent(3000), 21).unwrap();
            for r in &trace.records {
                match r.plan.memory_space {
                    None => assert_eq!(r.plan.mode, SubmissionMode::SelfDirect),
                    Some(space) => {
                        assert!(design.block_contains(space, r.source));
                        assert!(design.block_contains(space, r.plan.proxy));
                    }
                }
            }
        }
    }

    #[test]
    fn proxy_equals_source_frequency_is_about_one_over_v() {
        let design = fixture("fano").unwrap();
        let n = 100_000u64;
        for kind in [ProtocolKind::PdBibdV1, ProtocolKind::PdCoverV2] {
            let trace =
                run_workload(&design, &spec(kind), &Workload::independent(n), 99).unwrap();
            let selfies = trace
                .records
                .iter()
                .filter(|r| r.plan.proxy == r.source)
                .count() as f64;
            let p = selfies / n as f64;
            let expect = 1.0 / 7.0;
            let bound = 4.0 * (expect * (1.0 - expect) / n as f64).sqrt();
            assert!((p - expect).abs() <= bound, "{kind}: {p} vs {expect}");
        }
    }
}
