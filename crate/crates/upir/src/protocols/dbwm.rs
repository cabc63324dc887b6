//! The stateful write-to-memory machine.
//!
//! Every memory space is a single slot cycling through garbage → query →
//! answer. In each round one user acts: it probes its own spaces (retrying
//! up to `4 · degree` times) and reacts to what it finds — forwarding
//! other users' queries, consuming answers to its own, and posting its next
//! pending query into garbage or a just-consumed slot.

use rand::Rng;
use std::collections::VecDeque;

use crate::designs::{BlockId, PointId, SetSystem};
use crate::protocols::{
    HopPost, MachineCounters, ProtocolError, ProtocolKind, ProtocolSpec, QueryAssignment,
    QueryRecord, SubmissionMode, SubmissionPlan,
};
use crate::rng::machine_rng;

/// Re-exported counters type under its protocol-facing name.
pub type DbwmStats = MachineCounters;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Garbage,
    /// An unanswered query posted by `owner`; `index` points into the
    /// assignment list.
    Query { owner: PointId, index: usize },
    /// An answer waiting for `owner` to pick it up.
    Answer { owner: PointId },
}

/// What one round did.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoundOutcome {
    /// Queries the acting user forwarded this round (it may sweep several
    /// spaces before hitting a terminal case).
    pub forwarded: Vec<QueryRecord>,
    /// The acting user posted one of its own pending queries.
    pub posted: bool,
    /// The retry budget ran out before a terminal case.
    pub exhausted: bool,
}

/// Single-slot memory-space machine for the write-to-memory protocols.
#[derive(Debug)]
pub struct DbwmState<'a> {
    design: &'a SetSystem,
    /// Self-forward probability; `None` for the plain variant.
    p_self: Option<f64>,
    slots: Vec<Slot>,
    /// Pending assignment indices per user, in submission order.
    pending: Vec<VecDeque<usize>>,
    /// True while a user has a query in flight (posted, answer unconsumed).
    waiting: Vec<bool>,
    assignments: &'a [QueryAssignment],
    forwarded: u64,
    counters: MachineCounters,
}

impl<'a> DbwmState<'a> {
    pub fn new(
        design: &'a SetSystem,
        spec: &ProtocolSpec,
        assignments: &'a [QueryAssignment],
    ) -> Result<Self, ProtocolError> {
        spec.validate(&design.profile())?;
        if !spec.kind.is_write_to_memory() {
            return Err(ProtocolError::KindIsStateful { kind: spec.kind });
        }
        let mut pending = vec![VecDeque::new(); design.v()];
        for (i, a) in assignments.iter().enumerate() {
            design.check_point(a.source)?;
            pending[a.source.0 as usize].push_back(i);
        }
        Ok(DbwmState {
            design,
            p_self: match spec.kind {
                ProtocolKind::Dbwms => spec.p,
                _ => None,
            },
            slots: vec![Slot::Garbage; design.b()],
            pending,
            waiting: vec![false; design.v()],
            assignments,
            forwarded: 0,
            counters: MachineCounters::default(),
        })
    }

    /// Queries already forwarded to the database.
    pub fn forwarded(&self) -> u64 {
        self.forwarded
    }

    /// True once every assignment has been forwarded.
    pub fn done(&self) -> bool {
        self.forwarded as usize == self.assignments.len()
    }

    pub fn counters(&self) -> MachineCounters {
        self.counters
    }

    fn record_for(&self, index: usize, proxy: PointId, space: BlockId) -> QueryRecord {
        let a = self.assignments[index];
        let mode = if proxy == a.source {
            SubmissionMode::SelfViaSpace
        } else {
            SubmissionMode::Delegated
        };
        QueryRecord {
            query_id: a.query_id,
            link_group: a.link_group,
            source: a.source,
            plan: SubmissionPlan {
                source: a.source,
                proxy,
                memory_space: Some(space),
                mode,
            },
            hop_path: vec![HopPost {
                memory_space: Some(space),
                proxy,
            }],
        }
    }

    /// One round for `actor`: probe own spaces until a terminal case or the
    /// retry budget (4 · degree) runs out.
    pub fn round(&mut self, actor: PointId, rng: &mut impl Rng) -> Result<RoundOutcome, ProtocolError> {
        self.design.check_point(actor)?;
        self.counters.rounds += 1;
        let spaces = self.design.blocks_through(actor);
        let ai = actor.0 as usize;
        let mut out = RoundOutcome::default();
        let wants_to_post = !self.waiting[ai] && !self.pending[ai].is_empty();
        for _ in 0..4 * spaces.len() {
            let space = spaces[rng.random_range(0..spaces.len())];
            let si = space.0 as usize;
            match self.slots[si] {
                Slot::Garbage => {
                    if wants_to_post && !out.posted {
                        let index = self.pending[ai].pop_front().expect("pending nonempty");
                        self.slots[si] = Slot::Query { owner: actor, index };
                        self.waiting[ai] = true;
                        out.posted = true;
                    }
                    // Terminal either way: posting ends the turn, and a
                    // maintenance pass leaves garbage as garbage.
                    return Ok(out);
                }
                Slot::Query { owner, index } if owner != actor => {
                    // Forward the stranger's query and leave the answer.
                    out.forwarded.push(self.record_for(index, actor, space));
                    self.forwarded += 1;
                    self.slots[si] = Slot::Answer { owner };
                }
                Slot::Query { index, .. } => {
                    // The actor's own unanswered query. The self-forwarding
                    // variant pushes it through with probability p.
                    if let Some(p) = self.p_self {
                        if rng.random::<f64>() < p {
                            out.forwarded.push(self.record_for(index, actor, space));
                            self.forwarded += 1;
                            self.slots[si] = Slot::Answer { owner: actor };
                        }
                    }
                }
                Slot::Answer { owner } if owner == actor => {
                    // Consume the answer; the slot is free again, so post the
                    // next pending query straight into it.
                    match self.pending[ai].pop_front() {
                        Some(index) => {
                            self.slots[si] = Slot::Query { owner: actor, index };
                            out.posted = true;
                        }
                        None => {
                            self.slots[si] = Slot::Garbage;
                            self.waiting[ai] = false;
                        }
                    }
                    return Ok(out);
                }
                Slot::Answer { .. } => {}
            }
        }
        out.exhausted = true;
        self.counters.exhausted_rounds += 1;
        Ok(out)
    }
}

/// Drives the machine with uniformly random actors until every assignment
/// has been forwarded; returns records sorted by query id.
pub(crate) fn run_machine(
    design: &SetSystem,
    spec: &ProtocolSpec,
    assignments: &[QueryAssignment],
    seed: u64,
) -> Result<(Vec<QueryRecord>, MachineCounters), ProtocolError> {
    let mut state = DbwmState::new(design, spec, assignments)?;
    let mut rng = machine_rng(seed);
    let v = design.v() as u32;
    let max_rounds = 1_000u64
        .saturating_mul(assignments.len() as u64)
        .saturating_add(1_000_000);
    let mut records = Vec::with_capacity(assignments.len());
    while !state.done() {
        if state.counters().rounds >= max_rounds {
            return Err(ProtocolError::MachineStalled {
                rounds: state.counters().rounds,
            });
        }
        let actor = PointId(rng.random_range(0..v));
        let outcome = state.round(actor, &mut rng)?;
        records.extend(outcome.forwarded);
    }
    records.sort_by_key(|r| r.query_id);
    Ok((records, state.counters()))
}
