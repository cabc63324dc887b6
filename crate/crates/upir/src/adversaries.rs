//! Attacks on simulated protocol runs and the exact quantities they are
//! measured against.
//!
//! Three attacker positions are modeled:
//!
//! - the **database**, which sees only who hands queries in
//!   ([`db_candidates`], [`db_intersection_attack`]);
//! - a **coalition** of users pooling what their memory spaces show them
//!   ([`coalition_candidates`]);
//! - the **analyst**, who brute-forces the worst case over all coalitions
//!   and observation sequences ([`measure_anonymity`]) or evaluates the
//!   closed-form observer posterior ([`theoretical_posterior`]).
//!
//! Candidate-set rules depend only on whether a kind's visible posts can
//! have been written by their own source: never for `Dbwm`, `PdBibdV1`, and
//! `PdCoverV1` (their self-submissions bypass the memory spaces), possibly
//! for `Dbwms`, `PdBibdV2`, and `PdCoverV2`.

use itertools::Itertools;
use num_rational::Ratio;
use rand::Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

use crate::designs::{BlockId, DesignError, DesignProfile, PointId, SetSystem};
use crate::protocols::ProtocolKind;
use crate::rng::attack_rng;

#[derive(Debug, Error)]
pub enum AdversaryError {
    #[error("no observations supplied")]
    NoObservations,
    #[error(
        "candidate set became empty after step {after_step}: the observations are inconsistent \
         (not actually linked, or attributed to the wrong protocol kind)"
    )]
    EmptyIntersection { after_step: usize },
    #[error("coalition is empty")]
    EmptyCoalition,
    #[error("observation {index}: no coalition member belongs to the memory space")]
    ObservationNotVisible { index: usize },
    #[error("observation {index}: the named proxy is not a member of the memory space")]
    ProxyNotInSpace { index: usize },
    #[error("rho must be at least 1")]
    BadRho,
    #[error("coalition size {c} exceeds the {max} users other than the source")]
    BadCoalitionSize { c: usize, max: usize },
    #[error("n_samples must be at least 1")]
    BadSampleCount,
    #[error("source has no memory space that admits an observation")]
    NoAdmissibleObservation,
    #[error(
        "posterior formulas need a pairwise balanced design of uniform degree; {design:?} is not one"
    )]
    NotRegularPbd { design: String },
    #[error("posterior formulas apply to the proxy-draw kinds, not {kind}")]
    KindHasNoPosterior { kind: ProtocolKind },
    #[error("the {role} is not a member of the memory space")]
    NotMemberOfSpace { role: &'static str },
    #[error("the posterior conditions on an observer distinct from the designated proxy")]
    ObserverIsProxy,
    #[error("a space of two members admits no post the observer could attribute to a third user")]
    NoAdmissibleSources,
    #[error(transparent)]
    Design(#[from] DesignError),
}

/// True when the kind's memory-space posts can have been written by their
/// own source; such posts leave the proxy inside the candidate set.
fn self_posting(kind: ProtocolKind) -> bool {
    matches!(
        kind,
        ProtocolKind::Dbwms | ProtocolKind::PdBibdV2 | ProtocolKind::PdCoverV2
    )
}

/// One step of an attack derivation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivationStep {
    /// Human-readable description of the observation.
    pub observation: String,
    /// Candidate sources admitted by this observation alone.
    pub candidates: Vec<PointId>,
    /// Points the running intersection lost at this step.
    pub eliminated: Vec<PointId>,
}

/// Result of an attack: who could still be the source, and why.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet {
    /// Sorted; never empty on consistent input (a correct attack cannot
    /// eliminate the true source).
    pub candidates: Vec<PointId>,
    pub derivation: Vec<DerivationStep>,
}

fn all_points(design: &SetSystem) -> Vec<PointId> {
    (0..design.v() as u32).map(PointId).collect()
}

fn intersect_sorted(a: &[PointId], b: &[PointId]) -> (Vec<PointId>, Vec<PointId>) {
    let keep: Vec<PointId> = a.iter().copied().filter(|p| b.binary_search(p).is_ok()).collect();
    let lost: Vec<PointId> = a.iter().copied().filter(|p| b.binary_search(p).is_err()).collect();
    (keep, lost)
}

/// Who could have originated a query that `proxy` handed to the database.
///
/// Write-to-memory: someone sharing a space with the proxy — including the
/// proxy itself only in the self-forwarding variant. Proxy-draw kinds leak
/// nothing through the proxy identity (it is drawn uniformly), so every
/// user remains a candidate.
pub fn db_candidates(
    design: &SetSystem,
    kind: ProtocolKind,
    proxy: PointId,
) -> Result<CandidateSet, AdversaryError> {
    design.check_point(proxy)?;
    let candidates = match kind {
        ProtocolKind::Dbwm => design.neighborhood(proxy)?,
        ProtocolKind::Dbwms => {
            let mut n = design.neighborhood(proxy)?;
            let pos = n.binary_search(&proxy).unwrap_or_else(|i| i);
            n.insert(pos, proxy);
            n
        }
        _ => all_points(design),
    };
    let (_, eliminated) = intersect_sorted(&all_points(design), &candidates);
    Ok(CandidateSet {
        candidates: candidates.clone(),
        derivation: vec![DerivationStep {
            observation: format!("database received a query from {}", design.point_name(proxy)),
            candidates,
            eliminated,
        }],
    })
}

/// Intersects [`db_candidates`] across a run of linked queries.
pub fn db_intersection_attack(
    design: &SetSystem,
    kind: ProtocolKind,
    proxies: &[PointId],
) -> Result<CandidateSet, AdversaryError> {
    if proxies.is_empty() {
        return Err(AdversaryError::NoObservations);
    }
    let mut running = all_points(design);
    let mut derivation = Vec::with_capacity(proxies.len());
    for (i, &proxy) in proxies.iter().enumerate() {
        let step_set = db_candidates(design, kind, proxy)?.candidates;
        let (keep, eliminated) = intersect_sorted(&running, &step_set);
        derivation.push(DerivationStep {
            observation: format!("database received a query from {}", design.point_name(proxy)),
            candidates: step_set,
            eliminated,
        });
        if keep.is_empty() {
            return Err(AdversaryError::EmptyIntersection { after_step: i + 1 });
        }
        running = keep;
    }
    Ok(CandidateSet {
        candidates: running,
        derivation,
    })
}

/// What a coalition can conclude from linked posts it saw in its spaces.
///
/// Each observation is (memory space, designated proxy) for one post, all
/// posts belonging to queries of a single hidden source. Every space must
/// contain a coalition member (otherwise the coalition could not have seen
/// the post). The source is known to sit in every observed space and
/// outside the coalition; kinds whose posts are never self-written also
/// exclude each post's proxy.
pub fn coalition_candidates(
    design: &SetSystem,
    kind: ProtocolKind,
    observations: &[(BlockId, PointId)],
    coalition: &[PointId],
) -> Result<CandidateSet, AdversaryError> {
    if coalition.is_empty() {
        return Err(AdversaryError::EmptyCoalition);
    }
    let mut members: Vec<PointId> = coalition.to_vec();
    members.sort_unstable();
    members.dedup();
    for &m in &members {
        design.check_point(m)?;
    }
    let self_post = self_posting(kind);

    // Validate before deriving, so errors are not order-dependent.
    for (i, &(space, proxy)) in observations.iter().enumerate() {
        design.check_block(space)?;
        if !design.block_contains(space, proxy) {
            return Err(AdversaryError::ProxyNotInSpace { index: i });
        }
        if !members.iter().any(|m| design.block_contains(space, *m)) {
            return Err(AdversaryError::ObservationNotVisible { index: i });
        }
    }

    let (prior, excluded) = intersect_sorted(
        &all_points(design),
        &all_points(design)
            .into_iter()
            .filter(|p| members.binary_search(p).is_err())
            .collect::<Vec<_>>(),
    );
    let mut derivation = vec![DerivationStep {
        observation: "coalition members cannot be the source".to_string(),
        candidates: prior.clone(),
        eliminated: excluded,
    }];
    let mut running = prior;
    for (i, &(space, proxy)) in observations.iter().enumerate() {
        let q: Vec<PointId> = design
            .block(space)
            .iter()
            .copied()
            .filter(|p| members.binary_search(p).is_err())
            .filter(|p| self_post || *p != proxy)
            .collect();
        let (keep, eliminated) = intersect_sorted(&running, &q);
        derivation.push(DerivationStep {
            observation: format!(
                "post in space {} {{{}}} for proxy {}",
                space,
                design.point_names(design.block(space)).join(","),
                design.point_name(proxy)
            ),
            candidates: q,
            eliminated,
        });
        if keep.is_empty() {
            return Err(AdversaryError::EmptyIntersection { after_step: i + 1 });
        }
        running = keep;
    }
    Ok(CandidateSet {
        candidates: running,
        derivation,
    })
}

/// A worst case found by [`measure_anonymity`]: replaying these
/// observations through [`coalition_candidates`] reproduces `kappa`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub source: PointId,
    pub memory_spaces: Vec<BlockId>,
    pub proxies: Vec<PointId>,
    pub coalition: Vec<PointId>,
}

/// Measured worst-case anonymity parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnonymityReport {
    pub kind: ProtocolKind,
    pub rho: usize,
    pub c: usize,
    /// Minimum candidate-set size over all admissible attacks; `v` when no
    /// coalition of size `c` can see any observation sequence.
    pub kappa: usize,
    pub witness: Option<Witness>,
    /// True when the evaluation budget ran out; `kappa` is then only an
    /// upper bound on the true minimum.
    pub partial: bool,
    /// Coalition evaluations performed.
    pub evaluations: u64,
}

/// Candidate-set size for one fully specified attack, without building the
/// derivation (hot path of the brute force).
fn surviving_candidate_count(
    design: &SetSystem,
    self_post: bool,
    spaces: &[BlockId],
    proxies: &[PointId],
    coalition: &[PointId],
) -> usize {
    let first = design.block(spaces[0]);
    first
        .iter()
        .filter(|p| !coalition.contains(p))
        .filter(|p| self_post || **p != proxies[0])
        .filter(|p| {
            spaces.iter().zip(proxies).skip(1).all(|(&b, &proxy)| {
                design.block_contains(b, **p) && (self_post || **p != proxy)
            })
        })
        .count()
}

/// Brute-force (ρ,c,κ)-anonymity: the minimum candidate-set size over
/// every source, every length-ρ multiset of its memory spaces, every
/// admissible proxy assignment, and every size-c coalition (excluding the
/// source) that sees all ρ observations. Enumeration is lexicographic, so
/// the reported witness is the smallest one attaining the minimum.
///
/// With c = 0 nothing is observable and the report degenerates to κ = v
/// with no witness. If `budget` coalition evaluations are exhausted the
/// report is flagged partial and κ is only an upper bound.
pub fn measure_anonymity(
    design: &SetSystem,
    kind: ProtocolKind,
    rho: usize,
    c: usize,
    budget: u64,
) -> Result<AnonymityReport, AdversaryError> {
    if rho == 0 {
        return Err(AdversaryError::BadRho);
    }
    let v = design.v();
    if c > v - 1 {
        return Err(AdversaryError::BadCoalitionSize { c, max: v - 1 });
    }
    let self_post = self_posting(kind);
    let mut report = AnonymityReport {
        kind,
        rho,
        c,
        kappa: v,
        witness: None,
        partial: false,
        evaluations: 0,
    };
    let points = all_points(design);
    'outer: for &source in &points {
        let others: Vec<PointId> = points.iter().copied().filter(|p| *p != source).collect();
        for spaces in design
            .blocks_through(source)
            .iter()
            .copied()
            .combinations_with_replacement(rho)
        {
            // Admissible proxies: any co-member per space for kinds that
            // never self-post; for self-posting kinds the candidate rule
            // ignores the proxy, so a single representative (the source
            // itself, posting its own query) covers them all.
            let proxy_choices: Vec<Vec<PointId>> = if self_post {
                vec![vec![source]; rho]
            } else {
                spaces
                    .iter()
                    .map(|&b| {
                        design
                            .block(b)
                            .iter()
                            .copied()
                            .filter(|p| *p != source)
                            .collect()
                    })
                    .collect()
            };
            for proxies in proxy_choices
                .iter()
                .map(|ps| ps.iter().copied())
                .multi_cartesian_product()
            {
                for coalition in others.iter().copied().combinations(c) {
                    let sees_all = spaces
                        .iter()
                        .all(|&b| coalition.iter().any(|m| design.block_contains(b, *m)));
                    if !sees_all {
                        continue;
                    }
                    if report.evaluations >= budget {
                        report.partial = true;
                        break 'outer;
                    }
                    report.evaluations += 1;
                    let size =
                        surviving_candidate_count(design, self_post, &spaces, &proxies, &coalition);
                    debug_assert!(size >= 1, "the source always survives its own observations");
                    if size < report.kappa {
                        report.kappa = size;
                        report.witness = Some(Witness {
                            source,
                            memory_spaces: spaces.clone(),
                            proxies: proxies.clone(),
                            coalition: coalition.clone(),
                        });
                        if size == 1 {
                            // The source always survives, so κ = 1 is the
                            // global floor; enumeration is lexicographic, so
                            // the first witness attaining it is the one to
                            // report.
                            break 'outer;
                        }
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Exact observer posterior over sources after seeing one post.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PosteriorTable {
    pub observer: PointId,
    pub memory_space: BlockId,
    pub proxy: PointId,
    /// Probability per candidate source (the space's members other than
    /// the observer). Sums to exactly 1.
    pub probabilities: BTreeMap<PointId, Ratio<u64>>,
}

impl PosteriorTable {
    pub fn probability(&self, source: PointId) -> Ratio<u64> {
        self.probabilities
            .get(&source)
            .copied()
            .unwrap_or_else(|| Ratio::new(0, 1))
    }
}

/// Closed-form posterior of the hidden source, from the point of view of an
/// observer who sees in one of its spaces a post (not its own) designating
/// `proxy`.
///
/// Requires a pairwise balanced design of uniform degree r. For kinds that
/// never self-post, the proxy cannot be the source and all other members
/// are equally likely; for self-posting kinds the proxy keeps weight
/// λ/(λ+r(s−2)) and each other member r/(λ+r(s−2)), where s is the space
/// size.
pub fn theoretical_posterior(
    design: &SetSystem,
    profile: &DesignProfile,
    kind: ProtocolKind,
    memory_space: BlockId,
    proxy: PointId,
    observer: PointId,
) -> Result<PosteriorTable, AdversaryError> {
    if kind.is_write_to_memory() {
        return Err(AdversaryError::KindHasNoPosterior { kind });
    }
    let (Some(r), Some(lambda), true) = (profile.r, profile.lambda, profile.flags.pbd) else {
        return Err(AdversaryError::NotRegularPbd {
            design: design.name().to_string(),
        });
    };
    design.check_block(memory_space)?;
    design.check_point(proxy)?;
    design.check_point(observer)?;
    if !design.block_contains(memory_space, proxy) {
        return Err(AdversaryError::NotMemberOfSpace { role: "proxy" });
    }
    if !design.block_contains(memory_space, observer) {
        return Err(AdversaryError::NotMemberOfSpace { role: "observer" });
    }
    if observer == proxy {
        return Err(AdversaryError::ObserverIsProxy);
    }
    let members = design.block(memory_space);
    let s = members.len() as u64;
    let mut probabilities = BTreeMap::new();
    if self_posting(kind) {
        let den = lambda as u64 + r as u64 * (s - 2);
        for &m in members.iter().filter(|m| **m != observer) {
            let num = if m == proxy { lambda as u64 } else { r as u64 };
            probabilities.insert(m, Ratio::new(num, den));
        }
    } else {
        if s == 2 {
            return Err(AdversaryError::NoAdmissibleSources);
        }
        for &m in members.iter().filter(|m| **m != observer) {
            let p = if m == proxy {
                Ratio::new(0, 1)
            } else {
                Ratio::new(1, s - 2)
            };
            probabilities.insert(m, p);
        }
    }
    debug_assert_eq!(
        probabilities.values().copied().sum::<Ratio<u64>>(),
        Ratio::new(1, 1)
    );
    Ok(PosteriorTable {
        observer,
        memory_space,
        proxy,
        probabilities,
    })
}

/// Monte Carlo estimate of how often a random coalition pins down the
/// source exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuccessRateEstimate {
    pub successes: u64,
    pub n_samples: u64,
    pub rate: f64,
    /// Binomial standard error sqrt(rate·(1−rate)/n).
    pub std_error: f64,
}

/// Estimates Pr[a uniformly random coalition of size c, seeing a uniformly
/// random admissible sequence of ρ observations from `source`, ends with
/// candidate set exactly {source}].
///
/// Observations the coalition cannot see (no member in the space) carry no
/// information; a coalition that sees nothing knows only that the source
/// is not among its members.
pub fn random_coalition_success_rate(
    design: &SetSystem,
    kind: ProtocolKind,
    rho: usize,
    c: usize,
    source: PointId,
    n_samples: u64,
    seed: u64,
) -> Result<SuccessRateEstimate, AdversaryError> {
    if rho == 0 {
        return Err(AdversaryError::BadRho);
    }
    design.check_point(source)?;
    let v = design.v();
    if c > v - 1 {
        return Err(AdversaryError::BadCoalitionSize { c, max: v - 1 });
    }
    if n_samples == 0 {
        return Err(AdversaryError::BadSampleCount);
    }
    let self_post = self_posting(kind);
    let spaces: Vec<BlockId> = design
        .blocks_through(source)
        .iter()
        .copied()
        .filter(|&b| self_post || design.block(b).len() >= 2)
        .collect();
    if spaces.is_empty() {
        return Err(AdversaryError::NoAdmissibleObservation);
    }
    let others: Vec<PointId> = all_points(design)
        .into_iter()
        .filter(|p| *p != source)
        .collect();
    let mut rng = attack_rng(seed);
    let mut successes = 0u64;
    let mut obs: Vec<(BlockId, PointId)> = Vec::with_capacity(rho);
    for _ in 0..n_samples {
        let coalition: Vec<PointId> = rand::seq::index::sample(&mut rng, others.len(), c)
            .iter()
            .map(|i| others[i])
            .collect();
        obs.clear();
        for _ in 0..rho {
            let space = spaces[rng.random_range(0..spaces.len())];
            let members = design.block(space);
            let proxy = if self_post {
                members[rng.random_range(0..members.len())]
            } else {
                let pos = members.binary_search(&source).expect("source in own space");
                let mut idx = rng.random_range(0..members.len() - 1);
                if idx >= pos {
                    idx += 1;
                }
                members[idx]
            };
            obs.push((space, proxy));
        }
        // Candidate set: everyone outside the coalition, narrowed by each
        // visible observation.
        let mut candidates: Vec<PointId> = all_points(design)
            .into_iter()
            .filter(|p| !coalition.contains(p))
            .collect();
        for &(space, proxy) in &obs {
            if !coalition.iter().any(|m| design.block_contains(space, *m)) {
                continue;
            }
            candidates.retain(|p| {
                design.block_contains(space, *p) && (self_post || *p != proxy)
            });
        }
        if candidates == [source] {
            successes += 1;
        }
    }
    let rate = successes as f64 / n_samples as f64;
    Ok(SuccessRateEstimate {
        successes,
        n_samples,
        rate,
        std_error: (rate * (1.0 - rate) / n_samples as f64).sqrt(),
    })
}
