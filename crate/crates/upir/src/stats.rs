//! Empirical estimators over simulation traces and the tolerance checks
//! that compare them with exact values.
//!
//! Every check uses the normal approximation for a binomial proportion:
//! an observed frequency passes when it lies within `z·sqrt(p(1−p)/n)` of
//! the exact probability `p`. At the default `z = 4` a single two-sided
//! cell flakes with probability ≈ 6.3·10⁻⁵, so even verdicts aggregating
//! a few hundred cells are overwhelmingly stable — and because every
//! estimator consumes a seeded trace, a given (seed, n) either passes
//! forever or fails forever.

use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

use crate::adversaries::{theoretical_posterior, AdversaryError, PosteriorTable};
use crate::designs::{BlockId, DesignError, PointId, SetSystem};
use crate::protocols::{
    run_workload, ProtocolError, ProtocolKind, ProtocolSpec, SubmissionMode, Trace, Workload,
};
use crate::util::write_atomic;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("trace contains no records")]
    EmptyTrace,
    #[error("need at least {needed} trials for this check, got {got}")]
    InsufficientSamples { needed: u64, got: u64 },
    #[error(
        "only {got} trace records match the conditioning event (need at least {needed}); \
         rerun with more queries"
    )]
    ConditioningTooRare { needed: u64, got: u64 },
    #[error("trace was produced without the query-hop extension")]
    HopExtensionAbsent,
    #[error("{kind} does not make database contacts uniform; nothing to verify")]
    KindUnsupported { kind: ProtocolKind },
    #[error("trace was produced on design {trace:?}, not {design:?}")]
    DesignMismatch { trace: String, design: String },
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A labelled contingency table of raw counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrequencyTable {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    /// Row-major counts, `row_labels.len() × col_labels.len()`.
    pub counts: Vec<u64>,
    /// Total observations.
    pub n: u64,
}

impl FrequencyTable {
    pub fn new(row_labels: Vec<String>, col_labels: Vec<String>) -> Self {
        let counts = vec![0; row_labels.len() * col_labels.len()];
        FrequencyTable {
            row_labels,
            col_labels,
            counts,
            n: 0,
        }
    }

    pub fn inc(&mut self, row: usize, col: usize) {
        self.counts[row * self.col_labels.len() + col] += 1;
        self.n += 1;
    }

    pub fn count(&self, row: usize, col: usize) -> u64 {
        self.counts[row * self.col_labels.len() + col]
    }

    pub fn col_total(&self, col: usize) -> u64 {
        (0..self.row_labels.len()).map(|r| self.count(r, col)).sum()
    }

    pub fn row_total(&self, row: usize) -> u64 {
        (0..self.col_labels.len()).map(|c| self.count(row, c)).sum()
    }

    /// Empirical Pr[row | column]; `None` when the column is empty.
    pub fn column_conditional(&self, row: usize, col: usize) -> Option<f64> {
        let total = self.col_total(col);
        (total > 0).then(|| self.count(row, col) as f64 / total as f64)
    }

    /// CSV with one header row; `corner` labels the row dimension.
    pub fn to_csv_string(&self, corner: &str) -> Result<String, StatsError> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let mut header = vec![corner.to_string()];
        header.extend(self.col_labels.iter().cloned());
        writer.write_record(&header)?;
        for (r, label) in self.row_labels.iter().enumerate() {
            let mut record = vec![label.clone()];
            record.extend((0..self.col_labels.len()).map(|c| self.count(r, c).to_string()));
            writer.write_record(&record)?;
        }
        let bytes = writer
            .into_inner()
            .expect("in-memory csv writer never fails to flush");
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: &Path, corner: &str) -> Result<(), StatsError> {
        let text = self.to_csv_string(corner)?;
        write_atomic(path, text.as_bytes())?;
        Ok(())
    }
}

/// One compared frequency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellVerdict {
    pub row: String,
    pub col: String,
    /// Sample size the cell's frequency was estimated from.
    pub n: u64,
    pub observed: f64,
    pub expected: f64,
    pub deviation: f64,
    /// `z·sqrt(expected·(1−expected)/n)`; 0 when `expected` is 0 or 1, in
    /// which case the observation must match exactly.
    pub bound: f64,
    pub pass: bool,
}

/// Outcome of comparing a whole table of frequencies against exact values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToleranceVerdict {
    /// What was compared, e.g. `Pr[source | proxy] vs uniform`.
    pub statistic: String,
    pub z: f64,
    pub max_abs_deviation: f64,
    pub pass: bool,
    pub cells: Vec<CellVerdict>,
}

impl ToleranceVerdict {
    fn from_cells(statistic: String, z: f64, cells: Vec<CellVerdict>) -> Self {
        ToleranceVerdict {
            statistic,
            z,
            max_abs_deviation: cells.iter().map(|c| c.deviation).fold(0.0, f64::max),
            pass: cells.iter().all(|c| c.pass),
            cells,
        }
    }

    /// Cells that failed their bound.
    pub fn failures(&self) -> impl Iterator<Item = &CellVerdict> {
        self.cells.iter().filter(|c| !c.pass)
    }
}

fn cell(row: String, col: String, n: u64, observed: f64, expected: f64, z: f64) -> CellVerdict {
    let deviation = (observed - expected).abs();
    let exact = expected == 0.0 || expected == 1.0 || n == 0;
    let bound = if exact {
        0.0
    } else {
        z * (expected * (1.0 - expected) / n as f64).sqrt()
    };
    CellVerdict {
        row,
        col,
        n,
        observed,
        expected,
        deviation,
        bound,
        pass: deviation <= bound,
    }
}

/// Tabulates who asked against who contacted the database.
///
/// Rows are hidden sources, columns are final proxies (after any hops);
/// `table.column_conditional(i, j)` is the empirical Pr[S = i | P = j].
pub fn estimate_source_given_proxy(trace: &Trace) -> Result<FrequencyTable, StatsError> {
    if trace.records.is_empty() {
        return Err(StatsError::EmptyTrace);
    }
    let labels = trace.point_names.clone();
    let mut table = FrequencyTable::new(labels.clone(), labels);
    for record in &trace.records {
        table.inc(record.source.index(), record.final_proxy().index());
    }
    Ok(table)
}

/// Compares every column's conditional distribution against uniform.
///
/// An empty column cannot certify uniformity, so it fails outright.
pub fn uniformity_verdict(table: &FrequencyTable, z: f64) -> ToleranceVerdict {
    let rows = table.row_labels.len();
    let expected = 1.0 / rows as f64;
    let mut cells = Vec::with_capacity(rows * table.col_labels.len());
    for (c, col_label) in table.col_labels.iter().enumerate() {
        let n_col = table.col_total(c);
        for (r, row_label) in table.row_labels.iter().enumerate() {
            let observed = table.column_conditional(r, c).unwrap_or(0.0);
            let mut v = cell(
                row_label.clone(),
                col_label.clone(),
                n_col,
                observed,
                expected,
                z,
            );
            if n_col == 0 {
                v.pass = false;
                v.deviation = expected;
            }
            cells.push(v);
        }
    }
    ToleranceVerdict::from_cells(
        format!("Pr[source | proxy] vs uniform 1/{rows}"),
        z,
        cells,
    )
}

/// Verdict of a source-uniformity run, with the evidence it was based on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DbAnonymityCheck {
    pub design: String,
    pub protocol: ProtocolSpec,
    pub n_trials: u64,
    pub seed: u64,
    pub table: FrequencyTable,
    pub verdict: ToleranceVerdict,
    /// Hop-length statistics of the same run, when the hop extension was on.
    pub hops: Option<HopCountStats>,
}

impl DbAnonymityCheck {
    /// True when the uniformity verdict and (if present) the hop-length
    /// check both hold.
    pub fn pass(&self) -> bool {
        self.verdict.pass && self.hops.as_ref().map_or(true, |h| h.pass)
    }
}

/// Simulates `n_trials` independent uniform-source queries and checks that
/// the database's view is uninformative: every empirical Pr[S = i | P = j]
/// within `z·sqrt((1/v)(1−1/v)/n_j)` of 1/v, where `n_j` is the number of
/// contacts made by proxy j.
///
/// Only the proxy-draw kinds make this claim; machine kinds are rejected.
/// Requires `n_trials ≥ 100·v` so each column expects at least 100
/// observations.
pub fn verify_db_anonymity(
    design: &SetSystem,
    spec: &ProtocolSpec,
    n_trials: u64,
    seed: u64,
    z: f64,
) -> Result<DbAnonymityCheck, StatsError> {
    if !spec.kind.is_proxy_draw() {
        return Err(StatsError::KindUnsupported { kind: spec.kind });
    }
    let needed = 100 * design.v() as u64;
    if n_trials < needed {
        return Err(StatsError::InsufficientSamples {
            needed,
            got: n_trials,
        });
    }
    let trace = run_workload(design, spec, &Workload::independent(n_trials), seed)?;
    let table = estimate_source_given_proxy(&trace)?;
    let verdict = uniformity_verdict(&table, z);
    let hops = match spec.p_hop {
        Some(_) => Some(hop_count_stats(&trace, z)?),
        None => None,
    };
    Ok(DbAnonymityCheck {
        design: design.name().to_string(),
        protocol: *spec,
        n_trials,
        seed,
        table,
        verdict,
        hops,
    })
}

/// Empirical observer posterior compared against the exact one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObserverPosteriorCheck {
    pub observer: PointId,
    pub memory_space: BlockId,
    pub proxy: PointId,
    /// Trace records matching the conditioning event.
    pub n_conditioned: u64,
    /// Empirical Pr[S = i | the observed post] per candidate source.
    pub empirical: BTreeMap<PointId, f64>,
    pub verdict: ToleranceVerdict,
}

/// Minimum number of conditioned records before an estimate is reported.
pub const MIN_CONDITIONED: u64 = 100;

/// Estimates the posterior a member of `memory_space` would form on seeing
/// a post for `proxy` there, and compares it with [`theoretical_posterior`].
///
/// Conditions on trace records whose *initial* post landed in
/// `memory_space` designating `proxy` — later hop posts are written by
/// forwarders, not the source, so the theorem's premise holds only for the
/// first post — and whose source is not the observer (one never wonders
/// about one's own query). Refuses to estimate from fewer than
/// [`MIN_CONDITIONED`] matching records.
pub fn estimate_observer_posterior(
    trace: &Trace,
    design: &SetSystem,
    observer: PointId,
    memory_space: BlockId,
    proxy: PointId,
    z: f64,
) -> Result<ObserverPosteriorCheck, StatsError> {
    if trace.records.is_empty() {
        return Err(StatsError::EmptyTrace);
    }
    if trace.design != design.name() || trace.point_names != design.points() {
        return Err(StatsError::DesignMismatch {
            trace: trace.design.clone(),
            design: design.name().to_string(),
        });
    }
    let profile = design.profile();
    let theory: PosteriorTable = theoretical_posterior(
        design,
        &profile,
        trace.protocol.kind,
        memory_space,
        proxy,
        observer,
    )?;
    let mut counts: BTreeMap<PointId, u64> = BTreeMap::new();
    let mut n_conditioned = 0u64;
    for record in &trace.records {
        let first = record.hop_path.first().expect("hop path never empty");
        if first.memory_space != Some(memory_space)
            || first.proxy != proxy
            || record.source == observer
        {
            continue;
        }
        n_conditioned += 1;
        *counts.entry(record.source).or_insert(0) += 1;
    }
    if n_conditioned < MIN_CONDITIONED {
        return Err(StatsError::ConditioningTooRare {
            needed: MIN_CONDITIONED,
            got: n_conditioned,
        });
    }
    let mut empirical = BTreeMap::new();
    let mut cells = Vec::new();
    for (&source, ratio) in &theory.probabilities {
        let observed = counts.get(&source).copied().unwrap_or(0) as f64 / n_conditioned as f64;
        let expected = *ratio.numer() as f64 / *ratio.denom() as f64;
        empirical.insert(source, observed);
        cells.push(cell(
            design.point_name(source).to_string(),
            design.point_name(proxy).to_string(),
            n_conditioned,
            observed,
            expected,
            z,
        ));
    }
    // Any source outside the theoretical support would be a bug, not noise.
    for source in counts.keys() {
        debug_assert!(theory.probabilities.contains_key(source));
    }
    let verdict = ToleranceVerdict::from_cells(
        format!(
            "observer {} posterior in space {} for proxy {}",
            design.point_name(observer),
            memory_space,
            design.point_name(proxy)
        ),
        z,
        cells,
    );
    Ok(ObserverPosteriorCheck {
        observer,
        memory_space,
        proxy,
        n_conditioned,
        empirical,
        verdict,
    })
}

/// Sample statistics of the number of posts per query under the hop
/// extension, checked against the geometric law with mean 1/p.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HopCountStats {
    pub p_hop: f64,
    /// Queries that entered the hop loop (direct submissions never do).
    pub n: u64,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub expected_mean: f64,
    pub expected_variance: f64,
    /// `z·sqrt(expected_variance/n)`; 0 when p = 1 (a single post, always).
    pub mean_bound: f64,
    pub pass: bool,
}

/// Summarizes hop-path lengths of a trace produced with the hop extension.
pub fn hop_count_stats(trace: &Trace, z: f64) -> Result<HopCountStats, StatsError> {
    let Some(p_hop) = trace.protocol.p_hop else {
        return Err(StatsError::HopExtensionAbsent);
    };
    let lengths: Vec<f64> = trace
        .records
        .iter()
        .filter(|r| r.plan.mode != SubmissionMode::SelfDirect)
        .map(|r| r.hop_path.len() as f64)
        .collect();
    if lengths.is_empty() {
        return Err(StatsError::EmptyTrace);
    }
    let n = lengths.len() as u64;
    let mean = lengths.iter().sum::<f64>() / n as f64;
    let variance = if n < 2 {
        0.0
    } else {
        lengths.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    };
    let expected_mean = 1.0 / p_hop;
    let expected_variance = (1.0 - p_hop) / (p_hop * p_hop);
    let mean_bound = z * (expected_variance / n as f64).sqrt();
    Ok(HopCountStats {
        p_hop,
        n,
        mean,
        variance,
        expected_mean,
        expected_variance,
        mean_bound,
        pass: (mean - expected_mean).abs() <= mean_bound,
    })
}
