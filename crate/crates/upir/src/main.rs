//! Command-line front end: validate designs, simulate query workloads,
//! attack the resulting traces, and verify the anonymity claims.
//!
//! Every command is deterministic given its flags (all randomness flows
//! from an explicit seed) and emits machine-readable JSON whose
//! `config_hash` fingerprints the resolved configuration. Exit codes:
//! 0 success/pass, 1 a verification ran and failed, 2 input error.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use upir::adversaries::{
    coalition_candidates, db_intersection_attack, measure_anonymity, theoretical_posterior,
    CandidateSet,
};
use upir::designs::{BlockId, DesignFile, PointId, SetSystem};
use upir::fixtures::{fixture, FIXTURE_NAMES};
use upir::protocols::{
    db_view_from_ndjson, run_workload, trace_header_from_ndjson, ProtocolKind, ProtocolSpec,
    SubmissionMode, Trace, Workload, WorkloadFile,
};
use upir::stats::{estimate_observer_posterior, verify_db_anonymity};
use upir::util::{config_hash, write_atomic};

#[derive(Parser)]
#[command(
    name = "upir",
    version,
    about = "Combinatorial designs, query-forwarding protocols, and attacks on their traces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a design and print its parameters and classification flags.
    VerifyDesign(VerifyDesignCmd),
    /// Simulate a query workload and write the trace.
    Run(RunCmd),
    /// Run an attack from a trace file or from explicit observations.
    Attack(AttackCmd),
    /// Brute-force the worst-case anonymity parameters of a design.
    Anonymity(AnonymityCmd),
    /// Exact observer posterior, optionally compared against a simulation.
    Posterior(PosteriorCmd),
    /// Add or remove a user, reporting which memory spaces must be rekeyed.
    Membership(MembershipCmd),
    /// Check that the database's view of sources is uniform.
    VerifyAnonymity(VerifyAnonymityCmd),
}

/// Where the design comes from: a JSON file or a built-in example.
#[derive(Args)]
#[group(required = true, multiple = false)]
struct DesignSource {
    /// Design JSON file.
    #[arg(long, value_name = "PATH")]
    design: Option<PathBuf>,
    /// Built-in example design name.
    #[arg(long, value_name = "NAME")]
    fixture: Option<String>,
}

enum LoadError {
    /// Unreadable, unparsable, or unknown input: exit code 2.
    Input(String),
    /// Syntactically fine but semantically invalid design: exit code 1
    /// under verify-design, which exists to detect exactly this.
    Invalid(String),
}

impl DesignSource {
    fn load(&self) -> Result<SetSystem, LoadError> {
        if let Some(name) = &self.fixture {
            fixture(name).ok_or_else(|| {
                LoadError::Input(format!(
                    "unknown fixture {name:?}; available fixtures: {}",
                    FIXTURE_NAMES.join(", ")
                ))
            })
        } else {
            let path = self.design.as_ref().expect("clap requires one source");
            let text = std::fs::read_to_string(path)
                .map_err(|e| LoadError::Input(format!("cannot read {}: {e}", path.display())))?;
            let file: DesignFile = serde_json::from_str(&text)
                .map_err(|e| LoadError::Input(format!("cannot parse {}: {e}", path.display())))?;
            SetSystem::from_design_file(file).map_err(|e| LoadError::Invalid(e.to_string()))
        }
    }

    /// Loads for commands where any failure is an input error.
    fn load_input(&self) -> Result<SetSystem, String> {
        self.load().map_err(|e| match e {
            LoadError::Input(msg) | LoadError::Invalid(msg) => msg,
        })
    }
}

#[derive(Args)]
struct VerifyDesignCmd {
    #[command(flatten)]
    source: DesignSource,
    /// Indent the JSON output.
    #[arg(long)]
    pretty: bool,
    /// Write the report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunCmd {
    #[command(flatten)]
    source: DesignSource,
    /// Protocol kind: dbwm, dbwms, pd-bibd-v1, pd-bibd-v2, pd-cover-v1, pd-cover-v2.
    #[arg(long)]
    protocol: ProtocolKind,
    /// Self-forwarding probability (dbwms only).
    #[arg(long)]
    p: Option<f64>,
    /// Hop-extension forwarding probability (proxy-draw kinds only).
    #[arg(long)]
    p_hop: Option<f64>,
    /// Simulate this many independent uniform-source queries.
    #[arg(long, value_name = "N", conflicts_with = "workload")]
    queries: Option<u64>,
    /// Workload JSON file (linked groups, fixed sources, ordering).
    #[arg(long, value_name = "PATH")]
    workload: Option<PathBuf>,
    /// RNG seed; may instead come from the workload file.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the trace here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Strip ground truth: keep only the header and the database's view.
    #[arg(long)]
    redact: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AttackKind {
    /// Intersect the database's per-query candidate sets over linked queries.
    DbIntersection,
    /// Pool what a coalition of users saw in its memory spaces.
    Coalition,
}

#[derive(Args)]
struct AttackCmd {
    #[command(flatten)]
    source: DesignSource,
    /// Which attack to run.
    #[arg(long, value_enum)]
    kind: AttackKind,
    /// Protocol kind; comes from the trace header when --trace is given.
    #[arg(long, conflicts_with = "trace")]
    protocol: Option<ProtocolKind>,
    /// Trace file (full or, for db-intersection, redacted) to attack.
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
    /// Link group to attack; defaults to the trace's only group.
    #[arg(long)]
    link_group: Option<u64>,
    /// Explicit proxy observations for db-intersection, e.g. U2,U11,U8.
    #[arg(long, value_delimiter = ',', conflicts_with = "trace")]
    proxies: Vec<String>,
    /// Coalition members, e.g. U2,U5.
    #[arg(long, value_delimiter = ',')]
    coalition: Vec<String>,
    /// Explicit coalition observations as BLOCK:PROXY, e.g. 0:U3,1:U4.
    #[arg(long, value_delimiter = ',', conflicts_with = "trace")]
    obs: Vec<String>,
    /// Indent the JSON output.
    #[arg(long)]
    pretty: bool,
    /// Write the report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnonymityCmd {
    #[command(flatten)]
    source: DesignSource,
    /// Protocol kind whose observation rules apply.
    #[arg(long)]
    protocol: ProtocolKind,
    /// Number of linked observations available to the coalition.
    #[arg(long)]
    rho: usize,
    /// Coalition size.
    #[arg(long)]
    c: usize,
    /// Max coalition evaluations before reporting a partial bound.
    #[arg(long, default_value_t = 10_000_000)]
    budget: u64,
    /// Indent the JSON output.
    #[arg(long)]
    pretty: bool,
    /// Write the report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PosteriorCmd {
    #[command(flatten)]
    source: DesignSource,
    /// Protocol kind; comes from the trace header when --trace is given.
    #[arg(long, conflicts_with = "trace")]
    protocol: Option<ProtocolKind>,
    /// The watching member of the memory space.
    #[arg(long)]
    observer: String,
    /// Block index of the memory space (see verify-design for the list).
    #[arg(long, value_name = "BLOCK")]
    space: u32,
    /// The designated forwarder named by the observed post.
    #[arg(long)]
    proxy: String,
    /// Compare the exact posterior against this trace's records.
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
    /// Or simulate this many uniform queries for the empirical side.
    #[arg(long, value_name = "N", conflicts_with = "trace")]
    queries: Option<u64>,
    /// Seed for --queries.
    #[arg(long)]
    seed: Option<u64>,
    /// Tolerance multiplier for the empirical comparison.
    #[arg(long, default_value_t = 4.0)]
    z: f64,
    /// Indent the JSON output.
    #[arg(long)]
    pretty: bool,
    /// Write the report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MembershipOp {
    Add,
    Remove,
}

#[derive(Args)]
struct MembershipCmd {
    #[command(flatten)]
    source: DesignSource,
    /// What to do.
    #[arg(long, value_enum)]
    op: MembershipOp,
    /// User name to add or remove.
    #[arg(long, value_name = "NAME")]
    user: String,
    /// For remove: drop memory spaces that would become empty or singleton.
    #[arg(long)]
    force: bool,
    /// Write the updated design file here (otherwise it is embedded in the report).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Indent the JSON output.
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct VerifyAnonymityCmd {
    #[command(flatten)]
    source: DesignSource,
    /// Protocol kind claiming a uniform database view.
    #[arg(long)]
    protocol: ProtocolKind,
    /// Self-forwarding probability (dbwms only).
    #[arg(long)]
    p: Option<f64>,
    /// Hop-extension forwarding probability.
    #[arg(long)]
    p_hop: Option<f64>,
    /// Simulated queries; at least 100 per user.
    #[arg(long, value_name = "N")]
    queries: u64,
    /// RNG seed.
    #[arg(long)]
    seed: u64,
    /// Tolerance multiplier.
    #[arg(long, default_value_t = 4.0)]
    z: f64,
    /// Indent the JSON output.
    #[arg(long)]
    pretty: bool,
    /// Write the report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("{}", json!({ "error": message }));
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, String> {
    match command {
        Command::VerifyDesign(cmd) => cmd_verify_design(cmd),
        Command::Run(cmd) => cmd_run(cmd),
        Command::Attack(cmd) => cmd_attack(cmd),
        Command::Anonymity(cmd) => cmd_anonymity(cmd),
        Command::Posterior(cmd) => cmd_posterior(cmd),
        Command::Membership(cmd) => cmd_membership(cmd),
        Command::VerifyAnonymity(cmd) => cmd_verify_anonymity(cmd),
    }
}

/// Prints or atomically writes one JSON report.
fn emit(value: &Value, pretty: bool, out: Option<&Path>) -> Result<(), String> {
    let mut text = if pretty {
        serde_json::to_string_pretty(value)
    } else {
        serde_json::to_string(value)
    }
    .expect("reports serialize");
    text.push('\n');
    match out {
        Some(path) => write_atomic(path, text.as_bytes())
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_points(design: &SetSystem, names: &[String]) -> Result<Vec<PointId>, String> {
    names
        .iter()
        .map(|n| design.point_id(n).map_err(|e| e.to_string()))
        .collect()
}

/// Renders a memory space as its index plus member names.
fn space_json(design: &SetSystem, b: BlockId) -> Value {
    json!({ "index": b.0, "members": design.point_names(design.block(b)) })
}

fn candidate_json(design: &SetSystem, set: &CandidateSet) -> Value {
    json!({
        "candidates": design.point_names(&set.candidates),
        "derivation": set
            .derivation
            .iter()
            .map(|step| json!({
                "observation": step.observation,
                "candidates": design.point_names(&step.candidates),
                "eliminated": design.point_names(&step.eliminated),
            }))
            .collect::<Vec<_>>(),
    })
}

fn cmd_verify_design(cmd: VerifyDesignCmd) -> Result<ExitCode, String> {
    match cmd.source.load() {
        Ok(design) => {
            let summary = design.profile().summary();
            let blocks: Vec<Vec<String>> = (0..design.b() as u32)
                .map(|b| design.point_names(design.block(BlockId(b))))
                .collect();
            let hash = config_hash(&json!({
                "command": "verify-design",
                "design": design.to_design_file(),
            }));
            let report = json!({
                "command": "verify-design",
                "valid": true,
                "profile": summary,
                "blocks": blocks,
                "config_hash": hash,
            });
            emit(&report, cmd.pretty, cmd.out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Err(LoadError::Invalid(message)) => {
            let report = json!({
                "command": "verify-design",
                "valid": false,
                "error": message,
            });
            emit(&report, cmd.pretty, cmd.out.as_deref())?;
            Ok(ExitCode::from(1))
        }
        Err(LoadError::Input(message)) => Err(message),
    }
}

fn cmd_run(cmd: RunCmd) -> Result<ExitCode, String> {
    let design = cmd.source.load_input()?;
    let spec = ProtocolSpec {
        kind: cmd.protocol,
        p: cmd.p,
        p_hop: cmd.p_hop,
    };
    let (workload, file_seed) = match (cmd.queries, &cmd.workload) {
        (Some(n), None) => (Workload::independent(n), None),
        (None, Some(path)) => {
            let file = WorkloadFile::load(path).map_err(|e| e.to_string())?;
            let seed = file.seed;
            (file.into_workload(&design).map_err(|e| e.to_string())?, seed)
        }
        (None, None) => return Err("one of --queries or --workload is required".to_string()),
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    };
    let seed = cmd
        .seed
        .or(file_seed)
        .ok_or("a seed is required: pass --seed or set one in the workload file")?;
    let trace = run_workload(&design, &spec, &workload, seed).map_err(|e| e.to_string())?;
    match &cmd.out {
        Some(path) => {
            trace
                .save_ndjson(path, cmd.redact)
                .map_err(|e| e.to_string())?;
            let report = json!({
                "command": "run",
                "trace": path,
                "queries": trace.records.len(),
                "redacted": cmd.redact,
                "seed": seed,
                "config_hash": trace.config_hash,
            });
            emit(&report, false, None)?;
        }
        None => {
            if cmd.redact {
                print!("{}", trace.to_ndjson_redacted());
            } else {
                print!("{}", trace.to_ndjson());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Picks the link group to attack, requiring an explicit flag when the
/// trace is ambiguous.
fn choose_link_group(groups: &BTreeSet<u64>, flag: Option<u64>) -> Result<u64, String> {
    match flag {
        Some(g) if groups.contains(&g) => Ok(g),
        Some(g) => Err(format!("link group {g} does not appear in the trace")),
        None if groups.len() == 1 => Ok(*groups.iter().next().expect("nonempty")),
        None => Err(format!(
            "the trace has {} link groups; pick one with --link-group",
            groups.len()
        )),
    }
}

fn check_trace_design(
    design: &SetSystem,
    trace_design: &str,
    trace_points: &[String],
) -> Result<(), String> {
    if trace_design != design.name() || trace_points != design.points() {
        return Err(format!(
            "the trace was produced on design {:?}, not {:?}; pass the matching design",
            trace_design,
            design.name()
        ));
    }
    Ok(())
}

fn cmd_attack(cmd: AttackCmd) -> Result<ExitCode, String> {
    let design = cmd.source.load_input()?;
    match cmd.kind {
        AttackKind::DbIntersection => {
            let (kind, proxies, link_group, trace_meta) = match &cmd.trace {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
                    let header = trace_header_from_ndjson(&text).map_err(|e| e.to_string())?;
                    check_trace_design(&design, &header.design, &header.points)?;
                    let view = db_view_from_ndjson(&text).map_err(|e| e.to_string())?;
                    let groups: BTreeSet<u64> = view.iter().map(|r| r.link_group).collect();
                    let group = choose_link_group(&groups, cmd.link_group)?;
                    let proxies: Vec<PointId> = view
                        .iter()
                        .filter(|r| r.link_group == group)
                        .map(|r| r.proxy)
                        .collect();
                    (
                        header.protocol.kind,
                        proxies,
                        Some(group),
                        Some(json!({ "trace": path, "seed": header.seed, "trace_config_hash": header.config_hash })),
                    )
                }
                None => {
                    let kind = cmd
                        .protocol
                        .ok_or("--protocol is required with explicit --proxies")?;
                    if cmd.proxies.is_empty() {
                        return Err(
                            "provide observations: --trace FILE or --proxies U2,U11,...".to_string()
                        );
                    }
                    (kind, parse_points(&design, &cmd.proxies)?, None, None)
                }
            };
            let result =
                db_intersection_attack(&design, kind, &proxies).map_err(|e| e.to_string())?;
            let mut report = json!({
                "command": "attack",
                "kind": "db-intersection",
                "design": design.name(),
                "protocol": kind.as_str(),
                "link_group": link_group,
                "observed_proxies": design.point_names(&proxies),
                "result": candidate_json(&design, &result),
            });
            finish_attack_report(&mut report, &design, kind, trace_meta);
            emit(&report, cmd.pretty, cmd.out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        AttackKind::Coalition => {
            if cmd.coalition.is_empty() {
                return Err("a coalition attack needs --coalition U2,U5,...".to_string());
            }
            let coalition = parse_points(&design, &cmd.coalition)?;
            let (kind, observations, link_group, trace_meta) = match &cmd.trace {
                Some(path) => {
                    let trace = Trace::load_ndjson(path).map_err(|e| e.to_string())?;
                    check_trace_design(&design, &trace.design, &trace.point_names)?;
                    let groups: BTreeSet<u64> =
                        trace.records.iter().map(|r| r.link_group).collect();
                    let group = choose_link_group(&groups, cmd.link_group)?;
                    // The coalition observes only initial posts (hop re-posts
                    // are written by forwarders, not the source), only in
                    // spaces where it has a member, and gains nothing from
                    // queries of its own members.
                    let observations: Vec<(BlockId, PointId)> = trace
                        .records
                        .iter()
                        .filter(|r| r.link_group == group)
                        .filter(|r| r.plan.mode != SubmissionMode::SelfDirect)
                        .filter(|r| !coalition.contains(&r.source))
                        .filter_map(|r| {
                            let space = r.plan.memory_space?;
                            coalition
                                .iter()
                                .any(|m| design.block_contains(space, *m))
                                .then_some((space, r.plan.proxy))
                        })
                        .collect();
                    if observations.is_empty() {
                        return Err(format!(
                            "the coalition saw no posts for link group {group}"
                        ));
                    }
                    (
                        trace.protocol.kind,
                        observations,
                        Some(group),
                        Some(json!({ "trace": path, "seed": trace.seed, "trace_config_hash": trace.config_hash })),
                    )
                }
                None => {
                    let kind = cmd
                        .protocol
                        .ok_or("--protocol is required with explicit --obs")?;
                    if cmd.obs.is_empty() {
                        return Err(
                            "provide observations: --trace FILE or --obs BLOCK:PROXY,...".to_string()
                        );
                    }
                    let observations = cmd
                        .obs
                        .iter()
                        .map(|s| parse_observation(&design, s))
                        .collect::<Result<Vec<_>, _>>()?;
                    (kind, observations, None, None)
                }
            };
            let result = coalition_candidates(&design, kind, &observations, &coalition)
                .map_err(|e| e.to_string())?;
            let mut report = json!({
                "command": "attack",
                "kind": "coalition",
                "design": design.name(),
                "protocol": kind.as_str(),
                "link_group": link_group,
                "coalition": design.point_names(&coalition),
                "observations": observations
                    .iter()
                    .map(|(b, p)| json!({
                        "memory_space": space_json(&design, *b),
                        "proxy": design.point_name(*p),
                    }))
                    .collect::<Vec<_>>(),
                "result": candidate_json(&design, &result),
            });
            finish_attack_report(&mut report, &design, kind, trace_meta);
            emit(&report, cmd.pretty, cmd.out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Stamps an attack report with trace metadata and the config fingerprint.
fn finish_attack_report(
    report: &mut Value,
    design: &SetSystem,
    kind: ProtocolKind,
    trace_meta: Option<Value>,
) {
    let obj = report.as_object_mut().expect("report is an object");
    if let Some(Value::Object(meta)) = trace_meta {
        obj.extend(meta);
    }
    let mut config = obj.clone();
    config.remove("result");
    config.insert(
        "design_file".to_string(),
        serde_json::to_value(design.to_design_file()).expect("design serializes"),
    );
    config.insert("protocol".to_string(), json!(kind.as_str()));
    obj.insert("config_hash".to_string(), json!(config_hash(&Value::Object(config))));
}

fn parse_observation(design: &SetSystem, s: &str) -> Result<(BlockId, PointId), String> {
    let (block, proxy) = s
        .split_once(':')
        .ok_or_else(|| format!("observation {s:?} must look like BLOCK:PROXY, e.g. 0:U3"))?;
    let index: u32 = block
        .trim()
        .parse()
        .map_err(|_| format!("bad block index {block:?} in observation {s:?}"))?;
    let block = BlockId(index);
    design.check_block(block).map_err(|e| e.to_string())?;
    let proxy = design
        .point_id(proxy.trim())
        .map_err(|e| e.to_string())?;
    Ok((block, proxy))
}

fn cmd_anonymity(cmd: AnonymityCmd) -> Result<ExitCode, String> {
    let design = cmd.source.load_input()?;
    let report = measure_anonymity(&design, cmd.protocol, cmd.rho, cmd.c, cmd.budget)
        .map_err(|e| e.to_string())?;
    let witness = report.witness.as_ref().map(|w| {
        json!({
            "source": design.point_name(w.source),
            "memory_spaces": w
                .memory_spaces
                .iter()
                .map(|b| space_json(&design, *b))
                .collect::<Vec<_>>(),
            "proxies": design.point_names(&w.proxies),
            "coalition": design.point_names(&w.coalition),
        })
    });
    let hash = config_hash(&json!({
        "command": "anonymity",
        "design_file": design.to_design_file(),
        "protocol": cmd.protocol.as_str(),
        "rho": cmd.rho,
        "c": cmd.c,
        "budget": cmd.budget,
    }));
    let value = json!({
        "command": "anonymity",
        "design": design.name(),
        "protocol": cmd.protocol.as_str(),
        "rho": report.rho,
        "c": report.c,
        "kappa": report.kappa,
        "witness": witness,
        "partial": report.partial,
        "evaluations": report.evaluations,
        "config_hash": hash,
    });
    emit(&value, cmd.pretty, cmd.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_posterior(cmd: PosteriorCmd) -> Result<ExitCode, String> {
    let design = cmd.source.load_input()?;
    let observer = design.point_id(&cmd.observer).map_err(|e| e.to_string())?;
    let proxy = design.point_id(&cmd.proxy).map_err(|e| e.to_string())?;
    let space = BlockId(cmd.space);
    design.check_block(space).map_err(|e| e.to_string())?;

    // Empirical side, when requested.
    let trace = match (&cmd.trace, cmd.queries) {
        (Some(path), None) => Some(Trace::load_ndjson(path).map_err(|e| e.to_string())?),
        (None, Some(n)) => {
            let kind = cmd
                .protocol
                .ok_or("--protocol is required with --queries")?;
            let seed = cmd.seed.ok_or("--seed is required with --queries")?;
            let spec = ProtocolSpec {
                kind,
                p: None,
                p_hop: None,
            };
            Some(run_workload(&design, &spec, &Workload::independent(n), seed).map_err(|e| e.to_string())?)
        }
        (None, None) => None,
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    };
    let kind = match &trace {
        Some(t) => {
            check_trace_design(&design, &t.design, &t.point_names)?;
            t.protocol.kind
        }
        None => cmd
            .protocol
            .ok_or("--protocol is required without a trace")?,
    };

    let profile = design.profile();
    let table = theoretical_posterior(&design, &profile, kind, space, proxy, observer)
        .map_err(|e| e.to_string())?;
    let theoretical: serde_json::Map<String, Value> = table
        .probabilities
        .iter()
        .map(|(p, ratio)| {
            (
                design.point_name(*p).to_string(),
                json!({
                    "fraction": ratio.to_string(),
                    "value": *ratio.numer() as f64 / *ratio.denom() as f64,
                }),
            )
        })
        .collect();

    let hash = config_hash(&json!({
        "command": "posterior",
        "design_file": design.to_design_file(),
        "protocol": kind.as_str(),
        "observer": cmd.observer,
        "space": cmd.space,
        "proxy": cmd.proxy,
        "queries": cmd.queries,
        "seed": cmd.seed,
        "z": cmd.z,
    }));
    let mut report = json!({
        "command": "posterior",
        "design": design.name(),
        "protocol": kind.as_str(),
        "observer": design.point_name(observer),
        "memory_space": space_json(&design, space),
        "proxy": design.point_name(proxy),
        "theoretical": theoretical,
        "config_hash": hash,
    });

    let mut code = ExitCode::SUCCESS;
    if let Some(trace) = trace {
        let check = estimate_observer_posterior(&trace, &design, observer, space, proxy, cmd.z)
            .map_err(|e| e.to_string())?;
        let empirical: serde_json::Map<String, Value> = check
            .empirical
            .iter()
            .map(|(p, f)| (design.point_name(*p).to_string(), json!(f)))
            .collect();
        let obj = report.as_object_mut().expect("report is an object");
        obj.insert("empirical".to_string(), Value::Object(empirical));
        obj.insert("n_conditioned".to_string(), json!(check.n_conditioned));
        obj.insert("seed".to_string(), json!(trace.seed));
        obj.insert(
            "verdict".to_string(),
            serde_json::to_value(&check.verdict).expect("verdict serializes"),
        );
        if !check.verdict.pass {
            code = ExitCode::from(1);
        }
    }
    emit(&report, cmd.pretty, cmd.out.as_deref())?;
    Ok(code)
}

fn cmd_membership(cmd: MembershipCmd) -> Result<ExitCode, String> {
    let design = cmd.source.load_input()?;
    let (new_design, label, touched, dropped) = match cmd.op {
        MembershipOp::Add => {
            let (system, joined) = design.add_user(&cmd.user).map_err(|e| e.to_string())?;
            (system, "joined_spaces", joined, Vec::new())
        }
        MembershipOp::Remove => {
            let user = design.point_id(&cmd.user).map_err(|e| e.to_string())?;
            if cmd.force {
                let outcome = design.force_remove_user(user).map_err(|e| e.to_string())?;
                (outcome.system, "rekeyed_spaces", outcome.rekey, outcome.dropped)
            } else {
                let (system, rekey) = design.remove_user(user).map_err(|e| e.to_string())?;
                (system, "rekeyed_spaces", rekey, Vec::new())
            }
        }
    };
    // Joined spaces exist in the new design (they include the new user);
    // rekeyed and dropped indices refer to the input design.
    let touched_json: Vec<Value> = touched
        .iter()
        .map(|b| match cmd.op {
            MembershipOp::Add => space_json(&new_design, *b),
            MembershipOp::Remove => space_json(&design, *b),
        })
        .collect();
    let dropped_json: Vec<Value> = dropped.iter().map(|b| space_json(&design, *b)).collect();
    let hash = config_hash(&json!({
        "command": "membership",
        "design_file": design.to_design_file(),
        "op": match cmd.op { MembershipOp::Add => "add", MembershipOp::Remove => "remove" },
        "user": cmd.user,
        "force": cmd.force,
    }));
    let mut report = json!({
        "command": "membership",
        "op": match cmd.op { MembershipOp::Add => "add", MembershipOp::Remove => "remove" },
        "user": cmd.user,
        "design": design.name(),
        "v": new_design.v(),
        "b": new_design.b(),
        label: touched_json,
        "config_hash": hash,
    });
    let obj = report.as_object_mut().expect("report is an object");
    if cmd.force {
        obj.insert("dropped_spaces".to_string(), json!(dropped_json));
    }
    match &cmd.out {
        Some(path) => {
            write_atomic(path, new_design.to_json_string_pretty().as_bytes())
                .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            obj.insert("out".to_string(), json!(path));
        }
        None => {
            obj.insert(
                "design_file".to_string(),
                serde_json::to_value(new_design.to_design_file()).expect("design serializes"),
            );
        }
    }
    emit(&report, cmd.pretty, None)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify_anonymity(cmd: VerifyAnonymityCmd) -> Result<ExitCode, String> {
    let design = cmd.source.load_input()?;
    let spec = ProtocolSpec {
        kind: cmd.protocol,
        p: cmd.p,
        p_hop: cmd.p_hop,
    };
    let check = verify_db_anonymity(&design, &spec, cmd.queries, cmd.seed, cmd.z)
        .map_err(|e| e.to_string())?;
    let pass = check.pass();
    let hash = config_hash(&json!({
        "command": "verify-anonymity",
        "design_file": design.to_design_file(),
        "protocol": spec,
        "queries": cmd.queries,
        "seed": cmd.seed,
        "z": cmd.z,
    }));
    let report = json!({
        "command": "verify-anonymity",
        "design": design.name(),
        "protocol": spec,
        "n_trials": check.n_trials,
        "seed": check.seed,
        "z": cmd.z,
        "pass": pass,
        "verdict": check.verdict,
        "hops": check.hops,
        "config_hash": hash,
    });
    emit(&report, cmd.pretty, cmd.out.as_deref())?;
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
