//! C ABI for the `upir` toolkit.
//!
//! Conventions, also documented in the generated `include/upir.h`:
//!
//! * Handles (`UpirDesign`, `UpirTrace`) are opaque; create them with the
//!   constructors here and release them with the matching `_free` function.
//! * Every fallible function returns a [`UpirStatus`] and writes its result
//!   through `out` pointers, which are touched only on `Ok`.
//! * Structured results are UTF-8 JSON in freshly allocated C strings; the
//!   caller releases them with [`upir_string_free`].
//! * On any non-`Ok` status, [`upir_last_error_message`] returns a
//!   description of what went wrong on the current thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::str::FromStr;

use serde_json::{json, Value};

use upir::adversaries::{
    coalition_candidates, db_intersection_attack, measure_anonymity, theoretical_posterior,
    AdversaryError, CandidateSet,
};
use upir::designs::{BlockId, DesignError, PointId, SetSystem};
use upir::fixtures::{fixture, FIXTURE_NAMES};
use upir::protocols::{run_workload, ProtocolError, ProtocolKind, ProtocolSpec, Trace, Workload};
use upir::stats::{verify_db_anonymity, StatsError};

/// Opaque handle to a validated design (a set system plus its derived
/// structure).
pub struct UpirDesign {
    system: SetSystem,
}

/// Opaque handle to a simulated query trace.
pub struct UpirTrace {
    trace: Trace,
}

/// Result of every fallible call in this API.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpirStatus {
    /// The call succeeded and `out` parameters are populated.
    Ok = 0,
    /// A pointer was null, a string was not UTF-8, or a parameter was out
    /// of range for the operation.
    InvalidArgument = 1,
    /// The input could not be parsed (malformed JSON or NDJSON).
    ParseError = 2,
    /// The input parsed but failed validation (broken design invariants,
    /// inconsistent observations, mismatched trace).
    ValidationFailed = 3,
    /// The design/protocol combination does not support the operation.
    Unsupported = 4,
    /// An internal invariant failed; report this as a bug.
    Internal = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(status: UpirStatus, message: impl Into<String>) -> UpirStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = message.into());
    status
}

fn clear_error() -> UpirStatus {
    LAST_ERROR.with(|e| e.borrow_mut().clear());
    UpirStatus::Ok
}

fn design_status(e: &DesignError) -> UpirStatus {
    match e {
        DesignError::Json(_) => UpirStatus::ParseError,
        _ => UpirStatus::ValidationFailed,
    }
}

fn protocol_status(e: &ProtocolError) -> UpirStatus {
    match e {
        ProtocolError::FlagViolation { .. }
        | ProtocolError::KindIsStateful { .. }
        | ProtocolError::HopNotSupported { .. } => UpirStatus::Unsupported,
        ProtocolError::TraceParse { .. } | ProtocolError::MissingHeader => UpirStatus::ParseError,
        ProtocolError::Design(d) => design_status(d),
        _ => UpirStatus::InvalidArgument,
    }
}

fn adversary_status(e: &AdversaryError) -> UpirStatus {
    match e {
        AdversaryError::KindHasNoPosterior { .. } | AdversaryError::NotRegularPbd { .. } => {
            UpirStatus::Unsupported
        }
        AdversaryError::Design(d) => design_status(d),
        _ => UpirStatus::InvalidArgument,
    }
}

fn stats_status(e: &StatsError) -> UpirStatus {
    match e {
        StatsError::KindUnsupported { .. } | StatsError::HopExtensionAbsent => {
            UpirStatus::Unsupported
        }
        StatsError::Adversary(a) => adversary_status(a),
        StatsError::Protocol(p) => protocol_status(p),
        StatsError::Design(d) => design_status(d),
        _ => UpirStatus::InvalidArgument,
    }
}

/// Runs a closure, translating panics into `Internal` so no unwind crosses
/// the C boundary.
fn guarded(f: impl FnOnce() -> UpirStatus) -> UpirStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(UpirStatus::Internal, format!("internal error: {message}"))
        }
    }
}

/// # Safety
/// `ptr` must be null or a valid NUL-terminated string.
unsafe fn required_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, UpirStatus> {
    if ptr.is_null() {
        return Err(set_error(
            UpirStatus::InvalidArgument,
            format!("{what} must not be null"),
        ));
    }
    unsafe { CStr::from_ptr(ptr) }.to_str().map_err(|_| {
        set_error(
            UpirStatus::InvalidArgument,
            format!("{what} must be valid UTF-8"),
        )
    })
}

fn required_out<T>(ptr: *mut T, what: &str) -> Result<(), UpirStatus> {
    if ptr.is_null() {
        Err(set_error(
            UpirStatus::InvalidArgument,
            format!("{what} must not be null"),
        ))
    } else {
        Ok(())
    }
}

/// # Safety
/// `ptr` must be null or a handle previously returned by this library.
unsafe fn required_design<'a>(
    ptr: *const UpirDesign,
    what: &str,
) -> Result<&'a SetSystem, UpirStatus> {
    if ptr.is_null() {
        return Err(set_error(
            UpirStatus::InvalidArgument,
            format!("{what} must not be null"),
        ));
    }
    Ok(&unsafe { &*ptr }.system)
}

fn write_string(out: *mut *mut c_char, text: String) -> UpirStatus {
    // JSON and NDJSON never contain NUL, but stay defensive.
    match CString::new(text) {
        Ok(s) => {
            unsafe { *out = s.into_raw() };
            clear_error()
        }
        Err(_) => set_error(UpirStatus::Internal, "result contained a NUL byte"),
    }
}

fn write_json(out: *mut *mut c_char, value: &Value) -> UpirStatus {
    write_string(out, value.to_string())
}

fn parse_kind(text: &str) -> Result<ProtocolKind, UpirStatus> {
    ProtocolKind::from_str(text).map_err(|e| set_error(UpirStatus::InvalidArgument, e))
}

fn point_by_name(design: &SetSystem, name: &str) -> Result<PointId, UpirStatus> {
    design
        .point_id(name)
        .map_err(|e| set_error(UpirStatus::InvalidArgument, e.to_string()))
}

/// Optional probability parameters cross the ABI as doubles; any negative
/// value (or NaN) means "unset".
fn optional_probability(raw: f64) -> Option<f64> {
    (raw >= 0.0).then_some(raw)
}

fn candidate_json(design: &SetSystem, result: &CandidateSet) -> Value {
    json!({
        "candidates": design.point_names(&result.candidates),
        "derivation": result
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

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn upir_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Description of the current thread's most recent failure (empty after a
/// success). Free with `upir_string_free`.
#[no_mangle]
pub extern "C" fn upir_last_error_message() -> *mut c_char {
    let message = LAST_ERROR.with(|e| e.borrow().clone());
    CString::new(message)
        .unwrap_or_default()
        .into_raw()
}

/// Frees a string returned by this library. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn upir_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Parses and validates a design from `{"name", "points", "blocks"}` JSON.
#[no_mangle]
pub unsafe extern "C" fn upir_design_from_json(
    json_text: *const c_char,
    out: *mut *mut UpirDesign,
) -> UpirStatus {
    guarded(|| {
        let (Ok(text), Ok(())) = (
            unsafe { required_str(json_text, "json") },
            required_out(out, "out"),
        ) else {
            return UpirStatus::InvalidArgument;
        };
        match SetSystem::from_json_str(text) {
            Ok(system) => {
                unsafe { *out = Box::into_raw(Box::new(UpirDesign { system })) };
                clear_error()
            }
            Err(e) => set_error(design_status(&e), e.to_string()),
        }
    })
}

/// Loads one of the built-in example designs by name.
#[no_mangle]
pub unsafe extern "C" fn upir_design_fixture(
    name: *const c_char,
    out: *mut *mut UpirDesign,
) -> UpirStatus {
    guarded(|| {
        let (Ok(name), Ok(())) = (
            unsafe { required_str(name, "name") },
            required_out(out, "out"),
        ) else {
            return UpirStatus::InvalidArgument;
        };
        match fixture(name) {
            Some(system) => {
                unsafe { *out = Box::into_raw(Box::new(UpirDesign { system })) };
                clear_error()
            }
            None => set_error(
                UpirStatus::InvalidArgument,
                format!(
                    "unknown fixture {name:?}; available: {}",
                    FIXTURE_NAMES.join(", ")
                ),
            ),
        }
    })
}

/// Releases a design handle. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn upir_design_free(design: *mut UpirDesign) {
    if !design.is_null() {
        drop(unsafe { Box::from_raw(design) });
    }
}

/// Serializes the design back to its JSON file form.
#[no_mangle]
pub unsafe extern "C" fn upir_design_to_json(
    design: *const UpirDesign,
    out: *mut *mut c_char,
) -> UpirStatus {
    guarded(|| {
        let (Ok(system), Ok(())) = (
            unsafe { required_design(design, "design") },
            required_out(out, "out"),
        ) else {
            return UpirStatus::InvalidArgument;
        };
        write_string(out, system.to_json_string_pretty())
    })
}

/// Classification profile of the design (parameters and family flags), as
/// JSON.
#[no_mangle]
pub unsafe extern "C" fn upir_design_profile_json(
    design: *const UpirDesign,
    out: *mut *mut c_char,
) -> UpirStatus {
    guarded(|| {
        let (Ok(system), Ok(())) = (
            unsafe { required_design(design, "design") },
            required_out(out, "out"),
        ) else {
            return UpirStatus::InvalidArgument;
        };
        let summary = system.profile().summary();
        match serde_json::to_value(&summary) {
            Ok(v) => write_json(out, &v),
            Err(e) => set_error(UpirStatus::Internal, e.to_string()),
        }
    })
}

/// JSON array of the design's point names, in id order. Numeric point ids
/// in other outputs index into this array.
#[no_mangle]
pub unsafe extern "C" fn upir_design_point_names(
    design: *const UpirDesign,
    out: *mut *mut c_char,
) -> UpirStatus {
    guarded(|| {
        let (Ok(system), Ok(())) = (
            unsafe { required_design(design, "design") },
            required_out(out, "out"),
        ) else {
            return UpirStatus::InvalidArgument;
        };
        write_json(out, &json!(system.points()))
    })
}

/// Builds the dual design (points and blocks exchanged).
#[no_mangle]
pub unsafe extern "C" fn upir_design_dual(
    design: *const UpirDesign,
    out: *mut *mut UpirDesign,
) -> UpirStatus {
    guarded(|| {
        let (Ok(system), Ok(())) = (
            unsafe { required_design(design, "design") },
            required_out(out, "out"),
        ) else {
            return UpirStatus::InvalidArgument;
        };
        match system.dual() {
            Ok(dual) => {
                unsafe { *out = Box::into_raw(Box::new(UpirDesign { system: dual })) };
                clear_error()
            }
            Err(e) => set_error(design_status(&e), e.to_string()),
        }
    })
}

/// Adds a user, covering it with a greedy choice of existing memory spaces.
/// Writes the grown design to `out` and, when `joined_json` is non-null, a
/// JSON report `{"user", "joined_spaces": [indices]}` of the spaces whose
/// keys the newcomer must receive.
#[no_mangle]
pub unsafe extern "C" fn upir_design_add_user(
    design: *const UpirDesign,
    user: *const c_char,
    out: *mut *mut UpirDesign,
    joined_json: *mut *mut c_char,
) -> UpirStatus {
    guarded(|| {
        let (Ok(system), Ok(user), Ok(())) = (
            unsafe { required_design(design, "design") },
            unsafe { required_str(user, "user") },
            required_out(out, "out"),
        ) else {
            return UpirStatus::InvalidArgument;
        };
        match system.add_user(user) {
            Ok((grown, joined)) => {
                if !joined_json.is_null() {
                    let report = json!({
                        "user": user,
                        "joined_spaces": joined.iter().map(|b| b.0).collect::<Vec<u32>>(),
                    });
                    let status = write_json(joined_json, &report);
                    if status != UpirStatus::Ok {
                        return status;
                    }
                }
                unsafe { *out = Box::into_raw(Box::new(UpirDesign { system: grown })) };
                clear_error()
            }
            Err(e) => set_error(design_status(&e), e.to_string()),
        }
    })
}

/// Removes a user. Writes the shrunken design to `out` and, when
/// `rekeyed_json` is non-null, a JSON report `{"user", "rekeyed_spaces":
/// [indices]}` of the spaces whose keys must rotate. Refused (leaving the
/// design untouched) when removal would break a block or the covering
/// property.
#[no_mangle]
pub unsafe extern "C" fn upir_design_remove_user(
    design: *const UpirDesign,
    user: *const c_char,
    out: *mut *mut UpirDesign,
    rekeyed_json: *mut *mut c_char,
) -> UpirStatus {
    guarded(|| {
        let (Ok(system), Ok(user), Ok(())) = (
            unsafe { required_design(design, "design") },
            unsafe { required_str(user, "user") },
            required_out(out, "out"),
        ) else {
            return UpirStatus::InvalidArgument;
        };
        let point = match point_by_name(system, user) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match system.remove_user(point) {
            Ok((shrunk, rekey)) => {
                if !rekeyed_json.is_null() {
                    let report = json!({
                        "user": user,
                        "rekeyed_spaces": rekey.iter().map(|b| b.0).collect::<Vec<u32>>(),
                    });
                    let status = write_json(rekeyed_json, &report);
                    if status != UpirStatus::Ok {
                        return status;
                    }
                }
                unsafe { *out = Box::into_raw(Box::new(UpirDesign { system: shrunk })) };
                clear_error()
            }
            Err(e) => set_error(design_status(&e), e.to_string()),
        }
    })
}

/// Simulates `n_queries` independent uniform-source queries under the named
/// protocol. `kind` is one of: `dbwm`, `dbwms`, `pd-bibd-v1`, `pd-bibd-v2`,
/// `pd-cover-v1`, `pd-cover-v2`. Pass a negative `p` / `p_hop` to leave the
/// parameter unset.
#[no_mangle]
pub unsafe extern "C" fn upir_run_workload(
    design: *const UpirDesign,
    kind: *const c_char,
    p: f64,
    p_hop: f64,
    n_queries: u64,
    seed: u64,
    out: *mut *mut UpirTrace,
) -> UpirStatus {
    guarded(|| {
        let (Ok(system), Ok(kind), Ok(())) = (
            unsafe { required_design(design, "design") },
            unsafe { required_str(kind, "kind") },
            required_out(out, "out"),
        ) else {
            return UpirStatus::InvalidArgument;
        };
        let kind = match parse_kind(kind) {
            Ok(k) => k,
            Err(status) => return status,
        };
        let spec = ProtocolSpec {
            kind,
            p: optional_probability(p),
            p_hop: optional_probability(p_hop),
        };
        match run_workload(system, &spec, &Workload::independent(n_queries), seed) {
            Ok(trace) => {
                unsafe { *out = Box::into_raw(Box::new(UpirTrace { trace })) };
                clear_error()
            }
            Err(e) => set_error(protocol_status(&e), e.to_string()),
        }
    })
}

/// Releases a trace handle. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn upir_trace_free(trace: *mut UpirTrace) {
    if !trace.is_null() {
        drop(unsafe { Box::from_raw(trace) });
    }
}

/// Number of query records in the trace.
#[no_mangle]
pub unsafe extern "C" fn upir_trace_query_count(
    trace: *const UpirTrace,
    out: *mut u64,
) -> UpirStatus {
    guarded(|| {
        if trace.is_null() {
            return set_error(UpirStatus::InvalidArgument, "trace must not be null");
        }
        if let Err(status) = required_out(out, "out") {
            return status;
        }
        unsafe { *out = (*trace).trace.records.len() as u64 };
        clear_error()
    })
}

/// Serializes the trace as NDJSON: a header line, then one line per query.
/// With `redact` nonzero, ground truth is stripped and only the database's
/// view (query id, link group, contacting proxy) is kept.
#[no_mangle]
pub unsafe extern "C" fn upir_trace_to_ndjson(
    trace: *const UpirTrace,
    redact: bool,
    out: *mut *mut c_char,
) -> UpirStatus {
    guarded(|| {
        if trace.is_null() {
            return set_error(UpirStatus::InvalidArgument, "trace must not be null");
        }
        if let Err(status) = required_out(out, "out") {
            return status;
        }
        let trace = unsafe { &(*trace).trace };
        let text = if redact {
            trace.to_ndjson_redacted()
        } else {
            trace.to_ndjson()
        };
        write_string(out, text)
    })
}

/// Parses a full (unredacted) NDJSON trace back into a handle.
#[no_mangle]
pub unsafe extern "C" fn upir_trace_from_ndjson(
    text: *const c_char,
    out: *mut *mut UpirTrace,
) -> UpirStatus {
    guarded(|| {
        let (Ok(text), Ok(())) = (
            unsafe { required_str(text, "text") },
            required_out(out, "out"),
        ) else {
            return UpirStatus::InvalidArgument;
        };
        match Trace::from_ndjson(text) {
            Ok(trace) => {
                unsafe { *out = Box::into_raw(Box::new(UpirTrace { trace })) };
                clear_error()
            }
            Err(e) => set_error(protocol_status(&e), e.to_string()),
        }
    })
}

/// The database's intersection attack over the proxies of one linked query
/// group. `proxies_json` is a JSON array of point names, e.g.
/// `["U2","U11","U8"]`. The result JSON holds the surviving candidates and
/// the per-observation derivation.
#[no_mangle]
pub unsafe extern "C" fn upir_db_intersection_attack(
    design: *const UpirDesign,
    kind: *const c_char,
    proxies_json: *const c_char,
    out: *mut *mut c_char,
) -> UpirStatus {
    guarded(|| {
        let (Ok(system), Ok(kind), Ok(proxies), Ok(())) = (
            unsafe { required_design(design, "design") },
            unsafe { required_str(kind, "kind") },
            unsafe { required_str(proxies_json, "proxies_json") },
            required_out(out, "out"),
        ) else {
            return UpirStatus::InvalidArgument;
        };
        let kind = match parse_kind(kind) {
            Ok(k) => k,
            Err(status) => return status,
        };
        let names: Vec<String> = match serde_json::from_str(proxies) {
            Ok(n) => n,
            Err(e) => {
                return set_error(
                    UpirStatus::ParseError,
                    format!("proxies_json must be a JSON array of point names: {e}"),
                )
            }
        };
        let mut ids = Vec::with_capacity(names.len());
        for name in &names {
            match point_by_name(system, name) {
                Ok(id) => ids.push(id),
                Err(status) => return status,
            }
        }
        match db_intersection_attack(system, kind, &ids) {
            Ok(result) => write_json(out, &candidate_json(system, &result)),
            Err(e) => set_error(adversary_status(&e), e.to_string()),
        }
    })
}

/// A coalition attack from explicit observations. `observations_json` is a
/// JSON array of `[block_index, "proxy_name"]` pairs; `coalition_json` is a
/// JSON array of member names.
#[no_mangle]
pub unsafe extern "C" fn upir_coalition_attack(
    design: *const UpirDesign,
    kind: *const c_char,
    observations_json: *const c_char,
    coalition_json: *const c_char,
    out: *mut *mut c_char,
) -> UpirStatus {
    guarded(|| {
        let (Ok(system), Ok(kind), Ok(observations), Ok(coalition), Ok(())) = (
            unsafe { required_design(design, "design") },
            unsafe { required_str(kind, "kind") },
            unsafe { required_str(observations_json, "observations_json") },
            unsafe { required_str(coalition_json, "coalition_json") },
            required_out(out, "out"),
        ) else {
            return UpirStatus::InvalidArgument;
        };
        let kind = match parse_kind(kind) {
            Ok(k) => k,
            Err(status) => return status,
        };
        let raw_obs: Vec<(u32, String)> = match serde_json::from_str(observations) {
            Ok(o) => o,
            Err(e) => {
                return set_error(
                    UpirStatus::ParseError,
                    format!(
                        "observations_json must be a JSON array of [block_index, proxy_name]: {e}"
                    ),
                )
            }
        };
        let members: Vec<String> = match serde_json::from_str(coalition) {
            Ok(m) => m,
            Err(e) => {
                return set_error(
                    UpirStatus::ParseError,
                    format!("coalition_json must be a JSON array of point names: {e}"),
                )
            }
        };
        let mut obs = Vec::with_capacity(raw_obs.len());
        for (block, proxy) in &raw_obs {
            match point_by_name(system, proxy) {
                Ok(id) => obs.push((BlockId(*block), id)),
                Err(status) => return status,
            }
        }
        let mut coalition_ids = Vec::with_capacity(members.len());
        for name in &members {
            match point_by_name(system, name) {
                Ok(id) => coalition_ids.push(id),
                Err(status) => return status,
            }
        }
        match coalition_candidates(system, kind, &obs, &coalition_ids) {
            Ok(result) => write_json(out, &candidate_json(system, &result)),
            Err(e) => set_error(adversary_status(&e), e.to_string()),
        }
    })
}

/// Brute-forces the worst-case anonymity of the design under the protocol's
/// observation rules: the smallest candidate set any coalition of `c` users
/// can reach from `rho` linked observations. The report JSON carries
/// `kappa`, a minimizing `witness` (point and block names), whether the
/// evaluation `budget` truncated the search (`partial`), and the number of
/// evaluations.
#[no_mangle]
pub unsafe extern "C" fn upir_measure_anonymity(
    design: *const UpirDesign,
    kind: *const c_char,
    rho: u32,
    c: u32,
    budget: u64,
    out: *mut *mut c_char,
) -> UpirStatus {
    guarded(|| {
        let (Ok(system), Ok(kind), Ok(())) = (
            unsafe { required_design(design, "design") },
            unsafe { required_str(kind, "kind") },
            required_out(out, "out"),
        ) else {
            return UpirStatus::InvalidArgument;
        };
        let kind = match parse_kind(kind) {
            Ok(k) => k,
            Err(status) => return status,
        };
        match measure_anonymity(system, kind, rho as usize, c as usize, budget) {
            Ok(report) => {
                let witness = report.witness.as_ref().map(|w| {
                    json!({
                        "source": system.point_name(w.source),
                        "memory_spaces": w.memory_spaces.iter().map(|b| b.0).collect::<Vec<u32>>(),
                        "proxies": system.point_names(&w.proxies),
                        "coalition": system.point_names(&w.coalition),
                    })
                });
                let value = json!({
                    "protocol": kind.as_str(),
                    "rho": report.rho,
                    "c": report.c,
                    "kappa": report.kappa,
                    "witness": witness,
                    "partial": report.partial,
                    "evaluations": report.evaluations,
                });
                write_json(out, &value)
            }
            Err(e) => set_error(adversary_status(&e), e.to_string()),
        }
    })
}

/// Exact posterior a space member assigns to each candidate source after
/// seeing one post naming `proxy` in block `space`. The JSON maps candidate
/// names to `{"numerator", "denominator", "value"}`.
#[no_mangle]
pub unsafe extern "C" fn upir_theoretical_posterior(
    design: *const UpirDesign,
    kind: *const c_char,
    space: u32,
    proxy: *const c_char,
    observer: *const c_char,
    out: *mut *mut c_char,
) -> UpirStatus {
    guarded(|| {
        let (Ok(system), Ok(kind), Ok(proxy), Ok(observer), Ok(())) = (
            unsafe { required_design(design, "design") },
            unsafe { required_str(kind, "kind") },
            unsafe { required_str(proxy, "proxy") },
            unsafe { required_str(observer, "observer") },
            required_out(out, "out"),
        ) else {
            return UpirStatus::InvalidArgument;
        };
        let kind = match parse_kind(kind) {
            Ok(k) => k,
            Err(status) => return status,
        };
        let (proxy, observer) = match (point_by_name(system, proxy), point_by_name(system, observer))
        {
            (Ok(p), Ok(o)) => (p, o),
            (Err(status), _) | (_, Err(status)) => return status,
        };
        let profile = system.profile();
        match theoretical_posterior(system, &profile, kind, BlockId(space), proxy, observer) {
            Ok(table) => {
                let probabilities: serde_json::Map<String, Value> = table
                    .probabilities
                    .iter()
                    .map(|(point, ratio)| {
                        (
                            system.point_name(*point).to_string(),
                            json!({
                                "numerator": *ratio.numer(),
                                "denominator": *ratio.denom(),
                                "value": *ratio.numer() as f64 / *ratio.denom() as f64,
                            }),
                        )
                    })
                    .collect();
                let value = json!({
                    "protocol": kind.as_str(),
                    "memory_space": space,
                    "proxy": system.point_name(proxy),
                    "observer": system.point_name(observer),
                    "probabilities": probabilities,
                });
                write_json(out, &value)
            }
            Err(e) => set_error(adversary_status(&e), e.to_string()),
        }
    })
}

/// Simulates `n_trials` queries and checks that the database's view of
/// sources given proxies is uniform within `z` standard errors per cell.
/// The report JSON carries `pass`, the per-cell verdict, and hop-length
/// statistics when `p_hop` was set (pass a negative value to leave it
/// unset).
#[no_mangle]
pub unsafe extern "C" fn upir_verify_db_anonymity(
    design: *const UpirDesign,
    kind: *const c_char,
    p_hop: f64,
    n_trials: u64,
    seed: u64,
    z: f64,
    out: *mut *mut c_char,
) -> UpirStatus {
    guarded(|| {
        let (Ok(system), Ok(kind), Ok(())) = (
            unsafe { required_design(design, "design") },
            unsafe { required_str(kind, "kind") },
            required_out(out, "out"),
        ) else {
            return UpirStatus::InvalidArgument;
        };
        let kind = match parse_kind(kind) {
            Ok(k) => k,
            Err(status) => return status,
        };
        let spec = ProtocolSpec {
            kind,
            p: None,
            p_hop: optional_probability(p_hop),
        };
        match verify_db_anonymity(system, &spec, n_trials, seed, z) {
            Ok(check) => {
                let pass = check.pass();
                let value = json!({
                    "design": check.design,
                    "protocol": kind.as_str(),
                    "n_trials": check.n_trials,
                    "seed": check.seed,
                    "pass": pass,
                    "verdict": check.verdict,
                    "hops": check.hops,
                });
                write_json(out, &value)
            }
            Err(e) => set_error(stats_status(&e), e.to_string()),
        }
    })
}
