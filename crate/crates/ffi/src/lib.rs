//! C ABI for gest-core.
//!
//! Registries and sessions are opaque handles. Structured data crosses the
//! boundary as UTF-8 JSON strings; strings returned through `out` parameters
//! are owned by the caller and released with [`gest_string_free`].
//!
//! Every function returns a [`GestStatus`]. On anything but `GEST_STATUS_OK`,
//! [`gest_last_error_message`] describes the failure for the calling thread.
//! A session handle must not be used from two threads at once.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use gest_core::procedural::{generate, GenConfig};
use gest_core::schedule::{build_constraints, solve};
use gest_core::session::Session;
use gest_core::validate::validate;
use gest_core::{tools, CapabilityRegistry, GestGraph};
use serde_json::Value;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GestStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed JSON or registry document.
    Parse = 3,
    /// The graph failed validation; the report is still written.
    Invalid = 4,
    /// The temporal constraints have no solution.
    Infeasible = 5,
    Generation = 6,
    Io = 7,
    Panic = 8,
}

/// Immutable capability registry; may be shared between threads.
pub struct GestRegistry {
    inner: Arc<CapabilityRegistry>,
}

/// One tool-call session bound to a registry.
pub struct GestSession {
    inner: Session,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<Vec<u8>>) {
    let mut bytes = msg.into();
    bytes.retain(|&b| b != 0);
    let c = CString::new(bytes).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(GestStatus, String);

type FfiResult = Result<GestStatus, Fail>;

fn guard(f: impl FnOnce() -> FfiResult) -> GestStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GestStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(GestStatus::NullPointer, format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Fail(GestStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail(GestStatus::NullPointer, format!("{what} is NULL")))
}

fn check_out<T>(out: *mut T) -> Result<(), Fail> {
    if out.is_null() {
        Err(Fail(GestStatus::NullPointer, "output pointer is NULL".into()))
    } else {
        Ok(())
    }
}

fn into_c(s: String) -> *mut c_char {
    let mut bytes = s.into_bytes();
    bytes.retain(|&b| b != 0);
    CString::new(bytes).expect("nul bytes removed").into_raw()
}

fn parse_graph(json: &str) -> Result<GestGraph, Fail> {
    GestGraph::from_json_str(json).map_err(|e| Fail(GestStatus::Parse, e.to_string()))
}

fn new_registry(reg: CapabilityRegistry, out: *mut *mut GestRegistry) -> FfiResult {
    let handle = Box::new(GestRegistry { inner: Arc::new(reg) });
    unsafe { *out = Box::into_raw(handle) };
    Ok(GestStatus::Ok)
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next call into this library from the same thread; do not free.
#[no_mangle]
pub extern "C" fn gest_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Frees a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn gest_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// The bundled sample registry.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gest_registry_sample(out: *mut *mut GestRegistry) -> GestStatus {
    guard(|| {
        check_out(out)?;
        new_registry(CapabilityRegistry::sample(), out)
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gest_registry_load_file(path: *const c_char, out: *mut *mut GestRegistry) -> GestStatus {
    guard(|| {
        check_out(out)?;
        let path = str_arg(path, "path")?;
        let file = File::open(path).map_err(|e| Fail(GestStatus::Io, format!("{path}: {e}")))?;
        let reg = CapabilityRegistry::from_reader(BufReader::new(file))
            .map_err(|e| Fail(GestStatus::Parse, e.to_string()))?;
        new_registry(reg, out)
    })
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gest_registry_load_json(json: *const c_char, out: *mut *mut GestRegistry) -> GestStatus {
    guard(|| {
        check_out(out)?;
        let json = str_arg(json, "json")?;
        let reg = CapabilityRegistry::from_json_str(json).map_err(|e| Fail(GestStatus::Parse, e.to_string()))?;
        new_registry(reg, out)
    })
}

/// Releases a registry. Sessions created from it stay valid. NULL is ignored.
///
/// # Safety
/// `reg` must come from a `gest_registry_*` constructor and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn gest_registry_free(reg: *mut GestRegistry) {
    if !reg.is_null() {
        drop(Box::from_raw(reg));
    }
}

/// # Safety
/// `reg` must be a live registry handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gest_session_new(reg: *const GestRegistry, out: *mut *mut GestSession) -> GestStatus {
    guard(|| {
        check_out(out)?;
        let reg = ref_arg(reg, "registry")?;
        let handle = Box::new(GestSession {
            inner: Session::new(Arc::clone(&reg.inner)),
        });
        *out = Box::into_raw(handle);
        Ok(GestStatus::Ok)
    })
}

/// Runs one tool call. `args_json` may be NULL for no arguments. The result
/// object (`{"ok": ...}`) is written to `out_json`; a rejected tool call is
/// still `GEST_STATUS_OK` with `"ok": false` in the result.
///
/// # Safety
/// `session` must be a live session handle; strings NUL-terminated; `out_json`
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gest_session_call(
    session: *mut GestSession,
    tool: *const c_char,
    args_json: *const c_char,
    out_json: *mut *mut c_char,
) -> GestStatus {
    guard(|| {
        check_out(out_json)?;
        let session = session
            .as_mut()
            .ok_or_else(|| Fail(GestStatus::NullPointer, "session is NULL".into()))?;
        let tool = str_arg(tool, "tool")?;
        let args: Value = if args_json.is_null() {
            Value::Null
        } else {
            serde_json::from_str(str_arg(args_json, "args_json")?)
                .map_err(|e| Fail(GestStatus::Parse, format!("args_json: {e}")))?
        };
        let result = tools::call(&mut session.inner, tool, &args);
        *out_json = into_c(serde_json::to_string(&result).expect("serializable"));
        Ok(GestStatus::Ok)
    })
}

/// Fingerprint of the whole session state.
///
/// # Safety
/// `session` must be a live session handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gest_session_fingerprint(session: *const GestSession, out: *mut u64) -> GestStatus {
    guard(|| {
        check_out(out)?;
        *out = ref_arg(session, "session")?.inner.fingerprint().0;
        Ok(GestStatus::Ok)
    })
}

/// The graph built so far, as JSON.
///
/// # Safety
/// `session` must be a live session handle; `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gest_session_graph(session: *const GestSession, out_json: *mut *mut c_char) -> GestStatus {
    guard(|| {
        check_out(out_json)?;
        let g = ref_arg(session, "session")?.inner.graph();
        *out_json = into_c(g.to_json_pretty());
        Ok(GestStatus::Ok)
    })
}

/// # Safety
/// `session` must come from [`gest_session_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn gest_session_free(session: *mut GestSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Validates a graph. The report is written to `out_report` whether or not
/// the graph is valid; an invalid graph returns `GEST_STATUS_INVALID`.
///
/// # Safety
/// `reg` must be a live registry handle; `graph_json` NUL-terminated;
/// `out_report` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gest_validate_json(
    reg: *const GestRegistry,
    graph_json: *const c_char,
    out_report: *mut *mut c_char,
) -> GestStatus {
    guard(|| {
        check_out(out_report)?;
        let reg = ref_arg(reg, "registry")?;
        let g = parse_graph(str_arg(graph_json, "graph_json")?)?;
        let report = validate(&g, &reg.inner);
        *out_report = into_c(serde_json::to_string_pretty(&report).expect("serializable"));
        if report.ok {
            Ok(GestStatus::Ok)
        } else {
            Err(Fail(GestStatus::Invalid, format!("{} violation(s)", report.violations.len())))
        }
    })
}

/// Earliest-start schedule of a graph at `fps` frames per time unit.
///
/// # Safety
/// `reg` must be a live registry handle; `graph_json` NUL-terminated;
/// `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gest_schedule_json(
    reg: *const GestRegistry,
    graph_json: *const c_char,
    fps: u32,
    out_json: *mut *mut c_char,
) -> GestStatus {
    guard(|| {
        check_out(out_json)?;
        let reg = ref_arg(reg, "registry")?;
        let g = parse_graph(str_arg(graph_json, "graph_json")?)?;
        if fps == 0 {
            return Err(Fail(GestStatus::Parse, "fps must be at least 1".into()));
        }
        let s = solve(&build_constraints(&g, &reg.inner)).map_err(|e| Fail(GestStatus::Infeasible, e.to_string()))?;
        *out_json = into_c(s.with_fps(fps).to_json_pretty());
        Ok(GestStatus::Ok)
    })
}

/// Procedurally generates a story graph.
///
/// # Safety
/// `reg` must be a live registry handle; `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gest_generate(
    reg: *const GestRegistry,
    seed: u64,
    actors: u32,
    scenes: u32,
    rounds: u32,
    out_json: *mut *mut c_char,
) -> GestStatus {
    guard(|| {
        check_out(out_json)?;
        let reg = ref_arg(reg, "registry")?;
        let cfg = GenConfig {
            seed,
            n_actors: actors,
            n_scenes: scenes,
            rounds_per_scene: rounds,
            ..GenConfig::default()
        };
        let g = generate(&cfg, Arc::clone(&reg.inner)).map_err(|e| Fail(GestStatus::Generation, e.to_string()))?;
        *out_json = into_c(g.to_json_pretty());
        Ok(GestStatus::Ok)
    })
}

/// The tool manifest: name, kind, description and parameter schema of every tool.
///
/// # Safety
/// `out_json` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gest_tools_manifest(out_json: *mut *mut c_char) -> GestStatus {
    guard(|| {
        check_out(out_json)?;
        *out_json = into_c(tools::manifest().to_string());
        Ok(GestStatus::Ok)
    })
}
