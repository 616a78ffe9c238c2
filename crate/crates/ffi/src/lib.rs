//! C ABI over [`nbgraph`].
//!
//! Handles are opaque. A graph handle may be shared between threads; a
//! thread handle must be used and freed only on the thread that registered
//! it. Every function returns an [`NbgStatus`] and writes results through
//! out-pointers. Panics never cross the boundary; they surface as
//! `NBG_STATUS_PANIC`.

use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nbgraph::{BoundedPath, EdgeOutcome, Graph, GraphConfig, GraphError, Reclamation, ThreadHandle};

/// Opaque graph handle.
pub struct NbgGraph {
    graph: Graph,
}

/// Opaque per-thread handle.
pub struct NbgThread {
    handle: ThreadHandle,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NbgStatus {
    Ok = 0,
    NullArgument = 1,
    KeyOutOfRange = 2,
    SelfLoop = 3,
    RegistryFull = 4,
    AlreadyRegistered = 5,
    InvalidConfig = 6,
    /// `nbg_get_path`: the endpoints are not connected.
    NoPath = 7,
    /// `nbg_get_path`: the round budget ran out.
    Inconclusive = 8,
    /// `nbg_get_path`: `*out_len` holds the required capacity.
    BufferTooSmall = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NbgEdgeOutcome {
    VertexNotPresent = 0,
    EdgePresent = 1,
    EdgeAdded = 2,
    EdgeNotPresent = 3,
    EdgeRemoved = 4,
    EdgeFound = 5,
    VertexOrEdgeNotPresent = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NbgReclamation {
    Epoch = 0,
    Leak = 1,
}

impl From<EdgeOutcome> for NbgEdgeOutcome {
    fn from(o: EdgeOutcome) -> Self {
        match o {
            EdgeOutcome::VertexNotPresent => Self::VertexNotPresent,
            EdgeOutcome::EdgePresent => Self::EdgePresent,
            EdgeOutcome::EdgeAdded => Self::EdgeAdded,
            EdgeOutcome::EdgeNotPresent => Self::EdgeNotPresent,
            EdgeOutcome::EdgeRemoved => Self::EdgeRemoved,
            EdgeOutcome::EdgeFound => Self::EdgeFound,
            EdgeOutcome::VertexOrEdgeNotPresent => Self::VertexOrEdgeNotPresent,
        }
    }
}

impl From<&GraphError> for NbgStatus {
    fn from(e: &GraphError) -> Self {
        match e {
            GraphError::KeyOutOfRange(_) => NbgStatus::KeyOutOfRange,
            GraphError::SelfLoop(_) => NbgStatus::SelfLoop,
            // Unbounded queries are requested with 0, so a zero cap can't
            // reach the core; map it anyway.
            GraphError::ZeroScanCap => NbgStatus::InvalidConfig,
            GraphError::RegistryFull { .. } => NbgStatus::RegistryFull,
            GraphError::AlreadyRegistered => NbgStatus::AlreadyRegistered,
            GraphError::InvalidConfig(_) => NbgStatus::InvalidConfig,
        }
    }
}

fn guard(f: impl FnOnce() -> NbgStatus) -> NbgStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or(NbgStatus::Panic)
}

fn emit<T>(out: *mut T, value: T) {
    // SAFETY: callers have checked `out` for null; the C caller promises it
    // points to writable storage.
    unsafe { out.write(value) }
}

/// Creates a graph admitting up to `max_threads` registered threads.
///
/// # Safety
/// `out` must be null or point to writable storage for a pointer.
#[no_mangle]
pub unsafe extern "C" fn nbg_graph_new(
    max_threads: usize,
    reclamation: NbgReclamation,
    out: *mut *mut NbgGraph,
) -> NbgStatus {
    if out.is_null() {
        return NbgStatus::NullArgument;
    }
    guard(|| {
        let reclamation = match reclamation {
            NbgReclamation::Epoch => Reclamation::Epoch,
            NbgReclamation::Leak => Reclamation::Leak,
        };
        match Graph::with_config(GraphConfig { max_threads, reclamation }) {
            Ok(graph) => {
                emit(out, Box::into_raw(Box::new(NbgGraph { graph })));
                NbgStatus::Ok
            }
            Err(e) => NbgStatus::from(&e),
        }
    })
}

/// Releases the caller's graph handle. Nodes are freed once every thread
/// handle is gone too. Null is a no-op.
///
/// # Safety
/// `g` must be null or a handle from `nbg_graph_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nbg_graph_free(g: *mut NbgGraph) {
    if !g.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(g))));
    }
}

/// Runs pending reclamation. Call only while no thread is inside an
/// operation on this graph.
///
/// # Safety
/// `g` must be null or a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn nbg_graph_quiesce(g: *const NbgGraph) -> NbgStatus {
    let Some(g) = g.as_ref() else { return NbgStatus::NullArgument };
    guard(|| {
        g.graph.quiesce();
        NbgStatus::Ok
    })
}

/// Registers the calling thread.
///
/// # Safety
/// `g` must be a live graph handle and `out` writable. The returned handle
/// must only be used and freed on the calling thread.
#[no_mangle]
pub unsafe extern "C" fn nbg_thread_register(
    g: *const NbgGraph,
    out: *mut *mut NbgThread,
) -> NbgStatus {
    let Some(g) = g.as_ref() else { return NbgStatus::NullArgument };
    if out.is_null() {
        return NbgStatus::NullArgument;
    }
    guard(|| match g.graph.register() {
        Ok(handle) => {
            emit(out, Box::into_raw(Box::new(NbgThread { handle })));
            NbgStatus::Ok
        }
        Err(e) => NbgStatus::from(&e),
    })
}

/// Releases a thread handle and its registry slot. Null is a no-op.
///
/// # Safety
/// `t` must be null or a handle from `nbg_thread_register` on this thread.
#[no_mangle]
pub unsafe extern "C" fn nbg_thread_free(t: *mut NbgThread) {
    if !t.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(t))));
    }
}

unsafe fn bool_op(
    t: *const NbgThread,
    out: *mut bool,
    f: impl FnOnce(&ThreadHandle) -> Result<bool, GraphError>,
) -> NbgStatus {
    let Some(t) = t.as_ref() else { return NbgStatus::NullArgument };
    if out.is_null() {
        return NbgStatus::NullArgument;
    }
    guard(|| match f(&t.handle) {
        Ok(b) => {
            emit(out, b);
            NbgStatus::Ok
        }
        Err(e) => NbgStatus::from(&e),
    })
}

unsafe fn edge_op(
    t: *const NbgThread,
    out: *mut NbgEdgeOutcome,
    f: impl FnOnce(&ThreadHandle) -> Result<EdgeOutcome, GraphError>,
) -> NbgStatus {
    let Some(t) = t.as_ref() else { return NbgStatus::NullArgument };
    if out.is_null() {
        return NbgStatus::NullArgument;
    }
    guard(|| match f(&t.handle) {
        Ok(o) => {
            emit(out, o.into());
            NbgStatus::Ok
        }
        Err(e) => NbgStatus::from(&e),
    })
}

/// `*out` is true if `k` was absent and is now present.
///
/// # Safety
/// `t` must be a live thread handle owned by the caller, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nbg_add_vertex(t: *const NbgThread, k: i64, out: *mut bool) -> NbgStatus {
    bool_op(t, out, |h| h.add_vertex(k))
}

/// `*out` is true if `k` was present and has been removed.
///
/// # Safety
/// As for `nbg_add_vertex`.
#[no_mangle]
pub unsafe extern "C" fn nbg_remove_vertex(t: *const NbgThread, k: i64, out: *mut bool) -> NbgStatus {
    bool_op(t, out, |h| h.remove_vertex(k))
}

/// # Safety
/// As for `nbg_add_vertex`.
#[no_mangle]
pub unsafe extern "C" fn nbg_contains_vertex(t: *const NbgThread, k: i64, out: *mut bool) -> NbgStatus {
    bool_op(t, out, |h| h.contains_vertex(k))
}

/// # Safety
/// As for `nbg_add_vertex`.
#[no_mangle]
pub unsafe extern "C" fn nbg_add_edge(
    t: *const NbgThread,
    k: i64,
    l: i64,
    out: *mut NbgEdgeOutcome,
) -> NbgStatus {
    edge_op(t, out, |h| h.add_edge(k, l))
}

/// # Safety
/// As for `nbg_add_vertex`.
#[no_mangle]
pub unsafe extern "C" fn nbg_remove_edge(
    t: *const NbgThread,
    k: i64,
    l: i64,
    out: *mut NbgEdgeOutcome,
) -> NbgStatus {
    edge_op(t, out, |h| h.remove_edge(k, l))
}

/// # Safety
/// As for `nbg_add_vertex`.
#[no_mangle]
pub unsafe extern "C" fn nbg_contains_edge(
    t: *const NbgThread,
    k: i64,
    l: i64,
    out: *mut NbgEdgeOutcome,
) -> NbgStatus {
    edge_op(t, out, |h| h.contains_edge(k, l))
}

/// Finds a path from `k` to `l`. On `NBG_STATUS_OK` the keys, endpoints
/// included, are in `buf[0..*out_len]`. Returns `NBG_STATUS_NO_PATH` when
/// the vertices are not connected (or one is absent), and
/// `NBG_STATUS_BUFFER_TOO_SMALL` with the needed length in `*out_len` when
/// `cap` is short. `max_rounds` bounds the comparison rounds; 0 means
/// unbounded.
///
/// # Safety
/// `t` must be a live thread handle owned by the caller, `out_len` writable,
/// and `buf` valid for `cap` writes (it may be null when `cap` is 0).
#[no_mangle]
pub unsafe extern "C" fn nbg_get_path(
    t: *const NbgThread,
    k: i64,
    l: i64,
    max_rounds: u32,
    buf: *mut i64,
    cap: usize,
    out_len: *mut usize,
) -> NbgStatus {
    let Some(t) = t.as_ref() else { return NbgStatus::NullArgument };
    if out_len.is_null() || (buf.is_null() && cap > 0) {
        return NbgStatus::NullArgument;
    }
    guard(|| {
        let rounds = (max_rounds > 0).then_some(max_rounds);
        let res = t.handle.get_path_traced(k, l, rounds).map(|(p, _)| p);
        emit(out_len, 0);
        match res {
            Err(e) => NbgStatus::from(&e),
            Ok(BoundedPath::Inconclusive) => NbgStatus::Inconclusive,
            Ok(BoundedPath::Complete(None)) => NbgStatus::NoPath,
            Ok(BoundedPath::Complete(Some(path))) => {
                emit(out_len, path.len());
                if path.len() > cap {
                    return NbgStatus::BufferTooSmall;
                }
                // SAFETY: cap >= len and buf is valid for cap writes.
                ptr::copy_nonoverlapping(path.as_ptr(), buf, path.len());
                NbgStatus::Ok
            }
        }
    })
}

/// Static, NUL-terminated description of a status code.
#[no_mangle]
pub extern "C" fn nbg_status_str(s: NbgStatus) -> *const c_char {
    let msg: &'static [u8] = match s {
        NbgStatus::Ok => b"ok\0",
        NbgStatus::NullArgument => b"null argument\0",
        NbgStatus::KeyOutOfRange => b"key out of range\0",
        NbgStatus::SelfLoop => b"self-loop not supported\0",
        NbgStatus::RegistryFull => b"thread registry full\0",
        NbgStatus::AlreadyRegistered => b"thread already registered\0",
        NbgStatus::InvalidConfig => b"invalid configuration\0",
        NbgStatus::NoPath => b"no path\0",
        NbgStatus::Inconclusive => b"inconclusive\0",
        NbgStatus::BufferTooSmall => b"buffer too small\0",
        NbgStatus::Panic => b"internal panic\0",
    };
    msg.as_ptr().cast()
}

/// Static, NUL-terminated message for an edge outcome, e.g. `"EDGE ADDED"`.
#[no_mangle]
pub extern "C" fn nbg_edge_outcome_str(o: NbgEdgeOutcome) -> *const c_char {
    let msg: &'static [u8] = match o {
        NbgEdgeOutcome::VertexNotPresent => b"VERTEX NOT PRESENT\0",
        NbgEdgeOutcome::EdgePresent => b"EDGE PRESENT\0",
        NbgEdgeOutcome::EdgeAdded => b"EDGE ADDED\0",
        NbgEdgeOutcome::EdgeNotPresent => b"EDGE NOT PRESENT\0",
        NbgEdgeOutcome::EdgeRemoved => b"EDGE REMOVED\0",
        NbgEdgeOutcome::EdgeFound => b"EDGE FOUND\0",
        NbgEdgeOutcome::VertexOrEdgeNotPresent => b"VERTEX OR EDGE NOT PRESENT\0",
    };
    msg.as_ptr().cast()
}
