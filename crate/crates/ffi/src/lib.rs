//! C ABI over `simgraph`.
//!
//! Objects cross the boundary as opaque handles created by `sg_*` functions
//! and released with the matching `*_free`. Every fallible call returns an
//! [`SgStatus`]; on failure a message is kept per thread and can be read
//! with [`sg_last_error`]. Panics are caught and reported as
//! [`SgStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use simgraph::config::ExperimentConfig;
use simgraph::dataset::{brute_force_gt, load_fvecs, medoid, Matrix};
use simgraph::graph::{build_complete, build_nsw, extract_deterministic, load_graph, save_graph, Graph};
use simgraph::search::{beam_search, evaluate, AllKeep};
use simgraph::trainer::{reward_value, train, RewardConfig};
use simgraph::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    DimMismatch = 5,
    Version = 6,
    InvalidGraph = 7,
    Config = 8,
    Divergence = 9,
    Panic = 10,
}

/// Row-major `f32` vectors.
pub struct SgMatrix {
    inner: Matrix<f32>,
}

pub struct SgGraph {
    inner: Graph,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SgSearchStats {
    /// Number of results written.
    pub n_results: usize,
    pub dcs: usize,
    pub hops: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SgEvalResult {
    pub recall_at_1: f64,
    pub mean_dcs: f64,
    pub mean_hops: f64,
    pub mean_reward: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SgTrainSummary {
    pub best_epoch: usize,
    pub initial_reward: f64,
    pub initial_recall: f64,
    pub initial_mean_dcs: f64,
    pub best_reward: f64,
    pub best_recall: f64,
    pub best_mean_dcs: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SgStatus {
    match e {
        Error::Io { .. } => SgStatus::Io,
        Error::Format { .. } => SgStatus::Format,
        Error::DimMismatch { .. } => SgStatus::DimMismatch,
        Error::Version { .. } => SgStatus::Version,
        Error::InvalidGraph(_) => SgStatus::InvalidGraph,
        Error::InvalidArgument(_) => SgStatus::InvalidArgument,
        Error::Config(_) => SgStatus::Config,
        Error::Divergence { .. } => SgStatus::Divergence,
    }
}

struct Fail(SgStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(SgStatus::NullPointer, format!("{what} is null"))
}

fn bad(msg: impl Into<String>) -> Fail {
    Fail(SgStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SgStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SgStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| bad(format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message of the last failed call on this thread, or NULL after a
/// successful call. Valid until the next `sg_*` call on the same thread.
#[no_mangle]
pub extern "C" fn sg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Copies `rows * dim` floats into a new matrix.
///
/// # Safety
/// `data` must point to `rows * dim` readable floats; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_matrix_new(data: *const f32, rows: usize, dim: usize, out: *mut *mut SgMatrix) -> SgStatus {
    guard(|| {
        if dim == 0 {
            return Err(bad("dim must be positive"));
        }
        let len = rows.checked_mul(dim).ok_or_else(|| bad("rows * dim overflows"))?;
        let values = if len == 0 {
            Vec::new()
        } else {
            if data.is_null() {
                return Err(null("data"));
            }
            std::slice::from_raw_parts(data, len).to_vec()
        };
        let m = Matrix::new(dim, values)?;
        put(out, boxed(SgMatrix { inner: m }), "out")
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_matrix_load_fvecs(path: *const c_char, out: *mut *mut SgMatrix) -> SgStatus {
    guard(|| {
        let m = load_fvecs(path_arg(path, "path")?)?;
        put(out, boxed(SgMatrix { inner: m }), "out")
    })
}

/// # Safety
/// `m` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn sg_matrix_rows(m: *const SgMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.rows())
}

/// # Safety
/// `m` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn sg_matrix_dim(m: *const SgMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.dim())
}

/// # Safety
/// `m` must come from an `sg_matrix_*` constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn sg_matrix_free(m: *mut SgMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Exact nearest base row for every query, written to `out_ids`.
///
/// # Safety
/// `out_ids` must have room for `sg_matrix_rows(queries)` entries.
#[no_mangle]
pub unsafe extern "C" fn sg_brute_force_gt(base: *const SgMatrix, queries: *const SgMatrix, out_ids: *mut u32) -> SgStatus {
    guard(|| {
        let (b, q) = (as_ref(base, "base")?, as_ref(queries, "queries")?);
        let ids = brute_force_gt(&b.inner, &q.inner)?;
        if ids.is_empty() {
            return Ok(());
        }
        if out_ids.is_null() {
            return Err(null("out_ids"));
        }
        std::ptr::copy_nonoverlapping(ids.as_ptr(), out_ids, ids.len());
        Ok(())
    })
}

/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_medoid(base: *const SgMatrix, out: *mut u32) -> SgStatus {
    guard(|| put(out, medoid(&as_ref(base, "base")?.inner)?, "out"))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_graph_complete(n: usize, start: u32, out: *mut *mut SgGraph) -> SgStatus {
    guard(|| put(out, boxed(SgGraph { inner: build_complete(n, start)? }), "out"))
}

/// # Safety
/// `base` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_graph_nsw(
    base: *const SgMatrix,
    m: usize,
    ef_construction: usize,
    seed: u64,
    out: *mut *mut SgGraph,
) -> SgStatus {
    guard(|| {
        let g = build_nsw(&as_ref(base, "base")?.inner, m, ef_construction, seed)?;
        put(out, boxed(SgGraph { inner: g }), "out")
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_graph_load(path: *const c_char, out: *mut *mut SgGraph) -> SgStatus {
    guard(|| {
        let g = load_graph(path_arg(path, "path")?)?;
        put(out, boxed(SgGraph { inner: g }), "out")
    })
}

/// # Safety
/// `g` must be live; `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sg_graph_save(g: *const SgGraph, path: *const c_char) -> SgStatus {
    guard(|| Ok(save_graph(path_arg(path, "path")?, &as_ref(g, "graph")?.inner)?))
}

/// # Safety
/// `g` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn sg_graph_n_vertices(g: *const SgGraph) -> usize {
    g.as_ref().map_or(0, |g| g.inner.n_vertices())
}

/// # Safety
/// `g` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn sg_graph_n_edges(g: *const SgGraph) -> usize {
    g.as_ref().map_or(0, |g| g.inner.n_edges())
}

/// # Safety
/// `g` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn sg_graph_start(g: *const SgGraph) -> u32 {
    g.as_ref().map_or(0, |g| g.inner.start())
}

/// Copies the out-neighbors of `v` into `out` (capacity `cap`) and stores
/// the outdegree in `out_len`. Nothing is copied when `cap` is too small.
///
/// # Safety
/// `out` must have room for `cap` entries; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_graph_neighbors(
    g: *const SgGraph,
    v: u32,
    out: *mut u32,
    cap: usize,
    out_len: *mut usize,
) -> SgStatus {
    guard(|| {
        let g = &as_ref(g, "graph")?.inner;
        if v as usize >= g.n_vertices() {
            return Err(bad(format!("vertex {v} out of range")));
        }
        let nb = g.neighbors(v);
        put(out_len, nb.len(), "out_len")?;
        if nb.len() <= cap && !nb.is_empty() {
            if out.is_null() {
                return Err(null("out"));
            }
            std::ptr::copy_nonoverlapping(nb.as_ptr(), out, nb.len());
        }
        Ok(())
    })
}

/// Plain graph of the edges with probability at least 0.5.
///
/// # Safety
/// `g` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_graph_extract(g: *const SgGraph, out: *mut *mut SgGraph) -> SgStatus {
    guard(|| {
        let d = extract_deterministic(&as_ref(g, "graph")?.inner)?;
        put(out, boxed(SgGraph { inner: d }), "out")
    })
}

/// # Safety
/// `g` must come from an `sg_graph_*` constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn sg_graph_free(g: *mut SgGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

fn check_base(g: &Graph, base: &Matrix<f32>) -> Result<(), Fail> {
    if g.n_vertices() != base.rows() {
        return Err(bad(format!(
            "graph has {} vertices but base has {} rows",
            g.n_vertices(),
            base.rows()
        )));
    }
    Ok(())
}

/// Beam search keeping every edge. Up to `k` ids, closest first, go to
/// `out_ids`.
///
/// # Safety
/// `query` must hold `dim` floats, `out_ids` room for `k` ids, `stats`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_search(
    g: *const SgGraph,
    base: *const SgMatrix,
    query: *const f32,
    dim: usize,
    k: usize,
    ef: usize,
    out_ids: *mut u32,
    stats: *mut SgSearchStats,
) -> SgStatus {
    guard(|| {
        let (g, base) = (&as_ref(g, "graph")?.inner, &as_ref(base, "base")?.inner);
        check_base(g, base)?;
        if dim != base.dim() {
            return Err(Error::DimMismatch {
                expected: base.dim(),
                actual: dim,
            }
            .into());
        }
        if k == 0 || ef < k {
            return Err(bad("need 1 <= k <= ef"));
        }
        if query.is_null() || out_ids.is_null() {
            return Err(null("query or out_ids"));
        }
        let q = std::slice::from_raw_parts(query, dim);
        let t = beam_search(g, base, &AllKeep, q, k, ef, 0);
        for (i, s) in t.topk.iter().enumerate() {
            out_ids.add(i).write(s.id);
        }
        put(
            stats,
            SgSearchStats {
                n_results: t.topk.len(),
                dcs: t.dcs,
                hops: t.hops,
            },
            "stats",
        )
    })
}

/// Recall@1, mean DCS, mean hops and mean reward over a query set.
///
/// # Safety
/// `gt` must hold one id per query row; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_evaluate(
    g: *const SgGraph,
    base: *const SgMatrix,
    queries: *const SgMatrix,
    gt: *const u32,
    k: usize,
    ef: usize,
    dcs_max: usize,
    out: *mut SgEvalResult,
) -> SgStatus {
    guard(|| {
        let (g, base) = (&as_ref(g, "graph")?.inner, &as_ref(base, "base")?.inner);
        let q = &as_ref(queries, "queries")?.inner;
        check_base(g, base)?;
        if gt.is_null() {
            return Err(null("gt"));
        }
        let gt = std::slice::from_raw_parts(gt, q.rows());
        let cfg = RewardConfig::new(dcs_max)?;
        let r = evaluate(g, base, &AllKeep, q, gt, k, ef, 0)?;
        put(
            out,
            SgEvalResult {
                recall_at_1: r.recall_at_1,
                mean_dcs: r.mean_dcs,
                mean_hops: r.mean_hops,
                mean_reward: simgraph::trainer::mean_reward(&r, &cfg),
            },
            "out",
        )
    })
}

/// Session reward: `found * max(dcs_max - dcs, 1)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_reward(found: bool, dcs: usize, dcs_max: usize, out: *mut f64) -> SgStatus {
    guard(|| put(out, reward_value(found, dcs, &RewardConfig::new(dcs_max)?), "out"))
}

/// Builds the dataset and initial graph described by a TOML experiment
/// config, trains, and returns the refined graph.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string; `out_graph` and
/// `summary` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_train_from_config(
    config_toml: *const c_char,
    out_graph: *mut *mut SgGraph,
    summary: *mut SgTrainSummary,
) -> SgStatus {
    guard(|| {
        if config_toml.is_null() {
            return Err(null("config_toml"));
        }
        if out_graph.is_null() || summary.is_null() {
            return Err(null("out_graph or summary"));
        }
        let text = CStr::from_ptr(config_toml).to_str().map_err(|_| bad("config is not UTF-8"))?;
        let cfg = ExperimentConfig::from_toml_str(text)?;
        let ds = cfg.make_dataset()?;
        let g0 = cfg.make_graph(&ds)?;
        let out = train(&g0, &ds, cfg.search, &cfg.reward, &cfg.train_config())?;
        summary.write(SgTrainSummary {
            best_epoch: out.best_epoch,
            initial_reward: out.initial.reward,
            initial_recall: out.initial.recall,
            initial_mean_dcs: out.initial.mean_dcs,
            best_reward: out.best.reward,
            best_recall: out.best.recall,
            best_mean_dcs: out.best.mean_dcs,
        });
        out_graph.write(boxed(SgGraph { inner: out.graph }));
        Ok(())
    })
}
