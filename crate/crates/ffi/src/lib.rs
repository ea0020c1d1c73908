//! C ABI over `pointup`.
//!
//! Objects cross the boundary as opaque handles (`PuCloud`, `PuModel`,
//! `PuMesh`, `PuGraph`) that the caller releases with the matching `*_free`
//! function. Every fallible call returns a [`PuStatus`]; on failure the
//! message is available from [`pu_last_error`] on the same thread. Outputs are
//! written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pointup::geometry::{expand_index, knn_accelerated, IndexMatrix, PointCloud, TriangleMesh};
use pointup::io::{load_checkpoint, read_off, read_xyz, write_xyz};
use pointup::metrics::{chamfer, hausdorff, point_to_face};
use pointup::pipeline::Model;
use pointup::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PuStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    Parse = 4,
    Io = 5,
    Checkpoint = 6,
    NonFinite = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// A point cloud.
pub struct PuCloud(PointCloud);
/// A trained upsampling model.
pub struct PuModel(Model);
/// A triangle mesh.
pub struct PuMesh(TriangleMesh);
/// A KNN index matrix: `rows x k` neighbor indices.
pub struct PuGraph(IndexMatrix);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> PuStatus {
    match e {
        Error::Shape { .. } | Error::IndexOutOfRange { .. } => PuStatus::Shape,
        Error::InvalidArgument(_) => PuStatus::InvalidArgument,
        Error::NonFinite(_) | Error::Diverged { .. } => PuStatus::NonFinite,
        Error::Parse { .. } => PuStatus::Parse,
        Error::Checkpoint(_) => PuStatus::Checkpoint,
        Error::Io(_) => PuStatus::Io,
    }
}

struct Fail(PuStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(PuStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status plus last-error text.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PuStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PuStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PuStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<String, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Fail(PuStatus::InvalidArgument, "path is not UTF-8".into()))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn pu_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a NUL-terminated string with static lifetime.
#[no_mangle]
pub extern "C" fn pu_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// --- clouds ----------------------------------------------------------------

/// Copies `n` points from `xyz` (`3n` doubles, x y z per point).
///
/// # Safety
/// `xyz` must point to `3 * n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pu_cloud_new(xyz: *const f64, n: usize, out: *mut *mut PuCloud) -> PuStatus {
    guard(|| {
        if xyz.is_null() {
            return Err(null("xyz"));
        }
        let flat = std::slice::from_raw_parts(xyz, n.checked_mul(3).ok_or_else(|| null("size"))?);
        put(out, PuCloud(PointCloud::from_flat(flat)?))
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pu_cloud_read_xyz(path: *const c_char, out: *mut *mut PuCloud) -> PuStatus {
    guard(|| put(out, PuCloud(read_xyz(path_arg(path)?)?)))
}

/// # Safety
/// `cloud` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pu_cloud_write_xyz(cloud: *const PuCloud, path: *const c_char) -> PuStatus {
    guard(|| Ok(write_xyz(path_arg(path)?, &borrow(cloud, "cloud")?.0)?))
}

/// Number of points, or 0 for a null handle.
///
/// # Safety
/// `cloud` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pu_cloud_len(cloud: *const PuCloud) -> usize {
    cloud.as_ref().map_or(0, |c| c.0.len())
}

/// Copies the points into `out` (`3 * capacity` doubles).
///
/// # Safety
/// `cloud` must be a live handle; `out` must hold `3 * capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn pu_cloud_copy_points(cloud: *const PuCloud, out: *mut f64, capacity: usize) -> PuStatus {
    guard(|| {
        let c = &borrow(cloud, "cloud")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        if capacity < c.len() {
            return Err(Fail(
                PuStatus::BufferTooSmall,
                format!("buffer holds {capacity} points, cloud has {}", c.len()),
            ));
        }
        let flat = c.flat();
        ptr::copy_nonoverlapping(flat.as_ptr(), out, flat.len());
        Ok(())
    })
}

/// # Safety
/// `cloud` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pu_cloud_free(cloud: *mut PuCloud) {
    if !cloud.is_null() {
        drop(Box::from_raw(cloud));
    }
}

// --- models ----------------------------------------------------------------

/// Loads a `PUXP1` checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pu_model_load(path: *const c_char, out: *mut *mut PuModel) -> PuStatus {
    guard(|| put(out, PuModel(load_checkpoint(path_arg(path)?)?)))
}

/// Upsampling ratio, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pu_model_ratio(model: *const PuModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.ratio())
}

/// Produces `ratio * n` points from an `n`-point cloud.
///
/// # Safety
/// `model` and `input` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pu_model_upsample(model: *const PuModel, input: *const PuCloud, out: *mut *mut PuCloud) -> PuStatus {
    guard(|| {
        let dense = borrow(model, "model")?.0.upsample(&borrow(input, "input")?.0)?;
        put(out, PuCloud(dense))
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pu_model_free(model: *mut PuModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

// --- meshes ----------------------------------------------------------------

/// Reads an OFF mesh; `dropped` (may be null) receives the number of
/// zero-area faces discarded.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pu_mesh_read_off(path: *const c_char, out: *mut *mut PuMesh, dropped: *mut usize) -> PuStatus {
    guard(|| {
        let (mesh, n) = read_off(path_arg(path)?)?;
        put(out, PuMesh(mesh))?;
        if !dropped.is_null() {
            *dropped = n;
        }
        Ok(())
    })
}

/// # Safety
/// `mesh` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pu_mesh_free(mesh: *mut PuMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

// --- metrics ---------------------------------------------------------------

/// Sum of both directed mean squared nearest-neighbor distances.
///
/// # Safety
/// `pred` and `gt` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pu_chamfer(pred: *const PuCloud, gt: *const PuCloud, out: *mut f64) -> PuStatus {
    guard(|| {
        let v = chamfer(&borrow(pred, "pred")?.0, &borrow(gt, "gt")?.0);
        *out.as_mut().ok_or_else(|| null("out"))? = v;
        Ok(())
    })
}

/// Larger of both directed maxima of unsquared nearest-neighbor distances.
///
/// # Safety
/// `pred` and `gt` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pu_hausdorff(pred: *const PuCloud, gt: *const PuCloud, out: *mut f64) -> PuStatus {
    guard(|| {
        let v = hausdorff(&borrow(pred, "pred")?.0, &borrow(gt, "gt")?.0);
        *out.as_mut().ok_or_else(|| null("out"))? = v;
        Ok(())
    })
}

/// Mean unsquared distance from each predicted point to the mesh.
///
/// # Safety
/// `pred` and `mesh` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pu_point_to_face(pred: *const PuCloud, mesh: *const PuMesh, out: *mut f64) -> PuStatus {
    guard(|| {
        let v = point_to_face(&borrow(pred, "pred")?.0, &borrow(mesh, "mesh")?.0)?;
        *out.as_mut().ok_or_else(|| null("out"))? = v;
        Ok(())
    })
}

// --- graphs ----------------------------------------------------------------

/// Exact `k`-nearest-neighbor graph, self excluded, ties by smaller index.
///
/// # Safety
/// `cloud` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pu_knn(cloud: *const PuCloud, k: usize, out: *mut *mut PuGraph) -> PuStatus {
    guard(|| put(out, PuGraph(knn_accelerated(&borrow(cloud, "cloud")?.0, k)?)))
}

/// Graph for the doubled point set: rows `2i` and `2i+1` take row `i` with
/// every index `j` mapped to `2j`.
///
/// # Safety
/// `graph` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pu_graph_expand(graph: *const PuGraph, out: *mut *mut PuGraph) -> PuStatus {
    guard(|| put(out, PuGraph(expand_index(&borrow(graph, "graph")?.0))))
}

/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pu_graph_rows(graph: *const PuGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.rows())
}

/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pu_graph_k(graph: *const PuGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.k())
}

/// Copies the row-major `rows x k` indices into `out`.
///
/// # Safety
/// `graph` must be a live handle; `out` must hold `capacity` entries.
#[no_mangle]
pub unsafe extern "C" fn pu_graph_copy_entries(graph: *const PuGraph, out: *mut usize, capacity: usize) -> PuStatus {
    guard(|| {
        let e = borrow(graph, "graph")?.0.entries();
        if out.is_null() {
            return Err(null("out"));
        }
        if capacity < e.len() {
            return Err(Fail(
                PuStatus::BufferTooSmall,
                format!("buffer holds {capacity} entries, graph has {}", e.len()),
            ));
        }
        ptr::copy_nonoverlapping(e.as_ptr(), out, e.len());
        Ok(())
    })
}

/// # Safety
/// `graph` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pu_graph_free(graph: *mut PuGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}
