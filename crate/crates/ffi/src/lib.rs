//! C ABI over the jet-geometry engine.
//!
//! The surface mirrors the command-line tool: parse a scene (from text or
//! a file path) into an opaque handle, then ask for structure reports
//! (`compute`), identity verification (`verify`), or coordinate-change
//! transport (`transform`). Reports are returned as heap-allocated UTF-8
//! C strings the caller must release with [`jetgeo_string_free`]; every
//! fallible call returns a [`JetgeoStatus`], and the most recent failure
//! message is kept per thread behind [`jetgeo_last_error`].
//!
//! The build script runs cbindgen over this file to produce
//! `include/jetgeo.h`.

#![deny(unsafe_op_in_unsafe_fn)]

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use jetgeo::config::{load_config, parse_change, parse_config, SceneConfig};
use jetgeo::driver::{
    compute_report, transform_report, validation_tester, verify_report, ComputeKind,
    ConnectionChoice, Controls, DriverError, TransformKind, VerifyKind,
};
use jetgeo::report::ReportMode;

/// Outcome of a call. Anything other than `Ok` leaves a human-readable
/// explanation behind [`jetgeo_last_error`]; `ChecksFailed` still writes
/// the report so the failing entries can be inspected.
#[repr(C)]
#[derive(Debug, Copy, Clone, PartialEq, Eq)]
pub enum JetgeoStatus {
    /// The call succeeded (and, for verification, every check passed).
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// An input string was not valid UTF-8.
    InvalidUtf8 = 2,
    /// An argument value was not understood: an unknown structure or
    /// suite name, an unknown connection choice, or a request the scene
    /// cannot satisfy.
    BadRequest = 3,
    /// The scene or change text did not parse or validate.
    BadScene = 4,
    /// A geometric computation failed.
    ComputeError = 5,
    /// Verification ran to completion and at least one check failed.
    ChecksFailed = 6,
    /// An internal panic was caught at the boundary.
    InternalError = 7,
}

/// A parsed and validated scene: the jet-space coordinates plus either a
/// metric pair or explicit connection coefficients. Create with
/// [`jetgeo_scene_parse`] or [`jetgeo_scene_load`], release with
/// [`jetgeo_scene_free`].
pub struct JetgeoScene {
    config: SceneConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    let stored = CString::new(message).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(stored));
}

fn clear_error() {
    LAST_ERROR.with(|slot| slot.borrow_mut().take());
}

fn fail(status: JetgeoStatus, message: impl Into<String>) -> JetgeoStatus {
    set_error(message);
    status
}

/// Runs a call body behind a panic guard so unwinding never crosses the
/// C boundary.
fn api(body: impl FnOnce() -> JetgeoStatus) -> JetgeoStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(JetgeoStatus::InternalError, "internal panic"),
    }
}

/// Reads a required UTF-8 string argument.
///
/// # Safety
///
/// `ptr`, when non-NULL, must point to a NUL-terminated string that stays
/// valid for the duration of the call.
unsafe fn text_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, JetgeoStatus> {
    if ptr.is_null() {
        return Err(fail(JetgeoStatus::NullArgument, format!("{name} is NULL")));
    }
    unsafe { CStr::from_ptr(ptr) }.to_str().map_err(|_| {
        fail(
            JetgeoStatus::InvalidUtf8,
            format!("{name} is not valid UTF-8"),
        )
    })
}

/// Hands a rendered report to the caller as an owned C string.
fn emit(out_report: *mut *mut c_char, rendered: String) -> Result<(), JetgeoStatus> {
    let stored = CString::new(rendered).map_err(|_| {
        fail(
            JetgeoStatus::InternalError,
            "report contains an interior NUL byte",
        )
    })?;
    // Safety contract of the callers: out_report was checked non-NULL.
    unsafe { *out_report = stored.into_raw() };
    Ok(())
}

fn status_for(err: &DriverError) -> JetgeoStatus {
    match err {
        DriverError::Unsupported(_) => JetgeoStatus::BadRequest,
        DriverError::Config(_) => JetgeoStatus::BadScene,
        DriverError::Geometry(_) | DriverError::Identity(_) | DriverError::Transform(_) => {
            JetgeoStatus::ComputeError
        }
    }
}

fn compute_kind(word: &str) -> Result<ComputeKind, JetgeoStatus> {
    match word {
        "christoffel" => Ok(ComputeKind::Christoffel),
        "nlc" => Ok(ComputeKind::Nlc),
        "connection" => Ok(ComputeKind::Connection),
        "torsion" => Ok(ComputeKind::Torsion),
        "curvature" => Ok(ComputeKind::Curvature),
        "deflection" => Ok(ComputeKind::Deflection),
        "em" => Ok(ComputeKind::Em),
        other => Err(fail(
            JetgeoStatus::BadRequest,
            format!(
                "unknown structure `{other}`: expected christoffel, nlc, connection, \
                 torsion, curvature, deflection, or em"
            ),
        )),
    }
}

fn verify_kind(word: &str) -> Result<VerifyKind, JetgeoStatus> {
    match word {
        "ricci" => Ok(VerifyKind::Ricci),
        "deflection" => Ok(VerifyKind::Deflection),
        "brackets" => Ok(VerifyKind::Brackets),
        "covariance" => Ok(VerifyKind::Covariance),
        "all" => Ok(VerifyKind::All),
        other => Err(fail(
            JetgeoStatus::BadRequest,
            format!(
                "unknown suite `{other}`: expected ricci, deflection, brackets, \
                 covariance, or all"
            ),
        )),
    }
}

fn transform_kind(word: &str) -> Result<TransformKind, JetgeoStatus> {
    match word {
        "nlc" => Ok(TransformKind::Nlc),
        "connection" => Ok(TransformKind::Connection),
        "check" => Ok(TransformKind::Check),
        other => Err(fail(
            JetgeoStatus::BadRequest,
            format!("unknown transport target `{other}`: expected nlc, connection, or check"),
        )),
    }
}

fn connection_choice(word: Option<&str>) -> Result<ConnectionChoice, JetgeoStatus> {
    match word {
        None | Some("auto") => Ok(ConnectionChoice::Auto),
        Some("berwald") => Ok(ConnectionChoice::Berwald),
        Some("file") => Ok(ConnectionChoice::Explicit),
        Some(other) => Err(fail(
            JetgeoStatus::BadRequest,
            format!("unknown connection choice `{other}`: expected auto, berwald, or file"),
        )),
    }
}

fn finish_scene(
    parsed: Result<SceneConfig, jetgeo::config::ConfigError>,
    out_scene: *mut *mut JetgeoScene,
) -> JetgeoStatus {
    match parsed {
        Ok(config) => {
            let handle = Box::new(JetgeoScene { config });
            // Safety contract of the callers: out_scene was checked non-NULL.
            unsafe { *out_scene = Box::into_raw(handle) };
            JetgeoStatus::Ok
        }
        Err(err) => fail(JetgeoStatus::BadScene, err.to_string()),
    }
}

/// The library version as a static NUL-terminated string; never freed.
#[no_mangle]
pub extern "C" fn jetgeo_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// The message of the most recent failed call on this thread, or NULL if
/// none has failed yet. The pointer stays valid until the next call into
/// the library on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn jetgeo_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(ptr::null(), |message| message.as_ptr())
    })
}

/// Parses scene text into a new scene handle and stores it in
/// `*out_scene` (NULL on failure).
///
/// # Safety
///
/// `text` must be NULL or a NUL-terminated string valid for the call.
/// `out_scene` must be a valid, writable pointer.
#[no_mangle]
pub unsafe extern "C" fn jetgeo_scene_parse(
    text: *const c_char,
    out_scene: *mut *mut JetgeoScene,
) -> JetgeoStatus {
    api(|| {
        clear_error();
        if out_scene.is_null() {
            return fail(JetgeoStatus::NullArgument, "out_scene is NULL");
        }
        unsafe { *out_scene = ptr::null_mut() };
        let text = match unsafe { text_arg(text, "text") } {
            Ok(text) => text,
            Err(status) => return status,
        };
        finish_scene(parse_config(text), out_scene)
    })
}

/// Reads and parses a scene file into a new scene handle and stores it
/// in `*out_scene` (NULL on failure).
///
/// # Safety
///
/// `path` must be NULL or a NUL-terminated string valid for the call.
/// `out_scene` must be a valid, writable pointer.
#[no_mangle]
pub unsafe extern "C" fn jetgeo_scene_load(
    path: *const c_char,
    out_scene: *mut *mut JetgeoScene,
) -> JetgeoStatus {
    api(|| {
        clear_error();
        if out_scene.is_null() {
            return fail(JetgeoStatus::NullArgument, "out_scene is NULL");
        }
        unsafe { *out_scene = ptr::null_mut() };
        let path = match unsafe { text_arg(path, "path") } {
            Ok(path) => path,
            Err(status) => return status,
        };
        finish_scene(load_config(Path::new(path)), out_scene)
    })
}

/// Releases a scene handle. NULL is a no-op.
///
/// # Safety
///
/// `scene` must be NULL or a pointer previously returned through
/// [`jetgeo_scene_parse`] or [`jetgeo_scene_load`] that has not been
/// freed yet; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn jetgeo_scene_free(scene: *mut JetgeoScene) {
    if !scene.is_null() {
        drop(unsafe { Box::from_raw(scene) });
    }
}

/// The spatial dimension n of the scene's manifold, or 0 for NULL.
///
/// # Safety
///
/// `scene` must be NULL or a live scene handle.
#[no_mangle]
pub unsafe extern "C" fn jetgeo_scene_dimension(scene: *const JetgeoScene) -> usize {
    match unsafe { scene.as_ref() } {
        Some(scene) => scene.config.space.dim(),
        None => 0,
    }
}

/// Computes one structure of the scene and stores the rendered report in
/// `*out_report` as a caller-owned string (NULL on failure).
///
/// `what` picks the structure: `christoffel`, `nlc`, `connection`,
/// `torsion`, `curvature`, `deflection`, or `em`. `connection` picks the
/// linear connection where one is needed: NULL or `auto` for whatever the
/// scene provides, `berwald` for the metric-pair connection, `file` for
/// explicit coefficients. `machine` switches the report from readable
/// text to flat `key = value` lines.
///
/// # Safety
///
/// `scene` must be a live scene handle or NULL. `what` and `connection`
/// must each be NULL or NUL-terminated strings valid for the call.
/// `out_report` must be a valid, writable pointer.
#[no_mangle]
pub unsafe extern "C" fn jetgeo_compute(
    scene: *const JetgeoScene,
    what: *const c_char,
    connection: *const c_char,
    machine: bool,
    out_report: *mut *mut c_char,
) -> JetgeoStatus {
    api(|| {
        clear_error();
        if out_report.is_null() {
            return fail(JetgeoStatus::NullArgument, "out_report is NULL");
        }
        unsafe { *out_report = ptr::null_mut() };
        let Some(scene) = (unsafe { scene.as_ref() }) else {
            return fail(JetgeoStatus::NullArgument, "scene is NULL");
        };
        let what = match unsafe { text_arg(what, "what") } {
            Ok(what) => what,
            Err(status) => return status,
        };
        let kind = match compute_kind(what) {
            Ok(kind) => kind,
            Err(status) => return status,
        };
        let choice_word = if connection.is_null() {
            None
        } else {
            match unsafe { text_arg(connection, "connection") } {
                Ok(word) => Some(word),
                Err(status) => return status,
            }
        };
        let choice = match connection_choice(choice_word) {
            Ok(choice) => choice,
            Err(status) => return status,
        };

        let controls = Controls::resolve(&scene.config, None, None, None, None);
        let report = match compute_report(&scene.config, kind, choice, controls) {
            Ok(report) => report,
            Err(err) => return fail(status_for(&err), err.to_string()),
        };
        let mode = if machine {
            ReportMode::Machine
        } else {
            ReportMode::Text
        };
        match emit(out_report, report.render(mode)) {
            Ok(()) => JetgeoStatus::Ok,
            Err(status) => status,
        }
    })
}

/// Verifies an identity suite of the scene's connection by seeded
/// sampling and stores the rendered report in `*out_report` as a
/// caller-owned string. On `ChecksFailed` the report is still written;
/// it lists each failing check.
///
/// `what` picks the suite: `ricci`, `deflection`, `brackets`,
/// `covariance`, or `all`. Pass `samples` = 0, `seed` = 0, or `tol` <= 0
/// to fall back to the scene file's value for that control (or the
/// defaults: 32 samples, seed 0, tolerance 1e-9).
///
/// # Safety
///
/// `scene` must be a live scene handle or NULL. `what` must be NULL or a
/// NUL-terminated string valid for the call. `out_report` must be a
/// valid, writable pointer.
#[no_mangle]
pub unsafe extern "C" fn jetgeo_verify(
    scene: *const JetgeoScene,
    what: *const c_char,
    samples: usize,
    seed: u64,
    tol: f64,
    out_report: *mut *mut c_char,
) -> JetgeoStatus {
    api(|| {
        clear_error();
        if out_report.is_null() {
            return fail(JetgeoStatus::NullArgument, "out_report is NULL");
        }
        unsafe { *out_report = ptr::null_mut() };
        let Some(scene) = (unsafe { scene.as_ref() }) else {
            return fail(JetgeoStatus::NullArgument, "scene is NULL");
        };
        let what = match unsafe { text_arg(what, "what") } {
            Ok(what) => what,
            Err(status) => return status,
        };
        let kind = match verify_kind(what) {
            Ok(kind) => kind,
            Err(status) => return status,
        };

        let controls = Controls::resolve(
            &scene.config,
            (samples > 0).then_some(samples),
            (seed > 0).then_some(seed),
            (tol.is_finite() && tol > 0.0).then_some(tol),
            None,
        );
        let report = match verify_report(&scene.config, kind, controls) {
            Ok(report) => report,
            Err(err) => return fail(status_for(&err), err.to_string()),
        };
        let failed = report.has_failures();
        if let Err(status) = emit(out_report, report.render(ReportMode::Text)) {
            return status;
        }
        if failed {
            fail(
                JetgeoStatus::ChecksFailed,
                "some checks failed; see the report for the failing entries",
            )
        } else {
            JetgeoStatus::Ok
        }
    })
}

/// Transports a structure across a coordinate change and stores the
/// rendered report in `*out_report` as a caller-owned string.
///
/// `change_text` holds `t_new`/`t_old`/`x_new[i]`/`x_old[i]` lines; pass
/// NULL to use the change embedded in the scene. `what` picks the
/// target: `nlc`, `connection`, or `check` to verify the transport rules
/// themselves (`check` reports `ChecksFailed` like [`jetgeo_verify`]).
///
/// # Safety
///
/// `scene` must be a live scene handle or NULL. `change_text` and `what`
/// must each be NULL or NUL-terminated strings valid for the call.
/// `out_report` must be a valid, writable pointer.
#[no_mangle]
pub unsafe extern "C" fn jetgeo_transform(
    scene: *const JetgeoScene,
    change_text: *const c_char,
    what: *const c_char,
    out_report: *mut *mut c_char,
) -> JetgeoStatus {
    api(|| {
        clear_error();
        if out_report.is_null() {
            return fail(JetgeoStatus::NullArgument, "out_report is NULL");
        }
        unsafe { *out_report = ptr::null_mut() };
        let Some(scene) = (unsafe { scene.as_ref() }) else {
            return fail(JetgeoStatus::NullArgument, "scene is NULL");
        };
        let what = match unsafe { text_arg(what, "what") } {
            Ok(what) => what,
            Err(status) => return status,
        };
        let kind = match transform_kind(what) {
            Ok(kind) => kind,
            Err(status) => return status,
        };
        let config = &scene.config;

        let spec = if change_text.is_null() {
            match &config.change {
                Some(spec) => spec.clone(),
                None => {
                    return fail(
                        JetgeoStatus::BadRequest,
                        "the scene has no embedded coordinate change; pass change text",
                    )
                }
            }
        } else {
            let text = match unsafe { text_arg(change_text, "change_text") } {
                Ok(text) => text,
                Err(status) => return status,
            };
            match parse_change(text, config) {
                Ok(spec) => spec,
                Err(err) => return fail(JetgeoStatus::BadScene, err.to_string()),
            }
        };

        let controls = Controls::resolve(config, None, None, None, None);
        let tester = validation_tester(config, controls);
        let ch = match spec.realize(&config.space, &tester) {
            Ok(ch) => ch,
            Err(err) => return fail(JetgeoStatus::BadScene, err.to_string()),
        };
        let report = match transform_report(config, &ch, kind, controls) {
            Ok(report) => report,
            Err(err) => return fail(status_for(&err), err.to_string()),
        };
        let failed = report.has_failures();
        if let Err(status) = emit(out_report, report.render(ReportMode::Text)) {
            return status;
        }
        if failed {
            fail(
                JetgeoStatus::ChecksFailed,
                "some checks failed; see the report for the failing entries",
            )
        } else {
            JetgeoStatus::Ok
        }
    })
}

/// Releases a string returned by this library. NULL is a no-op.
///
/// # Safety
///
/// `text` must be NULL or a pointer previously returned in an
/// `out_report` slot that has not been freed yet; it must not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn jetgeo_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(unsafe { CString::from_raw(text) });
    }
}
