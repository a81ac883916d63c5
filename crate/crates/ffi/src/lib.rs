//! C ABI for the frontrun detection engine.
//!
//! The surface is deliberately small: open an engine over a chain fixture and
//! a price table, run one of the three detectors, and receive the attacks as
//! an NDJSON string (one JSON object per line, same schema the CLI emits).
//!
//! Conventions:
//! - Every fallible function returns a [`FrontrunStatus`]; `FRONTRUN_STATUS_OK`
//!   is zero. On failure, [`frontrun_last_error`] returns a message for the
//!   calling thread.
//! - Strings returned through out-parameters are NUL-terminated, UTF-8, and
//!   owned by the caller; release them with [`frontrun_string_free`].
//! - The engine handle is opaque; release it with [`frontrun_engine_close`].
//!   A handle must not be used concurrently from multiple threads.
//! - No function panics across the boundary; panics are caught and reported
//!   as `FRONTRUN_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use frontrun::chain_model::ChainSnapshot;
use frontrun::config::{EngineConfig, SourceConfig};
use frontrun::displacement::scan_displacement;
use frontrun::insertion::scan_insertion;
use frontrun::report::{write_attack_records, AttackRecord};
use frontrun::suppression::scan_suppression;
use frontrun::synthetic_chain::ReplayOracle;
use frontrun::Error;

/// Outcome of an FFI call; mirrors the CLI's exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrontrunStatus {
    /// The call succeeded.
    Ok = 0,
    /// A caller-supplied argument was null, malformed, or out of range.
    Usage = 1,
    /// The chain fixture, price table, or their contents are broken.
    Data = 2,
    /// A bug inside the engine; the message names the violated invariant.
    Internal = 3,
}

/// A loaded chain snapshot plus detector configuration.
///
/// Created by `frontrun_engine_open`; the layout is private to the engine.
pub struct FrontrunEngine {
    snapshot: ChainSnapshot,
    config: EngineConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn remember_error(message: String) -> FrontrunStatus {
    let status = FrontrunStatus::Internal;
    store_message(message);
    status
}

fn store_message(message: String) {
    let stored = CString::new(message)
        .unwrap_or_else(|_| CString::new("error message contained a NUL byte").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(stored));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn status_of(error: &Error) -> FrontrunStatus {
    match error.exit_code() {
        1 => FrontrunStatus::Usage,
        2 => FrontrunStatus::Data,
        _ => FrontrunStatus::Internal,
    }
}

fn fail(error: Error) -> FrontrunStatus {
    let status = status_of(&error);
    store_message(error.to_string());
    status
}

fn usage(message: &str) -> FrontrunStatus {
    store_message(message.to_string());
    FrontrunStatus::Usage
}

/// Runs `body` with panics converted to `FRONTRUN_STATUS_INTERNAL`.
fn guarded(body: impl FnOnce() -> FrontrunStatus) -> FrontrunStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic of unknown type".to_string());
            remember_error(format!("internal panic: {message}"))
        }
    }
}

/// Reads a required NUL-terminated UTF-8 path argument.
///
/// # Safety
/// `ptr` must be null or point to a NUL-terminated string.
unsafe fn path_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a Path, FrontrunStatus> {
    if ptr.is_null() {
        return Err(usage(&format!("{name} must not be null")));
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(text) => Ok(Path::new(text)),
        Err(_) => Err(usage(&format!("{name} is not valid UTF-8"))),
    }
}

/// Version of the engine as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn frontrun_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the calling thread's most recent failure, or null if the last
/// call succeeded. The pointer stays valid until the next engine call on the
/// same thread; do not free it.
#[no_mangle]
pub extern "C" fn frontrun_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(message) => message.as_ptr(),
        None => std::ptr::null(),
    })
}

/// Opens an engine over a chain fixture (NDJSON) and a daily price table
/// (CSV), loading the fixture's full block range. On success writes the new
/// handle to `out_engine`.
///
/// # Safety
/// `chain_path` and `prices_path` must be NUL-terminated strings;
/// `out_engine` must point to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn frontrun_engine_open(
    chain_path: *const c_char,
    prices_path: *const c_char,
    out_engine: *mut *mut FrontrunEngine,
) -> FrontrunStatus {
    guarded(|| {
        clear_error();
        if out_engine.is_null() {
            return usage("out_engine must not be null");
        }
        let chain = match path_arg(chain_path, "chain_path") {
            Ok(path) => path,
            Err(status) => return status,
        };
        let prices = match path_arg(prices_path, "prices_path") {
            Ok(path) => path,
            Err(status) => return status,
        };
        let mut config = EngineConfig::default();
        config.source = Some(SourceConfig::Fixture {
            path: chain.to_path_buf(),
        });
        config.prices = Some(prices.to_path_buf());
        let snapshot = match open_snapshot(&config) {
            Ok(snapshot) => snapshot,
            Err(error) => return fail(error),
        };
        let engine = Box::new(FrontrunEngine { snapshot, config });
        *out_engine = Box::into_raw(engine);
        FrontrunStatus::Ok
    })
}

fn open_snapshot(config: &EngineConfig) -> frontrun::Result<ChainSnapshot> {
    let prices = config.load_prices()?;
    let Some(SourceConfig::Fixture { path }) = &config.source else {
        return Err(Error::InvalidParameter(
            "engine requires a fixture source".into(),
        ));
    };
    let source = frontrun::ingestion::FixtureSource::from_path(path)?;
    let (first, last) = source
        .block_range()
        .ok_or_else(|| Error::Data(format!("{}: fixture holds no blocks", path.display())))?;
    frontrun::ingestion::load_snapshot(&source, first, last, prices)
}

/// Releases an engine handle. Passing null is a no-op.
///
/// # Safety
/// `engine` must be null or a handle produced by `frontrun_engine_open`
/// that has not been closed already.
#[no_mangle]
pub unsafe extern "C" fn frontrun_engine_close(engine: *mut FrontrunEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Writes the engine's loaded block range to `out_first` and `out_last`
/// (inclusive bounds).
///
/// # Safety
/// `engine` must be a live handle; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn frontrun_engine_block_range(
    engine: *const FrontrunEngine,
    out_first: *mut u64,
    out_last: *mut u64,
) -> FrontrunStatus {
    guarded(|| {
        clear_error();
        if engine.is_null() {
            return usage("engine must not be null");
        }
        if out_first.is_null() || out_last.is_null() {
            return usage("out_first and out_last must not be null");
        }
        let engine = &*engine;
        *out_first = engine.snapshot.from_block;
        *out_last = engine.snapshot.to_block;
        FrontrunStatus::Ok
    })
}

fn records_to_cstring(records: &[AttackRecord]) -> frontrun::Result<CString> {
    let mut buf = Vec::new();
    write_attack_records(&mut buf, records)?;
    CString::new(buf).map_err(|_| Error::Internal("NDJSON contained a NUL byte".into()))
}

unsafe fn emit(out_ndjson: *mut *mut c_char, records: &[AttackRecord]) -> FrontrunStatus {
    match records_to_cstring(records) {
        Ok(text) => {
            *out_ndjson = text.into_raw();
            FrontrunStatus::Ok
        }
        Err(error) => fail(error),
    }
}

/// Scans for displacement attacks (copied payload mined first at a higher gas
/// price) and returns them as NDJSON, one attack object per line. Re-execution
/// uses the traces recorded in the fixture.
///
/// # Safety
/// `engine` must be a live handle; `out_ndjson` must be writable.
#[no_mangle]
pub unsafe extern "C" fn frontrun_scan_displacement(
    engine: *const FrontrunEngine,
    out_ndjson: *mut *mut c_char,
) -> FrontrunStatus {
    guarded(|| {
        clear_error();
        if engine.is_null() {
            return usage("engine must not be null");
        }
        if out_ndjson.is_null() {
            return usage("out_ndjson must not be null");
        }
        let engine = &*engine;
        let oracle = ReplayOracle::from_snapshot(&engine.snapshot);
        match scan_displacement(&engine.snapshot, &oracle, &engine.config.displacement) {
            Ok(scan) => {
                let records: Vec<AttackRecord> = scan
                    .attacks
                    .into_iter()
                    .map(AttackRecord::Displacement)
                    .collect();
                emit(out_ndjson, &records)
            }
            Err(error) => fail(error),
        }
    })
}

/// Scans for sandwich insertion attacks and returns them as NDJSON, one
/// attack object per line.
///
/// # Safety
/// `engine` must be a live handle; `out_ndjson` must be writable.
#[no_mangle]
pub unsafe extern "C" fn frontrun_scan_insertion(
    engine: *const FrontrunEngine,
    out_ndjson: *mut *mut c_char,
) -> FrontrunStatus {
    guarded(|| {
        clear_error();
        if engine.is_null() {
            return usage("engine must not be null");
        }
        if out_ndjson.is_null() {
            return usage("out_ndjson must not be null");
        }
        let engine = &*engine;
        match scan_insertion(&engine.snapshot, &engine.config.insertion) {
            Ok(attacks) => {
                let records: Vec<AttackRecord> =
                    attacks.into_iter().map(AttackRecord::Insertion).collect();
                emit(out_ndjson, &records)
            }
            Err(error) => fail(error),
        }
    })
}

/// Scans for block-stuffing suppression campaigns and returns them as NDJSON,
/// one attack object per line including the per-round breakdown.
///
/// # Safety
/// `engine` must be a live handle; `out_ndjson` must be writable.
#[no_mangle]
pub unsafe extern "C" fn frontrun_scan_suppression(
    engine: *const FrontrunEngine,
    out_ndjson: *mut *mut c_char,
) -> FrontrunStatus {
    guarded(|| {
        clear_error();
        if engine.is_null() {
            return usage("engine must not be null");
        }
        if out_ndjson.is_null() {
            return usage("out_ndjson must not be null");
        }
        let engine = &*engine;
        match scan_suppression(&engine.snapshot, &engine.config.suppression) {
            Ok(scan) => {
                let records: Vec<AttackRecord> = scan
                    .attacks
                    .into_iter()
                    .map(AttackRecord::Suppression)
                    .collect();
                emit(out_ndjson, &records)
            }
            Err(error) => fail(error),
        }
    })
}

/// Releases a string returned by a scan. Passing null is a no-op.
///
/// # Safety
/// `text` must be null or a pointer produced by this library that has not
/// been freed already.
#[no_mangle]
pub unsafe extern "C" fn frontrun_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(CString::from_raw(text));
    }
}
