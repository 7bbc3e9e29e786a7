use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Result code returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    Config = 4,
    Io = 5,
    Runtime = 6,
    Closed = 7,
    NotReady = 8,
    Full = 9,
    Panic = 10,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

/// Status plus message, recorded as the thread's last error.
pub(crate) struct Failure {
    pub status: WtStatus,
    pub message: String,
}

impl Failure {
    pub fn new(status: WtStatus, message: impl Into<String>) -> Self {
        Failure {
            status,
            message: message.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Failure::new(WtStatus::InvalidArgument, message)
    }
}

pub(crate) type FfiResult<T> = Result<T, Failure>;

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, converting errors and panics into a status code.
pub(crate) fn guard(f: impl FnOnce() -> FfiResult<()>) -> WtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WtStatus::Ok,
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(_) => {
            set_last_error("internal panic");
            WtStatus::Panic
        }
    }
}

pub(crate) fn non_null<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    // SAFETY: callers pass pointers obtained from this library or valid
    // caller-owned memory; null is rejected here.
    unsafe { p.as_ref() }.ok_or_else(|| Failure::new(WtStatus::NullPointer, format!("{what} is null")))
}

pub(crate) fn non_null_mut<'a, T>(p: *mut T, what: &str) -> FfiResult<&'a mut T> {
    // SAFETY: as for `non_null`.
    unsafe { p.as_mut() }.ok_or_else(|| Failure::new(WtStatus::NullPointer, format!("{what} is null")))
}

pub(crate) fn read_str<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(Failure::new(WtStatus::NullPointer, format!("{what} is null")));
    }
    // SAFETY: non-null and NUL-terminated by contract.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure::new(WtStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

pub(crate) fn read_slice<'a, T>(p: *const T, len: usize, what: &str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::new(WtStatus::NullPointer, format!("{what} is null")));
    }
    // SAFETY: non-null and `len` elements long by contract.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

/// Hands a Rust string to the caller; free it with `wt_string_free`.
pub(crate) fn give_string(s: String, out: *mut *mut c_char) -> FfiResult<()> {
    let out = non_null_mut(out, "out")?;
    let c = CString::new(s).map_err(|_| Failure::new(WtStatus::Runtime, "string contains NUL"))?;
    *out = c.into_raw();
    Ok(())
}

pub(crate) fn give_box<T>(value: T, out: *mut *mut T) -> FfiResult<()> {
    let out = non_null_mut(out, "out")?;
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the most recent failure on this thread, or NULL.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn wt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Frees a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn wt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version, statically allocated.
#[no_mangle]
pub extern "C" fn wt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
