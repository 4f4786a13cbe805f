//! C ABI over the core library. Objects cross the boundary as opaque handles; every call returns
//! a status code and leaves a message for `cc_last_error` on failure. Big integers and rationals
//! travel as decimal strings.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cantor_coarse::metric::{self, FiniteMetricSpace};
use cantor_coarse::multimap;
use cantor_coarse::rational;
use cantor_coarse::synthesis::{self, ClassifyVerdict, Mode, ProfileInput};
use cantor_coarse::tower::{self, ScalingFunction, Tower};
use cantor_coarse::Error;

/// Materialization cutoff used for towers built behind the C interface.
const CUTOFF: usize = 100_000;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CcStatus {
    Ok = 0,
    NullArgument = 1,
    Utf8 = 2,
    Parse = 3,
    Invalid = 4,
    Precondition = 5,
    Construction = 6,
    Io = 7,
    Panic = 8,
}

/// Finite metric space handle.
pub struct CcSpace(FiniteMetricSpace);

/// Tower handle.
pub struct CcTower(Tower);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(CcStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Parse(_) => CcStatus::Parse,
            Error::Invalid(_) => CcStatus::Invalid,
            Error::Precondition(_) => CcStatus::Precondition,
            Error::Construction(_) => CcStatus::Construction,
            Error::Io(_) => CcStatus::Io,
        };
        Fail(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CcStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            CcStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(CcStatus::NullArgument, "null string argument".into()));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Fail(CcStatus::Utf8, e.to_string()))
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(CcStatus::NullArgument, "null handle".into()))
}

unsafe fn put<T>(out: *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(CcStatus::NullArgument, "null output pointer".into()));
    }
    out.write(v);
    Ok(())
}

fn owned(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread, or NULL. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn cc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `json` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cc_space_from_json(json: *const c_char, out: *mut *mut CcSpace) -> CcStatus {
    guard(|| {
        let space = metric::space_from_json(text(json)?)?;
        put(out, Box::into_raw(Box::new(CcSpace(space))))
    })
}

/// Truncated Cantor bi-cube over coordinates low..=high.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cc_space_bicube(low: i64, high: i64, out: *mut *mut CcSpace) -> CcStatus {
    guard(|| {
        let space = FiniteMetricSpace::bicube(low, high)?;
        put(out, Box::into_raw(Box::new(CcSpace(space))))
    })
}

/// # Safety
/// `space` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn cc_space_free(space: *mut CcSpace) {
    if !space.is_null() {
        drop(Box::from_raw(space));
    }
}

/// # Safety
/// `space` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cc_space_len(space: *const CcSpace) -> usize {
    space.as_ref().map_or(0, |s| s.0.len())
}

/// # Safety
/// `space` must be a live handle; `scale` a valid C string; `count` writable.
#[no_mangle]
pub unsafe extern "C" fn cc_space_components(space: *const CcSpace, scale: *const c_char, count: *mut usize) -> CcStatus {
    guard(|| {
        let s = rational::parse_rational(text(scale)?)?;
        let p = metric::components(&handle(space)?.0, &s)?;
        put(count, p.len())
    })
}

/// θ and Θ as newly allocated decimal strings (free with `cc_string_free`).
///
/// # Safety
/// `space` must be a live handle; `delta`, `eps` valid C strings; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn cc_space_capacity(
    space: *const CcSpace,
    delta: *const c_char,
    eps: *const c_char,
    theta: *mut *mut c_char,
    big_theta: *mut *mut c_char,
) -> CcStatus {
    guard(|| {
        let (d, e) = (rational::parse_rational(text(delta)?)?, rational::parse_rational(text(eps)?)?);
        let (t, big) = metric::capacity(&handle(space)?.0, &d, &e)?;
        if theta.is_null() || big_theta.is_null() {
            return Err(Fail(CcStatus::NullArgument, "null output pointer".into()));
        }
        put(theta, owned(t.to_string()))?;
        put(big_theta, owned(big.to_string()))
    })
}

/// Window-relative characterization in mode "universal", "micro", "macro" or "bi".
///
/// # Safety
/// `space` must be a live handle; `grid`, `mode` valid C strings; `pass` writable.
#[no_mangle]
pub unsafe extern "C" fn cc_characterization_check(
    space: *const CcSpace,
    grid: *const c_char,
    mode: *const c_char,
    pass: *mut bool,
) -> CcStatus {
    guard(|| {
        let g = rational::parse_grid(text(grid)?)?;
        let m: Mode = text(mode)?.parse()?;
        let v = synthesis::characterization_check(&handle(space)?.0, &g, m)?;
        put(pass, v.pass)
    })
}

/// Bi-mode synthesis onto the binary boundary; writes the relation file and whether the
/// certificate passes both grid ends.
///
/// # Safety
/// `space` must be a live handle; `grid` a valid C string; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn cc_synthesize_bi(
    space: *const CcSpace,
    grid: *const c_char,
    relation_json: *mut *mut c_char,
    certified: *mut bool,
) -> CcStatus {
    guard(|| {
        let g = rational::parse_grid(text(grid)?)?;
        let s = synthesis::synthesize_bi(&handle(space)?.0, &g, None, CUTOFF)?;
        if relation_json.is_null() || certified.is_null() {
            return Err(Fail(CcStatus::NullArgument, "null output pointer".into()));
        }
        put(certified, s.certificate.bi_equivalence && s.ends.small_end && s.ends.large_end)?;
        put(relation_json, owned(multimap::relation_to_json(&s.relation)))
    })
}

/// # Safety
/// `json` must be a valid C string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cc_tower_from_json(json: *const c_char, out: *mut *mut CcTower) -> CcStatus {
    guard(|| {
        let t = tower::tower_from_json(text(json)?)?;
        put(out, Box::into_raw(Box::new(CcTower(t))))
    })
}

/// # Safety
/// `tower` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn cc_tower_free(tower: *mut CcTower) {
    if !tower.is_null() {
        drop(Box::from_raw(tower));
    }
}

/// # Safety
/// `tower` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cc_tower_level_count(tower: *const CcTower) -> usize {
    tower.as_ref().map_or(0, |t| t.0.level_count())
}

/// Boundary with f(l) = 2^l as a new space handle.
///
/// # Safety
/// `tower` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cc_tower_boundary(tower: *const CcTower, out: *mut *mut CcSpace) -> CcStatus {
    guard(|| {
        let t = &handle(tower)?.0;
        let (space, _) = t.boundary(&ScalingFunction::dyadic(t.level_count()))?;
        put(out, Box::into_raw(Box::new(CcSpace(space))))
    })
}

/// Classifies two group chains given as chain files. `equivalent` is set to 1 or 0; for distinct
/// chains `witness_prime` receives the separating prime, otherwise 0.
///
/// # Safety
/// Both strings must be valid C strings; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn cc_classify_chains(
    first: *const c_char,
    second: *const c_char,
    equivalent: *mut bool,
    witness_prime: *mut u64,
) -> CcStatus {
    guard(|| {
        let a = tower::chain_from_json(text(first)?)?;
        let b = tower::chain_from_json(text(second)?)?;
        let v = synthesis::classify_pair(ProfileInput::Chain(&a), ProfileInput::Chain(&b), CUTOFF)?;
        if equivalent.is_null() || witness_prime.is_null() {
            return Err(Fail(CcStatus::NullArgument, "null output pointer".into()));
        }
        match v {
            ClassifyVerdict::Equivalent { .. } => {
                put(equivalent, true)?;
                put(witness_prime, 0)
            }
            ClassifyVerdict::Distinct { certificate, .. } => {
                put(equivalent, false)?;
                put(witness_prime, certificate.prime)
            }
        }
    })
}
