use std::ffi::{CStr, CString};
use std::ptr;

use cantor_coarse_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn take(p: *mut std::ffi::c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string();
    unsafe { cc_string_free(p) };
    s
}

#[test]
fn capacity_of_line_space() {
    let json = c(r#"{"points":["a","b","c","d"],"coords":[0,1,2,10],"metric":"line"}"#);
    let mut space = ptr::null_mut();
    assert_eq!(unsafe { cc_space_from_json(json.as_ptr(), &mut space) }, CcStatus::Ok);
    assert_eq!(unsafe { cc_space_len(space) }, 4);
    let (mut t, mut big) = (ptr::null_mut(), ptr::null_mut());
    let st = unsafe { cc_space_capacity(space, c("1").as_ptr(), c("8").as_ptr(), &mut t, &mut big) };
    assert_eq!(st, CcStatus::Ok);
    assert_eq!((take(t), take(big)), ("2".to_string(), "2".to_string()));
    let mut n = 0usize;
    assert_eq!(unsafe { cc_space_components(space, c("1").as_ptr(), &mut n) }, CcStatus::Ok);
    assert_eq!(n, 2);
    unsafe { cc_space_free(space) };
}

#[test]
fn errors_map_to_status_codes() {
    let mut space = ptr::null_mut();
    assert_eq!(unsafe { cc_space_from_json(c("{").as_ptr(), &mut space) }, CcStatus::Parse);
    let msg = unsafe { CStr::from_ptr(cc_last_error()) }.to_str().unwrap();
    assert!(msg.contains("parse"));
    assert_eq!(unsafe { cc_space_from_json(ptr::null(), &mut space) }, CcStatus::NullArgument);
    assert_eq!(unsafe { cc_space_bicube(-1, 1, &mut space) }, CcStatus::Ok);
    let (mut t, mut big) = (ptr::null_mut(), ptr::null_mut());
    let st = unsafe { cc_space_capacity(space, c("2").as_ptr(), c("1").as_ptr(), &mut t, &mut big) };
    assert_eq!(st, CcStatus::Precondition);
    unsafe { cc_space_free(space) };
    unsafe { cc_space_free(ptr::null_mut()) };
}

#[test]
fn bicube_checks_and_synthesis() {
    let mut space = ptr::null_mut();
    assert_eq!(unsafe { cc_space_bicube(-2, 2, &mut space) }, CcStatus::Ok);
    let mut pass = false;
    let st = unsafe { cc_characterization_check(space, c("dyadic:-2..2").as_ptr(), c("bi").as_ptr(), &mut pass) };
    assert_eq!(st, CcStatus::Ok);
    assert!(pass);
    let (mut rel, mut ok) = (ptr::null_mut(), false);
    assert_eq!(unsafe { cc_synthesize_bi(space, c("dyadic:-2..2").as_ptr(), &mut rel, &mut ok) }, CcStatus::Ok);
    assert!(ok);
    assert!(take(rel).contains("pairs"));
    let st = unsafe { cc_characterization_check(space, c("dyadic:-2..2").as_ptr(), c("sideways").as_ptr(), &mut pass) };
    assert_eq!(st, CcStatus::Parse);
    unsafe { cc_space_free(space) };
}

#[test]
fn chains_classify() {
    let (mut eq, mut p) = (false, 7u64);
    let st = unsafe { cc_classify_chains(c(r#"{"orders":[1,2,6]}"#).as_ptr(), c(r#"{"orders":[1,6]}"#).as_ptr(), &mut eq, &mut p) };
    assert_eq!(st, CcStatus::Ok);
    assert!(eq && p == 0);
    let st = unsafe { cc_classify_chains(c(r#"{"orders":[1,2,4]}"#).as_ptr(), c(r#"{"orders":[1,2,6]}"#).as_ptr(), &mut eq, &mut p) };
    assert_eq!(st, CcStatus::Ok);
    assert!(!eq && p == 3);
}

#[test]
fn tower_boundary_roundtrip() {
    let json = c(r#"{"levels":[0,1],"nodes":[{"id":"r","level":1,"parent":null},{"id":"a","level":0,"parent":"r"},{"id":"b","level":0,"parent":"r"}]}"#);
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { cc_tower_from_json(json.as_ptr(), &mut t) }, CcStatus::Ok, "{:?}", unsafe {
        CStr::from_ptr(cc_last_error())
    });
    assert_eq!(unsafe { cc_tower_level_count(t) }, 2);
    let mut b = ptr::null_mut();
    assert_eq!(unsafe { cc_tower_boundary(t, &mut b) }, CcStatus::Ok);
    assert_eq!(unsafe { cc_space_len(b) }, 2);
    unsafe {
        cc_space_free(b);
        cc_tower_free(t);
    }
}

#[test]
fn header_is_generated() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/cantor_coarse.h")).unwrap();
    for name in ["cc_space_from_json", "cc_space_capacity", "cc_classify_chains", "cc_last_error", "CcSpace", "CC_STATUS_PRECONDITION"] {
        assert!(h.contains(name), "{name}");
    }
}
