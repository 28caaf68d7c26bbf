use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use piclab_ffi::*;

fn registry(name: &str, k: u32, n: u32, q: u32) -> *mut PiclabProtocol {
    let name = CString::new(name).unwrap();
    let mut p = ptr::null_mut();
    let s = unsafe { piclab_protocol_from_registry(name.as_ptr(), k, n, q, &mut p) };
    assert_eq!(s, PiclabStatus::Ok);
    assert!(!p.is_null());
    p
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(piclab_last_error_message()) }
        .to_str()
        .unwrap()
        .to_string()
}

#[test]
fn measures_through_the_handle() {
    let p = registry("ring-parity", 3, 1, 0);
    unsafe {
        assert_eq!(piclab_protocol_players(p), 3);
        let mut m = PiclabMeasures::default();
        assert_eq!(piclab_measure_uniform(p, 1 << 20, &mut m), PiclabStatus::Ok);
        assert_eq!(m.cc, 3);
        assert!((m.ic - 1.0).abs() < 1e-9);
        assert!((m.pic - 3.0).abs() < 1e-9);
        assert!(m.privacy_leakage.abs() < 1e-9);
        piclab_protocol_free(p);
    }
}

#[test]
fn explicit_distribution_and_report() {
    let p = registry("and-opt", 0, 0, 0);
    let mu = CString::new(r#"[[["0","0"],1,6],[["0","1"],1,6],[["1","0"],1,3],[["1","1"],1,3]]"#)
        .unwrap();
    unsafe {
        let mut m = PiclabMeasures::default();
        assert_eq!(
            piclab_measure_with_distribution(p, mu.as_ptr(), 1 << 20, &mut m),
            PiclabStatus::Ok
        );
        assert!((m.pic - 3f64.log2()).abs() < 1e-9);

        let mut s = ptr::null_mut();
        assert_eq!(
            piclab_report_json(p, ptr::null(), 1 << 20, 1e-9, &mut s),
            PiclabStatus::Ok
        );
        let v: serde_json::Value =
            serde_json::from_str(CStr::from_ptr(s).to_str().unwrap()).unwrap();
        assert_eq!(v["protocol"], "and-opt");
        piclab_string_free(s);

        let bad = CString::new("[[[\"0\"],1,1]]").unwrap();
        assert_eq!(
            piclab_measure_with_distribution(p, bad.as_ptr(), 1 << 20, &mut m),
            PiclabStatus::InvalidArgument
        );
        assert!(!last_error().is_empty());
        piclab_protocol_free(p);
    }
}

#[test]
fn status_codes() {
    unsafe {
        let mut p = ptr::null_mut();
        let name = CString::new("nope").unwrap();
        assert_eq!(
            piclab_protocol_from_registry(name.as_ptr(), 0, 0, 0, &mut p),
            PiclabStatus::InvalidArgument
        );
        assert!(last_error().contains("nope"));
        assert_eq!(
            piclab_protocol_from_registry(ptr::null(), 0, 0, 0, &mut p),
            PiclabStatus::InvalidArgument
        );

        let big = registry("ring-parity", 6, 3, 0);
        let mut m = PiclabMeasures::default();
        assert_eq!(
            piclab_measure_uniform(big, 10, &mut m),
            PiclabStatus::BudgetExceeded
        );
        piclab_protocol_free(big);

        let leak = registry("order-leak", 0, 0, 0);
        assert_eq!(
            piclab_measure_uniform(leak, 1 << 20, &mut m),
            PiclabStatus::ModelViolation
        );
        piclab_protocol_free(leak);

        let q = registry("q-index", 3, 0, 1);
        let mut ob = true;
        assert_eq!(piclab_is_oblivious(q, 1 << 20, &mut ob), PiclabStatus::Ok);
        assert!(!ob);
        let mut c = PiclabCompression::default();
        assert_eq!(
            piclab_compress_exact(q, 1 << 20, &mut c),
            PiclabStatus::NotOblivious
        );
        piclab_protocol_free(q);

        assert_eq!(
            piclab_measure_uniform(ptr::null(), 1, &mut m),
            PiclabStatus::InvalidArgument
        );
        assert_eq!(piclab_protocol_players(ptr::null()), 0);
        piclab_protocol_free(ptr::null_mut());
        piclab_string_free(ptr::null_mut());
    }
}

#[test]
fn compression_and_tree_documents() {
    let json = CString::new(
        r#"{"k": 2, "input_bits": [1, 1],
            "tree": {"sender": 0, "receiver": 1, "msg_bits": 1, "message": {"0": "0", "1": "1"},
                     "children": {"0": {"outputs": ["0", "0"]},
                                  "1": {"outputs": ["1", {"0": "0", "1": "1"}]}}}}"#,
    )
    .unwrap();
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(
            piclab_protocol_from_tree_json(json.as_ptr(), &mut p),
            PiclabStatus::Ok
        );
        let mut c = PiclabCompression::default();
        assert_eq!(piclab_compress_exact(p, 1 << 20, &mut c), PiclabStatus::Ok);
        assert!(c.profiles_exact);
        assert!(c.expected_moves <= c.ic + 1e-9);
        piclab_protocol_free(p);

        let broken = CString::new("{\"k\": 2").unwrap();
        assert_eq!(
            piclab_protocol_from_tree_json(broken.as_ptr(), &mut p),
            PiclabStatus::InvalidArgument
        );
    }
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include")
}

#[test]
fn header_compiles_as_c_and_cpp() {
    for (lang, std) in [("c", "-std=c11"), ("c++", "-std=c++17")] {
        let src = std::env::temp_dir().join(format!(
            "piclab_header_{lang}.{}",
            if lang == "c" { "c" } else { "cpp" }
        ));
        std::fs::write(
            &src,
            "#include \"piclab.h\"\nint main(void) { return PICLAB_STATUS_OK; }\n",
        )
        .unwrap();
        let out = Command::new("cc")
            .args(["-x", lang, std, "-Wall", "-Werror", "-fsyntax-only", "-I"])
            .arg(header())
            .arg(&src)
            .output()
            .expect("cc runs");
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn c_program_links_against_the_static_library() {
    // Test binaries live in target/<profile>/deps; the library sits one up.
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().unwrap().parent().unwrap();
    let lib = lib_dir.join("libpiclab_ffi.a");
    assert!(lib.exists(), "missing {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <math.h>
#include <stdio.h>
#include "piclab.h"
int main(void) {
    PiclabProtocol *p = NULL;
    if (piclab_protocol_from_registry("star-parity", 3, 2, 0, &p) != PICLAB_STATUS_OK) return 1;
    PiclabMeasures m;
    if (piclab_measure_uniform(p, 1u << 20, &m) != PICLAB_STATUS_OK) return 2;
    piclab_protocol_free(p);
    if (fabs(m.pic - 4.0) > 1e-9) return 3;
    if (piclab_protocol_from_registry("bogus", 0, 0, 0, &p) != PICLAB_STATUS_INVALID_ARGUMENT) return 4;
    printf("%s\n", piclab_last_error_message());
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("smoke");
    let out = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .expect("cc runs");
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = Command::new(&bin).output().unwrap();
    assert_eq!(run.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&run.stdout).contains("bogus"));
}
