use std::collections::BTreeMap;
use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use scriptevo::benchgen::{generate_benchmark, GenOptions, Split, TaskKind};
use scriptevo::corpus::{synth_corpus, SynthConfig};
use scriptevo::curriculum::{contrastive_loss, ContrastiveBatch, ModelBundle, NegativeSample, Variant};
use scriptevo::harness::answer_internal;
use scriptevo_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = sevo_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

#[test]
fn corpus_round_trip_keeps_fingerprint() {
    let dir = tempfile::tempdir().unwrap();
    unsafe {
        let mut c = ptr::null_mut();
        assert_eq!(sevo_corpus_synth(7, 5, &mut c), SevoStatus::Ok);
        let (mut chars, mut glyphs) = (0, 0);
        assert_eq!(sevo_corpus_size(c, &mut chars, &mut glyphs), SevoStatus::Ok);
        assert_eq!((chars, glyphs), (5, 50));

        let mut fp = ptr::null_mut();
        assert_eq!(sevo_corpus_fingerprint(c, &mut fp), SevoStatus::Ok);
        let direct = synth_corpus(&SynthConfig::new(7, 5)).unwrap().fingerprint();
        assert_eq!(CStr::from_ptr(fp).to_str().unwrap(), direct);

        let d = cstr(dir.path().to_str().unwrap());
        assert_eq!(sevo_corpus_save(c, d.as_ptr()), SevoStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(sevo_corpus_load(d.as_ptr(), &mut back), SevoStatus::Ok);
        let mut fp2 = ptr::null_mut();
        assert_eq!(sevo_corpus_fingerprint(back, &mut fp2), SevoStatus::Ok);
        assert_eq!(CStr::from_ptr(fp).to_bytes(), CStr::from_ptr(fp2).to_bytes());

        sevo_string_free(fp);
        sevo_string_free(fp2);
        sevo_corpus_free(c);
        sevo_corpus_free(back);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        assert_eq!(sevo_corpus_synth(1, 3, ptr::null_mut()), SevoStatus::NullPointer);
        assert!(last_error().contains("out"));
        let mut c = ptr::null_mut();
        assert_eq!(sevo_corpus_synth(1, 0, &mut c), SevoStatus::Config);
        assert!(last_error().contains("n_chars"));
        assert!(c.is_null());
        let missing = cstr("/nonexistent/scriptevo/manifest.jsonl");
        assert_eq!(sevo_corpus_load(missing.as_ptr(), &mut c), SevoStatus::Io);
        sevo_corpus_free(ptr::null_mut());
        sevo_string_free(ptr::null_mut());
    }
    let v = unsafe { CStr::from_ptr(sevo_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn contrastive_loss_matches_library() {
    let dim = 3;
    let pos = [0.6, 0.8, 0.0, 0.0, 0.6, 0.8, 1.0, 0.0, 0.0];
    let neg = [0.0, 0.0, 1.0, 0.8, 0.0, 0.6, 0.0, 1.0, 0.0];
    let counts = [2usize, 0, 1];
    let (mut loss, mut gp, mut gn) = (0.0, [0.0; 9], [0.0; 9]);
    let st = unsafe {
        sevo_contrastive_loss(pos.as_ptr(), 3, dim, neg.as_ptr(), counts.as_ptr(), 0.5, &mut loss, gp.as_mut_ptr(), gn.as_mut_ptr())
    };
    assert_eq!(st, SevoStatus::Ok);

    let n = |i: usize| NegativeSample { char_id: "x".into(), vector: neg[i * 3..i * 3 + 3].to_vec() };
    let out = contrastive_loss(&ContrastiveBatch {
        anchor_char: "a".into(),
        positives: pos.chunks(3).map(<[f64]>::to_vec).collect(),
        negatives: vec![vec![n(0), n(1)], vec![], vec![n(2)]],
        tau: 0.5,
    })
    .unwrap();
    assert_eq!(loss, out.loss);
    assert_eq!(gp.to_vec(), out.grad_positives.concat());
    assert_eq!(gn.to_vec(), out.grad_negatives.concat().concat());

    // no negatives anywhere: zero loss
    let st = unsafe {
        sevo_contrastive_loss(pos.as_ptr(), 3, dim, ptr::null(), ptr::null(), 0.07, &mut loss, ptr::null_mut(), ptr::null_mut())
    };
    assert_eq!(st, SevoStatus::Ok);
    assert!(loss.abs() < 1e-12);

    let st = unsafe {
        sevo_contrastive_loss(pos.as_ptr(), 1, dim, ptr::null(), ptr::null(), 0.07, &mut loss, ptr::null_mut(), ptr::null_mut())
    };
    assert_eq!(st, SevoStatus::Training);
}

#[test]
fn scoring_and_answering_agree_with_library() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(&SynthConfig::new(7, 12)).unwrap();
    let counts: BTreeMap<TaskKind, usize> = TaskKind::ALL.iter().map(|k| (*k, 10)).collect();
    let bench = generate_benchmark(&corpus, &counts, &GenOptions::new(3)).unwrap();
    let bench_path = dir.path().join("bench.jsonl");
    bench.write_jsonl(&bench_path).unwrap();
    let bundle = ModelBundle::fresh(&corpus, 4, Variant::SFTOnly).unwrap();
    let bundle_path = dir.path().join("b.sevo");
    bundle.save(&bundle_path).unwrap();

    unsafe {
        let (mut c, mut b, mut m) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(sevo_corpus_synth(7, 12, &mut c), SevoStatus::Ok);
        let bp = cstr(bench_path.to_str().unwrap());
        assert_eq!(sevo_benchmark_load(bp.as_ptr(), &mut b), SevoStatus::Ok);
        let mut n = 0;
        assert_eq!(sevo_benchmark_len(b, &mut n), SevoStatus::Ok);
        assert_eq!(n, 110);
        let mp = cstr(bundle_path.to_str().unwrap());
        assert_eq!(sevo_bundle_load(mp.as_ptr(), &mut m), SevoStatus::Ok);

        for inst in bench.instances.iter().filter(|i| i.split == Split::Test) {
            let id = cstr(&inst.instance_id);
            if let Some(key) = inst.answer_key.text() {
                let (mut score, mut status) = (0.0, SevoParseStatus::Unparseable);
                let raw = cstr(&format!("The answer is {key}."));
                assert_eq!(sevo_score_response(c, b, id.as_ptr(), raw.as_ptr(), &mut score, &mut status), SevoStatus::Ok);
                assert_eq!((score, status), (1.0, SevoParseStatus::Parsed), "{}", inst.instance_id);
            }
            let mut text = ptr::null_mut();
            assert_eq!(sevo_bundle_answer(m, c, b, id.as_ptr(), &mut text), SevoStatus::Ok);
            let expect = answer_internal(&bundle, inst, &corpus).unwrap();
            assert_eq!(CStr::from_ptr(text).to_str().unwrap(), expect);
            sevo_string_free(text);
        }
        let (mut score, empty, unknown) = (0.0, cstr(""), cstr("T9.9-0"));
        let id = cstr(&bench.instances[0].instance_id);
        assert_eq!(sevo_score_response(c, b, id.as_ptr(), empty.as_ptr(), &mut score, ptr::null_mut()), SevoStatus::Ok);
        assert_eq!(score, 0.0);
        assert_eq!(sevo_score_response(c, b, unknown.as_ptr(), empty.as_ptr(), &mut score, ptr::null_mut()), SevoStatus::NotFound);
        assert!(last_error().contains("T9.9-0"));

        sevo_bundle_free(m);
        sevo_benchmark_free(b);
        sevo_corpus_free(c);
    }
}

fn target_dir() -> PathBuf {
    // tests/ffi binary lives in <target>/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_header() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler, skipping");
        return;
    }
    let lib_dir = target_dir();
    if !lib_dir.join("libscriptevo_ffi.so").exists() {
        eprintln!("no shared library at {}, skipping", lib_dir.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include <string.h>
#include "scriptevo.h"
int main(void) {
    SevoCorpus *c = NULL;
    if (sevo_corpus_synth(7, 4, &c) != SEVO_STATUS_OK) return 1;
    size_t chars = 0, glyphs = 0;
    sevo_corpus_size(c, &chars, &glyphs);
    double pos[4] = {1, 0, 0, 1};
    double loss = -1;
    if (sevo_contrastive_loss(pos, 2, 2, NULL, NULL, 0.07, &loss, NULL, NULL) != SEVO_STATUS_OK) return 2;
    if (sevo_corpus_synth(7, 0, NULL) != SEVO_STATUS_NULL_POINTER) return 3;
    if (strlen(sevo_last_error_message()) == 0) return 4;
    printf("%zu %zu %g %s\n", chars, glyphs, loss, sevo_version());
    sevo_corpus_free(c);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("smoke");
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let st = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg("-L")
        .arg(&lib_dir)
        .arg("-lscriptevo_ffi")
        .arg("-o")
        .arg(&exe)
        .status()
        .unwrap();
    assert!(st.success());
    let out = Command::new(&exe).env("LD_LIBRARY_PATH", &lib_dir).output().unwrap();
    assert!(out.status.success(), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.trim(), format!("4 40 0 {}", env!("CARGO_PKG_VERSION")));
}
