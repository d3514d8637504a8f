//! C ABI over `scriptevo`.
//!
//! Every fallible function returns a [`SevoStatus`]. On failure the
//! message is available from [`sevo_last_error_message`] on the same
//! thread until the next failing call. Objects cross the boundary as
//! opaque handles that must be released with their `_free` function;
//! strings returned to the caller are released with [`sevo_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use scriptevo::benchgen::BenchmarkSet;
use scriptevo::corpus::{load_corpus, manifest_path_for, save_corpus, synth_corpus, Corpus, SynthConfig};
use scriptevo::curriculum::{contrastive_loss, ContrastiveBatch, ModelBundle, NegativeSample};
use scriptevo::harness::answer_internal;
use scriptevo::scorer::{parser_for, score_instance, ParseStatus, ResponseParser};
use scriptevo::Error;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SevoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Config = 5,
    Training = 6,
    NotFound = 7,
    Panic = 99,
}

/// Parse outcome reported by [`sevo_score_response`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SevoParseStatus {
    Parsed = 0,
    MultiCandidateFailure = 1,
    Unparseable = 2,
}

/// Opaque corpus handle. Carries the response parser built from its
/// vocabulary.
pub struct SevoCorpus {
    corpus: Corpus,
    parser: ResponseParser,
}

/// Opaque benchmark handle.
pub struct SevoBenchmark {
    bench: BenchmarkSet,
}

/// Opaque trained-model handle.
pub struct SevoBundle {
    bundle: ModelBundle,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SevoStatus {
    match e {
        Error::Io { .. } => SevoStatus::Io,
        Error::Config(_) => SevoStatus::Config,
        Error::Training(_) | Error::Leakage(_) => SevoStatus::Training,
        Error::UnknownInstances(_) | Error::NotIndexed(_) => SevoStatus::NotFound,
        _ => SevoStatus::Format,
    }
}

struct Fail(SevoStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SevoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SevoStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SevoStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(SevoStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(SevoStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

fn into_corpus(corpus: Corpus) -> *mut SevoCorpus {
    let parser = parser_for(&corpus);
    Box::into_raw(Box::new(SevoCorpus { corpus, parser }))
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sevo_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn sevo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sevo_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Synthesizes a corpus of `n_chars` characters, every stage present, two
/// variants per stage.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sevo_corpus_synth(seed: u64, n_chars: usize, out: *mut *mut SevoCorpus) -> SevoStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = into_corpus(synth_corpus(&SynthConfig::new(seed, n_chars))?);
        Ok(())
    })
}

/// Loads a corpus from a manifest file or a directory holding one.
/// Invalid glyphs are dropped, as on the command line.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` as for [`sevo_corpus_synth`].
#[no_mangle]
pub unsafe extern "C" fn sevo_corpus_load(path: *const c_char, out: *mut *mut SevoCorpus) -> SevoStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(path, "path")?);
        let out = out_arg(out, "out")?;
        let (corpus, _) = load_corpus(&manifest_path_for(&path))?;
        *out = into_corpus(corpus);
        Ok(())
    })
}

/// Writes the corpus into directory `dir`.
///
/// # Safety
/// `corpus` must be a live handle; `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sevo_corpus_save(corpus: *const SevoCorpus, dir: *const c_char) -> SevoStatus {
    guard(|| {
        let c = handle(corpus, "corpus")?;
        save_corpus(&c.corpus, &PathBuf::from(str_arg(dir, "dir")?))?;
        Ok(())
    })
}

/// Number of characters and glyphs in the corpus. Either output may be null.
///
/// # Safety
/// `corpus` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sevo_corpus_size(
    corpus: *const SevoCorpus,
    out_chars: *mut usize,
    out_glyphs: *mut usize,
) -> SevoStatus {
    guard(|| {
        let c = handle(corpus, "corpus")?;
        if let Some(o) = out_chars.as_mut() {
            *o = c.corpus.len();
        }
        if let Some(o) = out_glyphs.as_mut() {
            *o = c.corpus.glyph_count();
        }
        Ok(())
    })
}

/// Hex SHA-256 fingerprint of the corpus; free with [`sevo_string_free`].
///
/// # Safety
/// `corpus` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sevo_corpus_fingerprint(corpus: *const SevoCorpus, out: *mut *mut c_char) -> SevoStatus {
    guard(|| {
        let c = handle(corpus, "corpus")?;
        let out = out_arg(out, "out")?;
        *out = CString::new(c.corpus.fingerprint()).expect("hex").into_raw();
        Ok(())
    })
}

/// # Safety
/// `corpus` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sevo_corpus_free(corpus: *mut SevoCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Loads a benchmark JSONL file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sevo_benchmark_load(path: *const c_char, out: *mut *mut SevoBenchmark) -> SevoStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(path, "path")?);
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(SevoBenchmark {
            bench: BenchmarkSet::read_jsonl(&path)?,
        }));
        Ok(())
    })
}

/// Number of instances in the benchmark.
///
/// # Safety
/// `bench` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sevo_benchmark_len(bench: *const SevoBenchmark, out: *mut usize) -> SevoStatus {
    guard(|| {
        let b = handle(bench, "bench")?;
        *out_arg(out, "out")? = b.bench.instances.len();
        Ok(())
    })
}

/// # Safety
/// `bench` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sevo_benchmark_free(bench: *mut SevoBenchmark) {
    if !bench.is_null() {
        drop(Box::from_raw(bench));
    }
}

/// Parses and scores one raw response against an instance's key.
/// `out_parse_status` may be null.
///
/// # Safety
/// Handles must be live; strings NUL-terminated; `out_score` writable.
#[no_mangle]
pub unsafe extern "C" fn sevo_score_response(
    corpus: *const SevoCorpus,
    bench: *const SevoBenchmark,
    instance_id: *const c_char,
    raw_response: *const c_char,
    out_score: *mut f64,
    out_parse_status: *mut SevoParseStatus,
) -> SevoStatus {
    guard(|| {
        let c = handle(corpus, "corpus")?;
        let b = handle(bench, "bench")?;
        let id = str_arg(instance_id, "instance_id")?;
        let raw = str_arg(raw_response, "raw_response")?;
        let out_score = out_arg(out_score, "out_score")?;
        let inst = b
            .bench
            .get(id)
            .ok_or_else(|| Fail(SevoStatus::NotFound, format!("unknown instance id {id}")))?;
        let parsed = c.parser.parse(inst.kind, raw);
        *out_score = score_instance(inst, &parsed);
        if let Some(s) = out_parse_status.as_mut() {
            *s = match parsed.status {
                ParseStatus::Parsed => SevoParseStatus::Parsed,
                ParseStatus::MultiCandidateFailure => SevoParseStatus::MultiCandidateFailure,
                ParseStatus::Unparseable => SevoParseStatus::Unparseable,
            };
        }
        Ok(())
    })
}

/// Loads a trained model bundle.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sevo_bundle_load(path: *const c_char, out: *mut *mut SevoBundle) -> SevoStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(path, "path")?);
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(SevoBundle {
            bundle: ModelBundle::load(&path)?,
        }));
        Ok(())
    })
}

/// The bundle's response to one instance; free with [`sevo_string_free`].
///
/// # Safety
/// Handles must be live; `instance_id` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sevo_bundle_answer(
    bundle: *const SevoBundle,
    corpus: *const SevoCorpus,
    bench: *const SevoBenchmark,
    instance_id: *const c_char,
    out: *mut *mut c_char,
) -> SevoStatus {
    guard(|| {
        let m = handle(bundle, "bundle")?;
        let c = handle(corpus, "corpus")?;
        let b = handle(bench, "bench")?;
        let id = str_arg(instance_id, "instance_id")?;
        let out = out_arg(out, "out")?;
        let inst = b
            .bench
            .get(id)
            .ok_or_else(|| Fail(SevoStatus::NotFound, format!("unknown instance id {id}")))?;
        let text = answer_internal(&m.bundle, inst, &c.corpus)?;
        *out = CString::new(text)
            .map_err(|_| Fail(SevoStatus::Format, "response contains NUL".into()))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `bundle` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sevo_bundle_free(bundle: *mut SevoBundle) {
    if !bundle.is_null() {
        drop(Box::from_raw(bundle));
    }
}

/// Multi-positive contrastive loss and its gradients.
///
/// `positives` is `n_pos * dim` row-major. Positive `i` owns
/// `neg_counts[i]` negatives, stored consecutively in `negatives`
/// (`sum(neg_counts) * dim` values, positive 0's first). The gradient
/// buffers have the same shapes as their inputs. `negatives`,
/// `grad_negatives` and `neg_counts` may be null when there are no
/// negatives (`neg_counts` null means zero for every positive).
///
/// # Safety
/// Every non-null buffer must hold the number of values stated above.
#[no_mangle]
pub unsafe extern "C" fn sevo_contrastive_loss(
    positives: *const f64,
    n_pos: usize,
    dim: usize,
    negatives: *const f64,
    neg_counts: *const usize,
    tau: f64,
    out_loss: *mut f64,
    grad_positives: *mut f64,
    grad_negatives: *mut f64,
) -> SevoStatus {
    guard(|| {
        if positives.is_null() {
            return Err(null("positives"));
        }
        if dim == 0 {
            return Err(Fail(SevoStatus::InvalidArgument, "dim must be positive".into()));
        }
        let out_loss = out_arg(out_loss, "out_loss")?;
        let counts: Vec<usize> = if neg_counts.is_null() {
            vec![0; n_pos]
        } else {
            std::slice::from_raw_parts(neg_counts, n_pos).to_vec()
        };
        let total: usize = counts.iter().sum();
        if total > 0 && negatives.is_null() {
            return Err(null("negatives"));
        }
        let pos = std::slice::from_raw_parts(positives, n_pos * dim);
        let neg: &[f64] = if total == 0 {
            &[]
        } else {
            std::slice::from_raw_parts(negatives, total * dim)
        };
        let mut off = 0;
        let batch = ContrastiveBatch {
            anchor_char: "anchor".into(),
            positives: pos.chunks(dim).map(<[f64]>::to_vec).collect(),
            negatives: counts
                .iter()
                .map(|&k| {
                    let out = (0..k)
                        .map(|j| NegativeSample {
                            char_id: "negative".into(),
                            vector: neg[(off + j) * dim..(off + j + 1) * dim].to_vec(),
                        })
                        .collect();
                    off += k;
                    out
                })
                .collect(),
            tau,
        };
        let res = contrastive_loss(&batch)?;
        *out_loss = res.loss;
        if !grad_positives.is_null() {
            let g = std::slice::from_raw_parts_mut(grad_positives, n_pos * dim);
            for (dst, src) in g.chunks_mut(dim).zip(&res.grad_positives) {
                dst.copy_from_slice(src);
            }
        }
        if !grad_negatives.is_null() && total > 0 {
            let g = std::slice::from_raw_parts_mut(grad_negatives, total * dim);
            for (dst, src) in g.chunks_mut(dim).zip(res.grad_negatives.iter().flatten()) {
                dst.copy_from_slice(src);
            }
        }
        Ok(())
    })
}
