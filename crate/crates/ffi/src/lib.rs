//! C ABI over a trained hssc checkpoint bundle.
//!
//! Every function returns an [`HsscStatus`]; on failure a description is
//! available from [`hssc_last_error_message`] on the same thread. Strings
//! returned through out-pointers are owned by the caller and released with
//! [`hssc_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, UnwindSafe};
use std::path::Path;
use std::ptr;

use hssc::cli::load_bundle;
use hssc::data::{detokenize, tokenize, Vocabulary};
use hssc::eval::{rouge_l, rouge_n};
use hssc::model::Model;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HsscStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    LoadFailed = 3,
    EmptyInput = 4,
    BufferTooSmall = 5,
    NoClassifier = 6,
    Internal = 7,
}

/// A loaded model together with its vocabulary.
pub struct HsscModel {
    model: Model,
    vocab: Vocabulary,
    max_len: usize,
}

/// ROUGE F1 scores in [0, 1].
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HsscRouge {
    pub rouge_1: f64,
    pub rouge_2: f64,
    pub rouge_l: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(HsscStatus, String);

fn fail(status: HsscStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure> + UnwindSafe) -> HsscStatus {
    match catch_unwind(f) {
        Ok(Ok(())) => {
            set_error("");
            HsscStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HsscStatus::Internal
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(HsscStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(HsscStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn owned(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Loads a checkpoint directory written by `hssc train`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hssc_model_load(path: *const c_char, out: *mut *mut HsscModel) -> HsscStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(HsscStatus::NullPointer, "out is null"));
        }
        *out = ptr::null_mut();
        let path = text(path, "path")?;
        let (model, vocab, cfg) = load_bundle(Path::new(path)).map_err(|e| fail(HsscStatus::LoadFailed, e.to_string()))?;
        let max_len = cfg.unwrap_or_default().max_decode_len;
        *out = Box::into_raw(Box::new(HsscModel { model, vocab, max_len }));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from [`hssc_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hssc_model_free(model: *mut HsscModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of rating classes, or 0 for summarization-only variants.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hssc_model_num_classes(model: *const HsscModel) -> usize {
    match model.as_ref() {
        Some(m) if m.model.config.variant.has_classifier() => m.model.config.num_classes,
        _ => 0,
    }
}

/// Summarizes `review` and predicts its rating.
///
/// `summary` receives a new string. `rating` receives the 1-based rating, or 0
/// when the model has no classifier. If `distribution` is non-null it must hold
/// `distribution_len` doubles, at least [`hssc_model_num_classes`] of them.
///
/// # Safety
/// All non-null pointers must be valid for the described access.
#[no_mangle]
pub unsafe extern "C" fn hssc_summarize(
    model: *const HsscModel,
    review: *const c_char,
    summary: *mut *mut c_char,
    rating: *mut u32,
    distribution: *mut f64,
    distribution_len: usize,
) -> HsscStatus {
    guard(|| {
        let m = model
            .as_ref()
            .ok_or_else(|| fail(HsscStatus::NullPointer, "model is null"))?;
        if summary.is_null() || rating.is_null() {
            return Err(fail(HsscStatus::NullPointer, "summary and rating are required"));
        }
        *summary = ptr::null_mut();
        *rating = 0;
        let tokens = tokenize(text(review, "review")?);
        if tokens.is_empty() {
            return Err(fail(HsscStatus::EmptyInput, "empty text"));
        }
        let p = m
            .model
            .predict(&m.vocab.encode(&tokens), m.max_len)
            .map_err(|e| fail(HsscStatus::Internal, e.to_string()))?;
        if let (Some(probs), false) = (&p.class_probs, distribution.is_null()) {
            if distribution_len < probs.len() {
                return Err(fail(
                    HsscStatus::BufferTooSmall,
                    format!("distribution needs {} entries, got {distribution_len}", probs.len()),
                ));
            }
            ptr::copy_nonoverlapping(probs.as_ptr(), distribution, probs.len());
        }
        *rating = p.class.map_or(0, |c| c as u32 + 1);
        *summary = owned(detokenize(&m.vocab.decode(&p.tokens)));
        Ok(())
    })
}

/// Class distribution only, for callers that do not need a summary.
///
/// # Safety
/// `distribution` must hold `distribution_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hssc_classify(
    model: *const HsscModel,
    review: *const c_char,
    distribution: *mut f64,
    distribution_len: usize,
) -> HsscStatus {
    let classes = hssc_model_num_classes(model);
    if !model.is_null() && classes == 0 {
        set_error("model has no classifier");
        return HsscStatus::NoClassifier;
    }
    if distribution.is_null() {
        set_error("distribution is null");
        return HsscStatus::NullPointer;
    }
    let mut summary = ptr::null_mut();
    let mut rating = 0;
    let status = hssc_summarize(model, review, &mut summary, &mut rating, distribution, distribution_len);
    hssc_string_free(summary);
    status
}

/// ROUGE-1, ROUGE-2 and ROUGE-L F1 between two texts after tokenization.
///
/// # Safety
/// `candidate` and `reference` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hssc_rouge(
    candidate: *const c_char,
    reference: *const c_char,
    out: *mut HsscRouge,
) -> HsscStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(HsscStatus::NullPointer, "out is null"));
        }
        let c = tokenize(text(candidate, "candidate")?);
        let r = tokenize(text(reference, "reference")?);
        *out = HsscRouge {
            rouge_1: rouge_n(&c, &r, 1).f1,
            rouge_2: rouge_n(&c, &r, 2).f1,
            rouge_l: rouge_l(&c, &r).f1,
        };
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hssc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the last failed call on this thread, empty after success.
/// Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn hssc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn hssc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
