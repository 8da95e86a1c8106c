//! C ABI for launderlab.
//!
//! Conventions: opaque handles behind pointers, integer status codes,
//! and a thread-local last-error message retrievable with
//! `ll_last_error`. Out-parameters are written only on `Ok`. Every
//! handle has a matching `*_free`; passing NULL to a free is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

use launderlab::checkpoint::{load_model, save_model};
use launderlab::config::ResolvedConfig;
use launderlab::data::Dataset;
use launderlab::jsonl::{read_jsonl, write_jsonl};
use launderlab::model::MCQModel;
use launderlab::pipeline::{
    integration, iterative, layering, placement_with_vocab, run_laundering, ExperimentRecord,
};
use launderlab::results::write_results;
use launderlab::rng::derive_seed;
use launderlab::synth::{corrupt, gen_benchmark, gen_intermediate, vocab_overlap, CorruptionMode};
use launderlab::vocab::Vocab;
use launderlab::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LlStatus {
    LlOk = 0,
    /// Bad configuration, bad arguments, or guard violations.
    LlValidation = 1,
    /// I/O or generation failure.
    LlRuntime = 2,
    LlNullArgument = 3,
    LlInvalidUtf8 = 4,
}

/// Corruption transform selector for `ll_dataset_corrupt`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LlCorruption {
    LlRandomChoices = 0,
    LlIdenticalChoices = 1,
    LlRandomQuestionsAndChoices = 2,
    LlIdenticalQuestionsAndChoices = 3,
}

/// Numeric view of one experiment record.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LlRecordView {
    pub seed: u64,
    pub alpha: f64,
    pub temperature: f64,
    /// 1 when the soft loss is KL divergence, 0 for MSE.
    pub soft_loss_is_kld: u8,
    pub size: u64,
    pub iteration: u32,
    pub train_acc: f64,
    pub bench_acc: f64,
    pub leakage: f64,
}

pub struct LlConfig(ResolvedConfig);
pub struct LlDataset(Dataset);
pub struct LlModel(MCQModel);
pub struct LlRecords(Vec<ExperimentRecord>);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap_or_default());
}

fn fail(e: Error) -> LlStatus {
    let status = match e.exit_code() {
        2 => LlStatus::LlRuntime,
        _ => LlStatus::LlValidation,
    };
    set_error(&e.to_string());
    status
}

unsafe fn opt_str<'a>(p: *const c_char) -> Result<&'a str, LlStatus> {
    if p.is_null() {
        set_error("null string argument");
        return Err(LlStatus::LlNullArgument);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        LlStatus::LlInvalidUtf8
    })
}

macro_rules! require {
    ($ptr:expr) => {
        match unsafe { $ptr.as_ref() } {
            Some(r) => r,
            None => {
                set_error(concat!("null argument: ", stringify!($ptr)));
                return LlStatus::LlNullArgument;
            }
        }
    };
}

macro_rules! out_slot {
    ($ptr:expr) => {
        match unsafe { $ptr.as_mut() } {
            Some(r) => r,
            None => {
                set_error(concat!("null out-parameter: ", stringify!($ptr)));
                return LlStatus::LlNullArgument;
            }
        }
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ll_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on this thread. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ll_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Built-in default configuration.
///
/// # Safety
/// `out` must be a valid pointer to a `LlConfig*` slot.
#[no_mangle]
pub unsafe extern "C" fn ll_config_default(out: *mut *mut LlConfig) -> LlStatus {
    let slot = out_slot!(out);
    *slot = Box::into_raw(Box::new(LlConfig(ResolvedConfig::default())));
    LlStatus::LlOk
}

/// Load a configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn ll_config_load(path: *const c_char, out: *mut *mut LlConfig) -> LlStatus {
    let slot = out_slot!(out);
    let path = match opt_str(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match ResolvedConfig::load(Path::new(path)) {
        Ok(cfg) => {
            *slot = Box::into_raw(Box::new(LlConfig(cfg)));
            LlStatus::LlOk
        }
        Err(e) => fail(e),
    }
}

/// # Safety
/// `cfg` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn ll_config_free(cfg: *mut LlConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Generate the benchmark test set for one experiment seed.
///
/// # Safety
/// `cfg` must be a live config handle; `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn ll_generate_benchmark(
    cfg: *const LlConfig,
    seed: u64,
    out: *mut *mut LlDataset,
) -> LlStatus {
    let cfg = require!(cfg);
    let slot = out_slot!(out);
    let c = &cfg.0.laundering;
    match gen_benchmark(
        &c.bench_spec,
        c.bench_size,
        derive_seed(seed, "bench-data", 0),
    ) {
        Ok(ds) => {
            *slot = Box::into_raw(Box::new(LlDataset(ds)));
            LlStatus::LlOk
        }
        Err(e) => fail(e),
    }
}

/// Generate the intermediate training set for one experiment seed,
/// applying the config's corruption mode when one is set.
///
/// # Safety
/// `cfg` and `bench` must be live handles; `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn ll_generate_intermediate(
    cfg: *const LlConfig,
    bench: *const LlDataset,
    seed: u64,
    out: *mut *mut LlDataset,
) -> LlStatus {
    let cfg = require!(cfg);
    let bench = require!(bench);
    let slot = out_slot!(out);
    let c = &cfg.0.laundering;
    let mut ds = match gen_intermediate(
        &bench.0,
        &c.align,
        c.intermediate_size,
        derive_seed(seed, "intermediate-data", 0),
    ) {
        Ok(ds) => ds,
        Err(e) => return fail(e),
    };
    if let Some(mode) = &c.corruption {
        ds = match corrupt(&ds, mode.clone(), derive_seed(seed, "corruption", 0)) {
            Ok(ds) => ds,
            Err(e) => return fail(e),
        };
    }
    *slot = Box::into_raw(Box::new(LlDataset(ds)));
    LlStatus::LlOk
}

/// Read a dataset JSONL file.
///
/// # Safety
/// `path` must be NUL-terminated; `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn ll_dataset_read(
    path: *const c_char,
    out: *mut *mut LlDataset,
) -> LlStatus {
    let slot = out_slot!(out);
    let path = match opt_str(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match read_jsonl(Path::new(path)) {
        Ok(ds) => {
            *slot = Box::into_raw(Box::new(LlDataset(ds)));
            LlStatus::LlOk
        }
        Err(e) => fail(e),
    }
}

/// Write a dataset as JSONL.
///
/// # Safety
/// `ds` must be a live handle; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ll_dataset_write(ds: *const LlDataset, path: *const c_char) -> LlStatus {
    let ds = require!(ds);
    let path = match opt_str(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match write_jsonl(&ds.0, Path::new(path)) {
        Ok(()) => LlStatus::LlOk,
        Err(e) => fail(e),
    }
}

/// Item count; 0 for NULL.
///
/// # Safety
/// `ds` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn ll_dataset_len(ds: *const LlDataset) -> u64 {
    ds.as_ref().map_or(0, |d| d.0.len() as u64)
}

/// Apply a corruption transform, producing a new dataset.
///
/// # Safety
/// `ds` must be a live handle; `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn ll_dataset_corrupt(
    ds: *const LlDataset,
    mode: LlCorruption,
    seed: u64,
    out: *mut *mut LlDataset,
) -> LlStatus {
    let ds = require!(ds);
    let slot = out_slot!(out);
    let mode = match mode {
        LlCorruption::LlRandomChoices => CorruptionMode::random_choices(),
        LlCorruption::LlIdenticalChoices => CorruptionMode::identical_choices(),
        LlCorruption::LlRandomQuestionsAndChoices => CorruptionMode::random_questions_and_choices(),
        LlCorruption::LlIdenticalQuestionsAndChoices => {
            CorruptionMode::identical_questions_and_choices()
        }
    };
    match corrupt(&ds.0, mode, seed) {
        Ok(c) => {
            *slot = Box::into_raw(Box::new(LlDataset(c)));
            LlStatus::LlOk
        }
        Err(e) => fail(e),
    }
}

/// # Safety
/// `ds` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn ll_dataset_free(ds: *mut LlDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Count of question pairs with token-set Jaccard similarity >= tau.
///
/// # Safety
/// `a` and `b` must be live handles; `out_count` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn ll_vocab_overlap(
    a: *const LlDataset,
    b: *const LlDataset,
    tau: f64,
    out_count: *mut u64,
) -> LlStatus {
    let a = require!(a);
    let b = require!(b);
    let slot = out_slot!(out_count);
    match vocab_overlap(&a.0, &b.0, tau) {
        Ok(n) => {
            *slot = n as u64;
            LlStatus::LlOk
        }
        Err(e) => fail(e),
    }
}

/// Placement: train a teacher on benchmark test data. `vocab_extra`
/// may be NULL; pass the intermediate set there so teacher and student
/// share one vocabulary.
///
/// # Safety
/// Handles must be live (or NULL where documented); out pointers valid.
#[no_mangle]
pub unsafe extern "C" fn ll_placement(
    cfg: *const LlConfig,
    bench: *const LlDataset,
    vocab_extra: *const LlDataset,
    seed: u64,
    out_model: *mut *mut LlModel,
    out_accuracy: *mut f64,
) -> LlStatus {
    let cfg = require!(cfg);
    let bench = require!(bench);
    let model_slot = out_slot!(out_model);
    let acc_slot = out_slot!(out_accuracy);
    let c = &cfg.0.laundering;
    let vocab = {
        let mut sources: Vec<&Dataset> = vec![&bench.0];
        if let Some(extra) = vocab_extra.as_ref() {
            sources.push(&extra.0);
        }
        match Vocab::build(&sources) {
            Ok(v) => v,
            Err(e) => return fail(e),
        }
    };
    match placement_with_vocab(
        &bench.0,
        &vocab,
        &c.teacher_model,
        &c.teacher_train,
        derive_seed(seed, "fit", 1),
    ) {
        Ok((model, acc)) => {
            *model_slot = Box::into_raw(Box::new(LlModel(model)));
            *acc_slot = acc;
            LlStatus::LlOk
        }
        Err(e) => fail(e),
    }
}

/// Layering: distill a student from a teacher on an intermediate set.
///
/// # Safety
/// Handles must be live; out pointers valid.
#[no_mangle]
pub unsafe extern "C" fn ll_layering(
    cfg: *const LlConfig,
    teacher: *const LlModel,
    intermediate: *const LlDataset,
    seed: u64,
    out_model: *mut *mut LlModel,
    out_train_acc: *mut f64,
) -> LlStatus {
    let cfg = require!(cfg);
    let teacher = require!(teacher);
    let data = require!(intermediate);
    let model_slot = out_slot!(out_model);
    let acc_slot = out_slot!(out_train_acc);
    let c = &cfg.0.laundering;
    let mut dc = c.distill.clone();
    dc.seed = derive_seed(seed, "fit", 1);
    match layering(&teacher.0, &data.0, &c.student_model, &dc) {
        Ok((student, train_acc)) => {
            *model_slot = Box::into_raw(Box::new(LlModel(student)));
            *acc_slot = train_acc;
            LlStatus::LlOk
        }
        Err(e) => fail(e),
    }
}

/// Integration: benchmark accuracy and leakage of a model.
///
/// # Safety
/// Handles must be live; out pointers valid.
#[no_mangle]
pub unsafe extern "C" fn ll_integration(
    model: *const LlModel,
    bench: *const LlDataset,
    out_accuracy: *mut f64,
    out_leakage: *mut f64,
) -> LlStatus {
    let model = require!(model);
    let bench = require!(bench);
    let acc_slot = out_slot!(out_accuracy);
    let leak_slot = out_slot!(out_leakage);
    match integration(&model.0, &bench.0) {
        Ok((acc, leak)) => {
            *acc_slot = acc;
            *leak_slot = leak;
            LlStatus::LlOk
        }
        Err(e) => fail(e),
    }
}

/// Save a model checkpoint.
///
/// # Safety
/// `model` must be live; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ll_model_save(model: *const LlModel, path: *const c_char) -> LlStatus {
    let model = require!(model);
    let path = match opt_str(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match save_model(&model.0, Path::new(path)) {
        Ok(()) => LlStatus::LlOk,
        Err(e) => fail(e),
    }
}

/// Load a model checkpoint.
///
/// # Safety
/// `path` must be NUL-terminated; `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn ll_model_load(path: *const c_char, out: *mut *mut LlModel) -> LlStatus {
    let slot = out_slot!(out);
    let path = match opt_str(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match load_model(Path::new(path)) {
        Ok(m) => {
            *slot = Box::into_raw(Box::new(LlModel(m)));
            LlStatus::LlOk
        }
        Err(e) => fail(e),
    }
}

/// # Safety
/// `model` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn ll_model_free(model: *mut LlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Full three-phase pipeline over the config's seed list.
///
/// # Safety
/// `cfg` must be live; `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn ll_run_laundering(
    cfg: *const LlConfig,
    out: *mut *mut LlRecords,
) -> LlStatus {
    let cfg = require!(cfg);
    let slot = out_slot!(out);
    match run_laundering(&cfg.0.laundering) {
        Ok(records) => {
            *slot = Box::into_raw(Box::new(LlRecords(records)));
            LlStatus::LlOk
        }
        Err(e) => fail(e),
    }
}

/// Iterated distillation chains (`n_iter` steps per seed).
///
/// # Safety
/// `cfg` must be live; `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn ll_iterative(
    cfg: *const LlConfig,
    n_iter: u64,
    out: *mut *mut LlRecords,
) -> LlStatus {
    let cfg = require!(cfg);
    let slot = out_slot!(out);
    match iterative(&cfg.0.laundering, n_iter as usize) {
        Ok(records) => {
            *slot = Box::into_raw(Box::new(LlRecords(records)));
            LlStatus::LlOk
        }
        Err(e) => fail(e),
    }
}

/// # Safety
/// `records` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn ll_records_len(records: *const LlRecords) -> u64 {
    records.as_ref().map_or(0, |r| r.0.len() as u64)
}

/// Numeric view of record `index`.
///
/// # Safety
/// `records` must be live; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ll_records_get(
    records: *const LlRecords,
    index: u64,
    out: *mut LlRecordView,
) -> LlStatus {
    let records = require!(records);
    let slot = out_slot!(out);
    let Some(r) = records.0.get(index as usize) else {
        set_error("record index out of range");
        return LlStatus::LlValidation;
    };
    *slot = LlRecordView {
        seed: r.seed,
        alpha: r.alpha,
        temperature: r.temperature,
        soft_loss_is_kld: u8::from(r.soft_loss == launderlab::loss::SoftLoss::Kld),
        size: r.size as u64,
        iteration: r.iteration,
        train_acc: r.train_acc,
        bench_acc: r.bench_acc,
        leakage: r.leakage,
    };
    LlStatus::LlOk
}

/// Write records as CSV (fixed column schema); `append` validates the
/// existing header first.
///
/// # Safety
/// `records` must be live; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ll_records_write_csv(
    records: *const LlRecords,
    path: *const c_char,
    append: bool,
) -> LlStatus {
    let records = require!(records);
    let path = match opt_str(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match write_results(&records.0, Path::new(path), append) {
        Ok(()) => LlStatus::LlOk,
        Err(e) => fail(e),
    }
}

/// # Safety
/// `records` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn ll_records_free(records: *mut LlRecords) {
    if !records.is_null() {
        drop(Box::from_raw(records));
    }
}
