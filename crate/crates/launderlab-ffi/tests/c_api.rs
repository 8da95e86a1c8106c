//! Exercises the C ABI end to end from Rust.

use std::ffi::{CStr, CString};
use std::ptr;

use launderlab_ffi::*;

fn c_path(p: &std::path::Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

const SMALL_CONFIG: &str = "\
[bench]
concepts = 24
size = 40
noise_pool = 20

[intermediate]
size = 200

[teacher]
epochs = 120
lr = 0.002

[distill]
epochs = 3

[sweep]
seeds = 1
";

#[test]
fn full_pipeline_through_the_c_api() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("small.cfg");
    std::fs::write(&cfg_path, SMALL_CONFIG).unwrap();

    unsafe {
        let version = CStr::from_ptr(ll_version());
        assert!(!version.to_str().unwrap().is_empty());

        let mut cfg: *mut LlConfig = ptr::null_mut();
        assert_eq!(
            ll_config_load(c_path(&cfg_path).as_ptr(), &mut cfg),
            LlStatus::LlOk
        );

        let mut bench: *mut LlDataset = ptr::null_mut();
        assert_eq!(ll_generate_benchmark(cfg, 1, &mut bench), LlStatus::LlOk);
        assert_eq!(ll_dataset_len(bench), 40);

        let mut inter: *mut LlDataset = ptr::null_mut();
        assert_eq!(
            ll_generate_intermediate(cfg, bench, 1, &mut inter),
            LlStatus::LlOk
        );
        assert_eq!(ll_dataset_len(inter), 200);

        // Dataset file round trip.
        let ds_path = dir.path().join("inter.jsonl");
        assert_eq!(
            ll_dataset_write(inter, c_path(&ds_path).as_ptr()),
            LlStatus::LlOk
        );
        let mut reread: *mut LlDataset = ptr::null_mut();
        assert_eq!(
            ll_dataset_read(c_path(&ds_path).as_ptr(), &mut reread),
            LlStatus::LlOk
        );
        assert_eq!(ll_dataset_len(reread), 200);

        // Placement with a shared vocabulary, then layering + integration.
        let mut teacher: *mut LlModel = ptr::null_mut();
        let mut teacher_acc = 0.0;
        assert_eq!(
            ll_placement(cfg, bench, inter, 1, &mut teacher, &mut teacher_acc),
            LlStatus::LlOk
        );
        assert!(teacher_acc > 0.8, "teacher accuracy {teacher_acc}");

        let mut student: *mut LlModel = ptr::null_mut();
        let mut train_acc = 0.0;
        assert_eq!(
            ll_layering(cfg, teacher, inter, 1, &mut student, &mut train_acc),
            LlStatus::LlOk
        );

        let mut acc = 0.0;
        let mut leak = 0.0;
        assert_eq!(
            ll_integration(student, bench, &mut acc, &mut leak),
            LlStatus::LlOk
        );
        assert!((leak - (acc - 0.25)).abs() < 1e-12);

        // Checkpoint round trip through the ABI.
        let model_path = dir.path().join("student.bin");
        assert_eq!(
            ll_model_save(student, c_path(&model_path).as_ptr()),
            LlStatus::LlOk
        );
        let mut loaded: *mut LlModel = ptr::null_mut();
        assert_eq!(
            ll_model_load(c_path(&model_path).as_ptr(), &mut loaded),
            LlStatus::LlOk
        );
        let mut acc2 = 0.0;
        let mut leak2 = 0.0;
        assert_eq!(
            ll_integration(loaded, bench, &mut acc2, &mut leak2),
            LlStatus::LlOk
        );
        assert_eq!(acc.to_bits(), acc2.to_bits());

        // Records through the full pipeline.
        let mut records: *mut LlRecords = ptr::null_mut();
        assert_eq!(ll_run_laundering(cfg, &mut records), LlStatus::LlOk);
        assert_eq!(ll_records_len(records), 1);
        let mut view = LlRecordView {
            seed: 0,
            alpha: 0.0,
            temperature: 0.0,
            soft_loss_is_kld: 0,
            size: 0,
            iteration: 0,
            train_acc: 0.0,
            bench_acc: 0.0,
            leakage: 0.0,
        };
        assert_eq!(ll_records_get(records, 0, &mut view), LlStatus::LlOk);
        assert_eq!(view.seed, 1);
        assert_eq!(view.iteration, 1);
        assert_eq!(view.size, 200);
        assert!((view.leakage - (view.bench_acc - 0.25)).abs() < 1e-12);

        let csv_path = dir.path().join("records.csv");
        assert_eq!(
            ll_records_write_csv(records, c_path(&csv_path).as_ptr(), false),
            LlStatus::LlOk
        );
        let text = std::fs::read_to_string(&csv_path).unwrap();
        assert!(text.starts_with("experiment_id,phase,seed,"));

        // Corruption through the ABI.
        let mut corrupted: *mut LlDataset = ptr::null_mut();
        assert_eq!(
            ll_dataset_corrupt(inter, LlCorruption::LlIdenticalChoices, 7, &mut corrupted),
            LlStatus::LlOk
        );
        assert_eq!(ll_dataset_len(corrupted), 200);

        let mut overlap = 0u64;
        assert_eq!(
            ll_vocab_overlap(bench, bench, 1.0, &mut overlap),
            LlStatus::LlOk
        );
        assert!(overlap >= 40);

        ll_dataset_free(bench);
        ll_dataset_free(inter);
        ll_dataset_free(reread);
        ll_dataset_free(corrupted);
        ll_model_free(teacher);
        ll_model_free(student);
        ll_model_free(loaded);
        ll_records_free(records);
        ll_config_free(cfg);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        // Null arguments.
        let mut out: *mut LlDataset = ptr::null_mut();
        assert_eq!(
            ll_generate_benchmark(ptr::null(), 1, &mut out),
            LlStatus::LlNullArgument
        );
        assert_eq!(
            ll_dataset_read(ptr::null(), &mut out),
            LlStatus::LlNullArgument
        );

        // Missing file is a runtime error with a message.
        let missing = CString::new("/definitely/not/here.jsonl").unwrap();
        assert_eq!(
            ll_dataset_read(missing.as_ptr(), &mut out),
            LlStatus::LlRuntime
        );
        let msg = CStr::from_ptr(ll_last_error()).to_str().unwrap();
        assert!(!msg.is_empty());

        // Guard violation surfaces as validation.
        let mut cfg: *mut LlConfig = ptr::null_mut();
        assert_eq!(ll_config_default(&mut cfg), LlStatus::LlOk);
        let dir = tempfile::tempdir().unwrap();
        let cfg_small = dir.path().join("c.cfg");
        std::fs::write(&cfg_small, SMALL_CONFIG).unwrap();
        ll_config_free(cfg);
        let mut cfg2: *mut LlConfig = ptr::null_mut();
        assert_eq!(
            ll_config_load(c_path(&cfg_small).as_ptr(), &mut cfg2),
            LlStatus::LlOk
        );

        let mut bench: *mut LlDataset = ptr::null_mut();
        assert_eq!(ll_generate_benchmark(cfg2, 1, &mut bench), LlStatus::LlOk);
        let mut teacher: *mut LlModel = ptr::null_mut();
        let mut teacher_acc = 0.0;
        assert_eq!(
            ll_placement(cfg2, bench, ptr::null(), 1, &mut teacher, &mut teacher_acc),
            LlStatus::LlOk
        );
        // Layering on benchmark-test data must be refused.
        let mut student: *mut LlModel = ptr::null_mut();
        let mut train_acc = 0.0;
        assert_eq!(
            ll_layering(cfg2, teacher, bench, 1, &mut student, &mut train_acc),
            LlStatus::LlValidation
        );
        let msg = CStr::from_ptr(ll_last_error()).to_str().unwrap();
        assert!(msg.contains("contamination"), "{msg}");

        // Freeing NULL is a no-op.
        ll_dataset_free(ptr::null_mut());
        ll_model_free(ptr::null_mut());
        ll_records_free(ptr::null_mut());
        ll_config_free(ptr::null_mut());

        ll_dataset_free(bench);
        ll_model_free(teacher);
        ll_config_free(cfg2);
    }
}
