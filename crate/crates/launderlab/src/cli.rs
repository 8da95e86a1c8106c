//! Command-line interface. Exit codes: 0 success, 1 validation error,
//! 2 runtime error. All randomness flows from --seed flags or the
//! config's seed list; every output path is an explicit flag.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::checkpoint::{load_model, save_model};
use crate::config::{parse_axis, ResolvedConfig, RunManifest};
use crate::data::DatasetRole;
use crate::error::{Error, Result};
use crate::jsonl::{read_jsonl, write_jsonl};
use crate::pipeline::{
    integration, iterative, layering, placement_with_vocab, run_laundering, sweep, ExperimentRecord,
};
use crate::results::{read_results, report, report_tsv, write_results, GroupKey};
use crate::rng::derive_seed;
use crate::synth::{corrupt, gen_benchmark, gen_intermediate, vocab_overlap, CorruptionMode};
use crate::vocab::Vocab;

#[derive(Parser)]
#[command(name = "launderlab", version, about = "Benchmark-leakage laboratory", long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the benchmark and intermediate datasets for one seed
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        bench_out: PathBuf,
        #[arg(long)]
        intermediate_out: PathBuf,
    },
    /// Placement: train a teacher directly on benchmark test data
    Contaminate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        bench: PathBuf,
        /// Extra dataset whose tokens join the vocabulary (pass the
        /// intermediate set so teacher and student share one vocab)
        #[arg(long)]
        vocab_extra: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        model_out: PathBuf,
    },
    /// Layering: distill a student from a teacher on an intermediate set
    Distill {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        teacher: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        model_out: PathBuf,
    },
    /// Integration: score a model on a benchmark dataset
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Run the full three-phase pipeline over the config's seeds
    Launder {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        append: bool,
    },
    /// Iterated distillation: each student becomes the next teacher
    Iterate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        iterations: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        append: bool,
    },
    /// Sweep alpha, size, or loss kind across the config's seeds
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the config's sweep axis (alpha|size|loss)
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated values for --axis
        #[arg(long)]
        values: Option<String>,
        #[arg(long)]
        append: bool,
    },
    /// Replace question/choice text with random or identical characters
    Corrupt {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        mode: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Count question pairs with token-set Jaccard similarity >= tau
    Overlap {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
    },
    /// Aggregate a results CSV into per-group mean and sd (TSV)
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        group: String,
        /// Output TSV path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parse and dispatch; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprint!("{e}");
            return 1;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    let started = Instant::now();
    match cmd {
        Command::Generate {
            config,
            seed,
            bench_out,
            intermediate_out,
        } => {
            let cfg = ResolvedConfig::load(&config)?.laundering;
            let bench = gen_benchmark(
                &cfg.bench_spec,
                cfg.bench_size,
                derive_seed(seed, "bench-data", 0),
            )?;
            let mut inter = gen_intermediate(
                &bench,
                &cfg.align,
                cfg.intermediate_size,
                derive_seed(seed, "intermediate-data", 0),
            )?;
            if let Some(mode) = &cfg.corruption {
                inter = corrupt(&inter, mode.clone(), derive_seed(seed, "corruption", 0))?;
            }
            write_jsonl(&bench, &bench_out)?;
            write_jsonl(&inter, &intermediate_out)?;
            println!(
                "wrote {} benchmark items to {} and {} intermediate items to {}",
                bench.len(),
                bench_out.display(),
                inter.len(),
                intermediate_out.display()
            );
        }
        Command::Contaminate {
            config,
            bench,
            vocab_extra,
            seed,
            model_out,
        } => {
            let cfg = ResolvedConfig::load(&config)?.laundering;
            let bench_ds = read_jsonl(&bench)?;
            let vocab = match vocab_extra {
                Some(path) => {
                    let extra = read_jsonl(&path)?;
                    Vocab::build(&[&bench_ds, &extra])?
                }
                None => Vocab::build(&[&bench_ds])?,
            };
            let (teacher, acc) = placement_with_vocab(
                &bench_ds,
                &vocab,
                &cfg.teacher_model,
                &cfg.teacher_train,
                derive_seed(seed, "fit", 1),
            )?;
            save_model(&teacher, &model_out)?;
            println!("teacher accuracy on its training benchmark: {acc:.4}");
        }
        Command::Distill {
            config,
            teacher,
            data,
            seed,
            model_out,
        } => {
            let cfg = ResolvedConfig::load(&config)?.laundering;
            let teacher_model = load_model(&teacher)?;
            let data_ds = read_jsonl(&data)?;
            let mut dc = cfg.distill.clone();
            dc.seed = derive_seed(seed, "fit", 1);
            let (student, train_acc) = layering(&teacher_model, &data_ds, &cfg.student_model, &dc)?;
            save_model(&student, &model_out)?;
            println!("student final train accuracy: {train_acc:.4}");
        }
        Command::Evaluate { model, data } => {
            let m = load_model(&model)?;
            let ds = read_jsonl(&data)?;
            if ds.role != DatasetRole::BenchmarkTest {
                return Err(Error::ContaminationGuard(format!(
                    "evaluate expects a benchmark-test dataset, got role {}",
                    ds.role
                )));
            }
            let (acc, leakage) = integration(&m, &ds)?;
            println!("accuracy {acc:.6}");
            println!("leakage {leakage:.6}");
        }
        Command::Launder {
            config,
            out,
            append,
        } => {
            let resolved = ResolvedConfig::load(&config)?;
            let mut manifest = RunManifest::new(&resolved);
            let records = run_laundering(&resolved.laundering)?;
            write_results(&records, &out, append)?;
            manifest.finish();
            manifest
                .artifacts
                .insert("results".to_string(), out.display().to_string());
            let manifest_path = manifest_path_for(&out);
            manifest.write(&manifest_path)?;
            summarize(&records);
            println!(
                "wrote {} records to {} (manifest {}) in {:.1}s",
                records.len(),
                out.display(),
                manifest_path.display(),
                started.elapsed().as_secs_f64()
            );
        }
        Command::Iterate {
            config,
            iterations,
            out,
            append,
        } => {
            let resolved = ResolvedConfig::load(&config)?;
            let mut manifest = RunManifest::new(&resolved);
            let records = iterative(&resolved.laundering, iterations)?;
            write_results(&records, &out, append)?;
            manifest.finish();
            manifest
                .artifacts
                .insert("results".to_string(), out.display().to_string());
            manifest.write(&manifest_path_for(&out))?;
            summarize(&records);
            println!(
                "wrote {} records to {} in {:.1}s",
                records.len(),
                out.display(),
                started.elapsed().as_secs_f64()
            );
        }
        Command::Sweep {
            config,
            out,
            axis,
            values,
            append,
        } => {
            let resolved = ResolvedConfig::load(&config)?;
            let axis = match (axis, values) {
                (None, None) => resolved.sweep_axis.clone().ok_or_else(|| {
                    Error::Config(
                        "no sweep axis: set [sweep].axis/values or pass --axis/--values".into(),
                    )
                })?,
                (a, v) => parse_axis(a.as_deref(), v.as_deref())?.ok_or_else(|| {
                    Error::Config("--axis and --values must be passed together".into())
                })?,
            };
            let mut manifest = RunManifest::new(&resolved);
            let records = sweep(&resolved.laundering, &axis, &resolved.laundering.seeds)?;
            write_results(&records, &out, append)?;
            manifest.finish();
            manifest
                .artifacts
                .insert("results".to_string(), out.display().to_string());
            manifest.write(&manifest_path_for(&out))?;
            summarize(&records);
            println!(
                "wrote {} records to {} in {:.1}s",
                records.len(),
                out.display(),
                started.elapsed().as_secs_f64()
            );
        }
        Command::Corrupt {
            input,
            mode,
            seed,
            out,
        } => {
            let ds = read_jsonl(&input)?;
            let mode = CorruptionMode::from_name(&mode)?;
            let corrupted = corrupt(&ds, mode, seed)?;
            write_jsonl(&corrupted, &out)?;
            println!(
                "wrote {} corrupted items to {}",
                corrupted.len(),
                out.display()
            );
        }
        Command::Overlap { a, b, tau } => {
            let da = read_jsonl(&a)?;
            let db = read_jsonl(&b)?;
            let count = vocab_overlap(&da, &db, tau)?;
            println!("{count}");
        }
        Command::Report { input, group, out } => {
            let records = read_results(&input)?;
            let key = GroupKey::from_name(&group)?;
            let tsv = report_tsv(&report(&records, key));
            match out {
                Some(path) => std::fs::write(path, tsv)?,
                None => print!("{tsv}"),
            }
        }
    }
    Ok(())
}

fn manifest_path_for(out: &Path) -> PathBuf {
    let mut name = out
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn summarize(records: &[ExperimentRecord]) {
    for r in records {
        println!(
            "{}: train_acc={:.4} bench_acc={:.4} leakage={:+.4}",
            r.experiment_id, r.train_acc, r.bench_acc, r.leakage
        );
    }
}
