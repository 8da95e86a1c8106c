//! Three-phase pipeline: placement (contaminate a teacher on benchmark
//! test data), layering (distill a student on an intermediate set), and
//! integration (score the student on the benchmark). Plus iterated
//! teacher chains and parameter sweeps.
//!
//! Teacher and first student are initialized from the same seeded base
//! weights (both sides of the real pipeline start from one pretrained
//! checkpoint); later students in an iterated chain get fresh
//! per-iteration initializations.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DatasetRole};
use crate::error::{Error, Result};
use crate::loss::{DistillConfig, SoftLoss};
use crate::model::{MCQModel, ModelConfig};
use crate::rng::{derive_seed, RngState};
use crate::synth::{
    corrupt, gen_benchmark, gen_intermediate, AlignmentSpec, CorruptionMode, TaskSpec,
};
use crate::train::{evaluate, fit, train};
use crate::vocab::Vocab;

/// Hyperparameters for plain hard-label fitting (teacher placement).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            epochs: 60,
            batch_size: 32,
            learning_rate: 7e-4,
            weight_decay: 0.01,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "epochs and batch_size must be at least 1".into(),
            ));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::Config(
                "learning_rate must be a non-negative number".into(),
            ));
        }
        if !self.weight_decay.is_finite() || self.weight_decay < 0.0 {
            return Err(Error::Config(
                "weight_decay must be a non-negative number".into(),
            ));
        }
        Ok(())
    }

    fn to_distill(&self, seed: u64) -> DistillConfig {
        DistillConfig {
            alpha: 0.0,
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            seed,
            ..DistillConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaunderingConfig {
    pub bench_spec: TaskSpec,
    pub bench_size: usize,
    pub align: AlignmentSpec,
    pub intermediate_size: usize,
    pub teacher_model: ModelConfig,
    pub teacher_train: TrainHyper,
    pub student_model: ModelConfig,
    pub distill: DistillConfig,
    pub corruption: Option<CorruptionMode>,
    pub seeds: Vec<u64>,
}

impl Default for LaunderingConfig {
    fn default() -> Self {
        LaunderingConfig {
            bench_spec: TaskSpec::default(),
            bench_size: 200,
            align: AlignmentSpec::default(),
            intermediate_size: 5000,
            teacher_model: ModelConfig::default(),
            teacher_train: TrainHyper::default(),
            student_model: ModelConfig::default(),
            distill: DistillConfig::default(),
            corruption: None,
            seeds: vec![1, 2, 3, 4, 5],
        }
    }
}

impl LaunderingConfig {
    pub fn validate(&self) -> Result<()> {
        self.bench_spec.validate()?;
        self.align.validate()?;
        self.teacher_model.validate()?;
        self.teacher_train.validate()?;
        self.student_model.validate()?;
        self.distill.validate()?;
        if let Some(mode) = &self.corruption {
            mode.validate()?;
        }
        if self.bench_size == 0 {
            return Err(Error::Config("bench size must be at least 1".into()));
        }
        if self.intermediate_size == 0 {
            return Err(Error::Config("intermediate size must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let n = self.bench_spec.n_choices;
        if self.teacher_model.n_choices != n || self.student_model.n_choices != n {
            return Err(Error::Config(format!(
                "model n_choices must match the task's {n} choices"
            )));
        }
        Ok(())
    }
}

/// One (config, seed, iteration) outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub experiment_id: String,
    pub phase: String,
    pub seed: u64,
    pub alpha: f64,
    pub soft_loss: SoftLoss,
    pub temperature: f64,
    /// Intermediate dataset size.
    pub size: usize,
    /// 1-based distillation step; 0 marks records outside any chain.
    pub iteration: u32,
    pub train_acc: f64,
    pub bench_acc: f64,
    /// bench_acc minus the 1/n_choices chance level.
    pub leakage: f64,
    /// Reserved; kept at zero so result files are byte-reproducible.
    /// Measured timings are reported on the CLI and in run manifests.
    pub wall_time_s: f64,
}

/// Train a teacher directly on benchmark test data. The only operation
/// allowed to do so.
pub fn placement(
    bench: &Dataset,
    model_cfg: &ModelConfig,
    hp: &TrainHyper,
    seed: u64,
) -> Result<(MCQModel, f64)> {
    let vocab = Vocab::build(&[bench])?;
    placement_with_vocab(bench, &vocab, model_cfg, hp, seed)
}

/// Placement with a caller-supplied (usually joint) vocabulary.
pub fn placement_with_vocab(
    bench: &Dataset,
    vocab: &Vocab,
    model_cfg: &ModelConfig,
    hp: &TrainHyper,
    seed: u64,
) -> Result<(MCQModel, f64)> {
    if bench.role != DatasetRole::BenchmarkTest {
        return Err(Error::ContaminationGuard(format!(
            "placement requires a benchmark-test dataset, got role {}",
            bench.role
        )));
    }
    hp.validate()?;
    let mut model = MCQModel::init(
        model_cfg,
        vocab,
        &mut RngState::new(seed).stream("model-init"),
    )?;
    fit(&mut model, bench, None, &hp.to_distill(seed))?;
    let acc = evaluate(&model, bench)?;
    Ok((model, acc))
}

/// Distill a student from the teacher on an intermediate dataset.
/// The student is initialized from `distill.seed` and shares the
/// teacher's vocabulary.
pub fn layering(
    teacher: &MCQModel,
    intermediate: &Dataset,
    student_cfg: &ModelConfig,
    distill: &DistillConfig,
) -> Result<(MCQModel, f64)> {
    if intermediate.role != DatasetRole::IntermediateTrain {
        return Err(Error::ContaminationGuard(format!(
            "layering requires an intermediate-train dataset, got role {}",
            intermediate.role
        )));
    }
    let mut student = MCQModel::init(
        student_cfg,
        teacher.vocab(),
        &mut RngState::new(distill.seed).stream("model-init"),
    )?;
    let report = train(&mut student, intermediate, Some(teacher), distill)?;
    Ok((student, report.final_accuracy()))
}

/// Score a student on the benchmark; returns (accuracy, leakage).
pub fn integration(student: &MCQModel, bench: &Dataset) -> Result<(f64, f64)> {
    if bench.role != DatasetRole::BenchmarkTest {
        return Err(Error::ContaminationGuard(format!(
            "integration requires a benchmark-test dataset, got role {}",
            bench.role
        )));
    }
    let acc = evaluate(student, bench)?;
    let chance = 1.0 / student.config().n_choices as f64;
    Ok((acc, acc - chance))
}

struct Prepared {
    bench: Dataset,
    intermediate: Dataset,
    teacher: MCQModel,
    teacher_acc: f64,
}

/// Generate datasets, build the shared vocabulary, and place the
/// teacher for one experiment seed.
fn prepare(cfg: &LaunderingConfig, seed: u64) -> Result<Prepared> {
    let bench = gen_benchmark(
        &cfg.bench_spec,
        cfg.bench_size,
        derive_seed(seed, "bench-data", 0),
    )?;
    let mut intermediate = gen_intermediate(
        &bench,
        &cfg.align,
        cfg.intermediate_size,
        derive_seed(seed, "intermediate-data", 0),
    )?;
    if let Some(mode) = &cfg.corruption {
        intermediate = corrupt(
            &intermediate,
            mode.clone(),
            derive_seed(seed, "corruption", 0),
        )?;
    }
    let vocab = Vocab::build(&[&bench, &intermediate])?;
    let (teacher, teacher_acc) = placement_with_vocab(
        &bench,
        &vocab,
        &cfg.teacher_model,
        &cfg.teacher_train,
        fit_seed(seed, 1),
    )?;
    Ok(Prepared {
        bench,
        intermediate,
        teacher,
        teacher_acc,
    })
}

/// Per-iteration fit seed: drives both the fresh student initialization
/// and its shuffling, so chain steps are reproducible but distinct.
fn fit_seed(seed: u64, iteration: u32) -> u64 {
    derive_seed(seed, "fit", u64::from(iteration))
}

fn distill_step(
    cfg: &LaunderingConfig,
    teacher: &MCQModel,
    prep: &Prepared,
    seed: u64,
    iteration: u32,
) -> Result<(MCQModel, ExperimentRecord)> {
    let mut dc = cfg.distill.clone();
    dc.seed = fit_seed(seed, iteration);
    let (student, train_acc) = layering(teacher, &prep.intermediate, &cfg.student_model, &dc)?;
    let (bench_acc, leakage) = integration(&student, &prep.bench)?;
    let record = ExperimentRecord {
        experiment_id: format!(
            "a{}-{}-T{}-n{}-s{}-t{}",
            dc.alpha, dc.soft_loss, dc.temperature, cfg.intermediate_size, seed, iteration
        ),
        phase: "launder".to_string(),
        seed,
        alpha: dc.alpha,
        soft_loss: dc.soft_loss,
        temperature: dc.temperature,
        size: cfg.intermediate_size,
        iteration,
        train_acc,
        bench_acc,
        leakage,
        wall_time_s: 0.0,
    };
    Ok((student, record))
}

/// Full three-phase run: one record per seed.
pub fn run_laundering(cfg: &LaunderingConfig) -> Result<Vec<ExperimentRecord>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let prep = prepare(cfg, seed)?;
        let (_, record) = distill_step(cfg, &prep.teacher, &prep, seed, 1)?;
        out.push(record);
    }
    Ok(out)
}

/// Teacher accuracy from placement for each seed (diagnostic surface).
pub fn placement_accuracies(cfg: &LaunderingConfig) -> Result<Vec<(u64, f64)>> {
    cfg.validate()?;
    cfg.seeds
        .iter()
        .map(|&s| Ok((s, prepare(cfg, s)?.teacher_acc)))
        .collect()
}

/// Iterated distillation: at each step the previous student becomes the
/// teacher of a freshly initialized student. Records are emitted per
/// (seed, iteration); iteration 1 coincides with `run_laundering`.
pub fn iterative(cfg: &LaunderingConfig, n_iter: usize) -> Result<Vec<ExperimentRecord>> {
    if n_iter == 0 {
        return Err(Error::Contract(
            "iterative needs at least one iteration".into(),
        ));
    }
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.seeds.len() * n_iter);
    for &seed in &cfg.seeds {
        let prep = prepare(cfg, seed)?;
        let mut teacher = prep.teacher.clone();
        for t in 1..=n_iter as u32 {
            let (student, record) = distill_step(cfg, &teacher, &prep, seed, t)?;
            out.push(record);
            teacher = student;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    Alpha(Vec<f64>),
    Size(Vec<usize>),
    Loss(Vec<SoftLoss>),
}

impl SweepAxis {
    fn validate(&self) -> Result<()> {
        let len = match self {
            SweepAxis::Alpha(v) => {
                if v.iter().any(|a| !a.is_finite()) {
                    return Err(Error::Config("alpha sweep values must be finite".into()));
                }
                v.len()
            }
            SweepAxis::Size(v) => v.len(),
            SweepAxis::Loss(v) => v.len(),
        };
        if len == 0 {
            return Err(Error::Contract("sweep value list must be non-empty".into()));
        }
        Ok(())
    }
}

/// Cartesian product of axis values and seeds through `run_laundering`,
/// emitted in canonical order (axis value ascending, then seed).
pub fn sweep(
    cfg: &LaunderingConfig,
    axis: &SweepAxis,
    seeds: &[u64],
) -> Result<Vec<ExperimentRecord>> {
    axis.validate()?;
    if seeds.is_empty() {
        return Err(Error::Contract("sweep needs at least one seed".into()));
    }
    let mut sorted_seeds = seeds.to_vec();
    sorted_seeds.sort_unstable();

    let mut out = Vec::new();
    let mut run_cell = |cell: LaunderingConfig| -> Result<()> {
        out.extend(run_laundering(&cell)?);
        Ok(())
    };

    match axis {
        SweepAxis::Alpha(values) => {
            let mut values = values.clone();
            values.sort_by(|a, b| a.partial_cmp(b).expect("finite alphas"));
            for v in values {
                let mut cell = cfg.clone();
                cell.distill.alpha = v;
                cell.seeds = sorted_seeds.clone();
                run_cell(cell)?;
            }
        }
        SweepAxis::Size(values) => {
            let mut values = values.clone();
            values.sort_unstable();
            for v in values {
                let mut cell = cfg.clone();
                cell.intermediate_size = v;
                cell.seeds = sorted_seeds.clone();
                run_cell(cell)?;
            }
        }
        SweepAxis::Loss(values) => {
            let mut values = values.clone();
            values.sort_by_key(|k| k.name());
            for v in values {
                let mut cell = cfg.clone();
                cell.distill.soft_loss = v;
                cell.seeds = sorted_seeds.clone();
                run_cell(cell)?;
            }
        }
    }
    Ok(out)
}
