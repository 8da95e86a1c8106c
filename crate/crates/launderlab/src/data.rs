//! Multiple-choice items, datasets, roles, and manifests.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::fnv1a64;
use crate::synth::{AlignmentSpec, CorruptionMode, TaskSpec};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MCQItem {
    pub id: String,
    pub question: String,
    pub choices: Vec<String>,
    pub answer: usize,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl MCQItem {
    pub fn validate(&self) -> Result<()> {
        if self.choices.is_empty() {
            return Err(Error::Validation(format!("item {}: no choices", self.id)));
        }
        if self.answer >= self.choices.len() {
            return Err(Error::Validation(format!(
                "item {}: answer {} out of range for {} choices",
                self.id,
                self.answer,
                self.choices.len()
            )));
        }
        Ok(())
    }
}

/// 64-bit FNV-1a over "question|choice0|...|choiceN".
pub fn content_hash(item: &MCQItem) -> u64 {
    let mut buf = item.question.clone();
    for choice in &item.choices {
        buf.push('|');
        buf.push_str(choice);
    }
    fnv1a64(buf.as_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetRole {
    #[serde(rename = "benchmark-test")]
    BenchmarkTest,
    #[serde(rename = "intermediate-train")]
    IntermediateTrain,
}

impl DatasetRole {
    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetRole::BenchmarkTest => "benchmark-test",
            DatasetRole::IntermediateTrain => "intermediate-train",
        }
    }
}

impl std::fmt::Display for DatasetRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a dataset was produced; replaying a manifest regenerates the
/// dataset exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    Benchmark {
        spec: TaskSpec,
        size: usize,
        seed: u64,
    },
    /// Carries the benchmark's generation parameters too, so the
    /// rejection-sampling reference can be rebuilt during replay.
    Intermediate {
        spec: TaskSpec,
        bench_size: usize,
        bench_seed: u64,
        align: AlignmentSpec,
        size: usize,
        seed: u64,
    },
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionRecord {
    pub mode: CorruptionMode,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub generator: GeneratorSpec,
    #[serde(default)]
    pub corruption: Vec<CorruptionRecord>,
}

impl DatasetManifest {
    pub fn external() -> Self {
        DatasetManifest {
            generator: GeneratorSpec::External,
            corruption: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub items: Vec<MCQItem>,
    pub role: DatasetRole,
    pub manifest: DatasetManifest,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Choice count shared by every item; None for an empty dataset.
    pub fn n_choices(&self) -> Option<usize> {
        self.items.first().map(|i| i.choices.len())
    }

    /// Ids unique, answers in range, choice counts consistent.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        let n_choices = self.n_choices();
        for item in &self.items {
            item.validate()?;
            if Some(item.choices.len()) != n_choices {
                return Err(Error::Validation(format!(
                    "item {}: {} choices, expected {}",
                    item.id,
                    item.choices.len(),
                    n_choices.unwrap_or(0)
                )));
            }
            if !seen.insert(&item.id) {
                return Err(Error::Validation(format!("duplicate item id {}", item.id)));
            }
        }
        Ok(())
    }

    pub fn content_hashes(&self) -> std::collections::BTreeSet<u64> {
        self.items.iter().map(content_hash).collect()
    }

    /// Regenerate a dataset from its manifest. External datasets cannot
    /// be replayed.
    pub fn replay(manifest: &DatasetManifest) -> Result<Dataset> {
        let mut ds = match &manifest.generator {
            GeneratorSpec::Benchmark { spec, size, seed } => {
                crate::synth::gen_benchmark(spec, *size, *seed)?
            }
            GeneratorSpec::Intermediate {
                spec,
                bench_size,
                bench_seed,
                align,
                size,
                seed,
            } => {
                let bench = crate::synth::gen_benchmark(spec, *bench_size, *bench_seed)?;
                crate::synth::gen_intermediate(&bench, align, *size, *seed)?
            }
            GeneratorSpec::External => {
                return Err(Error::Contract(
                    "external datasets cannot be replayed".into(),
                ))
            }
        };
        for c in &manifest.corruption {
            ds = crate::synth::corrupt(&ds, c.mode.clone(), c.seed)?;
        }
        Ok(ds)
    }
}
