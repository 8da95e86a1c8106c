//! Synthetic benchmark / intermediate dataset generation, corruption
//! transforms, and vocabulary-overlap analysis.
//!
//! "Benchmark knowledge" is a seeded map from concept tokens to correct
//! attribute tokens. The benchmark tests that map; the intermediate set
//! reuses a controllable fraction of the benchmark's concepts (rho) but
//! carries gold labels from an independent map, so its hard labels say
//! nothing about the benchmark's answers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{
    content_hash, CorruptionRecord, Dataset, DatasetManifest, DatasetRole, GeneratorSpec, MCQItem,
};
use crate::error::{Error, Result};
use crate::hash::fnv1a64;
use crate::rng::RngState;
use crate::vocab::tokenize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub concept_count: usize,
    pub attributes_per_concept: usize,
    pub noise_token_pool: usize,
    pub question_noise_len: usize,
    pub template_count: usize,
    pub n_choices: usize,
}

impl Default for TaskSpec {
    fn default() -> Self {
        TaskSpec {
            concept_count: 128,
            attributes_per_concept: 4,
            noise_token_pool: 100,
            question_noise_len: 6,
            template_count: 16,
            n_choices: 4,
        }
    }
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_choices < 2 {
            return Err(Error::Config("n_choices must be at least 2".into()));
        }
        if self.concept_count < self.n_choices {
            return Err(Error::Config(format!(
                "concept_count must be >= n_choices ({})",
                self.n_choices
            )));
        }
        if self.attributes_per_concept < self.n_choices {
            return Err(Error::Config(format!(
                "attributes_per_concept {} < n_choices {}",
                self.attributes_per_concept, self.n_choices
            )));
        }
        if self.template_count == 0 || self.template_count > TEMPLATE_BANK {
            return Err(Error::Config(format!(
                "template_count must be in [1, {TEMPLATE_BANK}]"
            )));
        }
        if self.question_noise_len > 0 && self.noise_token_pool == 0 {
            return Err(Error::Config(
                "noise_token_pool must be > 0 when noise is used".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentSpec {
    /// Fraction of intermediate items whose concept comes from the
    /// benchmark's concept set; the rest draw from a disjoint pool.
    pub rho: f64,
    /// Fraction of the intermediate template pool shared with the
    /// benchmark templates.
    pub template_overlap: f64,
}

impl Default for AlignmentSpec {
    fn default() -> Self {
        AlignmentSpec {
            rho: 0.8,
            template_overlap: 0.5,
        }
    }
}

impl AlignmentSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::Config(format!(
                "rho must be in [0,1], got {}",
                self.rho
            )));
        }
        if !(0.0..=1.0).contains(&self.template_overlap) {
            return Err(Error::Config(format!(
                "template_overlap must be in [0,1], got {}",
                self.template_overlap
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CorruptionMode {
    RandomChoices {
        len: usize,
    },
    IdenticalChoices {
        ch: char,
        len: usize,
    },
    RandomQuestionsAndChoices {
        q_len: usize,
        c_len: usize,
    },
    IdenticalQuestionsAndChoices {
        ch: char,
        q_len: usize,
        c_len: usize,
    },
}

impl CorruptionMode {
    pub fn random_choices() -> Self {
        CorruptionMode::RandomChoices { len: 10 }
    }

    pub fn identical_choices() -> Self {
        CorruptionMode::IdenticalChoices { ch: 'a', len: 10 }
    }

    pub fn random_questions_and_choices() -> Self {
        CorruptionMode::RandomQuestionsAndChoices {
            q_len: 50,
            c_len: 10,
        }
    }

    pub fn identical_questions_and_choices() -> Self {
        CorruptionMode::IdenticalQuestionsAndChoices {
            ch: 'a',
            q_len: 50,
            c_len: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            CorruptionMode::RandomChoices { len } => len > 0,
            CorruptionMode::IdenticalChoices { len, .. } => len > 0,
            CorruptionMode::RandomQuestionsAndChoices { q_len, c_len } => q_len > 0 && c_len > 0,
            CorruptionMode::IdenticalQuestionsAndChoices { q_len, c_len, .. } => {
                q_len > 0 && c_len > 0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config("corruption lengths must be positive".into()))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CorruptionMode::RandomChoices { .. } => "random_choices",
            CorruptionMode::IdenticalChoices { .. } => "identical_choices",
            CorruptionMode::RandomQuestionsAndChoices { .. } => "random_questions_and_choices",
            CorruptionMode::IdenticalQuestionsAndChoices { .. } => {
                "identical_questions_and_choices"
            }
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "random_choices" => Ok(Self::random_choices()),
            "identical_choices" => Ok(Self::identical_choices()),
            "random_questions_and_choices" => Ok(Self::random_questions_and_choices()),
            "identical_questions_and_choices" => Ok(Self::identical_questions_and_choices()),
            other => Err(Error::Config(format!("unknown corruption mode '{other}'"))),
        }
    }
}

// Token builders. Everything stays at or under the atomic-token length
// so generated text never triggers the character fallback.

pub fn bench_concept_token(i: usize) -> String {
    format!("c{i}")
}

pub fn alt_concept_token(i: usize) -> String {
    format!("d{i}")
}

/// Attribute surface form: an identifying token plus three single-letter
/// tokens derived from the attribute's identity. The letters give answer
/// text the same character-level structure the corruption transforms
/// produce, so character processing is part of normal choice scoring.
pub fn bench_attr_token(concept: usize, attr: usize) -> String {
    attr_surface('a', concept, attr)
}

pub fn alt_attr_token(concept: usize, attr: usize) -> String {
    attr_surface('g', concept, attr)
}

fn attr_surface(ns: char, concept: usize, attr: usize) -> String {
    let mut s = format!("{ns}{concept}x{attr}");
    for k in 0..1u64 {
        let h = fnv1a64(format!("{ns}|{concept}|{attr}|{k}").as_bytes());
        s.push(' ');
        s.push((b'a' + (h % 26) as u8) as char);
    }
    s
}

fn noise_token(i: usize) -> String {
    format!("n{i}")
}

const TEMPLATE_BANK: usize = 16;

const TEMPLATE_VERBS: [&str; TEMPLATE_BANK] = [
    "pick", "choose", "select", "find", "name", "match", "give", "state", "mark", "spot", "judge",
    "rank", "probe", "grade", "vote", "sort",
];

const TEMPLATE_OBJS: [&str; TEMPLATE_BANK] = [
    "partner", "pairing", "fit", "mate", "link", "tag", "twin", "peer", "ally", "buddy", "bond",
    "tie", "kin", "join", "pal", "mesh",
];

/// Question prefix for a template slot in the global template space.
/// Benchmark templates occupy slots [0, template_count); fresh
/// intermediate templates occupy slots [TEMPLATE_BANK + k, ...).
fn template_words(slot: usize) -> [String; 4] {
    let verb = TEMPLATE_VERBS[slot % TEMPLATE_BANK];
    let obj = TEMPLATE_OBJS[(slot * 5 + 3 + (slot / TEMPLATE_BANK) * 7) % TEMPLATE_BANK];
    [
        verb.to_string(),
        "the".to_string(),
        obj.to_string(),
        "for".to_string(),
    ]
}

/// Correct-attribute index per concept, derived from the seed.
pub fn knowledge_map(spec: &TaskSpec, seed: u64, label: &str) -> Vec<usize> {
    let root = RngState::new(seed).stream(label);
    (0..spec.concept_count)
        .map(|c| root.substream(c as u64).range(spec.attributes_per_concept))
        .collect()
}

struct ItemDraw {
    question: String,
    choices: Vec<String>,
    answer: usize,
    concept_token: String,
    template_slot: usize,
}

/// One item body: template + concept + noise question, the concept's
/// mapped attribute among shuffled distinct wrong attributes.
fn draw_item(
    spec: &TaskSpec,
    rng: &mut RngState,
    concept: usize,
    correct_attr: usize,
    template_slot: usize,
    attr_token: impl Fn(usize, usize) -> String,
    concept_tok: &str,
) -> ItemDraw {
    let mut words: Vec<String> = template_words(template_slot).to_vec();
    words.push(concept_tok.to_string());
    for _ in 0..spec.question_noise_len {
        words.push(noise_token(rng.range(spec.noise_token_pool)));
    }
    let question = words.join(" ");

    let mut wrong: Vec<usize> = (0..spec.attributes_per_concept)
        .filter(|&a| a != correct_attr)
        .collect();
    rng.shuffle(&mut wrong);
    let answer = rng.range(spec.n_choices);
    let mut choices = Vec::with_capacity(spec.n_choices);
    let mut wrong_iter = wrong.iter();
    for pos in 0..spec.n_choices {
        if pos == answer {
            choices.push(attr_token(concept, correct_attr));
        } else {
            choices.push(attr_token(
                concept,
                *wrong_iter.next().expect("enough distractors"),
            ));
        }
    }
    ItemDraw {
        question,
        choices,
        answer,
        concept_token: concept_tok.to_string(),
        template_slot,
    }
}

/// Benchmark test set: questions about benchmark concepts, answered by
/// the benchmark knowledge map. Answer positions are uniform.
pub fn gen_benchmark(spec: &TaskSpec, size: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    if size == 0 {
        return Err(Error::Contract("benchmark size must be at least 1".into()));
    }
    let kmap = knowledge_map(spec, seed, "knowledge-map");
    let root = RngState::new(seed).stream("bench-item");
    let mut items = Vec::with_capacity(size);
    for idx in 0..size {
        let mut rng = root.substream(idx as u64);
        let concept = rng.range(spec.concept_count);
        let template_slot = rng.range(spec.template_count);
        let draw = draw_item(
            spec,
            &mut rng,
            concept,
            kmap[concept],
            template_slot,
            bench_attr_token,
            &bench_concept_token(concept),
        );
        let mut meta = BTreeMap::new();
        meta.insert("concept".to_string(), draw.concept_token);
        meta.insert("template".to_string(), draw.template_slot.to_string());
        items.push(MCQItem {
            id: format!("b{idx:06}"),
            question: draw.question,
            choices: draw.choices,
            answer: draw.answer,
            meta,
        });
    }
    Ok(Dataset {
        items,
        role: DatasetRole::BenchmarkTest,
        manifest: DatasetManifest {
            generator: GeneratorSpec::Benchmark {
                spec: spec.clone(),
                size,
                seed,
            },
            corruption: Vec::new(),
        },
    })
}

const REJECTION_LIMIT: usize = 1000;

/// Intermediate training set over a concept pool mixed per rho, with
/// gold labels from a fresh knowledge map. Content-hash rejection
/// guarantees no item is content-identical to a benchmark item.
pub fn gen_intermediate(
    bench: &Dataset,
    align: &AlignmentSpec,
    size: usize,
    seed: u64,
) -> Result<Dataset> {
    align.validate()?;
    if size == 0 {
        return Err(Error::Contract(
            "intermediate size must be at least 1".into(),
        ));
    }
    let (spec, bench_size, bench_seed) = match &bench.manifest.generator {
        GeneratorSpec::Benchmark { spec, size, seed } => (spec.clone(), *size, *seed),
        _ => return Err(Error::Contract(
            "gen_intermediate needs a generated benchmark dataset (manifest carries the task spec)"
                .into(),
        )),
    };
    if bench.role != DatasetRole::BenchmarkTest {
        return Err(Error::Contract(
            "gen_intermediate reference must be a benchmark-test set".into(),
        ));
    }

    let bench_hashes = bench.content_hashes();
    let kprime_bench = knowledge_map(&spec, seed, "fresh-map-bench");
    let kprime_alt = knowledge_map(&spec, seed, "fresh-map-alt");
    let shared_templates = ((align.template_overlap * spec.template_count as f64).round() as usize)
        .min(spec.template_count);

    // The intermediate concept pool mixes a seeded prefix of benchmark
    // concepts (rho of the pool) with disjoint-namespace concepts. The
    // permutation is independent of rho, so raising rho only extends the
    // covered prefix: shared coverage is monotone in rho by construction.
    let shared_k = (align.rho * spec.concept_count as f64).round() as usize;
    let mut bench_concept_perm: Vec<usize> = (0..spec.concept_count).collect();
    RngState::new(seed)
        .stream("shared-concepts")
        .shuffle(&mut bench_concept_perm);

    let root = RngState::new(seed).stream("inter-item");
    let mut items = Vec::with_capacity(size);
    for idx in 0..size {
        let mut rng = root.substream(idx as u64);
        let mut accepted = None;
        for _attempt in 0..REJECTION_LIMIT {
            let pool_idx = rng.range(spec.concept_count);
            let shared = pool_idx < shared_k;
            let concept = if shared {
                bench_concept_perm[pool_idx]
            } else {
                pool_idx
            };
            let t = rng.range(spec.template_count);
            let template_slot = if t < shared_templates {
                t
            } else {
                TEMPLATE_BANK + t
            };
            let draw = if shared {
                draw_item(
                    &spec,
                    &mut rng,
                    concept,
                    kprime_bench[concept],
                    template_slot,
                    bench_attr_token,
                    &bench_concept_token(concept),
                )
            } else {
                draw_item(
                    &spec,
                    &mut rng,
                    concept,
                    kprime_alt[concept],
                    template_slot,
                    alt_attr_token,
                    &alt_concept_token(concept),
                )
            };
            let mut meta = BTreeMap::new();
            meta.insert("concept".to_string(), draw.concept_token.clone());
            meta.insert("template".to_string(), draw.template_slot.to_string());
            meta.insert(
                "pool".to_string(),
                if shared {
                    "benchmark".to_string()
                } else {
                    "disjoint".to_string()
                },
            );
            let item = MCQItem {
                id: format!("i{idx:06}"),
                question: draw.question,
                choices: draw.choices,
                answer: draw.answer,
                meta,
            };
            if !bench_hashes.contains(&content_hash(&item)) {
                accepted = Some(item);
                break;
            }
        }
        match accepted {
            Some(item) => items.push(item),
            None => {
                return Err(Error::Generation(format!(
                    "could not generate an item distinct from the benchmark after {REJECTION_LIMIT} attempts; \
                     the task spec is too small for the requested size"
                )))
            }
        }
    }
    Ok(Dataset {
        items,
        role: DatasetRole::IntermediateTrain,
        manifest: DatasetManifest {
            generator: GeneratorSpec::Intermediate {
                spec,
                bench_size,
                bench_seed,
                align: align.clone(),
                size,
                seed,
            },
            corruption: Vec::new(),
        },
    })
}

fn random_letters(rng: &mut RngState, len: usize) -> String {
    (0..len).map(|_| rng.lowercase_letter()).collect()
}

fn repeated(ch: char, len: usize) -> String {
    ch.to_string().repeat(len)
}

/// Replace question/choice text per the corruption mode. Item count,
/// choice count, ids, answers, and meta are untouched; the manifest
/// records the corruption.
pub fn corrupt(ds: &Dataset, mode: CorruptionMode, seed: u64) -> Result<Dataset> {
    mode.validate()?;
    if ds.is_empty() {
        return Err(Error::Contract("cannot corrupt an empty dataset".into()));
    }
    let root = RngState::new(seed).stream("corrupt");
    let mut out = ds.clone();
    for (idx, item) in out.items.iter_mut().enumerate() {
        let mut rng = root.substream(idx as u64);
        match mode {
            CorruptionMode::RandomChoices { len } => {
                for choice in &mut item.choices {
                    *choice = random_letters(&mut rng, len);
                }
            }
            CorruptionMode::IdenticalChoices { ch, len } => {
                for choice in &mut item.choices {
                    *choice = repeated(ch, len);
                }
            }
            CorruptionMode::RandomQuestionsAndChoices { q_len, c_len } => {
                item.question = random_letters(&mut rng, q_len);
                for choice in &mut item.choices {
                    *choice = random_letters(&mut rng, c_len);
                }
            }
            CorruptionMode::IdenticalQuestionsAndChoices { ch, q_len, c_len } => {
                item.question = repeated(ch, q_len);
                for choice in &mut item.choices {
                    *choice = repeated(ch, c_len);
                }
            }
        }
    }
    out.manifest
        .corruption
        .push(CorruptionRecord { mode, seed });
    Ok(out)
}

/// Count of question pairs whose token-set Jaccard similarity reaches
/// tau. Symmetric in its dataset arguments.
pub fn vocab_overlap(a: &Dataset, b: &Dataset, tau: f64) -> Result<usize> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Contract(
            "vocab_overlap needs non-empty datasets".into(),
        ));
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Config(format!("tau must be in (0,1], got {tau}")));
    }
    let sets = |ds: &Dataset| -> Vec<std::collections::BTreeSet<String>> {
        ds.items
            .iter()
            .map(|i| tokenize(&i.question).into_iter().collect())
            .collect()
    };
    let sa = sets(a);
    let sb = sets(b);
    let mut count = 0;
    for qa in &sa {
        for qb in &sb {
            let inter = qa.intersection(qb).count();
            let union = qa.union(qb).count();
            let jaccard = if union == 0 {
                1.0
            } else {
                inter as f64 / union as f64
            };
            if jaccard >= tau {
                count += 1;
            }
        }
    }
    Ok(count)
}
