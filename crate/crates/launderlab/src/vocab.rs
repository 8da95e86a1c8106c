//! Shared vocabulary, tokenizer, and per-choice sequence encoding.

use std::collections::{BTreeMap, BTreeSet};

use crate::data::{Dataset, MCQItem};
use crate::error::{Error, Result};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const QSEP: u32 = 2;
pub const CSEP: u32 = 3;
pub const RESERVED: u32 = 4;

/// Tokens longer than this decompose into single characters, so that
/// corrupted random-character strings (10 per choice, 50 per question)
/// stay representable through a small fixed character vocabulary.
/// Generator tokens are all kept at or under this length.
pub const MAX_ATOMIC_TOKEN_LEN: usize = 9;

/// Lowercase, whitespace-split, with long tokens split into characters.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in text.split_whitespace() {
        let token = raw.to_lowercase();
        if token.chars().count() > MAX_ATOMIC_TOKEN_LEN {
            out.extend(token.chars().map(String::from));
        } else {
            out.push(token);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    ids: BTreeMap<String, u32>,
    tokens: Vec<String>,
}

impl Vocab {
    /// Vocabulary over every question and choice of the given datasets.
    /// Tokens are sorted before id assignment, so construction is
    /// deterministic and idempotent with respect to duplicates.
    pub fn build(datasets: &[&Dataset]) -> Result<Vocab> {
        if datasets.is_empty() {
            return Err(Error::Contract("vocab needs at least one dataset".into()));
        }
        let mut set = BTreeSet::new();
        for ds in datasets {
            for item in &ds.items {
                set.extend(tokenize(&item.question));
                for choice in &item.choices {
                    set.extend(tokenize(choice));
                }
            }
        }
        Ok(Self::from_tokens(set.into_iter().collect()))
    }

    /// Vocabulary from an explicit token list; list order assigns ids
    /// starting at the first unreserved id.
    pub fn from_tokens(tokens: Vec<String>) -> Vocab {
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), RESERVED + i as u32))
            .collect();
        Vocab { ids, tokens }
    }

    pub fn size(&self) -> usize {
        self.tokens.len() + RESERVED as usize
    }

    pub fn id_of(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.ids.contains_key(token)
    }

    /// Tokens in id order (reserved ids excluded).
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// One item encoded as `n_choices` fixed-length id sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedItem {
    pub choices: Vec<Vec<u32>>,
    pub gold: usize,
}

impl EncodedItem {
    /// Token ids that participate in pooling (PAD stripped).
    pub fn active_ids(&self, choice: usize) -> Vec<u32> {
        self.choices[choice]
            .iter()
            .copied()
            .filter(|&id| id != PAD)
            .collect()
    }
}

/// Layout per choice: QSEP, question tokens, CSEP, choice tokens,
/// truncated then PAD-padded to `max_len`. Unknown tokens map to UNK.
/// `max_len` must be at least 4.
pub fn encode(item: &MCQItem, vocab: &Vocab, max_len: usize) -> EncodedItem {
    assert!(max_len >= 4, "max_len must be at least 4");
    let q_ids: Vec<u32> = tokenize(&item.question)
        .iter()
        .map(|t| vocab.id_of(t))
        .collect();
    let choices = item
        .choices
        .iter()
        .map(|choice| {
            let mut seq = Vec::with_capacity(max_len);
            seq.push(QSEP);
            seq.extend(&q_ids);
            seq.push(CSEP);
            seq.extend(tokenize(choice).iter().map(|t| vocab.id_of(t)));
            seq.truncate(max_len);
            seq.resize(max_len, PAD);
            seq
        })
        .collect();
    EncodedItem {
        choices,
        gold: item.answer,
    }
}
