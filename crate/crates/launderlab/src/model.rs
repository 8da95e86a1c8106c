//! Choice-scoring network: shared embedding table, mean pooling over
//! non-PAD positions, and a per-choice MLP producing one logit per
//! choice. The same scorer is applied to every choice sequence, so the
//! architecture is equivariant to choice order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, MCQItem};
use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::tape::{Gradients, NodeId, Tape};
use crate::tensor::{ParamStore, Tensor};
use crate::vocab::{encode, EncodedItem, Vocab};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub n_choices: usize,
    pub max_len: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embed_dim: 32,
            hidden_dim: 64,
            n_choices: 4,
            max_len: 24,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if self.n_choices < 2 {
            return Err(Error::Config("n_choices must be at least 2".into()));
        }
        if self.max_len < 4 {
            return Err(Error::Config("max_len must be at least 4".into()));
        }
        Ok(())
    }
}

pub const PARAM_NAMES: [&str; 7] = ["embed", "w1", "b1", "w2", "b2", "w3", "b3"];

#[derive(Debug, Clone, PartialEq)]
pub struct MCQModel {
    cfg: ModelConfig,
    vocab: Vocab,
    params: ParamStore,
}

impl MCQModel {
    /// Fresh parameters drawn uniform on [-1/sqrt(fan_in), +1/sqrt(fan_in)],
    /// in a fixed draw order (embed, then the MLP layer by layer).
    pub fn init(cfg: &ModelConfig, vocab: &Vocab, rng: &mut RngState) -> Result<MCQModel> {
        cfg.validate()?;
        let (d, h) = (cfg.embed_dim, cfg.hidden_dim);
        let vs = vocab.size();
        let mut params = ParamStore::new();
        // Embedding rows see a one-hot input, so fan-in is 1 (unit-scale
        // init, as is conventional for embedding tables).
        params.insert("embed", Tensor::uniform_init(vec![vs, d], 1, rng))?;
        params.insert("w1", Tensor::uniform_init(vec![d, h], d, rng))?;
        params.insert("b1", Tensor::uniform_init(vec![1, h], d, rng))?;
        params.insert("w2", Tensor::uniform_init(vec![h, h], h, rng))?;
        params.insert("b2", Tensor::uniform_init(vec![1, h], h, rng))?;
        params.insert("w3", Tensor::uniform_init(vec![h, 1], h, rng))?;
        params.insert("b3", Tensor::uniform_init(vec![1, 1], h, rng))?;
        Ok(MCQModel {
            cfg: cfg.clone(),
            vocab: vocab.clone(),
            params,
        })
    }

    pub fn from_parts(cfg: ModelConfig, vocab: Vocab, params: ParamStore) -> Result<MCQModel> {
        cfg.validate()?;
        for name in PARAM_NAMES {
            if params.get(name).is_none() {
                return Err(Error::Format(format!(
                    "model is missing parameter '{name}'"
                )));
            }
        }
        Ok(MCQModel { cfg, vocab, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn encode_item(&self, item: &MCQItem) -> EncodedItem {
        encode(item, &self.vocab, self.cfg.max_len)
    }

    pub fn encode_dataset(&self, data: &Dataset) -> Vec<EncodedItem> {
        data.items.iter().map(|i| self.encode_item(i)).collect()
    }

    /// Straight arithmetic forward pass (no tape): one logit per choice.
    pub fn forward(&self, item: &EncodedItem) -> Vec<f64> {
        let ids: Vec<Vec<u32>> = (0..item.choices.len())
            .map(|c| item.active_ids(c))
            .collect();
        self.forward_from_ids(&ids)
    }

    /// Fast path over precomputed non-PAD token ids per choice.
    pub fn forward_from_ids(&self, ids_per_choice: &[Vec<u32>]) -> Vec<f64> {
        let (d, h) = (self.cfg.embed_dim, self.cfg.hidden_dim);
        let embed = self.params.get("embed").unwrap().values();
        let w1 = self.params.get("w1").unwrap().values();
        let b1 = self.params.get("b1").unwrap().values();
        let w2 = self.params.get("w2").unwrap().values();
        let b2 = self.params.get("b2").unwrap().values();
        let w3 = self.params.get("w3").unwrap().values();
        let b3 = self.params.get("b3").unwrap().values();

        let mut pooled = vec![0.0; d];
        let mut h1 = vec![0.0; h];
        let mut h2 = vec![0.0; h];
        ids_per_choice
            .iter()
            .map(|ids| {
                pooled.iter_mut().for_each(|p| *p = 0.0);
                for &id in ids {
                    let row = &embed[id as usize * d..(id as usize + 1) * d];
                    for (p, r) in pooled.iter_mut().zip(row) {
                        *p += r;
                    }
                }
                let inv = 1.0 / ids.len() as f64;
                for p in &mut pooled {
                    *p *= inv;
                }

                h1.iter_mut().for_each(|v| *v = 0.0);
                for (l, &x) in pooled.iter().enumerate() {
                    let row = &w1[l * h..(l + 1) * h];
                    for (acc, w) in h1.iter_mut().zip(row) {
                        *acc += x * w;
                    }
                }
                for (acc, b) in h1.iter_mut().zip(b1) {
                    *acc = (*acc + b).max(0.0);
                }

                h2.iter_mut().for_each(|v| *v = 0.0);
                for (l, &x) in h1.iter().enumerate() {
                    let row = &w2[l * h..(l + 1) * h];
                    for (acc, w) in h2.iter_mut().zip(row) {
                        *acc += x * w;
                    }
                }
                for (acc, b) in h2.iter_mut().zip(b2) {
                    *acc = (*acc + b).max(0.0);
                }

                let mut score = 0.0;
                for (x, w) in h2.iter().zip(w3) {
                    score += x * w;
                }
                score + b3[0]
            })
            .collect()
    }

    /// Register all parameters as tape leaves (once per tape).
    pub fn register_on_tape(&self, tape: &mut Tape) -> ModelNodes {
        let mut by_name = BTreeMap::new();
        for (name, tensor) in self.params.iter() {
            by_name.insert(name.clone(), tape.param(tensor));
        }
        ModelNodes { by_name }
    }

    /// Differentiable forward pass. All choice sequences of the item are
    /// scored as the rows of one stacked matrix; the returned node holds
    /// the n_choices logits.
    pub fn forward_tape(
        &self,
        tape: &mut Tape,
        nodes: &ModelNodes,
        item: &EncodedItem,
    ) -> Result<NodeId> {
        let rows: Vec<Vec<u32>> = (0..item.choices.len())
            .map(|c| item.active_ids(c))
            .collect();
        self.forward_tape_from_ids(tape, nodes, &rows)
    }

    /// Tape forward over precomputed non-PAD token ids per choice.
    pub fn forward_tape_from_ids(
        &self,
        tape: &mut Tape,
        nodes: &ModelNodes,
        ids_per_choice: &[Vec<u32>],
    ) -> Result<NodeId> {
        let pooled = tape.stack_mean_embed(nodes.id("embed"), ids_per_choice)?;
        let a1 = tape.matmul(pooled, nodes.id("w1"))?;
        let a1b = tape.add_row(a1, nodes.id("b1"))?;
        let h1 = tape.relu(a1b);
        let a2 = tape.matmul(h1, nodes.id("w2"))?;
        let a2b = tape.add_row(a2, nodes.id("b2"))?;
        let h2 = tape.relu(a2b);
        let a3 = tape.matmul(h2, nodes.id("w3"))?;
        tape.add_row(a3, nodes.id("b3"))
    }
}

/// Tape node ids for one registration of the model parameters.
pub struct ModelNodes {
    by_name: BTreeMap<String, NodeId>,
}

impl ModelNodes {
    pub fn id(&self, name: &str) -> NodeId {
        self.by_name[name]
    }

    /// Wrap an externally built name -> node binding (used by gradient
    /// checking, where the checker owns parameter registration).
    pub fn from_bindings(bind: &BTreeMap<String, NodeId>) -> ModelNodes {
        ModelNodes {
            by_name: bind.clone(),
        }
    }

    /// Gradient buffers keyed by parameter name; zeros where nothing flowed.
    pub fn gradients(&self, grads: &Gradients, params: &ParamStore) -> BTreeMap<String, Vec<f64>> {
        self.by_name
            .iter()
            .map(|(name, &id)| {
                let len = params.get(name).expect("registered parameter").len();
                (name.clone(), grads.get_or_zeros(id, len))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::QSEP;

    fn tiny_vocab() -> Vocab {
        Vocab::from_tokens(vec![
            "alpha".into(),
            "beta".into(),
            "gamma".into(),
            "delta".into(),
        ])
    }

    fn tiny_cfg() -> ModelConfig {
        ModelConfig {
            embed_dim: 4,
            hidden_dim: 5,
            n_choices: 4,
            max_len: 8,
        }
    }

    fn tiny_item(vocab: &Vocab) -> EncodedItem {
        let item = MCQItem {
            id: "t".into(),
            question: "alpha beta".into(),
            choices: vec![
                "gamma".into(),
                "delta".into(),
                "alpha".into(),
                "beta".into(),
            ],
            answer: 0,
            meta: BTreeMap::new(),
        };
        encode(&item, vocab, 8)
    }

    #[test]
    fn constant_network_outputs_the_output_bias() {
        let vocab = tiny_vocab();
        let mut rng = RngState::new(1);
        let mut model = MCQModel::init(&tiny_cfg(), &vocab, &mut rng).unwrap();
        for name in PARAM_NAMES {
            for v in model.params_mut().get_mut(name).unwrap().values_mut() {
                *v = 0.0;
            }
        }
        model.params_mut().get_mut("b3").unwrap().values_mut()[0] = 0.37;
        let logits = model.forward(&tiny_item(&vocab));
        assert!(logits.iter().all(|&l| (l - 0.37).abs() < 1e-15));
    }

    #[test]
    fn permuting_choices_permutes_logits() {
        let vocab = tiny_vocab();
        let mut rng = RngState::new(2);
        let model = MCQModel::init(&tiny_cfg(), &vocab, &mut rng).unwrap();
        let enc = tiny_item(&vocab);
        let logits = model.forward(&enc);

        let mut permuted = enc.clone();
        permuted.choices.swap(0, 3);
        permuted.choices.swap(1, 2);
        let plogits = model.forward(&permuted);
        assert_eq!(plogits[0].to_bits(), logits[3].to_bits());
        assert_eq!(plogits[1].to_bits(), logits[2].to_bits());
        assert_eq!(plogits[2].to_bits(), logits[1].to_bits());
        assert_eq!(plogits[3].to_bits(), logits[0].to_bits());
    }

    /// Straight-line reimplementation with compensated (Kahan) sums.
    fn oracle_forward(model: &MCQModel, item: &EncodedItem) -> Vec<f64> {
        let d = model.config().embed_dim;
        let h = model.config().hidden_dim;
        let p = |n: &str| model.params().get(n).unwrap().values();
        let kahan_dot = |xs: &[f64], ys: &[f64]| -> f64 {
            let mut sum = 0.0;
            let mut comp = 0.0;
            for (x, y) in xs.iter().zip(ys) {
                let term = x * y - comp;
                let next = sum + term;
                comp = (next - sum) - term;
                sum = next;
            }
            sum
        };
        (0..item.choices.len())
            .map(|c| {
                let ids = item.active_ids(c);
                let pooled: Vec<f64> = (0..d)
                    .map(|j| {
                        let col: Vec<f64> = ids
                            .iter()
                            .map(|&id| p("embed")[id as usize * d + j])
                            .collect();
                        kahan_dot(&col, &vec![1.0; col.len()]) / ids.len() as f64
                    })
                    .collect();
                let h1: Vec<f64> = (0..h)
                    .map(|j| {
                        let col: Vec<f64> = (0..d).map(|l| p("w1")[l * h + j]).collect();
                        (kahan_dot(&pooled, &col) + p("b1")[j]).max(0.0)
                    })
                    .collect();
                let h2: Vec<f64> = (0..h)
                    .map(|j| {
                        let col: Vec<f64> = (0..h).map(|l| p("w2")[l * h + j]).collect();
                        (kahan_dot(&h1, &col) + p("b2")[j]).max(0.0)
                    })
                    .collect();
                kahan_dot(&h2, p("w3")) + p("b3")[0]
            })
            .collect()
    }

    #[test]
    fn forward_matches_straight_line_oracle() {
        let vocab = tiny_vocab();
        let mut rng = RngState::new(3);
        let model = MCQModel::init(&tiny_cfg(), &vocab, &mut rng).unwrap();
        let enc = tiny_item(&vocab);
        let fast = model.forward(&enc);
        let slow = oracle_forward(&model, &enc);
        for (a, b) in fast.iter().zip(&slow) {
            let denom = f64::max(1.0, a.abs());
            assert!((a - b).abs() / denom < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn tape_forward_agrees_with_fast_forward() {
        let vocab = tiny_vocab();
        let mut rng = RngState::new(4);
        let model = MCQModel::init(&tiny_cfg(), &vocab, &mut rng).unwrap();
        let enc = tiny_item(&vocab);
        let fast = model.forward(&enc);

        let mut tape = Tape::new();
        let nodes = model.register_on_tape(&mut tape);
        let logits = model.forward_tape(&mut tape, &nodes, &enc).unwrap();
        for (a, b) in tape.values(logits).iter().zip(&fast) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn pooling_ignores_padding() {
        let vocab = tiny_vocab();
        let mut rng = RngState::new(5);
        let model = MCQModel::init(&tiny_cfg(), &vocab, &mut rng).unwrap();
        let item = MCQItem {
            id: "p".into(),
            question: "alpha".into(),
            choices: vec!["beta".into(), "beta".into(), "beta".into(), "beta".into()],
            answer: 0,
            meta: BTreeMap::new(),
        };
        let short = encode(&item, &vocab, 5);
        let long = encode(&item, &vocab, 24);
        assert_eq!(model.forward(&short), model.forward(&long));
        assert!(short.active_ids(0).starts_with(&[QSEP]));
    }
}
