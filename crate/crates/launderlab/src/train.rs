//! Mini-batch training loop and accuracy evaluation.

use crate::data::{Dataset, DatasetRole};
use crate::error::{Error, Result};
use crate::loss::{distill_loss, DistillConfig};
use crate::model::MCQModel;
use crate::optim::OptimizerState;
use crate::rng::RngState;
use crate::tape::Tape;
use crate::vocab::EncodedItem;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Accuracy on the training set after each epoch.
    pub epoch_train_accuracy: Vec<f64>,
}

impl TrainReport {
    pub fn final_accuracy(&self) -> f64 {
        self.epoch_train_accuracy.last().copied().unwrap_or(0.0)
    }
}

/// Train on an intermediate dataset. Benchmark-test data is refused
/// here unconditionally; only the placement phase may train on it.
pub fn train(
    model: &mut MCQModel,
    data: &Dataset,
    teacher: Option<&MCQModel>,
    cfg: &DistillConfig,
) -> Result<TrainReport> {
    if data.role == DatasetRole::BenchmarkTest {
        return Err(Error::ContaminationGuard(
            "refusing to train on a benchmark-test dataset outside the placement phase".into(),
        ));
    }
    fit(model, data, teacher, cfg)
}

/// Role-free training path shared with placement.
pub(crate) fn fit(
    model: &mut MCQModel,
    data: &Dataset,
    teacher: Option<&MCQModel>,
    cfg: &DistillConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Contract("cannot train on an empty dataset".into()));
    }
    if data.n_choices() != Some(model.config().n_choices) {
        return Err(Error::Contract(format!(
            "dataset has {:?} choices per item, model expects {}",
            data.n_choices(),
            model.config().n_choices
        )));
    }
    if teacher.is_none() && cfg.alpha > 0.0 {
        return Err(Error::Contract(
            "alpha > 0 requires a teacher; hard-label training must use alpha = 0".into(),
        ));
    }
    if let Some(t) = teacher {
        if t.vocab().size() != model.vocab().size() {
            return Err(Error::Contract(format!(
                "teacher/student vocab size mismatch: {} vs {}",
                t.vocab().size(),
                model.vocab().size()
            )));
        }
    }

    let encoded = model.encode_dataset(data);
    let actives: Vec<Vec<Vec<u32>>> = encoded
        .iter()
        .map(|e| (0..e.choices.len()).map(|c| e.active_ids(c)).collect())
        .collect();
    // Teacher logits are constants: compute them once up front.
    let teacher_logits: Option<Vec<Vec<f64>>> = match teacher {
        Some(t) if cfg.alpha > 0.0 => Some(
            data.items
                .iter()
                .map(|i| t.forward(&t.encode_item(i)))
                .collect(),
        ),
        _ => None,
    };

    let mut opt = OptimizerState::new(model.params(), cfg.learning_rate, cfg.weight_decay);
    let shuffle_root = RngState::new(cfg.seed).stream("shuffle");
    let mut per_epoch = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..encoded.len()).collect();
        shuffle_root.substream(epoch as u64).shuffle(&mut order);
        for batch in order.chunks(cfg.batch_size) {
            let mut tape = Tape::new();
            let nodes = model.register_on_tape(&mut tape);
            let mut losses = Vec::with_capacity(batch.len());
            for &i in batch {
                let logits = model.forward_tape_from_ids(&mut tape, &nodes, &actives[i])?;
                let t_logits: &[f64] = match &teacher_logits {
                    Some(tl) => &tl[i],
                    None => &[],
                };
                losses.push(distill_loss(
                    &mut tape,
                    logits,
                    t_logits,
                    encoded[i].gold,
                    cfg,
                )?);
            }
            let stacked = tape.concat(&losses)?;
            let batch_loss = tape.mean(stacked);
            let grads = tape.backward(batch_loss)?;
            let by_name = nodes.gradients(&grads, model.params());
            opt.step(model.params_mut(), &by_name)?;
        }
        per_epoch.push(accuracy_from_ids(model, &actives, &encoded));
    }
    Ok(TrainReport {
        epoch_train_accuracy: per_epoch,
    })
}

fn accuracy_from_ids(model: &MCQModel, actives: &[Vec<Vec<u32>>], encoded: &[EncodedItem]) -> f64 {
    let correct = actives
        .iter()
        .zip(encoded)
        .filter(|(ids, e)| argmax_lowest(&model.forward_from_ids(ids)) == e.gold)
        .count();
    correct as f64 / encoded.len() as f64
}

/// Index of the maximum, ties broken toward the lowest index.
pub fn argmax_lowest(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Fraction of items whose argmax logit is the gold choice.
pub fn evaluate(model: &MCQModel, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Contract(
            "cannot evaluate on an empty dataset".into(),
        ));
    }
    if data.n_choices() != Some(model.config().n_choices) {
        return Err(Error::Contract(format!(
            "dataset has {:?} choices per item, model expects {}",
            data.n_choices(),
            model.config().n_choices
        )));
    }
    let encoded = model.encode_dataset(data);
    Ok(accuracy_encoded(model, &encoded))
}

fn accuracy_encoded(model: &MCQModel, encoded: &[EncodedItem]) -> f64 {
    let correct = encoded
        .iter()
        .filter(|e| argmax_lowest(&model.forward(e)) == e.gold)
        .count();
    correct as f64 / encoded.len() as f64
}
