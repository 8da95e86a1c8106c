//! Distillation loss: (1-alpha) * hard cross-entropy + alpha * soft loss
//! against constant teacher logits. The soft term is either MSE on raw
//! logits or temperature-softened KL divergence scaled by T^2.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tape::{log_softmax_values, softmax_values, NodeId, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SoftLoss {
    Mse,
    Kld,
}

impl SoftLoss {
    pub fn name(&self) -> &'static str {
        match self {
            SoftLoss::Mse => "mse",
            SoftLoss::Kld => "kld",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "mse" => Ok(SoftLoss::Mse),
            "kld" => Ok(SoftLoss::Kld),
            other => Err(Error::Config(format!(
                "unknown soft loss '{other}' (expected mse|kld)"
            ))),
        }
    }
}

impl std::fmt::Display for SoftLoss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillConfig {
    /// Mixing weight: 0 = pure hard labels, 1 = pure teacher signal.
    pub alpha: f64,
    /// Softening temperature; applies to the KLD soft loss (and to MSE
    /// only when `mse_use_temperature` is set).
    pub temperature: f64,
    pub soft_loss: SoftLoss,
    /// Alternative MSE formulation over temperature-scaled logits.
    pub mse_use_temperature: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            alpha: 1.0,
            temperature: 2.0,
            soft_loss: SoftLoss::Mse,
            mse_use_temperature: false,
            epochs: 10,
            batch_size: 32,
            learning_rate: 5e-4,
            weight_decay: 0.01,
            seed: 42,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "alpha must be in [0,1], got {}",
                self.alpha
            )));
        }
        if self.temperature.is_nan() || self.temperature <= 0.0 {
            return Err(Error::Config(format!(
                "temperature must be > 0, got {}",
                self.temperature
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::Config(format!(
                "learning_rate must be a non-negative number, got {}",
                self.learning_rate
            )));
        }
        if !self.weight_decay.is_finite() || self.weight_decay < 0.0 {
            return Err(Error::Config(format!(
                "weight_decay must be a non-negative number, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// Hard cross-entropy of the gold choice under softmax(student).
fn hard_loss(tape: &mut Tape, student: NodeId, gold: usize) -> Result<NodeId> {
    let ls = tape.log_softmax(student)?;
    let picked = tape.pick(ls, gold)?;
    Ok(tape.scale(picked, -1.0))
}

fn soft_loss(
    tape: &mut Tape,
    student: NodeId,
    teacher: &[f64],
    cfg: &DistillConfig,
) -> Result<NodeId> {
    match cfg.soft_loss {
        SoftLoss::Mse => {
            let (node, target): (NodeId, Vec<f64>) = if cfg.mse_use_temperature {
                let scaled = tape.scale(student, 1.0 / cfg.temperature);
                (
                    scaled,
                    teacher.iter().map(|t| -t / cfg.temperature).collect(),
                )
            } else {
                (student, teacher.iter().map(|t| -t).collect())
            };
            let diff = tape.add_const(node, &target)?;
            let sq = tape.square(diff);
            Ok(tape.mean(sq))
        }
        SoftLoss::Kld => {
            // T^2 * KL(softmax(teacher/T) || softmax(student/T))
            let t = cfg.temperature;
            let t_scaled: Vec<f64> = teacher.iter().map(|x| x / t).collect();
            let p_teacher = softmax_values(&t_scaled);
            let log_p_teacher = log_softmax_values(&t_scaled);
            let entropy_term: f64 = p_teacher
                .iter()
                .zip(&log_p_teacher)
                .map(|(p, lp)| p * lp)
                .sum();

            let s_scaled = tape.scale(student, 1.0 / t);
            let log_q = tape.log_softmax(s_scaled)?;
            let cross = tape.dot_const(log_q, &p_teacher)?;
            let neg_cross = tape.scale(cross, -(t * t));
            tape.add_const(neg_cross, &[t * t * entropy_term])
        }
    }
}

/// Differentiable student loss against constant teacher logits. The
/// teacher slice is only consulted when alpha > 0.
pub fn distill_loss(
    tape: &mut Tape,
    student: NodeId,
    teacher: &[f64],
    gold: usize,
    cfg: &DistillConfig,
) -> Result<NodeId> {
    cfg.validate()?;
    let n = tape.values(student).len();
    if gold >= n {
        return Err(Error::Contract(format!(
            "gold index {gold} out of range for {n} choices"
        )));
    }
    if cfg.alpha > 0.0 {
        if teacher.len() != n {
            return Err(Error::Contract(format!(
                "teacher logits length {} does not match student {n}",
                teacher.len()
            )));
        }
        if teacher.iter().any(|t| !t.is_finite()) {
            return Err(Error::Contract("teacher logits must be finite".into()));
        }
    }

    if cfg.alpha == 0.0 {
        hard_loss(tape, student, gold)
    } else if cfg.alpha == 1.0 {
        soft_loss(tape, student, teacher, cfg)
    } else {
        let hard = hard_loss(tape, student, gold)?;
        let soft = soft_loss(tape, student, teacher, cfg)?;
        let hard_scaled = tape.scale(hard, 1.0 - cfg.alpha);
        let soft_scaled = tape.scale(soft, cfg.alpha);
        tape.add(hard_scaled, soft_scaled)
    }
}

/// Loss value for fixed logit vectors (builds a throwaway tape).
pub fn distill_loss_value(
    student: &[f64],
    teacher: &[f64],
    gold: usize,
    cfg: &DistillConfig,
) -> Result<f64> {
    let mut tape = Tape::new();
    let s = tape.constant_vec(student.to_vec());
    let loss = distill_loss(&mut tape, s, teacher, gold, cfg)?;
    tape.scalar_value(loss)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(alpha: f64, soft: SoftLoss, t: f64) -> DistillConfig {
        DistillConfig {
            alpha,
            temperature: t,
            soft_loss: soft,
            ..DistillConfig::default()
        }
    }

    #[test]
    fn alpha_zero_is_plain_cross_entropy() {
        let student = [1.0, -0.5, 0.25, 2.0];
        let teacher = [9.0, 9.0, 9.0, 9.0];
        let loss =
            distill_loss_value(&student, &teacher, 2, &cfg(0.0, SoftLoss::Mse, 2.0)).unwrap();
        let ce = -log_softmax_values(&student)[2];
        assert_eq!(loss.to_bits(), ce.to_bits());
    }

    #[test]
    fn alpha_one_identical_logits_gives_zero_loss() {
        let logits = [0.5, -1.0, 2.0, 0.0];
        for soft in [SoftLoss::Mse, SoftLoss::Kld] {
            let loss = distill_loss_value(&logits, &logits, 0, &cfg(1.0, soft, 2.0)).unwrap();
            assert!(loss.abs() < 1e-12, "{soft}: {loss}");
        }
    }

    #[test]
    fn mixed_loss_matches_scalar_oracle() {
        // Independent scalar-math recomputation at alpha=0.5, T=2.
        let student = [1.0, 0.0, 0.0, 0.0];
        let teacher = [0.0, 1.0, 0.0, 0.0];
        let c = cfg(0.5, SoftLoss::Mse, 2.0);
        let got = distill_loss_value(&student, &teacher, 0, &c).unwrap();

        let max = 1.0_f64;
        let lse = max + student.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        let ce = lse - student[0];
        let mse: f64 = student
            .iter()
            .zip(&teacher)
            .map(|(s, t)| (s - t) * (s - t))
            .sum::<f64>()
            / 4.0;
        let expect = 0.5 * ce + 0.5 * mse;
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");

        let ck = cfg(0.5, SoftLoss::Kld, 2.0);
        let got_k = distill_loss_value(&student, &teacher, 0, &ck).unwrap();
        let p: Vec<f64> = softmax_values(&teacher.iter().map(|x| x / 2.0).collect::<Vec<_>>());
        let lq: Vec<f64> = log_softmax_values(&student.iter().map(|x| x / 2.0).collect::<Vec<_>>());
        let lp: Vec<f64> = log_softmax_values(&teacher.iter().map(|x| x / 2.0).collect::<Vec<_>>());
        let kl: f64 = p
            .iter()
            .zip(lp.iter().zip(&lq))
            .map(|(pi, (lpi, lqi))| pi * (lpi - lqi))
            .sum();
        let expect_k = 0.5 * ce + 0.5 * 4.0 * kl;
        assert!((got_k - expect_k).abs() < 1e-12, "{got_k} vs {expect_k}");
    }

    #[test]
    fn loss_is_linear_in_alpha() {
        let student = [0.7, -0.3, 1.1, 0.2];
        let teacher = [0.1, 0.9, -0.4, 0.6];
        for soft in [SoftLoss::Mse, SoftLoss::Kld] {
            let l0 = distill_loss_value(&student, &teacher, 1, &cfg(0.0, soft, 2.0)).unwrap();
            let l1 = distill_loss_value(&student, &teacher, 1, &cfg(1.0, soft, 2.0)).unwrap();
            for alpha in [0.1, 0.25, 0.5, 0.77, 0.9] {
                let l = distill_loss_value(&student, &teacher, 1, &cfg(alpha, soft, 2.0)).unwrap();
                assert!((l - ((1.0 - alpha) * l0 + alpha * l1)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kld_soft_loss_is_nonnegative_and_zero_iff_equal_softened() {
        let teacher = [1.0, 0.0, -1.0, 0.5];
        let equal =
            distill_loss_value(&teacher, &teacher, 0, &cfg(1.0, SoftLoss::Kld, 2.0)).unwrap();
        assert!(equal.abs() < 1e-12);
        // Shifting all student logits by a constant keeps the softened
        // distributions equal.
        let shifted: Vec<f64> = teacher.iter().map(|x| x + 3.0).collect();
        let shift =
            distill_loss_value(&shifted, &teacher, 0, &cfg(1.0, SoftLoss::Kld, 2.0)).unwrap();
        assert!(shift.abs() < 1e-12);
        let different = [2.0, 0.0, -1.0, 0.5];
        let diff =
            distill_loss_value(&different, &teacher, 0, &cfg(1.0, SoftLoss::Kld, 2.0)).unwrap();
        assert!(diff > 1e-12);
    }

    #[test]
    fn mse_soft_loss_is_nonnegative_and_zero_iff_identical() {
        let teacher = [1.0, 0.0, -1.0, 0.5];
        let equal =
            distill_loss_value(&teacher, &teacher, 0, &cfg(1.0, SoftLoss::Mse, 2.0)).unwrap();
        assert_eq!(equal, 0.0);
        let off = [1.0, 0.0, -1.0, 0.5001];
        let loss = distill_loss_value(&off, &teacher, 0, &cfg(1.0, SoftLoss::Mse, 2.0)).unwrap();
        assert!(loss > 0.0);
    }

    #[test]
    fn invalid_alpha_is_rejected_at_config_level() {
        let c = cfg(1.5, SoftLoss::Mse, 2.0);
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("[0,1]") && err.contains("1.5"), "{err}");
    }

    #[test]
    fn mse_temperature_variant_scales_logits() {
        let student = [2.0, 0.0, 0.0, 0.0];
        let teacher = [0.0, 0.0, 0.0, 0.0];
        let mut c = cfg(1.0, SoftLoss::Mse, 2.0);
        c.mse_use_temperature = true;
        let got = distill_loss_value(&student, &teacher, 0, &c).unwrap();
        // mean((s/T - t/T)^2) = mean((1,0,0,0)^2) = 0.25
        assert!((got - 0.25).abs() < 1e-15);
    }
}
