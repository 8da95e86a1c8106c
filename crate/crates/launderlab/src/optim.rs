//! Adaptive-moment optimizer with decoupled weight decay.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tensor::ParamStore;

#[derive(Debug, Clone)]
pub struct OptimizerState {
    first_moment: BTreeMap<String, Vec<f64>>,
    second_moment: BTreeMap<String, Vec<f64>>,
    step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl OptimizerState {
    pub fn new(params: &ParamStore, learning_rate: f64, weight_decay: f64) -> Self {
        let first_moment = params
            .iter()
            .map(|(n, t)| (n.clone(), vec![0.0; t.len()]))
            .collect();
        let second_moment = params
            .iter()
            .map(|(n, t)| (n.clone(), vec![0.0; t.len()]))
            .collect();
        OptimizerState {
            first_moment,
            second_moment,
            step_count: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One update. Decoupled weight decay shrinks each parameter by
    /// lr*wd before the bias-corrected adaptive step is applied.
    pub fn step(
        &mut self,
        params: &mut ParamStore,
        grads: &BTreeMap<String, Vec<f64>>,
    ) -> Result<()> {
        for name in params.names() {
            if !grads.contains_key(name) {
                return Err(Error::Contract(format!(
                    "missing gradient for parameter '{name}'"
                )));
            }
        }
        self.step_count += 1;
        let t = self.step_count;
        let bc1 = 1.0 - self.beta1.powi(t as i32);
        let bc2 = 1.0 - self.beta2.powi(t as i32);
        let decay = 1.0 - self.learning_rate * self.weight_decay;

        for (name, tensor) in params.iter_mut() {
            let g = &grads[name];
            let m = self
                .first_moment
                .get_mut(name)
                .expect("moment tracked per parameter");
            let v = self
                .second_moment
                .get_mut(name)
                .expect("moment tracked per parameter");
            debug_assert_eq!(g.len(), tensor.len(), "gradient shape drift for '{name}'");
            let p = tensor.values_mut();
            for i in 0..p.len() {
                p[i] *= decay;
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
                debug_assert!(p[i].is_finite(), "non-finite parameter after update");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn single_param(value: f64) -> ParamStore {
        let mut ps = ParamStore::new();
        ps.insert("p", Tensor::scalar(value)).unwrap();
        ps
    }

    fn grad_map(name: &str, g: Vec<f64>) -> BTreeMap<String, Vec<f64>> {
        let mut m = BTreeMap::new();
        m.insert(name.to_string(), g);
        m
    }

    #[test]
    fn zero_gradient_zero_decay_leaves_params_unchanged() {
        let mut ps = single_param(1.25);
        let mut opt = OptimizerState::new(&ps, 0.1, 0.0);
        opt.step(&mut ps, &grad_map("p", vec![0.0])).unwrap();
        assert_eq!(ps.get("p").unwrap().values(), &[1.25]);
        assert_eq!(opt.step_count(), 1);
    }

    #[test]
    fn first_step_reduces_to_signed_learning_rate() {
        // With bias correction the first update is lr * g / (|g| + eps),
        // i.e. a signed step of (almost exactly) the learning rate.
        let mut ps = single_param(1.0);
        let mut opt = OptimizerState::new(&ps, 0.1, 0.0);
        opt.step(&mut ps, &grad_map("p", vec![1.0])).unwrap();
        let p = ps.get("p").unwrap().values()[0];
        assert!((p - 0.9).abs() <= 1e-9, "p = {p}");
    }

    #[test]
    fn lr_zero_changes_nothing_but_the_step_counter() {
        let mut ps = single_param(0.7);
        let mut opt = OptimizerState::new(&ps, 0.0, 0.01);
        for _ in 0..10 {
            opt.step(&mut ps, &grad_map("p", vec![0.5])).unwrap();
        }
        assert_eq!(ps.get("p").unwrap().values(), &[0.7]);
        assert_eq!(opt.step_count(), 10);
    }

    #[test]
    fn missing_gradient_is_a_contract_error() {
        let mut ps = single_param(1.0);
        let mut opt = OptimizerState::new(&ps, 0.1, 0.0);
        let err = opt.step(&mut ps, &BTreeMap::new()).unwrap_err().to_string();
        assert!(err.contains("'p'"), "{err}");
    }

    #[test]
    fn identical_runs_are_bitwise_identical() {
        let run = || {
            let mut ps = single_param(1.0);
            let mut opt = OptimizerState::new(&ps, 0.05, 0.01);
            for i in 0..100 {
                let g = ((i % 7) as f64 - 3.0) * 0.1;
                opt.step(&mut ps, &grad_map("p", vec![g])).unwrap();
            }
            ps.get("p").unwrap().values()[0]
        };
        assert_eq!(run().to_bits(), run().to_bits());
    }

    #[test]
    fn weight_decay_applies_before_adaptive_step() {
        let mut ps = single_param(2.0);
        let mut opt = OptimizerState::new(&ps, 0.1, 0.5);
        opt.step(&mut ps, &grad_map("p", vec![0.0])).unwrap();
        // Zero gradient: only the decay multiplier acts.
        let p = ps.get("p").unwrap().values()[0];
        assert!((p - 2.0 * (1.0 - 0.1 * 0.5)).abs() < 1e-15);
    }
}
