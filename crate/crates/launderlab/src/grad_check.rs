//! Finite-difference verification of tape gradients.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::tape::{NodeId, Tape};
use crate::tensor::ParamStore;

/// Central-difference step used throughout.
pub const GRAD_CHECK_EPS: f64 = 1e-5;

type GradsByName = BTreeMap<String, Vec<f64>>;

/// Compares tape gradients against central differences at `probes`
/// randomly chosen parameter coordinates and returns the largest
/// relative error |g_tape - g_fd| / max(1e-8, |g_tape| + |g_fd|).
///
/// `forward` must deterministically build a scalar loss from the bound
/// parameter nodes.
pub fn grad_check<F>(
    forward: F,
    params: &ParamStore,
    probes: usize,
    rng: &mut RngState,
) -> Result<f64>
where
    F: Fn(&mut Tape, &BTreeMap<String, NodeId>) -> Result<NodeId>,
{
    if probes == 0 {
        return Err(Error::Contract(
            "grad_check needs at least one probe".into(),
        ));
    }
    if params.is_empty() {
        return Err(Error::Contract(
            "grad_check needs at least one parameter".into(),
        ));
    }

    let run = |ps: &ParamStore, want_grads: bool| -> Result<(f64, Option<GradsByName>)> {
        let mut tape = Tape::new();
        let mut binding = BTreeMap::new();
        for (name, tensor) in ps.iter() {
            binding.insert(name.clone(), tape.param(tensor));
        }
        let loss_node = forward(&mut tape, &binding)?;
        let loss = tape.scalar_value(loss_node)?;
        if !want_grads {
            return Ok((loss, None));
        }
        let grads = tape.backward(loss_node)?;
        let by_name = binding
            .iter()
            .map(|(name, &id)| {
                let len = ps.get(name).expect("bound parameter exists").len();
                (name.clone(), grads.get_or_zeros(id, len))
            })
            .collect();
        Ok((loss, Some(by_name)))
    };

    let (_, tape_grads) = run(params, true)?;
    let tape_grads = tape_grads.expect("gradients requested");

    let names: Vec<&String> = params.names().collect();
    let mut max_rel = 0.0_f64;
    for _ in 0..probes {
        let name = names[rng.range(names.len())];
        let len = params.get(name).expect("named parameter exists").len();
        let coord = rng.range(len);

        let mut plus = params.clone();
        plus.get_mut(name).unwrap().values_mut()[coord] += GRAD_CHECK_EPS;
        let mut minus = params.clone();
        minus.get_mut(name).unwrap().values_mut()[coord] -= GRAD_CHECK_EPS;

        let (f_plus, _) = run(&plus, false)?;
        let (f_minus, _) = run(&minus, false)?;
        let g_fd = (f_plus - f_minus) / (2.0 * GRAD_CHECK_EPS);
        let g_tape = tape_grads[name][coord];
        let rel = (g_tape - g_fd).abs() / f64::max(1e-8, g_tape.abs() + g_fd.abs());
        max_rel = max_rel.max(rel);
    }
    Ok(max_rel)
}
