//! launderlab: a desk-scale laboratory for measuring how benchmark
//! test-set knowledge leaks from a contaminated teacher into a student
//! through knowledge distillation on a clean intermediate dataset.
//!
//! The pipeline has three phases: placement (train a teacher directly
//! on benchmark test data), layering (distill a student on an
//! intermediate dataset using the teacher's logits), and integration
//! (score the student on the original benchmark). The student never
//! sees the test set; the lab measures how much of its benchmark
//! accuracy leaks through anyway.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod grad_check;
pub mod hash;
pub mod jsonl;
pub mod loss;
pub mod model;
pub mod optim;
pub mod pipeline;
pub mod results;
pub mod rng;
pub mod synth;
pub mod tape;
pub mod tensor;
pub mod train;
pub mod vocab;

pub use error::{Error, Result};
