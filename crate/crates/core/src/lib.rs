//! Uplink sum-rates of cloud radio access networks with finite-capacity
//! backhaul: quantized compute-and-forward (QCoF), its joint-decompression
//! variant (JQCoF), multi-equation compute-and-forward, successive
//! Wyner-Ziv compression and the cut-set bound.
//!
//! All rates are in bits per real channel use. `snr` is linear everywhere in
//! the library; only the CLI speaks dB.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod channel;
pub mod error;
pub mod experiments;
pub mod jqcof;
pub mod lattice;
pub mod numerics;
pub mod qcof;

pub use baselines::{cof_multi_equation, swz_evaluate, swz_sum_rate, CofEvaluation, SwzEvaluation};
pub use channel::{cutset_sum_rate, receiver_cut, sample_channel, Channel, SearchMethod, SystemConfig};
pub use error::{Error, Result};
pub use experiments::{eval_channel, eval_single, run_sweep, Scheme, SweepAxis, SweepResult, SweepSpec};
pub use jqcof::{jqcof_evaluate, jqcof_optimize, waterfill, JqcofEvaluation, Waterfill};
pub use lattice::{CoefficientVector, EquationMatrix};
pub use numerics::Matrix;
pub use qcof::{computational_rate, qcof_evaluate, qcof_optimize, QcofEvaluation};
