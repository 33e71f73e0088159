//! Average-cost optimal control of finite Markov decision processes, with
//! tools for measuring how the optimal cost and the optimal policies react
//! when the transition kernel is perturbed or learned from data.
//!
//! The numerical core (`mdp`, `metrics`, `dp`, `perturbations`) is generic
//! over [`Scalar`] (`f32` or `f64`). Simulation, estimation and the
//! experiment runner work in `f64`; the aliases below name the `f64`
//! instantiations used throughout.

pub mod dp;
pub mod error;
pub mod experiments;
pub mod learning;
pub mod linalg;
pub mod lp;
pub mod mdp;
pub mod metrics;
pub mod perturbations;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Distribution = mdp::Distribution<f64>;
pub type Kernel = mdp::Kernel<f64>;
pub type CostFn = mdp::CostFn<f64>;
pub type FiniteMdp = mdp::FiniteMdp<f64>;
pub type ValueVector = mdp::ValueVector<f64>;
pub type StochasticMatrix = linalg::StochasticMatrix<f64>;
pub type AcoeSolution = dp::AcoeSolution<f64>;
pub type PolicyEvaluation = dp::PolicyEvaluation<f64>;
pub type PerturbationFamily = perturbations::PerturbationFamily<f64>;

pub type FiniteMdpF32 = mdp::FiniteMdp<f32>;

pub use mdp::{ActionSpace, StateSpace, StationaryPolicy};
