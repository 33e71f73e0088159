//! Learning transition kernels from simulated data and re-planning on the
//! learned model.
//!
//! Randomness comes from ChaCha20 streams: the seed fixes the key, and each
//! simulation block draws actions and transitions from its own pair of
//! stream ids. A given `(seed, config)` therefore reproduces the same
//! trajectory bit for bit on every platform, and changing how one block
//! explores leaves the draws of every other block untouched.

mod adaptive;
mod estimate;
mod schedule;

pub use adaptive::{adaptive_run, write_series_csv, AdaptiveConfig, AdaptiveRow, AdaptiveSeries, Estimator, Exploration};
pub use estimate::{estimate_counts, estimate_noise_inversion, CountEstimate, NoiseEstimate, ShiftDynamics};
pub use schedule::Schedule;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Distribution, StationaryPolicy};
use crate::FiniteMdp;

const INITIAL_STREAM: u64 = u64::MAX;

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Inverse-CDF draw from a probability vector.
fn sample_index(weights: &[f64], u: f64) -> usize {
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = i;
        }
        cumulative += w;
        if u < cumulative {
            return i;
        }
    }
    last_positive
}

/// Observed states and actions; `actions.len() == states.len() - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub seed: u64,
}

impl Trajectory {
    pub fn transitions(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.actions.iter().enumerate().map(|(i, &u)| (self.states[i], u, self.states[i + 1]))
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// First `steps` transitions.
    pub fn prefix(&self, steps: usize) -> Trajectory {
        let steps = steps.min(self.actions.len());
        Trajectory { states: self.states[..=steps].to_vec(), actions: self.actions[..steps].to_vec(), seed: self.seed }
    }

    pub fn validate(&self, n_states: usize, n_actions: usize) -> Result<()> {
        if self.states.len() != self.actions.len() + 1 {
            return Err(Error::validation("trajectory", "expected one more state than actions"));
        }
        if let Some(i) = self.states.iter().position(|&x| x >= n_states) {
            return Err(Error::validation(format!("states[{i}]"), "state index out of range"));
        }
        if let Some(i) = self.actions.iter().position(|&u| u >= n_actions) {
            return Err(Error::validation(format!("actions[{i}]"), "action index out of range"));
        }
        Ok(())
    }
}

/// How actions are chosen during simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum Controller {
    Policy(StationaryPolicy),
    /// With probability `epsilon` a uniformly random action, else the policy.
    EpsilonGreedy { policy: StationaryPolicy, epsilon: f64 },
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub trajectory: Trajectory,
    /// `(T, (1/T) sum_{t<T} c(x_t, u_t))` every `stride` steps and at the end.
    pub running_average: Vec<(usize, f64)>,
}

/// Continuing simulation of one model, block by block.
pub(crate) struct Simulator<'a> {
    mdp: &'a FiniteMdp,
    seed: u64,
    trajectory: Trajectory,
    cost_sum: f64,
}

impl<'a> Simulator<'a> {
    pub(crate) fn new(mdp: &'a FiniteMdp, initial: &Distribution<f64>, seed: u64) -> Result<Self> {
        if initial.len() != mdp.n_states() {
            return Err(Error::Shape("initial distribution length".into()));
        }
        let x0 = sample_index(initial.weights(), stream_rng(seed, INITIAL_STREAM).gen::<f64>());
        Ok(Self { mdp, seed, trajectory: Trajectory { states: vec![x0], actions: Vec::new(), seed }, cost_sum: 0.0 })
    }

    pub(crate) fn run_block(
        &mut self,
        block: u64,
        controller: &Controller,
        steps: usize,
        mut on_step: impl FnMut(usize, f64),
    ) -> Result<()> {
        if let Controller::Policy(p) | Controller::EpsilonGreedy { policy: p, .. } = controller {
            self.mdp.check_policy(p)?;
        }
        let n_actions = self.mdp.n_actions();
        let mut action_rng = stream_rng(self.seed, 2 * block);
        let mut transition_rng = stream_rng(self.seed, 2 * block + 1);
        let mut x = *self.trajectory.states.last().expect("nonempty trajectory");
        for _ in 0..steps {
            let u = match controller {
                Controller::Policy(p) => p.action(x),
                Controller::Uniform => action_rng.gen_range(0..n_actions),
                Controller::EpsilonGreedy { policy, epsilon } => {
                    if *epsilon > 0.0 && action_rng.gen::<f64>() < *epsilon {
                        action_rng.gen_range(0..n_actions)
                    } else {
                        policy.action(x)
                    }
                }
            };
            self.cost_sum += self.mdp.cost().get(x, u);
            let next = sample_index(self.mdp.kernel().row(x, u), transition_rng.gen::<f64>());
            self.trajectory.actions.push(u);
            self.trajectory.states.push(next);
            x = next;
            on_step(self.trajectory.actions.len(), self.cost_sum);
        }
        Ok(())
    }

    pub(crate) fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub(crate) fn running_average(&self) -> f64 {
        let t = self.trajectory.actions.len();
        if t == 0 {
            0.0
        } else {
            self.cost_sum / t as f64
        }
    }

    pub(crate) fn into_trajectory(self) -> Trajectory {
        self.trajectory
    }
}

/// Simulates `horizon` steps from a state drawn from `initial`.
pub fn simulate(
    mdp: &FiniteMdp,
    controller: &Controller,
    horizon: usize,
    initial: &Distribution<f64>,
    seed: u64,
    stride: usize,
) -> Result<SimulationResult> {
    if horizon == 0 {
        return Err(Error::validation("horizon", "must be at least 1"));
    }
    let stride = stride.max(1);
    let mut sim = Simulator::new(mdp, initial, seed)?;
    let mut running_average = Vec::new();
    sim.run_block(0, controller, horizon, |t, total| {
        if t % stride == 0 || t == horizon {
            running_average.push((t, total / t as f64));
        }
    })?;
    Ok(SimulationResult { trajectory: sim.into_trajectory(), running_average })
}
