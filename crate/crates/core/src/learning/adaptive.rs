use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{estimate_counts, estimate_noise_inversion, Controller, Schedule, ShiftDynamics, Simulator};
use crate::dp::{evaluate_policy, solve_acoe, AcoeOptions};
use crate::error::{Error, Result};
use crate::mdp::{Distribution, Kernel, StationaryPolicy};
use crate::metrics::{bl, tv};
use crate::FiniteMdp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Counts,
    NoiseInversion(ShiftDynamics),
    /// Uses the true kernel; isolates the effect of the schedule.
    Truth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exploration {
    /// `eps_k = 1/k` during block `k`.
    InverseBlock,
    Constant(f64),
}

impl Exploration {
    fn epsilon(&self, k: usize) -> f64 {
        match *self {
            Exploration::InverseBlock => 1.0 / k as f64,
            Exploration::Constant(eps) => eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    pub schedule: Schedule,
    pub estimator: Estimator,
    pub exploration: Exploration,
    pub k_max: usize,
    pub seed: u64,
    pub initial_state: usize,
    pub acoe: AcoeOptions,
}

impl AdaptiveConfig {
    pub fn new(estimator: Estimator, k_max: usize, seed: u64) -> Self {
        Self {
            schedule: Schedule::Factorial,
            estimator,
            exploration: Exploration::InverseBlock,
            k_max,
            seed,
            initial_state: 0,
            acoe: AcoeOptions::default(),
        }
    }
}

/// Diagnostics at time `n_k`, when the policy for block `k + 1` is designed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveRow {
    pub k: usize,
    pub n_k: u64,
    /// `sup` over observed `(x, u)` of TV(estimate, truth).
    pub sup_tv_error: f64,
    /// Same in the bounded-Lipschitz metric.
    pub bl_error: f64,
    /// Average cost on the true model of the policy designed at `n_k`.
    pub j_applied_block: f64,
    /// `(1/n_k) sum_{t < n_k} c(x_t, u_t)` along the realized path.
    pub running_average: f64,
    pub unvisited_pairs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveSeries {
    pub rows: Vec<AdaptiveRow>,
    pub j_star_true: f64,
    pub policies: Vec<StationaryPolicy>,
}

impl AdaptiveSeries {
    pub fn final_gap(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| (r.running_average - self.j_star_true).abs())
    }
}

struct Estimate {
    kernel: Kernel<f64>,
    /// Pairs whose row was fitted to data (all pairs for pooled estimators).
    observed: Vec<bool>,
    unvisited: usize,
}

fn estimate(truth: &FiniteMdp, estimator: &Estimator, traj: &super::Trajectory) -> Result<Estimate> {
    let (nx, nu) = (truth.n_states(), truth.n_actions());
    match estimator {
        Estimator::Counts => {
            let est = estimate_counts(traj, nx, nu)?;
            let mut observed = vec![true; nx * nu];
            for &(x, u) in &est.unvisited {
                observed[x * nu + u] = false;
            }
            Ok(Estimate { unvisited: est.unvisited.len(), kernel: est.kernel, observed })
        }
        Estimator::NoiseInversion(dynamics) => {
            if dynamics.n_states != nx || dynamics.n_actions() != nu {
                return Err(Error::Shape("dynamics shape differs from the true model".into()));
            }
            let est = estimate_noise_inversion(traj, dynamics)?;
            let seen = est.samples > 0;
            Ok(Estimate { kernel: est.kernel, observed: vec![seen; nx * nu], unvisited: if seen { 0 } else { nx * nu } })
        }
        Estimator::Truth => Ok(Estimate { kernel: truth.kernel().clone(), observed: vec![true; nx * nu], unvisited: 0 }),
    }
}

/// Solves the estimated model. Early estimates can contain deterministic
/// cycles on which relative value iteration oscillates; in that case the
/// solve is repeated on the lazy chain `(I + T) / 2`, which has the same
/// average costs and optimal policies.
fn plan(model: &FiniteMdp, options: &AcoeOptions) -> Result<StationaryPolicy> {
    let options = options.overridden();
    match solve_acoe(model, &options) {
        Ok(sol) => Ok(sol.policy),
        Err(Error::Convergence { .. }) => {
            let k = model.kernel();
            let lazy = Kernel::from_fn(model.n_states(), model.n_actions(), |x, u| {
                k.row(x, u).iter().enumerate().map(|(y, &p)| 0.5 * p + if y == x { 0.5 } else { 0.0 }).collect()
            })?;
            Ok(solve_acoe(&model.with_kernel(lazy)?, &options)?.policy)
        }
        Err(e) => Err(e),
    }
}

/// Certainty-equivalent adaptive control: at each `n_k` the kernel is
/// re-estimated from all data so far, the estimate is solved, and the
/// resulting policy (with `eps_{k+1}`-uniform exploration) drives the true
/// system until `n_{k+1}`.
pub fn adaptive_run(truth: &FiniteMdp, config: &AdaptiveConfig) -> Result<AdaptiveSeries> {
    config.schedule.validate(config.k_max)?;
    if config.initial_state >= truth.n_states() {
        return Err(Error::validation("initial_state", "out of range"));
    }
    let true_solution = solve_acoe(truth, &config.acoe)?;
    let coords = truth.states().coords();
    let (nx, nu) = (truth.n_states(), truth.n_actions());

    let mut sim = Simulator::new(truth, &Distribution::point_mass(nx, config.initial_state), config.seed)?;
    let mut rows = Vec::with_capacity(config.k_max);
    let mut policies = Vec::with_capacity(config.k_max);

    let initial = estimate(truth, &config.estimator, sim.trajectory())?;
    let mut policy = plan(&truth.with_kernel(initial.kernel)?, &config.acoe).map_err(|e| wrap(0, e))?;

    for k in 1..=config.k_max {
        let steps = config.schedule.block_length(k) as usize;
        let controller = Controller::EpsilonGreedy { policy: policy.clone(), epsilon: config.exploration.epsilon(k) };
        sim.run_block(k as u64, &controller, steps, |_, _| {})?;

        let est = estimate(truth, &config.estimator, sim.trajectory()).map_err(|e| wrap(k, e))?;
        let mut sup_tv: f64 = 0.0;
        let mut sup_bl: f64 = 0.0;
        for x in 0..nx {
            for u in 0..nu {
                if !est.observed[x * nu + u] {
                    continue;
                }
                let (a, b) = (est.kernel.row(x, u), truth.kernel().row(x, u));
                sup_tv = sup_tv.max(tv(a, b));
                sup_bl = sup_bl.max(bl(a, b, coords)?);
            }
        }
        let unvisited = est.unvisited;
        policy = plan(&truth.with_kernel(est.kernel)?, &config.acoe).map_err(|e| wrap(k, e))?;
        let applied = evaluate_policy(truth, &policy).map_err(|e| wrap(k, e))?;
        rows.push(AdaptiveRow {
            k,
            n_k: config.schedule.cumulative(k),
            sup_tv_error: sup_tv,
            bl_error: sup_bl,
            j_applied_block: applied.j,
            running_average: sim.running_average(),
            unvisited_pairs: unvisited,
        });
        policies.push(policy.clone());
    }
    Ok(AdaptiveSeries { rows, j_star_true: true_solution.j_star, policies })
}

fn wrap(block: usize, source: Error) -> Error {
    Error::Block { block, source: Box::new(source) }
}

/// CSV with columns
/// `k,n_k,sup_tv_error,bl_error,j_applied_block,running_average,unvisited_pairs`.
pub fn write_series_csv<W: Write>(rows: &[AdaptiveRow], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush().map_err(|source| Error::Io { path: "<csv>".into(), source })?;
    Ok(())
}
