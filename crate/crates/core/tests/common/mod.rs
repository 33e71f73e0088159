#![allow(dead_code)]

use avgcost::mdp::{CostFn, Kernel, Space};
use avgcost::FiniteMdp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random probability vector with every entry at least `floor`.
pub fn random_row(rng: &mut impl Rng, n: usize, floor: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-3).collect();
    let total: f64 = w.iter().sum();
    let free = 1.0 - floor * n as f64;
    w.iter().map(|&wi| floor + free * wi / total).collect()
}

/// Random row where each entry is zeroed with probability `sparsity`
/// (at least one entry stays positive).
pub fn sparse_row(rng: &mut impl Rng, n: usize, sparsity: f64) -> Vec<f64> {
    let keep = rng.gen_range(0..n);
    let w: Vec<f64> = (0..n)
        .map(|y| if y != keep && rng.gen::<f64>() < sparsity { 0.0 } else { rng.gen::<f64>() + 1e-3 })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|&wi| wi / total).collect()
}

pub fn model_from_rows(n_states: usize, n_actions: usize, row: impl FnMut(usize, usize) -> Vec<f64>, cost: impl FnMut(usize, usize) -> f64) -> FiniteMdp {
    let kernel = Kernel::from_fn(n_states, n_actions, row).unwrap();
    let cost = CostFn::from_fn(n_states, n_actions, cost).unwrap();
    FiniteMdp::new(Space::indexed(n_states).unwrap(), Space::indexed(n_actions).unwrap(), kernel, cost).unwrap()
}

/// `n_states x n_actions` model with kernel entries `>= floor` and costs in `[0, 1)`.
pub fn random_mdp(seed: u64, n_states: usize, n_actions: usize, floor: f64) -> FiniteMdp {
    let mut r = rng(seed);
    let rows: Vec<Vec<f64>> = (0..n_states * n_actions).map(|_| random_row(&mut r, n_states, floor)).collect();
    let costs: Vec<f64> = (0..n_states * n_actions).map(|_| r.gen()).collect();
    model_from_rows(n_states, n_actions, |x, u| rows[x * n_actions + u].clone(), |x, u| costs[x * n_actions + u])
}

pub fn sparse_mdp(seed: u64, n_states: usize, n_actions: usize, sparsity: f64) -> FiniteMdp {
    let mut r = rng(seed);
    let rows: Vec<Vec<f64>> = (0..n_states * n_actions).map(|_| sparse_row(&mut r, n_states, sparsity)).collect();
    let costs: Vec<f64> = (0..n_states * n_actions).map(|_| r.gen()).collect();
    model_from_rows(n_states, n_actions, |x, u| rows[x * n_actions + u].clone(), |x, u| costs[x * n_actions + u])
}
