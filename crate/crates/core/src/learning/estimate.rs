use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::error::{Error, Result};
use crate::mdp::Kernel;

/// Empirical kernel from transition counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CountEstimate {
    n_states: usize,
    n_actions: usize,
    /// `counts[(x * n_actions + u) * n_states + y]`.
    counts: Vec<u64>,
    pub kernel: Kernel<f64>,
    /// Pairs never observed; their rows hold the uniform fallback.
    pub unvisited: Vec<(usize, usize)>,
}

impl CountEstimate {
    pub const FALLBACK: &'static str = "uniform";

    pub fn count(&self, x: usize, u: usize, y: usize) -> u64 {
        self.counts[(x * self.n_actions + u) * self.n_states + y]
    }

    pub fn visits(&self, x: usize, u: usize) -> u64 {
        (0..self.n_states).map(|y| self.count(x, u, y)).sum()
    }

    pub fn is_visited(&self, x: usize, u: usize) -> bool {
        self.visits(x, u) > 0
    }
}

/// `T_n(y | x, u) = #{i : x_{i-1} = x, u_{i-1} = u, x_i = y} / #{i : x_{i-1} = x, u_{i-1} = u}`.
pub fn estimate_counts(traj: &Trajectory, n_states: usize, n_actions: usize) -> Result<CountEstimate> {
    traj.validate(n_states, n_actions)?;
    let mut counts = vec![0u64; n_states * n_actions * n_states];
    for (x, u, y) in traj.transitions() {
        counts[(x * n_actions + u) * n_states + y] += 1;
    }
    let mut unvisited = Vec::new();
    let kernel = Kernel::from_fn(n_states, n_actions, |x, u| {
        let row = &counts[(x * n_actions + u) * n_states..(x * n_actions + u + 1) * n_states];
        let total: u64 = row.iter().sum();
        if total == 0 {
            unvisited.push((x, u));
            vec![1.0 / n_states as f64; n_states]
        } else {
            row.iter().map(|&c| c as f64 / total as f64).collect()
        }
    })?;
    Ok(CountEstimate { n_states, n_actions, counts, kernel, unvisited })
}

/// Shift dynamics on a cyclic state grid: `x' = G(x, u) + w (mod |X|)`, with
/// noise `w` taking integer offsets from a fixed grid. The map `w -> x'` is
/// invertible for each `(x, u)`, so every observed transition reveals its
/// noise sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftDynamics {
    pub n_states: usize,
    /// `target[x][u] = G(x, u)` as a state index.
    pub target: Vec<Vec<usize>>,
    /// Noise offsets, pairwise distinct modulo `n_states`.
    pub noise_grid: Vec<i64>,
}

impl ShiftDynamics {
    pub fn new(n_states: usize, target: Vec<Vec<usize>>, noise_grid: Vec<i64>) -> Result<Self> {
        if target.len() != n_states {
            return Err(Error::validation("target", format!("{} rows for {n_states} states", target.len())));
        }
        let n_actions = target.first().map_or(0, Vec::len);
        if n_actions == 0 {
            return Err(Error::validation("target[0]", "no actions"));
        }
        for (x, row) in target.iter().enumerate() {
            if row.len() != n_actions {
                return Err(Error::validation(format!("target[{x}]"), "ragged action rows"));
            }
            if let Some(u) = row.iter().position(|&g| g >= n_states) {
                return Err(Error::validation(format!("target[{x}][{u}]"), "state index out of range"));
            }
        }
        if noise_grid.is_empty() {
            return Err(Error::validation("noise_grid", "empty noise grid"));
        }
        for (i, &w) in noise_grid.iter().enumerate() {
            let wrapped = w.rem_euclid(n_states as i64);
            if noise_grid[..i].iter().any(|&v| v.rem_euclid(n_states as i64) == wrapped) {
                return Err(Error::validation(format!("noise_grid[{i}]"), "offset collides modulo the grid size"));
            }
        }
        Ok(Self { n_states, target, noise_grid })
    }

    pub fn n_actions(&self) -> usize {
        self.target[0].len()
    }

    fn next_state(&self, x: usize, u: usize, w: i64) -> usize {
        (self.target[x][u] as i64 + w).rem_euclid(self.n_states as i64) as usize
    }

    /// Index into the noise grid of the noise that moves `(x, u)` to `y`.
    fn invert(&self, x: usize, u: usize, y: usize) -> std::result::Result<usize, i64> {
        let n = self.n_states as i64;
        let r = (y as i64 - self.target[x][u] as i64).rem_euclid(n);
        self.noise_grid
            .iter()
            .position(|&w| w.rem_euclid(n) == r)
            .ok_or(if r > n / 2 { r - n } else { r })
    }

    /// Pushforward of a noise law through every `(x, u)`.
    pub fn kernel(&self, noise_law: &[f64]) -> Result<Kernel<f64>> {
        if noise_law.len() != self.noise_grid.len() {
            return Err(Error::Shape("noise law length differs from the noise grid".into()));
        }
        Kernel::from_fn(self.n_states, self.n_actions(), |x, u| {
            let mut row = vec![0.0; self.n_states];
            for (&w, &p) in self.noise_grid.iter().zip(noise_law) {
                row[self.next_state(x, u, w)] += p;
            }
            row
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseEstimate {
    /// Empirical law over `noise_grid`; uniform when there is no data.
    pub noise_law: Vec<f64>,
    pub samples: usize,
    pub kernel: Kernel<f64>,
}

/// Recovers the noise sample of each transition by inverting the dynamics,
/// then pushes the empirical noise law through every `(x, u)`, so all rows
/// are estimated from the pooled data.
pub fn estimate_noise_inversion(traj: &Trajectory, dynamics: &ShiftDynamics) -> Result<NoiseEstimate> {
    traj.validate(dynamics.n_states, dynamics.n_actions())?;
    let mut counts = vec![0u64; dynamics.noise_grid.len()];
    for (step, (x, u, y)) in traj.transitions().enumerate() {
        let w = dynamics.invert(x, u, y).map_err(|offset| Error::OffGrid { step, offset })?;
        counts[w] += 1;
    }
    let samples = traj.len();
    let noise_law: Vec<f64> = if samples == 0 {
        vec![1.0 / counts.len() as f64; counts.len()]
    } else {
        counts.iter().map(|&c| c as f64 / samples as f64).collect()
    };
    let kernel = dynamics.kernel(&noise_law)?;
    Ok(NoiseEstimate { noise_law, samples, kernel })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(states: Vec<usize>, actions: Vec<usize>) -> Trajectory {
        Trajectory { states, actions, seed: 0 }
    }

    #[test]
    fn single_state_trajectory() {
        let est = estimate_counts(&traj(vec![1; 6], vec![0; 5]), 3, 2).unwrap();
        assert_eq!(est.kernel.row(1, 0), &[0.0, 1.0, 0.0]);
        assert_eq!(est.unvisited, vec![(0, 0), (0, 1), (1, 1), (2, 0), (2, 1)]);
        assert_eq!(est.kernel.row(0, 0), &[1.0 / 3.0; 3]);
        assert_eq!(est.visits(1, 0), 5);
    }

    #[test]
    fn prefix_counts_are_stable() {
        let t = traj(vec![0, 1, 0, 0, 1, 1, 0], vec![0, 1, 0, 1, 1, 0]);
        let short = estimate_counts(&t.prefix(3), 2, 2).unwrap();
        let long = estimate_counts(&t, 2, 2).unwrap();
        for (x, u, y) in t.prefix(3).transitions() {
            assert!(long.count(x, u, y) >= short.count(x, u, y));
        }
        let recount: u64 = (0..2).flat_map(|x| (0..2).map(move |u| (x, u))).map(|(x, u)| long.visits(x, u)).sum();
        assert_eq!(recount, 6);
    }

    #[test]
    fn noiseless_inversion_is_deterministic_kernel() {
        let dyns = ShiftDynamics::new(3, vec![vec![1, 2], vec![2, 0], vec![0, 1]], vec![0]).unwrap();
        let t = traj(vec![0, 1, 0, 2, 0], vec![0, 1, 1, 0]);
        let est = estimate_noise_inversion(&t, &dyns).unwrap();
        assert_eq!(est.noise_law, vec![1.0]);
        assert_eq!(est.kernel.row(2, 1), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn two_point_noise_is_shifted_everywhere() {
        let dyns = ShiftDynamics::new(4, vec![vec![0], vec![1], vec![2], vec![3]], vec![-1, 1]).unwrap();
        // residuals: +1, -1, +1, +1
        let t = traj(vec![0, 1, 0, 1, 2], vec![0; 4]);
        let est = estimate_noise_inversion(&t, &dyns).unwrap();
        assert_eq!(est.noise_law, vec![0.25, 0.75]);
        for x in 0..4 {
            let row = est.kernel.row(x, 0);
            assert_eq!(row[(x + 3) % 4], 0.25);
            assert_eq!(row[(x + 1) % 4], 0.75);
        }
    }

    #[test]
    fn off_grid_residual_names_step() {
        let dyns = ShiftDynamics::new(5, (0..5).map(|x| vec![x]).collect(), vec![-1, 0, 1]).unwrap();
        let t = traj(vec![0, 1, 3], vec![0, 0]);
        match estimate_noise_inversion(&t, &dyns) {
            Err(Error::OffGrid { step, offset }) => assert_eq!((step, offset), (1, 2)),
            other => panic!("{other:?}"),
        }
        assert!(ShiftDynamics::new(3, vec![vec![0]; 3], vec![-1, 2]).is_err());
    }
}
