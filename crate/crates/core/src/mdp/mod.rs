//! Finite average-cost MDP data model.
//!
//! A [`FiniteMdp`] bundles state and action spaces (each with a scalar
//! coordinate per element, used by the bounded-Lipschitz metric), a
//! transition [`Kernel`] indexed `(state, action) -> next-state law`, and a
//! stage [`CostFn`]. Everything is immutable once built; rows are
//! renormalized once at construction and never repaired afterwards.

mod io;

pub use io::{ModelFile, PolicyFile, SpaceFile};
pub(crate) use io::{parse_json, read_file};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_probability_row, StochasticMatrix};
use crate::scalar::Scalar;

/// Labelled points with one real coordinate each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Space {
    labels: Vec<String>,
    coords: Vec<f64>,
}

pub type StateSpace = Space;
pub type ActionSpace = Space;

impl Space {
    pub fn new(labels: Vec<String>, coords: Vec<f64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::validation("labels", "space must have at least one element"));
        }
        if labels.len() != coords.len() {
            return Err(Error::validation(
                "coords",
                format!("{} coords for {} labels", coords.len(), labels.len()),
            ));
        }
        for (i, label) in labels.iter().enumerate() {
            if labels[..i].contains(label) {
                return Err(Error::validation(format!("labels[{i}]"), format!("duplicate label {label:?}")));
            }
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::validation(format!("coords[{i}]"), "coordinate is not finite"));
        }
        Ok(Self { labels, coords })
    }

    /// Space whose labels are the formatted coordinates.
    pub fn from_coords(coords: Vec<f64>) -> Result<Self> {
        let labels = coords.iter().map(|c| format!("{c}")).collect();
        Self::new(labels, coords)
    }

    /// `n` points labelled `0..n` at integer coordinates.
    pub fn indexed(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| i.to_string()).collect(), (0..n).map(|i| i as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Probability vector over a finite set.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<S> {
    weights: Vec<S>,
}

impl<S: Scalar> Distribution<S> {
    pub fn new(weights: Vec<S>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::validation("weights", "empty distribution"));
        }
        check_probability_row(&weights, "weights")?;
        Ok(Self { weights: renormalize(weights) })
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        assert!(at < n, "point mass index out of range");
        let mut weights = vec![S::zero(); n];
        weights[at] = S::one();
        Self { weights }
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0);
        Self { weights: vec![S::one() / S::from_usize_lossy(n); n] }
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

fn renormalize<S: Scalar>(mut row: Vec<S>) -> Vec<S> {
    let sum: S = row.iter().copied().sum();
    if sum != S::one() {
        for p in &mut row {
            *p = *p / sum;
        }
    }
    row
}

/// Controlled transition kernel: one next-state distribution per `(x, u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel<S> {
    n_states: usize,
    n_actions: usize,
    probs: Vec<S>,
}

impl<S: Scalar> Kernel<S> {
    /// `rows[x][u]` is the next-state law at `(x, u)`.
    pub fn new(rows: Vec<Vec<Vec<S>>>) -> Result<Self> {
        let n_states = rows.len();
        if n_states == 0 {
            return Err(Error::validation("kernel", "no states"));
        }
        let n_actions = rows[0].len();
        if n_actions == 0 {
            return Err(Error::validation("kernel[0]", "no actions"));
        }
        let mut probs = Vec::with_capacity(n_states * n_actions * n_states);
        for (x, per_action) in rows.into_iter().enumerate() {
            if per_action.len() != n_actions {
                return Err(Error::validation(
                    format!("kernel[{x}]"),
                    format!("{} actions, expected {n_actions}", per_action.len()),
                ));
            }
            for (u, row) in per_action.into_iter().enumerate() {
                if row.len() != n_states {
                    return Err(Error::validation(
                        format!("kernel[{x}][{u}]"),
                        format!("{} next states, expected {n_states}", row.len()),
                    ));
                }
                check_probability_row(&row, &format!("kernel[{x}][{u}]"))?;
                probs.extend(renormalize(row));
            }
        }
        Ok(Self { n_states, n_actions, probs })
    }

    /// Kernel whose law at `(x, u)` is `f(x, u)`.
    pub fn from_fn(n_states: usize, n_actions: usize, mut f: impl FnMut(usize, usize) -> Vec<S>) -> Result<Self> {
        let rows = (0..n_states).map(|x| (0..n_actions).map(|u| f(x, u)).collect()).collect();
        Self::new(rows)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, x: usize, u: usize) -> &[S] {
        let start = (x * self.n_actions + u) * self.n_states;
        &self.probs[start..start + self.n_states]
    }

    pub fn prob(&self, x: usize, u: usize, y: usize) -> S {
        self.row(x, u)[y]
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<S>>> {
        (0..self.n_states)
            .map(|x| (0..self.n_actions).map(|u| self.row(x, u).to_vec()).collect())
            .collect()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n_states == other.n_states && self.n_actions == other.n_actions
    }
}

/// Stage cost table `c(x, u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostFn<S> {
    n_actions: usize,
    values: Vec<S>,
}

impl<S: Scalar> CostFn<S> {
    pub fn new(rows: Vec<Vec<S>>) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::validation("cost", "empty cost table"));
        }
        let n_actions = rows[0].len();
        let mut values = Vec::with_capacity(rows.len() * n_actions);
        for (x, row) in rows.into_iter().enumerate() {
            if row.len() != n_actions {
                return Err(Error::validation(
                    format!("cost[{x}]"),
                    format!("{} actions, expected {n_actions}", row.len()),
                ));
            }
            if let Some(u) = row.iter().position(|c| !c.is_finite()) {
                return Err(Error::validation(format!("cost[{x}][{u}]"), "cost is not finite"));
            }
            values.extend(row);
        }
        Ok(Self { n_actions, values })
    }

    pub fn from_fn(n_states: usize, n_actions: usize, mut f: impl FnMut(usize, usize) -> S) -> Result<Self> {
        Self::new((0..n_states).map(|x| (0..n_actions).map(|u| f(x, u)).collect()).collect())
    }

    pub fn get(&self, x: usize, u: usize) -> S {
        self.values[x * self.n_actions + u]
    }

    pub fn n_states(&self) -> usize {
        self.values.len() / self.n_actions
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// `max |c(x, u)|`.
    pub fn sup_norm(&self) -> S {
        self.values.iter().fold(S::zero(), |m, c| m.max(c.abs()))
    }

    pub fn to_nested(&self) -> Vec<Vec<S>> {
        self.values.chunks(self.n_actions).map(<[S]>::to_vec).collect()
    }
}

/// Deterministic stationary policy: one action index per state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StationaryPolicy {
    choice: Vec<usize>,
}

impl StationaryPolicy {
    pub fn new(choice: Vec<usize>, n_actions: usize) -> Result<Self> {
        if choice.is_empty() {
            return Err(Error::validation("choice", "policy must cover at least one state"));
        }
        if let Some(x) = choice.iter().position(|&u| u >= n_actions) {
            return Err(Error::validation(
                format!("choice[{x}]"),
                format!("action {} out of range (have {n_actions})", choice[x]),
            ));
        }
        Ok(Self { choice })
    }

    pub fn constant(n_states: usize, action: usize) -> Self {
        Self { choice: vec![action; n_states] }
    }

    pub fn action(&self, x: usize) -> usize {
        self.choice[x]
    }

    pub fn choice(&self) -> &[usize] {
        &self.choice
    }

    pub fn len(&self) -> usize {
        self.choice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choice.is_empty()
    }
}

/// Bounded function on the states.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueVector<S> {
    values: Vec<S>,
}

impl<S: Scalar> ValueVector<S> {
    pub fn new(values: Vec<S>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("values[{i}]"), "value is not finite"));
        }
        Ok(Self { values })
    }

    pub(crate) fn from_vec_unchecked(values: Vec<S>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self { values: vec![S::zero(); n] }
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `sup v - inf v`.
    pub fn span(&self) -> S {
        span(&self.values)
    }
}

/// Span seminorm of a slice: `max - min`, zero for an empty slice.
pub fn span<S: Scalar>(v: &[S]) -> S {
    let Some(&first) = v.first() else { return S::zero() };
    let (lo, hi) = v.iter().fold((first, first), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    hi - lo
}

/// A finite controlled model: spaces, kernel and stage cost.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp<S> {
    states: StateSpace,
    actions: ActionSpace,
    kernel: Kernel<S>,
    cost: CostFn<S>,
}

impl<S: Scalar> FiniteMdp<S> {
    pub fn new(states: StateSpace, actions: ActionSpace, kernel: Kernel<S>, cost: CostFn<S>) -> Result<Self> {
        if kernel.n_states() != states.len() || kernel.n_actions() != actions.len() {
            return Err(Error::Shape(format!(
                "kernel is {}x{} but spaces are {}x{}",
                kernel.n_states(),
                kernel.n_actions(),
                states.len(),
                actions.len()
            )));
        }
        if cost.n_states() != states.len() || cost.n_actions() != actions.len() {
            return Err(Error::Shape(format!(
                "cost is {}x{} but spaces are {}x{}",
                cost.n_states(),
                cost.n_actions(),
                states.len(),
                actions.len()
            )));
        }
        Ok(Self { states, actions, kernel, cost })
    }

    pub fn states(&self) -> &StateSpace {
        &self.states
    }

    pub fn actions(&self) -> &ActionSpace {
        &self.actions
    }

    pub fn kernel(&self) -> &Kernel<S> {
        &self.kernel
    }

    pub fn cost(&self) -> &CostFn<S> {
        &self.cost
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    /// Same model with the kernel replaced.
    pub fn with_kernel(&self, kernel: Kernel<S>) -> Result<Self> {
        Self::new(self.states.clone(), self.actions.clone(), kernel, self.cost.clone())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n_states() == other.n_states() && self.n_actions() == other.n_actions()
    }

    pub fn check_policy(&self, policy: &StationaryPolicy) -> Result<()> {
        if policy.len() != self.n_states() {
            return Err(Error::Shape(format!(
                "policy covers {} states, model has {}",
                policy.len(),
                self.n_states()
            )));
        }
        if let Some(x) = policy.choice().iter().position(|&u| u >= self.n_actions()) {
            return Err(Error::Shape(format!("policy action at state {x} out of range")));
        }
        Ok(())
    }

    /// Per-state cost under a policy, `c(x, policy(x))`.
    pub fn policy_cost(&self, policy: &StationaryPolicy) -> Vec<S> {
        (0..self.n_states()).map(|x| self.cost.get(x, policy.action(x))).collect()
    }

    /// The number of deterministic stationary policies, `|U|^|X|`, or
    /// `None` on overflow.
    pub fn policy_count(&self) -> Option<usize> {
        let mut count: usize = 1;
        for _ in 0..self.n_states() {
            count = count.checked_mul(self.n_actions())?;
        }
        Some(count)
    }

    /// All deterministic stationary policies in lexicographic order, or a
    /// budget error when there are more than `cap`.
    pub fn enumerate_policies(&self, cap: usize) -> Result<PolicyEnumerator> {
        match self.policy_count() {
            Some(count) if count <= cap => Ok(PolicyEnumerator::new(self.n_states(), self.n_actions())),
            Some(count) => Err(Error::Budget { needed: count.to_string(), cap }),
            None => Err(Error::Budget {
                needed: format!("{}^{}", self.n_actions(), self.n_states()),
                cap,
            }),
        }
    }
}

/// Row-stochastic matrix `P(y | x) = T(y | x, policy(x))`.
pub fn policy_kernel<S: Scalar>(mdp: &FiniteMdp<S>, policy: &StationaryPolicy) -> Result<StochasticMatrix<S>> {
    mdp.check_policy(policy)?;
    let n = mdp.n_states();
    let mut data = Vec::with_capacity(n * n);
    for x in 0..n {
        data.extend_from_slice(mdp.kernel().row(x, policy.action(x)));
    }
    Ok(StochasticMatrix::from_flat_unchecked(n, data))
}

/// `t`-step transition matrix under a stationary policy, `t >= 1`.
pub fn t_step_kernel<S: Scalar>(
    mdp: &FiniteMdp<S>,
    policy: &StationaryPolicy,
    t: usize,
) -> Result<StochasticMatrix<S>> {
    if t == 0 {
        return Err(Error::validation("t", "step count must be at least 1"));
    }
    Ok(policy_kernel(mdp, policy)?.pow(t))
}

/// Mixed-radix counter over `{0..n_actions}^n_states`; the last state varies
/// fastest.
#[derive(Debug, Clone)]
pub struct PolicyEnumerator {
    n_actions: usize,
    next: Option<Vec<usize>>,
}

impl PolicyEnumerator {
    fn new(n_states: usize, n_actions: usize) -> Self {
        Self { n_actions, next: Some(vec![0; n_states]) }
    }
}

impl Iterator for PolicyEnumerator {
    type Item = StationaryPolicy;

    fn next(&mut self) -> Option<StationaryPolicy> {
        let current = self.next.take()?;
        let mut following = current.clone();
        let mut pos = following.len();
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            following[pos] += 1;
            if following[pos] < self.n_actions {
                self.next = Some(following);
                break;
            }
            following[pos] = 0;
        }
        Some(StationaryPolicy { choice: current })
    }
}
