//! Average-cost dynamic programming.
//!
//! * [`bellman_operator`]: `Tv(x) = min_u c(x,u) + sum_y v(y) T(y|x,u)`.
//! * [`finite_horizon`]: exact `t`-stage costs, either under a fixed policy
//!   (forward propagation of the state law) or optimal (backward recursion).
//! * [`evaluate_policy`]: invariant law, average cost and relative values of
//!   a stationary policy.
//! * [`solve_acoe`]: relative value iteration `v <- Tv - Tv(z)` started at
//!   `v = 0`, stopped when `sp(Tv - v) < tol`.
//! * [`brute_force_optimal`]: exhaustive search over stationary policies,
//!   kept as an independent check on the iterative solver.
//! * [`mismatch`]: cost of applying the policy designed for one model to
//!   another.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, solve_dense};
use crate::mdp::{policy_kernel, span, Distribution, FiniteMdp, StationaryPolicy, ValueVector};
use crate::metrics::{check_ergodicity, ErgodicityOptions, ErgodicityReport};
use crate::scalar::Scalar;

pub const DEFAULT_POLICY_CAP: usize = 1_000_000;

/// `(Tv, argmin)`, ties broken towards the lowest action index.
pub fn bellman_operator<S: Scalar>(mdp: &FiniteMdp<S>, v: &ValueVector<S>) -> (ValueVector<S>, StationaryPolicy) {
    assert_eq!(v.len(), mdp.n_states(), "value vector length");
    let (tv, choice) = bellman_raw(mdp, v.values());
    (
        ValueVector::from_vec_unchecked(tv),
        StationaryPolicy::new(choice, mdp.n_actions()).expect("argmin actions are in range"),
    )
}

fn bellman_raw<S: Scalar>(mdp: &FiniteMdp<S>, v: &[S]) -> (Vec<S>, Vec<usize>) {
    let kernel = mdp.kernel();
    let cost = mdp.cost();
    let mut out = Vec::with_capacity(mdp.n_states());
    let mut choice = Vec::with_capacity(mdp.n_states());
    for x in 0..mdp.n_states() {
        let mut best = S::infinity();
        let mut best_u = 0;
        for u in 0..mdp.n_actions() {
            let q = cost.get(x, u) + dot(kernel.row(x, u), v);
            if q < best {
                best = q;
                best_u = u;
            }
        }
        out.push(best);
        choice.push(best_u);
    }
    (out, choice)
}

/// Expected `t`-stage cost `sum_{i<t} E[c(X_i, U_i)]` from `initial_state`.
///
/// With a policy the state law is propagated forward; without one the
/// optimal (time-varying) cost is obtained by `t` backward Bellman steps.
pub fn finite_horizon<S: Scalar>(
    mdp: &FiniteMdp<S>,
    t: usize,
    policy: Option<&StationaryPolicy>,
    initial_state: usize,
) -> Result<S> {
    if initial_state >= mdp.n_states() {
        return Err(Error::Shape(format!("initial state {initial_state} out of range")));
    }
    finite_horizon_from(mdp, t, policy, &Distribution::point_mass(mdp.n_states(), initial_state))
}

/// [`finite_horizon`] from an initial distribution.
pub fn finite_horizon_from<S: Scalar>(
    mdp: &FiniteMdp<S>,
    t: usize,
    policy: Option<&StationaryPolicy>,
    initial: &Distribution<S>,
) -> Result<S> {
    if t == 0 {
        return Err(Error::validation("t", "horizon must be at least 1"));
    }
    if initial.len() != mdp.n_states() {
        return Err(Error::Shape("initial distribution length".into()));
    }
    match policy {
        Some(policy) => {
            let p = policy_kernel(mdp, policy)?;
            let c = mdp.policy_cost(policy);
            let mut mu = initial.weights().to_vec();
            let mut total = S::zero();
            for step in 0..t {
                total = total + dot(&mu, &c);
                if step + 1 < t {
                    mu = p.left_mul(&mu);
                }
            }
            Ok(total)
        }
        None => {
            let values = optimal_horizon_values(mdp, t);
            Ok(dot(initial.weights(), &values))
        }
    }
}

/// Optimal `t`-stage cost from every initial state (`T^t 0`).
pub fn optimal_horizon_values<S: Scalar>(mdp: &FiniteMdp<S>, t: usize) -> Vec<S> {
    let mut v = vec![S::zero(); mdp.n_states()];
    for _ in 0..t {
        v = bellman_raw(mdp, &v).0;
    }
    v
}

/// `t`-stage cost of a fixed policy from every initial state, by backward
/// recursion `V_{k+1} = c_policy + P V_k`.
pub fn policy_horizon_values<S: Scalar>(mdp: &FiniteMdp<S>, policy: &StationaryPolicy, t: usize) -> Result<Vec<S>> {
    let p = policy_kernel(mdp, policy)?;
    let c = mdp.policy_cost(policy);
    let mut v = vec![S::zero(); mdp.n_states()];
    for _ in 0..t {
        let pv = p.right_mul(&v);
        v = c.iter().zip(pv).map(|(&ci, x)| ci + x).collect();
    }
    Ok(v)
}

/// Long-run behaviour of a stationary policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEvaluation<S> {
    /// Average cost `sum_x pi(x) c(x, policy(x))`.
    pub j: S,
    /// Invariant law of the policy chain.
    pub pi: Distribution<S>,
    /// Relative values with `v_hat(anchor) = 0`, solving
    /// `j + v(x) = c(x, policy(x)) + sum_y v(y) P(y|x)`.
    pub v_hat: ValueVector<S>,
}

/// Evaluates a policy whose chain has a single closed class.
///
/// The invariant law comes from the stationary equations and the relative
/// values from the anchored fixed-point equations (anchor = state 0), both
/// solved directly, so periodic unichain policies are handled too.
pub fn evaluate_policy<S: Scalar>(mdp: &FiniteMdp<S>, policy: &StationaryPolicy) -> Result<PolicyEvaluation<S>> {
    let p = policy_kernel(mdp, policy)?;
    let pi = p.stationary_distribution()?;
    let c = mdp.policy_cost(policy);
    let j = dot(&pi, &c);

    let n = mdp.n_states();
    let anchor = 0;
    // unknowns: column 0 is j, column k >= 1 is v(state k) for states != anchor
    let col = |y: usize| if y < anchor { y + 1 } else { y };
    let mut a = vec![S::zero(); n * n];
    for x in 0..n {
        a[x * n] = S::one();
        if x != anchor {
            a[x * n + col(x)] = a[x * n + col(x)] + S::one();
        }
        for y in 0..n {
            if y != anchor {
                a[x * n + col(y)] = a[x * n + col(y)] - p.get(x, y);
            }
        }
    }
    let sol = solve_dense(a, c)?;
    let mut v = vec![S::zero(); n];
    for (y, slot) in v.iter_mut().enumerate() {
        if y != anchor {
            *slot = sol[col(y)];
        }
    }
    Ok(PolicyEvaluation {
        j,
        pi: Distribution::new(pi)?,
        v_hat: ValueVector::new(v)?,
    })
}

/// Whether [`solve_acoe`] must first certify the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certification {
    /// Run [`check_ergodicity`] and refuse to solve unless condition f holds.
    Require(ErgodicityOptions),
    /// Solve without a certificate; the caller takes responsibility.
    Override,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcoeOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub anchor: usize,
    pub certification: Certification,
}

impl Default for AcoeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
            anchor: 0,
            certification: Certification::Require(ErgodicityOptions::default()),
        }
    }
}

impl AcoeOptions {
    pub fn overridden(self) -> Self {
        Self { certification: Certification::Override, ..self }
    }
}

/// Solution of `j* + v*(x) = min_u [c(x,u) + sum_y v*(y) T(y|x,u)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AcoeSolution<S> {
    pub j_star: S,
    pub v_star: ValueVector<S>,
    pub policy: StationaryPolicy,
    /// `sp(T v* - v*)` at termination.
    pub residual: S,
    pub iterations: usize,
    pub certificate: Option<ErgodicityReport>,
}

/// Relative value iteration anchored at `options.anchor`.
pub fn solve_acoe<S: Scalar>(mdp: &FiniteMdp<S>, options: &AcoeOptions) -> Result<AcoeSolution<S>> {
    if options.anchor >= mdp.n_states() {
        return Err(Error::Shape(format!("anchor {} out of range", options.anchor)));
    }
    if options.tol.is_nan() || options.tol <= 0.0 {
        return Err(Error::validation("tol", "tolerance must be positive"));
    }
    let certificate = match options.certification {
        Certification::Require(erg) => {
            let report = check_ergodicity(mdp, &erg)?;
            if !report.holds("f") {
                return Err(Error::Precondition(format!(
                    "no ergodicity certificate: condition f fails for every t <= {}",
                    report.t_max
                )));
            }
            Some(report)
        }
        Certification::Override => None,
    };
    let tol = S::lit(options.tol);
    let z = options.anchor;
    let mut v = vec![S::zero(); mdp.n_states()];
    let mut residual = S::infinity();
    for iteration in 1..=options.max_iter {
        let (tv, choice) = bellman_raw(mdp, &v);
        let diff: Vec<S> = tv.iter().zip(&v).map(|(&a, &b)| a - b).collect();
        residual = span(&diff);
        if !residual.is_finite() {
            break;
        }
        if residual < tol {
            return Ok(AcoeSolution {
                j_star: tv[z] - v[z],
                v_star: ValueVector::new(v)?,
                policy: StationaryPolicy::new(choice, mdp.n_actions())?,
                residual,
                iterations: iteration,
                certificate,
            });
        }
        let shift = tv[z];
        v = tv.into_iter().map(|x| x - shift).collect();
    }
    Err(Error::Convergence { iterations: options.max_iter, residual: residual.to_f64_lossy() })
}

/// Minimum average cost over all deterministic stationary policies, with the
/// lexicographically smallest minimizer.
pub fn brute_force_optimal<S: Scalar>(mdp: &FiniteMdp<S>, cap: usize) -> Result<(S, StationaryPolicy)> {
    let mut best: Option<(S, StationaryPolicy)> = None;
    for policy in mdp.enumerate_policies(cap)? {
        let eval = evaluate_policy(mdp, &policy).map_err(|source| Error::Policy {
            policy: policy.choice().to_vec(),
            source: Box::new(source),
        })?;
        if best.as_ref().is_none_or(|(j, _)| eval.j < *j) {
            best = Some((eval.j, policy));
        }
    }
    Ok(best.expect("at least one policy"))
}

/// Outcome of designing on one model and running on another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchRecord {
    pub j_true_opt: f64,
    pub j_design_opt: f64,
    pub j_applied: f64,
    pub gap: f64,
    pub applied_policy: Vec<usize>,
    pub design_residual: f64,
}

/// Applies the ACOE policy of `design` (or `design_policy` when given) to
/// `truth` and reports the excess average cost over the true optimum.
pub fn mismatch<S: Scalar>(
    truth: &FiniteMdp<S>,
    design: &FiniteMdp<S>,
    options: &AcoeOptions,
    design_policy: Option<&StationaryPolicy>,
) -> Result<MismatchRecord> {
    if !truth.same_shape(design) {
        return Err(Error::Shape("true and design models differ in shape".into()));
    }
    let true_sol = solve_acoe(truth, options)?;
    let design_sol = solve_acoe(design, options)?;
    let applied = design_policy.unwrap_or(&design_sol.policy);
    let eval = evaluate_policy(truth, applied)?;
    // both sides by exact evaluation, so identical policies give a zero gap
    let j_true = evaluate_policy(truth, &true_sol.policy)?.j.to_f64_lossy();
    let j_applied = eval.j.to_f64_lossy();
    Ok(MismatchRecord {
        j_true_opt: j_true,
        j_design_opt: design_sol.j_star.to_f64_lossy(),
        j_applied,
        gap: j_applied - j_true,
        applied_policy: applied.choice().to_vec(),
        design_residual: design_sol.residual.to_f64_lossy(),
    })
}
