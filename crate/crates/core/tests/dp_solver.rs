mod common;

use avgcost::dp::{
    bellman_operator, brute_force_optimal, evaluate_policy, finite_horizon, mismatch, solve_acoe, AcoeOptions,
};
use avgcost::mdp::{CostFn, Kernel, Space};
use avgcost::PerturbationFamily;
use avgcost::{FiniteMdp, StationaryPolicy, ValueVector};
use common::random_mdp;

#[test]
fn bellman_on_zero_is_stage_minimum() {
    let mdp = random_mdp(5, 3, 2, 0.0);
    let (tv, policy) = bellman_operator(&mdp, &ValueVector::zeros(3));
    for x in 0..3 {
        let (c0, c1) = (mdp.cost().get(x, 0), mdp.cost().get(x, 1));
        assert_eq!(tv.values()[x], c0.min(c1));
        assert_eq!(policy.action(x), usize::from(c1 < c0));
    }
}

#[test]
fn bellman_with_identity_kernel_adds_cost() {
    let kernel = Kernel::from_fn(3, 1, |x, _| (0..3).map(|y| f64::from(u8::from(x == y))).collect()).unwrap();
    let cost = CostFn::new(vec![vec![0.5], vec![1.0], vec![2.0]]).unwrap();
    let mdp = FiniteMdp::new(Space::indexed(3).unwrap(), Space::indexed(1).unwrap(), kernel, cost).unwrap();
    let v = ValueVector::new(vec![1.0, -1.0, 3.0]).unwrap();
    assert_eq!(bellman_operator(&mdp, &v).0.values(), &[1.5, 0.0, 5.0]);
}

#[test]
fn bellman_matches_enumeration() {
    let mdp = random_mdp(8, 3, 2, 0.0);
    let v = vec![0.3, -1.2, 2.5];
    let (tv, _) = bellman_operator(&mdp, &ValueVector::new(v.clone()).unwrap());
    for x in 0..3 {
        let q = |u: usize| mdp.cost().get(x, u) + (0..3).map(|y| mdp.kernel().prob(x, u, y) * v[y]).sum::<f64>();
        assert!((tv.values()[x] - q(0).min(q(1))).abs() < 1e-15);
    }
}

#[test]
fn one_step_horizon_is_stage_cost() {
    let mdp = random_mdp(2, 4, 3, 0.0);
    let policy = StationaryPolicy::new(vec![2, 0, 1, 1], 3).unwrap();
    for x in 0..4 {
        assert_eq!(finite_horizon(&mdp, 1, Some(&policy), x).unwrap(), mdp.cost().get(x, policy.action(x)));
    }
}

#[test]
fn drift_grid_horizon_average() {
    let family = PerturbationFamily::drift_grid(4);
    let member = family.member(4).unwrap();
    let policy = StationaryPolicy::constant(member.n_states(), 0);
    let avg = finite_horizon(&member, 400, Some(&policy), 0).unwrap() / 400.0;
    assert!((avg - 1.0).abs() < 0.05, "{avg}");
    let limit = family.limit(4).unwrap();
    for t in [1, 10, 400] {
        assert_eq!(finite_horizon(&limit, t, Some(&policy), 0).unwrap(), 0.0);
    }
}

#[test]
fn swap_chain_evaluation() {
    let kernel = Kernel::from_fn(2, 1, |x, _| if x == 0 { vec![0.0, 1.0] } else { vec![1.0, 0.0] }).unwrap();
    let cost = CostFn::new(vec![vec![0.0], vec![1.0]]).unwrap();
    let mdp = FiniteMdp::new(Space::indexed(2).unwrap(), Space::indexed(1).unwrap(), kernel, cost).unwrap();
    let eval = evaluate_policy(&mdp, &StationaryPolicy::constant(2, 0)).unwrap();
    assert_eq!(eval.pi.weights(), &[0.5, 0.5]);
    assert_eq!(eval.j, 0.5);
}

#[test]
fn coin_policies_on_the_point_mass() {
    let family = PerturbationFamily::coin_vs_delta();
    let limit = family.limit(1).unwrap();
    let member = family.member(1).unwrap();
    assert_eq!(evaluate_policy(&limit, &family.fixture("gamma2", 1).unwrap()).unwrap().j, 1.0);
    assert_eq!(evaluate_policy(&limit, &family.fixture("gamma1", 1).unwrap()).unwrap().j, 0.0);
    for name in ["gamma1", "gamma2"] {
        assert_eq!(evaluate_policy(&member, &family.fixture(name, 1).unwrap()).unwrap().j, 0.0);
    }
    assert_eq!(solve_acoe(&member, &AcoeOptions::default()).unwrap().j_star, 0.0);
}

#[test]
fn evaluation_matches_long_horizon_average() {
    for seed in 0..5 {
        let mdp = random_mdp(100 + seed, 4, 2, 0.01);
        let policy = StationaryPolicy::new(vec![1, 0, 0, 1], 2).unwrap();
        let j = evaluate_policy(&mdp, &policy).unwrap().j;
        let avg = finite_horizon(&mdp, 10_000, Some(&policy), 0).unwrap() / 1e4;
        assert!((j - avg).abs() < 1e-3);
    }
}

#[test]
fn tv_counterexample_limit_optimum() {
    let limit = PerturbationFamily::tv_counterexample(8).limit(8).unwrap();
    let sol = solve_acoe(&limit, &AcoeOptions::default()).unwrap();
    assert_eq!(sol.j_star, 0.0);
    let zero = limit.states().coords().iter().position(|&c| c == 0.0).unwrap();
    assert!(sol.policy.action(zero) <= 1);
}

#[test]
fn brute_force_examples() {
    let single = random_mdp(1, 4, 1, 0.0);
    let (j, policy) = brute_force_optimal(&single, 10).unwrap();
    assert_eq!(j, evaluate_policy(&single, &policy).unwrap().j);

    // state 0 cost 1 must leave; state 1 cost 0.25 can stay forever
    let kernel = Kernel::new(vec![
        vec![vec![0.0, 1.0], vec![0.0, 1.0]],
        vec![vec![0.0, 1.0], vec![1.0, 0.0]],
    ])
    .unwrap();
    let cost = CostFn::new(vec![vec![1.0, 1.0], vec![0.25, 0.25]]).unwrap();
    let mdp = FiniteMdp::new(Space::indexed(2).unwrap(), Space::indexed(2).unwrap(), kernel, cost).unwrap();
    assert_eq!(brute_force_optimal(&mdp, 10).unwrap().0, 0.25);

    let mdp = random_mdp(44, 4, 3, 0.01);
    let (best, _) = brute_force_optimal(&mdp, 100).unwrap();
    for policy in mdp.enumerate_policies(100).unwrap() {
        assert!(best <= evaluate_policy(&mdp, &policy).unwrap().j);
    }
}

#[test]
fn mismatch_examples() {
    let options = AcoeOptions::default();
    let mdp = random_mdp(12, 4, 2, 0.02);
    assert_eq!(mismatch(&mdp, &mdp, &options, None).unwrap().gap, 0.0);

    let family = PerturbationFamily::tv_counterexample(16);
    for n in [2, 4, 8, 16] {
        let (member, limit) = (family.member(n).unwrap(), family.limit(n).unwrap());
        let fixture = family.fixture("gamma_star", n).unwrap();
        let forced = mismatch(&limit, &member, &options, Some(&fixture)).unwrap();
        assert_eq!((forced.j_applied, forced.gap), (3.0, 3.0));
        assert!(mismatch(&limit, &member, &options, None).unwrap().gap.abs() < 1e-9);
    }
}
