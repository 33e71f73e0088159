mod common;

use avgcost::mdp::{policy_kernel, span, t_step_kernel, CostFn, Kernel, Space};
use avgcost::{Error, FiniteMdp, StationaryPolicy};
use common::random_mdp;

fn stay_swap() -> FiniteMdp {
    let kernel = Kernel::new(vec![
        vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        vec![vec![0.0, 1.0], vec![1.0, 0.0]],
    ])
    .unwrap();
    let cost = CostFn::new(vec![vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
    FiniteMdp::new(Space::indexed(2).unwrap(), Space::indexed(2).unwrap(), kernel, cost).unwrap()
}

#[test]
fn policy_kernel_selects_rows() {
    let mdp = stay_swap();
    let swap = policy_kernel(&mdp, &StationaryPolicy::constant(2, 1)).unwrap();
    assert_eq!(swap.to_rows(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    let stay = policy_kernel(&mdp, &StationaryPolicy::constant(2, 0)).unwrap();
    assert_eq!(stay.to_rows(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
}

#[test]
fn policy_kernel_rows_are_distributions() {
    for seed in 0..20 {
        let mdp = random_mdp(seed, 4, 3, 0.0);
        for policy in mdp.enumerate_policies(100).unwrap() {
            for row in policy_kernel(&mdp, &policy).unwrap().rows() {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn swap_squared_is_identity() {
    let p = t_step_kernel(&stay_swap(), &StationaryPolicy::constant(2, 1), 2).unwrap();
    assert_eq!(p.to_rows(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
}

#[test]
fn t_step_matches_naive_products() {
    let mdp = random_mdp(17, 3, 2, 0.0);
    let policy = StationaryPolicy::new(vec![1, 0, 1], 2).unwrap();
    let one = policy_kernel(&mdp, &policy).unwrap();
    let mut naive = one.clone();
    for _ in 1..4 {
        naive = naive.matmul(&one);
    }
    let fast = t_step_kernel(&mdp, &policy, 4).unwrap();
    for (a, b) in fast.rows().zip(naive.rows()) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}

#[test]
fn span_examples() {
    assert_eq!(span(&[3.0, 3.0, 3.0]), 0.0);
    assert_eq!(span(&[0.0, 1.0]), 1.0);
    assert_eq!(span(&[-2.0, 5.0, 1.0]), 7.0);
}

#[test]
fn loader_reports_first_bad_row() {
    let text = r#"{"states": {"labels": ["a", "b"], "coords": [0, 1]},
        "actions": {"labels": ["u"], "coords": [0]},
        "kernel": [[[0.5, 0.5]], [[0.7, 0.2]]], "cost": [[0], [1]]}"#;
    match FiniteMdp::from_json_str(text) {
        Err(Error::Validation { path, .. }) => assert_eq!(path, "kernel[1][0]"),
        other => panic!("{other:?}"),
    }
    let text = text.replace("[[0.7, 0.2]]", "[[0.7, 0.3]]").replace("[[0], [1]]", "[[0], [1, 2]]");
    assert!(FiniteMdp::from_json_str(&text).is_err());
}
