mod common;

use avgcost::linalg::StochasticMatrix;
use avgcost::mdp::{CostFn, Kernel, Space};
use avgcost::metrics::{
    bl, check_ergodicity, dobrushin_coefficient, kernel_distance, tv, Aggregation, DistanceMode, ErgodicityOptions,
    KernelDistance,
};
use avgcost::PerturbationFamily;
use avgcost::mdp::FiniteMdp;
use common::random_mdp;

#[test]
fn tv_examples() {
    assert_eq!(tv(&[0.2, 0.8], &[0.2, 0.8]), 0.0);
    assert_eq!(tv(&[0.5, 0.5, 0.0], &[0.0, 0.0, 1.0]), 2.0);
    // distinct atoms of a grid
    assert_eq!(tv(&[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0]), 2.0);
}

#[test]
fn bl_examples() {
    assert_eq!(bl(&[0.3, 0.7], &[0.3, 0.7], &[0.0, 1.0]).unwrap(), 0.0);
    let mut previous = f64::INFINITY;
    for n in 1..=20 {
        let h = 1.0 / n as f64;
        let d = bl(&[0.0, 1.0], &[1.0, 0.0], &[0.0, h]).unwrap();
        assert!(d <= h + 1e-15 && d < previous, "n = {n}: {d}");
        // two atoms at distance h: 2h / (2 + h)
        assert!((d - 2.0 * h / (2.0 + h)).abs() < 1e-12);
        previous = d;
    }
    let d: f64 = bl(&[0.0, 1.0], &[1.0, 0.0], &[-1.0, 1.0]).unwrap();
    assert!(d > 0.0 && d <= 2.0);
    assert!((d - 1.0).abs() < 1e-12);
}

#[test]
fn weak_not_tv_distances() {
    let family = PerturbationFamily::weak_not_tv(12);
    for n in 1..=12 {
        let (m, l) = (family.member(n).unwrap(), family.limit(n).unwrap());
        let coords = m.states().coords();
        let tv_sup = kernel_distance(m.kernel(), l.kernel(), DistanceMode::Tv, Aggregation::SupXu, coords).unwrap();
        let bl_sup = kernel_distance(m.kernel(), l.kernel(), DistanceMode::Bl, Aggregation::SupXu, coords).unwrap();
        assert_eq!(tv_sup.as_sup(), Some(2.0));
        assert!(bl_sup.as_sup().unwrap() <= 1.0 / n as f64);
    }
}

#[test]
fn sup_aggregation_is_max_of_table() {
    let a = random_mdp(3, 4, 3, 0.0);
    let b = random_mdp(4, 4, 3, 0.0);
    let coords = a.states().coords();
    for mode in [DistanceMode::Tv, DistanceMode::Bl] {
        let KernelDistance::Table(table) = kernel_distance(a.kernel(), b.kernel(), mode, Aggregation::Pointwise, coords).unwrap() else {
            panic!("table expected")
        };
        let max = table.iter().flatten().copied().fold(0.0, f64::max);
        let sup = kernel_distance(a.kernel(), b.kernel(), mode, Aggregation::SupXu, coords).unwrap();
        assert_eq!(sup.as_sup(), Some(max));
        let same = kernel_distance(a.kernel(), a.kernel(), mode, Aggregation::SupXu, coords).unwrap();
        assert_eq!(same.as_sup(), Some(0.0));
    }
}

#[test]
fn dobrushin_examples() {
    let constant = StochasticMatrix::from_rows(vec![vec![0.5, 0.0, 0.5]; 3]).unwrap();
    assert_eq!(dobrushin_coefficient(&constant), 0.0);
    assert_eq!(dobrushin_coefficient(&StochasticMatrix::<f64>::identity(4)), 1.0);
    let p = StochasticMatrix::<f64>::from_rows(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
    assert!((dobrushin_coefficient(&p) - 0.7).abs() < 1e-15);
}

#[test]
fn ergodicity_of_constant_and_identity_kernels() {
    let coin = PerturbationFamily::coin_vs_delta().member(1).unwrap();
    let report = check_ergodicity(&coin, &ErgodicityOptions::default()).unwrap();
    assert!(report.holds("f"));
    assert_eq!((report.t_star, report.dobrushin_beta), (1, 0.0));

    let identity = PerturbationFamily::drift_grid(3).limit(3).unwrap();
    let report = check_ergodicity(&identity, &ErgodicityOptions::default()).unwrap();
    assert!(!report.holds("f"));
    assert_eq!(report.dobrushin_beta, 1.0);
}

#[test]
fn dense_kernel_minorizes_at_one_step() {
    for seed in 0..10 {
        let mdp = random_mdp(seed, 4, 2, 0.05);
        let report = check_ergodicity(&mdp, &ErgodicityOptions::default()).unwrap();
        assert!(report.holds("b"));
        // column minima over every (x, u)
        let k = mdp.kernel();
        let mass: f64 = (0..4)
            .map(|y| (0..4).flat_map(|x| (0..2).map(move |u| (x, u))).map(|(x, u)| k.prob(x, u, y)).fold(1.0, f64::min))
            .sum();
        assert!(mass >= 0.05 * 4.0 - 1e-12);
        assert!((report.minorization_mass - mass).abs() < 1e-12);
    }
}

#[test]
fn f32_distances() {
    let kernel = Kernel::<f32>::from_fn(2, 1, |x, _| if x == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] }).unwrap();
    let cost = CostFn::<f32>::from_fn(2, 1, |_, _| 0.0).unwrap();
    let m = FiniteMdp::new(Space::indexed(2).unwrap(), Space::indexed(1).unwrap(), kernel, cost).unwrap();
    assert_eq!(tv::<f32>(m.kernel().row(0, 0), m.kernel().row(1, 0)), 2.0);
}
