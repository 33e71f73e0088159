//! Perturbation families `n -> T_n` together with their limit models.
//!
//! Continuous-space examples are realized on the smallest grids that hold
//! every atom of the measures involved plus the cost breakpoints. When the
//! grid depends on `n`, [`PerturbationFamily::limit`] returns the limit
//! kernel realized on the grid of member `n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{CostFn, Distribution, FiniteMdp, Kernel, Space, StationaryPolicy};
use crate::metrics::{kernel_sup_distance, DistanceMode};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceClaim {
    Weak,
    /// Same as TV on a finite space.
    Setwise,
    Tv,
    None,
}

/// `eps_n = min(1, scale / n^power)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingRate {
    pub scale: f64,
    pub power: f64,
}

impl MixingRate {
    pub fn at(&self, n: usize) -> f64 {
        (self.scale / (n as f64).powf(self.power)).clamp(0.0, 1.0)
    }
}

impl Default for MixingRate {
    fn default() -> Self {
        Self { scale: 1.0, power: 1.0 }
    }
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
enum FamilyKind<S> {
    DriftGrid,
    CoinVsDelta,
    TvCounterexample,
    WeakNotTv,
    NoiseMixture {
        base: FiniteMdp<S>,
        contaminant: Distribution<S>,
        rate: MixingRate,
    },
}

/// Names of the built-in families, as accepted by [`PerturbationFamily::builtin`].
pub const BUILTIN_FAMILIES: [(&str, &str); 4] = [
    ("drift_grid", "T_n(.|x) = delta_{x+1/n}, T = delta_x on the grid k/n, cost min(|x|, 1)"),
    ("coin_vs_delta", "T_n = (delta_1 + delta_-1)/2, T = delta_0, cost (x-u)^2; fixtures gamma1, gamma2"),
    ("tv_counterexample", "states {-1,-1/n,0,1/n,1}, actions {0,1,2}, T = delta_0; fixture gamma_star"),
    ("weak_not_tv", "T_n = delta_{1/n}, T = delta_0 on {0} U {1/k}, cost min(|x|, 1)"),
];

#[derive(Debug, Clone)]
pub struct PerturbationFamily<S> {
    name: String,
    n_max: usize,
    claim: ConvergenceClaim,
    kind: FamilyKind<S>,
}

fn capped_abs(x: f64) -> f64 {
    x.abs().min(1.0)
}

fn point_mass<S: Scalar>(n: usize, at: usize) -> Vec<S> {
    Distribution::point_mass(n, at).weights().to_vec()
}

impl<S: Scalar> PerturbationFamily<S> {
    /// Deterministic drift `x -> x + 1/n` against the identity limit, on the
    /// grid `{k/n : k = 0..2n+1}` whose top state is absorbing at cost 1.
    pub fn drift_grid(n_max: usize) -> Self {
        Self { name: "drift_grid".into(), n_max, claim: ConvergenceClaim::Weak, kind: FamilyKind::DriftGrid }
    }

    /// Coin-flip kernel on `{-1, 1}` against the point mass at 0; the
    /// members do not depend on `n`.
    pub fn coin_vs_delta() -> Self {
        Self { name: "coin_vs_delta".into(), n_max: usize::MAX, claim: ConvergenceClaim::None, kind: FamilyKind::CoinVsDelta }
    }

    /// Three-action example whose hand-built optimal policy for `T_n` ignores
    /// the optimality equation at 0 and pays 3 per step under the limit.
    ///
    /// Members converge weakly but not in total variation: the atoms at
    /// `±1/n` stay at TV distance 2 from `delta_0`.
    pub fn tv_counterexample(n_max: usize) -> Self {
        Self {
            name: "tv_counterexample".into(),
            n_max,
            claim: ConvergenceClaim::Weak,
            kind: FamilyKind::TvCounterexample,
        }
    }

    /// Control-free `delta_{1/n}` against `delta_0` on `{0} U {1/k : k <= n_max}`.
    pub fn weak_not_tv(n_max: usize) -> Self {
        Self { name: "weak_not_tv".into(), n_max, claim: ConvergenceClaim::Weak, kind: FamilyKind::WeakNotTv }
    }

    /// `T_n(.|x,u) = (1 - eps_n) T(.|x,u) + eps_n * contaminant`.
    pub fn noise_mixture(base: FiniteMdp<S>, contaminant: Distribution<S>, rate: MixingRate) -> Result<Self> {
        if contaminant.len() != base.n_states() {
            return Err(Error::Shape("contaminant length differs from the state count".into()));
        }
        if !(rate.scale >= 0.0 && rate.power >= 0.0) {
            return Err(Error::validation("rate", "scale and power must be nonnegative"));
        }
        let claim = if rate.power > 0.0 || rate.scale == 0.0 { ConvergenceClaim::Tv } else { ConvergenceClaim::None };
        Ok(Self {
            name: "noise_mixture".into(),
            n_max: usize::MAX,
            claim,
            kind: FamilyKind::NoiseMixture { base, contaminant, rate },
        })
    }

    /// Looks up a built-in family by name.
    pub fn builtin(name: &str, n_max: usize) -> Result<Self> {
        Ok(match name {
            "drift_grid" => Self::drift_grid(n_max),
            "coin_vs_delta" => Self::coin_vs_delta(),
            "tv_counterexample" => Self::tv_counterexample(n_max),
            "weak_not_tv" => Self::weak_not_tv(n_max),
            other => return Err(Error::validation("family", format!("unknown family {other:?}"))),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn convergence_claim(&self) -> ConvergenceClaim {
        self.claim
    }

    fn check_n(&self, n: usize) -> Result<()> {
        let min = match self.kind {
            FamilyKind::TvCounterexample => 2,
            _ => 1,
        };
        if n < min || n > self.n_max {
            return Err(Error::validation("n", format!("{} requires {min} <= n <= {}, got {n}", self.name, self.n_max)));
        }
        Ok(())
    }

    /// The perturbed model `T_n`.
    pub fn member(&self, n: usize) -> Result<FiniteMdp<S>> {
        self.check_n(n)?;
        match &self.kind {
            FamilyKind::DriftGrid => {
                let (states, cost) = drift_grid_space::<S>(n)?;
                let size = states.len();
                let kernel = Kernel::from_fn(size, 1, |x, _| point_mass(size, (x + 1).min(size - 1)))?;
                FiniteMdp::new(states, Space::indexed(1)?, kernel, cost)
            }
            FamilyKind::CoinVsDelta => {
                let kernel = Kernel::from_fn(3, 3, |_, _| vec![S::lit(0.5), S::zero(), S::lit(0.5)])?;
                coin_model(kernel)
            }
            FamilyKind::TvCounterexample => {
                let half = S::lit(0.5);
                let third = S::lit(1.0 / 3.0);
                let kernel = Kernel::from_fn(5, 3, |x, _| {
                    if x == 2 {
                        vec![S::zero(), third, third, third, S::zero()]
                    } else {
                        vec![S::zero(), half, S::zero(), half, S::zero()]
                    }
                })?;
                tv_counterexample_model(n, kernel)
            }
            FamilyKind::WeakNotTv => {
                let (states, cost) = weak_not_tv_space::<S>(self.n_max)?;
                let size = states.len();
                let kernel = Kernel::from_fn(size, 1, |_, _| point_mass(size, n))?;
                FiniteMdp::new(states, Space::indexed(1)?, kernel, cost)
            }
            FamilyKind::NoiseMixture { base, contaminant, rate } => {
                if rate.at(n) == 0.0 {
                    return Ok(base.clone());
                }
                let eps = S::lit(rate.at(n));
                let keep = S::one() - eps;
                let k = base.kernel();
                let kernel = Kernel::from_fn(base.n_states(), base.n_actions(), |x, u| {
                    k.row(x, u).iter().zip(contaminant.weights()).map(|(&p, &c)| keep * p + eps * c).collect()
                })?;
                base.with_kernel(kernel)
            }
        }
    }

    /// The limit model, on the same grid as member `n`.
    pub fn limit(&self, n: usize) -> Result<FiniteMdp<S>> {
        self.check_n(n)?;
        match &self.kind {
            FamilyKind::DriftGrid => {
                let (states, cost) = drift_grid_space::<S>(n)?;
                let size = states.len();
                let kernel = Kernel::from_fn(size, 1, |x, _| point_mass(size, x))?;
                FiniteMdp::new(states, Space::indexed(1)?, kernel, cost)
            }
            FamilyKind::CoinVsDelta => coin_model(Kernel::from_fn(3, 3, |_, _| point_mass(3, 1))?),
            FamilyKind::TvCounterexample => tv_counterexample_model(n, Kernel::from_fn(5, 3, |_, _| point_mass(5, 2))?),
            FamilyKind::WeakNotTv => {
                let (states, cost) = weak_not_tv_space::<S>(self.n_max)?;
                let size = states.len();
                let kernel = Kernel::from_fn(size, 1, |_, _| point_mass(size, 0))?;
                FiniteMdp::new(states, Space::indexed(1)?, kernel, cost)
            }
            FamilyKind::NoiseMixture { base, .. } => Ok(base.clone()),
        }
    }

    pub fn fixture_names(&self) -> &'static [&'static str] {
        match self.kind {
            FamilyKind::CoinVsDelta => &["gamma1", "gamma2"],
            FamilyKind::TvCounterexample => &["gamma_star", "gamma_limit"],
            _ => &[],
        }
    }

    /// Hand-specified policies that come with a family.
    pub fn fixture(&self, name: &str, n: usize) -> Result<StationaryPolicy> {
        self.check_n(n)?;
        // action indices: coin_vs_delta has U = {-1, 0, 1}; tv_counterexample has U = {0, 1, 2}
        let choice = match (&self.kind, name) {
            // 1 at x = 1, -1 at x = -1, 0 elsewhere
            (FamilyKind::CoinVsDelta, "gamma1") => vec![0, 1, 2],
            // 1 for x >= 0, -1 for x < 0
            (FamilyKind::CoinVsDelta, "gamma2") => vec![0, 2, 2],
            // 1 for x <= -1/n, 0 for x >= 1/n, 2 otherwise
            (FamilyKind::TvCounterexample, "gamma_star") => vec![1, 1, 2, 0, 0],
            (FamilyKind::TvCounterexample, "gamma_limit") => vec![1; 5],
            _ => {
                return Err(Error::validation(
                    "fixture",
                    format!("family {} has no fixture {name:?}", self.name),
                ))
            }
        };
        StationaryPolicy::new(choice, 3)
    }

    /// Distances between member `n` and the limit for every `n` in the grid,
    /// and whether they support the declared convergence claim.
    pub fn validate_claim(&self, n_grid: &[usize]) -> Result<ClaimValidation> {
        let mode = match self.claim {
            ConvergenceClaim::None => {
                return Ok(ClaimValidation { claim: self.claim, distances: Vec::new(), n0: None, valid: true })
            }
            ConvergenceClaim::Weak => DistanceMode::Bl,
            ConvergenceClaim::Setwise | ConvergenceClaim::Tv => DistanceMode::Tv,
        };
        let mut distances = Vec::with_capacity(n_grid.len());
        for &n in n_grid {
            let member = self.member(n)?;
            let limit = self.limit(n)?;
            let d = kernel_sup_distance(member.kernel(), limit.kernel(), mode, member.states().coords())?;
            distances.push((n, d.to_f64_lossy()));
        }
        let zero = 1e-12;
        let mut start = distances.len().saturating_sub(1);
        while start > 0 && distances[start - 1].1 + zero >= distances[start].1 {
            start -= 1;
        }
        let last = distances.last().map_or(0.0, |d| d.1);
        let valid = last <= zero || (distances.len() - start >= 2 && last < distances[start].1);
        Ok(ClaimValidation { claim: self.claim, n0: distances.get(start).map(|d| d.0), distances, valid })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimValidation {
    pub claim: ConvergenceClaim,
    /// `(n, sup_{x,u} distance)` in the metric matching the claim.
    pub distances: Vec<(usize, f64)>,
    /// Start of the nonincreasing tail.
    pub n0: Option<usize>,
    pub valid: bool,
}

fn drift_grid_space<S: Scalar>(n: usize) -> Result<(Space, CostFn<S>)> {
    let coords: Vec<f64> = (0..=2 * n + 1).map(|k| k as f64 / n as f64).collect();
    let labels = (0..=2 * n + 1).map(|k| format!("{k}/{n}")).collect();
    let cost = CostFn::from_fn(coords.len(), 1, |x, _| S::lit(capped_abs(coords[x])))?;
    Ok((Space::new(labels, coords)?, cost))
}

fn weak_not_tv_space<S: Scalar>(n_max: usize) -> Result<(Space, CostFn<S>)> {
    let coords: Vec<f64> = std::iter::once(0.0).chain((1..=n_max).map(|k| 1.0 / k as f64)).collect();
    let labels = std::iter::once("0".to_string()).chain((1..=n_max).map(|k| format!("1/{k}"))).collect();
    let cost = CostFn::from_fn(coords.len(), 1, |x, _| S::lit(capped_abs(coords[x])))?;
    Ok((Space::new(labels, coords)?, cost))
}

fn coin_model<S: Scalar>(kernel: Kernel<S>) -> Result<FiniteMdp<S>> {
    let xs = [-1.0, 0.0, 1.0];
    let cost = CostFn::from_fn(3, 3, |x, u| S::lit((xs[x] - xs[u]) * (xs[x] - xs[u])))?;
    FiniteMdp::new(Space::from_coords(xs.to_vec())?, Space::from_coords(xs.to_vec())?, kernel, cost)
}

fn tv_counterexample_model<S: Scalar>(n: usize, kernel: Kernel<S>) -> Result<FiniteMdp<S>> {
    let h = 1.0 / n as f64;
    let coords = vec![-1.0, -h, 0.0, h, 1.0];
    let labels = vec!["-1".into(), format!("-1/{n}"), "0".into(), format!("1/{n}"), "1".into()];
    let cost = CostFn::from_fn(5, 3, |x, u| if u == 2 { S::lit(3.0) } else { S::lit(coords[x].max(0.0)) })?;
    FiniteMdp::new(Space::new(labels, coords.clone())?, Space::indexed(3)?, kernel, cost)
}
