//! Distances between distributions and kernels, the Dobrushin coefficient,
//! and ergodicity certificates.
//!
//! Total variation is normalized so that disjoint point masses are at
//! distance 2 (`sum |p - q|`). On a finite space setwise convergence and TV
//! convergence coincide, so there is no separate setwise metric.
//!
//! The bounded-Lipschitz distance is the dual norm
//! `sup { |E_p f - E_q f| : ||f||_inf + Lip(f) <= 1 }`, with Lipschitz
//! constants measured on the scalar state coordinates. It metrizes weak
//! convergence and is always bounded by the TV distance.

mod ergodicity;

pub use ergodicity::{check_ergodicity, ErgodicityOptions, ErgodicityReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::StochasticMatrix;
use crate::lp::LinearProgram;
use crate::mdp::{Distribution, Kernel};
use crate::scalar::Scalar;

/// `sum_x |p(x) - q(x)|`, in `[0, 2]`.
pub fn tv_distance<S: Scalar>(p: &Distribution<S>, q: &Distribution<S>) -> Result<S> {
    check_same_len(p.len(), q.len())?;
    Ok(tv(p.weights(), q.weights()))
}

/// [`tv_distance`] on raw weight slices of equal length.
pub fn tv<S: Scalar>(p: &[S], q: &[S]) -> S {
    p.iter().zip(q).fold(S::zero(), |acc, (&a, &b)| acc + (a - b).abs())
}

/// Bounded-Lipschitz distance on points with the given coordinates.
pub fn bl_distance<S: Scalar>(p: &Distribution<S>, q: &Distribution<S>, coords: &[f64]) -> Result<S> {
    check_same_len(p.len(), q.len())?;
    check_same_len(p.len(), coords.len())?;
    bl(p.weights(), q.weights(), coords)
}

/// [`bl_distance`] on raw weight slices.
pub fn bl<S: Scalar>(p: &[S], q: &[S], coords: &[f64]) -> Result<S> {
    // Only points where the signed measure is nonzero enter the objective, and
    // a function bounded by `a` and `L`-Lipschitz on a subset of the line
    // extends to the whole line with the same bounds. Points sharing a
    // coordinate are merged; after sorting, adjacent Lipschitz constraints
    // imply all the others.
    let mut points: Vec<(f64, S)> = Vec::new();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&i, &j| coords[i].total_cmp(&coords[j]));
    for i in order {
        let g = p[i] - q[i];
        match points.last_mut() {
            Some((c, acc)) if *c == coords[i] => *acc = *acc + g,
            _ => points.push((coords[i], g)),
        }
    }
    points.retain(|&(_, g)| g != S::zero());
    if points.is_empty() {
        return Ok(S::zero());
    }

    // variables: f+_0..f+_{k-1}, f-_0..f-_{k-1}, a (sup bound), L (Lipschitz bound)
    let k = points.len();
    let n_vars = 2 * k + 2;
    let (a_idx, l_idx) = (2 * k, 2 * k + 1);
    let mut objective = vec![S::zero(); n_vars];
    for (i, &(_, g)) in points.iter().enumerate() {
        objective[i] = g;
        objective[k + i] = -g;
    }
    let mut lp = LinearProgram::new(objective);
    for i in 0..k {
        let mut upper = vec![S::zero(); n_vars];
        upper[i] = S::one();
        upper[k + i] = -S::one();
        upper[a_idx] = -S::one();
        lp.constrain(upper, S::zero());
        let mut lower = vec![S::zero(); n_vars];
        lower[i] = -S::one();
        lower[k + i] = S::one();
        lower[a_idx] = -S::one();
        lp.constrain(lower, S::zero());
    }
    for i in 0..k.saturating_sub(1) {
        let gap = S::lit(points[i + 1].0 - points[i].0);
        for sign in [S::one(), -S::one()] {
            let mut row = vec![S::zero(); n_vars];
            row[i + 1] = sign;
            row[k + i + 1] = -sign;
            row[i] = -sign;
            row[k + i] = sign;
            row[l_idx] = -gap;
            lp.constrain(row, S::zero());
        }
    }
    let mut budget = vec![S::zero(); n_vars];
    budget[a_idx] = S::one();
    budget[l_idx] = S::one();
    lp.constrain(budget, S::one());
    Ok(lp.maximize()?.value.max(S::zero()))
}

fn check_same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("distributions over {a} and {b} points")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    Tv,
    Bl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// One number: `sup_{x,u}`.
    SupXu,
    /// One number per state: `sup_u`.
    SupUPerX,
    /// The full `(x, u)` table.
    Pointwise,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelDistance<S> {
    Sup(S),
    PerState(Vec<S>),
    Table(Vec<Vec<S>>),
}

impl<S: Scalar> KernelDistance<S> {
    pub fn as_sup(&self) -> Option<S> {
        match self {
            KernelDistance::Sup(v) => Some(*v),
            _ => None,
        }
    }
}

/// Row distances `d(a(.|x,u), b(.|x,u))` for every `(x, u)`.
pub fn kernel_distance_table<S: Scalar>(
    a: &Kernel<S>,
    b: &Kernel<S>,
    mode: DistanceMode,
    coords: &[f64],
) -> Result<Vec<Vec<S>>> {
    if !a.same_shape(b) {
        return Err(Error::Shape(format!(
            "kernels are {}x{} and {}x{}",
            a.n_states(),
            a.n_actions(),
            b.n_states(),
            b.n_actions()
        )));
    }
    if mode == DistanceMode::Bl {
        check_same_len(a.n_states(), coords.len())?;
    }
    (0..a.n_states())
        .map(|x| {
            (0..a.n_actions())
                .map(|u| match mode {
                    DistanceMode::Tv => Ok(tv(a.row(x, u), b.row(x, u))),
                    DistanceMode::Bl => bl(a.row(x, u), b.row(x, u), coords),
                })
                .collect()
        })
        .collect()
}

pub fn kernel_distance<S: Scalar>(
    a: &Kernel<S>,
    b: &Kernel<S>,
    mode: DistanceMode,
    aggregation: Aggregation,
    coords: &[f64],
) -> Result<KernelDistance<S>> {
    let table = kernel_distance_table(a, b, mode, coords)?;
    let row_max = |row: &Vec<S>| row.iter().fold(S::zero(), |m, &d| m.max(d));
    Ok(match aggregation {
        Aggregation::Pointwise => KernelDistance::Table(table),
        Aggregation::SupUPerX => KernelDistance::PerState(table.iter().map(row_max).collect()),
        Aggregation::SupXu => KernelDistance::Sup(table.iter().map(row_max).fold(S::zero(), S::max)),
    })
}

/// `sup_{x,u}` distance between two kernels.
pub fn kernel_sup_distance<S: Scalar>(a: &Kernel<S>, b: &Kernel<S>, mode: DistanceMode, coords: &[f64]) -> Result<S> {
    Ok(kernel_distance(a, b, mode, Aggregation::SupXu, coords)?
        .as_sup()
        .expect("sup aggregation yields a scalar"))
}

/// Dobrushin ergodicity coefficient `(1/2) max_{x,x'} sum_y |P(y|x) - P(y|x')|`.
pub fn dobrushin_coefficient<S: Scalar>(p: &StochasticMatrix<S>) -> S {
    let n = p.dim();
    let mut worst = S::zero();
    for x in 0..n {
        for x2 in x + 1..n {
            worst = worst.max(tv(p.row(x), p.row(x2)));
        }
    }
    (worst / S::lit(2.0)).min(S::one())
}
