//! Dense primal simplex for small LPs of the form
//! `max c.x  s.t.  A x <= b, x >= 0` with `b >= 0`, so the slack basis is
//! feasible from the start. Bland's rule prevents cycling.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct LinearProgram<S> {
    n_vars: usize,
    objective: Vec<S>,
    rows: Vec<Vec<S>>,
    rhs: Vec<S>,
}

#[derive(Debug, Clone)]
pub struct LpSolution<S> {
    pub value: S,
    pub x: Vec<S>,
}

impl<S: Scalar> LinearProgram<S> {
    pub fn new(objective: Vec<S>) -> Self {
        Self { n_vars: objective.len(), objective, rows: Vec::new(), rhs: Vec::new() }
    }

    /// Adds `coeffs . x <= rhs`; `rhs` must be nonnegative.
    pub fn constrain(&mut self, coeffs: Vec<S>, rhs: S) {
        assert_eq!(coeffs.len(), self.n_vars, "constraint width");
        assert!(rhs >= S::zero(), "slack basis requires nonnegative right-hand sides");
        self.rows.push(coeffs);
        self.rhs.push(rhs);
    }

    pub fn maximize(&self) -> Result<LpSolution<S>> {
        let m = self.rows.len();
        let n = self.n_vars;
        let width = n + m;
        let eps = S::lit(1e-12).max(S::epsilon() * S::lit(256.0));

        let mut tableau: Vec<Vec<S>> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut t = row.clone();
                t.resize(width, S::zero());
                t[n + i] = S::one();
                t
            })
            .collect();
        let mut rhs = self.rhs.clone();
        let mut reduced: Vec<S> = self.objective.clone();
        reduced.resize(width, S::zero());
        let mut value = S::zero();
        let mut basis: Vec<usize> = (n..width).collect();

        let max_pivots = 50 * (width + 1) * (m + 1);
        for _ in 0..max_pivots {
            let Some(enter) = (0..width).find(|&j| reduced[j] > eps) else {
                let mut x = vec![S::zero(); n];
                for (i, &b) in basis.iter().enumerate() {
                    if b < n {
                        x[b] = rhs[i];
                    }
                }
                return Ok(LpSolution { value, x });
            };
            let mut leave: Option<usize> = None;
            for i in 0..m {
                let a = tableau[i][enter];
                if a <= eps {
                    continue;
                }
                leave = match leave {
                    None => Some(i),
                    Some(l) => {
                        let ratio_i = rhs[i] / a;
                        let ratio_l = rhs[l] / tableau[l][enter];
                        if ratio_i < ratio_l || (ratio_i == ratio_l && basis[i] < basis[l]) {
                            Some(i)
                        } else {
                            Some(l)
                        }
                    }
                };
            }
            let Some(leave) = leave else {
                return Err(Error::Precondition("linear program is unbounded".into()));
            };

            let pivot = tableau[leave][enter];
            for v in tableau[leave].iter_mut() {
                *v = *v / pivot;
            }
            rhs[leave] = rhs[leave] / pivot;
            let pivot_row = tableau[leave].clone();
            let pivot_rhs = rhs[leave];
            for i in 0..m {
                if i == leave {
                    continue;
                }
                let factor = tableau[i][enter];
                if factor == S::zero() {
                    continue;
                }
                for (v, &p) in tableau[i].iter_mut().zip(&pivot_row) {
                    *v = *v - factor * p;
                }
                rhs[i] = (rhs[i] - factor * pivot_rhs).max(S::zero());
            }
            let factor = reduced[enter];
            for (v, &p) in reduced.iter_mut().zip(&pivot_row) {
                *v = *v - factor * p;
            }
            value = value + factor * pivot_rhs;
            basis[leave] = enter;
        }
        Err(Error::Convergence { iterations: max_pivots, residual: f64::NAN })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y  s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  -> 36 at (2, 6)
        let mut lp = LinearProgram::<f64>::new(vec![3.0, 5.0]);
        lp.constrain(vec![1.0, 0.0], 4.0);
        lp.constrain(vec![0.0, 2.0], 12.0);
        lp.constrain(vec![3.0, 2.0], 18.0);
        let sol = lp.maximize().unwrap();
        assert!((sol.value - 36.0).abs() < 1e-12);
        assert!((sol.x[0] - 2.0).abs() < 1e-12 && (sol.x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn detects_unbounded() {
        let mut lp = LinearProgram::<f64>::new(vec![1.0, 0.0]);
        lp.constrain(vec![-1.0, 1.0], 1.0);
        assert!(lp.maximize().is_err());
    }

    #[test]
    fn degenerate_zero_rhs() {
        // max x + y s.t. x - y <= 0, y - x <= 0, x + y <= 2
        let mut lp = LinearProgram::<f64>::new(vec![1.0, 1.0]);
        lp.constrain(vec![1.0, -1.0], 0.0);
        lp.constrain(vec![-1.0, 1.0], 0.0);
        lp.constrain(vec![1.0, 1.0], 2.0);
        let sol = lp.maximize().unwrap();
        assert!((sol.value - 2.0).abs() < 1e-12);
    }
}
