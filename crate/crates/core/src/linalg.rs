//! Small dense linear algebra: square row-stochastic matrices, a pivoted
//! Gaussian solver, and closed-class detection for finite chains.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Square row-stochastic matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix<S> {
    n: usize,
    data: Vec<S>,
}

impl<S: Scalar> StochasticMatrix<S> {
    /// Builds from rows, checking every row is a probability vector.
    pub fn from_rows(rows: Vec<Vec<S>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::validation("matrix", "empty matrix"));
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::Shape(format!("row {i} has length {}, expected {n}", row.len())));
            }
            check_probability_row(&row, &format!("matrix[{i}]"))?;
            data.extend(row);
        }
        Ok(Self { n, data })
    }

    pub(crate) fn from_flat_unchecked(n: usize, data: Vec<S>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        Self { n, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![S::zero(); n * n];
        for i in 0..n {
            data[i * n + i] = S::one();
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        self.data[i * self.n + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[S]> {
        self.data.chunks(self.n)
    }

    pub fn to_rows(&self) -> Vec<Vec<S>> {
        self.rows().map(<[S]>::to_vec).collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "matmul dimension mismatch");
        let n = self.n;
        let mut data = vec![S::zero(); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == S::zero() {
                    continue;
                }
                let other_row = other.row(k);
                let out = &mut data[i * n..(i + 1) * n];
                for (o, &b) in out.iter_mut().zip(other_row) {
                    *o = *o + a * b;
                }
            }
        }
        Self { n, data }
    }

    /// `t`-th power by repeated squaring; `t = 0` gives the identity.
    pub fn pow(&self, mut t: usize) -> Self {
        let mut result = Self::identity(self.n);
        let mut base = self.clone();
        while t > 0 {
            if t & 1 == 1 {
                result = result.matmul(&base);
            }
            t >>= 1;
            if t > 0 {
                base = base.matmul(&base);
            }
        }
        result
    }

    /// Row vector times matrix: `mu * P`.
    pub fn left_mul(&self, mu: &[S]) -> Vec<S> {
        assert_eq!(mu.len(), self.n);
        let mut out = vec![S::zero(); self.n];
        for (i, &m) in mu.iter().enumerate() {
            if m == S::zero() {
                continue;
            }
            for (o, &p) in out.iter_mut().zip(self.row(i)) {
                *o = *o + m * p;
            }
        }
        out
    }

    /// Matrix times column vector: `P * v`.
    pub fn right_mul(&self, v: &[S]) -> Vec<S> {
        assert_eq!(v.len(), self.n);
        self.rows().map(|row| dot(row, v)).collect()
    }

    /// Closed communicating classes of the chain (recurrent classes), each
    /// sorted, ordered by smallest member.
    pub fn closed_classes(&self) -> Vec<Vec<usize>> {
        let n = self.n;
        let reach: Vec<Vec<bool>> = (0..n).map(|s| self.reachable_from(s)).collect();
        let mut seen = vec![false; n];
        let mut classes = Vec::new();
        for i in 0..n {
            if seen[i] {
                continue;
            }
            let class: Vec<usize> = (0..n).filter(|&j| reach[i][j] && reach[j][i]).collect();
            for &j in &class {
                seen[j] = true;
            }
            let closed = (0..n).all(|j| !reach[i][j] || reach[j][i]);
            if closed {
                classes.push(class);
            }
        }
        classes
    }

    /// Unique invariant distribution `pi P = pi`, solved from the stationary
    /// equations with one of them replaced by normalization. Fails with
    /// [`Error::Multichain`] when the chain has more than one closed class.
    pub fn stationary_distribution(&self) -> Result<Vec<S>> {
        let classes = self.closed_classes();
        if classes.len() > 1 {
            return Err(Error::Multichain { first: classes[0].clone(), second: classes[1].clone() });
        }
        let n = self.n;
        // rows of (P^T - I), last row replaced by all ones
        let mut a = vec![S::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = self.get(j, i) - if i == j { S::one() } else { S::zero() };
            }
        }
        for j in 0..n {
            a[(n - 1) * n + j] = S::one();
        }
        let mut b = vec![S::zero(); n];
        b[n - 1] = S::one();
        let pi = solve_dense(a, b)?;
        // clip roundoff below zero on transient states
        let pi: Vec<S> = pi.into_iter().map(|p| p.max(S::zero())).collect();
        let total: S = pi.iter().copied().sum();
        Ok(pi.into_iter().map(|p| p / total).collect())
    }

    fn reachable_from(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            for (j, &p) in self.row(i).iter().enumerate() {
                if p > S::zero() && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    }
}

pub(crate) fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Checks nonnegativity and unit sum within [`Scalar::probability_tolerance`].
pub(crate) fn check_probability_row<S: Scalar>(row: &[S], path: &str) -> Result<()> {
    for (j, &p) in row.iter().enumerate() {
        if !p.is_finite() || p < S::zero() || p > S::one() + S::probability_tolerance() {
            return Err(Error::validation(format!("{path}[{j}]"), format!("entry {p} is not a probability")));
        }
    }
    let sum: S = row.iter().copied().sum();
    if (sum - S::one()).abs() > S::probability_tolerance() {
        return Err(Error::validation(path, format!("row sums to {sum}, expected 1")));
    }
    Ok(())
}

/// Solves `a x = b` for a dense square system by Gaussian elimination with
/// partial pivoting. `a` is row-major `n x n`.
pub fn solve_dense<S: Scalar>(mut a: Vec<S>, mut b: Vec<S>) -> Result<Vec<S>> {
    let n = b.len();
    assert_eq!(a.len(), n * n, "solve_dense: matrix/vector size mismatch");
    let singular = S::lit(1e-13).max(S::epsilon() * S::lit(64.0));
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().partial_cmp(&a[j * n + col].abs()).unwrap())
            .unwrap();
        if a[pivot * n + col].abs() <= singular {
            return Err(Error::Precondition(format!("singular linear system at column {col}")));
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let diag = a[col * n + col];
        for i in col + 1..n {
            let factor = a[i * n + col] / diag;
            if factor == S::zero() {
                continue;
            }
            for k in col..n {
                a[i * n + k] = a[i * n + k] - factor * a[col * n + k];
            }
            b[i] = b[i] - factor * b[col];
        }
    }
    let mut x = vec![S::zero(); n];
    for i in (0..n).rev() {
        let mut acc = b[i];
        for k in i + 1..n {
            acc = acc - a[i * n + k] * x[k];
        }
        x[i] = acc / a[i * n + i];
    }
    Ok(x)
}
