use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Block lengths `T_k` for the adaptive controller, `k >= 1`, with
/// cumulative times `n_k = T_1 + ... + T_k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// `T_k = k!`; `n_k / T_k -> 1`.
    Factorial,
    /// Explicit strictly increasing lengths.
    Explicit(Vec<u64>),
}

impl Schedule {
    pub fn validate(&self, k_max: usize) -> Result<()> {
        if k_max == 0 {
            return Err(Error::validation("k_max", "need at least one block"));
        }
        match self {
            Schedule::Factorial if k_max > 20 => Err(Error::validation("k_max", "k! overflows u64 beyond k = 20")),
            Schedule::Factorial => Ok(()),
            Schedule::Explicit(lengths) => {
                if lengths.len() < k_max {
                    return Err(Error::validation("schedule", format!("{} lengths for {k_max} blocks", lengths.len())));
                }
                if lengths.first() == Some(&0) {
                    return Err(Error::validation("schedule[0]", "block length must be positive"));
                }
                if let Some(i) = lengths.windows(2).position(|w| w[1] <= w[0]) {
                    return Err(Error::validation(format!("schedule[{}]", i + 1), "lengths must strictly increase"));
                }
                Ok(())
            }
        }
    }

    /// `T_k`.
    pub fn block_length(&self, k: usize) -> u64 {
        assert!(k >= 1, "blocks are numbered from 1");
        match self {
            Schedule::Factorial => (1..=k as u64).product(),
            Schedule::Explicit(lengths) => lengths[k - 1],
        }
    }

    /// `n_k`, with `n_0 = 0`.
    pub fn cumulative(&self, k: usize) -> u64 {
        (1..=k).map(|l| self.block_length(l)).sum()
    }

    /// Exact check of `n_k / T_k <= 1 + 2/k`, i.e. `k n_k <= (k + 2) T_k`.
    pub fn ratio_certificate(&self, k: usize) -> bool {
        let n = self.cumulative(k) as u128;
        let t = self.block_length(k) as u128;
        let k = k as u128;
        k * n <= (k + 2) * t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorial_schedule() {
        let s = Schedule::Factorial;
        assert_eq!(s.block_length(1), 1);
        assert_eq!(s.block_length(5), 120);
        assert_eq!(s.cumulative(4), 1 + 2 + 6 + 24);
        for k in 2..=12 {
            assert!(s.ratio_certificate(k), "k = {k}");
        }
    }

    #[test]
    fn geometric_schedule_fails_certificate() {
        let s = Schedule::Explicit((1..=12).map(|k| 1u64 << k).collect());
        assert!(s.validate(12).is_ok());
        // n_k / T_k -> 2 for T_k = 2^k
        assert!(!s.ratio_certificate(12));
    }

    #[test]
    fn explicit_must_increase() {
        assert!(Schedule::Explicit(vec![1, 2, 2]).validate(3).is_err());
        assert!(Schedule::Explicit(vec![1, 2]).validate(3).is_err());
        assert!(Schedule::Factorial.validate(21).is_err());
    }
}
