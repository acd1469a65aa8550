//! Shift tuples **h** = (h₁, …, h_j) together with their exponent `k` and
//! modulus context `q`. The tuple is ordered (duplicates allowed); most
//! downstream quantities depend only on the residue multiset, which the
//! invariance tests exploit.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ShiftTuple {
    values: Vec<i64>,
    k: u32,
    q: u64,
}

impl ShiftTuple {
    pub fn new(values: Vec<i64>, k: u32, q: u64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("shift tuple must have at least one entry"));
        }
        if k < 2 {
            return Err(Error::domain(format!("exponent k must be >= 2, got {k}")));
        }
        if q == 0 {
            return Err(Error::domain("modulus q must be >= 1"));
        }
        Ok(ShiftTuple { values, k, q })
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    /// Tuple length j.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // j ≥ 1 by construction
    }

    pub fn min(&self) -> i64 {
        *self.values.iter().min().unwrap()
    }

    pub fn max(&self) -> i64 {
        *self.values.iter().max().unwrap()
    }

    /// max − min.
    pub fn spread(&self) -> u64 {
        (self.max() - self.min()) as u64
    }

    /// Number of distinct entries.
    pub fn distinct_count(&self) -> usize {
        let mut v = self.values.clone();
        v.sort_unstable();
        v.dedup();
        v.len()
    }

    /// The tuple shifted by a common constant; all invariant quantities agree.
    pub fn translated(&self, c: i64) -> Self {
        ShiftTuple {
            values: self.values.iter().map(|h| h + c).collect(),
            k: self.k,
            q: self.q,
        }
    }

    /// Same entries in a different order.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.values.len());
        ShiftTuple {
            values: perm.iter().map(|&i| self.values[i]).collect(),
            k: self.k,
            q: self.q,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(ShiftTuple::new(vec![], 2, 1).is_err());
        assert!(ShiftTuple::new(vec![0], 1, 1).is_err());
        assert!(ShiftTuple::new(vec![0], 2, 0).is_err());
    }

    #[test]
    fn spread_and_distinct_count() {
        let h = ShiftTuple::new(vec![3, 0, 3, 17], 2, 1).unwrap();
        assert_eq!(h.len(), 4);
        assert_eq!(h.spread(), 17);
        assert_eq!(h.distinct_count(), 3);
        assert_eq!(h.translated(5).spread(), 17);
        assert_eq!(h.translated(-2).distinct_count(), 3);
    }
}
