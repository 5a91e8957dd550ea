//! Integer intervals and finitely supported sequences on `Z`.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Closed integer interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub lo: i64,
    pub hi: i64,
}

impl Interval {
    pub fn new(lo: i64, hi: i64) -> Self {
        Self { lo, hi }
    }

    /// `[-r, r]`.
    pub fn symmetric(r: i64) -> Self {
        Self { lo: -r, hi: r }
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }

    pub fn len(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            (self.hi - self.lo + 1) as usize
        }
    }

    pub fn contains(&self, n: i64) -> bool {
        self.lo <= n && n <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        other.is_empty() || (self.lo <= other.lo && other.hi <= self.hi)
    }

    /// Grows (or shrinks, for negative `by`) both ends.
    pub fn expand(&self, by: i64) -> Self {
        Self { lo: self.lo - by, hi: self.hi + by }
    }

    pub fn shift(&self, by: i64) -> Self {
        Self { lo: self.lo + by, hi: self.hi + by }
    }

    pub fn iter(&self) -> std::ops::RangeInclusive<i64> {
        self.lo..=self.hi
    }

    /// Sub-interval covering the middle `num/den` of this one.
    pub fn middle_fraction(&self, num: i64, den: i64) -> Self {
        let len = self.hi - self.lo + 1;
        let keep = (len * num / den).max(1);
        let lo = self.lo + (len - keep) / 2;
        Self { lo, hi: lo + keep - 1 }
    }
}

/// A real sequence on a finite integer interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Sequence<T: Real> {
    pub first: i64,
    pub values: Vec<T>,
}

impl<T: Real> Sequence<T> {
    pub fn new(first: i64, values: Vec<T>) -> Self {
        Self { first, values }
    }

    pub fn zeros(support: Interval) -> Self {
        Self { first: support.lo, values: vec![T::zero(); support.len()] }
    }

    /// The unit vector `δ_n`.
    pub fn delta(n: i64) -> Self {
        Self { first: n, values: vec![T::one()] }
    }

    pub fn support(&self) -> Interval {
        Interval::new(self.first, self.first + self.values.len() as i64 - 1)
    }

    /// Value at `n`, zero outside the stored range.
    pub fn get(&self, n: i64) -> T {
        let i = n - self.first;
        if i < 0 || i as usize >= self.values.len() {
            T::zero()
        } else {
            self.values[i as usize]
        }
    }

    pub fn norm(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, &x| acc.hypot(x))
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
    }

    pub fn scaled(&self, by: T) -> Self {
        Self { first: self.first, values: self.values.iter().map(|&x| x * by).collect() }
    }

    /// Restriction to `range` (zero-padded where not stored).
    pub fn restrict(&self, range: Interval) -> Self {
        Self { first: range.lo, values: range.iter().map(|n| self.get(n)).collect() }
    }

    /// `a·self + b·other` on the union of supports.
    pub fn combine(&self, a: T, other: &Self, b: T) -> Self {
        let (s, o) = (self.support(), other.support());
        let range = Interval::new(s.lo.min(o.lo), s.hi.max(o.hi));
        Self {
            first: range.lo,
            values: range.iter().map(|n| a * self.get(n) + b * other.get(n)).collect(),
        }
    }
}
