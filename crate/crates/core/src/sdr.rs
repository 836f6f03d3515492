//! Sparse binary vectors.
//!
//! Every activity pattern and every dendritic weight set in the network is a
//! [`Sdr`]: a runtime dimension plus the sorted list of active indices. Set
//! operations are merge-style walks over the sorted lists.

use std::cmp::Ordering;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "(usize, Vec<u32>)", try_from = "(usize, Vec<u32>)")]
pub struct Sdr {
    dimension: usize,
    active: Vec<u32>,
}

impl Sdr {
    pub fn empty(dimension: usize) -> Self {
        Self { dimension, active: Vec::new() }
    }

    pub fn full(dimension: usize) -> Self {
        Self { dimension, active: (0..dimension as u32).collect() }
    }

    /// Builds a vector from arbitrary indices, sorting and deduplicating them.
    pub fn from_indices(dimension: usize, indices: impl IntoIterator<Item = u32>) -> Result<Self> {
        let mut active: Vec<u32> = indices.into_iter().collect();
        active.sort_unstable();
        active.dedup();
        if let Some(&last) = active.last() {
            if last as usize >= dimension {
                return Err(Error::IndexOutOfRange { index: last as usize, dimension });
            }
        }
        Ok(Self { dimension, active })
    }

    /// Builds a vector from indices that must already be strictly ascending.
    pub fn from_sorted(dimension: usize, active: Vec<u32>) -> Result<Self> {
        for pair in active.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::InvalidConfig(format!(
                    "indices not strictly ascending at {}",
                    pair[1]
                )));
            }
        }
        Self::from_indices(dimension, active)
    }

    pub(crate) fn from_sorted_unchecked(dimension: usize, active: Vec<u32>) -> Self {
        debug_assert!(active.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(active.last().is_none_or(|&i| (i as usize) < dimension));
        Self { dimension, active }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn active(&self) -> &[u32] {
        &self.active
    }

    pub fn cardinality(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn contains(&self, index: u32) -> bool {
        self.active.binary_search(&index).is_ok()
    }

    fn check_dimension(&self, other: &Self) -> Result<()> {
        if self.dimension != other.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: other.dimension,
            });
        }
        Ok(())
    }

    /// Number of indices active in both vectors.
    pub fn overlap(&self, other: &Self) -> Result<usize> {
        self.check_dimension(other)?;
        Ok(sorted_overlap(&self.active, &other.active))
    }

    /// True iff every active index of `self` is active in `other`.
    pub fn is_subset(&self, other: &Self) -> Result<bool> {
        self.check_dimension(other)?;
        Ok(sorted_is_subset(&self.active, &other.active))
    }

    pub fn union(vs: &[Sdr]) -> Result<Sdr> {
        let first = vs.first().ok_or(Error::EmptyUnion)?;
        let mut acc = first.clone();
        for v in &vs[1..] {
            acc.union_with(v)?;
        }
        Ok(acc)
    }

    pub fn union_with(&mut self, other: &Self) -> Result<()> {
        self.check_dimension(other)?;
        if other.active.is_empty() {
            return Ok(());
        }
        let mut merged = Vec::with_capacity(self.active.len() + other.active.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.active, &other.active);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                Ordering::Less => {
                    merged.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    merged.push(b[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    merged.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        merged.extend_from_slice(&a[i..]);
        merged.extend_from_slice(&b[j..]);
        self.active = merged;
        Ok(())
    }

    /// Exactly `k` distinct indices drawn uniformly from `0..dimension`.
    pub fn random<R: Rng + ?Sized>(dimension: usize, k: usize, rng: &mut R) -> Result<Self> {
        if k > dimension {
            return Err(Error::TooManyActive { k, dimension });
        }
        let indices = index::sample(rng, dimension, k).into_iter().map(|i| i as u32);
        Self::from_indices(dimension, indices)
    }
}

impl From<Sdr> for (usize, Vec<u32>) {
    fn from(v: Sdr) -> Self {
        (v.dimension, v.active)
    }
}

impl TryFrom<(usize, Vec<u32>)> for Sdr {
    type Error = Error;

    fn try_from((dimension, active): (usize, Vec<u32>)) -> Result<Self> {
        Sdr::from_sorted(dimension, active)
    }
}

pub(crate) fn sorted_overlap(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

pub(crate) fn sorted_is_subset(a: &[u32], b: &[u32]) -> bool {
    if a.len() > b.len() {
        return false;
    }
    let mut j = 0;
    for &x in a {
        while j < b.len() && b[j] < x {
            j += 1;
        }
        if j == b.len() || b[j] != x {
            return false;
        }
        j += 1;
    }
    true
}
