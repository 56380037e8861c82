use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A subset of the points `0..universe`, kept as a sorted index list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Subset {
    universe: usize,
    indices: Vec<usize>,
}

impl Subset {
    pub fn empty(universe: usize) -> Self {
        Self { universe, indices: Vec::new() }
    }

    pub fn full(universe: usize) -> Self {
        Self { universe, indices: (0..universe).collect() }
    }

    /// Builds a subset from arbitrary indices; duplicates are dropped.
    ///
    /// Panics if an index is outside `0..universe`.
    pub fn from_indices(universe: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut indices: Vec<usize> = indices.into_iter().collect();
        indices.sort_unstable();
        indices.dedup();
        assert!(
            indices.last().is_none_or(|&i| i < universe),
            "subset index out of range"
        );
        Self { universe, indices }
    }

    pub fn try_from_indices(universe: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let indices: Vec<usize> = indices.into_iter().collect();
        if let Some(&bad) = indices.iter().find(|&&i| i >= universe) {
            return Err(Error::InvalidArgument(format!(
                "index {bad} out of range for {universe} points"
            )));
        }
        Ok(Self::from_indices(universe, indices))
    }

    pub(crate) fn from_sorted(universe: usize, indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        Self { universe, indices }
    }

    pub fn from_mask(mask: &[bool]) -> Self {
        let indices = mask
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect();
        Self { universe: mask.len(), indices }
    }

    pub(crate) fn from_bits(universe: usize, bits: u64) -> Self {
        let indices = (0..universe).filter(|&i| bits >> i & 1 == 1).collect();
        Self { universe, indices }
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.universe];
        for &i in &self.indices {
            m[i] = true;
        }
        m
    }

    pub fn complement(&self) -> Subset {
        let mask = self.mask();
        Subset::from_mask(&mask.iter().map(|b| !b).collect::<Vec<_>>())
    }

    pub fn is_subset_of(&self, other: &Subset) -> bool {
        self.indices.iter().all(|&i| other.contains(i))
    }

    pub fn is_disjoint(&self, other: &Subset) -> bool {
        let (mut a, mut b) = (0, 0);
        while a < self.indices.len() && b < other.indices.len() {
            match self.indices[a].cmp(&other.indices[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => return false,
            }
        }
        true
    }

    pub fn union(&self, other: &Subset) -> Subset {
        Subset::from_indices(
            self.universe,
            self.indices.iter().chain(other.indices.iter()).copied(),
        )
    }

    /// Indicator function of the subset.
    pub fn indicator(&self) -> Vec<f64> {
        self.mask().into_iter().map(|b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// Pairwise-disjoint, nonempty subsets of a common universe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetFamily {
    sets: Vec<Subset>,
}

impl SubsetFamily {
    pub fn new(sets: Vec<Subset>) -> Result<Self> {
        if let Some(first) = sets.first() {
            let u = first.universe();
            for (i, s) in sets.iter().enumerate() {
                if s.universe() != u {
                    return Err(Error::InvalidArgument("family members live in different universes".into()));
                }
                if s.is_empty() {
                    return Err(Error::InvalidArgument(format!("family member {i} is empty")));
                }
                for (j, t) in sets.iter().enumerate().skip(i + 1) {
                    if !s.is_disjoint(t) {
                        return Err(Error::InvalidArgument(format!(
                            "family members {i} and {j} intersect"
                        )));
                    }
                }
            }
        }
        Ok(Self { sets })
    }

    pub fn empty() -> Self {
        Self { sets: Vec::new() }
    }

    pub fn sets(&self) -> &[Subset] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn into_sets(self) -> Vec<Subset> {
        self.sets
    }
}
