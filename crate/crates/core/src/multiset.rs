//! Multi-sets (bags) over a finite, ordered label universe.
//!
//! Occupancy of regions, occupancy of cells and cell capacities are all bags.
//! A bag stores one count per universe label, so equality and serialization
//! follow the universe order.

use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BagError {
    #[error("bags are defined over different universes")]
    UniverseMismatch,
    #[error("label `{0}` is not part of the universe")]
    UnknownLabel(String),
    #[error("subtraction underflow on label `{label}`: {have} - {take}")]
    Underflow { label: String, have: u64, take: u64 },
}

/// An ordered set of labels. Cloning is cheap.
#[derive(Clone)]
pub struct Universe(Arc<[String]>);

impl Universe {
    pub fn new<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Universe(labels.into_iter().map(Into::into).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.0
    }

    pub fn label(&self, index: usize) -> &str {
        &self.0[index]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.0.iter().position(|l| l == label)
    }
}

impl PartialEq for Universe {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

impl Eq for Universe {}

impl fmt::Debug for Universe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

/// A multi-set with non-negative integer multiplicities.
#[derive(Clone, PartialEq, Eq)]
pub struct Bag {
    universe: Universe,
    counts: Vec<u64>,
}

impl Bag {
    pub fn empty(universe: &Universe) -> Self {
        Bag {
            universe: universe.clone(),
            counts: vec![0; universe.len()],
        }
    }

    /// Builds a bag from `(label, count)` pairs; repeated labels accumulate.
    pub fn from_pairs<'a, I>(universe: &Universe, pairs: I) -> Result<Self, BagError>
    where
        I: IntoIterator<Item = (&'a str, u64)>,
    {
        let mut bag = Bag::empty(universe);
        for (label, count) in pairs {
            bag.insert(label, count)?;
        }
        Ok(bag)
    }

    /// Builds a bag directly from per-label counts in universe order.
    ///
    /// Panics if `counts` does not have one entry per universe label.
    pub fn from_counts(universe: &Universe, counts: Vec<u64>) -> Self {
        assert_eq!(counts.len(), universe.len(), "count vector length");
        Bag {
            universe: universe.clone(),
            counts,
        }
    }

    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    pub fn insert(&mut self, label: &str, count: u64) -> Result<(), BagError> {
        let idx = self
            .universe
            .index_of(label)
            .ok_or_else(|| BagError::UnknownLabel(label.to_string()))?;
        self.counts[idx] += count;
        Ok(())
    }

    /// Multiplicity of `label`; labels outside the universe count zero.
    pub fn get(&self, label: &str) -> u64 {
        self.universe
            .index_of(label)
            .map(|i| self.counts[i])
            .unwrap_or(0)
    }

    pub fn count_at(&self, index: usize) -> u64 {
        self.counts[index]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn is_empty(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }

    /// Cardinality (sum of all multiplicities).
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn check_universe(&self, other: &Bag) -> Result<(), BagError> {
        if self.universe == other.universe {
            Ok(())
        } else {
            Err(BagError::UniverseMismatch)
        }
    }

    pub fn add(&self, other: &Bag) -> Result<Bag, BagError> {
        self.check_universe(other)?;
        let counts = self
            .counts
            .iter()
            .zip(&other.counts)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Bag {
            universe: self.universe.clone(),
            counts,
        })
    }

    pub fn sub(&self, other: &Bag) -> Result<Bag, BagError> {
        self.check_universe(other)?;
        let mut counts = Vec::with_capacity(self.counts.len());
        for (i, (&have, &take)) in self.counts.iter().zip(&other.counts).enumerate() {
            match have.checked_sub(take) {
                Some(c) => counts.push(c),
                None => {
                    return Err(BagError::Underflow {
                        label: self.universe.label(i).to_string(),
                        have,
                        take,
                    })
                }
            }
        }
        Ok(Bag {
            universe: self.universe.clone(),
            counts,
        })
    }

    /// Pointwise comparison: `self[l] <= other[l]` for every label.
    pub fn leq(&self, other: &Bag) -> Result<bool, BagError> {
        self.check_universe(other)?;
        Ok(self.counts.iter().zip(&other.counts).all(|(a, b)| a <= b))
    }

    /// Non-zero entries in universe order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> + '_ {
        self.universe
            .labels()
            .iter()
            .zip(&self.counts)
            .filter(|(_, &c)| c > 0)
            .map(|(l, &c)| (l.as_str(), c))
    }

    /// The JSON object form `{label: count}` with zero counts omitted.
    pub fn to_map(&self) -> IndexMap<String, u64> {
        self.iter().map(|(l, c)| (l.to_string(), c)).collect()
    }

    pub fn from_map(universe: &Universe, map: &IndexMap<String, u64>) -> Result<Bag, BagError> {
        Bag::from_pairs(universe, map.iter().map(|(l, &c)| (l.as_str(), c)))
    }
}

/// Symbolic-sum notation, e.g. `1'b1 + 2'b4`; the empty bag prints as `0`.
impl fmt::Display for Bag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (label, count) in self.iter() {
            if !first {
                f.write_str(" + ")?;
            }
            write!(f, "{count}'{label}")?;
            first = false;
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Bag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bag({self})")
    }
}

impl Serialize for Bag {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let entries: Vec<_> = self.iter().collect();
        let mut map = serializer.serialize_map(Some(entries.len()))?;
        for (label, count) in entries {
            map.serialize_entry(label, &count)?;
        }
        map.end()
    }
}
