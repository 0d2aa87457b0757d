//! The static world model: regions of interest, the partition cells with
//! their region sets and capacities, and the cell adjacency relation.

use std::collections::HashSet;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::{Conjunction, Observation};
use crate::multiset::{Bag, Universe};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub id: String,
    pub prop: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub id: String,
    pub regions: Vec<String>,
    pub capacity: u32,
}

/// Environment file contents, before validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentDef {
    pub regions: Vec<Region>,
    pub free_region: String,
    pub cells: Vec<Cell>,
    pub adjacency: Vec<[String; 2]>,
    pub team_size: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DuplicateRegion { id: String },
    DuplicateProposition { prop: String },
    TooManyRegions { count: usize },
    UnknownFreeRegion { id: String },
    DuplicateCell { id: String },
    EmptyRegionSet { cell: String },
    UnknownRegion { cell: String, region: String },
    RepeatedRegion { cell: String, region: String },
    ZeroCapacity { cell: String },
    MissingFreeCell,
    MultipleFreeCells { cells: Vec<String> },
    FreeRegionShared { cell: String },
    FreeCapacity { cell: String, capacity: u32, team_size: u32 },
    ZeroTeamSize,
    UnknownAdjacentCell { cell: String },
    SelfAdjacency { cell: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            DuplicateRegion { id } => write!(f, "region `{id}` declared twice"),
            DuplicateProposition { prop } => write!(f, "proposition `{prop}` used by two regions"),
            TooManyRegions { count } => write!(f, "{count} regions declared, at most 64 supported"),
            UnknownFreeRegion { id } => write!(f, "free region `{id}` is not a declared region"),
            DuplicateCell { id } => write!(f, "cell `{id}` declared twice"),
            EmptyRegionSet { cell } => write!(f, "cell `{cell}` belongs to no region"),
            UnknownRegion { cell, region } => {
                write!(f, "cell `{cell}` references unknown region `{region}`")
            }
            RepeatedRegion { cell, region } => {
                write!(f, "cell `{cell}` lists region `{region}` twice")
            }
            ZeroCapacity { cell } => write!(f, "cell `{cell}` has capacity 0"),
            MissingFreeCell => write!(f, "no cell covers the free region"),
            MultipleFreeCells { cells } => {
                write!(f, "several free-space cells: {}", cells.join(", "))
            }
            FreeRegionShared { cell } => {
                write!(f, "cell `{cell}` mixes the free region with other regions")
            }
            FreeCapacity {
                cell,
                capacity,
                team_size,
            } => write!(
                f,
                "free-space cell `{cell}` has capacity {capacity}, expected the team size {team_size}"
            ),
            ZeroTeamSize => write!(f, "team size must be positive"),
            UnknownAdjacentCell { cell } => write!(f, "adjacency references unknown cell `{cell}`"),
            SelfAdjacency { cell } => write!(f, "cell `{cell}` is adjacent to itself"),
        }
    }
}

impl EnvironmentDef {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("environment serializes")
    }

    /// Checks every structural invariant; returns one violation per breach.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();

        let mut ids = HashSet::new();
        let mut props = HashSet::new();
        for r in &self.regions {
            if !ids.insert(r.id.as_str()) {
                out.push(Violation::DuplicateRegion { id: r.id.clone() });
            }
            if !props.insert(r.prop.as_str()) {
                out.push(Violation::DuplicateProposition {
                    prop: r.prop.clone(),
                });
            }
        }
        if self.regions.len() > 64 {
            out.push(Violation::TooManyRegions {
                count: self.regions.len(),
            });
        }
        let free_known = ids.contains(self.free_region.as_str());
        if !free_known {
            out.push(Violation::UnknownFreeRegion {
                id: self.free_region.clone(),
            });
        }
        if self.team_size == 0 {
            out.push(Violation::ZeroTeamSize);
        }

        let mut cell_ids = HashSet::new();
        let mut pure_free = Vec::new();
        let mut touches_free = false;
        for c in &self.cells {
            if !cell_ids.insert(c.id.as_str()) {
                out.push(Violation::DuplicateCell { id: c.id.clone() });
            }
            if c.regions.is_empty() {
                out.push(Violation::EmptyRegionSet { cell: c.id.clone() });
            }
            let mut seen = HashSet::new();
            for r in &c.regions {
                if !ids.contains(r.as_str()) {
                    out.push(Violation::UnknownRegion {
                        cell: c.id.clone(),
                        region: r.clone(),
                    });
                }
                if !seen.insert(r.as_str()) {
                    out.push(Violation::RepeatedRegion {
                        cell: c.id.clone(),
                        region: r.clone(),
                    });
                }
            }
            if c.capacity == 0 {
                out.push(Violation::ZeroCapacity { cell: c.id.clone() });
            }
            if c.regions.contains(&self.free_region) {
                touches_free = true;
                if c.regions.iter().all(|r| *r == self.free_region) {
                    pure_free.push(c);
                } else {
                    out.push(Violation::FreeRegionShared { cell: c.id.clone() });
                }
            }
        }
        if free_known && !touches_free {
            out.push(Violation::MissingFreeCell);
        }
        if pure_free.len() > 1 {
            out.push(Violation::MultipleFreeCells {
                cells: pure_free.iter().map(|c| c.id.clone()).collect(),
            });
        }
        for c in &pure_free {
            if c.capacity != self.team_size && c.capacity != 0 && self.team_size != 0 {
                out.push(Violation::FreeCapacity {
                    cell: c.id.clone(),
                    capacity: c.capacity,
                    team_size: self.team_size,
                });
            }
        }

        for [a, b] in &self.adjacency {
            for end in [a, b] {
                if !cell_ids.contains(end.as_str()) {
                    out.push(Violation::UnknownAdjacentCell { cell: end.clone() });
                }
            }
            if a == b {
                out.push(Violation::SelfAdjacency { cell: a.clone() });
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvironmentError {
    #[error("invalid environment: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("unknown cell `{0}`")]
    UnknownCell(String),
    #[error("unknown robot `{0}`")]
    UnknownRobot(String),
}

/// A validated environment with index tables for the hot paths.
#[derive(Debug, Clone)]
pub struct Environment {
    def: EnvironmentDef,
    props: Universe,
    cells: Universe,
    /// Proposition indices covering each cell, ascending.
    cell_props: Vec<Vec<usize>>,
    adjacent: Vec<Vec<bool>>,
    free_cell: usize,
    free_prop: usize,
    capacity: Bag,
}

impl Environment {
    pub fn new(def: EnvironmentDef) -> Result<Self, EnvironmentError> {
        let violations = def.validate();
        if !violations.is_empty() {
            return Err(EnvironmentError::Invalid(violations));
        }
        let props = Universe::new(def.regions.iter().map(|r| r.prop.clone()));
        let cells = Universe::new(def.cells.iter().map(|c| c.id.clone()));
        let region_index = |id: &str| def.regions.iter().position(|r| r.id == id).unwrap();
        let cell_props = def
            .cells
            .iter()
            .map(|c| {
                let mut v: Vec<usize> = c.regions.iter().map(|r| region_index(r)).collect();
                v.sort_unstable();
                v
            })
            .collect();
        let n = def.cells.len();
        let mut adjacent = vec![vec![false; n]; n];
        for [a, b] in &def.adjacency {
            let (i, j) = (cells.index_of(a).unwrap(), cells.index_of(b).unwrap());
            adjacent[i][j] = true;
            adjacent[j][i] = true;
        }
        let free_cell = def
            .cells
            .iter()
            .position(|c| c.regions.contains(&def.free_region))
            .unwrap();
        let free_prop = region_index(&def.free_region);
        let capacity = Bag::from_counts(
            &cells,
            def.cells.iter().map(|c| u64::from(c.capacity)).collect(),
        );
        Ok(Environment {
            def,
            props,
            cells,
            cell_props,
            adjacent,
            free_cell,
            free_prop,
            capacity,
        })
    }

    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        Ok(Environment::new(EnvironmentDef::from_json(text)?)?)
    }

    pub fn def(&self) -> &EnvironmentDef {
        &self.def
    }

    pub fn team_size(&self) -> u32 {
        self.def.team_size
    }

    /// Propositions in region declaration order.
    pub fn props(&self) -> &Universe {
        &self.props
    }

    pub fn cells(&self) -> &Universe {
        &self.cells
    }

    pub fn cell(&self, index: usize) -> &Cell {
        &self.def.cells[index]
    }

    pub fn cell_index(&self, id: &str) -> Result<usize, EnvironmentError> {
        self.cells
            .index_of(id)
            .ok_or_else(|| EnvironmentError::UnknownCell(id.to_string()))
    }

    pub fn cell_props(&self, cell: usize) -> &[usize] {
        &self.cell_props[cell]
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacent[a][b]
    }

    pub fn free_cell(&self) -> usize {
        self.free_cell
    }

    pub fn free_prop(&self) -> usize {
        self.free_prop
    }

    /// Per-cell capacities as a bag over cell ids.
    pub fn capacity(&self) -> &Bag {
        &self.capacity
    }

    /// The characteristic conjunction of a cell: every proposition of every
    /// region covering it, in region declaration order.
    pub fn cell_label(&self, cell: &str) -> Result<Conjunction, EnvironmentError> {
        let idx = self.cell_index(cell)?;
        Ok(self.label_of(idx))
    }

    pub(crate) fn label_of(&self, cell: usize) -> Conjunction {
        Conjunction::positive(self.cell_props[cell].iter().map(|&p| self.props.label(p)))
    }

    /// Number of robots per cell.
    pub fn cell_occupancy(&self, placement: &[usize]) -> Bag {
        let mut counts = vec![0u64; self.cells.len()];
        for &c in placement {
            counts[c] += 1;
        }
        Bag::from_counts(&self.cells, counts)
    }

    /// Number of robots per region proposition; a robot in an overlap cell
    /// counts once toward each covering region.
    pub fn prop_occupancy(&self, placement: &[usize]) -> Bag {
        let mut counts = vec![0u64; self.props.len()];
        for &c in placement {
            for &p in &self.cell_props[c] {
                counts[p] += 1;
            }
        }
        Bag::from_counts(&self.props, counts)
    }

    /// Occupancy multi-set for a named placement `robot -> cell`.
    pub fn occupancy_of(&self, placement: &IndexMap<String, String>) -> Result<Bag, EnvironmentError> {
        let cells = placement
            .values()
            .map(|c| self.cell_index(c))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.prop_occupancy(&cells))
    }

    pub fn observation(&self, placement: &[usize]) -> Observation {
        let mut obs = Observation::default();
        for &c in placement {
            for &p in &self.cell_props[c] {
                obs = obs.with(p);
            }
        }
        obs
    }

    /// Observation in which only the free-space proposition holds.
    pub fn free_observation(&self) -> Observation {
        Observation::default().with(self.free_prop)
    }

    pub fn observation_of_bag(&self, occupancy: &Bag) -> Observation {
        let mut obs = Observation::default();
        for (i, &c) in occupancy.counts().iter().enumerate() {
            if c > 0 {
                obs = obs.with(i);
            }
        }
        obs
    }
}
