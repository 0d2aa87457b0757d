//! Mission nets: one-token state machines whose transitions carry
//! conjunctive guards over region propositions. The mission is fulfilled
//! once a final place is marked.

use std::collections::{HashSet, VecDeque};
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::{parse_guard, Conjunction, GuardParseError, DEFAULT_MAX_DISJUNCTS};

pub type Guard = Conjunction;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecTransitionDef {
    pub id: String,
    pub from: String,
    pub to: String,
    pub guard: String,
}

/// Mission net file contents. Guards may be arbitrary Boolean expressions;
/// they are split into conjunctive transitions on load.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecNetDef {
    pub places: Vec<String>,
    pub initial: String,
    #[serde(rename = "final")]
    pub finals: Vec<String>,
    pub transitions: Vec<SpecTransitionDef>,
}

impl SpecNetDef {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec net serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecNetError {
    #[error("place `{0}` declared twice")]
    DuplicatePlace(String),
    #[error("transition `{0}` declared twice")]
    DuplicateTransition(String),
    #[error("transition `{transition}` references unknown place `{place}`")]
    UnknownPlace { transition: String, place: String },
    #[error("initial place `{0}` is not declared")]
    UnknownInitial(String),
    #[error("final place `{0}` is not declared")]
    UnknownFinal(String),
    #[error("the net has no final place")]
    NoFinalPlace,
    #[error("guard of transition `{transition}`: {source}")]
    Guard {
        transition: String,
        source: GuardParseError,
    },
    #[error("transition `{transition}` is not marking-enabled")]
    NotEnabled { transition: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpecWarning {
    NotStronglyConnected,
    FinalUnreachable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecTransition {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub guard: Guard,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecNet {
    pub places: Vec<String>,
    pub initial: usize,
    pub finals: Vec<bool>,
    pub transitions: Vec<SpecTransition>,
    outgoing: Vec<Vec<usize>>,
}

/// Loads a mission net, splitting every disjunctive guard into parallel
/// transitions with conjunctive guards.
///
/// A transition whose guard has `k > 1` disjuncts becomes `<id>_1` ..
/// `<id>_k`; an unsatisfiable guard drops the transition.
pub fn normalize_guards(def: &SpecNetDef, max_disjuncts: usize) -> Result<SpecNet, SpecNetError> {
    let mut transitions = Vec::new();
    for t in &def.transitions {
        let disjuncts = parse_guard(&t.guard, max_disjuncts).map_err(|source| SpecNetError::Guard {
            transition: t.id.clone(),
            source,
        })?;
        let split = disjuncts.len() > 1;
        for (i, guard) in disjuncts.into_iter().enumerate() {
            let id = if split {
                format!("{}_{}", t.id, i + 1)
            } else {
                t.id.clone()
            };
            transitions.push((id, t.from.clone(), t.to.clone(), guard));
        }
    }
    SpecNet::from_parts(def.places.clone(), &def.initial, &def.finals, transitions)
}

impl SpecNet {
    pub fn from_def(def: &SpecNetDef) -> Result<SpecNet, SpecNetError> {
        normalize_guards(def, DEFAULT_MAX_DISJUNCTS)
    }

    pub fn from_parts(
        places: Vec<String>,
        initial: &str,
        finals: &[String],
        transitions: Vec<(String, String, String, Guard)>,
    ) -> Result<SpecNet, SpecNetError> {
        let mut seen = HashSet::new();
        for p in &places {
            if !seen.insert(p.as_str()) {
                return Err(SpecNetError::DuplicatePlace(p.clone()));
            }
        }
        let index = |p: &str| places.iter().position(|x| x == p);
        let initial = index(initial).ok_or_else(|| SpecNetError::UnknownInitial(initial.to_string()))?;
        let mut final_flags = vec![false; places.len()];
        for f in finals {
            let i = index(f).ok_or_else(|| SpecNetError::UnknownFinal(f.clone()))?;
            final_flags[i] = true;
        }
        if !final_flags.iter().any(|&f| f) {
            return Err(SpecNetError::NoFinalPlace);
        }
        let mut ids = HashSet::new();
        let mut out = Vec::with_capacity(transitions.len());
        let mut outgoing = vec![Vec::new(); places.len()];
        for (id, from, to, guard) in transitions {
            if !ids.insert(id.clone()) {
                return Err(SpecNetError::DuplicateTransition(id));
            }
            let f = index(&from).ok_or_else(|| SpecNetError::UnknownPlace {
                transition: id.clone(),
                place: from.clone(),
            })?;
            let t = index(&to).ok_or_else(|| SpecNetError::UnknownPlace {
                transition: id.clone(),
                place: to.clone(),
            })?;
            outgoing[f].push(out.len());
            out.push(SpecTransition {
                id,
                from: f,
                to: t,
                guard,
            });
        }
        Ok(SpecNet {
            places,
            initial,
            finals: final_flags,
            transitions: out,
            outgoing,
        })
    }

    /// Canonical file form; guards print as conjunctions.
    pub fn to_def(&self) -> SpecNetDef {
        SpecNetDef {
            places: self.places.clone(),
            initial: self.places[self.initial].clone(),
            finals: self
                .places
                .iter()
                .zip(&self.finals)
                .filter(|(_, &f)| f)
                .map(|(p, _)| p.clone())
                .collect(),
            transitions: self
                .transitions
                .iter()
                .map(|t| SpecTransitionDef {
                    id: t.id.clone(),
                    from: self.places[t.from].clone(),
                    to: self.places[t.to].clone(),
                    guard: t.guard.to_string(),
                })
                .collect(),
        }
    }

    pub fn place_index(&self, id: &str) -> Option<usize> {
        self.places.iter().position(|p| p == id)
    }

    pub fn transition_index(&self, id: &str) -> Option<usize> {
        self.transitions.iter().position(|t| t.id == id)
    }

    pub fn outgoing(&self, place: usize) -> &[usize] {
        &self.outgoing[place]
    }

    pub fn is_final_place(&self, place: usize) -> bool {
        self.finals[place]
    }

    fn reachable_from(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.places.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(p) = queue.pop_front() {
            for &t in &self.outgoing[p] {
                let q = self.transitions[t].to;
                if !seen[q] {
                    seen[q] = true;
                    queue.push_back(q);
                }
            }
        }
        seen
    }

    /// Structural remarks that do not prevent simulation.
    pub fn warnings(&self) -> Vec<SpecWarning> {
        let mut out = Vec::new();
        let strongly_connected =
            (0..self.places.len()).all(|p| self.reachable_from(p).iter().all(|&r| r));
        if !strongly_connected {
            out.push(SpecWarning::NotStronglyConnected);
        }
        let from_initial = self.reachable_from(self.initial);
        if !from_initial.iter().zip(&self.finals).any(|(&r, &f)| r && f) {
            out.push(SpecWarning::FinalUnreachable);
        }
        out
    }

    pub fn to_dot(&self, marked: Option<usize>) -> String {
        let mut s = String::from("digraph spec {\n  rankdir=LR;\n");
        self.write_dot_body(&mut s, "S_", marked, "  ");
        s.push_str("}\n");
        s
    }

    pub(crate) fn write_dot_body(&self, s: &mut String, prefix: &str, marked: Option<usize>, indent: &str) {
        for (i, p) in self.places.iter().enumerate() {
            let shape = if self.finals[i] { "doublecircle" } else { "circle" };
            let token = if marked == Some(i) { " \u{25cf}" } else { "" };
            writeln!(s, "{indent}\"{prefix}{p}\" [shape={shape}, label=\"{p}{token}\"];").unwrap();
        }
        for t in &self.transitions {
            writeln!(
                s,
                "{indent}\"{prefix}{}\" [shape=box, label=\"{}\\n{}\"];",
                t.id, t.id, t.guard
            )
            .unwrap();
            writeln!(
                s,
                "{indent}\"{prefix}{}\" -> \"{prefix}{}\";",
                self.places[t.from], t.id
            )
            .unwrap();
            writeln!(
                s,
                "{indent}\"{prefix}{}\" -> \"{prefix}{}\";",
                t.id, self.places[t.to]
            )
            .unwrap();
        }
    }
}

/// A mission net together with its one-token marking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecOpn {
    net: Arc<SpecNet>,
    marked: usize,
}

impl SpecOpn {
    pub fn new(net: SpecNet) -> Self {
        let marked = net.initial;
        SpecOpn {
            net: Arc::new(net),
            marked,
        }
    }

    pub fn net(&self) -> &Arc<SpecNet> {
        &self.net
    }

    pub fn marked(&self) -> usize {
        self.marked
    }

    pub fn marked_place(&self) -> &str {
        &self.net.places[self.marked]
    }

    pub fn with_marking(&self, place: usize) -> SpecOpn {
        assert!(place < self.net.places.len(), "place index out of range");
        SpecOpn {
            net: Arc::clone(&self.net),
            marked: place,
        }
    }

    /// Marking-enabled transitions; guard truth is not considered here.
    pub fn spec_enabled(&self) -> &[usize] {
        self.net.outgoing(self.marked)
    }

    pub fn is_enabled(&self, t: usize) -> bool {
        self.net
            .transitions
            .get(t)
            .is_some_and(|tr| tr.from == self.marked)
    }

    pub fn fire(&mut self, t: usize) -> Result<(), SpecNetError> {
        if !self.is_enabled(t) {
            let transition = self
                .net
                .transitions
                .get(t)
                .map(|tr| tr.id.clone())
                .unwrap_or_else(|| format!("#{t}"));
            return Err(SpecNetError::NotEnabled { transition });
        }
        self.marked = self.net.transitions[t].to;
        Ok(())
    }

    pub fn fire_spec(&self, id: &str) -> Result<SpecOpn, SpecNetError> {
        let t = self
            .net
            .transition_index(id)
            .ok_or_else(|| SpecNetError::NotEnabled {
                transition: id.to_string(),
            })?;
        let mut next = self.clone();
        next.fire(t)?;
        Ok(next)
    }

    pub fn is_final(&self) -> bool {
        self.net.finals[self.marked]
    }
}
