//! Per-robot state-machine nets.
//!
//! Each place stands for a partition cell the robot may enter and each
//! transition for a move between two adjacent allowed cells. A net holds
//! exactly one token: the robot's current cell.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::Environment;
use crate::logic::Conjunction;

/// Robot file entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotDef {
    pub id: String,
    pub allowed_cells: Vec<String>,
    pub initial_cell: String,
}

pub fn robots_from_json(text: &str) -> serde_json::Result<Vec<RobotDef>> {
    serde_json::from_str(text)
}

pub fn robots_to_json(robots: &[RobotDef]) -> String {
    serde_json::to_string_pretty(robots).expect("robots serialize")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RobotNetError {
    #[error("robot `{robot}`: unknown cell `{cell}`")]
    UnknownCell { robot: String, cell: String },
    #[error("robot `{robot}`: initial cell `{cell}` is not an allowed cell")]
    InitialNotAllowed { robot: String, cell: String },
    #[error("robot `{robot}`: transition `{transition}` is not enabled")]
    NotEnabled { robot: String, transition: String },
    #[error("robot `{robot}`: no transition `{transition}`")]
    UnknownTransition { robot: String, transition: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RobotPlace {
    pub id: String,
    /// Index of the associated environment cell.
    pub cell: usize,
    pub label: Conjunction,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RobotTransition {
    pub id: String,
    pub input: usize,
    pub output: usize,
    /// Always the label of the output place.
    pub label: Conjunction,
}

/// Net structure, shared between all markings of the same robot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RobotNet {
    pub robot_id: String,
    pub places: Vec<RobotPlace>,
    pub transitions: Vec<RobotTransition>,
    outgoing: Vec<Vec<usize>>,
    place_of_cell: Vec<Option<usize>>,
}

impl RobotNet {
    pub fn place_of_cell(&self, cell: usize) -> Option<usize> {
        self.place_of_cell.get(cell).copied().flatten()
    }

    pub fn transition_index(&self, id: &str) -> Option<usize> {
        self.transitions.iter().position(|t| t.id == id)
    }

    pub fn outgoing(&self, place: usize) -> &[usize] {
        &self.outgoing[place]
    }

    /// Cell reached by firing transition `t`.
    pub fn target_cell(&self, t: usize) -> usize {
        self.places[self.transitions[t].output].cell
    }

    pub fn to_dot(&self, marked: Option<usize>) -> String {
        let mut s = String::new();
        writeln!(s, "digraph \"{}\" {{", self.robot_id).unwrap();
        writeln!(s, "  rankdir=LR;").unwrap();
        self.write_dot_body(&mut s, &format!("{}_", self.robot_id), marked, "  ");
        s.push_str("}\n");
        s
    }

    pub(crate) fn write_dot_body(&self, s: &mut String, prefix: &str, marked: Option<usize>, indent: &str) {
        for (i, p) in self.places.iter().enumerate() {
            let token = if marked == Some(i) { " \u{25cf}" } else { "" };
            writeln!(
                s,
                "{indent}\"{prefix}{}\" [shape=circle, label=\"{}{token}\\n{}\"];",
                p.id, p.id, p.label
            )
            .unwrap();
        }
        for t in &self.transitions {
            writeln!(
                s,
                "{indent}\"{prefix}{}\" [shape=box, label=\"{}\\n{}\"];",
                t.id, t.id, t.label
            )
            .unwrap();
            let (from, to) = (&self.places[t.input].id, &self.places[t.output].id);
            writeln!(s, "{indent}\"{prefix}{from}\" -> \"{prefix}{}\";", t.id).unwrap();
            writeln!(s, "{indent}\"{prefix}{}\" -> \"{prefix}{to}\";", t.id).unwrap();
        }
    }
}

/// A robot net together with its marking (the single marked place).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RobotOpn {
    net: Arc<RobotNet>,
    marked: usize,
}

/// Builds the net of one robot. Places follow the environment's cell order;
/// transitions are `t_<src>_<dst>` for every ordered adjacent pair.
pub fn build_robot_net(env: &Environment, def: &RobotDef) -> Result<RobotOpn, RobotNetError> {
    let mut allowed = HashSet::new();
    for c in &def.allowed_cells {
        let idx = env.cell_index(c).map_err(|_| RobotNetError::UnknownCell {
            robot: def.id.clone(),
            cell: c.clone(),
        })?;
        allowed.insert(idx);
    }
    let initial = env
        .cell_index(&def.initial_cell)
        .map_err(|_| RobotNetError::UnknownCell {
            robot: def.id.clone(),
            cell: def.initial_cell.clone(),
        })?;
    if !allowed.contains(&initial) {
        return Err(RobotNetError::InitialNotAllowed {
            robot: def.id.clone(),
            cell: def.initial_cell.clone(),
        });
    }

    let mut places = Vec::new();
    let mut place_of_cell = vec![None; env.cells().len()];
    for (cell, slot) in place_of_cell.iter_mut().enumerate() {
        if allowed.contains(&cell) {
            *slot = Some(places.len());
            places.push(RobotPlace {
                id: env.cells().label(cell).to_string(),
                cell,
                label: env.label_of(cell),
            });
        }
    }
    let mut transitions = Vec::new();
    let mut outgoing = vec![Vec::new(); places.len()];
    for (i, src) in places.iter().enumerate() {
        for (j, dst) in places.iter().enumerate() {
            if i != j && env.adjacent(src.cell, dst.cell) {
                outgoing[i].push(transitions.len());
                transitions.push(RobotTransition {
                    id: format!("t_{}_{}", src.id, dst.id),
                    input: i,
                    output: j,
                    label: dst.label.clone(),
                });
            }
        }
    }
    let marked = place_of_cell[initial].expect("initial cell is allowed");
    Ok(RobotOpn {
        net: Arc::new(RobotNet {
            robot_id: def.id.clone(),
            places,
            transitions,
            outgoing,
            place_of_cell,
        }),
        marked,
    })
}

impl RobotOpn {
    pub fn net(&self) -> &Arc<RobotNet> {
        &self.net
    }

    pub fn robot_id(&self) -> &str {
        &self.net.robot_id
    }

    pub fn marked(&self) -> usize {
        self.marked
    }

    pub fn marked_place(&self) -> &RobotPlace {
        &self.net.places[self.marked]
    }

    /// Environment cell currently occupied by the robot.
    pub fn cell(&self) -> usize {
        self.net.places[self.marked].cell
    }

    /// Marking as a 0/1 vector over places.
    pub fn marking_vector(&self) -> Vec<u8> {
        (0..self.net.places.len())
            .map(|i| u8::from(i == self.marked))
            .collect()
    }

    pub fn with_marking(&self, place: usize) -> RobotOpn {
        assert!(place < self.net.places.len(), "place index out of range");
        RobotOpn {
            net: Arc::clone(&self.net),
            marked: place,
        }
    }

    /// Indices of the transitions whose input place is marked.
    pub fn enabled_moves(&self) -> &[usize] {
        self.net.outgoing(self.marked)
    }

    pub fn enabled_move_ids(&self) -> Vec<&str> {
        self.enabled_moves()
            .iter()
            .map(|&t| self.net.transitions[t].id.as_str())
            .collect()
    }

    pub fn is_enabled(&self, t: usize) -> bool {
        self.net
            .transitions
            .get(t)
            .is_some_and(|tr| tr.input == self.marked)
    }

    pub fn fire(&mut self, t: usize) -> Result<(), RobotNetError> {
        if !self.is_enabled(t) {
            let transition = self
                .net
                .transitions
                .get(t)
                .map(|tr| tr.id.clone())
                .unwrap_or_else(|| format!("#{t}"));
            return Err(RobotNetError::NotEnabled {
                robot: self.net.robot_id.clone(),
                transition,
            });
        }
        self.marked = self.net.transitions[t].output;
        Ok(())
    }

    pub fn fire_move(&self, id: &str) -> Result<RobotOpn, RobotNetError> {
        let t = self
            .net
            .transition_index(id)
            .ok_or_else(|| RobotNetError::UnknownTransition {
                robot: self.net.robot_id.clone(),
                transition: id.to_string(),
            })?;
        let mut next = self.clone();
        next.fire(t)?;
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::tests::case_study_def;
    use proptest::prelude::*;

    fn env() -> Environment {
        Environment::new(case_study_def()).unwrap()
    }

    fn def(id: &str, allowed: &[&str], init: &str) -> RobotDef {
        RobotDef {
            id: id.into(),
            allowed_cells: allowed.iter().map(|s| s.to_string()).collect(),
            initial_cell: init.into(),
        }
    }

    const ALL: [&str; 5] = ["p1", "p2", "p3", "p4", "p5"];

    #[test]
    fn full_robot() {
        let r1 = build_robot_net(&env(), &def("r1", &ALL, "p4")).unwrap();
        assert_eq!(r1.net().places.len(), 5);
        assert_eq!(r1.net().transitions.len(), 10);
        assert_eq!(r1.marked_place().id, "p4");
        assert_eq!(r1.marking_vector(), vec![0, 0, 0, 1, 0]);
    }

    #[test]
    fn restricted_robot_excludes_overlap() {
        let r3 = build_robot_net(&env(), &def("r3", &["p1", "p3", "p4", "p5"], "p4")).unwrap();
        assert_eq!(r3.net().places.len(), 4);
        assert!(r3
            .net()
            .transitions
            .iter()
            .all(|t| !t.id.contains("p2")));
        let at_p3 = r3.fire_move("t_p4_p3").unwrap();
        assert_eq!(at_p3.enabled_move_ids(), vec!["t_p3_p4"]);
    }

    #[test]
    fn isolated_robot() {
        let r = build_robot_net(&env(), &def("r", &["p4"], "p4")).unwrap();
        assert_eq!(r.net().places.len(), 1);
        assert!(r.net().transitions.is_empty());
        assert!(r.enabled_moves().is_empty());
    }

    #[test]
    fn construction_errors() {
        assert_eq!(
            build_robot_net(&env(), &def("r", &["p1"], "p4")),
            Err(RobotNetError::InitialNotAllowed {
                robot: "r".into(),
                cell: "p4".into()
            })
        );
        assert!(matches!(
            build_robot_net(&env(), &def("r", &["p4", "q"], "p4")),
            Err(RobotNetError::UnknownCell { .. })
        ));
    }

    #[test]
    fn moves_from_free_space() {
        let r1 = build_robot_net(&env(), &def("r1", &ALL, "p4")).unwrap();
        assert_eq!(r1.enabled_move_ids(), vec!["t_p4_p1", "t_p4_p3", "t_p4_p5"]);
    }

    #[test]
    fn fire_and_undo() {
        let r1 = build_robot_net(&env(), &def("r1", &ALL, "p4")).unwrap();
        let moved = r1.fire_move("t_p4_p1").unwrap();
        assert_eq!(moved.marked_place().id, "p1");
        assert_eq!(moved.fire_move("t_p1_p4").unwrap(), r1);
        assert!(matches!(
            r1.fire_move("t_p3_p2"),
            Err(RobotNetError::NotEnabled { .. })
        ));
        assert!(matches!(
            r1.fire_move("t_p4_p2"),
            Err(RobotNetError::UnknownTransition { .. })
        ));
    }

    #[test]
    fn labels_follow_output_places() {
        let e = env();
        let r1 = build_robot_net(&e, &def("r1", &ALL, "p4")).unwrap();
        for t in &r1.net().transitions {
            assert_eq!(t.label, r1.net().places[t.output].label);
            assert!(e.adjacent(
                r1.net().places[t.input].cell,
                r1.net().places[t.output].cell
            ));
        }
        assert_eq!(
            r1.net().transitions[r1.net().transition_index("t_p3_p2").unwrap()]
                .label
                .to_string(),
            "b2 & b3"
        );
    }

    #[test]
    fn deterministic_construction() {
        let a = build_robot_net(&env(), &def("r1", &ALL, "p4")).unwrap();
        let b = build_robot_net(&env(), &def("r1", &["p5", "p4", "p3", "p2", "p1"], "p4")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dot_export_mentions_labels() {
        let r1 = build_robot_net(&env(), &def("r1", &ALL, "p4")).unwrap();
        let dot = r1.net().to_dot(Some(r1.marked()));
        assert!(dot.starts_with("digraph \"r1\""));
        assert!(dot.contains("\"r1_t_p3_p2\" [shape=box, label=\"t_p3_p2\\nb2 & b3\"]"));
    }

    proptest! {
        #[test]
        fn random_walks_stay_safe(choices in proptest::collection::vec(0usize..8, 0..40)) {
            let e = env();
            let mut r = build_robot_net(&e, &def("r1", &ALL, "p4")).unwrap();
            for c in choices {
                let moves = r.enabled_moves().to_vec();
                prop_assert!(!moves.is_empty());
                let t = moves[c % moves.len()];
                r.fire(t).unwrap();
                prop_assert_eq!(r.marking_vector().iter().map(|&m| m as u32).sum::<u32>(), 1);
                // The fired transition's label holds under the robot's new cell.
                let obs = e.observation(&[r.cell()]);
                let mask = r.net().transitions[t].label.resolve(e.props()).unwrap();
                prop_assert!(mask.holds(obs));
            }
        }
    }
}
