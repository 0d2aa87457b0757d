//! Independent checks: explicit-state search for true optima, trace replay
//! and a finite-trace evaluator for the mission fragment.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::environment::Environment;
use crate::gef::{Binding, Move};
use crate::hlpn::{Hlpn, HlpnError, HlpnState};
use crate::logic::{LiteralMask, Observation};
use crate::ltl::{Formula, Term};
use crate::multiset::{Bag, Universe};
use crate::simulator::{Metric, Outcome, Trace, TraceRecorder};
use crate::spec_net::SpecNet;

pub const DEFAULT_STATE_BOUND: usize = 1_000_000;

/// Canonical product state: mission place plus the cell of every robot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ProductState {
    pub spec: usize,
    pub cells: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifierError {
    #[error("product exceeds {bound} states")]
    StateBound { bound: usize },
    #[error(transparent)]
    Model(#[from] HlpnError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchResult {
    Optimal { optimum: u64, witness: Trace },
    Unreachable,
}

struct Node {
    parent: Option<(usize, Binding)>,
    state: HlpnState,
}

/// True optimum over gef-licensed bindings: breadth-first for synchronized
/// steps, Dijkstra with edge cost = binding arity for total moves.
pub fn bfs_optimum(model: &Hlpn, metric: Metric, bound: usize) -> Result<SearchResult, VerifierError> {
    let init = model.initial_state()?;
    let mut nodes = vec![Node {
        parent: None,
        state: init.clone(),
    }];
    let mut index: HashMap<ProductState, usize> = HashMap::from([(init.key(), 0)]);
    let mut dist: Vec<u64> = vec![0];
    let mut done: Vec<bool> = vec![false];

    let goal = match metric {
        Metric::SyncSteps => {
            let mut queue = VecDeque::from([0usize]);
            let mut goal = None;
            while let Some(i) = queue.pop_front() {
                if nodes[i].state.is_final() {
                    goal = Some(i);
                    break;
                }
                for b in model.enabled_bindings(&nodes[i].state) {
                    let next = model.fire_binding(&nodes[i].state, &b)?;
                    let key = next.key();
                    if index.contains_key(&key) {
                        continue;
                    }
                    if nodes.len() >= bound {
                        return Err(VerifierError::StateBound { bound });
                    }
                    index.insert(key, nodes.len());
                    dist.push(dist[i] + 1);
                    nodes.push(Node {
                        parent: Some((i, b)),
                        state: next,
                    });
                    queue.push_back(nodes.len() - 1);
                }
            }
            goal
        }
        Metric::TotalMoves => {
            // Ties on cost are broken by discovery order, keeping the
            // witness deterministic.
            let mut heap = BinaryHeap::from([Reverse((0u64, 0usize))]);
            let mut goal = None;
            while let Some(Reverse((d, i))) = heap.pop() {
                if done[i] || d > dist[i] {
                    continue;
                }
                done[i] = true;
                if nodes[i].state.is_final() {
                    goal = Some(i);
                    break;
                }
                for b in model.enabled_bindings(&nodes[i].state) {
                    let next = model.fire_binding(&nodes[i].state, &b)?;
                    let nd = d + b.arity() as u64;
                    let key = next.key();
                    match index.get(&key) {
                        Some(&j) => {
                            if !done[j] && nd < dist[j] {
                                dist[j] = nd;
                                nodes[j].parent = Some((i, b));
                                heap.push(Reverse((nd, j)));
                            }
                        }
                        None => {
                            if nodes.len() >= bound {
                                return Err(VerifierError::StateBound { bound });
                            }
                            let j = nodes.len();
                            index.insert(key, j);
                            dist.push(nd);
                            done.push(false);
                            nodes.push(Node {
                                parent: Some((i, b)),
                                state: next,
                            });
                            heap.push(Reverse((nd, j)));
                        }
                    }
                }
            }
            goal
        }
    };

    let Some(goal) = goal else {
        return Ok(SearchResult::Unreachable);
    };
    let mut path = Vec::new();
    let mut cur = goal;
    while let Some((p, b)) = &nodes[cur].parent {
        path.push((*p, b.clone(), cur));
        cur = *p;
    }
    path.reverse();
    let mut rec = TraceRecorder::new(model);
    for (from, b, to) in &path {
        rec.record(&nodes[*from].state, b, &nodes[*to].state);
    }
    Ok(SearchResult::Optimal {
        optimum: dist[goal],
        witness: rec.finish(Outcome::ReachedFinal, None, None),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("step {step}: unknown mission transition `{id}`")]
    UnknownSpecTransition { step: usize, id: String },
    #[error("step {step}: unknown robot `{id}`")]
    UnknownRobot { step: usize, id: String },
    #[error("step {step}: robot `{robot}` has no transition `{id}`")]
    UnknownMove { step: usize, robot: String, id: String },
    #[error("step {step}: {source}")]
    Fire { step: usize, source: HlpnError },
    #[error("step {step}: recorded occupancy differs from the replayed one")]
    Occupancy { step: usize },
    #[error("step {step}: recorded mission place `{recorded}`, replay reached `{actual}`")]
    SpecPlace { step: usize, recorded: String, actual: String },
    #[error("replay ends outside every final place")]
    NotFinal,
    #[error(transparent)]
    Initial(HlpnError),
}

/// Re-executes `trace` from the initial state, checking every recorded
/// post-state; returns the last state, which must be final.
pub fn replay_detailed(trace: &Trace, model: &Hlpn) -> Result<HlpnState, ReplayError> {
    let mut state = model.initial_state().map_err(ReplayError::Initial)?;
    for (step, s) in trace.steps.iter().enumerate() {
        let spec_transition = state.spec.net().transition_index(&s.spec_t).ok_or_else(|| {
            ReplayError::UnknownSpecTransition {
                step,
                id: s.spec_t.clone(),
            }
        })?;
        let mut moves = Vec::with_capacity(s.moves.len());
        for (robot, t) in &s.moves {
            let r = model.robot_index(robot).ok_or_else(|| ReplayError::UnknownRobot {
                step,
                id: robot.clone(),
            })?;
            let transition = state.robots[r]
                .net()
                .transition_index(t)
                .ok_or_else(|| ReplayError::UnknownMove {
                    step,
                    robot: robot.clone(),
                    id: t.clone(),
                })?;
            moves.push(Move { robot: r, transition });
        }
        let binding = Binding {
            spec_transition,
            moves,
        };
        state = model
            .fire_binding(&state, &binding)
            .map_err(|source| ReplayError::Fire { step, source })?;
        let recorded = Bag::from_map(state.occupancy.universe(), &s.occupancy);
        if recorded.as_ref() != Ok(&state.occupancy) {
            return Err(ReplayError::Occupancy { step });
        }
        if state.spec.marked_place() != s.spec_place {
            return Err(ReplayError::SpecPlace {
                step,
                recorded: s.spec_place.clone(),
                actual: state.spec.marked_place().to_string(),
            });
        }
    }
    if !state.is_final() {
        return Err(ReplayError::NotFinal);
    }
    Ok(state)
}

/// True iff every step is licensed and firable, every recorded post-state
/// matches, and the replay ends in a final place.
pub fn replay(trace: &Trace, model: &Hlpn) -> bool {
    replay_detailed(trace, model).is_ok()
}

/// Observation sequence of a trace: the initial placement, then the
/// occupancy after each step. Steps with unknown propositions are skipped.
pub fn observations(trace: &Trace, model: &Hlpn) -> Vec<Observation> {
    let env: &Environment = model.env();
    let init: Vec<usize> = model.robots().iter().map(|r| r.cell()).collect();
    let mut out = vec![env.observation(&init)];
    for s in &trace.steps {
        if let Ok(bag) = Bag::from_map(env.props(), &s.occupancy) {
            out.push(env.observation_of_bag(&bag));
        }
    }
    out
}

/// Finite-trace semantics of the fragment, by direct recursion over
/// positions. Propositions outside `props` never hold.
pub fn eval_ltl(formula: &Formula, props: &Universe, trace: &[Observation]) -> bool {
    if trace.is_empty() {
        return false;
    }
    let lit = |l: &crate::logic::Literal, obs: Observation| {
        let v = props.index_of(&l.prop).is_some_and(|i| obs.holds(i));
        v == l.positive
    };
    formula.terms.iter().all(|t| match t {
        Term::Now(l) => lit(l, trace[0]),
        Term::Eventually(l) => trace.iter().any(|&o| lit(l, o)),
        Term::Until(a, b) => until(trace, 0, &|o| lit(a, o), &|o| lit(b, o)),
    })
}

fn until(trace: &[Observation], i: usize, a: &dyn Fn(Observation) -> bool, b: &dyn Fn(Observation) -> bool) -> bool {
    if i >= trace.len() {
        return false;
    }
    b(trace[i]) || (a(trace[i]) && until(trace, i + 1, a, b))
}

/// Acceptance march for mission nets: position 0 is the initial marking,
/// each later observation fires every transition whose guard it satisfies.
/// Nondeterminism is handled by tracking the set of reachable places; a
/// final place, once reached, stays in the set.
pub struct SpecAcceptor<'a> {
    net: &'a SpecNet,
    masks: Vec<LiteralMask>,
}

impl<'a> SpecAcceptor<'a> {
    /// # Panics
    /// If a guard mentions a proposition outside `props`.
    pub fn new(net: &'a SpecNet, props: &Universe) -> Self {
        let masks = net
            .transitions
            .iter()
            .map(|t| t.guard.resolve(props).expect("guard propositions in universe"))
            .collect();
        SpecAcceptor { net, masks }
    }

    pub fn initial(&self) -> Vec<bool> {
        let mut set = vec![false; self.net.places.len()];
        set[self.net.initial] = true;
        set
    }

    pub fn step(&self, set: &[bool], obs: Observation) -> Vec<bool> {
        let mut next = vec![false; set.len()];
        for (p, _) in set.iter().enumerate().filter(|(_, &on)| on) {
            if self.net.finals[p] {
                next[p] = true;
                continue;
            }
            for &t in self.net.outgoing(p) {
                if self.masks[t].holds(obs) {
                    next[self.net.transitions[t].to] = true;
                }
            }
        }
        next
    }

    pub fn accepting(&self, set: &[bool]) -> bool {
        set.iter().zip(&self.net.finals).any(|(&on, &f)| on && f)
    }

    /// Whether the net accepts `trace` (position 0 is skipped; it is baked
    /// into the initial marking).
    pub fn accepts(&self, trace: &[Observation]) -> bool {
        let mut set = self.initial();
        for &o in trace.iter().skip(1) {
            set = self.step(&set, o);
        }
        self.accepting(&set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::tests::case_study_def;
    use crate::hlpn::tests::{case_study, model_with};
    use crate::ltl::{compile_with_initial, parse_formula, CompileOptions};
    use crate::robot_net::robots_from_json;
    use crate::simulator::{run_once, SimConfig, TraceMetric};
    use indexmap::IndexMap;

    fn two_robot_case_study() -> Hlpn {
        let env = Environment::new(
            crate::environment::EnvironmentDef::from_json(include_str!(
                "../data/case_study/environment_two_robots.json"
            ))
            .unwrap(),
        )
        .unwrap();
        let spec = crate::ltl::compile_to_specopn(&parse_formula(crate::hlpn::tests::MISSION).unwrap(), &env).unwrap();
        let robots = robots_from_json(include_str!("../data/case_study/robots_two.json")).unwrap();
        model_with(env, &robots, spec)
    }

    fn obs(props: &Universe, names: &[&str]) -> Observation {
        names
            .iter()
            .fold(Observation::default(), |o, n| o.with(props.index_of(n).unwrap()))
    }

    #[test]
    fn case_study_optimum_in_steps_and_moves() {
        let m = case_study();
        let SearchResult::Optimal { optimum, witness } = bfs_optimum(&m, Metric::SyncSteps, DEFAULT_STATE_BOUND).unwrap() else {
            panic!("unreachable");
        };
        assert_eq!(optimum, 1);
        assert_eq!(witness.steps.len(), 1);
        assert!(replay(&witness, &m));
        let SearchResult::Optimal { optimum, witness } = bfs_optimum(&m, Metric::TotalMoves, DEFAULT_STATE_BOUND).unwrap() else {
            panic!("unreachable");
        };
        assert_eq!(optimum, 3);
        assert_eq!(witness.metric.total_moves, 3);
        let t = &m.spec().net().transitions[m.spec().net().transition_index(&witness.steps[0].spec_t).unwrap()];
        assert_eq!(t.guard.to_string(), "b1 & b2 & b3");
    }

    #[test]
    fn two_robots_need_more_steps() {
        let m = two_robot_case_study();
        let SearchResult::Optimal { optimum, witness } = bfs_optimum(&m, Metric::SyncSteps, DEFAULT_STATE_BOUND).unwrap() else {
            panic!("unreachable");
        };
        assert!(optimum > 1);
        assert!(replay(&witness, &m));
        assert_eq!(witness.metric.sync_steps, optimum);
    }

    #[test]
    fn unsatisfiable_mission_is_unreachable() {
        let env = Environment::new(case_study_def()).unwrap();
        let robots = robots_from_json(include_str!("../data/case_study/robots.json")).unwrap();
        let spec = SpecNet::from_parts(
            vec!["s".into(), "f".into()],
            "s",
            &["f".into()],
            vec![],
        )
        .unwrap();
        let m = model_with(env, &robots, spec);
        assert_eq!(bfs_optimum(&m, Metric::SyncSteps, DEFAULT_STATE_BOUND), Ok(SearchResult::Unreachable));
        assert_eq!(bfs_optimum(&m, Metric::TotalMoves, DEFAULT_STATE_BOUND), Ok(SearchResult::Unreachable));
    }

    #[test]
    fn state_bound_is_enforced() {
        let m = two_robot_case_study();
        assert_eq!(
            bfs_optimum(&m, Metric::SyncSteps, 2),
            Err(VerifierError::StateBound { bound: 2 })
        );
    }

    #[test]
    fn simulator_traces_replay() {
        let m = case_study();
        for seed in 0..30 {
            let t = run_once(&m, seed, &SimConfig::default());
            assert_eq!(replay(&t, &m), t.succeeded(), "seed {seed}");
        }
    }

    #[test]
    fn doctored_capacity_step_fails_replay() {
        let m = case_study();
        let SearchResult::Optimal { mut witness, .. } = bfs_optimum(&m, Metric::SyncSteps, DEFAULT_STATE_BOUND).unwrap() else {
            panic!();
        };
        // Send all three robots into p1 (capacity 2); r3 may enter p1 too.
        let moves: IndexMap<String, String> = ["r1", "r2", "r3"]
            .iter()
            .map(|r| (r.to_string(), "t_p4_p1".to_string()))
            .collect();
        witness.steps[0].moves = moves;
        assert!(matches!(
            replay_detailed(&witness, &m),
            Err(ReplayError::Fire { step: 0, source: HlpnError::NotLicensed })
        ));
    }

    #[test]
    fn empty_trace_on_final_initial_place() {
        let env = Environment::new(case_study_def()).unwrap();
        let robots = robots_from_json(include_str!("../data/case_study/robots.json")).unwrap();
        let spec = SpecNet::from_parts(vec!["f".into()], "f", &["f".into()], vec![]).unwrap();
        let m = model_with(env, &robots, spec);
        let t = Trace {
            run: None,
            seed: None,
            outcome: Outcome::ReachedFinal,
            steps: vec![],
            metric: TraceMetric {
                total_moves: 0,
                sync_steps: 0,
            },
            robot_moves: IndexMap::new(),
        };
        assert!(replay(&t, &m));
        assert_eq!(
            bfs_optimum(&m, Metric::TotalMoves, DEFAULT_STATE_BOUND).unwrap(),
            SearchResult::Optimal {
                optimum: 0,
                witness: Trace {
                    robot_moves: ["r1", "r2", "r3"].iter().map(|r| (r.to_string(), 0)).collect(),
                    ..t
                }
            }
        );
    }

    #[test]
    fn replay_detects_tampered_records() {
        let m = case_study();
        let SearchResult::Optimal { witness, .. } = bfs_optimum(&m, Metric::SyncSteps, DEFAULT_STATE_BOUND).unwrap() else {
            panic!();
        };
        let mut w = witness.clone();
        w.steps[0].occupancy.insert("b4".into(), 1);
        assert_eq!(replay_detailed(&w, &m).unwrap_err(), ReplayError::Occupancy { step: 0 });
        let mut w = witness.clone();
        w.steps[0].spec_t = "nope".into();
        assert!(matches!(replay_detailed(&w, &m), Err(ReplayError::UnknownSpecTransition { .. })));
        let mut w = witness;
        w.steps.clear();
        assert_eq!(replay_detailed(&w, &m).unwrap_err(), ReplayError::NotFinal);
    }

    #[test]
    fn eval_case_study_mission() {
        let env = Environment::new(case_study_def()).unwrap();
        let p = env.props();
        let f = parse_formula(crate::hlpn::tests::MISSION).unwrap();
        assert!(eval_ltl(&f, p, &[obs(p, &["b4"]), obs(p, &["b1", "b2", "b3"])]));
        assert!(!eval_ltl(&f, p, &[obs(p, &["b4"]), obs(p, &["b2", "b3"])]));
        assert!(!eval_ltl(&parse_formula("F b1").unwrap(), p, &[obs(p, &["b4"]), obs(p, &["b2"])]));
        assert!(!eval_ltl(&parse_formula("!b3 U b1").unwrap(), p, &[obs(p, &["b3"]), obs(p, &["b1"])]));
        assert!(eval_ltl(&parse_formula("!b3 U b1").unwrap(), p, &[obs(p, &["b4"]), obs(p, &["b1"])]));
        assert!(!eval_ltl(&parse_formula("F nowhere").unwrap(), p, &[obs(p, &["b4"])]));
        assert!(eval_ltl(&parse_formula("!nowhere").unwrap(), p, &[obs(p, &["b4"])]));
    }

    #[test]
    fn observations_of_witness() {
        let m = case_study();
        let SearchResult::Optimal { witness, .. } = bfs_optimum(&m, Metric::SyncSteps, DEFAULT_STATE_BOUND).unwrap() else {
            panic!();
        };
        let p = m.env().props();
        assert_eq!(observations(&witness, &m), vec![obs(p, &["b4"]), obs(p, &["b1", "b2", "b3"])]);
    }

    #[test]
    fn acceptor_agrees_with_evaluator_on_mission() {
        let env = Environment::new(case_study_def()).unwrap();
        let p = env.props().clone();
        let f = parse_formula(crate::hlpn::tests::MISSION).unwrap();
        let all: Vec<Observation> = (0..16u64).map(Observation).collect();
        for &o0 in &all {
            let net = compile_with_initial(&f, &env, o0, CompileOptions::default()).unwrap();
            let acc = SpecAcceptor::new(&net, &p);
            for &o1 in &all {
                for &o2 in &all {
                    let tr = [o0, o1, o2];
                    assert_eq!(acc.accepts(&tr), eval_ltl(&f, &p, &tr), "{tr:?}");
                }
            }
        }
    }
}
