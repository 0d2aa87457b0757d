//! The system net: a mission token and one token per robot, synchronized by
//! the global enabling function.
//!
//! The system net's transition `t_i` moves `i` robots at once. Here the
//! arity is carried by the binding itself (`Binding::moves`), and object
//! nets are updated in place inside each run's private copy of the state.

use std::collections::HashSet;
use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use thiserror::Error;

use crate::environment::Environment;
use crate::gef::{check_moves, gef, guard_holds, simulate_moves, Binding, GefError, Move};
use crate::multiset::Bag;
use crate::robot_net::RobotOpn;
use crate::spec_net::SpecOpn;
use crate::verifier::ProductState;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HlpnError {
    #[error("the team is empty")]
    EmptyTeam,
    #[error("robot `{0}` declared twice")]
    DuplicateRobot(String),
    #[error("mission transition `{transition}` uses unknown proposition `{prop}`")]
    UnknownProposition { transition: String, prop: String },
    #[error("cell `{cell}` holds {count} robots but its capacity is {capacity}")]
    Capacity { cell: String, count: u64, capacity: u64 },
    #[error("robot `{robot}` may not occupy cell `{cell}`")]
    NotAllowed { robot: String, cell: String },
    #[error("mission place #{0} does not exist")]
    UnknownSpecPlace(usize),
    #[error("placement lists {given} robots, the team has {team}")]
    PlacementSize { given: usize, team: usize },
    #[error("binding is not licensed by the global enabling function")]
    NotLicensed,
    #[error(transparent)]
    Gef(#[from] GefError),
}

/// Global state: mission marking, robot markings and region occupancy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HlpnState {
    pub spec: SpecOpn,
    pub robots: Vec<RobotOpn>,
    pub occupancy: Bag,
}

impl HlpnState {
    /// Cell index of every robot, in team order.
    pub fn placement(&self) -> Vec<usize> {
        self.robots.iter().map(|r| r.cell()).collect()
    }

    pub fn key(&self) -> ProductState {
        ProductState {
            spec: self.spec.marked(),
            cells: self.placement(),
        }
    }

    pub fn is_final(&self) -> bool {
        self.spec.is_final()
    }
}

/// The assembled model: environment, robot nets (with initial markings)
/// and mission net (with initial marking).
#[derive(Debug, Clone)]
pub struct Hlpn {
    env: Arc<Environment>,
    robots: Vec<RobotOpn>,
    spec: SpecOpn,
    guards: Vec<Vec<(usize, bool)>>,
}

impl Hlpn {
    pub fn new(env: Arc<Environment>, robots: Vec<RobotOpn>, spec: SpecOpn) -> Result<Self, HlpnError> {
        if robots.is_empty() {
            return Err(HlpnError::EmptyTeam);
        }
        let mut ids = HashSet::new();
        for r in &robots {
            if !ids.insert(r.robot_id().to_string()) {
                return Err(HlpnError::DuplicateRobot(r.robot_id().to_string()));
            }
        }
        let props = env.props();
        let guards = spec
            .net()
            .transitions
            .iter()
            .map(|t| {
                t.guard
                    .literals()
                    .iter()
                    .map(|l| {
                        props
                            .index_of(&l.prop)
                            .map(|i| (i, l.positive))
                            .ok_or_else(|| HlpnError::UnknownProposition {
                                transition: t.id.clone(),
                                prop: l.prop.clone(),
                            })
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Hlpn {
            env,
            robots,
            spec,
            guards,
        })
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn env_arc(&self) -> &Arc<Environment> {
        &self.env
    }

    /// Robots with their initial markings.
    pub fn robots(&self) -> &[RobotOpn] {
        &self.robots
    }

    /// Mission net with its initial marking.
    pub fn spec(&self) -> &SpecOpn {
        &self.spec
    }

    pub fn team_size(&self) -> usize {
        self.robots.len()
    }

    pub fn robot_index(&self, id: &str) -> Option<usize> {
        self.robots.iter().position(|r| r.robot_id() == id)
    }

    /// Guard of a mission transition as `(proposition index, positive)`.
    pub fn guard(&self, spec_transition: usize) -> &[(usize, bool)] {
        &self.guards[spec_transition]
    }

    fn check_capacity(&self, placement: &[usize]) -> Result<(), HlpnError> {
        let chi = self.env.cell_occupancy(placement);
        for (cell, (&count, &cap)) in chi
            .counts()
            .iter()
            .zip(self.env.capacity().counts())
            .enumerate()
        {
            if count > cap {
                return Err(HlpnError::Capacity {
                    cell: self.env.cells().label(cell).to_string(),
                    count,
                    capacity: cap,
                });
            }
        }
        Ok(())
    }

    pub fn initial_state(&self) -> Result<HlpnState, HlpnError> {
        let placement: Vec<usize> = self.robots.iter().map(|r| r.cell()).collect();
        self.check_capacity(&placement)?;
        Ok(HlpnState {
            spec: self.spec.clone(),
            robots: self.robots.clone(),
            occupancy: self.env.prop_occupancy(&placement),
        })
    }

    /// Builds the state with the mission token on `spec_place` and each
    /// robot in the given cell.
    pub fn state_at(&self, key: &ProductState) -> Result<HlpnState, HlpnError> {
        if key.spec >= self.spec.net().places.len() {
            return Err(HlpnError::UnknownSpecPlace(key.spec));
        }
        if key.cells.len() != self.robots.len() {
            return Err(HlpnError::PlacementSize {
                given: key.cells.len(),
                team: self.robots.len(),
            });
        }
        let mut robots = Vec::with_capacity(self.robots.len());
        for (r, &cell) in self.robots.iter().zip(&key.cells) {
            let place = r.net().place_of_cell(cell).ok_or_else(|| HlpnError::NotAllowed {
                robot: r.robot_id().to_string(),
                cell: self
                    .env
                    .cells()
                    .labels()
                    .get(cell)
                    .cloned()
                    .unwrap_or_else(|| format!("#{cell}")),
            })?;
            robots.push(r.with_marking(place));
        }
        self.check_capacity(&key.cells)?;
        Ok(HlpnState {
            spec: self.spec.with_marking(key.spec),
            robots,
            occupancy: self.env.prop_occupancy(&key.cells),
        })
    }

    /// Mission transitions enabled by marking, ordered by id.
    fn spec_candidates(&self, state: &HlpnState) -> Vec<usize> {
        let net = state.spec.net();
        let mut ts = state.spec.spec_enabled().to_vec();
        ts.sort_by(|&a, &b| net.transitions[a].id.cmp(&net.transitions[b].id));
        ts
    }

    /// Every robot move set in canonical order: arity ascending, then robot
    /// subsets lexicographically, then move ids lexicographically.
    pub fn move_sets(&self, state: &HlpnState) -> Vec<Vec<Move>> {
        let n = state.robots.len();
        let moves_of: Vec<Vec<usize>> = state
            .robots
            .iter()
            .map(|r| {
                let mut m = r.enabled_moves().to_vec();
                m.sort_by(|&a, &b| r.net().transitions[a].id.cmp(&r.net().transitions[b].id));
                m
            })
            .collect();
        let mut out = Vec::new();
        for arity in 1..=n {
            for subset in combinations(n, arity) {
                if subset.iter().any(|&r| moves_of[r].is_empty()) {
                    continue;
                }
                let mut digits = vec![0usize; arity];
                loop {
                    out.push(
                        subset
                            .iter()
                            .zip(&digits)
                            .map(|(&robot, &d)| Move {
                                robot,
                                transition: moves_of[robot][d],
                            })
                            .collect(),
                    );
                    // odometer, last robot varies fastest
                    let mut k = arity;
                    loop {
                        if k == 0 {
                            break;
                        }
                        k -= 1;
                        digits[k] += 1;
                        if digits[k] < moves_of[subset[k]].len() {
                            break;
                        }
                        digits[k] = 0;
                        if k == 0 {
                            k = usize::MAX;
                            break;
                        }
                    }
                    if k == usize::MAX {
                        break;
                    }
                }
            }
        }
        out
    }

    /// All licensed bindings in canonical order: mission transitions by id,
    /// then the order of [`Hlpn::move_sets`]. Empty means deadlock.
    pub fn enabled_bindings(&self, state: &HlpnState) -> Vec<Binding> {
        let sims: Vec<_> = self
            .move_sets(state)
            .into_iter()
            .map(|moves| {
                let sim = simulate_moves(self, state, &moves);
                (moves, sim)
            })
            .filter(|(_, sim)| sim.within_capacity)
            .collect();
        let mut out = Vec::new();
        for t in self.spec_candidates(state) {
            let guard = self.guard(t);
            for (moves, sim) in &sims {
                if guard.is_empty() || guard_holds(guard, &sim.prop_occupancy) {
                    out.push(Binding {
                        spec_transition: t,
                        moves: moves.clone(),
                    });
                }
            }
        }
        out
    }

    /// Random stream of licensed bindings using at most `budget` guard
    /// evaluations. Each draw picks a marking-enabled mission transition, an
    /// arity, a robot subset of that size and one enabled move per robot,
    /// all uniformly; unlicensed draws are rejected.
    pub fn sample_bindings<'a, R: Rng>(
        &'a self,
        state: &'a HlpnState,
        rng: &'a mut R,
        budget: usize,
    ) -> SampledBindings<'a, R> {
        SampledBindings {
            model: self,
            state,
            rng,
            remaining: budget,
            spec_ts: state.spec.spec_enabled().to_vec(),
        }
    }

    /// Fires a licensed binding, returning the successor state.
    pub fn fire_binding(&self, state: &HlpnState, binding: &Binding) -> Result<HlpnState, HlpnError> {
        if !gef(self, state, binding)? {
            return Err(HlpnError::NotLicensed);
        }
        let mut next = state.clone();
        next.spec
            .fire(binding.spec_transition)
            .expect("gef checked marking enabledness");
        for m in &binding.moves {
            next.robots[m.robot]
                .fire(m.transition)
                .expect("gef checked marking enabledness");
        }
        next.occupancy = self.env.prop_occupancy(&next.placement());
        debug_assert!(self.check_capacity(&next.placement()).is_ok());
        Ok(next)
    }
}

pub struct SampledBindings<'a, R> {
    model: &'a Hlpn,
    state: &'a HlpnState,
    rng: &'a mut R,
    remaining: usize,
    spec_ts: Vec<usize>,
}

impl<R: Rng> Iterator for SampledBindings<'_, R> {
    type Item = Binding;

    fn next(&mut self) -> Option<Binding> {
        let n = self.state.robots.len();
        while self.remaining > 0 && !self.spec_ts.is_empty() {
            self.remaining -= 1;
            let spec_transition = self.spec_ts[self.rng.random_range(0..self.spec_ts.len())];
            let arity = self.rng.random_range(1..=n);
            let mut robots = index::sample(self.rng, n, arity).into_vec();
            robots.sort_unstable();
            let mut moves = Vec::with_capacity(arity);
            for robot in robots {
                let enabled = self.state.robots[robot].enabled_moves();
                if enabled.is_empty() {
                    break;
                }
                let transition = enabled[self.rng.random_range(0..enabled.len())];
                moves.push(Move { robot, transition });
            }
            if moves.len() != arity {
                continue;
            }
            let binding = Binding {
                spec_transition,
                moves,
            };
            debug_assert!(check_moves(self.state, &binding.moves).is_ok());
            if gef(self.model, self.state, &binding).expect("sampled bindings are well-formed") {
                return Some(binding);
            }
        }
        None
    }
}

/// k-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < n - k + i {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}
